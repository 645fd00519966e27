use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::harness::{Arch, ExperimentConfig, Losses, ModelKind, SetModel};
use crate::io_util::write_atomic;
use crate::laf::NUM_PARAMS;
use crate::ndcore::{ParamSnapshot, ParamStore};

/// Schema version written into every run file.
pub const RECORD_VERSION: u64 = 1;
pub const RUN_FILE: &str = "run.json";
pub const RESULTS_FILE: &str = "results.csv";
pub const WEIGHTS_FILE: &str = "weights.json";
pub const CSV_HEADER: [&str; 5] = ["target", "model", "M", "mae", "seed"];

/// Outcome of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub version: u64,
    pub config: ExperimentConfig,
    pub losses: Losses,
    pub best_epoch: usize,
    pub final_lr: f64,
    /// Test MAE per maximum cardinality `M`.
    pub test_mae: BTreeMap<usize, f64>,
    /// Learned LAF units, empty for fixed pools.
    pub laf_params: Vec<[f64; NUM_PARAMS]>,
    pub wall_time_s: f64,
    /// SHA-256 over the settings that determine the generated data.
    pub dataset_hash: String,
}

/// Hex SHA-256 of everything the datasets of `cfg` are a function of.
pub fn dataset_hash(cfg: &ExperimentConfig) -> String {
    let key = format!(
        "task={};target={};seed={};train={};val={};test={};train_m={};sweep={:?};mnist_images={}",
        cfg.task,
        cfg.target,
        cfg.seed,
        cfg.train_size,
        cfg.val_size,
        cfg.test_size,
        cfg.train_m,
        cfg.sweep,
        cfg.mnist_images
    );
    Sha256::digest(key.as_bytes())
        .iter()
        .map(|b| format!("{:02x}", b))
        .collect()
}

fn json_error(path: &Path, source: serde_json::Error) -> Error {
    Error::Json {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let offset = e.position().map_or(0, |p| p.byte());
    Error::format(path, offset, e.to_string())
}

/// Per-`M` rows with the `target,model,M,mae,seed` header.
pub fn results_csv(record: &RunRecord) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let path = Path::new(RESULTS_FILE);
    w.write_record(CSV_HEADER).map_err(|e| csv_error(path, e))?;
    let (target, model, seed) = (
        record.config.target.to_string(),
        record.config.model.to_string(),
        record.config.seed.to_string(),
    );
    for (m, mae) in &record.test_mae {
        w.write_record([target.as_str(), model.as_str(), &m.to_string(), &mae.to_string(), seed.as_str()])
            .map_err(|e| csv_error(path, e))?;
    }
    w.into_inner()
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))
}

/// Writes `run.json` and `results.csv` into `dir`, each atomically.
pub fn persist(record: &RunRecord, dir: &Path) -> Result<()> {
    let json = serde_json::to_vec_pretty(record).map_err(|e| json_error(&dir.join(RUN_FILE), e))?;
    write_atomic(&dir.join(RUN_FILE), &json)?;
    write_atomic(&dir.join(RESULTS_FILE), &results_csv(record)?)
}

fn read_versioned(path: &Path) -> Result<serde_json::Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| json_error(path, e))?;
    let found = value
        .get("version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::format(path, 0, "missing integer `version` field"))?;
    if found != RECORD_VERSION {
        return Err(Error::Version {
            path: path.to_path_buf(),
            found,
            supported: RECORD_VERSION,
        });
    }
    Ok(value)
}

/// Reads a record written by [`persist`] and checks `results.csv` agrees with it.
pub fn load(dir: &Path) -> Result<RunRecord> {
    let path = dir.join(RUN_FILE);
    let record: RunRecord = serde_json::from_value(read_versioned(&path)?).map_err(|e| json_error(&path, e))?;

    let csv_path = dir.join(RESULTS_FILE);
    let bytes = std::fs::read(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let mut r = csv::Reader::from_reader(bytes.as_slice());
    let header = r.headers().map_err(|e| csv_error(&csv_path, e))?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::format(&csv_path, 0, format!("unexpected header {:?}", header)));
    }
    let mut rows = BTreeMap::new();
    for row in r.records() {
        let row = row.map_err(|e| csv_error(&csv_path, e))?;
        let at = row.position().map_or(0, |p| p.byte());
        let m: usize = row[2].parse().map_err(|_| Error::format(&csv_path, at, "bad M"))?;
        let mae: f64 = row[3].parse().map_err(|_| Error::format(&csv_path, at, "bad mae"))?;
        rows.insert(m, mae);
    }
    if rows != record.test_mae {
        return Err(Error::format(&csv_path, 0, "rows disagree with run.json"));
    }
    Ok(record)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsFile {
    version: u64,
    arch: Arch,
    model: ModelKind,
    params: ParamSnapshot,
}

pub fn persist_weights(model: &SetModel, dir: &Path) -> Result<()> {
    let file = WeightsFile {
        version: RECORD_VERSION,
        arch: model.arch,
        model: model.kind,
        params: model.params.snapshot(),
    };
    let path = dir.join(WEIGHTS_FILE);
    let json = serde_json::to_vec(&file).map_err(|e| json_error(&path, e))?;
    write_atomic(&path, &json)
}

pub fn load_weights(dir: &Path) -> Result<SetModel> {
    let path = dir.join(WEIGHTS_FILE);
    let file: WeightsFile = serde_json::from_value(read_versioned(&path)?).map_err(|e| json_error(&path, e))?;
    let mut params = ParamStore::new();
    for (name, t) in file.params.0 {
        params.insert(name, t);
    }
    Ok(SetModel {
        arch: file.arch,
        kind: file.model,
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::TargetKind;
    use crate::harness::Task;

    pub(crate) fn synthetic() -> RunRecord {
        RunRecord {
            version: RECORD_VERSION,
            config: ExperimentConfig::desk(Task::Scalar, ModelKind::laf(), TargetKind::Mean),
            losses: Losses {
                train: vec![3.0, 1.25, 0.1 + 0.2],
                val: vec![3.5, 1.0, 1.0 / 3.0],
            },
            best_epoch: 2,
            final_lr: 5e-4,
            test_mae: [(5, 0.125), (10, 0.2), (50, std::f64::consts::PI)].into_iter().collect(),
            laf_params: vec![[0.5; NUM_PARAMS], [1.0 / 7.0; NUM_PARAMS]],
            wall_time_s: 12.345678901234,
            dataset_hash: "abc".into(),
        }
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let r = synthetic();
        persist(&r, dir.path()).unwrap();
        assert_eq!(load(dir.path()).unwrap(), r);
        let csv = std::fs::read_to_string(dir.path().join(RESULTS_FILE)).unwrap();
        assert!(csv.starts_with("target,model,M,mae,seed\n"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn newer_version_rejected() {
        let dir = tempfile::tempdir().unwrap();
        persist(&synthetic(), dir.path()).unwrap();
        let p = dir.path().join(RUN_FILE);
        let mut v: serde_json::Value = serde_json::from_slice(&std::fs::read(&p).unwrap()).unwrap();
        v["version"] = serde_json::json!(2);
        std::fs::write(&p, serde_json::to_vec(&v).unwrap()).unwrap();
        assert!(matches!(load(dir.path()), Err(Error::Version { found: 2, .. })));
    }

    #[test]
    fn missing_and_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load(dir.path()), Err(Error::Io { .. })));
        std::fs::write(dir.path().join(RUN_FILE), "{not json").unwrap();
        assert!(load(dir.path()).unwrap_err().is_io_or_format());
    }

    #[test]
    fn hash_depends_on_seed() {
        let a = ExperimentConfig::desk(Task::Scalar, ModelKind::laf(), TargetKind::Mean);
        let b = ExperimentConfig { seed: 1, ..a.clone() };
        assert_eq!(dataset_hash(&a).len(), 64);
        assert_ne!(dataset_hash(&a), dataset_hash(&b));
    }
}
