use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;

use crate::datasets::ScalarSetSample;
use crate::error::{Error, Result};
use crate::seed::rng_for;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
/// Environment variable naming the directory with the IDX files.
pub const DATA_DIR_ENV: &str = "LAF_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// Decoded images (row-major, scaled to `[0, 1]`) and their digit labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MnistData {
    pub split: Split,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<f64>,
    pub labels: Vec<u8>,
    by_digit: [Vec<usize>; 10],
}

impl MnistData {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, i: usize) -> &[f64] {
        let n = self.image_len();
        &self.pixels[i * n..(i + 1) * n]
    }

    /// Indices of all images showing `digit`.
    pub fn indices_of(&self, digit: u8) -> &[usize] {
        &self.by_digit[digit as usize]
    }

    /// Keeps the first `n` images.
    pub fn truncated(mut self, n: usize) -> Self {
        let n = n.min(self.len());
        self.pixels.truncate(n * self.image_len());
        self.labels.truncate(n);
        self.by_digit = index_digits(&self.labels);
        self
    }
}

fn index_digits(labels: &[u8]) -> [Vec<usize>; 10] {
    let mut by_digit: [Vec<usize>; 10] = Default::default();
    for (i, &l) in labels.iter().enumerate() {
        by_digit[l as usize].push(i);
    }
    by_digit
}

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(
                self.path,
                self.bytes.len() as u64,
                format!("truncated file: {} needs {} bytes from offset {}", what, n, self.pos),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Parses an IDX image file and its label file.
pub fn mnist_load_idx(images_path: &Path, labels_path: &Path, split: Split) -> Result<MnistData> {
    let img_bytes = read_file(images_path)?;
    let lbl_bytes = read_file(labels_path)?;

    let mut r = Reader {
        path: images_path,
        bytes: &img_bytes,
        pos: 0,
    };
    let magic = r.u32("magic")?;
    if magic != IMAGE_MAGIC {
        return Err(Error::format(images_path, 0, format!("bad magic {:#010x}, expected {:#010x}", magic, IMAGE_MAGIC)));
    }
    let n = r.u32("item count")? as usize;
    let rows = r.u32("row count")? as usize;
    let cols = r.u32("column count")? as usize;
    let raw = r.take(n * rows * cols, "pixel data")?;
    let pixels: Vec<f64> = raw.iter().map(|&p| f64::from(p) / 255.0).collect();

    let mut l = Reader {
        path: labels_path,
        bytes: &lbl_bytes,
        pos: 0,
    };
    let magic = l.u32("magic")?;
    if magic != LABEL_MAGIC {
        return Err(Error::format(labels_path, 0, format!("bad magic {:#010x}, expected {:#010x}", magic, LABEL_MAGIC)));
    }
    let m = l.u32("item count")? as usize;
    if m != n {
        return Err(Error::format(labels_path, 4, format!("label count {} differs from image count {}", m, n)));
    }
    let labels = l.take(n, "label data")?.to_vec();
    if let Some(i) = labels.iter().position(|&d| d > 9) {
        return Err(Error::format(labels_path, 8 + i as u64, format!("label {} is not a digit", labels[i])));
    }
    let by_digit = index_digits(&labels);
    Ok(MnistData {
        split,
        rows,
        cols,
        pixels,
        labels,
        by_digit,
    })
}

/// `LAF_DATA_DIR` if set, else `data/mnist` at the workspace root.
pub fn default_data_dir() -> PathBuf {
    match std::env::var_os(DATA_DIR_ENV) {
        Some(d) => PathBuf::from(d),
        None => Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"),
    }
}

fn find(dir: &Path, stem: &str, kind: &str) -> Result<PathBuf> {
    let candidates = [format!("{stem}-{kind}"), format!("{stem}.{kind}")];
    candidates
        .iter()
        .map(|c| dir.join(c))
        .find(|p| p.is_file())
        .ok_or_else(|| {
            Error::io(
                dir.join(&candidates[0]),
                std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("MNIST file not found (set {} to the directory holding it)", DATA_DIR_ENV),
                ),
            )
        })
}

/// Loads one split from `dir`, accepting `train-images-idx3-ubyte` and
/// `train-images.idx3-ubyte` style names.
pub fn load_split(dir: &Path, split: Split) -> Result<MnistData> {
    let prefix = match split {
        Split::Train => "train",
        Split::Test => "t10k",
    };
    let images = find(dir, &format!("{prefix}-images"), "idx3-ubyte")?;
    let labels = find(dir, &format!("{prefix}-labels"), "idx1-ubyte")?;
    mnist_load_idx(&images, &labels, split)
}

/// A set of MNIST images standing in for a set of digits.
#[derive(Debug, Clone)]
pub struct MnistSetSample {
    pub pool: Arc<MnistData>,
    /// Indices into `pool`, one per element.
    pub image_ids: Vec<usize>,
    pub digits: Vec<u8>,
    pub label: f64,
}

impl MnistSetSample {
    pub fn images(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.image_ids.iter().map(|&i| self.pool.image(i))
    }

    pub fn split(&self) -> Split {
        self.pool.split
    }
}

/// Replaces every digit by a uniformly drawn image of that digit from `pool`.
pub fn mnist_setify(samples: &[ScalarSetSample], pool: &Arc<MnistData>, seed: u64) -> Result<Vec<MnistSetSample>> {
    if let Some(d) = (0..10u8).find(|&d| pool.indices_of(d).is_empty()) {
        return Err(Error::Config(format!("MNIST {} pool has no image of digit {}", pool.split, d)));
    }
    let mut rng = rng_for(seed, "mnist-setify", pool.split as u64);
    Ok(samples
        .iter()
        .map(|s| {
            let image_ids = s
                .elements
                .iter()
                .map(|&d| {
                    let ids = pool.indices_of(d);
                    ids[rng.random_range(0..ids.len())]
                })
                .collect();
            MnistSetSample {
                pool: Arc::clone(pool),
                image_ids,
                digits: s.elements.clone(),
                label: s.label,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{gen_scalar_train, TargetKind};

    fn write_idx(dir: &Path, n: usize, labels: &[u8]) -> (PathBuf, PathBuf) {
        let mut img = Vec::new();
        img.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
        for v in [n as u32, 2, 2] {
            img.extend_from_slice(&v.to_be_bytes());
        }
        for i in 0..n {
            img.extend_from_slice(&[i as u8, 255, 0, 51]);
        }
        let mut lbl = Vec::new();
        lbl.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
        lbl.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        lbl.extend_from_slice(labels);
        let (ip, lp) = (dir.join("img"), dir.join("lbl"));
        std::fs::write(&ip, img).unwrap();
        std::fs::write(&lp, lbl).unwrap();
        (ip, lp)
    }

    #[test]
    fn parses_synthetic_idx() {
        let dir = tempfile::tempdir().unwrap();
        let labels: Vec<u8> = (0..20).map(|i| (i % 10) as u8).collect();
        let (ip, lp) = write_idx(dir.path(), 20, &labels);
        let d = mnist_load_idx(&ip, &lp, Split::Train).unwrap();
        assert_eq!(d.len(), 20);
        assert_eq!(d.image(3), &[3.0 / 255.0, 1.0, 0.0, 0.2]);
        assert_eq!(d.indices_of(4), &[4, 14]);
    }

    #[test]
    fn rejects_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = write_idx(dir.path(), 5, &[0, 1, 2, 3]);
        assert!(matches!(mnist_load_idx(&ip, &lp, Split::Train), Err(Error::Format { offset: 4, .. })));

        let (ip, lp) = write_idx(dir.path(), 5, &[0, 1, 2, 3, 4]);
        let bytes = std::fs::read(&ip).unwrap();
        std::fs::write(&ip, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(mnist_load_idx(&ip, &lp, Split::Train), Err(Error::Format { .. })));

        std::fs::write(&ip, [0u8, 0, 8, 1, 0, 0, 0, 0]).unwrap();
        assert!(matches!(mnist_load_idx(&ip, &lp, Split::Train), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn setify_keeps_labels_and_digits() {
        let dir = tempfile::tempdir().unwrap();
        let labels: Vec<u8> = (0..50).map(|i| (i % 10) as u8).collect();
        let (ip, lp) = write_idx(dir.path(), 50, &labels);
        let pool = Arc::new(mnist_load_idx(&ip, &lp, Split::Test).unwrap());
        let scalar = gen_scalar_train(TargetKind::Sum, 100, 10, 2).unwrap();
        let sets = mnist_setify(&scalar, &pool, 5).unwrap();
        for (m, s) in sets.iter().zip(&scalar) {
            assert_eq!(m.label, s.label);
            assert_eq!(m.digits, s.elements);
            for (&id, &d) in m.image_ids.iter().zip(&m.digits) {
                assert_eq!(pool.labels[id], d);
            }
            assert_eq!(m.split(), Split::Test);
        }
    }
}
