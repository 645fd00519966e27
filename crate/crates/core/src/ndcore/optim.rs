//! Learning-rate decay driven by validation loss.

use serde::{Deserialize, Serialize};

/// Reduce-on-plateau constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateauConfig {
    pub factor: f64,
    pub patience: usize,
    pub min_improvement: f64,
    pub lr_min: f64,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        PlateauConfig {
            factor: 0.5,
            patience: 5,
            min_improvement: 1e-4,
            lr_min: 1e-5,
        }
    }
}

/// Multiplies the learning rate by `factor` once the best validation loss
/// has not improved by at least `min_improvement` for `patience` epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauDecay {
    cfg: PlateauConfig,
    lr: f64,
    best: f64,
    stale_epochs: usize,
}

impl PlateauDecay {
    pub fn new(lr: f64, cfg: PlateauConfig) -> Self {
        PlateauDecay {
            cfg,
            lr,
            best: f64::INFINITY,
            stale_epochs: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Feeds one epoch's validation loss and returns the learning rate to use next.
    pub fn observe(&mut self, val_loss: f64) -> f64 {
        if val_loss < self.best - self.cfg.min_improvement {
            self.best = val_loss;
            self.stale_epochs = 0;
        } else {
            self.stale_epochs += 1;
            if self.stale_epochs >= self.cfg.patience {
                self.lr = (self.lr * self.cfg.factor).max(self.cfg.lr_min);
                self.stale_epochs = 0;
            }
        }
        self.lr
    }
}

/// Replays a whole validation history from `initial_lr`.
pub fn plateau_decay(history: &[f64], initial_lr: f64, cfg: PlateauConfig) -> f64 {
    let mut sched = PlateauDecay::new(initial_lr, cfg);
    for &v in history {
        sched.observe(v);
    }
    sched.lr()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decreasing_history_keeps_lr() {
        let h: Vec<f64> = (0..30).map(|i| 1.0 - 0.01 * i as f64).collect();
        assert_eq!(plateau_decay(&h, 1e-3, PlateauConfig::default()), 1e-3);
    }

    #[test]
    fn flat_history_halves_once() {
        let cfg = PlateauConfig::default();
        let h = vec![0.7; cfg.patience + 1];
        assert_eq!(plateau_decay(&h, 1e-3, cfg), 5e-4);
        let h = vec![0.7; cfg.patience];
        assert_eq!(plateau_decay(&h, 1e-3, cfg), 1e-3);
    }

    #[test]
    fn floor_is_respected() {
        let cfg = PlateauConfig::default();
        let h = vec![0.7; 100];
        assert_eq!(plateau_decay(&h, cfg.lr_min, cfg), cfg.lr_min);
        assert_eq!(plateau_decay(&h, 1e-3, cfg), cfg.lr_min);
    }

    #[test]
    fn improvement_below_threshold_counts_as_stale() {
        let cfg = PlateauConfig::default();
        let h: Vec<f64> = (0..6).map(|i| 1.0 - 1e-5 * i as f64).collect();
        assert_eq!(plateau_decay(&h, 1e-3, cfg), 5e-4);
    }
}
