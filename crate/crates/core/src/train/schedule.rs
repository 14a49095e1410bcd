use crate::augment::Phase;
use crate::error::{invalid_config, invalid_input, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs_total: usize,
    pub epochs_phase1: usize,
    pub lr_phase1: f64,
    pub lr_phase2: f64,
    pub l2_lambda: f64,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            epochs_total: 40,
            epochs_phase1: 30,
            lr_phase1: 1e-3,
            lr_phase2: 1e-5,
            l2_lambda: 1e-4,
            repeats: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return invalid_config("batch_size must be at least 2");
        }
        if self.epochs_phase1 >= self.epochs_total {
            return invalid_config(format!(
                "epochs_phase1 ({}) must be below epochs_total ({})",
                self.epochs_phase1, self.epochs_total
            ));
        }
        if !(self.lr_phase1 > 0.0 && self.lr_phase2 > 0.0) {
            return invalid_config("learning rates must be positive");
        }
        if !(self.l2_lambda >= 0.0) {
            return invalid_config("l2_lambda must be non-negative");
        }
        if self.repeats == 0 {
            return invalid_config("repeats must be at least 1");
        }
        Ok(())
    }

    /// Learning rate and augmentation phase for a zero-based epoch.
    pub fn lr_schedule(&self, epoch: usize) -> Result<(f64, Phase)> {
        if epoch >= self.epochs_total {
            return invalid_input(format!("epoch {epoch} outside 0..{}", self.epochs_total));
        }
        Ok(if epoch < self.epochs_phase1 {
            (self.lr_phase1, Phase::Phase1)
        } else {
            (self.lr_phase2, Phase::Phase2)
        })
    }
}
