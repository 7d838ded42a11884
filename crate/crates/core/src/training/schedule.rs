use serde::{Deserialize, Serialize};

/// Multiplies the learning rate by `factor` once the monitored metric
/// (higher is better) has failed to improve for `patience` consecutive epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauScheduler {
    pub factor: f64,
    pub patience: usize,
    best: Option<f64>,
    bad_epochs: usize,
}

impl PlateauScheduler {
    pub fn new(factor: f64, patience: usize) -> Self {
        PlateauScheduler {
            factor,
            patience,
            best: None,
            bad_epochs: 0,
        }
    }

    /// Record one epoch's metric and return the learning rate for the next.
    pub fn observe(&mut self, metric: f64, lr: f64) -> f64 {
        if self.best.is_none_or(|b| metric > b) {
            self.best = Some(metric);
            self.bad_epochs = 0;
            return lr;
        }
        self.bad_epochs += 1;
        if self.bad_epochs >= self.patience {
            self.bad_epochs = 0;
            lr * self.factor
        } else {
            lr
        }
    }
}

/// Learning rate after replaying `metrics` through a fresh scheduler.
pub fn plateau_schedule(metrics: &[f64], patience: usize, factor: f64, lr: f64) -> f64 {
    let mut s = PlateauScheduler::new(factor, patience);
    metrics.iter().fold(lr, |lr, &m| s.observe(m, lr))
}

/// Tracks the best epoch and signals a stop `patience` epochs after it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: Option<f64>,
    pub best_epoch: Option<usize>,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            best_epoch: None,
        }
    }

    /// Returns `true` when `metric` is a new best.
    pub fn observe(&mut self, epoch: usize, metric: f64) -> bool {
        if self.best.is_none_or(|b| metric > b) {
            self.best = Some(metric);
            self.best_epoch = Some(epoch);
            true
        } else {
            false
        }
    }

    pub fn should_stop(&self, epoch: usize) -> bool {
        self.best_epoch.is_some_and(|b| epoch >= b + self.patience)
    }
}
