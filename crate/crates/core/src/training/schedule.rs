use crate::error::{Error, Result};

/// Hold-then-decay learning-rate schedule driven by heldout perplexity.
///
/// The rate stays at its initial value for the first `hold_epochs` epochs.
/// Afterwards, an epoch whose heldout perplexity is higher than the
/// previous epoch's extends the increase streak and any other epoch resets
/// it; when the streak reaches `patience` the rate is multiplied by
/// `decay` and the streak starts over.
#[derive(Debug, Clone, PartialEq)]
pub struct LrSchedule {
    lr: f64,
    decay: f64,
    patience: usize,
    hold_epochs: usize,
    epoch: usize,
    streak: usize,
    previous: Option<f64>,
    decays: usize,
}

impl LrSchedule {
    pub fn new(initial_lr: f64, hold_epochs: usize, decay: f64, patience: usize) -> Result<Self> {
        if !(initial_lr > 0.0 && initial_lr.is_finite()) {
            return Err(Error::Config(format!("initial learning rate {initial_lr} must be positive")));
        }
        if !(decay > 0.0 && decay < 1.0) {
            return Err(Error::Config(format!("decay factor {decay} outside (0, 1)")));
        }
        if patience == 0 {
            return Err(Error::Config("patience must be >= 1".into()));
        }
        Ok(LrSchedule {
            lr: initial_lr,
            decay,
            patience,
            hold_epochs,
            epoch: 0,
            streak: 0,
            previous: None,
            decays: 0,
        })
    }

    /// Rate for the next epoch.
    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn decays(&self) -> usize {
        self.decays
    }

    pub fn streak(&self) -> usize {
        self.streak
    }

    /// Records the heldout perplexity of the epoch just finished. Returns
    /// true when this observation triggered a decay.
    pub fn observe(&mut self, heldout_ppl: f64) -> bool {
        self.epoch += 1;
        let increased = self.previous.is_some_and(|p| heldout_ppl > p);
        self.previous = Some(heldout_ppl);
        if self.epoch <= self.hold_epochs || !increased {
            self.streak = 0;
            return false;
        }
        self.streak += 1;
        if self.streak < self.patience {
            return false;
        }
        self.streak = 0;
        self.lr *= self.decay;
        self.decays += 1;
        true
    }
}
