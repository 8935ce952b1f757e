//! Defaults for keys the configuration leaves out. The dataset and trainer
//! values are sized for a single-core desk run of a few minutes.

pub(crate) const SPREAD: f64 = 2.5;
pub(crate) const HIDDEN: [usize; 2] = [64, 64];
pub(crate) const LOCAL_EPOCHS: usize = 10;
pub(crate) const BATCH_SIZE: usize = 10;
pub(crate) const LR: f64 = 0.1;
pub(crate) const PARTICIPATION: f64 = 0.25;
