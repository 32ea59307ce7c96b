//! Desk-scale models that produce value tables.

pub mod data;
pub mod net;
pub mod synthetic;
pub mod train;

pub use data::{DatasetConfig, SyntheticDataset};
pub use net::{
    contiguous_groups, fgsm_perturb, gaussian_perturb, masked_forward, masked_table, random_init_table, TinyNet,
};
pub use synthetic::{synthetic_eval, SyntheticModel};
pub use train::{train, Checkpoint, TrainConfig, TrainRun};
