//! Foundational types: records, datasets, step survival curves, cumulative
//! hazards and data splitting.

mod curve;
mod data;
mod split;

pub use curve::{clamp_survival, CumulativeHazard, StepSurvivalCurve, DEFAULT_POSITIVITY_FLOOR};
pub use data::{
    read_dataset, read_dataset_file, read_full_data, write_dataset, write_full_data, Dataset,
    FullRecord, ObservedRecord,
};
pub use split::{random_partition, split_dataset, SplitIndices};
