//! Multi-domain pools: synthetic generation, CSV/manifest loading,
//! stratified splits and the simulated oracle.

mod batch;
mod manifest;
mod pool;
mod split;
mod synthetic;

pub use batch::{evaluation_batch, LabeledBatch, MixedBatch, TrainingView};
pub use manifest::{export_pool, load_manifest, load_manifest_file, DatasetManifest, ManifestDomain};
pub use pool::{DomainData, InstanceHandle, MultiDomainPool, Split};
pub use split::{largest_remainder, split_pool, DEFAULT_SPLIT};
pub use synthetic::{
    generate_synthetic, generate_synthetic_logged, ConflictRecord, SyntheticSpec, SyntheticTruth,
};
