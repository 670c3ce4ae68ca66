//! IDX dataset ingestion and checkpoint persistence.

mod checkpoint;
mod dataset;
mod idx;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use dataset::{load_dataset, split_paths, Dataset, DatasetName, Split};
pub use idx::{encode_idx, parse_idx, read_idx, write_idx, IdxTensor, MAGIC_IMAGES, MAGIC_LABELS};
