//! Dataset ingestion: IDX (MNIST, Fashion-MNIST) and CIFAR-10 binary
//! parsers, normalisation to `[-1, 1]`, deterministic subsetting and an
//! on-disk cache with checksummed manifests.

mod cache;
mod cifar;
mod dataset;
mod idx;

pub use cache::{read_manifest, write_manifest, DataCache, ManifestEntry, Source, CACHE_ENV};
pub use cifar::{parse_cifar_batch, write_cifar_batch, CIFAR_RECORD_LEN};
pub use dataset::{normalize_pixel, BatchOrder, Dataset, DatasetName, Split, NUM_CLASSES};
pub use idx::{parse_idx, write_idx, IdxArray, IDX_MAGIC_IMAGES, IDX_MAGIC_LABELS};
