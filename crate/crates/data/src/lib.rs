//! Dataset preparation, channel statistics / normalization, and the
//! playlist-driven album-cover fetcher (with a bundled fixture server for
//! offline testing).

mod dataset;
mod error;
mod fetch;
pub mod fixture;
mod image_io;
mod prepare;
mod stats;

pub use dataset::Dataset;
pub use error::{DataError, Result};
pub use fetch::{download_all, fetch_covers, FetchOutcome, PlaylistQuery};
pub use image_io::{
    list_image_files, load_dir, load_image, resize_rgb, to_unit_tensor, unit_tensor_to_rgb,
    ImageRecord, RESAMPLING_FILTER,
};
pub use prepare::{load_metadata, prepare_dataset, DatasetMeta, METADATA_FILE};
pub use stats::{
    channel_stats, denormalize, float_channel_stats, normalize, normalize_unit, ChannelStats,
    NormalizeMode,
};
