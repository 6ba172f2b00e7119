//! On-disk vaults.
//!
//! A vault is a directory holding:
//!
//! * `metadata.json`: the [`VaultMeta`](crate::VaultMeta) and agent specs;
//! * `data.bin`: a header, a section table, then one raw little-endian
//!   payload per column;
//! * `episodes.idx`: `u64` episode count followed by the `u64` start offsets;
//! * `vault.sha256`: optional `sha256sum`-style sidecar over the two binary
//!   files.
//!
//! ```text
//! data.bin
//!   0   6   magic "OGMV1\0"
//!   6   4   u32 format_version
//!   10  8   u64 T
//!   18  4   u32 n_agents
//!   22  4   u32 section_count
//!   26  ..  section_count x 74-byte entries:
//!           32 name (zero padded ASCII), u8 dtype (0 f32, 1 i32, 2 u8),
//!           u8 rank, 3 x u64 dims, u64 offset, u64 length
//!   ..      payloads at their offsets
//! ```

mod fetch;
mod format;
mod import;
mod registry;

pub use fetch::{fetch_vault, pack_vault};
pub use format::{
    encode_data_bin, encode_episode_index, read_sections, read_vault, sha256_hex, write_vault,
    Dtype, SectionInfo, CHECKSUM_FILE, DATA_FILE, INDEX_FILE, LOCK_FILE, MAGIC, METADATA_FILE,
};
pub use import::{export_jsonl, import_foreign, ColumnMapping, ImportSchema};
pub use registry::{registry, RegistryEntry};
