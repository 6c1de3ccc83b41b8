//! Embedding records, file formats, prompt manifests and splits.

mod gemb;
mod labels;
mod manifest;
mod record;
mod split;
mod synthetic;

pub use gemb::{
    decode_dataset, encode_dataset, read_dataset, read_header, write_dataset, DatasetHeader,
    FLAG_HAS_TEXT, GEMB_MAGIC, GEMB_VERSION, HEADER_BYTES,
};
pub use labels::{LabelTable, DEFAULT_GENRES, DEFAULT_STYLES};
pub use manifest::{
    compose_prompt, gen_prompt_manifest, generation_spec_count, read_lines, read_manifest,
    write_manifest, PromptEntry,
};
pub use record::{Dataset, EmbeddingRecord, LabelKind};
pub use split::{split_by_group, split_dataset, split_manifest, SplitIndices};
pub use synthetic::{gen_synthetic_dataset, SyntheticConfig};
