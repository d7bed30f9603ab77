//! Dataset assembly, label normalization, splits and snippet expansion.

pub mod assemble;
pub mod expand;
pub mod record;
pub mod split;
pub mod verdict;

pub use assemble::{assemble_dataset, assemble_records, BuildReport, DropReason, EvidenceSource};
pub use expand::{expand_snippets, jaccard};
pub use record::{
    read_dataset, write_dataset, ClaimRecord, DatasetLine, EvidenceBundle, EvidenceKind, ExpansionStrategy,
};
pub use split::{split_dataset, subset, DatasetSplit, DEFAULT_SPLIT_SEED};
pub use verdict::{normalize_verdict, NominalVerdict, VerdictMapping};
