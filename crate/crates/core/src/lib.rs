//! Learning entity-linking features for emerging entities.
//!
//! An emerging entity (EE) is an entity that was just added to a knowledge
//! base: only its aliases are known, and none of the usual entity-linking
//! features (prior probability, relatedness scores, entity embedding) can be
//! estimated from a reference corpus because the entity never appears there.
//! This crate learns those features from a small labeled set `L` and a much
//! larger unlabeled set `U` of candidate web documents, using self-training
//! with two stabilizers:
//!
//! * **intra-slot optimization** — the per-slot feature estimate is refined
//!   by gradient descent against the linking objective on the real labeled
//!   data only, and
//! * **inter-slot optimization** — the slot-to-slot parameter change is
//!   reinterpreted as a gradient and adjusted with bias-corrected moment
//!   estimates plus a warmed-up learning rate.
//!
//! The crate also ships the two candidate scorers the loop plugs into
//! (a Yamada-style similarity scorer and a DeepED-style local attention
//! scorer), a seeded synthetic-world generator for benchmarking, and an
//! experiment harness that reproduces the qualitative method ordering at
//! desk scale.

pub mod corpus;
pub mod eval;
pub mod features;
pub mod kb;
pub mod models;
pub mod stamo;
pub mod util;

pub use kb::{
    build_alias_dictionary, candidates_for, link_document, AliasDictionary, CandidateMode,
    CandidateSet, CorpusSource, Document, Entity, EntityId, KnowledgeBase, Label, MentionId,
    MentionOccurrence,
};

/// Crate-wide error type.
///
/// `is_data_error` distinguishes malformed inputs (exit code 2 in the CLI)
/// from runtime failures (exit code 3).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid knowledge base: {0}")]
    InvalidKb(String),
    #[error("invalid document {doc_id}: {msg}")]
    InvalidDocument { doc_id: String, msg: String },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("unsupported file format: {0}")]
    Format(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("empty training corpus")]
    EmptyCorpus,
    #[error("world generation failed: {0}")]
    Generation(String),
    #[error("mismatched inputs: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidKb(_)
                | Error::InvalidDocument { .. }
                | Error::Parse { .. }
                | Error::Format(_)
                | Error::InvalidConfig(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
