//! Cross-lingual document alignment over multilingual sentence embeddings.
//!
//! Documents are normalized bags of sentence embeddings. Two documents are
//! compared with Greedy Movers Distance (GMD): sentence pairs are visited in
//! ascending distance order and mass is moved along each pair until one side
//! is exhausted. The sentence-level distance is pluggable: Euclidean, cosine,
//! or a Mahalanobis metric learned from a small parallel corpus with ITML or
//! SDML.
//!
//! The crate is organized bottom-up:
//!
//! - [`corpus`]: embedding matrices, document manifests, gold alignments and
//!   parallel pair files.
//! - [`metric`]: the distance abstraction and the learned-metric file format.
//! - [`learners`]: constraint construction, ITML and SDML.
//! - [`weighting`]: uniform, sentence-length, IDF and SLIDF sentence masses.
//! - [`gmd`]: greedy transport plus an exact EMD solver used as an oracle.
//! - [`pipeline`]: candidate generation, scoring, matching and recall.
//! - [`synth`]: a deterministic synthetic bilingual corpus generator.

pub mod corpus;
pub mod gmd;
pub mod learners;
pub mod metric;
pub mod pipeline;
pub mod synth;
pub mod weighting;

mod linalg;

pub use corpus::{
    CorpusError, Document, EmbeddingMatrix, GoldAlignment, ParallelPairSet, SentenceRef,
};
pub use gmd::{exact_emd, greedy_movers_distance, greedy_transport, CostMatrix, FlowTrace, GmdError};
pub use learners::{
    build_constraints, itml::train_itml, sdml::train_sdml, ItmlConfig, Label, LearnError,
    NegativeSamplingConfig, PairConstraint, Prior, SdmlConfig, TrainedMetric,
};
pub use metric::{Algorithm, MahalanobisMetric, MetricError, MetricKind, Provenance};
pub use pipeline::{AlignConfig, AlignmentResult, MatchStrategy, PipelineError, RecallReport};
pub use weighting::{IdfTable, WeightedDocument, WeightingError, WeightingScheme};
