//! Tabular rows rendered as small single-channel pseudo-images.
//!
//! The crate covers the whole attack-and-audit loop: schema-driven ingestion
//! of a census-style CSV, a one-hot/min-max codec that places each row on a
//! 10×11 grid, three feature layouts, a desk-scale denoising diffusion U-Net
//! with hand-written backpropagation, and an audit battery (fidelity,
//! semantic rules, train-on-synthetic/test-on-real, disclosure, structural
//! shares).

pub mod audit;
pub mod codec;
pub mod diffusion;
pub mod error;
pub mod layout;
pub mod pipeline;
pub mod schema;
pub mod table;
pub mod toy;

pub use codec::{CodecSpec, DecodeOptions, FeatureBlock, Grid};
pub use error::{Error, Result};
pub use layout::{Layout, LayoutStrategy, PlacementPlan};
pub use schema::{ColumnKind, ColumnSpec, Schema};
pub use table::{CleaningPolicy, MissingValues, Row, Table, Value};
