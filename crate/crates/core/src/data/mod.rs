//! Dataset schema, attribute partition, UCI Adult ingestion and a synthetic
//! structural causal model with known counterfactuals.

mod adult;
mod dataset;
mod schema;
mod scm;

pub use adult::{ingest_adult, ADULT_COLUMNS, ADULT_CONDITIONERS};
pub use dataset::{split_indices, Batch, ExtraColumns, Sidecar, TabularDataset};
pub(crate) use schema::argmax;
pub use schema::{
    AttributePartition, Block, BlockKind, ColumnEncoding, ColumnKind, FeatureGroup, FeatureLayout,
    RawValue,
};
pub use scm::{generate_scm, ScmSample, ScmSpec, SCM_CONDITIONERS};

#[cfg(test)]
pub(crate) use dataset::tests::toy;
