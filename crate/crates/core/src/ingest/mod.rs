//! Input parsing and synthetic data generation.

mod enrichment;
mod packets;
mod synth;

use thiserror::Error;

pub use enrichment::{
    format_timestamp, parse_enrichment, parse_record, parse_timestamp, record_to_json,
    write_enrichment, Classification, EnrichmentRecord, MAX_PORTS, UNKNOWN,
};
pub use packets::{parse_packet_log, window_label, PacketEvent, WindowAggregate, WindowReader};
pub use synth::{gen_synthetic, CategoricalTables, GroundTruth, SynthConfig, SyntheticDataset};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: {msg}")]
    Invariant { line: usize, msg: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Dist(#[from] crate::distfit::DistError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
