//! File formats, configuration documents and the end-to-end pipeline.

pub mod config;
pub mod emit;
pub mod load;
pub mod pipeline;

pub use config::{AnalysisConfig, BandSpec, ChannelRef, Measure, ModelDocument, TestChoice};
pub use emit::{emit_results, EmitFormat};
pub use load::{load_epochs, save_epochs, DataFormat};
pub use pipeline::{run_pipeline, summary_table, ResultDocument, ResultEntry};
