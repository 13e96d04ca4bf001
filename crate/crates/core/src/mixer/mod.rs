//! SELD mixture synthesis: corpus ingestion, event scheduling, static and
//! moving-source spatialization, and dataset generation.

pub mod corpus;
pub mod dataset;
pub mod render;
pub mod schedule;
pub mod spatialize;

pub use corpus::{ingest_corpus, Corpus, EventClip, LabelMap};
pub use dataset::{generate_dataset, verify_dataset, DatasetConfig, DatasetManifest};
pub use render::{render_mixture, synthesize_mixture, AnnotationRow, MixConfig, Mixture};
pub use schedule::{schedule_events, EventTimeline, Fold, Motion, ScheduleConfig, ScheduledEvent};
pub use spatialize::{spatialize_moving, spatialize_static};
