//! Multi-source IoT logs to process-mining event logs.
//!
//! Stages, in pipeline order:
//!
//! * [`ingest`]: typed parsing of ambient, smartphone and wristband CSVs.
//! * [`state`]: binary state vectors and the changes between them.
//! * [`abstraction`]: classifying each change into a lifecycle label through
//!   a rule set, a chat-completion model or a replay cache.
//! * [`integrate`]: pairing labels into intervals and building the daily log.
//! * [`eval`]: label accuracy, event matching and trace alignment.
//! * [`synth`]: synthetic scenarios with exact ground truth.
//! * [`xes`]: XES export and import.
//! * [`pipeline`]: configuration and the commands behind the executable.

pub mod abstraction;
pub mod eval;
pub mod fsio;
pub mod ingest;
pub mod integrate;
pub mod pipeline;
pub mod reference;
pub mod source;
pub mod state;
pub mod synth;
pub mod xes;

pub use source::Source;
