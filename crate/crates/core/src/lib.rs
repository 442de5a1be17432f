//! Measuring and restoring information lost when a text is simplified.

pub mod gap_detection;
pub mod metrics;
pub mod pipeline;
pub mod providers;
pub mod strategies;
pub mod text_analysis;
