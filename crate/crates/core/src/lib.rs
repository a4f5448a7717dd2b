//! Meaning-extraction topic analysis for tweet corpora.
//!
//! The pipeline cleans a single-language tweet archive (keyword filter,
//! retweet removal, most-active-user sampling, bot-score thresholding), turns
//! the remaining tweets into a binary document-term matrix over the most
//! frequent unigrams, and runs a principal-component factor analysis with
//! varimax rotation. Each component is reported with its strongest terms and
//! most related tweets, and users are geolocated against an offline
//! gazetteer. Two runs can be laid side by side for cross-language comparison.

pub mod botfilter;
pub mod config;
pub mod dtm;
pub mod error;
pub mod factor;
pub mod geoloc;
pub mod ingest;
pub mod pipeline;
pub mod synth;
pub mod textprep;
pub mod themes;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use pipeline::{compare, run_pipeline, RunReport};
