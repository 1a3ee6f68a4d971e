//! Streaming log template extraction.
//!
//! Each incoming line is masked and tokenized, keyed by the keyword phrases
//! it contains, and matched against the few templates of its keyword bucket
//! whose punctuation profile is closest. Matching uses a token LCS that
//! tolerates long variable payloads; divergent positions become wildcards
//! and accumulate token statistics whose entropy marks them as variables.

pub mod benchgen;
pub mod entropy_lcs;
pub mod error;
pub mod eval;
pub mod keywords;
pub mod library;
pub mod pipeline;
pub mod preprocess;
pub mod snapshot;
pub mod template;
pub mod vecindex;

pub use error::{Error, Result};
pub use keywords::KeywordLibrary;
pub use library::{Bucket, TemplateLibrary};
pub use pipeline::{parse_lines, parse_stream, LogRecord, ParseConfig, ParseResult, Parser};
pub use preprocess::{MaskRule, RuleSet, TokenSequence};
pub use template::{Template, TemplateId, WILDCARD};
