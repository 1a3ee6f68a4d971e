//! The per-log parse: mask, tokenize, key, recall, match, then update or
//! insert.
//!
//! Recall runs in two tiers. Neighbors whose similarity clears `tau` are
//! scored first; only when none of them is accepted are the remaining
//! nearest neighbors (still at most `k` in total) tried. Punctuation
//! distance alone would otherwise hide a template from a same-event log
//! carrying a long variable payload.

use std::io::{self, Write};

use log::debug;
use serde::Serialize;
use thiserror::Error;

use crate::entropy_lcs::{self, alignment_score, LcsAlignment, LcsScratch};
use crate::error::{Error, Result};
use crate::keywords::{KeywordLibrary, NO_KEY};
use crate::library::{seeded_stats, TemplateLibrary};
use crate::preprocess::{self, RuleSet, TokenSequence};
use crate::template::{PositionStats, Symbol, Template, TemplateId, WILDCARD};
use crate::vecindex::{embed, FeatureSet, PunctuationVector, Standardizer};

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_TAU: f64 = 0.5;
pub const DEFAULT_THETA: f64 = 4.5;

#[derive(Debug, Clone)]
pub struct ParseConfig {
    /// Nearest templates recalled per log.
    pub k: usize,
    /// Recall similarity threshold in [0, 1].
    pub tau: f64,
    /// Entropy threshold in bits for declaring a position variable.
    pub theta: f64,
    pub rules: RuleSet,
    pub features: FeatureSet,
    /// Route every log to the single key `<nokey>`.
    pub disable_keywords: bool,
    /// Score every template of the bucket instead of recalling.
    pub disable_index: bool,
}

impl Default for ParseConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            tau: DEFAULT_TAU,
            theta: DEFAULT_THETA,
            rules: RuleSet::default(),
            features: FeatureSet::default(),
            disable_keywords: false,
            disable_index: false,
        }
    }
}

impl ParseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::InvalidConfig(format!("tau {} outside [0, 1]", self.tau)));
        }
        if self.theta.is_nan() || self.theta <= 0.0 {
            return Err(Error::InvalidConfig(format!("theta {} must be positive", self.theta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRecord {
    pub line_no: u64,
    pub raw: String,
}

impl LogRecord {
    pub fn new(line_no: u64, raw: impl Into<String>) -> Self {
        let mut raw = raw.into();
        if raw.contains(['\n', '\r']) {
            raw.retain(|c| c != '\n' && c != '\r');
        }
        Self { line_no, raw }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseResult {
    pub line_no: u64,
    pub template_id: TemplateId,
    pub template_string: String,
    /// Token runs taken by the template's wildcards, in order. Runs are
    /// space-joined; a wildcard that took nothing has an empty run.
    pub parameters: Vec<String>,
}

impl ParseResult {
    /// Puts the parameters back into the template's wildcards.
    pub fn splice(&self) -> String {
        let mut params = self.parameters.iter();
        let mut out: Vec<&str> = Vec::new();
        for token in self.template_string.split(' ') {
            let piece = if token == WILDCARD {
                params.next().map(String::as_str).unwrap_or("")
            } else {
                token
            };
            if !piece.is_empty() {
                out.push(piece);
            }
        }
        out.join(" ")
    }
}

/// A log line that could not be parsed. Not fatal for a stream.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum LineError {
    #[error("line {line_no}: no tokens after preprocessing")]
    Empty { line_no: u64 },
    #[error("line {line_no}: line numbers must increase (previous {previous})")]
    OutOfOrder { line_no: u64, previous: u64 },
}

/// A streaming parser owning its template library.
#[derive(Debug)]
pub struct Parser {
    config: ParseConfig,
    keywords: KeywordLibrary,
    library: TemplateLibrary,
    standardizer: Standardizer,
    scratch: LcsScratch,
    last_line_no: Option<u64>,
}

struct Prepared {
    masked: String,
    tokens: Vec<String>,
    key: String,
    vector: PunctuationVector,
}

impl Parser {
    pub fn new(config: ParseConfig, keywords: KeywordLibrary) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            keywords,
            library: TemplateLibrary::new(),
            standardizer: Standardizer::new(),
            scratch: LcsScratch::new(),
            last_line_no: None,
        })
    }

    pub fn config(&self) -> &ParseConfig {
        &self.config
    }

    pub fn library(&self) -> &TemplateLibrary {
        &self.library
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn into_library(self) -> TemplateLibrary {
        self.library
    }

    fn prepare(&self, raw: &str) -> Option<Prepared> {
        let masked = self.config.rules.mask(raw);
        let tokens = preprocess::tokenize(&masked);
        if tokens.is_empty() {
            return None;
        }
        let key = if self.config.disable_keywords {
            NO_KEY.to_string()
        } else {
            self.keywords.extract_key(&tokens)
        };
        let vector = embed(&masked, &self.config.features);
        Some(Prepared {
            masked,
            tokens,
            key,
            vector,
        })
    }

    pub fn parse_one(&mut self, record: &LogRecord) -> std::result::Result<ParseResult, LineError> {
        if let Some(previous) = self.last_line_no {
            if record.line_no <= previous {
                return Err(LineError::OutOfOrder {
                    line_no: record.line_no,
                    previous,
                });
            }
        }
        self.last_line_no = Some(record.line_no);

        let Some(p) = self.prepare(&record.raw) else {
            return Err(LineError::Empty {
                line_no: record.line_no,
            });
        };
        self.standardizer.update(&p.vector);
        let symbols: Vec<Symbol> = p.tokens.iter().map(|t| self.library.interner.intern(t)).collect();

        let found = find_match(
            &self.library,
            &self.config,
            &self.standardizer,
            &mut self.scratch,
            &p.key,
            &p.vector,
            &symbols,
        );

        let theta = self.config.theta;
        match found {
            Some((id, alignment)) => {
                let template = self.library.get_mut(id).expect("matched template exists");
                let parameters = update_template(template, &p.tokens, &alignment);
                Ok(ParseResult {
                    line_no: record.line_no,
                    template_id: id,
                    template_string: template.emitted(theta),
                    parameters,
                })
            }
            None => {
                let seq = TokenSequence::new(p.tokens, record.line_no);
                let t = insert_new(&mut self.library, &p.key, &seq, p.vector)
                    .expect("token sequence is non-empty");
                debug!("new template {} under {:?} from {:?}", t.id(), p.key, p.masked);
                Ok(ParseResult {
                    line_no: record.line_no,
                    template_id: t.id(),
                    template_string: t.emitted(theta),
                    parameters: Vec::new(),
                })
            }
        }
    }

    /// The template `raw` would be assigned to right now, without updating
    /// anything. `None` means it would become a new template.
    pub fn lookup(&self, raw: &str) -> Option<TemplateId> {
        let p = self.prepare(raw)?;
        let symbols: Vec<Symbol> = p.tokens.iter().map(|t| self.library.interner.lookup(t)).collect();
        find_match(
            &self.library,
            &self.config,
            &self.standardizer,
            &mut LcsScratch::new(),
            &p.key,
            &p.vector,
            &symbols,
        )
        .map(|(id, _)| id)
    }
}

struct Best {
    id: TemplateId,
    score: f64,
    constants: usize,
    alignment: LcsAlignment,
}

impl Best {
    fn beats(&self, other: &Best) -> bool {
        self.score
            .total_cmp(&other.score)
            .then(self.constants.cmp(&other.constants))
            .then(other.id.cmp(&self.id))
            .is_gt()
    }
}

/// Best accepted template among `candidates`, by the candidate ordering.
fn best_accepted<'a>(
    candidates: impl Iterator<Item = &'a Template>,
    symbols: &[Symbol],
    scratch: &mut LcsScratch,
) -> Option<Best> {
    let mut log_bag = symbols.to_vec();
    log_bag.sort_unstable();
    let mut best: Option<Best> = None;
    for t in candidates {
        let constants = t.constant_count();
        // no alignment can match more constants than the bags share
        let bound = entropy_lcs::coverage_score(bag_overlap(&log_bag, t.constant_bag()), constants, symbols.len());
        if bound < entropy_lcs::ACCEPT_THRESHOLD || best.as_ref().is_some_and(|b| bound < b.score) {
            continue;
        }
        let alignment = scratch.align(symbols, t.symbols());
        let score = alignment_score(&alignment, constants, symbols.len());
        let cand = Best {
            id: t.id(),
            score,
            constants,
            alignment,
        };
        if best.as_ref().is_none_or(|b| cand.beats(b)) {
            best = Some(cand);
        }
    }
    best.filter(|b| b.score >= entropy_lcs::ACCEPT_THRESHOLD)
}

/// Size of the multiset intersection of two sorted slices.
fn bag_overlap(a: &[Symbol], b: &[Symbol]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

fn find_match(
    library: &TemplateLibrary,
    config: &ParseConfig,
    standardizer: &Standardizer,
    scratch: &mut LcsScratch,
    key: &str,
    vector: &PunctuationVector,
    symbols: &[Symbol],
) -> Option<(TemplateId, LcsAlignment)> {
    let bucket = library.bucket(key)?;
    if config.disable_index {
        return best_accepted(bucket.templates().iter(), symbols, scratch).map(|b| (b.id, b.alignment));
    }
    let query = standardizer.transform(vector);
    let hits = bucket.index().recall(&query, standardizer, config.k, 0.0);
    // hits are sorted by similarity, so the tau-passing ones form a prefix
    let split = hits.partition_point(|h| h.similarity >= config.tau);
    let (near, far) = hits.split_at(split);
    let lookup = |h: &crate::vecindex::Neighbor| library.get(h.template_id).expect("indexed template exists");
    best_accepted(near.iter().map(lookup), symbols, scratch)
        .or_else(|| best_accepted(far.iter().map(lookup), symbols, scratch))
        .map(|b| (b.id, b.alignment))
}

/// Adds `seq` as a new template under `key`.
pub fn insert_new<'a>(
    lib: &'a mut TemplateLibrary,
    key: &str,
    seq: &TokenSequence,
    vector: PunctuationVector,
) -> Result<&'a Template> {
    lib.insert(key, seq, vector)
}

struct Slot<'a> {
    token: String,
    symbol: Symbol,
    stats: Option<PositionStats>,
    /// Log tokens taken by a wildcard slot; `None` for constants.
    run: Option<Vec<&'a str>>,
}

impl<'a> Slot<'a> {
    fn wildcard(stats: PositionStats, run: Vec<&'a str>) -> Self {
        Slot {
            token: WILDCARD.to_string(),
            symbol: Symbol::WILDCARD,
            stats: Some(stats),
            run: Some(run),
        }
    }
}

/// Merges a matched log into `template` and returns the log's parameters.
///
/// Matched constants stay. Template positions between two matched pairs
/// become wildcards: one per position when the log has the same number of
/// tokens there, otherwise a single wildcard taking the whole run. Extra log
/// tokens with no template position go to the adjacent wildcard, or to a
/// new one. Each wildcard records the run it took in its position stats.
pub fn update_template(template: &mut Template, tokens: &[String], alignment: &LcsAlignment) -> Vec<String> {
    let prior = template.match_count;
    let old_tokens = std::mem::take(&mut template.tokens);
    let old_symbols = std::mem::take(&mut template.symbols);
    let mut old_stats = std::mem::take(&mut template.stats);
    let n = tokens.len();
    let m = old_tokens.len();

    let mut slots: Vec<Slot<'_>> = Vec::with_capacity(m + 1);
    let mut prefix: Vec<&str> = Vec::new();
    let (mut next_i, mut next_j) = (0, 0);
    let sentinel = std::iter::once((n, m));
    for (i, j) in alignment.pairs.iter().copied().chain(sentinel) {
        let log_gap: Vec<&str> = tokens[next_i..i].iter().map(String::as_str).collect();
        let tpl_gap = next_j..j;
        let at_end = i == n && j == m;
        if tpl_gap.len() == log_gap.len() {
            for (pos, tok) in tpl_gap.zip(log_gap) {
                let stats = seeded_stats(old_stats[pos].take(), &old_tokens[pos], prior);
                slots.push(Slot::wildcard(stats, vec![tok]));
            }
        } else if tpl_gap.is_empty() {
            match slots.last_mut() {
                Some(Slot { run: Some(run), .. }) => run.extend(log_gap),
                _ if !at_end && old_tokens[j] == WILDCARD => prefix = log_gap,
                _ => slots.push(Slot::wildcard(PositionStats::default(), log_gap)),
            }
        } else {
            slots.push(Slot::wildcard(PositionStats::default(), log_gap));
        }
        if at_end {
            break;
        }
        if old_tokens[j] == WILDCARD {
            let mut run = std::mem::take(&mut prefix);
            run.push(tokens[i].as_str());
            slots.push(Slot::wildcard(old_stats[j].take().unwrap_or_default(), run));
        } else {
            slots.push(Slot {
                token: old_tokens[j].clone(),
                symbol: old_symbols[j],
                stats: old_stats[j].take(),
                run: None,
            });
        }
        next_i = i + 1;
        next_j = j + 1;
    }

    let mut parameters = Vec::new();
    let mut new_symbols = Vec::with_capacity(slots.len());
    for slot in slots {
        let mut stats = slot.stats;
        if let Some(run) = slot.run {
            let joined = run.join(" ");
            if !joined.is_empty() {
                stats.get_or_insert_with(PositionStats::default).record(&joined, 1);
            }
            parameters.push(joined);
        }
        template.tokens.push(slot.token);
        new_symbols.push(slot.symbol);
        template.stats.push(stats);
    }
    template.set_symbols(new_symbols);
    template.match_count += 1;
    parameters
}

/// Everything a stream parse produces.
#[derive(Debug)]
pub struct StreamOutput {
    pub results: Vec<ParseResult>,
    pub diagnostics: Vec<LineError>,
    pub library: TemplateLibrary,
}

/// Parses `lines` in order; `line_no` is the 0-based position in the input.
///
/// An I/O error aborts the run and reports the last line parsed.
pub fn parse_stream<I, S>(lines: I, config: ParseConfig, keywords: KeywordLibrary) -> Result<StreamOutput>
where
    I: IntoIterator<Item = io::Result<S>>,
    S: AsRef<str>,
{
    let mut parser = Parser::new(config, keywords)?;
    let mut results = Vec::new();
    let mut diagnostics = Vec::new();
    let mut last_line_no = None;
    for (line_no, line) in lines.into_iter().enumerate() {
        let line = line.map_err(|source| Error::Stream {
            last_line_no,
            source,
        })?;
        let record = LogRecord::new(line_no as u64, line.as_ref());
        match parser.parse_one(&record) {
            Ok(r) => results.push(r),
            Err(e) => {
                debug!("{e}");
                diagnostics.push(e);
            }
        }
        last_line_no = Some(line_no as u64);
    }
    Ok(StreamOutput {
        results,
        diagnostics,
        library: parser.into_library(),
    })
}

/// Convenience wrapper over in-memory lines.
pub fn parse_lines<S: AsRef<str>>(
    lines: &[S],
    config: ParseConfig,
    keywords: KeywordLibrary,
) -> Result<StreamOutput> {
    parse_stream(lines.iter().map(|l| Ok::<_, io::Error>(l.as_ref())), config, keywords)
}

/// Writes `LineId,EventId,EventTemplate,ParameterList` rows. `LineId` is
/// 1-based; `ParameterList` is a JSON array.
pub fn write_structured_csv<W: Write>(results: &[ParseResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["LineId", "EventId", "EventTemplate", "ParameterList"])?;
    for r in results {
        w.write_record([
            (r.line_no + 1).to_string(),
            format!("E{}", r.template_id),
            r.template_string.clone(),
            serde_json::to_string(&r.parameters)?,
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}
