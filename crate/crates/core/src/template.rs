//! Templates and their per-position token statistics.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::entropy_lcs::{self, MatchToken};

/// The wildcard symbol used in stored and emitted templates.
pub const WILDCARD: &str = "<*>";

pub type TemplateId = u64;

/// Interned token id. Templates carry these next to their strings so the
/// matcher compares integers instead of text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol(pub(crate) u32);

impl Symbol {
    pub const WILDCARD: Symbol = Symbol(u32::MAX);
}

impl MatchToken for Symbol {
    fn is_wildcard(&self) -> bool {
        *self == Symbol::WILDCARD
    }
}

/// Token frequencies observed at one template position.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PositionStats {
    counts: BTreeMap<String, u64>,
    total: u64,
}

impl PositionStats {
    pub fn from_counts(counts: BTreeMap<String, u64>) -> Self {
        let total = counts.values().sum();
        Self { counts, total }
    }

    pub fn record(&mut self, token: &str, n: u64) {
        if n == 0 {
            return;
        }
        match self.counts.get_mut(token) {
            Some(c) => *c += n,
            None => {
                self.counts.insert(token.to_string(), n);
            }
        }
        self.total += n;
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn entropy(&self) -> f64 {
        entropy_lcs::position_entropy(&self.counts, self.total)
    }

    /// Most frequent token; ties resolve to the lexicographically smallest.
    pub fn majority(&self) -> Option<&str> {
        let mut best: Option<(&String, u64)> = None;
        // BTreeMap iterates in ascending key order, so strict `>` keeps the
        // smallest token among equal counts.
        for (token, &count) in &self.counts {
            if best.is_none_or(|(_, c)| count > c) {
                best = Some((token, count));
            }
        }
        best.map(|(t, _)| t.as_str())
    }
}

/// A log template: constant tokens interleaved with wildcards.
#[derive(Debug, Clone)]
pub struct Template {
    pub(crate) id: TemplateId,
    pub(crate) tokens: Vec<String>,
    pub(crate) symbols: Vec<Symbol>,
    // sorted constant symbols, for the matcher's overlap bound
    pub(crate) constant_bag: Vec<Symbol>,
    pub(crate) stats: Vec<Option<PositionStats>>,
    pub(crate) match_count: u64,
    pub(crate) keyword_key: String,
}

impl PartialEq for Template {
    // Symbols are a per-library cache and are excluded from equality.
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.tokens == other.tokens
            && self.stats == other.stats
            && self.match_count == other.match_count
            && self.keyword_key == other.keyword_key
    }
}

impl Template {
    pub fn id(&self) -> TemplateId {
        self.id
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub(crate) fn set_symbols(&mut self, symbols: Vec<Symbol>) {
        self.constant_bag = symbols.iter().copied().filter(|s| *s != Symbol::WILDCARD).collect();
        self.constant_bag.sort_unstable();
        self.symbols = symbols;
    }

    pub(crate) fn constant_bag(&self) -> &[Symbol] {
        &self.constant_bag
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn match_count(&self) -> u64 {
        self.match_count
    }

    pub fn keyword_key(&self) -> &str {
        &self.keyword_key
    }

    pub fn position_stats(&self, pos: usize) -> Option<&PositionStats> {
        self.stats.get(pos).and_then(Option::as_ref)
    }

    pub fn is_wildcard(&self, pos: usize) -> bool {
        self.tokens[pos] == WILDCARD
    }

    pub fn constant_count(&self) -> usize {
        self.tokens.iter().filter(|t| *t != WILDCARD).count()
    }

    pub fn wildcard_count(&self) -> usize {
        self.len() - self.constant_count()
    }

    /// The stored matching form, tokens joined by a single space.
    pub fn pattern(&self) -> String {
        self.tokens.join(" ")
    }

    /// Positions whose observed token distribution exceeds `theta` bits.
    pub fn variable_positions(&self, theta: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&p| {
                self.position_stats(p)
                    .is_some_and(|s| entropy_lcs::is_variable(s.counts(), s.total(), theta))
            })
            .collect()
    }

    /// The template as reported to users.
    ///
    /// A position prints as `<*>` when it is a stored wildcard or its entropy
    /// exceeds `theta`. Any other position with statistics prints its
    /// majority token; plain constants print as stored.
    pub fn emitted(&self, theta: f64) -> String {
        let mut out = Vec::with_capacity(self.len());
        for (pos, token) in self.tokens.iter().enumerate() {
            let shown = match self.position_stats(pos) {
                _ if token == WILDCARD => WILDCARD,
                Some(s) if entropy_lcs::is_variable(s.counts(), s.total(), theta) => WILDCARD,
                Some(s) => s.majority().unwrap_or(token),
                None => token,
            };
            out.push(shown);
        }
        out.join(" ")
    }

    pub fn catalog_entry(&self, theta: f64) -> CatalogEntry {
        CatalogEntry {
            id: self.id,
            template: self.emitted(theta),
            match_count: self.match_count,
            keyword_key: self.keyword_key.clone(),
        }
    }

    pub(crate) fn check_invariants(&self) -> Result<(), String> {
        if self.tokens.is_empty() {
            return Err(format!("template {} has no tokens", self.id));
        }
        if self.stats.len() != self.tokens.len() || self.symbols.len() != self.tokens.len() {
            return Err(format!("template {} has ragged position data", self.id));
        }
        if self.match_count == 0 {
            return Err(format!("template {} has match_count 0", self.id));
        }
        for (pos, stats) in self.stats.iter().enumerate() {
            if let Some(s) = stats {
                if s.total() > self.match_count {
                    return Err(format!(
                        "template {} position {pos} counts {} exceed match_count {}",
                        self.id,
                        s.total(),
                        self.match_count
                    ));
                }
            }
        }
        Ok(())
    }
}

/// One row of the exported template catalog.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct CatalogEntry {
    pub id: TemplateId,
    pub template: String,
    pub match_count: u64,
    pub keyword_key: String,
}
