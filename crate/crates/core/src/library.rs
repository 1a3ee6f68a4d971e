//! The dynamic template dictionary: keyword key to a bucket of templates
//! plus the bucket's vector index.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::preprocess::TokenSequence;
use crate::template::{CatalogEntry, PositionStats, Symbol, Template, TemplateId, WILDCARD};
use crate::vecindex::{embed, FeatureSet, PunctuationVector, VectorIndex};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bucket {
    pub(crate) templates: Vec<Template>,
    pub(crate) index: VectorIndex,
}

impl Bucket {
    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn index(&self) -> &VectorIndex {
        &self.index
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }
}

/// String interner shared by all templates of one library.
#[derive(Debug, Clone, Default)]
pub(crate) struct Interner {
    ids: HashMap<String, Symbol>,
}

/// Never assigned by the interner; compares unequal to every template symbol.
pub(crate) const UNKNOWN: Symbol = Symbol(u32::MAX - 1);

impl Interner {
    pub(crate) fn intern(&mut self, token: &str) -> Symbol {
        if token == WILDCARD {
            return Symbol::WILDCARD;
        }
        if let Some(&s) = self.ids.get(token) {
            return s;
        }
        let s = Symbol(self.ids.len() as u32);
        assert!(s.0 < UNKNOWN.0, "interner exhausted");
        self.ids.insert(token.to_string(), s);
        s
    }

    pub(crate) fn lookup(&self, token: &str) -> Symbol {
        if token == WILDCARD {
            return Symbol::WILDCARD;
        }
        self.ids.get(token).copied().unwrap_or(UNKNOWN)
    }
}

#[derive(Debug, Clone, Default)]
pub struct TemplateLibrary {
    pub(crate) buckets: HashMap<String, Bucket>,
    pub(crate) next_id: TemplateId,
    locator: HashMap<TemplateId, (String, usize)>,
    pub(crate) interner: Interner,
}

impl PartialEq for TemplateLibrary {
    fn eq(&self, other: &Self) -> bool {
        self.next_id == other.next_id && self.buckets == other.buckets
    }
}

impl TemplateLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next_id(&self) -> TemplateId {
        self.next_id
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    pub fn template_count(&self) -> usize {
        self.locator.len()
    }

    pub fn bucket(&self, key: &str) -> Option<&Bucket> {
        self.buckets.get(key)
    }

    /// Bucket keys in sorted order.
    pub fn keys(&self) -> Vec<&str> {
        let mut keys: Vec<&str> = self.buckets.keys().map(String::as_str).collect();
        keys.sort_unstable();
        keys
    }

    pub fn get(&self, id: TemplateId) -> Option<&Template> {
        let (key, pos) = self.locator.get(&id)?;
        self.buckets.get(key).map(|b| &b.templates[*pos])
    }

    pub(crate) fn get_mut(&mut self, id: TemplateId) -> Option<&mut Template> {
        let (key, pos) = self.locator.get(&id)?;
        self.buckets.get_mut(key).map(|b| &mut b.templates[*pos])
    }

    /// All templates ordered by id.
    pub fn templates(&self) -> impl Iterator<Item = &Template> {
        (0..self.next_id).filter_map(move |id| self.get(id))
    }

    /// Inserts `tokens` as a new all-constant template under `key`, indexed
    /// by `vector`.
    pub fn insert(
        &mut self,
        key: &str,
        tokens: &TokenSequence,
        vector: PunctuationVector,
    ) -> Result<&Template> {
        if tokens.is_empty() {
            return Err(Error::Degenerate(format!(
                "line {} has no tokens",
                tokens.source_line_no
            )));
        }
        let id = self.next_id;
        let symbols: Vec<Symbol> = tokens.tokens.iter().map(|t| self.interner.intern(t)).collect();
        let mut template = Template {
            id,
            tokens: tokens.tokens.clone(),
            symbols: Vec::new(),
            constant_bag: Vec::new(),
            stats: vec![None; tokens.len()],
            match_count: 1,
            keyword_key: key.to_string(),
        };
        template.set_symbols(symbols);
        self.push(template, vector);
        self.next_id = id + 1;
        Ok(self.get(id).expect("just inserted"))
    }

    /// Like [`insert`](Self::insert), embedding the space-joined tokens with
    /// the default feature set.
    pub fn insert_template(&mut self, key: &str, tokens: &TokenSequence) -> Result<&Template> {
        let vector = embed(&tokens.tokens.join(" "), &FeatureSet::default());
        self.insert(key, tokens, vector)
    }

    fn push(&mut self, template: Template, vector: PunctuationVector) {
        let key = template.keyword_key.clone();
        let id = template.id;
        let bucket = self.buckets.entry(key.clone()).or_default();
        bucket.index.add(id, vector);
        bucket.templates.push(template);
        self.locator.insert(id, (key, bucket.templates.len() - 1));
    }

    /// Rebuilds a library from decoded parts, checking every invariant.
    pub(crate) fn from_parts(
        next_id: TemplateId,
        buckets: Vec<(String, Vec<(Template, PunctuationVector)>)>,
    ) -> std::result::Result<Self, String> {
        let mut lib = TemplateLibrary {
            next_id,
            ..Default::default()
        };
        for (key, entries) in buckets {
            if lib.buckets.contains_key(&key) {
                return Err(format!("duplicate bucket key {key:?}"));
            }
            if entries.is_empty() {
                return Err(format!("bucket {key:?} is empty"));
            }
            for (mut template, vector) in entries {
                if template.keyword_key != key {
                    return Err(format!("template {} filed under wrong key", template.id));
                }
                if template.id >= next_id {
                    return Err(format!("template id {} not below next_id {next_id}", template.id));
                }
                if lib.locator.contains_key(&template.id) {
                    return Err(format!("duplicate template id {}", template.id));
                }
                let symbols = template.tokens.iter().map(|t| lib.interner.intern(t)).collect();
                template.set_symbols(symbols);
                template.check_invariants()?;
                lib.push(template, vector);
            }
        }
        Ok(lib)
    }

    /// Catalog rows ordered by id.
    pub fn catalog(&self, theta: f64) -> Vec<CatalogEntry> {
        self.templates().map(|t| t.catalog_entry(theta)).collect()
    }

    pub fn catalog_json(&self, theta: f64) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.catalog(theta))?)
    }

    /// Verifies the structural invariants; used by tests and after restore.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let mut seen = 0usize;
        for (key, bucket) in &self.buckets {
            if bucket.index.len() != bucket.templates.len() {
                return Err(format!("bucket {key:?} index/template count differ"));
            }
            for (t, (id, _)) in bucket.templates.iter().zip(bucket.index.entries()) {
                if t.id != *id {
                    return Err(format!("bucket {key:?} index entry {id} maps to template {}", t.id));
                }
                if t.keyword_key != *key {
                    return Err(format!("template {} filed under wrong key", t.id));
                }
                if t.id >= self.next_id {
                    return Err(format!("template id {} not below next_id", t.id));
                }
                t.check_invariants()?;
                seen += 1;
            }
        }
        if seen != self.locator.len() {
            return Err("locator out of sync with buckets".into());
        }
        Ok(())
    }
}

/// Wraps a template's stats vector for one position, seeding it when absent.
pub(crate) fn seeded_stats(existing: Option<PositionStats>, token: &str, prior: u64) -> PositionStats {
    existing.unwrap_or_else(|| {
        let mut s = PositionStats::default();
        s.record(token, prior);
        s
    })
}
