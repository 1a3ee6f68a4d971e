//! Punctuation-vector embedding, streaming standardization and exact
//! nearest-neighbor recall.


use crate::error::{Error, Result};
use crate::template::TemplateId;

/// Number of punctuation features.
pub const FEATURES: usize = 39;
/// Embedding dimension: one count per feature plus the string length.
pub const DIM: usize = FEATURES + 1;

const STD_EPSILON: f64 = 1e-9;

/// The 32 ASCII punctuation marks followed by seven full-width marks.
pub const DEFAULT_FEATURES: &str = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~，。：；（）【";

/// Ordered set of 39 distinct feature characters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSet {
    chars: Vec<char>,
    ascii_slot: [u8; 128],
}

impl FeatureSet {
    pub fn new(spec: &str) -> Result<Self> {
        let chars: Vec<char> = spec.chars().collect();
        if chars.len() != FEATURES {
            return Err(Error::InvalidConfig(format!(
                "punct_features needs exactly {FEATURES} characters, got {}",
                chars.len()
            )));
        }
        let mut ascii_slot = [u8::MAX; 128];
        for (i, &c) in chars.iter().enumerate() {
            if chars[..i].contains(&c) {
                return Err(Error::InvalidConfig(format!(
                    "punct_features repeats character {c:?}"
                )));
            }
            if c.is_ascii() {
                ascii_slot[c as usize] = i as u8;
            }
        }
        Ok(Self { chars, ascii_slot })
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn as_string(&self) -> String {
        self.chars.iter().collect()
    }

    #[inline]
    fn slot(&self, c: char) -> Option<usize> {
        if c.is_ascii() {
            let s = self.ascii_slot[c as usize];
            (s != u8::MAX).then_some(s as usize)
        } else {
            self.chars.iter().position(|&f| f == c)
        }
    }
}

impl Default for FeatureSet {
    fn default() -> Self {
        Self::new(DEFAULT_FEATURES).expect("default feature set is valid")
    }
}

/// Feature counts plus code-point length of a masked log line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PunctuationVector {
    pub counts: [u32; FEATURES],
    pub length: u32,
}

impl PunctuationVector {
    pub fn as_array(&self) -> [f64; DIM] {
        let mut out = [0.0; DIM];
        for (o, &c) in out.iter_mut().zip(self.counts.iter()) {
            *o = c as f64;
        }
        out[FEATURES] = self.length as f64;
        out
    }
}

pub fn embed(masked_log: &str, features: &FeatureSet) -> PunctuationVector {
    let mut counts = [0u32; FEATURES];
    let mut length = 0u32;
    for c in masked_log.chars() {
        length += 1;
        if let Some(slot) = features.slot(c) {
            counts[slot] += 1;
        }
    }
    PunctuationVector { counts, length }
}

/// Running per-dimension mean and population variance (Welford).
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    n: u64,
    mean: [f64; DIM],
    m2: [f64; DIM],
}

impl Default for Standardizer {
    fn default() -> Self {
        Self {
            n: 0,
            mean: [0.0; DIM],
            m2: [0.0; DIM],
        }
    }
}

impl Standardizer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn update(&mut self, v: &PunctuationVector) {
        self.n += 1;
        let n = self.n as f64;
        for (i, x) in v.as_array().into_iter().enumerate() {
            let delta = x - self.mean[i];
            self.mean[i] += delta / n;
            self.m2[i] += delta * (x - self.mean[i]);
        }
    }

    pub fn mean(&self) -> &[f64; DIM] {
        &self.mean
    }

    pub fn std_dev(&self, dim: usize) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        (self.m2[dim].max(0.0) / self.n as f64).sqrt()
    }

    /// Transforms `v` with the current statistics. Zero-variance dimensions
    /// map to 0.
    pub fn transform(&self, v: &PunctuationVector) -> [f64; DIM] {
        let mut out = [0.0; DIM];
        for (i, x) in v.as_array().into_iter().enumerate() {
            if self.m2[i] > 0.0 {
                out[i] = (x - self.mean[i]) / self.std_dev(i).max(STD_EPSILON);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub template_id: TemplateId,
    pub similarity: f64,
}

/// Maps an L2 distance to a similarity in (0, 1].
pub fn similarity(distance: f64) -> f64 {
    1.0 / (1.0 + distance)
}

/// Exact flat index over raw punctuation vectors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VectorIndex {
    entries: Vec<(TemplateId, PunctuationVector)>,
}

impl VectorIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(TemplateId, PunctuationVector)] {
        &self.entries
    }

    pub fn add(&mut self, template_id: TemplateId, v: PunctuationVector) {
        debug_assert!(self.entries.iter().all(|(id, _)| *id != template_id));
        self.entries.push((template_id, v));
    }

    /// Up to `k` entries nearest to the standardized `query`, with
    /// similarity at least `tau`. Stored vectors are standardized with
    /// `standardizer` at query time. Best first; equal similarities go to
    /// the lower template id.
    pub fn recall(
        &self,
        query: &[f64; DIM],
        standardizer: &Standardizer,
        k: usize,
        tau: f64,
    ) -> Vec<Neighbor> {
        let mut hits: Vec<Neighbor> = self
            .entries
            .iter()
            .filter_map(|(id, raw)| {
                let entry = standardizer.transform(raw);
                let d2: f64 = entry
                    .iter()
                    .zip(query.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                let s = similarity(d2.sqrt());
                (s >= tau).then_some(Neighbor {
                    template_id: *id,
                    similarity: s,
                })
            })
            .collect();
        let by_rank = |a: &Neighbor, b: &Neighbor| {
            b.similarity
                .total_cmp(&a.similarity)
                .then(a.template_id.cmp(&b.template_id))
        };
        if hits.len() > k {
            hits.select_nth_unstable_by(k - 1, by_rank);
            hits.truncate(k);
        }
        hits.sort_by(by_rank);
        hits
    }
}
