//! Synthetic corpus generation and the timing harness.
//!
//! A corpus is built from `n_templates` random skeletons. Every skeleton
//! carries two keyword tokens (drawn from a separate alphabet, which also
//! forms the corpus keyword library), some constant words and
//! `variable_rate` of its positions as typed variables. Template frequencies
//! follow a Zipf law with exponent 1.1, after one guaranteed log per
//! template.

use std::collections::HashSet;
use std::time::Instant;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Grouping;
use crate::keywords::KeywordLibrary;
use crate::pipeline::{parse_lines, ParseConfig};

pub const ZIPF_EXPONENT: f64 = 1.1;
const MIN_TEMPLATE_LEN: usize = 6;
const MAX_TEMPLATE_LEN: usize = 14;
const KEYWORDS_PER_TEMPLATE: usize = 2;
const PAYLOAD_MIN_TOKENS: usize = 5;
const PAYLOAD_MAX_TOKENS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub n_templates: usize,
    pub n_logs: usize,
    pub seed: u64,
    /// Share of each skeleton's positions that are variables.
    pub variable_rate: f64,
    /// Probability that a log gets a JSON-like payload appended.
    pub length_jitter: f64,
    /// Size of the constant-word alphabet.
    pub vocab: usize,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            n_templates: 50,
            n_logs: 10_000,
            seed: 1,
            variable_rate: 0.2,
            length_jitter: 0.0,
            vocab: 1000,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_templates < 1 {
            return bad("n_templates must be at least 1".into());
        }
        if self.n_logs < self.n_templates {
            return bad(format!(
                "n_logs {} below n_templates {}",
                self.n_logs, self.n_templates
            ));
        }
        if !(0.0..=1.0).contains(&self.variable_rate) {
            return bad(format!("variable_rate {} outside [0, 1]", self.variable_rate));
        }
        if !(0.0..=1.0).contains(&self.length_jitter) {
            return bad(format!("length_jitter {} outside [0, 1]", self.length_jitter));
        }
        if self.vocab < MAX_TEMPLATE_LEN {
            return bad(format!("vocab must be at least {MAX_TEMPLATE_LEN}"));
        }
        Ok(())
    }

    fn keyword_alphabet(&self) -> usize {
        ((self.n_templates as f64).sqrt() * 1.5).ceil().max(8.0) as usize
    }
}

/// A generated corpus with its ground truth.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub lines: Vec<String>,
    /// Line number (0-based) to true template label.
    pub truth: Grouping,
    pub keywords: KeywordLibrary,
    /// Skeletons with variables shown as `<*>`, indexed by template.
    pub skeletons: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
enum VarKind {
    Small,
    Ip,
    Hex,
    Id,
    Path,
    Node,
}

#[derive(Debug, Clone)]
enum Slot {
    Word(String),
    Var(VarKind),
}

const CONSONANTS: &[u8] = b"bcdfghjklmnprstvwz";
const VOWELS: &[u8] = b"aeiou";

fn word(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.random_range(2..=3);
    let mut w = String::with_capacity(syllables * 2);
    for _ in 0..syllables {
        w.push(CONSONANTS[rng.random_range(0..CONSONANTS.len())] as char);
        w.push(VOWELS[rng.random_range(0..VOWELS.len())] as char);
    }
    w
}

fn unique_words(rng: &mut ChaCha8Rng, n: usize, taken: &mut HashSet<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let w = word(rng);
        if taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn variable_value(kind: VarKind, rng: &mut ChaCha8Rng) -> String {
    match kind {
        VarKind::Small => rng.random_range(0..100_000u32).to_string(),
        VarKind::Ip => format!(
            "10.{}.{}.{}",
            rng.random_range(0..256u32),
            rng.random_range(0..256u32),
            rng.random_range(1..255u32)
        ),
        VarKind::Hex => format!("0x{:08x}", rng.random::<u32>()),
        VarKind::Id => format!("id_{}", rng.random_range(0..1_000_000u32)),
        VarKind::Path => format!(
            "/data/v{}/part-{}",
            rng.random_range(0..100u32),
            rng.random_range(0..10_000u32)
        ),
        VarKind::Node => format!("node{}", rng.random_range(0..500u32)),
    }
}

fn payload(rng: &mut ChaCha8Rng) -> String {
    let tokens = rng.random_range(PAYLOAD_MIN_TOKENS..=PAYLOAD_MAX_TOKENS);
    let fields = tokens.div_ceil(2);
    let body: Vec<String> = (0..fields)
        .map(|_| {
            let key = rng.random_range(0..20u32);
            if rng.random_bool(0.5) {
                format!("\"f{key}\": {}", rng.random_range(0..10_000u32))
            } else {
                format!("\"f{key}\": \"s{}\"", rng.random_range(0..10_000u32))
            }
        })
        .collect();
    format!("{{{}}}", body.join(", "))
}

/// Generates a corpus. Identical specs give identical corpora.
pub fn generate(spec: &CorpusSpec) -> Result<Corpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut taken = HashSet::new();
    let keyword_words = unique_words(&mut rng, spec.keyword_alphabet(), &mut taken);
    let vocab = unique_words(&mut rng, spec.vocab, &mut taken);
    const KINDS: [VarKind; 6] = [
        VarKind::Small,
        VarKind::Ip,
        VarKind::Hex,
        VarKind::Id,
        VarKind::Path,
        VarKind::Node,
    ];

    let mut templates: Vec<Vec<Slot>> = Vec::with_capacity(spec.n_templates);
    let mut skeletons = Vec::with_capacity(spec.n_templates);
    let mut seen = HashSet::new();
    while templates.len() < spec.n_templates {
        let len = rng.random_range(MIN_TEMPLATE_LEN..=MAX_TEMPLATE_LEN);
        let mut positions: Vec<usize> = (0..len).collect();
        positions.shuffle(&mut rng);
        let (kw_pos, rest) = positions.split_at(KEYWORDS_PER_TEMPLATE);
        let n_vars = ((spec.variable_rate * len as f64).round() as usize).min(rest.len());
        let var_pos = &rest[..n_vars];

        let kws: Vec<&String> = keyword_words.choose_multiple(&mut rng, KEYWORDS_PER_TEMPLATE).collect();
        let mut slots: Vec<Slot> = (0..len)
            .map(|_| Slot::Word(vocab[rng.random_range(0..vocab.len())].clone()))
            .collect();
        for (&p, kw) in kw_pos.iter().zip(kws) {
            slots[p] = Slot::Word(kw.clone());
        }
        for &p in var_pos {
            slots[p] = Slot::Var(KINDS[rng.random_range(0..KINDS.len())]);
        }
        let skeleton = slots
            .iter()
            .map(|s| match s {
                Slot::Word(w) => w.as_str(),
                Slot::Var(_) => "<*>",
            })
            .collect::<Vec<_>>()
            .join(" ");
        if seen.insert(skeleton.clone()) {
            skeletons.push(skeleton);
            templates.push(slots);
        }
    }

    let mut assignment: Vec<usize> = (0..spec.n_templates).collect();
    if spec.n_logs > spec.n_templates {
        let zipf = Zipf::new(spec.n_templates as f64, ZIPF_EXPONENT)
            .map_err(|e| Error::InvalidConfig(format!("zipf: {e}")))?;
        for _ in spec.n_templates..spec.n_logs {
            let rank = zipf.sample(&mut rng) as usize;
            assignment.push(rank.clamp(1, spec.n_templates) - 1);
        }
    }
    assignment.shuffle(&mut rng);

    let mut lines = Vec::with_capacity(spec.n_logs);
    let mut truth = Grouping::new();
    for (line_no, &t) in assignment.iter().enumerate() {
        let mut parts: Vec<String> = templates[t]
            .iter()
            .map(|s| match s {
                Slot::Word(w) => w.clone(),
                Slot::Var(kind) => variable_value(*kind, &mut rng),
            })
            .collect();
        if spec.length_jitter > 0.0 && rng.random_bool(spec.length_jitter) {
            parts.push(payload(&mut rng));
        }
        lines.push(parts.join(" "));
        truth.insert(line_no as u64, format!("T{t}"));
    }

    Ok(Corpus {
        lines,
        truth,
        keywords: KeywordLibrary::from_phrases(&keyword_words),
        skeletons,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub mean_seconds: f64,
    pub reps: Vec<f64>,
    pub n_logs: usize,
    pub templates_found: usize,
}

/// Times `repetitions` cold-start parses of `lines` on this thread.
///
/// Only the parse itself is inside the clock.
pub fn time_run(
    config: &ParseConfig,
    keywords: &KeywordLibrary,
    lines: &[String],
    repetitions: usize,
) -> Result<TimingReport> {
    if repetitions < 1 {
        return Err(Error::InvalidConfig("repetitions must be at least 1".into()));
    }
    let mut reps = Vec::with_capacity(repetitions);
    let mut templates_found = 0;
    for _ in 0..repetitions {
        let config = config.clone();
        let keywords = keywords.clone();
        let start = Instant::now();
        let out = parse_lines(lines, config, keywords)?;
        reps.push(start.elapsed().as_secs_f64());
        templates_found = out.library.template_count();
    }
    Ok(TimingReport {
        mean_seconds: reps.iter().sum::<f64>() / reps.len() as f64,
        reps,
        n_logs: lines.len(),
        templates_found,
    })
}
