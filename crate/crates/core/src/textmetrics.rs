//! Tokenization, sentence segmentation and the three sentence-similarity
//! metrics (normalized edit, semantic cosine, paraphrase probability).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::provider::ProviderError;

/// Runs of alphanumerics, optionally joined by single internal apostrophes or
/// hyphens (`don't`, `well-known`). Returned as byte ranges into `text`.
fn token_ranges(text: &str) -> Vec<(usize, usize)> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].1.is_alphanumeric() {
            i += 1;
            continue;
        }
        let start = chars[i].0;
        let mut j = i + 1;
        loop {
            while j < chars.len() && chars[j].1.is_alphanumeric() {
                j += 1;
            }
            let joiner = j + 1 < chars.len()
                && matches!(chars[j].1, '\'' | '\u{2019}' | '-')
                && chars[j + 1].1.is_alphanumeric();
            if !joiner {
                break;
            }
            j += 1;
        }
        let end = chars.get(j).map_or(text.len(), |c| c.0);
        out.push((start, end));
        i = j;
    }
    out
}

pub fn tokens(text: &str) -> Vec<&str> {
    token_ranges(text).into_iter().map(|(s, e)| &text[s..e]).collect()
}

pub fn word_count(text: &str) -> usize {
    token_ranges(text).len()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub text: String,
    /// Code-point offsets `[start, end)` in the source text.
    pub char_span: (usize, usize),
}

const ABBREVIATIONS: &[&str] = &["mr", "mrs", "dr", "st", "vs", "e.g", "i.e", "etc"];

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201D}' | '\u{2019}')
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '\u{201C}' | '\u{2018}' | '(' | '[')
}

/// Word immediately before position `end` (exclusive), stripped of leading
/// punctuation and lowercased.
fn word_before(chars: &[char], end: usize) -> String {
    let mut start = end;
    while start > 0 && !chars[start - 1].is_whitespace() {
        start -= 1;
    }
    let word: String = chars[start..end].iter().collect();
    word.trim_start_matches(|c: char| !c.is_alphanumeric()).to_lowercase()
}

/// Splits at `.`, `!` or `?` (plus any trailing terminators and closing
/// quotes/brackets) when followed by end of text, or by whitespace and then
/// an uppercase letter, digit or opening quote. A period ending one of
/// `Mr. Mrs. Dr. St. vs. e.g. i.e. etc.` never splits.
pub fn split_sentences(text: &str) -> Vec<Sentence> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let mut out = Vec::new();
    let mut push = |start: usize, end: usize| {
        let mut s = start;
        while s < end && chars[s].is_whitespace() {
            s += 1;
        }
        let mut e = end;
        while e > s && chars[e - 1].is_whitespace() {
            e -= 1;
        }
        if s < e {
            out.push(Sentence {
                text: chars[s..e].iter().collect(),
                char_span: (s, e),
            });
        }
    };

    let mut start = 0;
    let mut i = 0;
    while i < n {
        let c = chars[i];
        if !matches!(c, '.' | '!' | '?') {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < n && (matches!(chars[j], '.' | '!' | '?') || is_closer(chars[j])) {
            j += 1;
        }
        let mut k = j;
        while k < n && chars[k].is_whitespace() {
            k += 1;
        }
        let boundary = if k == n {
            true
        } else if k == j {
            false
        } else {
            let next = chars[k];
            next.is_uppercase() || next.is_ascii_digit() || is_opener(next)
        };
        let abbreviation = c == '.' && j == i + 1 && ABBREVIATIONS.contains(&word_before(&chars, i).as_str());
        if boundary && !abbreviation {
            push(start, j);
            start = j;
        }
        i = j;
    }
    push(start, n);
    out
}

/// Unit-cost Levenshtein distance over code points.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - levenshtein(a, b) / max(|a|, |b|)`; two empty strings are identical.
pub fn edit_similarity(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

type TermFreq = BTreeMap<String, u32>;

fn term_freq(text: &str) -> TermFreq {
    let mut tf = TermFreq::new();
    for tok in tokens(text) {
        *tf.entry(tok.to_lowercase()).or_default() += 1;
    }
    tf
}

fn tf_cosine(a: &TermFreq, b: &TermFreq) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let dot: f64 = a
        .iter()
        .filter_map(|(t, &x)| b.get(t).map(|&y| x as f64 * y as f64))
        .sum();
    let na: f64 = a.values().map(|&x| (x as f64).powi(2)).sum();
    let nb: f64 = b.values().map(|&x| (x as f64).powi(2)).sum();
    // Integer-valued norms keep identical inputs at exactly 1.0.
    (dot / (na * nb).sqrt()).clamp(0.0, 1.0)
}

/// Cosine of lowercase term-frequency vectors; 0 when either side has no tokens.
pub fn lexical_cosine(a: &str, b: &str) -> f64 {
    tf_cosine(&term_freq(a), &term_freq(b))
}

pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, ProviderError> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

pub trait ParaphraseProvider: Send + Sync {
    fn name(&self) -> &str;
    /// Probability that `b` paraphrases `a`.
    fn score(&self, a: &str, b: &str) -> Result<f64, ProviderError>;

    fn score_batch(&self, pairs: &[(&str, &str)]) -> Result<Vec<f64>, ProviderError> {
        pairs.iter().map(|(a, b)| self.score(a, b)).collect()
    }
}

/// Feature-hashed term-frequency embedder (FNV-1a buckets). Equal to
/// [`lexical_cosine`] whenever no two distinct terms share a bucket.
#[derive(Debug, Clone)]
pub struct HashedLexicalEmbedder {
    dimension: usize,
}

impl HashedLexicalEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { dimension }
    }
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

impl EmbeddingProvider for HashedLexicalEmbedder {
    fn name(&self) -> &str {
        "hashed-lexical"
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        let mut v = vec![0.0; self.dimension];
        for (term, count) in term_freq(text) {
            v[(fnv1a(&term) % self.dimension as u64) as usize] += count as f64;
        }
        Ok(v)
    }
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Offline paraphrase scorer: `logistic(6 * lexical_cosine(a, b) - 3)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalParaphraseStub;

impl ParaphraseProvider for LexicalParaphraseStub {
    fn name(&self) -> &str {
        "lexical-paraphrase-stub"
    }

    fn score(&self, a: &str, b: &str) -> Result<f64, ProviderError> {
        Ok(logistic(6.0 * lexical_cosine(a, b) - 3.0))
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb).sqrt()
}

fn check_dimension(provider: &dyn EmbeddingProvider, v: &[f64]) -> Result<(), ProviderError> {
    if v.len() != provider.dimension() {
        return Err(ProviderError::new(
            provider.name(),
            format!("expected {}-dimensional vector, got {}", provider.dimension(), v.len()),
        ));
    }
    Ok(())
}

/// Cosine of the provider's embeddings, clamped into `[0, 1]`.
pub fn semantic_similarity(provider: &dyn EmbeddingProvider, a: &str, b: &str) -> Result<f64, ProviderError> {
    let va = provider.embed(a)?;
    let vb = provider.embed(b)?;
    check_dimension(provider, &va)?;
    check_dimension(provider, &vb)?;
    Ok(cosine(&va, &vb).clamp(0.0, 1.0))
}

fn check_probability(provider: &dyn ParaphraseProvider, p: f64) -> Result<f64, ProviderError> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(ProviderError::new(provider.name(), format!("score {p} outside [0, 1]")))
    }
}

pub fn paraphrase_score(provider: &dyn ParaphraseProvider, a: &str, b: &str) -> Result<f64, ProviderError> {
    check_probability(provider, provider.score(a, b)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMetricId {
    Edit,
    Semantic,
    Paraphrase,
}

impl SimilarityMetricId {
    pub const ALL: [SimilarityMetricId; 3] = [
        SimilarityMetricId::Edit,
        SimilarityMetricId::Semantic,
        SimilarityMetricId::Paraphrase,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SimilarityMetricId::Edit => "edit",
            SimilarityMetricId::Semantic => "semantic",
            SimilarityMetricId::Paraphrase => "paraphrase",
        }
    }
}

impl fmt::Display for SimilarityMetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SimilarityMetricId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown metric `{s}` (expected edit, semantic or paraphrase)"))
    }
}

/// Backend for the semantic metric.
pub enum SemanticBackend {
    /// Built-in term-frequency cosine ([`lexical_cosine`]).
    Lexical,
    Embedding(Box<dyn EmbeddingProvider>),
}

/// Backends consulted by [`max_pairwise_influence`].
pub struct Providers {
    pub semantic: SemanticBackend,
    pub paraphrase: Box<dyn ParaphraseProvider>,
}

impl Default for Providers {
    fn default() -> Self {
        Self {
            semantic: SemanticBackend::Lexical,
            paraphrase: Box::new(LexicalParaphraseStub),
        }
    }
}

impl fmt::Debug for Providers {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let semantic = match &self.semantic {
            SemanticBackend::Lexical => "lexical",
            SemanticBackend::Embedding(p) => p.name(),
        };
        f.debug_struct("Providers")
            .field("semantic", &semantic)
            .field("paraphrase", &self.paraphrase.name())
            .finish()
    }
}

/// Highest similarity over all `suggestion x new` sentence pairs, or `None`
/// when either side is empty.
pub fn max_pairwise_influence(
    metric: SimilarityMetricId,
    suggestion_sentences: &[&str],
    new_sentences: &[&str],
    providers: &Providers,
) -> Result<Option<f64>, ProviderError> {
    if suggestion_sentences.is_empty() || new_sentences.is_empty() {
        return Ok(None);
    }
    let pairs = || {
        suggestion_sentences
            .iter()
            .flat_map(|s| new_sentences.iter().map(move |n| (*s, *n)))
    };
    let scores: Vec<f64> = match metric {
        SimilarityMetricId::Edit => pairs().map(|(s, n)| edit_similarity(s, n)).collect(),
        SimilarityMetricId::Semantic => match &providers.semantic {
            SemanticBackend::Lexical => {
                let new_tf: Vec<TermFreq> = new_sentences.iter().map(|n| term_freq(n)).collect();
                suggestion_sentences
                    .iter()
                    .flat_map(|s| {
                        let stf = term_freq(s);
                        new_tf.iter().map(move |ntf| tf_cosine(&stf, ntf)).collect::<Vec<_>>()
                    })
                    .collect()
            }
            SemanticBackend::Embedding(p) => {
                let sv = p.embed_batch(suggestion_sentences)?;
                let nv = p.embed_batch(new_sentences)?;
                if sv.len() != suggestion_sentences.len() || nv.len() != new_sentences.len() {
                    return Err(ProviderError::new(p.name(), "embedding count mismatch"));
                }
                for v in sv.iter().chain(&nv) {
                    check_dimension(p.as_ref(), v)?;
                }
                sv.iter()
                    .flat_map(|a| nv.iter().map(move |b| cosine(a, b).clamp(0.0, 1.0)))
                    .collect()
            }
        },
        SimilarityMetricId::Paraphrase => {
            let pairs: Vec<(&str, &str)> = pairs().collect();
            let p = providers.paraphrase.as_ref();
            let scores = p.score_batch(&pairs)?;
            if scores.len() != pairs.len() {
                return Err(ProviderError::new(p.name(), "score count mismatch"));
            }
            scores
                .into_iter()
                .map(|s| check_probability(p, s))
                .collect::<Result<_, _>>()?
        }
    };
    Ok(scores.into_iter().reduce(f64::max))
}
