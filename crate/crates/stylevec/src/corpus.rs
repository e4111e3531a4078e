//! Corpus ingestion: multi-word-expression merging, vocabulary construction
//! with min-count filtering, unigram noise table, and subsampled token
//! streams for training.
//!
//! Input corpora are pre-tokenized: UTF-8 text, one utterance per line,
//! tokens separated by spaces. Tokenization itself is out of scope.

use std::cmp::Reverse;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Smoothing exponent for the negative-sampling noise distribution.
pub const NOISE_EXPONENT: f64 = 0.75;
/// Default subsampling threshold (`t`); 0 disables subsampling.
pub const DEFAULT_SUBSAMPLE: f64 = 1e-3;

const MIN_NOISE_TABLE: usize = 1 << 20;
const NOISE_ENTRIES_PER_WORD: usize = 64;

/// Word ↔ id map with counts and the unigram noise table.
///
/// Ids are dense `0..len` and assigned by descending count with
/// lexicographic tie-break, so a vocabulary is a deterministic function of
/// the corpus it was counted from.
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
    total_tokens: u64,
    noise_table: Vec<u32>,
}

impl Vocabulary {
    /// Count words over tokenized lines and keep those occurring at least
    /// `min_count` times.
    pub fn build<I>(lines: I, min_count: u64) -> Result<Self>
    where
        I: IntoIterator,
        I::Item: IntoIterator<Item = String>,
    {
        let mut counts: HashMap<String, u64> = HashMap::new();
        for line in lines {
            for token in line {
                *counts.entry(token).or_insert(0) += 1;
            }
        }
        Self::from_counts(counts.into_iter().filter(|&(_, c)| c >= min_count))
    }

    /// Build from explicit `(word, count)` pairs; ids are (re)assigned by
    /// descending count, ties lexicographic.
    pub fn from_counts<I>(counts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, u64)>,
    {
        let mut entries: Vec<(String, u64)> = counts.into_iter().collect();
        if entries.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        entries.sort_by(|a, b| (Reverse(a.1), &a.0).cmp(&(Reverse(b.1), &b.0)));

        let mut words = Vec::with_capacity(entries.len());
        let mut word_counts = Vec::with_capacity(entries.len());
        let mut index = HashMap::with_capacity(entries.len());
        let mut total = 0u64;
        for (id, (word, count)) in entries.into_iter().enumerate() {
            index.insert(word.clone(), id as u32);
            words.push(word);
            word_counts.push(count);
            total += count;
        }
        let noise_table = build_noise_table(&word_counts);
        Ok(Vocabulary {
            words,
            counts: word_counts,
            index,
            total_tokens: total,
            noise_table,
        })
    }

    /// Read a corpus file (one utterance per line) and build the vocabulary,
    /// applying MWE merging first when a lexicon is given.
    pub fn from_corpus_file(
        path: impl AsRef<Path>,
        lexicon: Option<&MweLexicon>,
        min_count: u64,
    ) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
        let mut counts: HashMap<String, u64> = HashMap::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::from(e).in_file(path))?;
            for token in merged_tokens(&line, lexicon) {
                *counts.entry(token).or_insert(0) += 1;
            }
        }
        Self::from_counts(counts.into_iter().filter(|&(_, c)| c >= min_count))
            .map_err(|e| e.in_file(path))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    /// Corpus token count over retained words.
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    /// Draw one word id from the smoothed unigram noise distribution.
    pub fn sample_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.noise_table[rng.gen_range(0..self.noise_table.len())]
    }

    /// The raw noise table; entry counts per word are proportional to
    /// `count^0.75`.
    pub fn noise_table(&self) -> &[u32] {
        &self.noise_table
    }

    /// Keep probability of word `id` under subsampling threshold `t`.
    pub fn keep_probability(&self, id: u32, t: f64) -> f64 {
        subsample_keep_prob(self.counts[id as usize], self.total_tokens, t)
    }

    /// Expected number of tokens surviving one subsampled pass.
    pub fn expected_stream_tokens(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.total_tokens as f64;
        }
        self.counts
            .iter()
            .map(|&c| c as f64 * subsample_keep_prob(c, self.total_tokens, t))
            .sum()
    }

    /// Dump `word<TAB>count` in id (descending count) order.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        for (word, count) in self.words.iter().zip(&self.counts) {
            writeln!(out, "{word}\t{count}")?;
        }
        Ok(())
    }
}

/// Cumulative-fill integer table: word `w` occupies a share of entries
/// proportional to `count[w]^0.75`.
fn build_noise_table(counts: &[u64]) -> Vec<u32> {
    let size = MIN_NOISE_TABLE.max(counts.len() * NOISE_ENTRIES_PER_WORD);
    let total: f64 = counts.iter().map(|&c| (c as f64).powf(NOISE_EXPONENT)).sum();
    let mut table = Vec::with_capacity(size);
    let mut word = 0usize;
    let mut cumulative = (counts[0] as f64).powf(NOISE_EXPONENT) / total;
    for i in 0..size {
        table.push(word as u32);
        if (i + 1) as f64 / size as f64 > cumulative && word + 1 < counts.len() {
            word += 1;
            cumulative += (counts[word] as f64).powf(NOISE_EXPONENT) / total;
        }
    }
    table
}

/// Keep probability for a word with `count` occurrences out of `total`
/// under threshold `t`: `(sqrt(f/t) + 1) · t/f` clamped to `[0, 1]`,
/// with `f = count/total`.
pub fn subsample_keep_prob(count: u64, total: u64, t: f64) -> f64 {
    debug_assert!(count > 0 && count <= total && t > 0.0);
    let f = count as f64 / total as f64;
    (((f / t).sqrt() + 1.0) * (t / f)).clamp(0.0, 1.0)
}

/// Utterances as token-id sequences; boundaries are exactly the source
/// line boundaries. Unknown words are dropped, empty utterances discarded.
pub struct UtteranceCorpus {
    utterances: Vec<Vec<u32>>,
}

impl UtteranceCorpus {
    pub fn build<I>(lines: I, vocab: &Vocabulary) -> Self
    where
        I: IntoIterator,
        I::Item: IntoIterator,
        <I::Item as IntoIterator>::Item: AsRef<str>,
    {
        let utterances = lines
            .into_iter()
            .filter_map(|line| {
                let ids: Vec<u32> = line
                    .into_iter()
                    .filter_map(|tok| vocab.id(tok.as_ref()))
                    .collect();
                if ids.is_empty() {
                    None
                } else {
                    Some(ids)
                }
            })
            .collect();
        UtteranceCorpus { utterances }
    }

    pub fn from_corpus_file(
        path: impl AsRef<Path>,
        lexicon: Option<&MweLexicon>,
        vocab: &Vocabulary,
    ) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
        let mut utterances = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::from(e).in_file(path))?;
            let ids: Vec<u32> = merged_tokens(&line, lexicon)
                .into_iter()
                .filter_map(|tok| vocab.id(&tok))
                .collect();
            if !ids.is_empty() {
                utterances.push(ids);
            }
        }
        Ok(UtteranceCorpus { utterances })
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn utterance(&self, i: usize) -> &[u32] {
        &self.utterances[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> {
        self.utterances.iter().map(|u| u.as_slice())
    }

    pub fn total_tokens(&self) -> u64 {
        self.utterances.iter().map(|u| u.len() as u64).sum()
    }

    pub fn max_utterance_len(&self) -> usize {
        self.utterances.iter().map(|u| u.len()).max().unwrap_or(0)
    }
}

fn merged_tokens(line: &str, lexicon: Option<&MweLexicon>) -> Vec<String> {
    let tokens: Vec<String> = line.split(' ').filter(|t| !t.is_empty()).map(str::to_owned).collect();
    match lexicon {
        Some(lex) if !tokens.is_empty() => merge_mwe(&tokens, lex),
        _ => tokens,
    }
}

/// Multi-word expressions to merge into single tokens before counting.
pub struct MweLexicon {
    // keyed by first token, expressions sorted longest first
    by_first: HashMap<String, Vec<Vec<String>>>,
    len: usize,
}

impl MweLexicon {
    pub fn empty() -> Self {
        MweLexicon {
            by_first: HashMap::new(),
            len: 0,
        }
    }

    /// Build from expressions; each must have at least two tokens.
    pub fn new<I>(expressions: I) -> Result<Self>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut by_first: HashMap<String, Vec<Vec<String>>> = HashMap::new();
        let mut len = 0;
        for expr in expressions {
            if expr.len() < 2 {
                return Err(Error::InvalidInput(format!(
                    "multi-word expression must have at least 2 tokens, got {:?}",
                    expr
                )));
            }
            by_first.entry(expr[0].clone()).or_default().push(expr);
            len += 1;
        }
        for exprs in by_first.values_mut() {
            exprs.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
            exprs.dedup();
        }
        Ok(MweLexicon { by_first, len })
    }

    /// One expression per line, tokens space-separated; blank lines skipped.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut expressions = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let tokens: Vec<String> = line.split_whitespace().map(str::to_owned).collect();
            if tokens.is_empty() {
                continue;
            }
            if tokens.len() < 2 {
                return Err(Error::parse(
                    i + 1,
                    "multi-word expression must have at least 2 tokens",
                ));
            }
            expressions.push(tokens);
        }
        Self::new(expressions)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
        Self::from_reader(BufReader::new(file)).map_err(|e| e.in_file(path))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Longest expression starting at `tokens[at]`, if any.
    fn longest_match(&self, tokens: &[String], at: usize) -> Option<usize> {
        let exprs = self.by_first.get(&tokens[at])?;
        exprs
            .iter()
            .find(|expr| {
                tokens.len() - at >= expr.len() && tokens[at..at + expr.len()] == expr[..]
            })
            .map(|expr| expr.len())
    }
}

/// Greedy longest-match left-to-right replacement; every matched span
/// becomes a single token joined with `_`.
pub fn merge_mwe(tokens: &[String], lexicon: &MweLexicon) -> Vec<String> {
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        match lexicon.longest_match(tokens, i) {
            Some(n) => {
                out.push(tokens[i..i + n].join("_"));
                i += n;
            }
            None => {
                out.push(tokens[i].clone());
                i += 1;
            }
        }
    }
    out
}

/// Subsampled pass over a corpus: every token is independently dropped
/// with probability `1 − keep_prob`, and positions re-index, so context
/// windows are computed over the surviving tokens. `t = 0` yields the
/// corpus unchanged and consumes no randomness.
pub fn stream_utterances<'a>(
    corpus: &'a UtteranceCorpus,
    vocab: &Vocabulary,
    t: f64,
    rng_seed: u64,
) -> UtteranceStream<'a> {
    stream_utterance_range(corpus, vocab, t, rng_seed, 0..corpus.len())
}

/// Subsampled pass over a contiguous shard of the corpus; each worker
/// streams its own shard with an independently seeded generator.
pub fn stream_utterance_range<'a>(
    corpus: &'a UtteranceCorpus,
    vocab: &Vocabulary,
    t: f64,
    rng_seed: u64,
    range: std::ops::Range<usize>,
) -> UtteranceStream<'a> {
    let keep = if t > 0.0 {
        (0..vocab.len() as u32).map(|id| vocab.keep_probability(id, t)).collect()
    } else {
        Vec::new()
    };
    UtteranceStream {
        corpus,
        keep,
        rng: ChaCha8Rng::seed_from_u64(rng_seed),
        next: range.start,
        end: range.end.min(corpus.len()),
    }
}

pub struct UtteranceStream<'a> {
    corpus: &'a UtteranceCorpus,
    keep: Vec<f64>,
    rng: ChaCha8Rng,
    next: usize,
    end: usize,
}

impl Iterator for UtteranceStream<'_> {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.end {
            return None;
        }
        let utterance = &self.corpus.utterances[self.next];
        self.next += 1;
        if self.keep.is_empty() {
            return Some(utterance.clone());
        }
        Some(
            utterance
                .iter()
                .copied()
                .filter(|&id| self.rng.gen::<f64>() < self.keep[id as usize])
                .collect(),
        )
    }
}
