//! Evaluation: rank correlation against gold similarity judgments,
//! part-of-speech agreement of nearest neighbors, and neighbor listings.
//!
//! All operations read a frozen [`WordVectors`] table, so they work the
//! same on a freshly trained model and on vectors loaded from disk.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::io::WordVectors;
use crate::model::PartSelector;
use crate::{Error, Result};

/// Word pairs with gold similarity scores.
pub struct SimilarityDataset {
    pairs: Vec<(String, String, f64)>,
}

impl SimilarityDataset {
    pub fn new(pairs: Vec<(String, String, f64)>) -> Result<Self> {
        let mut seen = HashMap::new();
        for (i, (w1, w2, score)) in pairs.iter().enumerate() {
            if !score.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "non-finite gold score for pair ({w1}, {w2})"
                )));
            }
            let key = if w1 <= w2 { (w1.clone(), w2.clone()) } else { (w2.clone(), w1.clone()) };
            if seen.insert(key, i).is_some() {
                return Err(Error::InvalidInput(format!(
                    "duplicate pair ({w1}, {w2})"
                )));
            }
        }
        Ok(SimilarityDataset { pairs })
    }

    /// TSV `word1<TAB>word2<TAB>score`; lines starting with `#` and blank
    /// lines are skipped.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let s = line.trim_end_matches(['\r', '\n']);
            if s.trim().is_empty() || s.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = s.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::parse(
                    i + 1,
                    format!("expected word1<TAB>word2<TAB>score, got {} fields", fields.len()),
                ));
            }
            let score: f64 = fields[2]
                .trim()
                .parse()
                .map_err(|_| Error::parse(i + 1, format!("bad score {:?}", fields[2])))?;
            if !score.is_finite() {
                return Err(Error::parse(i + 1, "score must be finite"));
            }
            if fields[0].is_empty() || fields[1].is_empty() {
                return Err(Error::parse(i + 1, "empty word"));
            }
            pairs.push((fields[0].to_owned(), fields[1].to_owned(), score));
        }
        SimilarityDataset::new(pairs).map_err(|e| match e {
            Error::InvalidInput(msg) => Error::parse(0, msg),
            other => other,
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
        Self::from_reader(BufReader::new(file)).map_err(|e| e.in_file(path))
    }

    pub fn pairs(&self) -> &[(String, String, f64)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// word → part-of-speech tag, one tag per word.
pub struct PosLexicon {
    tags: HashMap<String, String>,
}

impl PosLexicon {
    pub fn new(entries: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut tags = HashMap::new();
        for (word, tag) in entries {
            if tags.insert(word.clone(), tag).is_some() {
                return Err(Error::InvalidInput(format!("duplicate POS entry for {word:?}")));
            }
        }
        Ok(PosLexicon { tags })
    }

    /// TSV `word<TAB>tag`; `#` comments and blank lines are skipped.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let s = line.trim_end_matches(['\r', '\n']);
            if s.trim().is_empty() || s.starts_with('#') {
                continue;
            }
            let (word, tag) = s
                .split_once('\t')
                .ok_or_else(|| Error::parse(i + 1, "expected word<TAB>tag"))?;
            if word.is_empty() || tag.is_empty() {
                return Err(Error::parse(i + 1, "empty word or tag"));
            }
            entries.push((word.to_owned(), tag.to_owned()));
        }
        PosLexicon::new(entries).map_err(|e| match e {
            Error::InvalidInput(msg) => Error::parse(0, msg),
            other => other,
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
        Self::from_reader(BufReader::new(file)).map_err(|e| e.in_file(path))
    }

    pub fn tag(&self, word: &str) -> Option<&str> {
        self.tags.get(word).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }
}

/// One evaluation outcome plus how much of the dataset was usable.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub metric: String,
    pub value: f64,
    /// Fraction of dataset items with all words in-vocabulary.
    pub coverage: f64,
    /// Number of items actually scored.
    pub n_items: usize,
}

/// Cosine similarity; errors on a zero vector.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    debug_assert_eq!(u.len(), v.len());
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (&a, &b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(dot / (nu.sqrt() * nv.sqrt()))
}

/// Spearman rank correlation: Pearson over average-fractional ranks
/// (tied values share the mean of their positions).
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidInput(
            "spearman needs two sequences of equal length >= 2".into(),
        ));
    }
    let rx = fractional_ranks(xs);
    let ry = fractional_ranks(ys);
    pearson(&rx, &ry)
}

fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share the mean 1-based rank
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok(cov / (vx.sqrt() * vy.sqrt()))
}

/// Spearman correlation (×100) between gold scores and cosine similarity
/// on the selected part; pairs with an out-of-vocabulary word are skipped
/// and reported through `coverage`.
pub fn similarity_correlation(
    vectors: &WordVectors,
    part: PartSelector,
    dataset: &SimilarityDataset,
) -> Result<EvalReport> {
    let mut system = Vec::new();
    let mut gold = Vec::new();
    for (w1, w2, score) in dataset.pairs() {
        let (Some(a), Some(b)) = (vectors.id(w1), vectors.id(w2)) else {
            continue;
        };
        system.push(cosine(vectors.part_vector(a, part), vectors.part_vector(b, part))?);
        gold.push(*score);
    }
    if system.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "only {} of {} pairs are in-vocabulary",
            system.len(),
            dataset.len()
        )));
    }
    let rho = spearman(&system, &gold)?;
    Ok(EvalReport {
        metric: "rho".into(),
        value: 100.0 * rho,
        coverage: system.len() as f64 / dataset.len() as f64,
        n_items: system.len(),
    })
}

/// Fraction of each word's `n` nearest neighbors sharing its POS tag,
/// averaged over every tagged in-vocabulary word. Neighbors are searched
/// within the tagged words only, so the indicator is always defined.
pub fn syntax_acc(
    vectors: &WordVectors,
    part: PartSelector,
    pos: &PosLexicon,
    n: usize,
) -> Result<EvalReport> {
    if n < 1 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let tagged: Vec<u32> = (0..vectors.len() as u32)
        .filter(|&id| pos.tag(vectors.word(id)).is_some())
        .collect();
    if tagged.len() < n + 1 {
        return Err(Error::InsufficientData(format!(
            "syntax_acc@{n} needs at least {} tagged in-vocabulary words, found {}",
            n + 1,
            tagged.len()
        )));
    }
    let mut matches = 0u64;
    for &w in &tagged {
        let tag = pos.tag(vectors.word(w)).expect("tagged");
        for (neighbor, _) in rank_neighbors(vectors, part, w, n, &tagged) {
            if pos.tag(vectors.word(neighbor)) == Some(tag) {
                matches += 1;
            }
        }
    }
    let pos_total = pos.len();
    Ok(EvalReport {
        metric: format!("syntax_acc@{n}"),
        value: matches as f64 / (tagged.len() * n) as f64,
        coverage: tagged.len() as f64 / pos_total as f64,
        n_items: tagged.len(),
    })
}

/// Top-`n` neighbors of `word` by cosine on the selected part, best first;
/// ties break toward the smaller word id.
pub fn neighbors(
    vectors: &WordVectors,
    part: PartSelector,
    word: &str,
    n: usize,
) -> Result<Vec<(String, f64)>> {
    let query = vectors
        .id(word)
        .ok_or_else(|| Error::UnknownWord(word.to_owned()))?;
    let candidates: Vec<u32> = (0..vectors.len() as u32).collect();
    if vectors.part_vector(query, part).iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroVector);
    }
    Ok(rank_neighbors(vectors, part, query, n, &candidates)
        .into_iter()
        .map(|(id, score)| (vectors.word(id).to_owned(), score))
        .collect())
}

/// Exhaustive scan: cosine against every candidate except the query,
/// sorted by descending score with word-id tie-break. Zero-norm candidates
/// are skipped.
fn rank_neighbors(
    vectors: &WordVectors,
    part: PartSelector,
    query: u32,
    n: usize,
    candidates: &[u32],
) -> Vec<(u32, f64)> {
    let q = vectors.part_vector(query, part);
    let mut scored: Vec<(u32, f64)> = candidates
        .iter()
        .filter(|&&c| c != query)
        .filter_map(|&c| cosine(q, vectors.part_vector(c, part)).ok().map(|s| (c, s)))
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("cosine is finite").then(a.0.cmp(&b.0)));
    scored.truncate(n);
    scored
}
