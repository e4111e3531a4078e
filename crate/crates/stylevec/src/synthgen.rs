//! Synthetic dialog worlds with controlled style and topic structure.
//!
//! Every utterance commits to one style and one topic. Style markers of
//! that style occupy both utterance edges (and occasionally an interior
//! slot), while the middle mixes topic words with shared function words.
//! Markers of the same style therefore co-occur within utterances, almost
//! always beyond a small window of each other, which is exactly the signal
//! the distant-context trainers are meant to pick up. The generator also
//! emits gold similarity pairs over the markers and a POS lexicon tagging
//! the three word classes.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Probability that an interior slot holds a function word.
const P_FUNCTION: f64 = 0.3;
/// Probability that an interior slot holds an extra marker of the
/// utterance's style.
const P_INTERIOR_MARKER: f64 = 0.05;

pub const POS_MARKER: &str = "MARKER";
pub const POS_TOPIC: &str = "TOPIC";
pub const POS_FUNCTION: &str = "FUNC";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StyleWorldConfig {
    pub n_styles: usize,
    pub n_topics: usize,
    pub markers_per_style: usize,
    pub words_per_topic: usize,
    pub n_function_words: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub n_utterances: usize,
    pub seed: u64,
}

impl Default for StyleWorldConfig {
    fn default() -> Self {
        StyleWorldConfig {
            n_styles: 4,
            n_topics: 6,
            markers_per_style: 8,
            words_per_topic: 20,
            n_function_words: 30,
            min_len: 8,
            max_len: 16,
            n_utterances: 50_000,
            seed: 42,
        }
    }
}

impl StyleWorldConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("styles", self.n_styles),
            ("topics", self.n_topics),
            ("markers_per_style", self.markers_per_style),
            ("words_per_topic", self.words_per_topic),
            ("function_words", self.n_function_words),
            ("utterances", self.n_utterances),
        ] {
            if value < 1 {
                return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        if self.min_len < 2 {
            return Err(Error::InvalidConfig(
                "min_len must be at least 2 (utterances carry two edge markers)".into(),
            ));
        }
        if self.min_len > self.max_len {
            return Err(Error::InvalidConfig("min_len must not exceed max_len".into()));
        }
        Ok(())
    }

    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value.parse().map_err(|_| {
                Error::InvalidConfig(format!("cannot parse {value:?} for key {key:?}"))
            })
        }
        match key {
            "styles" => self.n_styles = num(key, value)?,
            "topics" => self.n_topics = num(key, value)?,
            "markers_per_style" => self.markers_per_style = num(key, value)?,
            "words_per_topic" => self.words_per_topic = num(key, value)?,
            "function_words" => self.n_function_words = num(key, value)?,
            "min_len" => self.min_len = num(key, value)?,
            "max_len" => self.max_len = num(key, value)?,
            "utterances" => self.n_utterances = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown configuration key {other:?}"
                )))
            }
        }
        Ok(())
    }

    pub fn update_from_reader<R: BufRead>(&mut self, reader: R) -> Result<()> {
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let s = line.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            let (key, value) = s
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, "expected key=value"))?;
            self.apply_kv(key.trim(), value.trim())
                .map_err(|e| Error::parse(i + 1, e.to_string()))?;
        }
        Ok(())
    }

    pub fn update_from_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::from(e).in_file(path))?;
        self.update_from_reader(std::io::BufReader::new(file))
            .map_err(|e| e.in_file(path))
    }
}

/// A generated world: corpus, gold pairs, POS lexicon, and manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleWorld {
    pub utterances: Vec<Vec<String>>,
    pub gold_pairs: Vec<(String, String, f64)>,
    pub pos_entries: Vec<(String, String)>,
    pub manifest: Vec<(String, String)>,
    /// Marker words per style, style-major.
    pub style_markers: Vec<Vec<String>>,
}

pub struct StyleWorldPaths {
    pub corpus: PathBuf,
    pub pairs: PathBuf,
    pub pos: PathBuf,
    pub manifest: PathBuf,
}

/// Generate a world; byte-identical output for identical configs.
pub fn generate(config: &StyleWorldConfig) -> Result<StyleWorld> {
    config.validate()?;

    let style_markers: Vec<Vec<String>> = (0..config.n_styles)
        .map(|s| (0..config.markers_per_style).map(|m| format!("s{s}m{m}")).collect())
        .collect();
    let topic_words: Vec<Vec<String>> = (0..config.n_topics)
        .map(|t| (0..config.words_per_topic).map(|w| format!("t{t}w{w:02}")).collect())
        .collect();
    let function_words: Vec<String> =
        (0..config.n_function_words).map(|f| format!("f{f:02}")).collect();

    let mut seen = HashSet::new();
    for word in style_markers
        .iter()
        .chain(&topic_words)
        .flatten()
        .chain(&function_words)
    {
        if !seen.insert(word.as_str()) {
            return Err(Error::InvalidConfig(format!(
                "class vocabularies collide on {word:?}"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut utterances = Vec::with_capacity(config.n_utterances);
    for _ in 0..config.n_utterances {
        let style = rng.gen_range(0..config.n_styles);
        let topic = rng.gen_range(0..config.n_topics);
        let len = rng.gen_range(config.min_len..=config.max_len);
        let markers = &style_markers[style];
        let mut tokens = Vec::with_capacity(len);
        tokens.push(markers[rng.gen_range(0..markers.len())].clone());
        for _ in 1..len - 1 {
            let r = rng.gen::<f64>();
            let word = if r < P_INTERIOR_MARKER {
                &markers[rng.gen_range(0..markers.len())]
            } else if r < P_INTERIOR_MARKER + P_FUNCTION {
                &function_words[rng.gen_range(0..function_words.len())]
            } else {
                &topic_words[topic][rng.gen_range(0..config.words_per_topic)]
            };
            tokens.push(word.clone());
        }
        tokens.push(markers[rng.gen_range(0..markers.len())].clone());
        utterances.push(tokens);
    }

    // gold: every unordered marker pair, +2 within a style, -2 across
    let flat_markers: Vec<(usize, &String)> = style_markers
        .iter()
        .enumerate()
        .flat_map(|(s, ms)| ms.iter().map(move |m| (s, m)))
        .collect();
    let mut gold_pairs = Vec::new();
    for i in 0..flat_markers.len() {
        for j in i + 1..flat_markers.len() {
            let (si, wi) = flat_markers[i];
            let (sj, wj) = flat_markers[j];
            let score = if si == sj { 2.0 } else { -2.0 };
            gold_pairs.push((wi.clone(), wj.clone(), score));
        }
    }

    let mut pos_entries = Vec::new();
    for m in style_markers.iter().flatten() {
        pos_entries.push((m.clone(), POS_MARKER.to_owned()));
    }
    for w in topic_words.iter().flatten() {
        pos_entries.push((w.clone(), POS_TOPIC.to_owned()));
    }
    for f in &function_words {
        pos_entries.push((f.clone(), POS_FUNCTION.to_owned()));
    }

    let mut manifest = vec![
        ("styles".to_owned(), config.n_styles.to_string()),
        ("topics".to_owned(), config.n_topics.to_string()),
        ("markers_per_style".to_owned(), config.markers_per_style.to_string()),
        ("words_per_topic".to_owned(), config.words_per_topic.to_string()),
        ("function_words".to_owned(), config.n_function_words.to_string()),
        ("min_len".to_owned(), config.min_len.to_string()),
        ("max_len".to_owned(), config.max_len.to_string()),
        ("utterances".to_owned(), config.n_utterances.to_string()),
        ("seed".to_owned(), config.seed.to_string()),
    ];
    for (s, markers) in style_markers.iter().enumerate() {
        manifest.push((format!("class.style.{s}"), markers.join(",")));
    }
    for (t, words) in topic_words.iter().enumerate() {
        manifest.push((format!("class.topic.{t}"), words.join(",")));
    }
    manifest.push(("class.function".to_owned(), function_words.join(",")));

    Ok(StyleWorld {
        utterances,
        gold_pairs,
        pos_entries,
        manifest,
        style_markers,
    })
}

impl StyleWorld {
    /// Write `corpus.txt`, `pairs.tsv`, `pos.tsv`, and `manifest.txt`.
    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> Result<StyleWorldPaths> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::from(e).in_file(dir))?;
        let paths = StyleWorldPaths {
            corpus: dir.join("corpus.txt"),
            pairs: dir.join("pairs.tsv"),
            pos: dir.join("pos.tsv"),
            manifest: dir.join("manifest.txt"),
        };

        let mut out = buffered(&paths.corpus)?;
        for utterance in &self.utterances {
            writeln!(out, "{}", utterance.join(" ")).map_err(Error::from)?;
        }
        let mut out = buffered(&paths.pairs)?;
        for (w1, w2, score) in &self.gold_pairs {
            writeln!(out, "{w1}\t{w2}\t{score}").map_err(Error::from)?;
        }
        let mut out = buffered(&paths.pos)?;
        for (word, tag) in &self.pos_entries {
            writeln!(out, "{word}\t{tag}").map_err(Error::from)?;
        }
        let mut out = buffered(&paths.manifest)?;
        for (key, value) in &self.manifest {
            writeln!(out, "{key}={value}").map_err(Error::from)?;
        }
        Ok(paths)
    }
}

fn buffered(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::from(e).in_file(path))?;
    Ok(std::io::BufWriter::new(file))
}
