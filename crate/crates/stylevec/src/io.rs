//! Vector-file serialization (word2vec-compatible text format) and model
//! checkpoints.
//!
//! A vector file starts with a `<vocab_size> <dimension>` header line,
//! followed by one `word v1 .. vD` line per word in descending-frequency
//! order. Values are written in shortest-round-trip decimal form, so a
//! save/load cycle reproduces every coordinate exactly.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::corpus::Vocabulary;
use crate::model::{PartSelector, SplitEmbeddingModel};
use crate::trainer::TrainConfig;
use crate::{Error, Result};

const CHECKPOINT_MAGIC: &str = "stylevec-checkpoint 1";

/// Shape declared by a vector file's first line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VectorFileHeader {
    pub vocab_size: usize,
    pub dimension: usize,
}

/// A frozen word → vector table, either exported from a model or loaded
/// from a vector file. `d_style` marks how many leading coordinates form
/// the style half; for loaded files it defaults to the full width.
pub struct WordVectors {
    words: Vec<String>,
    index: HashMap<String, u32>,
    data: Vec<f64>,
    dim: usize,
    d_style: usize,
}

impl WordVectors {
    pub fn new(words: Vec<String>, data: Vec<f64>, dim: usize, d_style: usize) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        if dim == 0 || d_style == 0 || d_style > dim {
            return Err(Error::InvalidInput(format!(
                "bad table shape: dim {dim}, d_style {d_style}"
            )));
        }
        if data.len() != words.len() * dim {
            return Err(Error::InvalidInput(format!(
                "table holds {} values, want {} x {}",
                data.len(),
                words.len(),
                dim
            )));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i as u32).is_some() {
                return Err(Error::InvalidInput(format!("duplicate word {w:?}")));
            }
        }
        Ok(WordVectors {
            words,
            index,
            data,
            dim,
            d_style,
        })
    }

    /// Export the full input vectors of a model, keeping its split point.
    pub fn from_model(model: &SplitEmbeddingModel, vocab: &Vocabulary) -> Self {
        let dim = model.dim();
        let d_style = if model.d_synsem() > 0 { model.d_style() } else { dim };
        let data: Vec<f64> = (0..vocab.len() as u32)
            .flat_map(|w| model.input_vector(w, PartSelector::Full))
            .collect();
        WordVectors {
            words: vocab.words().to_vec(),
            index: vocab
                .words()
                .iter()
                .enumerate()
                .map(|(i, w)| (w.clone(), i as u32))
                .collect(),
            data,
            dim,
            d_style,
        }
    }

    /// Export one part of a model's input vectors as an undivided table.
    pub fn from_model_part(
        model: &SplitEmbeddingModel,
        vocab: &Vocabulary,
        part: ModelPart,
    ) -> Self {
        let (lo, hi) = match part {
            ModelPart::Full => (0, model.dim()),
            ModelPart::Style => (0, model.d_style()),
            ModelPart::Synsem => (model.d_style(), model.dim()),
        };
        let dim = hi - lo;
        assert!(dim > 0, "selected part is empty");
        let data: Vec<f64> = (0..vocab.len() as u32)
            .flat_map(|w| model.input_vector(w, PartSelector::Full)[lo..hi].to_vec())
            .collect();
        WordVectors {
            words: vocab.words().to_vec(),
            index: vocab
                .words()
                .iter()
                .enumerate()
                .map(|(i, w)| (w.clone(), i as u32))
                .collect(),
            data,
            dim,
            d_style: dim,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn d_style(&self) -> usize {
        self.d_style
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn vector(&self, id: u32) -> &[f64] {
        let i = id as usize * self.dim;
        &self.data[i..i + self.dim]
    }

    /// The selected part of one vector: the style prefix or the whole row.
    pub fn part_vector(&self, id: u32, part: PartSelector) -> &[f64] {
        let row = self.vector(id);
        match part {
            PartSelector::Full => row,
            PartSelector::StyleHalf => &row[..self.d_style],
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::from(e).in_file(path))?;
        let mut out = BufWriter::new(file);
        self.write(&mut out).map_err(|e| e.in_file(path))
    }

    pub fn write<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "{} {}", self.len(), self.dim)?;
        for (i, word) in self.words.iter().enumerate() {
            write!(out, "{word}")?;
            for v in self.vector(i as u32) {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Which slice of a split model a vector file holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelPart {
    Full,
    Style,
    Synsem,
}

/// Write one vector file for the selected part of the model.
pub fn save_vectors(
    model: &SplitEmbeddingModel,
    vocab: &Vocabulary,
    part: ModelPart,
    path: impl AsRef<Path>,
) -> Result<()> {
    WordVectors::from_model_part(model, vocab, part).save(path)
}

/// Write `<prefix>.full`, plus `<prefix>.style` and `<prefix>.synsem` when
/// the model is split. Returns the files written.
pub fn save_vectors_split(
    model: &SplitEmbeddingModel,
    vocab: &Vocabulary,
    prefix: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    let prefix = prefix.as_ref();
    let with_ext = |ext: &str| -> PathBuf {
        let mut os = prefix.as_os_str().to_owned();
        os.push(ext);
        PathBuf::from(os)
    };
    let mut written = vec![with_ext(".full")];
    save_vectors(model, vocab, ModelPart::Full, &written[0])?;
    if model.d_synsem() > 0 {
        let style = with_ext(".style");
        save_vectors(model, vocab, ModelPart::Style, &style)?;
        written.push(style);
        let synsem = with_ext(".synsem");
        save_vectors(model, vocab, ModelPart::Synsem, &synsem)?;
        written.push(synsem);
    }
    Ok(written)
}

pub fn load_vectors(path: impl AsRef<Path>) -> Result<WordVectors> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
    load_vectors_reader(BufReader::new(file)).map_err(|e| e.in_file(path))
}

/// Strict parse of the text vector format. Any mismatch between the header
/// and the body — line count, per-line value count, duplicate or empty
/// words, non-finite values — is an error; nothing is returned partially.
pub fn load_vectors_reader<R: BufRead>(reader: R) -> Result<WordVectors> {
    let mut lines = reader.lines();
    let header = parse_header(match lines.next() {
        Some(line) => line?,
        None => return Err(Error::parse(1, "missing header line")),
    })?;
    if header.vocab_size == 0 {
        return Err(Error::EmptyVocabulary);
    }
    if header.dimension == 0 {
        return Err(Error::parse(1, "dimension must be positive"));
    }

    let mut words = Vec::new();
    let mut data = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            return Err(Error::parse(line_no, "blank line in vector body"));
        }
        if words.len() == header.vocab_size {
            return Err(Error::parse(
                line_no,
                format!("more rows than the declared vocabulary size {}", header.vocab_size),
            ));
        }
        let mut fields = line.split_whitespace();
        let word = fields.next().expect("non-blank line has a first field");
        let mut count = 0;
        for field in fields {
            let value: f64 = field
                .parse()
                .map_err(|_| Error::parse(line_no, format!("non-numeric value {field:?}")))?;
            if !value.is_finite() {
                return Err(Error::parse(line_no, format!("non-finite value {field:?}")));
            }
            data.push(value);
            count += 1;
        }
        if count != header.dimension {
            return Err(Error::parse(
                line_no,
                format!("row has {count} values, header declares {}", header.dimension),
            ));
        }
        words.push(word.to_owned());
    }
    if words.len() != header.vocab_size {
        return Err(Error::parse(
            0,
            format!(
                "body has {} rows, header declares {}",
                words.len(),
                header.vocab_size
            ),
        ));
    }
    WordVectors::new(words, data, header.dimension, header.dimension).map_err(|e| match e {
        Error::InvalidInput(msg) => Error::parse(0, msg),
        other => other,
    })
}

fn parse_header(line: String) -> Result<VectorFileHeader> {
    let mut fields = line.split_whitespace();
    let vocab_size = fields
        .next()
        .and_then(|f| f.parse().ok())
        .ok_or_else(|| Error::parse(1, "header must start with the vocabulary size"))?;
    let dimension = fields
        .next()
        .and_then(|f| f.parse().ok())
        .ok_or_else(|| Error::parse(1, "header must declare the dimension"))?;
    if fields.next().is_some() {
        return Err(Error::parse(1, "header has trailing fields"));
    }
    Ok(VectorFileHeader {
        vocab_size,
        dimension,
    })
}

/// Sidecar to a `.full` vector file: the training configuration, word
/// counts, and the output parameter table, which together with the input
/// vectors reconstruct the whole model.
pub fn save_checkpoint(
    model: &SplitEmbeddingModel,
    vocab: &Vocabulary,
    config: &TrainConfig,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::from(e).in_file(path))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>| -> Result<()> {
        writeln!(out, "{CHECKPOINT_MAGIC}")?;
        for (key, value) in config.kv_pairs() {
            writeln!(out, "{key}={value}")?;
        }
        writeln!(out, "vocab {}", vocab.len())?;
        for id in 0..vocab.len() as u32 {
            writeln!(out, "{} {}", vocab.word(id), vocab.count(id))?;
        }
        writeln!(out, "output {} {}", vocab.len(), model.dim())?;
        for id in 0..vocab.len() as u32 {
            let row = model.output_vector(id, PartSelector::Full);
            let mut first = true;
            for v in row {
                if first {
                    write!(out, "{v}")?;
                    first = false;
                } else {
                    write!(out, " {v}")?;
                }
            }
            writeln!(out)?;
        }
        Ok(())
    };
    write(&mut out).map_err(|e| e.in_file(path))
}

/// Reassemble a model from its `.full` vector file and checkpoint sidecar.
pub fn load_checkpoint(
    vectors_path: impl AsRef<Path>,
    checkpoint_path: impl AsRef<Path>,
) -> Result<(SplitEmbeddingModel, Vocabulary, TrainConfig)> {
    let vectors = load_vectors(vectors_path)?;
    let path = checkpoint_path.as_ref();
    let file = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
    load_checkpoint_reader(BufReader::new(file), &vectors).map_err(|e| e.in_file(path))
}

/// Parse a checkpoint against its already-loaded input vectors.
pub fn load_checkpoint_reader<R: BufRead>(
    reader: R,
    vectors: &WordVectors,
) -> Result<(SplitEmbeddingModel, Vocabulary, TrainConfig)> {
    let mut lines = reader.lines().enumerate();
    let mut next = || -> Result<(usize, String)> {
        match lines.next() {
            Some((i, line)) => Ok((i + 1, line?)),
            None => Err(Error::parse(0, "unexpected end of checkpoint")),
        }
    };

    let (_, magic) = next()?;
    if magic.trim_end() != CHECKPOINT_MAGIC {
        return Err(Error::parse(1, "not a stylevec checkpoint"));
    }

    let mut config = TrainConfig::default();
    let vocab_len;
    loop {
        let (line_no, line) = next()?;
        let s = line.trim();
        if let Some(rest) = s.strip_prefix("vocab ") {
            vocab_len = rest
                .parse::<usize>()
                .map_err(|_| Error::parse(line_no, "bad vocab count"))?;
            break;
        }
        let (key, value) = s
            .split_once('=')
            .ok_or_else(|| Error::parse(line_no, "expected key=value"))?;
        config
            .apply_kv(key.trim(), value.trim())
            .map_err(|e| Error::parse(line_no, e.to_string()))?;
    }
    config
        .validate()
        .map_err(|e| Error::parse(0, e.to_string()))?;

    if vocab_len != vectors.len() {
        return Err(Error::parse(
            0,
            format!(
                "checkpoint vocabulary has {vocab_len} words, vector file has {}",
                vectors.len()
            ),
        ));
    }
    let mut counts = Vec::with_capacity(vocab_len);
    for i in 0..vocab_len {
        let (line_no, line) = next()?;
        let (word, count) = line
            .trim_end()
            .rsplit_once(' ')
            .ok_or_else(|| Error::parse(line_no, "expected word count"))?;
        let count: u64 = count
            .parse()
            .map_err(|_| Error::parse(line_no, "bad count"))?;
        if word != vectors.word(i as u32) {
            return Err(Error::parse(
                line_no,
                format!(
                    "checkpoint word {word:?} does not match vector file word {:?}",
                    vectors.word(i as u32)
                ),
            ));
        }
        counts.push((word.to_owned(), count));
    }

    let (line_no, line) = next()?;
    let dims: Vec<&str> = line.trim().split(' ').collect();
    let dim = match dims.as_slice() {
        ["output", rows, cols] if rows.parse() == Ok(vocab_len) => cols
            .parse::<usize>()
            .map_err(|_| Error::parse(line_no, "bad output dimension"))?,
        _ => return Err(Error::parse(line_no, "expected output table header")),
    };
    if dim != config.d_style + config.d_synsem {
        return Err(Error::parse(
            line_no,
            "output dimension does not match the configured split",
        ));
    }
    if dim != vectors.dim() {
        return Err(Error::parse(
            line_no,
            "output dimension does not match the vector file",
        ));
    }

    let mut output = Vec::with_capacity(vocab_len * dim);
    for _ in 0..vocab_len {
        let (line_no, line) = next()?;
        let mut n = 0;
        for field in line.split_whitespace() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::parse(line_no, format!("non-numeric value {field:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(line_no, "non-finite value"));
            }
            output.push(v);
            n += 1;
        }
        if n != dim {
            return Err(Error::parse(line_no, format!("row has {n} values, want {dim}")));
        }
    }

    let input: Vec<f64> = (0..vocab_len as u32)
        .flat_map(|w| vectors.vector(w).to_vec())
        .collect();
    let model = SplitEmbeddingModel::from_parts(
        input,
        output,
        vocab_len,
        config.d_style,
        config.d_synsem,
    )
    .map_err(|e| Error::parse(0, e.to_string()))?
    .with_variant(config.variant);
    let vocab = Vocabulary::from_counts(counts).map_err(|e| Error::parse(0, e.to_string()))?;
    if vocab.words() != vectors.words() {
        // from_counts re-sorts; a checkpoint written by this crate is
        // already in id order, anything else is corrupt
        return Err(Error::parse(0, "checkpoint word order is not descending-count order"));
    }
    Ok((model, vocab, config))
}
