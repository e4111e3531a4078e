//! Training orchestration: epochs over the subsampled corpus, per-variant
//! context selection, alternating near/distant objectives for the split
//! model, and the per-part learning-rate balancing rule.
//!
//! With `workers = 1` a run is a deterministic, bit-reproducible function
//! of the seed. With more workers, corpus shards are trained concurrently
//! against the shared parameter tables without locks; lost updates are
//! tolerated.

use std::io::BufRead;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::context;
use crate::corpus::{self, UtteranceCorpus, Vocabulary};
use crate::model::{PartSelector, SplitEmbeddingModel, Table, Variant, WordId};
use crate::{Error, Result};

/// Learning rate never decays below this fraction of its initial value.
const LR_FLOOR: f64 = 1e-4;
/// Weight of the newest sample in the running-loss average.
const LOSS_EMA_WEIGHT: f64 = 1e-3;
/// A noise draw colliding with the target is retried this many times, then
/// the slot is dropped.
const MAX_COLLISION_RETRIES: usize = 100;
/// Progress callback cadence, in target tokens.
const PROGRESS_INTERVAL: u64 = 4096;

const DOMAIN_SUBSAMPLE: u64 = 1;
const DOMAIN_NEGATIVES: u64 = 2;

/// Everything a training run needs to know.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub variant: Variant,
    /// Near-window half-width δ.
    pub delta: usize,
    pub epochs: usize,
    /// Negative samples per update.
    pub negatives: usize,
    /// Base learning rate α.
    pub base_lr: f64,
    /// Subsampling threshold t; 0 disables subsampling.
    pub subsample: f64,
    /// Minimum word count for vocabulary membership (used at ingestion).
    pub min_count: u64,
    pub d_style: usize,
    pub d_synsem: usize,
    pub seed: u64,
    pub workers: usize,
    /// Diagnostic ablation: skip the distant-context pass of the split
    /// model entirely.
    pub disable_p2: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variant: Variant::SepCtx,
            delta: 5,
            epochs: 10,
            negatives: 5,
            base_lr: 0.05,
            subsample: corpus::DEFAULT_SUBSAMPLE,
            min_count: 5,
            d_style: 300,
            d_synsem: 300,
            seed: 1,
            workers: 1,
            disable_p2: false,
        }
    }
}

impl TrainConfig {
    /// Default configuration for a variant: 300+300 dimensions for the
    /// split model, an undivided 300 otherwise.
    pub fn for_variant(variant: Variant) -> Self {
        let mut config = TrainConfig {
            variant,
            ..TrainConfig::default()
        };
        if !variant.is_sep() {
            config.d_style = 300;
            config.d_synsem = 0;
        }
        config
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta < 1 {
            return Err(Error::InvalidConfig("delta must be at least 1".into()));
        }
        if self.negatives < 1 {
            return Err(Error::InvalidConfig("negatives must be at least 1".into()));
        }
        if !(self.base_lr > 0.0) || !self.base_lr.is_finite() {
            return Err(Error::InvalidConfig("base_lr must be positive".into()));
        }
        if !(self.subsample >= 0.0) || !self.subsample.is_finite() {
            return Err(Error::InvalidConfig("subsample must be non-negative".into()));
        }
        if self.workers < 1 {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        if self.min_count < 1 {
            return Err(Error::InvalidConfig("min_count must be at least 1".into()));
        }
        if self.variant.is_sep() {
            if self.d_style < 1 || self.d_synsem < 1 {
                return Err(Error::InvalidConfig(
                    "the sep variant needs d_style >= 1 and d_synsem >= 1".into(),
                ));
            }
        } else {
            if self.d_style < 1 {
                return Err(Error::InvalidConfig("d_style must be at least 1".into()));
            }
            if self.d_synsem != 0 {
                return Err(Error::InvalidConfig(format!(
                    "d_synsem is only meaningful for the sep variant (variant is {})",
                    self.variant
                )));
            }
        }
        Ok(())
    }

    /// Apply one `key=value` setting.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value.parse().map_err(|_| {
                Error::InvalidConfig(format!("cannot parse {value:?} for key {key:?}"))
            })
        }
        match key {
            "variant" => self.variant = value.parse()?,
            "delta" => self.delta = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "negatives" => self.negatives = num(key, value)?,
            "base_lr" | "lr" => self.base_lr = num(key, value)?,
            "subsample" => self.subsample = num(key, value)?,
            "min_count" => self.min_count = num(key, value)?,
            "d_style" => self.d_style = num(key, value)?,
            "d_synsem" => self.d_synsem = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "workers" => self.workers = num(key, value)?,
            "disable_p2" => self.disable_p2 = num(key, value)?,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown configuration key {other:?}"
                )))
            }
        }
        Ok(())
    }

    /// Read `key=value` lines ('#' comments and blank lines allowed).
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
        let file = std::fs::File::open(path).map_err(|e| Error::from(e).in_file(path))?;
        self.update_from_reader(std::io::BufReader::new(file))
            .map_err(|e| e.in_file(path))
    }

    /// All fields as `key=value` pairs, in a fixed order.
    pub fn kv_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("variant", self.variant.to_string()),
            ("delta", self.delta.to_string()),
            ("epochs", self.epochs.to_string()),
            ("negatives", self.negatives.to_string()),
            ("base_lr", self.base_lr.to_string()),
            ("subsample", self.subsample.to_string()),
            ("min_count", self.min_count.to_string()),
            ("d_style", self.d_style.to_string()),
            ("d_synsem", self.d_synsem.to_string()),
            ("seed", self.seed.to_string()),
            ("workers", self.workers.to_string()),
            ("disable_p2", self.disable_p2.to_string()),
        ]
    }
}

/// Average context-set sizes over all target positions of the corpus,
/// measured without subsampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateExpectations {
    /// Mean |C_near| per target.
    pub e_near: f64,
    /// Mean |C_dist| per target.
    pub e_dist: f64,
}

/// One exact pass over the corpus: for every target position, count near
/// and distant context words under window width `delta`.
pub fn estimate_update_expectations(
    corpus: &UtteranceCorpus,
    delta: usize,
) -> Result<UpdateExpectations> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut near_total = 0u64;
    let mut dist_total = 0u64;
    let mut positions = 0u64;
    for utterance in corpus.iter() {
        let len = utterance.len();
        for t in 0..len {
            let near = t.min(delta) + (len - 1 - t).min(delta);
            near_total += near as u64;
            dist_total += (len - 1 - near) as u64;
            positions += 1;
        }
    }
    if near_total == 0 {
        // Only single-token utterances: no token ever has a context word.
        return Err(Error::NoContext);
    }
    Ok(UpdateExpectations {
        e_near: near_total as f64 / positions as f64,
        e_dist: dist_total as f64 / positions as f64,
    })
}

/// Initial learning rate for each parameter part of the split model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartLearningRates {
    /// Input style halves (x).
    pub x: f64,
    /// Input synsem halves (y).
    pub y: f64,
    /// Output style halves (x̃).
    pub x_out: f64,
    /// Output synsem halves (ỹ).
    pub y_out: f64,
}

/// Balance rates so `rate · expected updates` is the same constant for
/// every part, anchored at `lr_y = base_lr`. Synsem halves are updated
/// only by near passes (e_near events per target); style halves by both
/// passes (e_near + e_dist). Non-split variants use `base_lr` throughout.
pub fn part_learning_rates(
    base_lr: f64,
    ex: &UpdateExpectations,
    variant: Variant,
) -> Result<PartLearningRates> {
    if !(ex.e_near > 0.0) {
        return Err(Error::NoContext);
    }
    let x = if variant.is_sep() && ex.e_dist > 0.0 {
        base_lr * ex.e_near / (ex.e_near + ex.e_dist)
    } else {
        base_lr
    };
    let y = base_lr;
    Ok(PartLearningRates {
        x,
        y,
        x_out: x,
        y_out: y,
    })
}

/// Side-effect-free snapshot of a running (or finished) trainer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Progress {
    /// Target tokens processed so far (post-subsampling).
    pub tokens_done: u64,
    /// Current near-context learning rate (per-part rates scale with it).
    pub current_lr: f64,
    /// Exponential moving average of the per-update loss; informational.
    pub running_loss: f64,
}

/// A configured training run over one corpus.
pub struct Trainer<'a> {
    config: TrainConfig,
    corpus: &'a UtteranceCorpus,
    vocab: &'a Vocabulary,
    expectations: UpdateExpectations,
    rates: PartLearningRates,
    total_scheduled: u64,
    tokens_done: AtomicU64,
    loss_ema: AtomicU64,
}

impl<'a> Trainer<'a> {
    pub fn new(
        config: &TrainConfig,
        corpus: &'a UtteranceCorpus,
        vocab: &'a Vocabulary,
    ) -> Result<Self> {
        config.validate()?;
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if vocab.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let expectations = estimate_update_expectations(corpus, config.delta)?;
        let rates = part_learning_rates(config.base_lr, &expectations, config.variant)?;
        let total_scheduled = ((config.epochs as f64
            * vocab.expected_stream_tokens(config.subsample))
        .round() as u64)
            .max(1);
        Ok(Trainer {
            config: config.clone(),
            corpus,
            vocab,
            expectations,
            rates,
            total_scheduled,
            tokens_done: AtomicU64::new(0),
            loss_ema: AtomicU64::new(f64::NAN.to_bits()),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn expectations(&self) -> UpdateExpectations {
        self.expectations
    }

    pub fn rates(&self) -> PartLearningRates {
        self.rates
    }

    /// Total tokens the linear decay schedule is stretched over.
    pub fn total_scheduled(&self) -> u64 {
        self.total_scheduled
    }

    pub fn progress(&self) -> Progress {
        let done = self.tokens_done.load(Ordering::Relaxed);
        let ema = f64::from_bits(self.loss_ema.load(Ordering::Relaxed));
        Progress {
            tokens_done: done,
            current_lr: self.config.base_lr * decay_factor(done, self.total_scheduled),
            running_loss: if ema.is_nan() { 0.0 } else { ema },
        }
    }

    pub fn run(&mut self) -> Result<SplitEmbeddingModel> {
        self.run_with(|_| {})
    }

    /// Train; `progress` is invoked from worker 0 every few thousand
    /// tokens. A trainer drives one run: retraining needs a new `Trainer`.
    pub fn run_with<F>(&mut self, mut progress: F) -> Result<SplitEmbeddingModel>
    where
        F: FnMut(Progress) + Send,
    {
        assert_eq!(
            self.tokens_done.load(Ordering::Relaxed),
            0,
            "Trainer::run may only be called once"
        );
        let model = SplitEmbeddingModel::init(
            self.vocab.len(),
            self.config.d_style,
            self.config.d_synsem,
            self.config.seed,
        )
        .with_variant(self.config.variant);

        for epoch in 0..self.config.epochs {
            if self.config.workers <= 1 {
                self.worker_pass(&model, epoch, 0, 0..self.corpus.len(), Some(&mut progress))?;
            } else {
                let ranges = shard_ranges(self.corpus.len(), self.config.workers);
                let model_ref = &model;
                let this = &*self;
                std::thread::scope(|scope| -> Result<()> {
                    let handles: Vec<_> = ranges
                        .iter()
                        .enumerate()
                        .skip(1)
                        .map(|(w, range)| {
                            let range = range.clone();
                            scope.spawn(move || {
                                this.worker_pass::<F>(model_ref, epoch, w, range, None)
                            })
                        })
                        .collect();
                    let mut result =
                        this.worker_pass(model_ref, epoch, 0, ranges[0].clone(), Some(&mut progress));
                    for handle in handles {
                        let joined = handle.join().expect("training worker panicked");
                        if result.is_ok() {
                            result = joined;
                        }
                    }
                    result
                })?;
            }
        }

        if !model.is_finite() {
            return Err(Error::NumericOverflow);
        }
        progress(self.progress());
        Ok(model)
    }

    fn worker_pass<F>(
        &self,
        model: &SplitEmbeddingModel,
        epoch: usize,
        worker: usize,
        range: Range<usize>,
        mut progress: Option<&mut F>,
    ) -> Result<()>
    where
        F: FnMut(Progress) + Send,
    {
        let cfg = &self.config;
        let mut neg_rng = ChaCha8Rng::seed_from_u64(derive_seed(
            cfg.seed,
            DOMAIN_NEGATIVES,
            epoch as u64,
            worker as u64,
        ));
        let stream = corpus::stream_utterance_range(
            self.corpus,
            self.vocab,
            cfg.subsample,
            derive_seed(cfg.seed, DOMAIN_SUBSAMPLE, epoch as u64, worker as u64),
            range,
        );
        // Ablating the distant pass removes its updates, so the balancing
        // rule degenerates to the uniform rate.
        let (lr_x, lr_y) = if cfg.disable_p2 {
            (cfg.base_lr, cfg.base_lr)
        } else {
            (self.rates.x, self.rates.y)
        };

        let mut ids = Vec::new();
        let mut since_report = 0u64;
        for utterance in stream {
            for pos in 0..utterance.len() {
                let target = utterance[pos];
                let done = self.tokens_done.fetch_add(1, Ordering::Relaxed);
                let decay = decay_factor(done, self.total_scheduled);
                let ctx = context::extract(utterance.len(), pos, cfg.delta)
                    .expect("stream utterances are non-empty and positions in range");
                match cfg.variant {
                    Variant::NearCtx => {
                        gather(&mut ids, &utterance, &ctx.near);
                        self.pass(model, target, &ids, PartSelector::Full, lr_x * decay, lr_y * decay, &mut neg_rng)?;
                    }
                    Variant::AllCtx => {
                        gather(&mut ids, &utterance, &ctx.all_positions());
                        self.pass(model, target, &ids, PartSelector::Full, lr_x * decay, lr_y * decay, &mut neg_rng)?;
                    }
                    Variant::DistCtx => {
                        gather(&mut ids, &utterance, &ctx.dist);
                        self.pass(model, target, &ids, PartSelector::Full, lr_x * decay, lr_y * decay, &mut neg_rng)?;
                    }
                    Variant::SepCtx => {
                        gather(&mut ids, &utterance, &ctx.near);
                        self.pass(model, target, &ids, PartSelector::Full, lr_x * decay, lr_y * decay, &mut neg_rng)?;
                        if !cfg.disable_p2 {
                            gather(&mut ids, &utterance, &ctx.dist);
                            self.pass(model, target, &ids, PartSelector::StyleHalf, lr_x * decay, lr_x * decay, &mut neg_rng)?;
                        }
                    }
                }

                if let Some(report) = progress.as_deref_mut() {
                    since_report += 1;
                    if since_report >= PROGRESS_INTERVAL {
                        since_report = 0;
                        report(self.progress());
                    }
                }
            }
        }
        Ok(())
    }

    /// One prediction/update round: context mean, negative-sampling
    /// gradients, output rows first, then the shared context-word update.
    /// An empty context skips the round without consuming randomness.
    fn pass(
        &self,
        model: &SplitEmbeddingModel,
        target: WordId,
        context_ids: &[WordId],
        part: PartSelector,
        lr_style: f64,
        lr_synsem: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<()> {
        if context_ids.is_empty() {
            return Ok(());
        }
        let h = model.context_mean(context_ids, part)?;
        let negatives = draw_negatives(self.vocab, target, self.config.negatives, rng);
        let (loss, grad_h, grad_outputs) =
            model.ns_loss_and_grads(target, &h, &negatives, part)?;

        // Checked builds verify that a style-half pass cannot reach synsem
        // coordinates of the rows it touches.
        #[cfg(debug_assertions)]
        let synsem_guard = (part == PartSelector::StyleHalf && model.d_synsem() > 0).then(|| {
            (
                model.output_vector(target, PartSelector::Full)[model.d_style()..].to_vec(),
                model.input_vector(context_ids[0], PartSelector::Full)[model.d_style()..].to_vec(),
            )
        });

        let split = part == PartSelector::Full && model.d_synsem() > 0 && lr_style != lr_synsem;
        if split {
            for (w, grad) in &grad_outputs {
                model.apply_update_split(Table::Output, &[*w], grad, lr_style, lr_synsem);
            }
            model.apply_update_split(Table::Input, context_ids, &grad_h, lr_style, lr_synsem);
        } else {
            for (w, grad) in &grad_outputs {
                model.apply_update(Table::Output, &[*w], grad, lr_style, part);
            }
            model.apply_update(Table::Input, context_ids, &grad_h, lr_style, part);
        }

        #[cfg(debug_assertions)]
        if let Some((out_before, in_before)) = synsem_guard {
            debug_assert_eq!(
                out_before,
                model.output_vector(target, PartSelector::Full)[model.d_style()..].to_vec(),
                "distant-context pass modified a synsem output coordinate"
            );
            debug_assert_eq!(
                in_before,
                model.input_vector(context_ids[0], PartSelector::Full)[model.d_style()..].to_vec(),
                "distant-context pass modified a synsem input coordinate"
            );
        }

        self.record_loss(loss);
        Ok(())
    }

    fn record_loss(&self, loss: f64) {
        let old = f64::from_bits(self.loss_ema.load(Ordering::Relaxed));
        let new = if old.is_nan() {
            loss
        } else {
            old + LOSS_EMA_WEIGHT * (loss - old)
        };
        self.loss_ema.store(new.to_bits(), Ordering::Relaxed);
    }
}

/// Train a model; see [`Trainer`] for progress reporting.
pub fn train(
    config: &TrainConfig,
    corpus: &UtteranceCorpus,
    vocab: &Vocabulary,
) -> Result<SplitEmbeddingModel> {
    Trainer::new(config, corpus, vocab)?.run()
}

fn decay_factor(done: u64, total: u64) -> f64 {
    (1.0 - done as f64 / total as f64).max(LR_FLOOR)
}

fn gather(ids: &mut Vec<WordId>, utterance: &[WordId], positions: &[usize]) {
    ids.clear();
    ids.extend(positions.iter().map(|&p| utterance[p]));
}

/// Up to `k` noise words, never equal to the target; a colliding slot is
/// retried a bounded number of times and then dropped.
fn draw_negatives(
    vocab: &Vocabulary,
    target: WordId,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<WordId> {
    let mut negatives = Vec::with_capacity(k);
    for _ in 0..k {
        for _ in 0..MAX_COLLISION_RETRIES {
            let w = vocab.sample_noise(rng);
            if w != target {
                negatives.push(w);
                break;
            }
        }
    }
    negatives
}

fn shard_ranges(n: usize, workers: usize) -> Vec<Range<usize>> {
    (0..workers)
        .map(|w| (n * w / workers)..(n * (w + 1) / workers))
        .collect()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn derive_seed(base: u64, domain: u64, epoch: u64, worker: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base ^ (domain << 56)) ^ epoch) ^ worker)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Table;

    fn lines(texts: &[&str]) -> Vec<Vec<String>> {
        texts
            .iter()
            .map(|t| t.split(' ').map(str::to_owned).collect())
            .collect()
    }

    fn tiny_world(texts: &[&str]) -> (Vocabulary, UtteranceCorpus) {
        let lines = lines(texts);
        let vocab = Vocabulary::build(lines.clone(), 1).unwrap();
        let corpus = UtteranceCorpus::build(lines, &vocab);
        (vocab, corpus)
    }

    /// Cyclic synthetic utterances, deterministic, multi-word.
    fn cyclic_world(n_utterances: usize, len: usize, vocab_size: usize) -> (Vocabulary, UtteranceCorpus) {
        let texts: Vec<Vec<String>> = (0..n_utterances)
            .map(|i| (0..len).map(|j| format!("w{:02}", (i * 3 + j * 7) % vocab_size)).collect())
            .collect();
        let vocab = Vocabulary::build(texts.clone(), 1).unwrap();
        let corpus = UtteranceCorpus::build(texts, &vocab);
        (vocab, corpus)
    }

    fn model_bits(m: &SplitEmbeddingModel) -> (Vec<u64>, Vec<u64>) {
        (
            m.input_matrix().iter().map(|v| v.to_bits()).collect(),
            m.output_matrix().iter().map(|v| v.to_bits()).collect(),
        )
    }

    #[test]
    fn expectations_on_pairs() {
        let (_, corpus) = tiny_world(&["a b", "c d", "a d"]);
        let ex = estimate_update_expectations(&corpus, 5).unwrap();
        assert_eq!(ex.e_near, 1.0);
        assert_eq!(ex.e_dist, 0.0);
    }

    #[test]
    fn expectations_match_position_enumeration() {
        let texts: Vec<&str> = vec!["a b c d e f g h i j k l"; 4];
        let (_, corpus) = tiny_world(&texts);
        let delta = 5;
        let ex = estimate_update_expectations(&corpus, delta).unwrap();
        // enumerate all 12 target positions with the context oracle
        let mut near_sum = 0.0;
        for t in 0..12 {
            let ctx = context::extract(12, t, delta).unwrap();
            near_sum += ctx.near.len() as f64;
        }
        assert_eq!(ex.e_near, near_sum / 12.0);
        assert_eq!(ex.e_dist, 11.0 - near_sum / 12.0);
    }

    #[test]
    fn wide_window_has_no_distant_words() {
        let (_, corpus) = tiny_world(&["a b c d", "b c d a"]);
        let ex = estimate_update_expectations(&corpus, 3).unwrap();
        assert_eq!(ex.e_dist, 0.0);
    }

    #[test]
    fn single_token_corpus_has_no_context() {
        let (_, corpus) = tiny_world(&["a", "b", "a"]);
        assert!(matches!(
            estimate_update_expectations(&corpus, 5),
            Err(Error::NoContext)
        ));
    }

    #[test]
    fn rates_without_distant_updates_are_uniform() {
        let ex = UpdateExpectations { e_near: 4.0, e_dist: 0.0 };
        let rates = part_learning_rates(0.05, &ex, Variant::SepCtx).unwrap();
        assert_eq!(rates.x, 0.05);
        assert_eq!(rates.y, 0.05);
    }

    #[test]
    fn rates_halve_when_distant_matches_near() {
        let ex = UpdateExpectations { e_near: 8.0, e_dist: 8.0 };
        let rates = part_learning_rates(0.05, &ex, Variant::SepCtx).unwrap();
        assert!((rates.x - 0.025).abs() < 1e-15);
        assert_eq!(rates.y, 0.05);
        assert_eq!(rates.x, rates.x_out);
        assert_eq!(rates.y, rates.y_out);
    }

    #[test]
    fn rate_identity_holds() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let ex = UpdateExpectations {
                e_near: rng.gen::<f64>() * 20.0 + 0.01,
                e_dist: rng.gen::<f64>() * 20.0,
            };
            let alpha = rng.gen::<f64>() + 0.001;
            let rates = part_learning_rates(alpha, &ex, Variant::SepCtx).unwrap();
            let lhs = rates.x * (ex.e_near + ex.e_dist);
            let rhs = rates.y * ex.e_near;
            assert!((lhs - rhs).abs() <= 4.0 * f64::EPSILON * rhs.abs());
        }
        assert!(part_learning_rates(0.05, &UpdateExpectations { e_near: 0.0, e_dist: 1.0 }, Variant::SepCtx).is_err());
    }

    #[test]
    fn non_sep_rates_are_flat() {
        let ex = UpdateExpectations { e_near: 3.0, e_dist: 9.0 };
        for v in [Variant::NearCtx, Variant::AllCtx, Variant::DistCtx] {
            let rates = part_learning_rates(0.05, &ex, v).unwrap();
            assert_eq!(rates.x, 0.05);
            assert_eq!(rates.y, 0.05);
        }
    }

    #[test]
    fn zero_epochs_returns_the_initial_model() {
        let (vocab, corpus) = cyclic_world(20, 6, 10);
        let config = TrainConfig {
            variant: Variant::NearCtx,
            epochs: 0,
            d_style: 8,
            d_synsem: 0,
            seed: 33,
            ..TrainConfig::default()
        };
        let trained = train(&config, &corpus, &vocab).unwrap();
        let init = SplitEmbeddingModel::init(vocab.len(), 8, 0, 33);
        assert_eq!(model_bits(&trained), model_bits(&init));
    }

    #[test]
    fn fixed_seed_is_bit_reproducible() {
        let (vocab, corpus) = cyclic_world(40, 9, 12);
        let config = TrainConfig {
            variant: Variant::SepCtx,
            delta: 2,
            epochs: 2,
            d_style: 6,
            d_synsem: 6,
            subsample: 1e-2,
            seed: 5,
            ..TrainConfig::default()
        };
        let a = train(&config, &corpus, &vocab).unwrap();
        let b = train(&config, &corpus, &vocab).unwrap();
        assert_eq!(model_bits(&a), model_bits(&b));
    }

    #[test]
    fn sep_on_short_utterances_equals_all_ctx() {
        // utterances never exceed delta+1 tokens, so the distant pass
        // never fires and both runs see identical update events
        let (vocab, corpus) = cyclic_world(60, 4, 9);
        let base = TrainConfig {
            delta: 5,
            epochs: 2,
            subsample: 0.0,
            seed: 11,
            ..TrainConfig::default()
        };
        let sep = TrainConfig {
            variant: Variant::SepCtx,
            d_style: 5,
            d_synsem: 3,
            ..base.clone()
        };
        let all = TrainConfig {
            variant: Variant::AllCtx,
            d_style: 8,
            d_synsem: 0,
            ..base
        };
        let m_sep = train(&sep, &corpus, &vocab).unwrap();
        let m_all = train(&all, &corpus, &vocab).unwrap();
        assert_eq!(model_bits(&m_sep), model_bits(&m_all));
    }

    #[test]
    fn single_step_matches_hand_trace() {
        let (vocab, corpus) = tiny_world(&["a b"]);
        let config = TrainConfig {
            variant: Variant::NearCtx,
            delta: 5,
            epochs: 1,
            negatives: 1,
            base_lr: 0.05,
            subsample: 0.0,
            d_style: 4,
            d_synsem: 0,
            seed: 21,
            ..TrainConfig::default()
        };
        let trained = train(&config, &corpus, &vocab).unwrap();

        // replay with the public model operations
        let oracle = SplitEmbeddingModel::init(vocab.len(), 4, 0, 21);
        let mut neg_rng =
            ChaCha8Rng::seed_from_u64(derive_seed(config.seed, DOMAIN_NEGATIVES, 0, 0));
        let total = 2.0; // 1 epoch x 2 tokens
        for (step, (target, ctx)) in [(0u32, 1u32), (1, 0)].iter().enumerate() {
            let lr = 0.05 * (1.0 - step as f64 / total).max(LR_FLOOR);
            let h = oracle.context_mean(&[*ctx], PartSelector::Full).unwrap();
            let negatives = draw_negatives(&vocab, *target, 1, &mut neg_rng);
            let (_, grad_h, grad_outputs) = oracle
                .ns_loss_and_grads(*target, &h, &negatives, PartSelector::Full)
                .unwrap();
            for (w, grad) in &grad_outputs {
                oracle.apply_update(Table::Output, &[*w], grad, lr, PartSelector::Full);
            }
            oracle.apply_update(Table::Input, &[*ctx], &grad_h, lr, PartSelector::Full);
        }
        assert_eq!(model_bits(&trained), model_bits(&oracle));
    }

    #[test]
    fn progress_counts_the_full_schedule() {
        let (vocab, corpus) = cyclic_world(32, 8, 10); // 256 tokens
        let config = TrainConfig {
            variant: Variant::NearCtx,
            delta: 2,
            epochs: 3,
            subsample: 0.0,
            d_style: 4,
            d_synsem: 0,
            seed: 2,
            ..TrainConfig::default()
        };
        let mut trainer = Trainer::new(&config, &corpus, &vocab).unwrap();
        assert_eq!(trainer.progress().tokens_done, 0);
        assert_eq!(trainer.total_scheduled(), 3 * 256);
        trainer.run().unwrap();
        assert_eq!(trainer.progress().tokens_done, 3 * 256);
        assert_eq!(trainer.progress().current_lr, 0.05 * LR_FLOOR);
    }

    #[test]
    fn learning_rate_halves_at_the_midpoint() {
        let (vocab, corpus) = cyclic_world(1024, 8, 11); // 8192 tokens
        let config = TrainConfig {
            variant: Variant::NearCtx,
            delta: 2,
            epochs: 1,
            subsample: 0.0,
            d_style: 4,
            d_synsem: 0,
            seed: 3,
            ..TrainConfig::default()
        };
        let mut seen = Vec::new();
        Trainer::new(&config, &corpus, &vocab)
            .unwrap()
            .run_with(|p| seen.push(p))
            .unwrap();
        let half = seen.iter().find(|p| p.tokens_done == 4096).unwrap();
        assert_eq!(half.current_lr, 0.05 * 0.5);
    }

    #[test]
    fn two_workers_train_to_a_finite_model() {
        let (vocab, corpus) = cyclic_world(100, 8, 12);
        let config = TrainConfig {
            variant: Variant::SepCtx,
            delta: 2,
            epochs: 2,
            d_style: 4,
            d_synsem: 4,
            subsample: 0.0,
            workers: 2,
            seed: 8,
            ..TrainConfig::default()
        };
        let mut trainer = Trainer::new(&config, &corpus, &vocab).unwrap();
        let model = trainer.run().unwrap();
        assert!(model.is_finite());
        assert_eq!(trainer.progress().tokens_done, 2 * 800);
    }

    #[test]
    fn config_validation_rejects_bad_combinations() {
        let mut config = TrainConfig::for_variant(Variant::NearCtx);
        config.d_synsem = 10;
        assert!(config.validate().is_err());

        let config = TrainConfig { delta: 0, ..TrainConfig::default() };
        assert!(config.validate().is_err());

        let config = TrainConfig { base_lr: 0.0, ..TrainConfig::default() };
        assert!(config.validate().is_err());

        assert!(TrainConfig::for_variant(Variant::SepCtx).validate().is_ok());
        assert!(TrainConfig::for_variant(Variant::AllCtx).validate().is_ok());
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let (vocab, _) = tiny_world(&["a b"]);
        let empty = UtteranceCorpus::build(Vec::<Vec<String>>::new(), &vocab);
        let config = TrainConfig::for_variant(Variant::NearCtx);
        assert!(matches!(
            train(&config, &empty, &vocab),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn config_kv_round_trip() {
        let mut config = TrainConfig::default();
        config
            .update_from_reader(
                "# comment\nvariant=dist\ndelta=7\nlr=0.1\nworkers=3\ndisable_p2=true\n".as_bytes(),
            )
            .unwrap();
        assert_eq!(config.variant, Variant::DistCtx);
        assert_eq!(config.delta, 7);
        assert_eq!(config.base_lr, 0.1);
        assert_eq!(config.workers, 3);
        assert!(config.disable_p2);

        let mut copy = TrainConfig::default();
        for (k, v) in config.kv_pairs() {
            copy.apply_kv(k, &v).unwrap();
        }
        assert_eq!(copy, config);

        assert!(TrainConfig::default()
            .update_from_reader("no_such_key=1\n".as_bytes())
            .is_err());
        assert!(TrainConfig::default()
            .update_from_reader("epochs ten\n".as_bytes())
            .is_err());
    }

    #[test]
    fn negatives_never_collide_with_target() {
        let (vocab, _) = tiny_world(&["a a a b"]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for target in 0..vocab.len() as u32 {
            for _ in 0..200 {
                for n in draw_negatives(&vocab, target, 3, &mut rng) {
                    assert_ne!(n, target);
                }
            }
        }
    }
}
