//! Split embedding parameters and the negative-sampling objective.
//!
//! Every word has an input vector `v_w` and an output (prediction) vector,
//! each logically partitioned into a style half (the first `d_style`
//! coordinates) and a syntactic/semantic half (the remaining `d_synsem`).
//! Undivided models simply use `d_synsem = 0`.
//!
//! Parameter cells are relaxed atomics so that multiple workers may update
//! a shared model without locks (lost updates are tolerated, as in the
//! original asynchronous-SGD embedding trainers). With a single worker all
//! operations are sequential and bit-reproducible.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Word id into the vocabulary / parameter tables.
pub type WordId = u32;

/// f64 cell with relaxed atomic access.
struct AtomicF64(AtomicU64);

impl AtomicF64 {
    fn new(v: f64) -> Self {
        AtomicF64(AtomicU64::new(v.to_bits()))
    }

    fn get(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Relaxed))
    }

    fn set(&self, v: f64) {
        self.0.store(v.to_bits(), Ordering::Relaxed);
    }

    fn add(&self, d: f64) {
        self.set(self.get() + d);
    }
}

struct Matrix {
    cells: Vec<AtomicF64>,
    cols: usize,
}

impl Matrix {
    fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            cells: (0..rows * cols).map(|_| AtomicF64::new(0.0)).collect(),
            cols,
        }
    }

    fn row(&self, r: usize) -> &[AtomicF64] {
        &self.cells[r * self.cols..(r + 1) * self.cols]
    }

    fn to_vec(&self) -> Vec<f64> {
        self.cells.iter().map(AtomicF64::get).collect()
    }
}

/// Which coordinates of a vector an operation addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartSelector {
    /// The whole vector, `[0, D)`.
    Full,
    /// The style half only, `[0, d_style)`.
    StyleHalf,
}

/// Which parameter table an update addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table {
    Input,
    Output,
}

/// The four training strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Baseline CBOW over the near window.
    NearCtx,
    /// CBOW over the entire utterance.
    AllCtx,
    /// CBOW over distant context words only.
    DistCtx,
    /// Split-subspace model: near context trains the full vector,
    /// distant context trains only the style half.
    SepCtx,
}

impl Variant {
    pub fn is_sep(self) -> bool {
        self == Variant::SepCtx
    }

    pub const ALL: [Variant; 4] = [
        Variant::NearCtx,
        Variant::AllCtx,
        Variant::DistCtx,
        Variant::SepCtx,
    ];
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Variant::NearCtx => "near",
            Variant::AllCtx => "all",
            Variant::DistCtx => "dist",
            Variant::SepCtx => "sep",
        };
        f.write_str(s)
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "near" => Ok(Variant::NearCtx),
            "all" => Ok(Variant::AllCtx),
            "dist" => Ok(Variant::DistCtx),
            "sep" => Ok(Variant::SepCtx),
            other => Err(Error::InvalidConfig(format!(
                "unknown variant {other:?} (expected near|all|dist|sep)"
            ))),
        }
    }
}

/// Input and output embedding tables with a style/synsem split.
pub struct SplitEmbeddingModel {
    input: Matrix,
    output: Matrix,
    d_style: usize,
    d_synsem: usize,
    variant: Variant,
}

impl SplitEmbeddingModel {
    /// Fresh model: input vectors i.i.d. uniform in `[-0.5/D, 0.5/D]`,
    /// output vectors zero. Reproducible from the seed.
    pub fn init(vocab_size: usize, d_style: usize, d_synsem: usize, seed: u64) -> Self {
        let dim = d_style + d_synsem;
        assert!(dim >= 1, "embedding dimension must be at least 1");
        assert!(vocab_size >= 1, "model needs a non-empty vocabulary");
        let input = Matrix::zeros(vocab_size, dim);
        let output = Matrix::zeros(vocab_size, dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / dim as f64;
        for cell in &input.cells {
            cell.set((rng.gen::<f64>() - 0.5) * scale);
        }
        SplitEmbeddingModel {
            input,
            output,
            d_style,
            d_synsem,
            variant: if d_synsem > 0 { Variant::SepCtx } else { Variant::NearCtx },
        }
    }

    /// Rebuild a model from flat row-major tables (checkpoint loading).
    pub fn from_parts(
        input: Vec<f64>,
        output: Vec<f64>,
        vocab_size: usize,
        d_style: usize,
        d_synsem: usize,
    ) -> Result<Self> {
        let dim = d_style + d_synsem;
        if dim == 0 || vocab_size == 0 {
            return Err(Error::InvalidInput("empty model shape".into()));
        }
        if input.len() != vocab_size * dim || output.len() != vocab_size * dim {
            return Err(Error::InvalidInput(format!(
                "parameter table size mismatch: want {}x{}",
                vocab_size, dim
            )));
        }
        let make = |data: Vec<f64>| Matrix {
            cells: data.into_iter().map(AtomicF64::new).collect(),
            cols: dim,
        };
        Ok(SplitEmbeddingModel {
            input: make(input),
            output: make(output),
            d_style,
            d_synsem,
            variant: if d_synsem > 0 { Variant::SepCtx } else { Variant::NearCtx },
        })
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn vocab_size(&self) -> usize {
        self.input.cells.len() / self.input.cols
    }

    /// Full dimension `D = d_style + d_synsem`.
    pub fn dim(&self) -> usize {
        self.d_style + self.d_synsem
    }

    pub fn d_style(&self) -> usize {
        self.d_style
    }

    pub fn d_synsem(&self) -> usize {
        self.d_synsem
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Width of the selected part.
    pub fn part_dim(&self, part: PartSelector) -> usize {
        match part {
            PartSelector::Full => self.dim(),
            PartSelector::StyleHalf => self.d_style,
        }
    }

    /// Copy of the selected part of one input vector.
    pub fn input_vector(&self, w: WordId, part: PartSelector) -> Vec<f64> {
        self.input.row(w as usize)[..self.part_dim(part)]
            .iter()
            .map(AtomicF64::get)
            .collect()
    }

    /// Copy of the selected part of one output vector.
    pub fn output_vector(&self, w: WordId, part: PartSelector) -> Vec<f64> {
        self.output.row(w as usize)[..self.part_dim(part)]
            .iter()
            .map(AtomicF64::get)
            .collect()
    }

    /// Flat row-major copy of the input table.
    pub fn input_matrix(&self) -> Vec<f64> {
        self.input.to_vec()
    }

    /// Flat row-major copy of the output table.
    pub fn output_matrix(&self) -> Vec<f64> {
        self.output.to_vec()
    }

    pub fn set_input_vector(&self, w: WordId, values: &[f64]) {
        assert_eq!(values.len(), self.dim());
        for (cell, &v) in self.input.row(w as usize).iter().zip(values) {
            cell.set(v);
        }
    }

    pub fn set_output_vector(&self, w: WordId, values: &[f64]) {
        assert_eq!(values.len(), self.dim());
        for (cell, &v) in self.output.row(w as usize).iter().zip(values) {
            cell.set(v);
        }
    }

    /// Arithmetic mean of the selected part of the input vectors over
    /// `context`, with multiplicity.
    pub fn context_mean(&self, context: &[WordId], part: PartSelector) -> Result<Vec<f64>> {
        if context.is_empty() {
            return Err(Error::NoContext);
        }
        let d = self.part_dim(part);
        let mut mean = vec![0.0; d];
        for &w in context {
            let row = self.input.row(w as usize);
            for (m, cell) in mean.iter_mut().zip(&row[..d]) {
                *m += cell.get();
            }
        }
        let inv = 1.0 / context.len() as f64;
        for m in &mut mean {
            *m *= inv;
        }
        Ok(mean)
    }

    /// Negative-sampling loss and exact gradients.
    ///
    /// `loss = -log σ(u_t·h) - Σ_n log σ(-u_n·h)` over the part-selected
    /// output vectors. Returns `(loss, ∂loss/∂h, per-id ∂loss/∂u)` with the
    /// target's output gradient first, then one entry per negative in order
    /// (duplicate negatives produce separate entries).
    pub fn ns_loss_and_grads(
        &self,
        target: WordId,
        h: &[f64],
        negatives: &[WordId],
        part: PartSelector,
    ) -> Result<(f64, Vec<f64>, Vec<(WordId, Vec<f64>)>)> {
        let d = self.part_dim(part);
        if h.len() != d {
            return Err(Error::InvalidInput(format!(
                "context mean has dimension {}, part expects {}",
                h.len(),
                d
            )));
        }
        debug_assert!(
            !negatives.contains(&target),
            "negative samples must not contain the target"
        );

        let mut loss = 0.0;
        let mut grad_h = vec![0.0; d];
        let mut grad_outputs = Vec::with_capacity(1 + negatives.len());

        // positive term
        let score = self.part_dot(target, h, d);
        if !score.is_finite() {
            return Err(Error::NumericOverflow);
        }
        loss += softplus(-score);
        let coeff = sigmoid(score) - 1.0;
        self.accumulate_grads(target, coeff, h, &mut grad_h, &mut grad_outputs, d);

        for &n in negatives {
            let score = self.part_dot(n, h, d);
            if !score.is_finite() {
                return Err(Error::NumericOverflow);
            }
            loss += softplus(score);
            let coeff = sigmoid(score);
            self.accumulate_grads(n, coeff, h, &mut grad_h, &mut grad_outputs, d);
        }

        if !loss.is_finite() {
            return Err(Error::NumericOverflow);
        }
        Ok((loss, grad_h, grad_outputs))
    }

    fn part_dot(&self, w: WordId, h: &[f64], d: usize) -> f64 {
        self.output.row(w as usize)[..d]
            .iter()
            .zip(h)
            .map(|(cell, &x)| cell.get() * x)
            .sum()
    }

    fn accumulate_grads(
        &self,
        w: WordId,
        coeff: f64,
        h: &[f64],
        grad_h: &mut [f64],
        grad_outputs: &mut Vec<(WordId, Vec<f64>)>,
        d: usize,
    ) {
        let row = self.output.row(w as usize);
        for (g, cell) in grad_h.iter_mut().zip(&row[..d]) {
            *g += coeff * cell.get();
        }
        grad_outputs.push((w, h.iter().map(|&x| coeff * x).collect()));
    }

    /// SGD step: decrement the selected coordinates of each listed row by
    /// `lr · grad`. Unselected coordinates are untouched — a `StyleHalf`
    /// update cannot reach the synsem half.
    pub fn apply_update(
        &self,
        table: Table,
        ids: &[WordId],
        grad: &[f64],
        lr: f64,
        part: PartSelector,
    ) {
        let d = self.part_dim(part);
        debug_assert_eq!(grad.len(), d);
        let matrix = match table {
            Table::Input => &self.input,
            Table::Output => &self.output,
        };
        for &w in ids {
            let row = matrix.row(w as usize);
            for (cell, &g) in row[..d].iter().zip(grad) {
                cell.add(-lr * g);
            }
        }
    }

    /// Full-width update with distinct learning rates per half; used when
    /// the balancing rule assigns the style half a different rate.
    pub fn apply_update_split(
        &self,
        table: Table,
        ids: &[WordId],
        grad: &[f64],
        lr_style: f64,
        lr_synsem: f64,
    ) {
        let d = self.dim();
        debug_assert_eq!(grad.len(), d);
        let matrix = match table {
            Table::Input => &self.input,
            Table::Output => &self.output,
        };
        for &w in ids {
            let row = matrix.row(w as usize);
            for (j, (cell, &g)) in row.iter().zip(grad).enumerate() {
                let lr = if j < self.d_style { lr_style } else { lr_synsem };
                cell.add(-lr * g);
            }
        }
    }

    /// True when every parameter is finite.
    pub fn is_finite(&self) -> bool {
        self.input.cells.iter().all(|c| c.get().is_finite())
            && self.output.cells.iter().all(|c| c.get().is_finite())
    }
}

impl Clone for SplitEmbeddingModel {
    fn clone(&self) -> Self {
        SplitEmbeddingModel::from_parts(
            self.input_matrix(),
            self.output_matrix(),
            self.vocab_size(),
            self.d_style,
            self.d_synsem,
        )
        .expect("shape is valid by construction")
        .with_variant(self.variant)
    }
}

/// Numerically stable logistic function.
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow; `softplus(-x) = -ln σ(x)`.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_model(
        vocab: usize,
        d_style: usize,
        d_synsem: usize,
        seed: u64,
    ) -> SplitEmbeddingModel {
        let model = SplitEmbeddingModel::init(vocab, d_style, d_synsem, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xdead);
        for w in 0..vocab as u32 {
            let row: Vec<f64> = (0..model.dim()).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            model.set_input_vector(w, &row);
            let row: Vec<f64> = (0..model.dim()).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            model.set_output_vector(w, &row);
        }
        model
    }

    #[test]
    fn init_is_reproducible_and_bounded() {
        let a = SplitEmbeddingModel::init(20, 150, 150, 9);
        let b = SplitEmbeddingModel::init(20, 150, 150, 9);
        let bits = |m: &SplitEmbeddingModel| -> Vec<u64> {
            m.input_matrix().iter().map(|v| v.to_bits()).collect()
        };
        assert_eq!(bits(&a), bits(&b));
        let bound = 0.5 / 300.0;
        for v in a.input_matrix() {
            assert!(v.abs() <= bound);
        }
        assert!(a.output_matrix().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn init_coordinates_center_on_zero() {
        let model = SplitEmbeddingModel::init(1000, 50, 50, 3);
        let values = model.input_matrix();
        let n = values.len() as f64;
        let mean: f64 = values.iter().sum::<f64>() / n;
        // uniform on [-b, b] has sigma = b/sqrt(3)
        let sigma = (0.5 / 100.0) / 3f64.sqrt();
        assert!(mean.abs() < 3.0 * sigma / n.sqrt(), "mean {mean} too far from 0");
    }

    #[test]
    fn context_mean_of_one_is_the_row() {
        let model = random_model(5, 2, 2, 1);
        let mean = model.context_mean(&[3], PartSelector::Full).unwrap();
        assert_eq!(mean, model.input_vector(3, PartSelector::Full));
    }

    #[test]
    fn context_mean_with_multiplicity() {
        let model = random_model(5, 2, 2, 2);
        let one = model.context_mean(&[1], PartSelector::StyleHalf).unwrap();
        let two = model.context_mean(&[1, 1], PartSelector::StyleHalf).unwrap();
        assert_eq!(one, two);
    }

    #[test]
    fn context_mean_matches_elementwise_oracle() {
        let model = random_model(8, 3, 5, 3);
        let ids = [0u32, 2, 2, 5, 7];
        let mean = model.context_mean(&ids, PartSelector::Full).unwrap();
        for j in 0..model.dim() {
            let expected: f64 = ids
                .iter()
                .map(|&w| model.input_vector(w, PartSelector::Full)[j])
                .sum::<f64>()
                / ids.len() as f64;
            let rel = (mean[j] - expected).abs() / expected.abs().max(1e-300);
            assert!(rel < 1e-12);
        }
    }

    #[test]
    fn empty_context_is_an_error() {
        let model = random_model(3, 2, 0, 4);
        assert!(matches!(
            model.context_mean(&[], PartSelector::Full),
            Err(Error::NoContext)
        ));
    }

    #[test]
    fn zero_scores_give_log2_per_term() {
        let model = SplitEmbeddingModel::init(10, 4, 0, 5); // outputs all zero
        let h = vec![0.3, -0.2, 0.1, 0.9];
        let k = 5;
        let negatives: Vec<u32> = (1..=k as u32).collect();
        let (loss, grad_h, _) = model
            .ns_loss_and_grads(0, &h, &negatives, PartSelector::Full)
            .unwrap();
        let expected = (k + 1) as f64 * 2f64.ln();
        assert!((loss - expected).abs() < 1e-12);
        // zero output rows contribute nothing to the context gradient
        assert!(grad_h.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for case in 0..40 {
            let d_style = rng.gen_range(1..9usize);
            let d_synsem = rng.gen_range(0..8usize);
            let vocab = rng.gen_range(4..12usize);
            let model = random_model(vocab, d_style, d_synsem, 100 + case);
            let part = if case % 2 == 0 && d_synsem > 0 {
                PartSelector::StyleHalf
            } else {
                PartSelector::Full
            };
            let d = model.part_dim(part);
            let target = rng.gen_range(0..vocab as u32);
            let k = rng.gen_range(1..8usize);
            let negatives: Vec<u32> = (0..k)
                .map(|_| loop {
                    let n = rng.gen_range(0..vocab as u32);
                    if n != target {
                        break n;
                    }
                })
                .collect();
            let h: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();

            let (_, grad_h, grad_outputs) = model
                .ns_loss_and_grads(target, &h, &negatives, part)
                .unwrap();

            let eps = 1e-5;
            let loss_at = |h: &[f64]| {
                model
                    .ns_loss_and_grads(target, h, &negatives, part)
                    .unwrap()
                    .0
            };
            // dloss/dh via central differences
            let mut fd = vec![0.0; d];
            let mut hp = h.clone();
            for j in 0..d {
                hp[j] = h[j] + eps;
                let up = loss_at(&hp);
                hp[j] = h[j] - eps;
                let down = loss_at(&hp);
                hp[j] = h[j];
                fd[j] = (up - down) / (2.0 * eps);
            }
            assert_close(&grad_h, &fd, 1e-4);

            // dloss/du for target and negatives, aggregated per id
            let mut per_id: std::collections::HashMap<u32, Vec<f64>> = Default::default();
            for (w, g) in &grad_outputs {
                let entry = per_id.entry(*w).or_insert_with(|| vec![0.0; d]);
                for (e, &x) in entry.iter_mut().zip(g) {
                    *e += x;
                }
            }
            for (&w, analytic) in &per_id {
                let original = model.output_vector(w, PartSelector::Full);
                let mut fd = vec![0.0; d];
                for j in 0..d {
                    let mut bumped = original.clone();
                    bumped[j] += eps;
                    model.set_output_vector(w, &bumped);
                    let up = loss_at(&h);
                    bumped[j] = original[j] - eps;
                    model.set_output_vector(w, &bumped);
                    let down = loss_at(&h);
                    model.set_output_vector(w, &original);
                    fd[j] = (up - down) / (2.0 * eps);
                }
                assert_close(analytic, &fd, 1e-4);
            }
        }
    }

    fn assert_close(analytic: &[f64], fd: &[f64], tol: f64) {
        let diff: f64 = analytic
            .iter()
            .zip(fd)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = fd.iter().map(|b| b * b).sum::<f64>().sqrt();
        assert!(
            diff <= tol * norm.max(1e-12),
            "gradient mismatch: |a-fd| = {diff}, |fd| = {norm}"
        );
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let model = random_model(4, 2, 2, 6);
        let before = model.input_matrix();
        model.apply_update(Table::Input, &[1, 2], &[1.0, -2.0, 0.5, 3.0], 0.0, PartSelector::Full);
        assert_eq!(model.input_matrix(), before);
    }

    #[test]
    fn style_half_update_leaves_synsem_bits_untouched() {
        let model = random_model(4, 3, 3, 7);
        let before = model.input_matrix();
        model.apply_update(Table::Input, &[0, 2, 3], &[0.5, -1.0, 2.0], 0.1, PartSelector::StyleHalf);
        let after = model.input_matrix();
        for w in 0..4 {
            for j in 3..6 {
                let idx = w * 6 + j;
                assert_eq!(before[idx].to_bits(), after[idx].to_bits());
            }
        }
        // and the style half did move for the touched rows
        assert_ne!(before[0].to_bits(), after[0].to_bits());
    }

    #[test]
    fn full_step_matches_hand_arithmetic() {
        let model = SplitEmbeddingModel::init(2, 2, 0, 8);
        model.set_input_vector(0, &[1.0, 2.0]);
        model.set_input_vector(1, &[-1.0, 0.5]);
        let grad = [0.25, -0.5];
        model.apply_update(Table::Input, &[0, 1], &grad, 0.1, PartSelector::Full);
        assert_eq!(model.input_vector(0, PartSelector::Full), vec![1.0 - 0.1 * 0.25, 2.0 + 0.1 * 0.5]);
        assert_eq!(model.input_vector(1, PartSelector::Full), vec![-1.0 - 0.1 * 0.25, 0.5 + 0.1 * 0.5]);
    }

    #[test]
    fn split_update_equals_two_slice_updates() {
        let a = random_model(5, 2, 3, 9);
        let b = a.clone();
        let grad = [0.1, -0.2, 0.3, -0.4, 0.5];
        a.apply_update_split(Table::Output, &[1, 4], &grad, 0.05, 0.2);

        b.apply_update(Table::Output, &[1, 4], &grad[..2], 0.05, PartSelector::StyleHalf);
        // synsem slice via a full-width update with a zeroed style half
        let masked = [0.0, 0.0, 0.3, -0.4, 0.5];
        b.apply_update(Table::Output, &[1, 4], &masked, 0.2, PartSelector::Full);

        let bits = |m: &SplitEmbeddingModel| -> Vec<u64> {
            m.output_matrix().iter().map(|v| v.to_bits()).collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn style_half_pass_equals_detached_style_model() {
        // A StyleHalf pass must be exactly a Full pass on a model made of
        // the x-halves alone.
        let sep = random_model(6, 4, 4, 10);
        let style_only = SplitEmbeddingModel::init(6, 4, 0, 10);
        for w in 0..6u32 {
            style_only.set_input_vector(w, &sep.input_vector(w, PartSelector::StyleHalf));
            style_only.set_output_vector(w, &sep.output_vector(w, PartSelector::StyleHalf));
        }

        let ctx = [1u32, 3, 5];
        let h_sep = sep.context_mean(&ctx, PartSelector::StyleHalf).unwrap();
        let h_det = style_only.context_mean(&ctx, PartSelector::Full).unwrap();
        assert_eq!(h_sep, h_det);

        let negatives = [2u32, 4];
        let (loss_a, gh_a, go_a) = sep
            .ns_loss_and_grads(0, &h_sep, &negatives, PartSelector::StyleHalf)
            .unwrap();
        let (loss_b, gh_b, go_b) = style_only
            .ns_loss_and_grads(0, &h_det, &negatives, PartSelector::Full)
            .unwrap();
        assert_eq!(loss_a.to_bits(), loss_b.to_bits());
        assert_eq!(gh_a, gh_b);
        assert_eq!(go_a, go_b);

        for (w, g) in &go_a {
            sep.apply_update(Table::Output, &[*w], g, 0.3, PartSelector::StyleHalf);
            style_only.apply_update(Table::Output, &[*w], g, 0.3, PartSelector::Full);
        }
        sep.apply_update(Table::Input, &ctx, &gh_a, 0.3, PartSelector::StyleHalf);
        style_only.apply_update(Table::Input, &ctx, &gh_b, 0.3, PartSelector::Full);

        for w in 0..6u32 {
            assert_eq!(
                sep.input_vector(w, PartSelector::StyleHalf),
                style_only.input_vector(w, PartSelector::Full)
            );
            assert_eq!(
                sep.output_vector(w, PartSelector::StyleHalf),
                style_only.output_vector(w, PartSelector::Full)
            );
        }
    }

    #[test]
    fn variant_round_trips_through_strings() {
        for v in Variant::ALL {
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
        assert!("fancy".parse::<Variant>().is_err());
    }

    proptest! {
        #[test]
        fn loss_is_positive(seed in 0u64..1000, k in 1usize..6) {
            let model = random_model(6, 3, 2, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h: Vec<f64> = (0..5).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
            let negatives: Vec<u32> = (1..=k as u32).collect();
            let (loss, _, _) = model
                .ns_loss_and_grads(0, &h, &negatives, PartSelector::Full)
                .unwrap();
            prop_assert!(loss > 0.0);
        }

        #[test]
        fn sigmoid_is_stable_everywhere(x in -1e6f64..1e6) {
            let s = sigmoid(x);
            prop_assert!(s.is_finite() && (0.0..=1.0).contains(&s));
            prop_assert!(softplus(x).is_finite());
        }
    }
}
