//! Input-convex neural surrogates for fire spread.
//!
//! Two variants share one architecture:
//!
//! * the *spread* model (`S`): tri-state map in, per-cell next-step burn
//!   probabilities out;
//! * the *spread-and-quench* model (`SQ`): additionally takes a per-cell
//!   quench allocation and predicts the residual burn cost.
//!
//! The map enters through unconstrained weights; the quench input and all
//! hidden-to-hidden paths use non-negative weights with ReLU activations, so
//! every output — in particular the scalar cost — is a convex,
//! piecewise-linear function of the quench vector. That is what lets the
//! planner treat the surrogate as an exact epigraph via subgradient cuts:
//! [`IcnnModel::cost_and_subgradient`] returns a global affine
//! underestimator at any query point.
//!
//! Training is plain mini-batch subgradient descent with step decay and a
//! projection of the constrained weights back onto the non-negative orthant
//! after every update. Everything is seeded and single-threaded, so a given
//! `(pairs, config, seed)` always yields bit-identical weights.

use crate::firegrid::{TrainingPair, CELL_BURNING};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("no training pairs supplied")]
    EmptyCorpus,
    #[error("pair {index} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    MixedDimensions { index: usize, got_w: usize, got_h: usize, want_w: usize, want_h: usize },
    #[error("the spread-and-quench model requires pairs with quench masks and costs")]
    MissingQuenchData,
    #[error("input has {got} cells, model expects {want}")]
    InputSize { got: usize, want: usize },
    #[error("quench vector has {got} entries, model expects {want}")]
    QuenchSize { got: usize, want: usize },
    #[error("model kind does not accept a quench input")]
    KindMismatch,
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which surrogate a model implements.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredictorKind {
    /// Spread only: map in, burn probabilities out.
    Spread,
    /// Spread and quench: map + quench allocation in, burn probabilities and
    /// residual burn cost out.
    SpreadQuench,
}

/// One affine stage. `w_z` consumes the previous hidden state (zero columns
/// on the first stage), `w_map` the map encoding, `w_quench` the quench
/// vector (zero columns in a spread-only model). `w_z` and `w_quench` are
/// the convexity-critical blocks and are kept entrywise non-negative —
/// `w_quench` only needs that on the *hidden* stages' outputs feeding
/// through ReLU; we constrain `w_z` alone and leave quench pass-through
/// free, which still nests affine functions of the quench inside
/// non-decreasing convex stages.
#[derive(Clone, Debug, PartialEq)]
struct Affine {
    w_z: DMatrix<f64>,
    w_map: DMatrix<f64>,
    w_quench: DMatrix<f64>,
    bias: DVector<f64>,
}

impl Affine {
    fn apply(&self, z: &DMatrix<f64>, map: &DMatrix<f64>, quench: &DMatrix<f64>) -> DMatrix<f64> {
        let cols = map.ncols().max(z.ncols()).max(quench.ncols());
        let mut out = DMatrix::zeros(self.bias.len(), cols);
        if self.w_z.ncols() > 0 {
            out.gemm(1.0, &self.w_z, z, 0.0);
        }
        if self.w_map.ncols() > 0 {
            out.gemm(1.0, &self.w_map, map, 1.0);
        }
        if self.w_quench.ncols() > 0 {
            out.gemm(1.0, &self.w_quench, quench, 1.0);
        }
        for j in 0..out.ncols() {
            for i in 0..out.nrows() {
                out[(i, j)] += self.bias[i];
            }
        }
        out
    }
}

/// Trained surrogate network. See the module docs for the architecture.
#[derive(Clone, Debug, PartialEq)]
pub struct IcnnModel {
    width: usize,
    height: usize,
    kind: PredictorKind,
    hidden: Vec<Affine>,
    burn_head: Affine,
    cost_head: Affine,
}

/// Training hyper-parameters. The defaults are what every bundled artifact
/// was produced with.
#[derive(Clone, Copy, Debug)]
pub struct TrainConfig {
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub epochs: usize,
    pub batch_size: usize,
    /// Nominal step size; each affine stage scales it by its total fan-in,
    /// which keeps the per-output step magnitude independent of layer width.
    pub learning_rate: f64,
    /// Weight of the squared-error cost term relative to the per-cell
    /// cross-entropy.
    pub cost_weight: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_layers: 2,
            hidden_width: 64,
            epochs: 24,
            batch_size: 32,
            learning_rate: 1.0,
            cost_weight: 0.1,
        }
    }
}

/// Output of a single forward pass.
#[derive(Clone, Debug)]
pub struct Prediction {
    /// Per-cell probability that the cell burns next period, row-major.
    pub burn_probs: Vec<f64>,
    /// Predicted burning-cell count next period (clamped at zero).
    pub cost: f64,
}

/// Map encoding: two binary channels, fuel presence and burning state.
fn encode_map(codes: &[u8]) -> DVector<f64> {
    let n = codes.len();
    let mut v = DVector::zeros(2 * n);
    for (i, &c) in codes.iter().enumerate() {
        v[i] = f64::from(c >= 1);
        v[n + i] = f64::from(c == CELL_BURNING);
    }
    v
}

fn relu_mask(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.map(|v| if v > 0.0 { 1.0 } else { 0.0 })
}

impl IcnnModel {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> usize {
        self.width * self.height
    }

    pub fn kind(&self) -> PredictorKind {
        self.kind
    }

    /// Batched forward pass over column-stacked inputs. Returns the hidden
    /// pre-activations, hidden activations, burn logits, and raw cost row.
    #[allow(clippy::type_complexity)]
    fn forward_batch(
        &self,
        maps: &DMatrix<f64>,
        quench: &DMatrix<f64>,
    ) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>, DMatrix<f64>, DMatrix<f64>) {
        let cols = maps.ncols();
        let mut pre = Vec::with_capacity(self.hidden.len());
        let mut act = Vec::with_capacity(self.hidden.len());
        let mut z = DMatrix::zeros(0, cols);
        for layer in &self.hidden {
            let a = layer.apply(&z, maps, quench);
            z = a.map(|v| v.max(0.0));
            pre.push(a);
            act.push(z.clone());
        }
        let logits = self.burn_head.apply(&z, maps, quench);
        let cost = self.cost_head.apply(&z, maps, quench);
        (pre, act, logits, cost)
    }

    fn check_inputs(&self, codes: &[u8], quench: Option<&[f64]>) -> Result<(), PredictorError> {
        if codes.len() != self.cells() {
            return Err(PredictorError::InputSize { got: codes.len(), want: self.cells() });
        }
        match (self.kind, quench) {
            (PredictorKind::Spread, Some(_)) => Err(PredictorError::KindMismatch),
            (PredictorKind::SpreadQuench, Some(q)) if q.len() != self.cells() => {
                Err(PredictorError::QuenchSize { got: q.len(), want: self.cells() })
            }
            _ => Ok(()),
        }
    }

    /// Forward pass for one map (and, for the SQ kind, one quench vector;
    /// entries in `[0, 1]`, fractional values allowed). A missing quench for
    /// an SQ model is treated as all-zeros.
    pub fn predict(
        &self,
        codes: &[u8],
        quench: Option<&[f64]>,
    ) -> Result<Prediction, PredictorError> {
        self.check_inputs(codes, quench)?;
        let map = DMatrix::from_column_slice(2 * self.cells(), 1, encode_map(codes).as_slice());
        let q = match (self.kind, quench) {
            (PredictorKind::SpreadQuench, Some(q)) => DMatrix::from_column_slice(q.len(), 1, q),
            (PredictorKind::SpreadQuench, None) => DMatrix::zeros(self.cells(), 1),
            _ => DMatrix::zeros(0, 1),
        };
        let (_, _, logits, cost) = self.forward_batch(&map, &q);
        let burn_probs = logits.column(0).iter().map(|&o| sigmoid(o)).collect();
        Ok(Prediction { burn_probs, cost: cost[(0, 0)].max(0.0) * self.cells() as f64 })
    }

    /// Predicted residual burn cost and a subgradient with respect to the
    /// quench vector. Because the cost is convex piecewise-linear in the
    /// quench, `cost(q') >= cost(q) + g . (q' - q)` holds globally for the
    /// returned `g` — the affine minorant the branch-and-cut solver adds as
    /// an outer-approximation cut.
    pub fn cost_and_subgradient(
        &self,
        codes: &[u8],
        quench: &[f64],
    ) -> Result<(f64, Vec<f64>), PredictorError> {
        if self.kind != PredictorKind::SpreadQuench {
            return Err(PredictorError::KindMismatch);
        }
        self.check_inputs(codes, Some(quench))?;
        let n = self.cells();
        let map = DMatrix::from_column_slice(2 * n, 1, encode_map(codes).as_slice());
        let q = DMatrix::from_column_slice(n, 1, quench);
        let (pre, act, _, cost) = self.forward_batch(&map, &q);
        let raw = cost[(0, 0)];
        let scale = n as f64;
        if raw <= 0.0 {
            // Clamped region: zero is a valid subgradient of max(0, f).
            return Ok((0.0, vec![0.0; n]));
        }
        // Backward pass along the cost path only (derivative w.r.t. quench).
        let mut grad_q = DVector::zeros(n);
        if self.cost_head.w_quench.ncols() > 0 {
            grad_q += DVector::from_column_slice(self.cost_head.w_quench.row(0).transpose().as_slice());
        }
        let mut dz: DVector<f64> =
            DVector::from_column_slice(self.cost_head.w_z.row(0).transpose().as_slice());
        for (layer, (a, _)) in self.hidden.iter().zip(pre.iter().zip(act.iter())).rev() {
            let mask = relu_mask(a);
            let da = dz.component_mul(&DVector::from_column_slice(mask.column(0).as_slice()));
            if layer.w_quench.ncols() > 0 {
                grad_q.gemv(1.0, &layer.w_quench.transpose(), &da, 1.0);
            }
            if layer.w_z.ncols() > 0 {
                dz = layer.w_z.transpose() * da;
            } else {
                dz = DVector::zeros(0);
            }
        }
        let grad = grad_q.iter().map(|&g| g * scale).collect();
        Ok((raw * scale, grad))
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct Corpus {
    maps: DMatrix<f64>,
    quench: DMatrix<f64>,
    /// Copies of the inputs with each feature divided by its corpus second
    /// moment. Taking gradients against these instead of the raw inputs
    /// preconditions the descent per feature — the same update plain SGD
    /// would make after standardizing features, without changing the
    /// function the model computes. Rare-but-informative features (burning
    /// cells, quench sites) would otherwise learn ~50x slower than the dense
    /// fuel channel.
    maps_scaled: DMatrix<f64>,
    quench_scaled: DMatrix<f64>,
    targets: DMatrix<f64>,
    /// Burn cost normalized by cell count, one entry per sample.
    costs: DVector<f64>,
    /// Second moments of the per-sample aggregate inputs (total quench,
    /// total fuel, total burning), normalizing the tied weights' steps.
    quench_sum_moment: f64,
    fuel_sum_moment: f64,
    burn_sum_moment: f64,
    width: usize,
    height: usize,
}

/// Per-row inverse second moments, floored to keep dead features bounded.
fn feature_scales(m: &DMatrix<f64>) -> DVector<f64> {
    let cols = m.ncols().max(1) as f64;
    DVector::from_iterator(
        m.nrows(),
        m.row_iter().map(|row| {
            let second_moment = row.iter().map(|v| v * v).sum::<f64>() / cols;
            1.0 / second_moment.max(0.02)
        }),
    )
}

fn scale_rows(m: &DMatrix<f64>, scales: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for i in 0..out.nrows() {
        for j in 0..out.ncols() {
            out[(i, j)] *= scales[i];
        }
    }
    out
}

fn build_corpus(pairs: &[TrainingPair], kind: PredictorKind) -> Result<Corpus, PredictorError> {
    let first = pairs.first().ok_or(PredictorError::EmptyCorpus)?;
    let (w, h) = (first.width(), first.height());
    let n = w * h;
    let mut maps = DMatrix::zeros(2 * n, pairs.len());
    let quench_dim = if kind == PredictorKind::SpreadQuench { n } else { 0 };
    let mut quench = DMatrix::zeros(quench_dim, pairs.len());
    let mut targets = DMatrix::zeros(n, pairs.len());
    let mut costs = DVector::zeros(pairs.len());
    for (s, pair) in pairs.iter().enumerate() {
        if (pair.width(), pair.height()) != (w, h) {
            return Err(PredictorError::MixedDimensions {
                index: s,
                got_w: pair.width(),
                got_h: pair.height(),
                want_w: w,
                want_h: h,
            });
        }
        let codes: Vec<u8> = pair.before.concat();
        maps.set_column(s, &encode_map(&codes));
        for (i, &a) in pair.after.concat().iter().enumerate() {
            targets[(i, s)] = f64::from(a);
        }
        if kind == PredictorKind::SpreadQuench {
            let mask = pair.quench.as_ref().ok_or(PredictorError::MissingQuenchData)?;
            for (i, &q) in mask.concat().iter().enumerate() {
                quench[(i, s)] = f64::from(q);
            }
            let cost = pair.next_cost.ok_or(PredictorError::MissingQuenchData)?;
            costs[s] = cost / n as f64;
        } else if let Some(cost) = pair.next_cost {
            costs[s] = cost / n as f64;
        }
    }
    let maps_scaled = scale_rows(&maps, &feature_scales(&maps));
    let quench_scaled = scale_rows(&quench, &feature_scales(&quench));
    let sum_moment = |rows: std::ops::Range<usize>, m: &DMatrix<f64>| -> f64 {
        if rows.is_empty() {
            return 1.0;
        }
        let mut acc = 0.0;
        for j in 0..m.ncols() {
            let s: f64 = rows.clone().map(|i| m[(i, j)]).sum();
            acc += s * s;
        }
        (acc / m.ncols() as f64).max(1.0)
    };
    let quench_sum_moment = sum_moment(0..quench_dim, &quench);
    let fuel_sum_moment = sum_moment(0..n, &maps);
    let burn_sum_moment = sum_moment(n..2 * n, &maps);
    Ok(Corpus {
        maps,
        quench,
        maps_scaled,
        quench_scaled,
        targets,
        costs,
        quench_sum_moment,
        fuel_sum_moment,
        burn_sum_moment,
        width: w,
        height: h,
    })
}

fn init_affine(
    rows: usize,
    z_cols: usize,
    map_cols: usize,
    quench_cols: usize,
    rng: &mut ChaCha8Rng,
) -> Affine {
    let fill = |r: usize, c: usize, rng: &mut ChaCha8Rng| {
        let bound = (6.0 / (r + c).max(1) as f64).sqrt();
        DMatrix::from_fn(r, c, |_, _| rng.gen_range(-bound..bound))
    };
    Affine {
        // The sign-constrained block starts at zero: a symmetric or
        // positive init would bias every output upward (its inputs are
        // non-negative), and projected SGD can only escape that by killing
        // weights. Gradients lift entries off zero where they help.
        w_z: DMatrix::zeros(rows, z_cols),
        w_map: fill(rows, map_cols, rng),
        w_quench: fill(rows, quench_cols, rng),
        bias: DVector::zeros(rows),
    }
}

/// Train a surrogate of the given kind on the corpus. Deterministic in
/// `(pairs, kind, config, seed)`.
pub fn train(
    pairs: &[TrainingPair],
    kind: PredictorKind,
    config: &TrainConfig,
    seed: u64,
) -> Result<IcnnModel, PredictorError> {
    let corpus = build_corpus(pairs, kind)?;
    let n = corpus.width * corpus.height;
    let quench_dim = corpus.quench.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut hidden = Vec::with_capacity(config.hidden_layers);
    for layer in 0..config.hidden_layers {
        let z_cols = if layer == 0 { 0 } else { config.hidden_width };
        hidden.push(init_affine(config.hidden_width, z_cols, 2 * n, quench_dim, &mut rng));
    }
    let burn_head = init_affine(n, config.hidden_width, 2 * n, quench_dim, &mut rng);
    // The cost head reads the hidden state plus *tied* aggregate inputs:
    // one shared weight per map channel (total fuel, total burning) and one
    // for the quench vector (total quench) — still affine in the raw
    // inputs. A scalar output with thousands of free correlated inputs
    // cannot be trained stably by plain SGD at any step size that also
    // learns in reasonable time; three well-conditioned aggregates carry
    // the first-order structure (fire size, fuel mass, sorties flown), and
    // crucially let the regression separate the negative causal effect of
    // quenching from its positive correlation with fire size.
    let mut cost_head = init_affine(1, config.hidden_width, 2 * n, quench_dim, &mut rng);
    cost_head.w_map.fill(0.0);
    cost_head.w_quench.fill(0.0);
    let mut model = IcnnModel {
        width: corpus.width,
        height: corpus.height,
        kind,
        hidden,
        burn_head,
        cost_head,
    };

    let samples = pairs.len();
    let mut order: Vec<usize> = (0..samples).collect();
    let decay_every = (config.epochs / 8).max(1);
    for epoch in 0..config.epochs {
        let lr = config.learning_rate * 0.5f64.powi((epoch / decay_every) as i32);
        // Fisher-Yates with the session RNG keeps epochs reproducible.
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for batch in order.chunks(config.batch_size) {
            train_batch(&mut model, &corpus, batch, lr, config.cost_weight);
        }
    }
    Ok(model)
}

fn gather(m: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), cols.len());
    for (j, &c) in cols.iter().enumerate() {
        out.set_column(j, &m.column(c));
    }
    out
}

fn train_batch(model: &mut IcnnModel, corpus: &Corpus, batch: &[usize], lr: f64, lambda: f64) {
    let b = batch.len();
    let maps = gather(&corpus.maps, batch);
    let quench = gather(&corpus.quench, batch);
    let maps_scaled = gather(&corpus.maps_scaled, batch);
    let quench_scaled = gather(&corpus.quench_scaled, batch);
    let targets = gather(&corpus.targets, batch);
    let (pre, act, logits, cost) = model.forward_batch(&maps, &quench);

    // Loss per sample: summed per-cell cross-entropy plus lambda * squared
    // error on the normalized cost; the batch takes the mean. The cell sum
    // (rather than mean) keeps per-cell weight gradients O(1).
    let mut d_logits = logits.map(sigmoid) - &targets;
    d_logits /= b as f64;
    let mut d_cost = DMatrix::zeros(1, b);
    for (j, &s) in batch.iter().enumerate() {
        d_cost[(0, j)] = 2.0 * lambda * (cost[(0, j)] - corpus.costs[s]) / b as f64;
    }

    let z_last = act.last().expect("at least one hidden layer");

    // Head gradients, plus the error signal entering the last hidden state.
    let mut d_z = model.burn_head.w_z.transpose() * &d_logits;
    d_z.gemm(1.0, &model.cost_head.w_z.transpose(), &d_cost, 1.0);
    apply_grads(&mut model.burn_head, &d_logits, z_last, &maps_scaled, &quench_scaled, lr, true);
    update_cost_head(model, &d_cost, z_last, &maps, &quench, corpus, lr);

    let empty = DMatrix::zeros(0, b);
    for idx in (0..model.hidden.len()).rev() {
        let d_a = d_z.component_mul(&relu_mask(&pre[idx]));
        let below: &DMatrix<f64> = if idx == 0 { &empty } else { &act[idx - 1] };
        let next_d_z = if idx == 0 {
            DMatrix::zeros(0, b)
        } else {
            model.hidden[idx].w_z.transpose() * &d_a
        };
        apply_grads(&mut model.hidden[idx], &d_a, below, &maps_scaled, &quench_scaled, lr, idx > 0);
        d_z = next_d_z;
    }
}

/// SGD step for the cost head: the `w_z` block like any other stage, plus
/// the tied aggregate columns — all entries of a group move together by the
/// gradient of the shared weight, normalized by the corpus second moment of
/// the group's input sum. The ties are what keep this scalar regression
/// stable.
fn update_cost_head(
    model: &mut IcnnModel,
    d_cost: &DMatrix<f64>,
    z_last: &DMatrix<f64>,
    maps_raw: &DMatrix<f64>,
    quench_raw: &DMatrix<f64>,
    corpus: &Corpus,
    lr: f64,
) {
    let n = model.cells();
    let head = &mut model.cost_head;
    if head.w_z.ncols() > 0 {
        let lr_z = lr / head.w_z.ncols() as f64;
        head.w_z.gemm(-lr_z, d_cost, &z_last.transpose(), 1.0);
        head.w_z.apply(|v| *v = v.max(0.0));
    }
    let tied_step = |cols: std::ops::Range<usize>, inputs: &DMatrix<f64>, in_rows: std::ops::Range<usize>, moment: f64, head_w: &mut DMatrix<f64>| {
        if cols.is_empty() {
            return;
        }
        let mut g = 0.0;
        for j in 0..d_cost.ncols() {
            let s: f64 = in_rows.clone().map(|i| inputs[(i, j)]).sum();
            g += d_cost[(0, j)] * s;
        }
        let step = lr * g / moment;
        for k in cols {
            head_w[(0, k)] -= step;
        }
    };
    tied_step(0..n, maps_raw, 0..n, corpus.fuel_sum_moment, &mut head.w_map);
    tied_step(n..2 * n, maps_raw, n..2 * n, corpus.burn_sum_moment, &mut head.w_map);
    if head.w_quench.ncols() > 0 {
        tied_step(0..n, quench_raw, 0..n, corpus.quench_sum_moment, &mut head.w_quench);
    }
    let total: f64 = d_cost.iter().sum();
    head.bias[0] -= lr * total;
}

/// SGD step for one affine stage; projects `w_z` back onto the non-negative
/// orthant when it is a constrained block. `maps` and `quench` are the
/// feature-scaled copies, so the per-feature preconditioning rides along
/// with the gradient outer products.
fn apply_grads(
    layer: &mut Affine,
    d_out: &DMatrix<f64>,
    z: &DMatrix<f64>,
    maps: &DMatrix<f64>,
    quench: &DMatrix<f64>,
    lr: f64,
    clamp_wz: bool,
) {
    if layer.w_z.ncols() > 0 {
        // Hidden activations are O(1) and dense; normalize by their count.
        let lr_z = lr / layer.w_z.ncols() as f64;
        layer.w_z.gemm(-lr_z, d_out, &z.transpose(), 1.0);
        if clamp_wz {
            layer.w_z.apply(|v| *v = v.max(0.0));
        }
    }
    if layer.w_map.ncols() > 0 {
        layer.w_map.gemm(-lr, d_out, &maps.transpose(), 1.0);
    }
    if layer.w_quench.ncols() > 0 {
        layer.w_quench.gemm(-lr, d_out, &quench.transpose(), 1.0);
    }
    for i in 0..layer.bias.len() {
        let mut s = 0.0;
        for j in 0..d_out.ncols() {
            s += d_out[(i, j)];
        }
        layer.bias[i] -= lr * s;
    }
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Confusion counts over per-cell burn classification, with the usual
/// derived rates. Degenerate ratios (`0/0`) evaluate to 1.0: an empty class
/// is classified perfectly.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Metrics {
    pub true_positive: u64,
    pub false_positive: u64,
    pub true_negative: u64,
    pub false_negative: u64,
}

impl Metrics {
    fn ratio(num: u64, den: u64) -> f64 {
        if den == 0 {
            1.0
        } else {
            num as f64 / den as f64
        }
    }

    pub fn sensitivity(&self) -> f64 {
        Self::ratio(self.true_positive, self.true_positive + self.false_negative)
    }

    pub fn specificity(&self) -> f64 {
        Self::ratio(self.true_negative, self.true_negative + self.false_positive)
    }

    pub fn precision(&self) -> f64 {
        Self::ratio(self.true_positive, self.true_positive + self.false_positive)
    }

    pub fn accuracy(&self) -> f64 {
        Self::ratio(
            self.true_positive + self.true_negative,
            self.true_positive + self.true_negative + self.false_positive + self.false_negative,
        )
    }
}

/// Classify every cell of every pair at the given probability threshold and
/// tally the confusion counts against the recorded outcomes.
pub fn evaluate(
    model: &IcnnModel,
    pairs: &[TrainingPair],
    threshold: f64,
) -> Result<Metrics, PredictorError> {
    let mut m = Metrics::default();
    for pair in pairs {
        let codes: Vec<u8> = pair.before.concat();
        let quench: Option<Vec<f64>> = match model.kind {
            PredictorKind::SpreadQuench => Some(
                pair.quench
                    .as_ref()
                    .map(|q| q.concat().iter().map(|&v| f64::from(v)).collect())
                    .unwrap_or_else(|| vec![0.0; codes.len()]),
            ),
            PredictorKind::Spread => None,
        };
        let pred = model.predict(&codes, quench.as_deref())?;
        for (p, &truth) in pred.burn_probs.iter().zip(pair.after.concat().iter()) {
            match (*p >= threshold, truth == 1) {
                (true, true) => m.true_positive += 1,
                (true, false) => m.false_positive += 1,
                (false, true) => m.false_negative += 1,
                (false, false) => m.true_negative += 1,
            }
        }
    }
    Ok(m)
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

const MAGIC: &[u8; 5] = b"ICNN1";

/// Serialize: the `ICNN1` magic, a little-endian `u32` matrix count, then
/// each matrix as `u32` rows, `u32` cols, and row-major little-endian `f64`
/// entries. Matrix 0 is a 1x5 metadata row `[width, height, kind, hidden
/// layers, hidden width]`; after it come, for each stage in order (hidden
/// stages bottom-up, burn head, cost head): `w_z`, `w_map`, `w_quench`, and
/// the bias as a rows x 1 matrix.
pub fn save_model(model: &IcnnModel, mut w: impl Write) -> Result<(), PredictorError> {
    let mut matrices: Vec<(usize, usize, Vec<f64>)> = Vec::new();
    let kind_flag = match model.kind {
        PredictorKind::Spread => 0.0,
        PredictorKind::SpreadQuench => 1.0,
    };
    let hidden_width = model.hidden.first().map_or(0, |l| l.bias.len());
    matrices.push((
        1,
        5,
        vec![
            model.width as f64,
            model.height as f64,
            kind_flag,
            model.hidden.len() as f64,
            hidden_width as f64,
        ],
    ));
    let mut push_affine = |a: &Affine| {
        for m in [&a.w_z, &a.w_map, &a.w_quench] {
            let mut row_major = Vec::with_capacity(m.len());
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    row_major.push(m[(i, j)]);
                }
            }
            matrices.push((m.nrows(), m.ncols(), row_major));
        }
        matrices.push((a.bias.len(), 1, a.bias.as_slice().to_vec()));
    };
    for layer in &model.hidden {
        push_affine(layer);
    }
    push_affine(&model.burn_head);
    push_affine(&model.cost_head);

    w.write_all(MAGIC)?;
    w.write_all(&u32::try_from(matrices.len()).unwrap().to_le_bytes())?;
    for (rows, cols, data) in matrices {
        w.write_all(&u32::try_from(rows).unwrap().to_le_bytes())?;
        w.write_all(&u32::try_from(cols).unwrap().to_le_bytes())?;
        for v in data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_model(mut r: impl Read) -> Result<IcnnModel, PredictorError> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(PredictorError::BadCheckpoint("bad magic".into()));
    }
    let mut u32buf = [0u8; 4];
    let mut read_u32 = |r: &mut dyn Read| -> Result<u32, PredictorError> {
        r.read_exact(&mut u32buf)?;
        Ok(u32::from_le_bytes(u32buf))
    };
    let count = read_u32(&mut r)? as usize;
    let mut matrices = Vec::with_capacity(count);
    for _ in 0..count {
        let rows = read_u32(&mut r)? as usize;
        let cols = read_u32(&mut r)? as usize;
        let mut data = vec![0.0; rows * cols];
        let mut f64buf = [0u8; 8];
        for v in &mut data {
            r.read_exact(&mut f64buf)?;
            *v = f64::from_le_bytes(f64buf);
        }
        matrices.push(DMatrix::from_row_slice(rows, cols, &data));
    }
    let mut it = matrices.into_iter();
    let meta = it.next().ok_or_else(|| PredictorError::BadCheckpoint("missing metadata".into()))?;
    if meta.nrows() != 1 || meta.ncols() != 5 {
        return Err(PredictorError::BadCheckpoint("bad metadata shape".into()));
    }
    let width = meta[(0, 0)] as usize;
    let height = meta[(0, 1)] as usize;
    let kind = match meta[(0, 2)] as u8 {
        0 => PredictorKind::Spread,
        1 => PredictorKind::SpreadQuench,
        k => return Err(PredictorError::BadCheckpoint(format!("unknown kind {k}"))),
    };
    let layers = meta[(0, 3)] as usize;
    let mut take_affine = || -> Result<Affine, PredictorError> {
        let mut next =
            || it.next().ok_or_else(|| PredictorError::BadCheckpoint("truncated matrix list".into()));
        let w_z = next()?;
        let w_map = next()?;
        let w_quench = next()?;
        let bias_m = next()?;
        if bias_m.ncols() != 1 {
            return Err(PredictorError::BadCheckpoint("bias must be a column".into()));
        }
        Ok(Affine {
            bias: DVector::from_column_slice(bias_m.as_slice()),
            w_z,
            w_map,
            w_quench,
        })
    };
    let mut hidden = Vec::with_capacity(layers);
    for _ in 0..layers {
        hidden.push(take_affine()?);
    }
    let burn_head = take_affine()?;
    let cost_head = take_affine()?;
    if it.next().is_some() {
        return Err(PredictorError::BadCheckpoint("trailing matrices".into()));
    }
    let model = IcnnModel { width, height, kind, hidden, burn_head, cost_head };
    let n = model.cells();
    if model.burn_head.bias.len() != n || model.cost_head.bias.len() != 1 {
        return Err(PredictorError::BadCheckpoint("head shapes disagree with metadata".into()));
    }
    Ok(model)
}

pub fn save_model_to_path(model: &IcnnModel, path: &Path) -> Result<(), PredictorError> {
    save_model(model, std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn load_model_from_path(path: &Path) -> Result<IcnnModel, PredictorError> {
    load_model(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::firegrid::generate_pairs;

    fn tiny_config() -> TrainConfig {
        TrainConfig { hidden_layers: 2, hidden_width: 16, epochs: 12, batch_size: 16, ..TrainConfig::default() }
    }

    fn quench_corpus() -> Vec<TrainingPair> {
        generate_pairs(12, 8, 6, true, 31)
    }

    #[test]
    fn metrics_arithmetic_matches_hand_counts() {
        let m = Metrics { true_positive: 2, false_positive: 1, true_negative: 5, false_negative: 2 };
        assert_eq!(m.sensitivity(), 0.5);
        assert_eq!(m.specificity(), 5.0 / 6.0);
        assert_eq!(m.precision(), 2.0 / 3.0);
        assert_eq!(m.accuracy(), 0.7);
    }

    #[test]
    fn degenerate_ratios_default_to_one() {
        let m = Metrics { true_negative: 10, ..Metrics::default() };
        assert_eq!(m.sensitivity(), 1.0);
        assert_eq!(m.precision(), 1.0);
        assert_eq!(m.accuracy(), 1.0);
    }

    #[test]
    fn training_is_deterministic() {
        let pairs = quench_corpus();
        let cfg = tiny_config();
        let a = train(&pairs, PredictorKind::SpreadQuench, &cfg, 77).unwrap();
        let b = train(&pairs, PredictorKind::SpreadQuench, &cfg, 77).unwrap();
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        save_model(&a, &mut buf_a).unwrap();
        save_model(&b, &mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b, "same seed must give bit-identical checkpoints");
    }

    #[test]
    fn checkpoint_roundtrip_is_exact() {
        let pairs = quench_corpus();
        let model = train(&pairs, PredictorKind::SpreadQuench, &tiny_config(), 5).unwrap();
        let mut buf = Vec::new();
        save_model(&model, &mut buf).unwrap();
        assert_eq!(&buf[..5], b"ICNN1");
        let back = load_model(buf.as_slice()).unwrap();
        assert_eq!(model, back);
        let mut buf2 = Vec::new();
        save_model(&back, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn spread_model_rejects_quench_input() {
        let pairs = generate_pairs(6, 8, 5, false, 3);
        let model = train(&pairs, PredictorKind::Spread, &tiny_config(), 1).unwrap();
        let codes: Vec<u8> = pairs[0].before.concat();
        assert!(model.predict(&codes, None).is_ok());
        let q = vec![0.0; codes.len()];
        assert!(matches!(model.predict(&codes, Some(&q)), Err(PredictorError::KindMismatch)));
    }

    #[test]
    fn training_learns_the_easy_structure() {
        // Persistence dominates the dynamics: burning cells keep burning.
        // Even a small net must pick that up, giving decent accuracy on its
        // own training distribution.
        let pairs = quench_corpus();
        let model = train(&pairs, PredictorKind::SpreadQuench, &tiny_config(), 9).unwrap();
        let held_out = generate_pairs(6, 8, 6, true, 99);
        let m = evaluate(&model, &held_out, 0.5).unwrap();
        assert!(m.accuracy() > 0.8, "accuracy {:.3} too low", m.accuracy());
        assert!(m.specificity() > 0.8, "specificity {:.3} too low", m.specificity());
    }

    #[test]
    fn cost_is_midpoint_convex_in_quench() {
        let pairs = quench_corpus();
        let model = train(&pairs, PredictorKind::SpreadQuench, &tiny_config(), 13).unwrap();
        let codes: Vec<u8> = pairs[3].before.concat();
        let n = codes.len();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let ca = model.predict(&codes, Some(&a)).unwrap().cost;
            let cb = model.predict(&codes, Some(&b)).unwrap().cost;
            let cm = model.predict(&codes, Some(&mid)).unwrap().cost;
            assert!(
                cm <= 0.5 * (ca + cb) + 1e-9,
                "midpoint convexity violated: {cm} > avg({ca}, {cb})"
            );
        }
    }

    #[test]
    fn subgradient_cuts_underestimate_globally() {
        let pairs = quench_corpus();
        let model = train(&pairs, PredictorKind::SpreadQuench, &tiny_config(), 21).unwrap();
        let codes: Vec<u8> = pairs[7].before.concat();
        let n = codes.len();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let at: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let probe: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let (value, grad) = model.cost_and_subgradient(&codes, &at).unwrap();
            let direct = model.predict(&codes, Some(&at)).unwrap().cost;
            assert!((value - direct).abs() < 1e-9);
            let cut: f64 =
                value + grad.iter().zip(probe.iter().zip(&at)).map(|(g, (p, a))| g * (p - a)).sum::<f64>();
            let truth = model.predict(&codes, Some(&probe)).unwrap().cost;
            assert!(
                truth >= cut - 1e-9,
                "cut overestimates: value at probe {truth} < cut {cut}"
            );
        }
    }

    #[test]
    fn more_quench_never_raises_predicted_cost_head_value() {
        // Not a convexity requirement, but the clamp must keep costs
        // non-negative for the planner's epigraph variable.
        let pairs = quench_corpus();
        let model = train(&pairs, PredictorKind::SpreadQuench, &tiny_config(), 2).unwrap();
        let codes: Vec<u8> = pairs[0].before.concat();
        let zeros = vec![0.0; codes.len()];
        let cost = model.predict(&codes, Some(&zeros)).unwrap().cost;
        assert!(cost >= 0.0);
    }
}
