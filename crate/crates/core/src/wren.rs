//! Wild Relation Network over representation vectors.
//!
//! Each candidate answer is scored against the 8 context panels: the edge
//! network g runs over all ordered pairs of distinct panel embeddings (72
//! pairs over the 9 panels), the pair outputs are summed, and the graph
//! network f maps the sum to a scalar score. Panel embeddings come straight
//! from a [`RepresentationSource`]; there is no pixel encoder and no panel
//! position tagging. The answer with the highest score wins, with the lowest
//! index breaking ties.
//!
//! Training follows the statistical-optimization protocol: every mini-batch
//! is freshly generated, loss is softmax cross-entropy over the six scores,
//! and accuracy is evaluated on fresh mini-batches at a fixed cadence.

use crate::error::{Error, Result};
use crate::factor::FactorSpace;
use crate::nn::{cross_entropy, AdamParams, AdamState, Mlp, MlpGrads};
use crate::repr::RepresentationSource;
use crate::rng::{mix64, SeededRng};
use crate::rpm::{generate_instance, RpmInstance};
use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::Path;

pub const LEARNING_RATES: [f64; 3] = [0.01, 0.001, 0.0001];
pub const EDGE_UNITS: [usize; 2] = [256, 512];
pub const EDGE_LAYERS: [usize; 3] = [2, 3, 4];
pub const GRAPH_UNITS: [usize; 2] = [128, 256];
pub const GRAPH_LAYERS: [usize; 2] = [1, 2];
pub const DROPOUT_RATES: [f64; 4] = [0.0, 0.25, 0.5, 0.75];

/// One point of the hyperparameter search space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WrenConfig {
    pub lr: f64,
    pub edge_units: usize,
    pub edge_layers: usize,
    pub graph_units: usize,
    pub graph_layers: usize,
    pub dropout: f64,
    /// Parameter-initialization seed.
    pub seed: u64,
}

impl WrenConfig {
    /// Short stable digest of every field.
    pub fn digest(&self) -> String {
        let desc = format!(
            "lr={},eu={},el={},gu={},gl={},do={},seed={}",
            self.lr,
            self.edge_units,
            self.edge_layers,
            self.graph_units,
            self.graph_layers,
            self.dropout,
            self.seed
        );
        let hash = Sha256::digest(desc.as_bytes());
        hash.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }
}

/// Uniform independent draws from each field's value set.
pub fn sample_config(rng: &mut SeededRng) -> WrenConfig {
    WrenConfig {
        lr: *rng.choose(&LEARNING_RATES),
        edge_units: *rng.choose(&EDGE_UNITS),
        edge_layers: *rng.choose(&EDGE_LAYERS),
        graph_units: *rng.choose(&GRAPH_UNITS),
        graph_layers: *rng.choose(&GRAPH_LAYERS),
        dropout: *rng.choose(&DROPOUT_RATES),
        seed: rand::RngCore::next_u64(rng),
    }
}

/// Edge network g and graph network f.
///
/// g: `edge_layers` affine layers (2*code_dim -> edge_units -> ...), hidden
/// rectified, linear output of width edge_units. f: `graph_layers` rectified
/// hidden layers of graph_units then a single-score linear output, with
/// dropout applied to the inputs of that final layer during training.
#[derive(Clone, Debug)]
pub struct WrenParams {
    pub g: Mlp,
    pub f: Mlp,
}

impl WrenParams {
    pub fn new(config: &WrenConfig, code_dim: usize) -> Self {
        let mut rng = SeededRng::new(config.seed);
        let mut g_dims = vec![2 * code_dim];
        g_dims.extend(std::iter::repeat(config.edge_units).take(config.edge_layers));
        let g = Mlp::new(&g_dims, &mut rng);
        let mut f_dims = vec![config.edge_units];
        f_dims.extend(std::iter::repeat(config.graph_units).take(config.graph_layers));
        f_dims.push(1);
        let f = Mlp::new(&f_dims, &mut rng);
        WrenParams { g, f }
    }

    pub fn code_dim(&self) -> usize {
        self.g.in_dim() / 2
    }
}

/// The fixed pair enumeration: ordered pairs (i, j), i != j, lexicographic,
/// over panels 0..8 = context and panel 8 = the answer.
pub fn pair_enumeration() -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(72);
    for i in 0..9 {
        for j in 0..9 {
            if i != j {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Score one answer against the context.
///
/// The 72 pair outputs are summed in a content-canonical order (sorted by
/// vector contents) so the score is exactly invariant under permutations of
/// the context panels.
pub fn wren_score(
    params: &WrenParams,
    context_codes: &[Vec<f64>],
    answer_code: &[f64],
    dropout: f64,
    rng: Option<&mut SeededRng>,
    train: bool,
) -> Result<f64> {
    if context_codes.len() != 8 {
        return Err(Error::PanelCount {
            expected: 8,
            actual: context_codes.len(),
        });
    }
    let d = params.code_dim();
    for code in context_codes.iter().chain(std::iter::once(&answer_code.to_vec())) {
        if code.len() != d {
            return Err(Error::ShapeMismatch {
                layer: 0,
                expected: d,
                actual: code.len(),
            });
        }
    }
    let embedding = |i: usize| -> &[f64] {
        if i < 8 {
            &context_codes[i]
        } else {
            answer_code
        }
    };
    let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(72);
    for (i, j) in pair_enumeration() {
        let mut pair = Vec::with_capacity(2 * d);
        pair.extend_from_slice(embedding(i));
        pair.extend_from_slice(embedding(j));
        let (out, _) = params.g.forward(&pair, 0.0, None, false)?;
        outputs.push(out);
    }
    outputs.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let width = params.g.out_dim();
    let mut sum = vec![0.0; width];
    for out in &outputs {
        for (s, &v) in sum.iter_mut().zip(out) {
            *s += v;
        }
    }
    let (score, _) = params.f.forward(&sum, dropout, rng, train)?;
    Ok(score[0])
}

/// Logits, softmax probabilities, and the argmax prediction (lowest index on
/// ties) over the six candidate answers.
pub fn wren_forward(
    params: &WrenParams,
    context_codes: &[Vec<f64>],
    answer_codes: &[Vec<f64>],
    dropout: f64,
    mut rng: Option<&mut SeededRng>,
    train: bool,
) -> Result<([f64; 6], [f64; 6], usize)> {
    if answer_codes.len() != 6 {
        return Err(Error::PanelCount {
            expected: 6,
            actual: answer_codes.len(),
        });
    }
    let mut logits = [0.0; 6];
    for (j, answer) in answer_codes.iter().enumerate() {
        logits[j] = wren_score(
            params,
            context_codes,
            answer,
            dropout,
            rng.as_deref_mut(),
            train,
        )?;
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let mut probs = [0.0; 6];
    for (p, e) in probs.iter_mut().zip(&exps) {
        *p = e / total;
    }
    let mut prediction = 0;
    for j in 1..6 {
        if logits[j] > logits[prediction] {
            prediction = j;
        }
    }
    Ok((logits, probs, prediction))
}

/// One point of the learning curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub step: usize,
    pub eval_accuracy: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct TrainOptions {
    pub steps: usize,
    pub batch: usize,
    pub eval_every: usize,
    pub eval_batches: usize,
    /// Stop after the first evaluation reaching this accuracy.
    pub stop_at_accuracy: Option<f64>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            steps: 100_000,
            batch: 32,
            eval_every: 1000,
            eval_batches: 100,
            stop_at_accuracy: None,
        }
    }
}

const CONTEXT_PAIRS: usize = 56; // ordered pairs among the 8 context panels
const ANSWER_PAIRS: usize = 16; // ordered pairs joining one answer to them
const ROWS_PER_INSTANCE: usize = CONTEXT_PAIRS + 6 * ANSWER_PAIRS;

/// Batched pair-matrix evaluation of a mini-batch of instances.
///
/// Context-context pair outputs are shared across the six answers of an
/// instance, which preserves the pair-sum exactly while avoiding recomputing
/// 56 of the 72 pairs per answer.
struct BatchEval {
    logits: Array2<f64>,
    g_cache: Option<crate::nn::BatchCache>,
    f_cache: Option<crate::nn::BatchCache>,
}

fn encode_instance(
    source: &RepresentationSource,
    inst: &RpmInstance,
) -> Result<Vec<Vec<f64>>> {
    let mut codes = Vec::with_capacity(14);
    for a in inst.context.iter().chain(&inst.answers) {
        codes.push(source.encode(a)?);
    }
    Ok(codes)
}

fn batch_eval(
    params: &WrenParams,
    source: &RepresentationSource,
    instances: &[RpmInstance],
    dropout: f64,
    mut rng: Option<&mut SeededRng>,
    train: bool,
) -> Result<BatchEval> {
    let d = params.code_dim();
    let b = instances.len();
    let mut pair_inputs = Array2::zeros((b * ROWS_PER_INSTANCE, 2 * d));
    for (bi, inst) in instances.iter().enumerate() {
        let codes = encode_instance(source, inst)?;
        let base = bi * ROWS_PER_INSTANCE;
        let mut row = 0;
        let mut put = |r: usize, left: &[f64], right: &[f64]| {
            let mut slot = pair_inputs.row_mut(base + r);
            slot.as_slice_mut().unwrap()[..d].copy_from_slice(left);
            slot.as_slice_mut().unwrap()[d..].copy_from_slice(right);
        };
        for i in 0..8 {
            for j in 0..8 {
                if i != j {
                    put(row, &codes[i], &codes[j]);
                    row += 1;
                }
            }
        }
        for ans in 0..6 {
            let a = &codes[8 + ans];
            for i in 0..8 {
                put(row, &codes[i], a);
                row += 1;
            }
            for j in 0..8 {
                put(row, a, &codes[j]);
                row += 1;
            }
        }
        debug_assert_eq!(row, ROWS_PER_INSTANCE);
    }

    let (g_out, g_cache) = params.g.forward_batch(&pair_inputs, 0.0, None, train)?;
    let width = params.g.out_dim();
    let mut f_inputs = Array2::zeros((b * 6, width));
    for bi in 0..b {
        let base = bi * ROWS_PER_INSTANCE;
        let cc_sum = g_out
            .slice(ndarray::s![base..base + CONTEXT_PAIRS, ..])
            .sum_axis(Axis(0));
        for ans in 0..6 {
            let lo = base + CONTEXT_PAIRS + ans * ANSWER_PAIRS;
            let ans_sum = g_out
                .slice(ndarray::s![lo..lo + ANSWER_PAIRS, ..])
                .sum_axis(Axis(0));
            let mut row = f_inputs.row_mut(bi * 6 + ans);
            row.assign(&(&cc_sum + &ans_sum));
        }
    }
    let (scores, f_cache) = params
        .f
        .forward_batch(&f_inputs, dropout, rng.as_deref_mut(), train)?;
    let logits = scores.into_shape((b, 6)).unwrap();
    Ok(BatchEval {
        logits,
        g_cache: if train { Some(g_cache) } else { None },
        f_cache: if train { Some(f_cache) } else { None },
    })
}

fn batch_backward(
    params: &WrenParams,
    eval: &BatchEval,
    dlogits: &Array2<f64>,
) -> Result<(MlpGrads, MlpGrads)> {
    let b = dlogits.nrows();
    let width = params.g.out_dim();
    let dscores = dlogits.to_owned().into_shape((b * 6, 1)).unwrap();
    let (f_grads, df_inputs) = params
        .f
        .backprop_batch(eval.f_cache.as_ref().expect("train cache"), &dscores)?;
    let mut dg_out = Array2::zeros((b * ROWS_PER_INSTANCE, width));
    for bi in 0..b {
        let base = bi * ROWS_PER_INSTANCE;
        // every answer's pair-sum includes the context-context block once
        let mut dcc = ndarray::Array1::<f64>::zeros(width);
        for ans in 0..6 {
            dcc += &df_inputs.row(bi * 6 + ans);
        }
        for r in base..base + CONTEXT_PAIRS {
            dg_out.row_mut(r).assign(&dcc);
        }
        for ans in 0..6 {
            let lo = base + CONTEXT_PAIRS + ans * ANSWER_PAIRS;
            let src = df_inputs.row(bi * 6 + ans);
            for r in lo..lo + ANSWER_PAIRS {
                dg_out.row_mut(r).assign(&src);
            }
        }
    }
    let (g_grads, _) = params
        .g
        .backprop_batch(eval.g_cache.as_ref().expect("train cache"), &dg_out)?;
    Ok((g_grads, f_grads))
}

fn generate_batch(
    space: &FactorSpace,
    gen_seed: u64,
    stream: u64,
    counter: &mut u64,
    batch: usize,
) -> Result<Vec<RpmInstance>> {
    (0..batch)
        .map(|_| {
            let seed = mix64(mix64(gen_seed, stream), *counter);
            *counter += 1;
            generate_instance(space, seed, false)
        })
        .collect()
}

/// Accuracy over `batches` fresh mini-batches in eval mode (dropout off).
pub fn evaluate(
    params: &WrenParams,
    space: &FactorSpace,
    source: &RepresentationSource,
    gen_seed: u64,
    eval_counter: &mut u64,
    batches: usize,
    batch: usize,
) -> Result<f64> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for _ in 0..batches {
        let instances = generate_batch(space, gen_seed, EVAL_STREAM, eval_counter, batch)?;
        let eval = batch_eval(params, source, &instances, 0.0, None, false)?;
        for (bi, inst) in instances.iter().enumerate() {
            let row = eval.logits.row(bi);
            let mut best = 0;
            for j in 1..6 {
                if row[j] > row[best] {
                    best = j;
                }
            }
            if best == inst.correct_index {
                correct += 1;
            }
            total += 1;
        }
    }
    Ok(correct as f64 / total as f64)
}

const TRAIN_STREAM: u64 = 0x7121;
const EVAL_STREAM: u64 = 0xE7A1;
const DROPOUT_STREAM: u64 = 0xD409;

/// Train a WReN on freshly generated instances.
///
/// Every mini-batch is newly generated (statistical optimization, no fixed
/// training set); evaluation runs every `eval_every` steps on `eval_batches`
/// fresh mini-batches with dropout disabled. The learning curve is a pure
/// function of (config, generator seed, source).
pub fn train_wren(
    config: &WrenConfig,
    space: &FactorSpace,
    source: &RepresentationSource,
    generator_seed: u64,
    opts: &TrainOptions,
) -> Result<(Vec<TrainRecord>, WrenParams)> {
    let mut params = WrenParams::new(config, source.code_dim());
    let mut adam = AdamState::new(
        AdamParams::with_lr(config.lr),
        &[("g", &params.g), ("f", &params.f)],
    );
    let mut dropout_rng = SeededRng::new(mix64(config.seed, DROPOUT_STREAM));
    let mut train_counter = 0u64;
    let mut eval_counter = 0u64;
    let mut records = Vec::new();

    for step in 1..=opts.steps {
        let instances = generate_batch(
            space,
            generator_seed,
            TRAIN_STREAM,
            &mut train_counter,
            opts.batch,
        )?;
        let eval = batch_eval(
            &params,
            source,
            &instances,
            config.dropout,
            Some(&mut dropout_rng),
            true,
        )?;
        let targets: Vec<usize> = instances.iter().map(|i| i.correct_index).collect();
        let (loss, dlogits) = cross_entropy(&eval.logits, &targets);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                step,
                digest: config.digest(),
            });
        }
        let (g_grads, f_grads) = batch_backward(&params, &eval, &dlogits)?;
        let (mut g, mut f) = (&mut params.g, &mut params.f);
        adam.step(&mut [&mut g, &mut f], &[&g_grads, &f_grads])?;

        if step % opts.eval_every == 0 {
            let accuracy = evaluate(
                &params,
                space,
                source,
                generator_seed,
                &mut eval_counter,
                opts.eval_batches,
                opts.batch,
            )?;
            records.push(TrainRecord {
                step,
                eval_accuracy: accuracy,
            });
            if let Some(threshold) = opts.stop_at_accuracy {
                if accuracy >= threshold {
                    break;
                }
            }
        }
    }
    Ok((records, params))
}

/// Append learning-curve rows (`model_id,step,accuracy`); writes the header
/// when the file is empty or new.
pub fn write_curves_csv<P: AsRef<Path>>(
    path: P,
    model_id: &str,
    records: &[TrainRecord],
) -> Result<()> {
    let path = path.as_ref();
    let fresh = !path.exists() || std::fs::metadata(path)?.len() == 0;
    let mut out = std::io::BufWriter::new(
        std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)?,
    );
    if fresh {
        writeln!(out, "model_id,step,accuracy")?;
    }
    for r in records {
        writeln!(out, "{},{},{}", model_id, r.step, r.eval_accuracy)?;
    }
    out.flush()?;
    Ok(())
}
