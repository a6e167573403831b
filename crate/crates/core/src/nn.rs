//! Minimal dense-network substrate: rectified MLPs with reverse-mode
//! gradients, inverted dropout on the final layer's input, softmax
//! cross-entropy, and a bias-corrected adaptive-moment optimizer.
//!
//! Everything is 64-bit floating point and deterministic given the seeds, so
//! training runs are reproducible bit-for-bit.

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug)]
pub struct DenseLayer {
    /// out x in weight matrix.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Affine layers with rectified hidden activations and a linear output.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

/// Per-layer gradients, same shapes as the parameters.
#[derive(Clone, Debug)]
pub struct MlpGrads {
    pub layers: Vec<DenseLayer>,
}

impl MlpGrads {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        MlpGrads {
            layers: mlp
                .layers
                .iter()
                .map(|l| DenseLayer {
                    w: Array2::zeros(l.w.dim()),
                    b: Array1::zeros(l.b.len()),
                })
                .collect(),
        }
    }
}

/// Activations cached by a forward pass, consumed by backprop.
#[derive(Debug)]
pub struct BatchCache {
    /// Input actually fed to each layer (dropout already applied for the
    /// final layer).
    inputs: Vec<Array2<f64>>,
    /// Inverted-dropout mask on the final layer's input (entries 0 or
    /// 1/keep), when active.
    dropout_mask: Option<Array2<f64>>,
    shapes: Vec<(usize, usize)>,
}

fn layer_shapes(mlp: &Mlp) -> Vec<(usize, usize)> {
    mlp.layers.iter().map(|l| l.w.dim()).collect()
}

impl Mlp {
    /// Build from layer widths `[in, h0, ..., out]`. Weights are uniform
    /// scaled by the inverse square root of fan-in; biases start at zero.
    pub fn new(dims: &[usize], rng: &mut SeededRng) -> Mlp {
        assert!(dims.len() >= 2, "need at least one layer");
        let layers = dims
            .windows(2)
            .map(|win| {
                let (fan_in, fan_out) = (win[0], win[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let w = Array2::from_shape_fn((fan_out, fan_in), |_| {
                    rng.gen_range(-bound..bound)
                });
                DenseLayer {
                    w,
                    b: Array1::zeros(fan_out),
                }
            })
            .collect();
        Mlp { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().w.nrows()
    }

    /// Batched forward pass over row vectors.
    ///
    /// Hidden layers are rectified; the output layer is linear. Inverted
    /// dropout is applied only to the inputs of the final layer and only in
    /// train mode (eval is deterministic and dropout-free).
    pub fn forward_batch(
        &self,
        x: &Array2<f64>,
        dropout: f64,
        mut rng: Option<&mut SeededRng>,
        train: bool,
    ) -> Result<(Array2<f64>, BatchCache)> {
        let n_layers = self.layers.len();
        let mut inputs: Vec<Array2<f64>> = Vec::with_capacity(n_layers);
        let mut dropout_mask = None;
        let mut h = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            if h.ncols() != layer.w.ncols() {
                return Err(Error::ShapeMismatch {
                    layer: l,
                    expected: layer.w.ncols(),
                    actual: h.ncols(),
                });
            }
            if l == n_layers - 1 && train && dropout > 0.0 {
                let rng = rng
                    .as_deref_mut()
                    .expect("dropout in train mode needs an rng");
                let keep = 1.0 - dropout;
                // Row-major mask draw keeps forward/backward pairs aligned.
                let mask = Array2::from_shape_fn(h.dim(), |_| {
                    if rng.gen::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                });
                h *= &mask;
                dropout_mask = Some(mask);
            }
            let mut z = h.dot(&layer.w.t());
            z += &layer.b;
            inputs.push(h);
            if l + 1 < n_layers {
                z.mapv_inplace(|v| v.max(0.0));
            }
            h = z;
        }
        Ok((
            h,
            BatchCache {
                inputs,
                dropout_mask,
                shapes: layer_shapes(self),
            },
        ))
    }

    /// Exact reverse-mode gradients of the forward computation, including the
    /// dropout mask recorded in the cache. Returns parameter gradients plus
    /// the gradient with respect to the input rows.
    pub fn backprop_batch(
        &self,
        cache: &BatchCache,
        upstream: &Array2<f64>,
    ) -> Result<(MlpGrads, Array2<f64>)> {
        if cache.shapes != layer_shapes(self) {
            return Err(Error::StaleCache(
                "cache was built by a differently shaped network".into(),
            ));
        }
        let n_layers = self.layers.len();
        let mut grads = MlpGrads::zeros_like(self);
        let mut d = upstream.clone();
        for l in (0..n_layers).rev() {
            let input = &cache.inputs[l];
            grads.layers[l].w = d.t().dot(input);
            grads.layers[l].b = d.sum_axis(Axis(0));
            let mut d_in = d.dot(&self.layers[l].w);
            if l == n_layers - 1 {
                if let Some(mask) = &cache.dropout_mask {
                    d_in *= mask;
                }
            }
            if l > 0 {
                // The stored input of layer l is the rectified output of
                // layer l-1, so its sign doubles as the ReLU derivative.
                d_in.zip_mut_with(input, |g, &v| {
                    if v <= 0.0 {
                        *g = 0.0;
                    }
                });
            }
            d = d_in;
        }
        Ok((grads, d))
    }

    /// Single-vector forward pass.
    pub fn forward(
        &self,
        x: &[f64],
        dropout: f64,
        rng: Option<&mut SeededRng>,
        train: bool,
    ) -> Result<(Vec<f64>, BatchCache)> {
        let row = Array2::from_shape_vec((1, x.len()), x.to_vec()).unwrap();
        let (out, cache) = self.forward_batch(&row, dropout, rng, train)?;
        Ok((out.row(0).to_vec(), cache))
    }

    /// Single-vector backprop matching [`Mlp::forward`].
    pub fn backprop(&self, cache: &BatchCache, upstream: &[f64]) -> Result<(MlpGrads, Vec<f64>)> {
        let row = Array2::from_shape_vec((1, upstream.len()), upstream.to_vec()).unwrap();
        let (grads, d) = self.backprop_batch(cache, &row)?;
        Ok((grads, d.row(0).to_vec()))
    }
}

/// Row-wise numerically stable softmax.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Mean softmax cross-entropy over rows and its gradient w.r.t. the logits.
pub fn cross_entropy(logits: &Array2<f64>, targets: &[usize]) -> (f64, Array2<f64>) {
    let n = logits.nrows();
    assert_eq!(n, targets.len());
    let probs = softmax_rows(logits);
    let mut loss = 0.0;
    for (i, &t) in targets.iter().enumerate() {
        loss -= probs[[i, t]].max(1e-300).ln();
    }
    loss /= n as f64;
    let mut grad = probs;
    for (i, &t) in targets.iter().enumerate() {
        grad[[i, t]] -= 1.0;
    }
    grad.mapv_inplace(|v| v / n as f64);
    (loss, grad)
}

/// Adaptive-moment optimizer hyperparameters.
#[derive(Clone, Copy, Debug)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamParams {
    pub fn with_lr(lr: f64) -> Self {
        AdamParams {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment accumulators matching a set of named networks.
pub struct AdamState {
    pub hp: AdamParams,
    step: usize,
    labels: Vec<String>,
    m: Vec<MlpGrads>,
    v: Vec<MlpGrads>,
}

impl AdamState {
    pub fn new(hp: AdamParams, nets: &[(&str, &Mlp)]) -> Self {
        AdamState {
            hp,
            step: 0,
            labels: nets.iter().map(|(n, _)| n.to_string()).collect(),
            m: nets.iter().map(|(_, p)| MlpGrads::zeros_like(p)).collect(),
            v: nets.iter().map(|(_, p)| MlpGrads::zeros_like(p)).collect(),
        }
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    /// One bias-corrected update. Rejects non-finite gradients, naming the
    /// offending parameter tensor.
    pub fn step(&mut self, nets: &mut [&mut Mlp], grads: &[&MlpGrads]) -> Result<()> {
        assert_eq!(nets.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        for (i, g) in grads.iter().enumerate() {
            for (l, layer) in g.layers.iter().enumerate() {
                if layer.w.iter().any(|x| !x.is_finite())
                    || layer.b.iter().any(|x| !x.is_finite())
                {
                    return Err(Error::NonFiniteGradient {
                        path: format!("{}.layers[{l}]", self.labels[i]),
                    });
                }
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.hp.beta1.powi(t);
        let bc2 = 1.0 - self.hp.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.hp.beta1, self.hp.beta2, self.hp.lr, self.hp.eps);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
        };
        for ((net, g), (m, v)) in nets
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for l in 0..net.layers.len() {
                for ((p, m), (v, &g)) in net.layers[l]
                    .w
                    .iter_mut()
                    .zip(m.layers[l].w.iter_mut())
                    .zip(v.layers[l].w.iter_mut().zip(g.layers[l].w.iter()))
                {
                    update(p, m, v, g);
                }
                for ((p, m), (v, &g)) in net.layers[l]
                    .b
                    .iter_mut()
                    .zip(m.layers[l].b.iter_mut())
                    .zip(v.layers[l].b.iter_mut().zip(g.layers[l].b.iter()))
                {
                    update(p, m, v, g);
                }
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointShape {
    name: String,
    layers: Vec<[usize; 2]>,
}

fn shape_path(path: &Path) -> PathBuf {
    path.with_extension("shape.json")
}

/// Write named networks as a flat little-endian f64 binary plus a JSON shape
/// manifest (w row-major then b, per layer, per network).
pub fn save_checkpoint<P: AsRef<Path>>(path: P, nets: &[(&str, &Mlp)]) -> Result<()> {
    let path = path.as_ref();
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let mut shapes = Vec::new();
    for (name, net) in nets {
        shapes.push(CheckpointShape {
            name: name.to_string(),
            layers: net
                .layers
                .iter()
                .map(|l| [l.w.nrows(), l.w.ncols()])
                .collect(),
        });
        for layer in &net.layers {
            for &x in layer.w.iter() {
                out.write_all(&x.to_le_bytes())?;
            }
            for &x in layer.b.iter() {
                out.write_all(&x.to_le_bytes())?;
            }
        }
    }
    out.flush()?;
    std::fs::write(shape_path(path), serde_json::to_string_pretty(&shapes)?)?;
    Ok(())
}

/// Read back a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint<P: AsRef<Path>>(path: P) -> Result<Vec<(String, Mlp)>> {
    let path = path.as_ref();
    let shapes: Vec<CheckpointShape> = serde_json::from_slice(&std::fs::read(shape_path(path))?)?;
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut read_f64 = |count: usize| -> Result<Vec<f64>> {
        let mut buf = vec![0u8; count * 8];
        file.read_exact(&mut buf)?;
        Ok(buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    };
    let mut nets = Vec::new();
    for shape in shapes {
        let mut layers = Vec::new();
        for [rows, cols] in shape.layers {
            let w = Array2::from_shape_vec((rows, cols), read_f64(rows * cols)?).unwrap();
            let b = Array1::from_vec(read_f64(rows)?);
            layers.push(DenseLayer { w, b });
        }
        nets.push((shape.name, Mlp { layers }));
    }
    Ok(nets)
}

/// Central finite-difference gradients of `loss` with respect to every
/// parameter of `net`; the independent oracle for backprop tests.
pub fn numeric_gradients<F>(net: &mut Mlp, mut loss: F, h: f64) -> MlpGrads
where
    F: FnMut(&Mlp) -> f64,
{
    let mut grads = MlpGrads::zeros_like(net);
    for l in 0..net.layers.len() {
        for idx in 0..net.layers[l].w.len() {
            let orig = net.layers[l].w.as_slice_mut().unwrap()[idx];
            net.layers[l].w.as_slice_mut().unwrap()[idx] = orig + h;
            let up = loss(net);
            net.layers[l].w.as_slice_mut().unwrap()[idx] = orig - h;
            let down = loss(net);
            net.layers[l].w.as_slice_mut().unwrap()[idx] = orig;
            grads.layers[l].w.as_slice_mut().unwrap()[idx] = (up - down) / (2.0 * h);
        }
        for idx in 0..net.layers[l].b.len() {
            let orig = net.layers[l].b[idx];
            net.layers[l].b[idx] = orig + h;
            let up = loss(net);
            net.layers[l].b[idx] = orig - h;
            let down = loss(net);
            net.layers[l].b[idx] = orig;
            grads.layers[l].b[idx] = (up - down) / (2.0 * h);
        }
    }
    grads
}

/// Largest relative disagreement between analytic and numeric gradients.
pub fn max_relative_error(analytic: &MlpGrads, numeric: &MlpGrads) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, n) in analytic.layers.iter().zip(&numeric.layers) {
        for (&x, &y) in a
            .w
            .iter()
            .chain(a.b.iter())
            .zip(n.w.iter().chain(n.b.iter()))
        {
            let denom = x.abs().max(y.abs()).max(1e-6);
            worst = worst.max((x - y).abs() / denom);
        }
    }
    worst
}
