//! Physics-informed training for the one-dimensional Poisson problem
//! `u'' = -pi^2 sin(pi x)` on `[-1, 1]` with zero boundary values.
//!
//! Training runs on a batched residual network whose forward pass carries
//! value, first and second input derivatives through every layer, with a
//! hand-written reverse pass. [`ResNet::to_network`] flattens the skip
//! connections into identity-carrying neurons so the trained model can be
//! inspected with the generic network tools.

use std::f64::consts::PI;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{eval_jet2, Jet2, KinkStats};
use crate::metrics::JetSource;
use crate::net::{Activation, Layer, Network};
use crate::optim::{Adam, AdamConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResNetMode {
    /// ReLU everywhere except the trailing squared blocks.
    Dsrn,
    AllRelu2,
    AllRelu,
}

impl std::str::FromStr for ResNetMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<ResNetMode> {
        match s {
            "dsrn" => Ok(ResNetMode::Dsrn),
            "all_relu2" | "relu2" => Ok(ResNetMode::AllRelu2),
            "all_relu" | "relu" => Ok(ResNetMode::AllRelu),
            other => Err(Error::Config(format!("unknown network mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResNetSpec {
    pub blocks: usize,
    pub layers_per_block: usize,
    pub width: usize,
    pub mode: ResNetMode,
    /// Number of trailing blocks using the squared ReLU in `Dsrn` mode.
    pub squared_blocks: usize,
}

impl ResNetSpec {
    pub fn new(mode: ResNetMode, width: usize) -> ResNetSpec {
        ResNetSpec {
            blocks: 6,
            layers_per_block: 2,
            width,
            mode,
            squared_blocks: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.layers_per_block == 0 {
            return Err(Error::Config("width and layers per block must be positive".into()));
        }
        if self.squared_blocks > self.blocks {
            return Err(Error::Config("more squared blocks than blocks".into()));
        }
        Ok(())
    }

    /// Hidden layers: the lifting layer followed by every block layer.
    pub fn hidden_depth(&self) -> usize {
        1 + self.blocks * self.layers_per_block
    }

    /// Activation of every hidden layer.
    pub fn schedule(&self) -> Vec<Activation> {
        let squared_from = match self.mode {
            ResNetMode::Dsrn => 1 + (self.blocks - self.squared_blocks) * self.layers_per_block,
            ResNetMode::AllRelu2 => 0,
            ResNetMode::AllRelu => usize::MAX,
        };
        (0..self.hidden_depth())
            .map(|i| {
                if i >= squared_from {
                    Activation::ReluSquared
                } else {
                    Activation::Relu
                }
            })
            .collect()
    }

    /// `(out, in)` of every affine map, output layer last.
    fn shapes(&self) -> Vec<(usize, usize)> {
        let w = self.width;
        let mut s = vec![(w, 1)];
        s.extend(std::iter::repeat_n((w, w), self.blocks * self.layers_per_block));
        s.push((1, w));
        s
    }
}

/// Value, first and second input derivative of a batch of layer outputs,
/// each `batch x width`.
#[derive(Clone, Debug)]
struct Jets {
    v: Array2<f64>,
    d1: Array2<f64>,
    d2: Array2<f64>,
}

impl Jets {
    fn input(xs: &[f64]) -> Jets {
        let n = xs.len();
        Jets {
            v: Array2::from_shape_vec((n, 1), xs.to_vec()).expect("column"),
            d1: Array2::ones((n, 1)),
            d2: Array2::zeros((n, 1)),
        }
    }

    fn affine(&self, w: ArrayView2<f64>, b: ArrayView1<f64>) -> Jets {
        let mut v = self.v.dot(&w.t());
        v += &b;
        Jets {
            v,
            d1: self.d1.dot(&w.t()),
            d2: self.d2.dot(&w.t()),
        }
    }

    fn activate(&self, act: Activation) -> Jets {
        let mut out = Jets {
            v: Array2::zeros(self.v.raw_dim()),
            d1: Array2::zeros(self.v.raw_dim()),
            d2: Array2::zeros(self.v.raw_dim()),
        };
        let zip = Zip::from(&mut out.v)
            .and(&mut out.d1)
            .and(&mut out.d2)
            .and(&self.v)
            .and(&self.d1)
            .and(&self.d2);
        match act {
            Activation::Relu => zip.for_each(|v, d1, d2, &a0, &a1, &a2| {
                if a0 > 0.0 {
                    (*v, *d1, *d2) = (a0, a1, a2);
                }
            }),
            Activation::ReluSquared => zip.for_each(|v, d1, d2, &a0, &a1, &a2| {
                if a0 > 0.0 {
                    (*v, *d1, *d2) = (a0 * a0, 2.0 * a0 * a1, 2.0 * a1 * a1 + 2.0 * a0 * a2);
                }
            }),
            Activation::Linear => {
                out = self.clone();
            }
        }
        out
    }

    /// Turns output adjoints `g` into pre-activation adjoints in place.
    fn backprop_activation(pre: &Jets, act: Activation, g: &mut Jets) {
        let zip = Zip::from(&mut g.v)
            .and(&mut g.d1)
            .and(&mut g.d2)
            .and(&pre.v)
            .and(&pre.d1)
            .and(&pre.d2);
        match act {
            Activation::Relu => zip.for_each(|g0, g1, g2, &a0, _, _| {
                if a0 <= 0.0 {
                    (*g0, *g1, *g2) = (0.0, 0.0, 0.0);
                }
            }),
            Activation::ReluSquared => zip.for_each(|g0, g1, g2, &a0, &a1, &a2| {
                if a0 > 0.0 {
                    let (h0, h1, h2) = (*g0, *g1, *g2);
                    *g0 = 2.0 * a0 * h0 + 2.0 * a1 * h1 + 2.0 * a2 * h2;
                    *g1 = 2.0 * a0 * h1 + 4.0 * a1 * h2;
                    *g2 = 2.0 * a0 * h2;
                } else {
                    (*g0, *g1, *g2) = (0.0, 0.0, 0.0);
                }
            }),
            Activation::Linear => {}
        }
    }
}

/// Inputs and pre-activations recorded by the forward pass.
struct Tape {
    inputs: Vec<Jets>,
    pre: Vec<Jets>,
    out: Jets,
}

/// Residual network `R -> R` with parameters stored in one flat vector,
/// every affine map as a row-major weight matrix followed by its bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResNet {
    pub spec: ResNetSpec,
    pub params: Vec<f64>,
}

impl ResNet {
    /// Uniform initialization on `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` with two
    /// adjustments. The last layer of every block is scaled down by the
    /// number of blocks so the residual sum stays of unit size at the start.
    /// Lifting biases are drawn as `|w| + |b| / 2`, which keeps every lifting
    /// neuron active on `[-1, 1]`.
    pub fn init(spec: ResNetSpec, seed: u64) -> Result<ResNet> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        let lpb = spec.layers_per_block;
        for (idx, (out, inp)) in spec.shapes().into_iter().enumerate() {
            let block_end = idx > 0 && idx <= spec.blocks * lpb && idx % lpb == 0;
            let mut a = (1.0 / inp as f64).sqrt();
            if block_end {
                a /= spec.blocks as f64;
            }
            let dist = Uniform::new_inclusive(-a, a).map_err(|e| Error::Internal(e.to_string()))?;
            let start = params.len();
            params.extend((0..out * inp).map(|_| dist.sample(&mut rng)));
            if idx == 0 {
                let ws = params[start..].to_vec();
                params.extend(ws.iter().map(|w| w.abs() + 0.5 * dist.sample(&mut rng).abs()));
            } else {
                params.extend((0..out).map(|_| dist.sample(&mut rng)));
            }
        }
        Ok(ResNet { spec, params })
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn offsets(&self) -> Vec<(usize, usize, usize)> {
        let mut off = 0;
        self.spec
            .shapes()
            .into_iter()
            .map(|(o, i)| {
                let r = (off, o, i);
                off += o * i + o;
                r
            })
            .collect()
    }

    fn layer<'a>(p: &'a [f64], (off, o, i): (usize, usize, usize)) -> (ArrayView2<'a, f64>, ArrayView1<'a, f64>) {
        let w = ArrayView2::from_shape((o, i), &p[off..off + o * i]).expect("layer shape");
        let b = ArrayView1::from(&p[off + o * i..off + o * i + o]);
        (w, b)
    }

    fn forward(&self, xs: &[f64]) -> Tape {
        let offs = self.offsets();
        let sched = self.spec.schedule();
        let mut inputs = Vec::with_capacity(offs.len());
        let mut pre = Vec::with_capacity(offs.len());
        let mut h = Jets::input(xs);
        let mut layer_idx = 0;
        let mut step = |x: Jets, act: Activation, inputs: &mut Vec<Jets>, pre: &mut Vec<Jets>| {
            let (w, b) = Self::layer(&self.params, offs[layer_idx]);
            let a = x.affine(w, b);
            let s = a.activate(act);
            inputs.push(x);
            pre.push(a);
            layer_idx += 1;
            s
        };
        h = step(h, sched[0], &mut inputs, &mut pre);
        let lpb = self.spec.layers_per_block;
        for blk in 0..self.spec.blocks {
            let mut z = h.clone();
            for l in 0..lpb {
                z = step(z, sched[1 + blk * lpb + l], &mut inputs, &mut pre);
            }
            h.v += &z.v;
            h.d1 += &z.d1;
            h.d2 += &z.d2;
        }
        let (w, b) = Self::layer(&self.params, offs[layer_idx]);
        let out = h.affine(w, b);
        inputs.push(h);
        Tape { inputs, pre, out }
    }

    /// `(u, u', u'')` at each point.
    pub fn eval_batch(&self, xs: &[f64]) -> Vec<(f64, f64, f64)> {
        let t = self.forward(xs);
        (0..xs.len())
            .map(|r| (t.out.v[[r, 0]], t.out.d1[[r, 0]], t.out.d2[[r, 0]]))
            .collect()
    }

    /// Accumulates parameter gradients for output adjoints `(g0, g1, g2)`
    /// with respect to `(u, u', u'')` of every batch row.
    fn backward(&self, tape: &Tape, g: Jets, grad: &mut [f64]) {
        let offs = self.offsets();
        let sched = self.spec.schedule();
        let accumulate = |ga: &Jets, x: &Jets, (off, o, i): (usize, usize, usize), grad: &mut [f64]| {
            let (gw, gb) = grad[off..off + o * i + o].split_at_mut(o * i);
            let mut gw = ArrayViewMut2::from_shape((o, i), gw).expect("layer shape");
            general_mat_mul(1.0, &ga.v.t(), &x.v, 1.0, &mut gw);
            general_mat_mul(1.0, &ga.d1.t(), &x.d1, 1.0, &mut gw);
            general_mat_mul(1.0, &ga.d2.t(), &x.d2, 1.0, &mut gw);
            let mut gb = ArrayViewMut1::from(gb);
            gb += &ga.v.sum_axis(Axis(0));
        };
        let pull = |ga: &Jets, w: ArrayView2<f64>| Jets {
            v: ga.v.dot(&w),
            d1: ga.d1.dot(&w),
            d2: ga.d2.dot(&w),
        };
        let last = offs.len() - 1;
        accumulate(&g, &tape.inputs[last], offs[last], grad);
        let mut gh = pull(&g, Self::layer(&self.params, offs[last]).0);
        let lpb = self.spec.layers_per_block;
        for blk in (0..self.spec.blocks).rev() {
            let mut gz = gh.clone();
            for l in (0..lpb).rev() {
                let idx = 1 + blk * lpb + l;
                Jets::backprop_activation(&tape.pre[idx], sched[idx], &mut gz);
                accumulate(&gz, &tape.inputs[idx], offs[idx], grad);
                gz = pull(&gz, Self::layer(&self.params, offs[idx]).0);
            }
            gh.v += &gz.v;
            gh.d1 += &gz.d1;
            gh.d2 += &gz.d2;
        }
        Jets::backprop_activation(&tape.pre[0], sched[0], &mut gh);
        accumulate(&gh, &tape.inputs[0], offs[0], grad);
    }

    /// PINN loss on the collocation points and its parameter gradient.
    pub fn loss_and_grad(&self, problem: &PoissonProblem, points: &[f64], beta: f64) -> Result<(LossReport, Vec<f64>)> {
        let n = points.len();
        let mut xs = points.to_vec();
        xs.extend([problem.lo, problem.hi]);
        let tape = self.forward(&xs);
        let b = xs.len();
        let mut g = Jets {
            v: Array2::zeros((b, 1)),
            d1: Array2::zeros((b, 1)),
            d2: Array2::zeros((b, 1)),
        };
        let mut residual = 0.0;
        for (r, &x) in points.iter().enumerate() {
            let e = tape.out.d2[[r, 0]] - problem.source(x);
            residual += e * e;
            g.d2[[r, 0]] = 2.0 * e / n as f64;
        }
        residual /= n as f64;
        let mut boundary = 0.0;
        for (r, bc) in [(n, problem.left), (n + 1, problem.right)] {
            let e = tape.out.v[[r, 0]] - bc;
            boundary += e * e;
            g.v[[r, 0]] = beta * e;
        }
        let report = LossReport::new(residual, beta * boundary / 2.0)?;
        let mut grad = vec![0.0; self.params.len()];
        self.backward(&tape, g, &mut grad);
        Ok((report, grad))
    }

    /// The same function as a plain layered network. Skip connections
    /// become identity-carrying neurons in every block layer.
    pub fn to_network(&self) -> Result<Network> {
        let offs = self.offsets();
        let sched = self.spec.schedule();
        let dense = |idx: usize| {
            let (w, b) = Self::layer(&self.params, offs[idx]);
            (w.to_owned(), b.to_vec())
        };
        // h as affine expressions in the previous layer's outputs
        type Expr = (Vec<f64>, f64);
        let mut layers = Vec::new();
        let (w0, b0) = dense(0);
        let rows = (0..w0.nrows()).map(|r| vec![(0, w0[[r, 0]])]).collect();
        layers.push(Layer::sparse(1, rows, b0, sched[0])?);
        let width = self.spec.width;
        let mut h: Vec<Expr> = (0..width)
            .map(|j| {
                let mut e = vec![0.0; width];
                e[j] = 1.0;
                (e, 0.0)
            })
            .collect();
        let apply = |w: &Array2<f64>, b: &[f64], h: &[Expr], in_dim: usize| -> Vec<Expr> {
            (0..w.nrows())
                .map(|r| {
                    let mut e = vec![0.0; in_dim];
                    let mut c = b[r];
                    for (k, (hk, ck)) in h.iter().enumerate() {
                        let wk = w[[r, k]];
                        if wk != 0.0 {
                            for (ej, hj) in e.iter_mut().zip(hk) {
                                *ej += wk * hj;
                            }
                            c += wk * ck;
                        }
                    }
                    (e, c)
                })
                .collect()
        };
        let lpb = self.spec.layers_per_block;
        for blk in 0..self.spec.blocks {
            // z holds the block branch, carried h stays beside it
            let mut z: Vec<Expr> = h.clone();
            let mut carried = h.clone();
            for l in 0..lpb {
                let idx = 1 + blk * lpb + l;
                let act = sched[idx];
                let in_dim = layers.last().map(Layer::out_dim).unwrap_or(1);
                let (w, b) = dense(idx);
                let branch = apply(&w, &b, &z, in_dim);
                let (carry_rows, decode) = carry(act, &carried);
                let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
                let mut bias = Vec::new();
                for (e, c) in branch.iter().chain(&carry_rows) {
                    rows.push(
                        e.iter()
                            .enumerate()
                            .filter(|(_, v)| **v != 0.0)
                            .map(|(j, v)| (j, *v))
                            .collect(),
                    );
                    bias.push(*c);
                }
                let out_dim = rows.len();
                layers.push(Layer::sparse(in_dim, rows, bias, act)?);
                z = (0..width)
                    .map(|j| {
                        let mut e = vec![0.0; out_dim];
                        e[j] = 1.0;
                        (e, 0.0)
                    })
                    .collect();
                carried = decode
                    .into_iter()
                    .map(|(terms, c)| {
                        let mut e = vec![0.0; out_dim];
                        for (j, v) in terms {
                            e[width + j] += v;
                        }
                        (e, c)
                    })
                    .collect();
            }
            h = z
                .into_iter()
                .zip(carried)
                .map(|((mut e, c), (e2, c2))| {
                    for (a, b) in e.iter_mut().zip(e2) {
                        *a += b;
                    }
                    (e, c + c2)
                })
                .collect();
        }
        let (wo, bo) = dense(offs.len() - 1);
        let in_dim = layers.last().map(Layer::out_dim).unwrap_or(1);
        let out = apply(&wo, &bo, &h, in_dim);
        let rows = out
            .iter()
            .map(|(e, _)| {
                e.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, v)| (j, *v))
                    .collect()
            })
            .collect();
        layers.push(Layer::sparse(
            in_dim,
            rows,
            out.iter().map(|(_, c)| *c).collect(),
            Activation::Linear,
        )?);
        Network::new(1, layers)
    }
}

/// Neurons reproducing `v` through one layer of `act`, and the decoding of
/// each `v_i` as a combination of those neurons (indices relative to the
/// first carry neuron) plus a constant.
#[allow(clippy::type_complexity)]
fn carry(act: Activation, v: &[(Vec<f64>, f64)]) -> (Vec<(Vec<f64>, f64)>, Vec<(Vec<(usize, f64)>, f64)>) {
    let neg =
        |(e, c): &(Vec<f64>, f64), shift: f64| -> (Vec<f64>, f64) { (e.iter().map(|x| -x).collect(), -c + shift) };
    let pos = |(e, c): &(Vec<f64>, f64), shift: f64| -> (Vec<f64>, f64) { (e.clone(), c + shift) };
    let mut rows = Vec::new();
    let mut decode = Vec::new();
    for (i, x) in v.iter().enumerate() {
        match act {
            Activation::Relu => {
                rows.push(pos(x, 0.0));
                rows.push(neg(x, 0.0));
                decode.push((vec![(2 * i, 1.0), (2 * i + 1, -1.0)], 0.0));
            }
            Activation::ReluSquared => {
                rows.push(pos(x, 1.0));
                rows.push(neg(x, -1.0));
                rows.push(pos(x, -1.0));
                rows.push(neg(x, 1.0));
                decode.push((
                    vec![(4 * i, 0.25), (4 * i + 1, 0.25), (4 * i + 2, -0.25), (4 * i + 3, -0.25)],
                    0.0,
                ));
            }
            Activation::Linear => {
                rows.push(pos(x, 0.0));
                decode.push((vec![(i, 1.0)], 0.0));
            }
        }
    }
    (rows, decode)
}

impl JetSource for ResNet {
    fn dim(&self) -> usize {
        1
    }

    fn jet(&self, x: &[f64], _: &mut KinkStats) -> Result<Jet2> {
        if x.len() != 1 {
            return Err(Error::Dimension("residual network takes scalar input".into()));
        }
        let (u, du, ddu) = self.eval_batch(x)[0];
        Ok(Jet2 {
            value: u,
            grad: vec![du],
            hess: vec![ddu],
        })
    }
}

/// `u'' = f` on `[lo, hi]` with Dirichlet data, here `f = -pi^2 sin(pi x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonProblem {
    pub lo: f64,
    pub hi: f64,
    pub left: f64,
    pub right: f64,
}

impl Default for PoissonProblem {
    fn default() -> PoissonProblem {
        PoissonProblem {
            lo: -1.0,
            hi: 1.0,
            left: 0.0,
            right: 0.0,
        }
    }
}

impl PoissonProblem {
    pub fn source(&self, x: f64) -> f64 {
        -PI * PI * (PI * x).sin()
    }

    pub fn exact(&self, x: f64) -> f64 {
        (PI * x).sin()
    }

    pub fn exact_derivative(&self, x: f64) -> f64 {
        PI * (PI * x).cos()
    }

    /// `n` equispaced interior midpoints.
    pub fn collocation(&self, n: usize) -> Vec<f64> {
        let h = (self.hi - self.lo) / n as f64;
        (0..n).map(|i| self.lo + (i as f64 + 0.5) * h).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub total: f64,
    pub residual: f64,
    pub boundary: f64,
}

impl LossReport {
    fn new(residual: f64, boundary: f64) -> Result<LossReport> {
        let total = residual + boundary;
        if !total.is_finite() {
            return Err(Error::Overflow(format!("loss is {total}")));
        }
        Ok(LossReport {
            total,
            residual,
            boundary,
        })
    }
}

/// Mean squared residual over `points` plus `beta (u(lo)^2 + u(hi)^2) / 2`.
pub fn pinn_loss(net: &impl JetSource, problem: &PoissonProblem, points: &[f64], beta: f64) -> Result<LossReport> {
    let mut stats = KinkStats::default();
    let mut residual = 0.0;
    for &x in points {
        let j = net.jet(&[x], &mut stats)?;
        let e = j.hess[0] - problem.source(x);
        residual += e * e;
    }
    residual /= points.len().max(1) as f64;
    let mut boundary = 0.0;
    for (x, bc) in [(problem.lo, problem.left), (problem.hi, problem.right)] {
        let e = net.jet(&[x], &mut stats)?.value - bc;
        boundary += e * e;
    }
    LossReport::new(residual, beta * boundary / 2.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub iterations: usize,
    pub collocation: usize,
    pub beta: f64,
    pub seed: u64,
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            adam: AdamConfig::default(),
            iterations: 5000,
            collocation: 256,
            beta: 100.0,
            seed: 0,
            log_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.adam.validate()?;
        if self.collocation == 0 || self.log_every == 0 || !(self.beta > 0.0) {
            return Err(Error::Config(
                "collocation, log interval and beta must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    pub model: ResNet,
    /// `(iteration, loss)` at every logging step, the first entry being
    /// the initial loss and the last the final loss.
    pub history: Vec<(usize, LossReport)>,
}

impl TrainResult {
    pub fn initial_loss(&self) -> f64 {
        self.history.first().map(|h| h.1.total).unwrap_or(f64::NAN)
    }

    pub fn final_loss(&self) -> f64 {
        self.history.last().map(|h| h.1.total).unwrap_or(f64::NAN)
    }
}

/// Loss value above which training is abandoned.
pub const DIVERGENCE_LIMIT: f64 = 1e8;

pub fn adam_train(model: &ResNet, problem: &PoissonProblem, config: &TrainConfig) -> Result<TrainResult> {
    config.validate()?;
    let points = problem.collocation(config.collocation);
    let mut model = model.clone();
    let mut opt = Adam::new(model.num_params(), config.adam);
    let mut history = Vec::new();
    for it in 0..=config.iterations {
        let (loss, grad) = model.loss_and_grad(problem, &points, config.beta)?;
        if loss.total > DIVERGENCE_LIMIT {
            return Err(Error::Divergence(format!(
                "loss {:.3e} at iteration {it} (residual {:.3e}, boundary {:.3e})",
                loss.total, loss.residual, loss.boundary
            )));
        }
        if it % config.log_every == 0 || it == config.iterations {
            history.push((it, loss));
        }
        if it < config.iterations {
            opt.step(&mut model.params, &grad);
        }
    }
    Ok(TrainResult { model, history })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionReport {
    pub max_err: f64,
    pub l2_err: f64,
    pub max_deriv_err: f64,
    pub l2_deriv_err: f64,
    /// Rows `(x, u, u_exact, du, du_exact)`.
    pub plot: Vec<[f64; 5]>,
}

/// Errors of `u` and `u'` against the exact solution on `n + 1` equispaced
/// points including the boundary.
pub fn evaluate_solution(net: &impl JetSource, problem: &PoissonProblem, n: usize) -> Result<SolutionReport> {
    let mut stats = KinkStats::default();
    let mut plot = Vec::with_capacity(n + 1);
    let (mut max_err, mut l2, mut max_d, mut l2_d) = (0.0f64, 0.0, 0.0f64, 0.0);
    let h = (problem.hi - problem.lo) / n.max(1) as f64;
    for i in 0..=n {
        let x = problem.lo + i as f64 * h;
        let j = net.jet(&[x], &mut stats)?;
        let (u, du) = (problem.exact(x), problem.exact_derivative(x));
        let (e, ed) = ((j.value - u).abs(), (j.grad[0] - du).abs());
        let w = if i == 0 || i == n { 0.5 * h } else { h };
        max_err = max_err.max(e);
        max_d = max_d.max(ed);
        l2 += w * e * e;
        l2_d += w * ed * ed;
        plot.push([x, j.value, u, j.grad[0], du]);
    }
    Ok(SolutionReport {
        max_err,
        l2_err: l2.sqrt(),
        max_deriv_err: max_d,
        l2_deriv_err: l2_d.sqrt(),
        plot,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub m: usize,
    pub r_s: f64,
    pub r_d: f64,
    pub gap: f64,
}

/// `|(f - phi)''|^2 + |f - phi|^2` at `x`.
fn risk_integrand(net: &impl JetSource, f: &impl JetSource, x: f64, stats: &mut KinkStats) -> Result<f64> {
    let a = net.jet(&[x], stats)?;
    let b = f.jet(&[x], stats)?;
    let dv = a.value - b.value;
    let dl = a.hess[0] - b.hess[0];
    Ok(dl * dl + dv * dv)
}

/// Empirical risk on `m` i.i.d. uniform points of `[lo, hi]` against the
/// population risk from a midpoint rule with `10 m` nodes.
pub fn empirical_risks(
    net: &impl JetSource,
    f: &impl JetSource,
    (lo, hi): (f64, f64),
    m: usize,
    seed: u64,
) -> Result<RiskReport> {
    if m == 0 || !(hi > lo) {
        return Err(Error::Config("need a nonempty sample on a proper interval".into()));
    }
    let mut stats = KinkStats::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new(lo, hi).map_err(|e| Error::Internal(e.to_string()))?;
    let mut r_s = 0.0;
    for _ in 0..m {
        r_s += risk_integrand(net, f, dist.sample(&mut rng), &mut stats)?;
    }
    r_s /= m as f64;
    let dense = 10 * m;
    let h = (hi - lo) / dense as f64;
    let mut r_d = 0.0;
    for i in 0..dense {
        r_d += risk_integrand(net, f, lo + (i as f64 + 0.5) * h, &mut stats)?;
    }
    r_d /= dense as f64;
    Ok(RiskReport {
        m,
        r_s,
        r_d,
        gap: (r_s - r_d).abs(),
    })
}

/// Jet of the exact solution, for oracle checks.
pub fn exact_solution(problem: PoissonProblem) -> crate::metrics::FnSource<impl Fn(&[f64]) -> Jet2> {
    crate::metrics::FnSource {
        d: 1,
        f: move |x: &[f64]| Jet2 {
            value: problem.exact(x[0]),
            grad: vec![problem.exact_derivative(x[0])],
            hess: vec![problem.source(x[0])],
        },
    }
}

/// Value and derivative jets of a plain network at scalar points.
pub fn network_jets(net: &Network, xs: &[f64]) -> Result<Vec<Jet2>> {
    xs.iter().map(|&x| eval_jet2(net, &[x])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::validate_dsrn;

    fn tiny(mode: ResNetMode) -> ResNet {
        let spec = ResNetSpec {
            blocks: 2,
            layers_per_block: 2,
            width: 3,
            mode,
            squared_blocks: 1,
        };
        ResNet::init(spec, 5).unwrap()
    }

    #[test]
    fn flattening_preserves_jets() {
        for mode in [ResNetMode::Dsrn, ResNetMode::AllRelu2, ResNetMode::AllRelu] {
            let r = tiny(mode);
            let net = r.to_network().unwrap();
            assert_eq!(net.depth(), 1 + 2 * 2);
            for x in [-0.83, -0.2, 0.37, 0.91] {
                let a = r.eval_batch(&[x])[0];
                let b = eval_jet2(&net, &[x]).unwrap();
                assert!((a.0 - b.value).abs() < 1e-12);
                assert!((a.1 - b.grad[0]).abs() < 1e-12);
                assert!((a.2 - b.hess[0]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn default_dsrn_is_valid() {
        let r = ResNet::init(ResNetSpec::new(ResNetMode::Dsrn, 4), 1).unwrap();
        let net = r.to_network().unwrap();
        assert_eq!(net.layers().len(), 14);
        let p = validate_dsrn(&net, 2.0).unwrap();
        assert_eq!((p.relu_depth, p.relu2_depth), (9, 4));
    }

    #[test]
    fn gradient_matches_differences() {
        let problem = PoissonProblem::default();
        let pts = problem.collocation(8);
        for mode in [ResNetMode::Dsrn, ResNetMode::AllRelu2] {
            let r = tiny(mode);
            let (_, g) = r.loss_and_grad(&problem, &pts, 10.0).unwrap();
            let h = 1e-6;
            for k in 0..r.num_params() {
                let mut p = r.clone();
                p.params[k] += h;
                let up = p.loss_and_grad(&problem, &pts, 10.0).unwrap().0.total;
                p.params[k] -= 2.0 * h;
                let dn = p.loss_and_grad(&problem, &pts, 10.0).unwrap().0.total;
                let fd = (up - dn) / (2.0 * h);
                assert!(
                    (fd - g[k]).abs() <= 1e-5 * fd.abs().max(1.0),
                    "{mode:?} param {k}: {fd} vs {}",
                    g[k]
                );
            }
        }
    }

    #[test]
    fn loss_oracles() {
        let problem = PoissonProblem::default();
        let pts = problem.collocation(64);
        let exact = exact_solution(problem);
        let l = pinn_loss(&exact, &problem, &pts, 100.0).unwrap();
        assert!(l.total < 1e-20);
        let zero = Network::constant(1, vec![0.0]).unwrap();
        let l = pinn_loss(&zero, &problem, &pts, 100.0).unwrap();
        let want = pts.iter().map(|x| (PI.powi(4)) * (PI * x).sin().powi(2)).sum::<f64>() / 64.0;
        assert!((l.residual - want).abs() < 1e-10 * want);
        assert_eq!(l.boundary, 0.0);
        let rep = evaluate_solution(&zero, &problem, 200).unwrap();
        assert!((rep.max_err - 1.0).abs() < 1e-12);
    }

    #[test]
    fn risks_of_exact_fit_vanish() {
        let f = crate::target::TargetFunction::sin_pi(1);
        let r = empirical_risks(&f, &f, (-1.0, 1.0), 50, 3).unwrap();
        assert_eq!((r.r_s, r.r_d), (0.0, 0.0));
    }
}
