//! Second-order forward jets and reverse-mode parameter gradients.
//!
//! Every neuron carries `(value, gradient, Hessian)` with respect to the
//! network input. Affine maps act componentwise on jets; the activations use
//! the conventions `relu'(0) = 0` and `relu2''(0) = 0`.
//!
//! Parameter gradients run the jet propagation forward, record the
//! pre-activation jets, and pull an adjoint jet back through every layer.

use crate::error::{Error, Result};
use crate::net::{Activation, Layer, Network};

/// Value, gradient and Hessian of a scalar function at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub grad: Vec<f64>,
    /// Row-major `d x d`.
    pub hess: Vec<f64>,
}

impl Jet2 {
    pub fn zero(d: usize) -> Jet2 {
        Jet2 {
            value: 0.0,
            grad: vec![0.0; d],
            hess: vec![0.0; d * d],
        }
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    #[inline]
    pub fn h(&self, i: usize, j: usize) -> f64 {
        self.hess[i * self.dim() + j]
    }

    pub fn laplacian(&self) -> f64 {
        (0..self.dim()).map(|i| self.h(i, i)).sum()
    }

    /// `D^alpha` for `|alpha| <= 2`.
    pub fn derivative(&self, alpha: &[usize]) -> Option<f64> {
        let nz: Vec<usize> = alpha
            .iter()
            .enumerate()
            .flat_map(|(j, &a)| std::iter::repeat_n(j, a))
            .collect();
        match nz.as_slice() {
            [] => Some(self.value),
            [i] => Some(self.grad[*i]),
            [i, j] => Some(self.h(*i, *j)),
            _ => None,
        }
    }

    pub fn max_asymmetry(&self) -> f64 {
        let d = self.dim();
        let mut m: f64 = 0.0;
        for i in 0..d {
            for j in 0..i {
                m = m.max((self.h(i, j) - self.h(j, i)).abs());
            }
        }
        m
    }

    fn from_slice(s: &[f64], d: usize) -> Jet2 {
        Jet2 {
            value: s[0],
            grad: s[1..1 + d].to_vec(),
            hess: s[1 + d..].to_vec(),
        }
    }

    fn write_to(&self, out: &mut [f64]) {
        let d = self.dim();
        out[0] = self.value;
        out[1..1 + d].copy_from_slice(&self.grad);
        out[1 + d..].copy_from_slice(&self.hess);
    }
}

/// Gradient of a scalar functional with respect to every parameter. Weight
/// gradients follow the sparsity pattern of [`Layer::values`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGradient {
    pub layers: Vec<LayerGradient>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ParamGradient {
    pub fn zeros_like(net: &Network) -> ParamGradient {
        ParamGradient {
            layers: net
                .layers()
                .iter()
                .map(|l| LayerGradient {
                    weights: vec![0.0; l.nnz()],
                    bias: vec![0.0; l.out_dim()],
                })
                .collect(),
        }
    }

    /// All entries in layer order, weights before biases.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.flatten().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[inline]
fn stride(d: usize) -> usize {
    1 + d + d * d
}

/// Counts how often a forward pass met a preactivation at a kink.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct KinkStats {
    pub evaluations: usize,
    pub kink_hits: usize,
}

const KINK_EPS: f64 = 1e-12;

struct Tape {
    /// Input jets of each layer (post-activation of the previous one).
    inputs: Vec<Vec<f64>>,
    /// Pre-activation jets of each layer.
    pre: Vec<Vec<f64>>,
}

fn affine_jets(layer: &Layer, a: &[f64], m: usize, z: &mut Vec<f64>) {
    z.clear();
    z.resize(layer.out_dim() * m, 0.0);
    for i in 0..layer.out_dim() {
        let zi = &mut z[i * m..(i + 1) * m];
        zi[0] = layer.bias()[i];
        let (c, v) = layer.row(i);
        for (&j, &w) in c.iter().zip(v) {
            let aj = &a[j * m..(j + 1) * m];
            for (o, x) in zi.iter_mut().zip(aj) {
                *o += w * x;
            }
        }
    }
}

fn activate_jets(act: Activation, z: &mut [f64], d: usize) {
    let m = stride(d);
    match act {
        Activation::Linear => {}
        Activation::Relu => {
            for zi in z.chunks_mut(m) {
                if zi[0] <= 0.0 {
                    zi.fill(0.0);
                }
            }
        }
        Activation::ReluSquared => {
            for zi in z.chunks_mut(m) {
                if zi[0] <= 0.0 {
                    zi.fill(0.0);
                    continue;
                }
                let r = zi[0];
                let (head, hess) = zi.split_at_mut(1 + d);
                for a in 0..d {
                    for b in 0..d {
                        hess[a * d + b] = 2.0 * head[1 + a] * head[1 + b] + 2.0 * r * hess[a * d + b];
                    }
                }
                for g in &mut head[1..] {
                    *g *= 2.0 * r;
                }
                head[0] = r * r;
            }
        }
    }
}

fn count_kinks(z: &[f64], d: usize) -> bool {
    z.chunks(stride(d))
        .any(|zi| zi[0].abs() < KINK_EPS && zi[1..1 + d].iter().any(|g| *g != 0.0))
}

fn forward(net: &Network, x: &[f64], mut tape: Option<&mut Tape>, kinks: Option<&mut bool>) -> Result<Vec<f64>> {
    let d = net.input_dim();
    if x.len() != d {
        return Err(Error::Dimension(format!(
            "input has length {} but network expects {d}",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow("non-finite input".into()));
    }
    let m = stride(d);
    let mut a = vec![0.0; d * m];
    for j in 0..d {
        a[j * m] = x[j];
        a[j * m + 1 + j] = 1.0;
    }
    let mut hit = false;
    let mut z = Vec::new();
    for (k, layer) in net.layers().iter().enumerate() {
        affine_jets(layer, &a, m, &mut z);
        if layer.activation() != Activation::Linear && kinks.is_some() {
            hit |= count_kinks(&z, d);
        }
        if let Some(t) = tape.as_deref_mut() {
            t.inputs.push(std::mem::take(&mut a));
            t.pre.push(z.clone());
        }
        activate_jets(layer.activation(), &mut z, d);
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Overflow(format!("non-finite jet in layer {k}")));
        }
        std::mem::swap(&mut a, &mut z);
    }
    if let Some(k) = kinks {
        *k = hit;
    }
    Ok(a)
}

/// Jets of every output of the network at `x`.
pub fn eval_jets(net: &Network, x: &[f64]) -> Result<Vec<Jet2>> {
    let d = net.input_dim();
    let out = forward(net, x, None, None)?;
    Ok(out.chunks(stride(d)).map(|c| Jet2::from_slice(c, d)).collect())
}

/// Jet of a scalar-output network at `x`.
pub fn eval_jet2(net: &Network, x: &[f64]) -> Result<Jet2> {
    let mut jets = eval_jets(net, x)?;
    if jets.len() != 1 {
        return Err(Error::Dimension(format!(
            "expected scalar output, network has {}",
            jets.len()
        )));
    }
    Ok(jets.pop().unwrap())
}

/// Like [`eval_jet2`], also updating kink statistics.
pub fn eval_jet2_counting(net: &Network, x: &[f64], stats: &mut KinkStats) -> Result<Jet2> {
    let d = net.input_dim();
    let mut hit = false;
    let out = forward(net, x, None, Some(&mut hit))?;
    if out.len() != stride(d) {
        return Err(Error::Dimension("expected scalar output".into()));
    }
    stats.evaluations += 1;
    stats.kink_hits += hit as usize;
    Ok(Jet2::from_slice(&out, d))
}

fn backward_activation(act: Activation, z: &[f64], abar: &mut [f64], d: usize) {
    let m = stride(d);
    match act {
        Activation::Linear => {}
        Activation::Relu => {
            for (zi, bi) in z.chunks(m).zip(abar.chunks_mut(m)) {
                if zi[0] <= 0.0 {
                    bi.fill(0.0);
                }
            }
        }
        Activation::ReluSquared => {
            for (zi, bi) in z.chunks(m).zip(abar.chunks_mut(m)) {
                if zi[0] <= 0.0 {
                    bi.fill(0.0);
                    continue;
                }
                let r = zi[0];
                let zg = &zi[1..1 + d];
                let zh = &zi[1 + d..];
                let vbar = bi[0];
                let gbar: Vec<f64> = bi[1..1 + d].to_vec();
                let hbar: Vec<f64> = bi[1 + d..].to_vec();
                let g_dot: f64 = gbar.iter().zip(zg).map(|(a, b)| a * b).sum();
                let h_dot: f64 = hbar.iter().zip(zh).map(|(a, b)| a * b).sum();
                bi[0] = 2.0 * r * vbar + 2.0 * g_dot + 2.0 * h_dot;
                for a in 0..d {
                    let mut sym = 0.0;
                    for b in 0..d {
                        sym += (hbar[a * d + b] + hbar[b * d + a]) * zg[b];
                    }
                    bi[1 + a] = 2.0 * r * gbar[a] + 2.0 * sym;
                }
                for (o, h) in bi[1 + d..].iter_mut().zip(&hbar) {
                    *o = 2.0 * r * h;
                }
            }
        }
    }
}

/// Gradient of `sum_k loss(k, jet(x_k))` with respect to all weights and
/// biases of a scalar-output network.
///
/// `loss` returns the term's value and its adjoint, i.e. the partial
/// derivatives with respect to value, gradient and Hessian entries of the
/// output jet. Points are processed in order, so results are reproducible.
pub fn param_gradient<F>(net: &Network, batch: &[Vec<f64>], loss: F) -> Result<(f64, ParamGradient)>
where
    F: Fn(usize, &Jet2) -> (f64, Jet2),
{
    if net.output_dim() != 1 {
        return Err(Error::Dimension("parameter gradients need a scalar output".into()));
    }
    let d = net.input_dim();
    let m = stride(d);
    let mut grad = ParamGradient::zeros_like(net);
    let mut total = 0.0;
    for (k, x) in batch.iter().enumerate() {
        let mut tape = Tape {
            inputs: Vec::new(),
            pre: Vec::new(),
        };
        let out = forward(net, x, Some(&mut tape), None)?;
        let jet = Jet2::from_slice(&out, d);
        let (value, adj) = loss(k, &jet);
        if !value.is_finite() {
            return Err(Error::Overflow(format!("loss is non-finite at point {k}")));
        }
        total += value;
        let mut zbar = vec![0.0; m];
        adj.write_to(&mut zbar);
        for li in (0..net.layers().len()).rev() {
            let layer = &net.layers()[li];
            let a = &tape.inputs[li];
            let g = &mut grad.layers[li];
            let mut abar = vec![0.0; layer.in_dim() * m];
            let offsets = layer.row_offsets();
            for i in 0..layer.out_dim() {
                let zb = &zbar[i * m..(i + 1) * m];
                g.bias[i] += zb[0];
                if zb.iter().all(|v| *v == 0.0) {
                    continue;
                }
                let (c, v) = layer.row(i);
                for (e, (&j, &w)) in c.iter().zip(v).enumerate() {
                    let aj = &a[j * m..(j + 1) * m];
                    g.weights[offsets[i] + e] += zb.iter().zip(aj).map(|(p, q)| p * q).sum::<f64>();
                    if li > 0 {
                        for (o, p) in abar[j * m..(j + 1) * m].iter_mut().zip(zb) {
                            *o += w * p;
                        }
                    }
                }
            }
            if li > 0 {
                let prev = &net.layers()[li - 1];
                backward_activation(prev.activation(), &tape.pre[li - 1], &mut abar, d);
                zbar = abar;
            }
        }
    }
    if grad.flatten().iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow("non-finite parameter gradient".into()));
    }
    Ok((total, grad))
}

/// Outcome of comparing jets against central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct FdReport {
    /// Largest `|a - b| / max(|a|, |b|, 1)` over value, gradient, Hessian.
    pub max_rel_err: f64,
    /// Set when some preactivation lies within `10 h` of its kink.
    pub inconclusive: bool,
    /// Smallest `|z| / |grad z|` over ReLU and squared-ReLU neurons.
    pub kink_distance: f64,
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn kink_distance(net: &Network, x: &[f64]) -> Result<f64> {
    let mut tape = Tape {
        inputs: Vec::new(),
        pre: Vec::new(),
    };
    forward(net, x, Some(&mut tape), None)?;
    let d = net.input_dim();
    let mut dist = f64::INFINITY;
    for (layer, z) in net.layers().iter().zip(&tape.pre) {
        if layer.activation() == Activation::Linear {
            continue;
        }
        for zi in z.chunks(stride(d)) {
            let gn = zi[1..1 + d].iter().map(|g| g * g).sum::<f64>().sqrt();
            if gn > 0.0 {
                dist = dist.min(zi[0].abs() / gn);
            }
        }
    }
    Ok(dist)
}

/// Compares [`eval_jet2`] with second-order central differences of step `h`.
pub fn finite_diff_check(net: &Network, x: &[f64], h: f64) -> Result<FdReport> {
    let jet = eval_jet2(net, x)?;
    let d = x.len();
    let f = |p: &[f64]| net.evaluate_scalar(p);
    let shifted = |moves: &[(usize, f64)]| {
        let mut p = x.to_vec();
        for &(i, s) in moves {
            p[i] += s;
        }
        f(&p)
    };
    let f0 = f(x)?;
    let mut err = rel_err(jet.value, f0);
    for i in 0..d {
        let fp = shifted(&[(i, h)])?;
        let fm = shifted(&[(i, -h)])?;
        err = err.max(rel_err(jet.grad[i], (fp - fm) / (2.0 * h)));
        err = err.max(rel_err(jet.h(i, i), (fp - 2.0 * f0 + fm) / (h * h)));
        for j in 0..i {
            let fpp = shifted(&[(i, h), (j, h)])?;
            let fpm = shifted(&[(i, h), (j, -h)])?;
            let fmp = shifted(&[(i, -h), (j, h)])?;
            let fmm = shifted(&[(i, -h), (j, -h)])?;
            let fd = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            err = err.max(rel_err(jet.h(i, j), fd)).max(rel_err(jet.h(j, i), fd));
        }
    }
    // the mixed stencil reaches sqrt(2) h away from x
    let dist = kink_distance(net, x)?;
    Ok(FdReport {
        max_rel_err: err,
        inconclusive: dist <= 10.0 * h * 2f64.sqrt(),
        kink_distance: dist,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Layer;

    fn one_neuron(act: Activation) -> Network {
        Network::new(
            1,
            vec![
                Layer::dense(vec![vec![1.0]], vec![0.0], act).unwrap(),
                Layer::dense(vec![vec![1.0]], vec![0.0], Activation::Linear).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn relu2_neuron_jet() {
        let j = eval_jet2(&one_neuron(Activation::ReluSquared), &[2.0]).unwrap();
        assert_eq!((j.value, j.grad[0], j.hess[0]), (4.0, 4.0, 2.0));
    }

    #[test]
    fn dead_relu_jet() {
        let j = eval_jet2(&one_neuron(Activation::Relu), &[-1.0]).unwrap();
        assert_eq!(j, Jet2::zero(1));
    }

    #[test]
    fn zero_output_gives_zero_gradient() {
        let net = one_neuron(Activation::ReluSquared);
        let (loss, g) = param_gradient(&net, &[vec![-0.5]], |_, j| {
            let mut adj = Jet2::zero(1);
            adj.value = 2.0 * j.value;
            (j.value * j.value, adj)
        })
        .unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn affine_second_derivative_has_no_weight_gradient() {
        let net = Network::affine(1, vec![vec![(0, 3.0)]], vec![0.5]).unwrap();
        let (loss, g) = param_gradient(&net, &[vec![0.2]], |_, j| {
            let r = j.hess[0] - 1.0;
            let mut adj = Jet2::zero(1);
            adj.hess[0] = 2.0 * r;
            (r * r, adj)
        })
        .unwrap();
        assert_eq!(loss, 1.0);
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn affine_fd_is_exact() {
        let net = Network::affine(2, vec![vec![(0, 3.0), (1, -2.0)]], vec![0.5]).unwrap();
        let r = finite_diff_check(&net, &[0.3, 0.9], 1e-4).unwrap();
        assert!(r.max_rel_err < 1e-8, "{r:?}");
        assert!(!r.inconclusive);
    }

    #[test]
    fn relu2_neuron_fd() {
        let r = finite_diff_check(&one_neuron(Activation::ReluSquared), &[2.0], 1e-4).unwrap();
        assert!(r.max_rel_err <= 1e-6, "{r:?}");
    }

    #[test]
    fn kink_is_flagged() {
        let mut stats = KinkStats::default();
        let net = one_neuron(Activation::Relu);
        eval_jet2_counting(&net, &[0.0], &mut stats).unwrap();
        eval_jet2_counting(&net, &[0.5], &mut stats).unwrap();
        assert_eq!(
            stats,
            KinkStats {
                evaluations: 2,
                kink_hits: 1
            }
        );
        assert!(finite_diff_check(&net, &[1e-4], 1e-4).unwrap().inconclusive);
    }

    #[test]
    fn derivative_lookup() {
        let j = Jet2 {
            value: 1.0,
            grad: vec![2.0, 3.0],
            hess: vec![4.0, 5.0, 5.0, 6.0],
        };
        assert_eq!(j.derivative(&[0, 0]), Some(1.0));
        assert_eq!(j.derivative(&[0, 1]), Some(3.0));
        assert_eq!(j.derivative(&[1, 1]), Some(5.0));
        assert_eq!(j.derivative(&[0, 2]), Some(6.0));
        assert_eq!(j.derivative(&[3, 0]), None);
        assert_eq!(j.laplacian(), 10.0);
    }
}
