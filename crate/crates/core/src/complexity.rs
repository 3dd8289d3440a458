//! Counting bounds for second-derivative classes of DSRNs and empirical
//! probes to hold them against.
//!
//! All bounds are computed as natural logarithms and exponentiated only
//! when the value fits in an `f64`.

use std::collections::BTreeSet;
use std::f64::consts::{E, LN_2};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::eval_jet2;
use crate::net::{Activation, Layer, Network};

/// A bound held as `ln(value)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogBound {
    pub ln: f64,
}

impl LogBound {
    pub fn value(&self) -> Option<f64> {
        let v = self.ln.exp();
        v.is_finite().then_some(v)
    }

    pub fn log2(&self) -> f64 {
        self.ln / LN_2
    }
}

/// Warren-type count `2 (2 e M D / W)^W` of sign patterns of `M`
/// polynomials of degree `D` in `W` variables.
pub fn sign_pattern_bound(m: f64, degree: f64, w: f64) -> Result<LogBound> {
    if !(w > 0.0 && m > 0.0) || degree < 0.0 {
        return Err(Error::Precondition("M and W must be positive, D nonnegative".into()));
    }
    if w > m {
        return Err(Error::Precondition(format!("W = {w} exceeds M = {m}")));
    }
    Ok(LogBound {
        ln: LN_2 + w * (2.0 * E * m * degree / w).ln(),
    })
}

/// Layer sizes and activations of a fully connected network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub d: usize,
    /// Hidden widths `N_1 .. N_L`.
    pub widths: Vec<usize>,
    pub schedule: Vec<Activation>,
}

impl ArchSpec {
    pub fn new(d: usize, widths: Vec<usize>, schedule: Vec<Activation>) -> Result<ArchSpec> {
        if widths.len() != schedule.len() {
            return Err(Error::Spec("one activation per hidden layer".into()));
        }
        if d == 0 || widths.contains(&0) {
            return Err(Error::Spec("dimensions must be positive".into()));
        }
        Ok(ArchSpec { d, widths, schedule })
    }

    /// Uniform width `n`, depth `l`, with the last `l2` layers squared.
    pub fn dsrn(d: usize, n: usize, l: usize, l2: usize) -> ArchSpec {
        let schedule = (0..l)
            .map(|i| {
                if i + l2 >= l {
                    Activation::ReluSquared
                } else {
                    Activation::Relu
                }
            })
            .collect();
        ArchSpec {
            d,
            widths: vec![n; l],
            schedule,
        }
    }

    pub fn depth(&self) -> usize {
        self.widths.len()
    }

    /// `N_0 = d, N_1, .., N_L, N_{L+1} = 1`.
    fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.d];
        s.extend(&self.widths);
        s.push(1);
        s
    }

    /// `W_i = N_i N_{i-1} + N_i` for `i = 1..L+1`.
    pub fn layer_params(&self) -> Vec<usize> {
        self.sizes().windows(2).map(|w| w[1] * w[0] + w[1]).collect()
    }

    pub fn num_params(&self) -> usize {
        self.layer_params().iter().sum()
    }

    /// `U = sum_{n=1}^{L+1} sum_{i<=n} W_i`.
    pub fn u(&self) -> usize {
        let mut acc = 0;
        let mut partial = 0;
        for w in self.layer_params() {
            partial += w;
            acc += partial;
        }
        acc
    }

    /// `L* = L - C log2 L`.
    pub fn l_star(&self, c: f64) -> f64 {
        let l = self.depth() as f64;
        if l <= 1.0 {
            l
        } else {
            l - c * l.log2()
        }
    }

    /// Random network with independent standard normal parameters.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Result<Network> {
        let sizes = self.sizes();
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for (i, w) in sizes.windows(2).enumerate() {
            let act = self.schedule.get(i).copied().unwrap_or(Activation::Linear);
            let weights = (0..w[1])
                .map(|_| (0..w[0]).map(|_| StandardNormal.sample(rng)).collect())
                .collect();
            let bias = (0..w[1]).map(|_| StandardNormal.sample(rng)).collect();
            layers.push(Layer::dense(weights, bias, act)?);
        }
        Network::new(self.d, layers)
    }
}

/// Bound value with the quantities that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: usize,
    pub l: usize,
    pub c: f64,
    pub m: f64,
    pub u: usize,
    pub l_star: f64,
    pub d2: f64,
    /// `ln` of each refinement factor, the last one being the final
    /// polynomial factor of degree `d2`.
    pub ln_factors: Vec<f64>,
    pub bound: LogBound,
}

/// `d2 = 2 sum_{n=0}^{L} (1 + n 2^{max(0, n - L*)})`.
pub fn degree_d2(l: usize, l_star: f64) -> f64 {
    2.0 * (0..=l)
        .map(|n| 1.0 + n as f64 * 2f64.powf((n as f64 - l_star).max(0.0)))
        .sum::<f64>()
}

/// Growth-function bound for sign patterns of a second derivative of the
/// architecture on `m` points, by successive refinement of parameter space.
pub fn vc_recursion_bound(arch: &ArchSpec, c: f64, m: f64) -> Result<BoundReport> {
    let u = arch.u();
    if m < u as f64 {
        return Err(Error::Precondition(format!("sample count m = {m} below U = {u}")));
    }
    let l = arch.depth();
    let l_star = arch.l_star(c);
    let params = arch.layer_params();
    let sizes = arch.sizes();
    let mut ln_factors = Vec::with_capacity(l + 1);
    let mut partial = 0.0;
    for n in 1..=l {
        partial += params[n - 1] as f64;
        let deg = 1.0 + (n as f64 - 1.0) * 2f64.powf((n as f64 - 1.0 - l_star).max(0.0));
        let ratio = 2.0 * E * m * deg * sizes[n] as f64 / partial;
        ln_factors.push(LN_2 + partial * ratio.ln());
    }
    let total: f64 = params.iter().map(|&w| w as f64).sum();
    let d2 = degree_d2(l, l_star);
    ln_factors.push(LN_2 + total * (2.0 * E * m * d2 / total).ln());
    let n_max = arch.widths.iter().copied().max().unwrap_or(0);
    Ok(BoundReport {
        n: n_max,
        l,
        c,
        m,
        u,
        l_star,
        d2,
        bound: LogBound {
            ln: ln_factors.iter().sum(),
        },
        ln_factors,
    })
}

/// `t + w log2(2 r log2 r)`, the largest `m` with `2^m <= 2^t (m r / w)^w`.
pub fn solve_m_bound(t: f64, w: f64, r: f64) -> Result<f64> {
    if r < 16.0 {
        return Err(Error::Precondition(format!("r = {r} must be at least 16")));
    }
    if t < 0.0 || w < 0.0 {
        return Err(Error::Precondition("t and w must be nonnegative".into()));
    }
    Ok(t + w * (2.0 * r * r.log2()).log2())
}

/// Explicit upper bound on the VC dimension of second derivatives of DSRNs
/// of width `N`, depth `L` and constant `C` on `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VcDimReport {
    pub n: usize,
    pub l: usize,
    pub c: f64,
    pub d: usize,
    pub u: usize,
    pub t: f64,
    pub r: f64,
    pub bound: f64,
    /// `bound / (N^2 L^2 log2 L log2 N)`
    pub normalized: f64,
}

pub fn vcdim_upper_d(n: usize, l: usize, c: f64, d: usize) -> Result<VcDimReport> {
    if n < 2 || l < 2 {
        return Err(Error::Precondition("N and L must be at least 2".into()));
    }
    let l2 = ((c * (l as f64).log2()).floor() as usize).min(l);
    let arch = ArchSpec::dsrn(d, n, l, l2);
    let u = arch.u();
    let (nf, lf) = (n as f64, l as f64);
    let t = lf + 3.0;
    let r = 4.0 * E * lf.powf(c + 3.0) * nf;
    let bound = solve_m_bound(t, u as f64, r)?;
    Ok(VcDimReport {
        n,
        l,
        c,
        d,
        u,
        t,
        r,
        bound,
        normalized: bound / (nf * nf * lf * lf * lf.log2() * nf.log2()),
    })
}

pub fn vcdim_upper(n: usize, l: usize, c: f64) -> Result<VcDimReport> {
    vcdim_upper_d(n, l, c, 1)
}

/// Pseudo-dimension bound: the VC machinery on one extra input.
pub fn pdim_upper(n: usize, l: usize, c: f64, d: usize) -> Result<VcDimReport> {
    vcdim_upper_d(n, l, c, d + 1)
}

/// Result of an empirical shattering search. The shattered size is a lower
/// bound found heuristically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShatterReport {
    pub draws: usize,
    pub distinct_patterns: usize,
    pub shattered: usize,
    /// Distinct pattern count after each power-of-two number of draws.
    pub growth: Vec<(usize, usize)>,
}

fn is_shattered(patterns: &BTreeSet<u64>, subset: u64) -> bool {
    let size = subset.count_ones();
    let proj: BTreeSet<u64> = patterns.iter().map(|p| p & subset).collect();
    proj.len() == 1usize << size
}

/// Samples parameters, records the sign pattern `1[D_{ij} phi(x_k) > 0]`
/// over the points, and searches greedily for a shattered subset.
pub fn empirical_shatter_probe(
    arch: &ArchSpec,
    points: &[Vec<f64>],
    entry: (usize, usize),
    draws: usize,
    seed: u64,
) -> Result<ShatterReport> {
    if points.len() > 63 {
        return Err(Error::Precondition("at most 63 points".into()));
    }
    let d = arch.d;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut patterns = BTreeSet::new();
    let mut growth = Vec::new();
    for t in 1..=draws {
        let net = arch.sample(&mut rng)?;
        let mut pat = 0u64;
        for (k, x) in points.iter().enumerate() {
            let j = eval_jet2(&net, x)?;
            if j.hess[entry.0 * d + entry.1] > 0.0 {
                pat |= 1 << k;
            }
        }
        patterns.insert(pat);
        if t.is_power_of_two() || t == draws {
            growth.push((t, patterns.len()));
        }
    }
    // greedy ascent from several starting orders
    let m = points.len();
    let mut best = 0;
    for start in 0..m.max(1) {
        let mut subset = 0u64;
        for off in 0..m {
            let k = (start + off) % m;
            let cand = subset | 1 << k;
            if is_shattered(&patterns, cand) {
                subset = cand;
            }
        }
        best = best.max(subset.count_ones() as usize);
    }
    Ok(ShatterReport {
        draws,
        distinct_patterns: patterns.len(),
        shattered: best,
        growth,
    })
}

/// Average over `trials` Rademacher sign draws of
/// `max_c (1/M) sum_i s_i f_c(z_i)`, where `values[c][i] = f_c(z_i)`.
pub fn empirical_rademacher(values: &[Vec<f64>], trials: usize, seed: u64) -> Result<f64> {
    let m = values.first().map(Vec::len).unwrap_or(0);
    if m == 0 || values.iter().any(|v| v.len() != m) {
        return Err(Error::Precondition("candidates must share a nonempty sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    let mut signs = vec![0.0; m];
    for _ in 0..trials {
        for s in signs.iter_mut() {
            *s = if rand::Rng::random::<bool>(&mut rng) { 1.0 } else { -1.0 };
        }
        let best = values
            .iter()
            .map(|v| v.iter().zip(&signs).map(|(f, s)| f * s).sum::<f64>() / m as f64)
            .fold(f64::NEG_INFINITY, f64::max);
        total += best;
    }
    Ok(total / trials as f64)
}

/// `C5 N L sqrt(log2 L log2 N) ln(M) / sqrt(M)`.
pub fn generalization_bound(n: f64, l: f64, m: f64, c5: f64) -> f64 {
    c5 * n * l * (l.log2() * n.log2()).sqrt() * m.ln() / m.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_pattern_values() {
        let b = sign_pattern_bound(10.0, 2.0, 3.0).unwrap();
        let want = 2.0 * (40.0 * E / 3.0).powi(3);
        assert!((b.value().unwrap() - want).abs() <= 1e-10 * want);
        assert!((want - 9.52e4).abs() / 9.52e4 < 1e-3);
        assert_eq!(sign_pattern_bound(10.0, 0.0, 3.0).unwrap().value(), Some(0.0));
        let b2 = sign_pattern_bound(20.0, 2.0, 3.0).unwrap();
        assert!((b2.ln - b.ln - 3.0 * LN_2).abs() < 1e-12);
        assert!(matches!(sign_pattern_bound(2.0, 1.0, 3.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn d2_by_direct_sum() {
        let arch = ArchSpec::dsrn(1, 2, 4, 2);
        assert_eq!(arch.l_star(1.0), 2.0);
        assert_eq!(degree_d2(4, 2.0), 60.0);
    }

    #[test]
    fn affine_arch_has_one_factor() {
        let arch = ArchSpec::new(2, vec![], vec![]).unwrap();
        let r = vc_recursion_bound(&arch, 1.0, 10.0).unwrap();
        assert_eq!(r.ln_factors.len(), 1);
        assert_eq!(r.u, 3);
    }

    #[test]
    fn solve_m_values() {
        assert_eq!(solve_m_bound(0.0, 2.0, 16.0).unwrap(), 14.0);
        assert_eq!(solve_m_bound(3.0, 0.0, 20.0).unwrap(), 3.0);
        assert!(matches!(solve_m_bound(0.0, 1.0, 8.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn generalization_value() {
        let g = generalization_bound(2.0, 2.0, 100.0, 1.0);
        assert!((g - 0.4 * 100f64.ln()).abs() < 1e-12);
        assert!((g - 1.842).abs() < 1e-3);
    }

    #[test]
    fn u_counts_nested_sums() {
        let arch = ArchSpec::new(1, vec![2], vec![Activation::ReluSquared]).unwrap();
        assert_eq!(arch.layer_params(), vec![4, 3]);
        assert_eq!(arch.u(), 11);
    }

    #[test]
    fn affine_probe_has_single_pattern() {
        let arch = ArchSpec::new(1, vec![], vec![]).unwrap();
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 0.2]).collect();
        let r = empirical_shatter_probe(&arch, &pts, (0, 0), 200, 1).unwrap();
        assert_eq!((r.distinct_patterns, r.shattered), (1, 0));
    }

    #[test]
    fn rademacher_of_constant_is_small() {
        let vals = vec![vec![1.0; 200]];
        let est = empirical_rademacher(&vals, 2000, 4).unwrap();
        assert!(est.abs() < 0.01, "{est}");
    }
}
