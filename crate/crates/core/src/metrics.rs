//! Regions of the partition of unity and Sobolev norm estimation.
//!
//! Norms are estimated on tensor grids of jittered midpoints: each axis of
//! the domain is split into equal sub-intervals and one sample is drawn
//! uniformly inside each, with a seeded generator. Jitter keeps samples off
//! the kink hyperplanes of ReLU networks almost surely.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gadgets::MultiIndex;
use crate::jet::{eval_jet2_counting, Jet2, KinkStats};
use crate::net::Network;
use crate::target::TargetFunction;

/// Region `Omega_m` for `m in {1,2}^d` at resolution `K`.
///
/// Along an axis with `m_j = 1` the region is `U_{i<K} [i/K, i/K + 3/(4K)]`;
/// with `m_j = 2` it is `U_{i<=K} [i/K - 1/(2K), i/K + 1/(4K)]` clipped to
/// `[0, 1]`. Cells `Omega_{m,i}` are the products of these intervals.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub k: usize,
    pub m: Vec<u8>,
}

impl RegionSpec {
    pub fn new(k: usize, m: Vec<u8>) -> Result<RegionSpec> {
        if k == 0 {
            return Err(Error::Spec("K must be positive".into()));
        }
        if m.is_empty() || m.iter().any(|&v| v != 1 && v != 2) {
            return Err(Error::Spec(format!(
                "region index {m:?} must be a nonempty vector over {{1, 2}}"
            )));
        }
        Ok(RegionSpec { k, m })
    }

    pub fn d(&self) -> usize {
        self.m.len()
    }

    /// Number of cells along axis `j`.
    pub fn levels(&self, j: usize) -> usize {
        if self.m[j] == 1 {
            self.k
        } else {
            self.k + 1
        }
    }

    pub fn cell_count(&self) -> usize {
        (0..self.d()).map(|j| self.levels(j)).product()
    }

    /// Offset added to `x_j` so that cells start at multiples of `1/K`.
    pub fn shift(&self, j: usize) -> f64 {
        if self.m[j] == 1 {
            0.0
        } else {
            0.5 / self.k as f64
        }
    }

    /// Interval of cell `i` along axis `j`, clipped to `[0, 1]`.
    pub fn interval(&self, j: usize, i: usize) -> (f64, f64) {
        let k = self.k as f64;
        let lo = i as f64 / k - self.shift(j);
        let hi = lo + 0.75 / k;
        (lo.max(0.0), hi.min(1.0))
    }

    /// Centre of the ball on which cell `i` along axis `j` is averaged.
    pub fn ball_center(&self, j: usize, i: usize) -> f64 {
        let k = self.k as f64;
        i as f64 / k - self.shift(j) + 0.375 / k
    }

    pub fn ball_radius(&self) -> f64 {
        0.25 / self.k as f64
    }

    /// Per-axis interval lists.
    pub fn axes(&self) -> Vec<Vec<(f64, f64)>> {
        (0..self.d())
            .map(|j| (0..self.levels(j)).map(|i| self.interval(j, i)).collect())
            .collect()
    }

    fn axis_cell(&self, j: usize, x: f64) -> Option<usize> {
        (0..self.levels(j)).find(|&i| {
            let (lo, hi) = self.interval(j, i);
            lo <= x && x <= hi
        })
    }

    /// Cell multi-index containing `x`; shared boundaries go to the
    /// lexicographically smallest cell.
    pub fn cell_of(&self, x: &[f64]) -> Option<Vec<usize>> {
        x.iter().enumerate().map(|(j, &v)| self.axis_cell(j, v)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.cell_of(x).is_some()
    }

    /// Flat index `p = sum_j i_j prod_{l<j} levels_l`.
    pub fn flat_index(&self, cell: &[usize]) -> usize {
        let mut p = 0;
        let mut stride = 1;
        for (j, &i) in cell.iter().enumerate() {
            p += i * stride;
            stride *= self.levels(j);
        }
        p
    }

    pub fn unflatten(&self, mut p: usize) -> Vec<usize> {
        (0..self.d())
            .map(|j| {
                let l = self.levels(j);
                let i = p % l;
                p /= l;
                i
            })
            .collect()
    }

    pub fn as_domain(&self) -> Domain {
        Domain { axes: self.axes() }
    }
}

/// `x in Omega_m`.
pub fn in_region(x: &[f64], spec: &RegionSpec) -> bool {
    spec.contains(x)
}

/// Tensor product of per-axis unions of intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub axes: Vec<Vec<(f64, f64)>>,
}

impl Domain {
    pub fn unit_cube(d: usize) -> Domain {
        Domain::cube(d, 0.0, 1.0)
    }

    pub fn cube(d: usize, lo: f64, hi: f64) -> Domain {
        Domain {
            axes: vec![vec![(lo, hi)]; d],
        }
    }

    pub fn d(&self) -> usize {
        self.axes.len()
    }
}

/// Sampling resolution: `per_unit` sub-intervals per unit length on each
/// axis (at least one per interval).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub per_unit: usize,
    pub seed: u64,
    pub jitter: bool,
}

impl GridSpec {
    pub fn new(per_unit: usize, seed: u64) -> GridSpec {
        GridSpec {
            per_unit,
            seed,
            jitter: true,
        }
    }
}

/// Per-axis `(point, weight)` lists of a jittered midpoint rule.
pub fn axis_samples(domain: &Domain, grid: &GridSpec) -> Vec<Vec<(f64, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(grid.seed);
    domain
        .axes
        .iter()
        .map(|ivs| {
            let mut pts = Vec::new();
            for &(lo, hi) in ivs {
                let len = hi - lo;
                if len <= 0.0 {
                    continue;
                }
                let n = ((len * grid.per_unit as f64).ceil() as usize).max(1);
                let h = len / n as f64;
                for c in 0..n {
                    let u: f64 = if grid.jitter { rng.random::<f64>() } else { 0.5 };
                    pts.push((lo + (c as f64 + u) * h, h));
                }
            }
            pts
        })
        .collect()
}

/// Visits every tensor-grid point with its weight.
pub fn for_each_point<F>(axes: &[Vec<(f64, f64)>], mut f: F) -> Result<()>
where
    F: FnMut(&[f64], f64) -> Result<()>,
{
    let d = axes.len();
    if axes.iter().any(Vec::is_empty) {
        return Ok(());
    }
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    loop {
        let mut w = 1.0;
        for j in 0..d {
            let (p, wj) = axes[j][idx[j]];
            x[j] = p;
            w *= wj;
        }
        f(&x, w)?;
        let mut j = 0;
        loop {
            if j == d {
                return Ok(());
            }
            idx[j] += 1;
            if idx[j] < axes[j].len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

/// Anything that provides value, gradient and Hessian at a point.
pub trait JetSource {
    fn dim(&self) -> usize;
    fn jet(&self, x: &[f64], stats: &mut KinkStats) -> Result<Jet2>;
}

impl JetSource for TargetFunction {
    fn dim(&self) -> usize {
        self.d
    }

    fn jet(&self, x: &[f64], _: &mut KinkStats) -> Result<Jet2> {
        Ok(TargetFunction::jet(self, x))
    }
}

impl JetSource for Network {
    fn dim(&self) -> usize {
        self.input_dim()
    }

    fn jet(&self, x: &[f64], stats: &mut KinkStats) -> Result<Jet2> {
        eval_jet2_counting(self, x, stats)
    }
}

impl<T: JetSource + ?Sized> JetSource for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn jet(&self, x: &[f64], stats: &mut KinkStats) -> Result<Jet2> {
        (**self).jet(x, stats)
    }
}

/// `a - b`
pub struct Difference<A, B>(pub A, pub B);

impl<A: JetSource, B: JetSource> JetSource for Difference<A, B> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn jet(&self, x: &[f64], stats: &mut KinkStats) -> Result<Jet2> {
        let a = self.0.jet(x, stats)?;
        let b = self.1.jet(x, stats)?;
        Ok(Jet2 {
            value: a.value - b.value,
            grad: a.grad.iter().zip(&b.grad).map(|(u, v)| u - v).collect(),
            hess: a.hess.iter().zip(&b.hess).map(|(u, v)| u - v).collect(),
        })
    }
}

/// Wraps a closure as a jet source.
pub struct FnSource<F> {
    pub d: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> Jet2> JetSource for FnSource<F> {
    fn dim(&self) -> usize {
        self.d
    }

    fn jet(&self, x: &[f64], _: &mut KinkStats) -> Result<Jet2> {
        Ok((self.f)(x))
    }
}

/// Estimated `W^{n,p}` norm with per-derivative contributions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub order: usize,
    /// `f64::INFINITY` for the sup norm; serialized as `null`.
    pub p: f64,
    /// `||D^alpha f||_{L^p}` for every `|alpha| <= order`.
    pub per_alpha: Vec<(MultiIndex, f64)>,
    pub norm: f64,
    pub seminorm: f64,
    pub samples: usize,
    /// Relative change against a grid of half the resolution.
    pub discrepancy: f64,
    pub kink_hits: usize,
}

fn aggregate(vals: impl Iterator<Item = f64>, p: f64) -> f64 {
    if p.is_infinite() {
        vals.fold(0.0, f64::max)
    } else {
        vals.map(|v| v.powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

impl NormReport {
    /// `W^{k,p}` norm for `k <= order`, from the stored contributions.
    pub fn norm_of_order(&self, k: usize) -> f64 {
        aggregate(
            self.per_alpha.iter().filter(|(a, _)| a.order() <= k).map(|(_, v)| *v),
            self.p,
        )
    }

    /// `|.|_{W^{k,p}}`: derivatives of order exactly `k`.
    pub fn seminorm_of_order(&self, k: usize) -> f64 {
        aggregate(
            self.per_alpha.iter().filter(|(a, _)| a.order() == k).map(|(_, v)| *v),
            self.p,
        )
    }
}

/// Accumulates `|D^alpha|^p` sums for several exponents in one pass.
struct Accumulator {
    alphas: Vec<MultiIndex>,
    ps: Vec<f64>,
    sums: Vec<Vec<f64>>,
    samples: usize,
}

impl Accumulator {
    fn new(d: usize, n: usize, ps: &[f64]) -> Accumulator {
        let alphas = MultiIndex::up_to(d, n);
        Accumulator {
            sums: vec![vec![0.0; alphas.len()]; ps.len()],
            alphas,
            ps: ps.to_vec(),
            samples: 0,
        }
    }

    fn add(&mut self, jet: &Jet2, w: f64) {
        self.samples += 1;
        for (ai, a) in self.alphas.iter().enumerate() {
            let v = jet.derivative(&a.0).unwrap_or(0.0).abs();
            for (pi, &p) in self.ps.iter().enumerate() {
                let s = &mut self.sums[pi][ai];
                if p.is_infinite() {
                    *s = s.max(v);
                } else {
                    *s += w * v.powf(p);
                }
            }
        }
    }

    fn reports(&self, n: usize, kink_hits: usize) -> Vec<NormReport> {
        self.ps
            .iter()
            .enumerate()
            .map(|(pi, &p)| {
                let per_alpha: Vec<(MultiIndex, f64)> = self
                    .alphas
                    .iter()
                    .zip(&self.sums[pi])
                    .map(|(a, &s)| (a.clone(), if p.is_infinite() { s } else { s.powf(1.0 / p) }))
                    .collect();
                let mut r = NormReport {
                    order: n,
                    p,
                    per_alpha,
                    norm: 0.0,
                    seminorm: 0.0,
                    samples: self.samples,
                    discrepancy: 0.0,
                    kink_hits,
                };
                r.norm = r.norm_of_order(n);
                r.seminorm = r.seminorm_of_order(n);
                r
            })
            .collect()
    }
}

fn check_inputs(d: usize, n: usize, ps: &[f64], domain: &Domain) -> Result<()> {
    if n > 2 {
        return Err(Error::Spec(format!("norm order {n} exceeds 2")));
    }
    if domain.d() != d {
        return Err(Error::Dimension(format!(
            "domain has dimension {}, source {d}",
            domain.d()
        )));
    }
    if let Some(p) = ps.iter().find(|p| !(**p >= 1.0)) {
        return Err(Error::Spec(format!("p = {p} must lie in [1, inf]")));
    }
    Ok(())
}

fn single_pass<S: JetSource + ?Sized>(
    source: &S,
    n: usize,
    ps: &[f64],
    domain: &Domain,
    grid: &GridSpec,
) -> Result<Vec<NormReport>> {
    let axes = axis_samples(domain, grid);
    let mut acc = Accumulator::new(source.dim(), n, ps);
    let mut stats = KinkStats::default();
    for_each_point(&axes, |x, w| {
        let jet = source.jet(x, &mut stats)?;
        acc.add(&jet, w);
        Ok(())
    })?;
    Ok(acc.reports(n, stats.kink_hits))
}

/// Norm estimates for several exponents sharing one set of samples, each
/// with a coarse-grid discrepancy.
pub fn sobolev_norms<S: JetSource + ?Sized>(
    source: &S,
    n: usize,
    ps: &[f64],
    domain: &Domain,
    grid: &GridSpec,
) -> Result<Vec<NormReport>> {
    check_inputs(source.dim(), n, ps, domain)?;
    let mut fine = single_pass(source, n, ps, domain, grid)?;
    let coarse_grid = GridSpec {
        per_unit: (grid.per_unit / 2).max(1),
        seed: grid.seed ^ 0x9e37_79b9_7f4a_7c15,
        jitter: grid.jitter,
    };
    let coarse = single_pass(source, n, ps, domain, &coarse_grid)?;
    for (f, c) in fine.iter_mut().zip(&coarse) {
        let scale = f.norm.abs().max(c.norm.abs());
        f.discrepancy = if scale > 0.0 {
            (f.norm - c.norm).abs() / scale
        } else {
            0.0
        };
    }
    Ok(fine)
}

pub fn sobolev_norm<S: JetSource + ?Sized>(
    source: &S,
    n: usize,
    p: f64,
    domain: &Domain,
    grid: &GridSpec,
) -> Result<NormReport> {
    Ok(sobolev_norms(source, n, &[p], domain, grid)?.pop().unwrap())
}

/// `||f - net||_{W^{n,p}(domain)}`.
pub fn error_norm(
    f: &TargetFunction,
    net: &Network,
    n: usize,
    p: f64,
    domain: &Domain,
    grid: &GridSpec,
) -> Result<NormReport> {
    if f.d != net.input_dim() {
        return Err(Error::Dimension("target and network dimensions differ".into()));
    }
    sobolev_norm(&Difference(f, net), n, p, domain, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn region_examples() {
        let r1 = RegionSpec::new(2, vec![1]).unwrap();
        let r2 = RegionSpec::new(2, vec![2]).unwrap();
        assert!(!in_region(&[0.4], &r1));
        assert!(in_region(&[0.4], &r2));
        assert_eq!(r1.interval(0, 0), (0.0, 0.375));
        assert_eq!(r1.interval(0, 1), (0.5, 0.875));
        assert_eq!(r2.axes()[0], vec![(0.0, 0.125), (0.25, 0.625), (0.75, 1.0)]);
        for i in 0..=1000 {
            let x = [i as f64 / 1000.0];
            assert!(in_region(&x, &r1) || in_region(&x, &r2));
        }
    }

    #[test]
    fn flat_index_round_trips() {
        let r = RegionSpec::new(3, vec![1, 2]).unwrap();
        assert_eq!(r.cell_count(), 12);
        for p in 0..12 {
            assert_eq!(r.flat_index(&r.unflatten(p)), p);
        }
        assert_eq!(r.flat_index(&[2, 1]), 5);
    }

    #[test]
    fn sine_sup_norm() {
        let f = TargetFunction::sin_pi(1);
        let r = sobolev_norm(&f, 2, f64::INFINITY, &Domain::unit_cube(1), &GridSpec::new(4000, 1)).unwrap();
        assert!((r.norm - PI * PI).abs() < 1e-3, "{}", r.norm);
    }

    #[test]
    fn zero_has_zero_norm() {
        let f = TargetFunction::constant(0.0, 2);
        let r = sobolev_norm(&f, 2, 2.0, &Domain::unit_cube(2), &GridSpec::new(16, 1)).unwrap();
        assert_eq!(r.norm, 0.0);
    }

    #[test]
    fn identity_w12_norm() {
        let f = TargetFunction::poly(vec![0.0, 1.0], 1);
        let r = sobolev_norm(&f, 1, 2.0, &Domain::unit_cube(1), &GridSpec::new(2000, 3)).unwrap();
        assert!((r.norm - (4.0f64 / 3.0).sqrt()).abs() < 1e-4, "{}", r.norm);
        assert!(r.discrepancy < 1e-3);
    }

    #[test]
    fn norms_grow_with_order() {
        let f = TargetFunction::gaussian_bump(2);
        let r = sobolev_norm(&f, 2, 3.0, &Domain::unit_cube(2), &GridSpec::new(40, 5)).unwrap();
        assert!(r.norm_of_order(2) >= r.norm_of_order(1));
        assert!(r.norm_of_order(1) >= r.norm_of_order(0));
    }
}
