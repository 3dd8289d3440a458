//! Explicit weight constructions: algebra gadgets, monomials, staircases,
//! point fitters, the smooth bump and the partition-of-unity networks.
//!
//! Every construction here is exact: the network computes its closed form
//! up to floating point rounding, with no approximation parameter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{compose, parallel, Activation, Layer, Network};

/// Multi-index `alpha` with order `|alpha| = sum alpha_j`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn zero(d: usize) -> MultiIndex {
        MultiIndex(vec![0; d])
    }

    pub fn order(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `alpha!`
    pub fn factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&a| (1..=a).map(|k| k as f64).product::<f64>())
            .product()
    }

    /// `x^alpha`
    pub fn pow(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(&a, &v)| v.powi(a as i32)).product()
    }

    /// Componentwise `self <= other`.
    pub fn dominated_by(&self, other: &MultiIndex) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// All multi-indices in dimension `d` with order at most `n`, sorted by
    /// order and then lexicographically.
    pub fn up_to(d: usize, n: usize) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        for k in 0..=n {
            let mut cur = vec![0; d];
            exact_order(d, k, 0, &mut cur, &mut out);
        }
        out
    }

    /// Coordinate indices repeated by multiplicity, e.g. `(2,1) -> [0,0,1]`.
    pub fn literals(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(j, &a)| std::iter::repeat_n(j, a))
            .collect()
    }
}

fn exact_order(d: usize, left: usize, pos: usize, cur: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
    if d == 0 {
        if left == 0 {
            out.push(MultiIndex(Vec::new()));
        }
        return;
    }
    if pos + 1 == d {
        cur[pos] = left;
        out.push(MultiIndex(cur.clone()));
        cur[pos] = 0;
        return;
    }
    for a in (0..=left).rev() {
        cur[pos] = a;
        exact_order(d, left - a, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

/// The three algebra gadgets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlgebraGadget {
    Identity(usize),
    Square,
    Product,
}

pub fn make_algebra_gadget(kind: AlgebraGadget) -> Result<Network> {
    match kind {
        AlgebraGadget::Identity(d) => crate::net::relu_identity(d),
        AlgebraGadget::Square => Network::new(
            1,
            vec![
                Layer::sparse(
                    1,
                    vec![vec![(0, 1.0)], vec![(0, -1.0)]],
                    vec![0.0; 2],
                    Activation::ReluSquared,
                )?,
                Layer::sparse(2, vec![vec![(0, 1.0), (1, 1.0)]], vec![0.0], Activation::Linear)?,
            ],
        ),
        AlgebraGadget::Product => product_pairs(1),
    }
}

/// `R^{2k} -> R^k`, `(u_1..u_k, v_1..v_k) -> (u_1 v_1, .., u_k v_k)` with one
/// squared-ReLU layer of `4k` neurons.
pub fn product_pairs(k: usize) -> Result<Network> {
    let mut rows = Vec::with_capacity(4 * k);
    for i in 0..k {
        let (u, v) = (i, k + i);
        rows.push(vec![(u, 1.0), (v, 1.0)]);
        rows.push(vec![(u, -1.0), (v, -1.0)]);
        rows.push(vec![(u, 1.0), (v, -1.0)]);
        rows.push(vec![(u, -1.0), (v, 1.0)]);
    }
    let out = (0..k)
        .map(|i| vec![(4 * i, 0.25), (4 * i + 1, 0.25), (4 * i + 2, -0.25), (4 * i + 3, -0.25)])
        .collect();
    Network::new(
        2 * k,
        vec![
            Layer::sparse(2 * k, rows, vec![0.0; 4 * k], Activation::ReluSquared)?,
            Layer::sparse(4 * k, out, vec![0.0; k], Activation::Linear)?,
        ],
    )
}

/// One level of a product tree: multiplies neighbours `(y_0 y_1, y_2 y_3, ..)`
/// and carries an odd trailing value through a squared-ReLU identity.
fn pair_level(k: usize) -> Result<Network> {
    let mut rows = Vec::new();
    let mut bias = Vec::new();
    let mut out = Vec::new();
    for p in 0..k / 2 {
        let (u, v) = (2 * p, 2 * p + 1);
        let base = rows.len();
        rows.push(vec![(u, 1.0), (v, 1.0)]);
        rows.push(vec![(u, -1.0), (v, -1.0)]);
        rows.push(vec![(u, 1.0), (v, -1.0)]);
        rows.push(vec![(u, -1.0), (v, 1.0)]);
        bias.extend([0.0; 4]);
        out.push(vec![
            (base, 0.25),
            (base + 1, 0.25),
            (base + 2, -0.25),
            (base + 3, -0.25),
        ]);
    }
    if k % 2 == 1 {
        let u = k - 1;
        let base = rows.len();
        rows.push(vec![(u, 1.0)]);
        rows.push(vec![(u, -1.0)]);
        rows.push(vec![(u, 1.0)]);
        rows.push(vec![(u, -1.0)]);
        bias.extend([1.0, -1.0, -1.0, 1.0]);
        out.push(vec![
            (base, 0.25),
            (base + 1, 0.25),
            (base + 2, -0.25),
            (base + 3, -0.25),
        ]);
    }
    let width = rows.len();
    let n_out = out.len();
    Network::new(
        k,
        vec![
            Layer::sparse(k, rows, bias, Activation::ReluSquared)?,
            Layer::sparse(width, out, vec![0.0; n_out], Activation::Linear)?,
        ],
    )
}

/// `R^k -> R`, product of all inputs by a balanced tree of product gadgets
/// with `ceil(log2 k)` squared-ReLU layers.
pub fn product_tree(k: usize) -> Result<Network> {
    if k == 0 {
        return Err(Error::Structure("product of zero inputs has no input".into()));
    }
    let mut net = Network::affine(k, (0..k).map(|i| vec![(i, 1.0)]).collect(), vec![0.0; k])?;
    let mut width = k;
    while width > 1 {
        net = compose(&pair_level(width)?, &net)?;
        width = width.div_ceil(2);
    }
    Ok(net)
}

/// Affine selection `x -> (x_{j_1}, .., x_{j_r})`.
pub fn select(d: usize, coords: &[usize]) -> Result<Network> {
    Network::affine(
        d,
        coords.iter().map(|&j| vec![(j, 1.0)]).collect(),
        vec![0.0; coords.len()],
    )
}

/// Exact `x^alpha` on `R^d`.
pub fn make_monomial(alpha: &MultiIndex, d: usize) -> Result<Network> {
    if alpha.dim() != d {
        return Err(Error::Dimension(format!(
            "multi-index has {} entries, dimension is {d}",
            alpha.dim()
        )));
    }
    let lits = alpha.literals();
    if lits.is_empty() {
        return Network::constant(d, vec![1.0]);
    }
    compose(&product_tree(lits.len())?, &select(d, &lits)?)
}

/// Exact `sum_j c_j x^{alpha_j}` on `R^d`.
pub fn make_polynomial(terms: &[(f64, MultiIndex)], d: usize) -> Result<Network> {
    if terms.is_empty() {
        return Network::constant(d, vec![0.0]);
    }
    let monos: Vec<Network> = terms.iter().map(|(_, a)| make_monomial(a, d)).collect::<Result<_>>()?;
    let all = parallel(&monos)?;
    all.with_readout(
        vec![terms.iter().enumerate().map(|(j, (c, _))| (j, *c)).collect()],
        vec![0.0],
    )
}

/// Staircase `t -> k` on `[k/K, (k+1)/K - delta]`.
///
/// With `levels > K` and a `shift`, the staircase reads `t + shift` and has
/// `levels` plateaus; this indexes the cells of the shifted region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSpec {
    pub k: usize,
    pub delta: f64,
    pub levels: usize,
    pub shift: f64,
}

impl StepSpec {
    pub fn new(k: usize, delta: f64) -> StepSpec {
        StepSpec {
            k,
            delta,
            levels: k,
            shift: 0.0,
        }
    }

    fn check(&self) -> Result<()> {
        if self.k == 0 || self.levels == 0 {
            return Err(Error::Spec("K must be positive".into()));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0 / (3.0 * self.k as f64)) {
            return Err(Error::Spec(format!(
                "delta = {} outside (0, 1/(3K)] for K = {}",
                self.delta, self.k
            )));
        }
        Ok(())
    }
}

/// Exact staircase from `levels - 1` ramps of slope `1/delta`.
pub fn make_step(spec: &StepSpec) -> Result<Network> {
    spec.check()?;
    let kf = spec.k as f64;
    let n = spec.levels - 1;
    if n == 0 {
        return Network::constant(1, vec![0.0]);
    }
    let inv = 1.0 / spec.delta;
    let mut rows = Vec::with_capacity(2 * n);
    let mut bias = Vec::with_capacity(2 * n);
    for k in 1..=n {
        // ramp input (t + shift - k/K) / delta
        let b = (spec.shift - k as f64 / kf) * inv;
        rows.push(vec![(0, inv)]);
        bias.push(b + 1.0);
        rows.push(vec![(0, inv)]);
        bias.push(b);
    }
    let out = vec![(0..2 * n).map(|i| (i, if i % 2 == 0 { 1.0 } else { -1.0 })).collect()];
    Network::new(
        1,
        vec![
            Layer::sparse(1, rows, bias, Activation::Relu)?,
            Layer::sparse(2 * n, out, vec![0.0], Activation::Linear)?,
        ],
    )
}

/// Shared tent layers over nodes `0..p-1`: `tent_i(t) = relu(1 - |t - i|)`,
/// with the end tents clamped to 1 outside `[0, p-1]`.
fn tent_layers(p: usize) -> Result<(Layer, Layer)> {
    let mut rows_a = Vec::with_capacity(2 * p);
    let mut bias_a = Vec::with_capacity(2 * p);
    for i in 0..p {
        rows_a.push(vec![(0, 1.0)]);
        bias_a.push(-(i as f64));
        rows_a.push(vec![(0, -1.0)]);
        bias_a.push(i as f64);
    }
    let a = Layer::sparse(1, rows_a, bias_a, Activation::Relu)?;
    let mut rows_b = Vec::with_capacity(p);
    for i in 0..p {
        let up = 2 * i;
        let down = 2 * i + 1;
        let row = match (i == 0, i + 1 == p) {
            (true, true) => vec![],
            (true, false) => vec![(up, -1.0)],
            (false, true) => vec![(down, -1.0)],
            (false, false) => vec![(up, -1.0), (down, -1.0)],
        };
        rows_b.push(row);
    }
    let b = Layer::sparse(2 * p, rows_b, vec![1.0; p], Activation::Relu)?;
    Ok((a, b))
}

fn check_unit(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Spec("point fitter needs at least one value".into()));
    }
    if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Spec(format!("fitted value {v} outside [0, 1]")));
    }
    Ok(())
}

/// ReLU network with `phi(i) = xi_i` at every node, linear in between and
/// constant outside `[0, K-1]`.
pub fn make_point_fitter(xs: &[f64]) -> Result<Network> {
    check_unit(xs)?;
    let (a, b) = tent_layers(xs.len())?;
    let out = Layer::sparse(
        xs.len(),
        vec![xs.iter().copied().enumerate().collect()],
        vec![0.0],
        Activation::Linear,
    )?;
    Network::new(1, vec![a, b, out])
}

/// Point fitters for several value tables sharing their tent layers. The
/// fitted values pass through one more ReLU layer, which is exact because
/// they are nonnegative.
pub fn make_point_fitter_multi(tables: &[Vec<f64>]) -> Result<Network> {
    let p = tables.first().map(Vec::len).unwrap_or(0);
    if tables.iter().any(|t| t.len() != p) {
        return Err(Error::Spec("point fitter tables differ in length".into()));
    }
    for t in tables {
        check_unit(t)?;
    }
    let (a, b) = tent_layers(p)?;
    let fit = Layer::sparse(
        p,
        tables.iter().map(|t| t.iter().copied().enumerate().collect()).collect(),
        vec![0.0; tables.len()],
        Activation::Relu,
    )?;
    let k = tables.len();
    let out = Layer::sparse(
        k,
        (0..k).map(|i| vec![(i, 1.0)]).collect(),
        vec![0.0; k],
        Activation::Linear,
    )?;
    Network::new(1, vec![a, b, fit, out])
}

/// `g(u) = relu(u) - relu(u - 1/2)`, the clamp of `u` to `[0, 1/2]`.
pub fn clamp_half(u: f64) -> f64 {
    u.max(0.0) - (u - 0.5).max(0.0)
}

/// The `C^1` bump supported on `[0, 3]`: `2x^2` on `[0, 1/2]`, `1 - 2(x-1)^2`
/// on `[1/2, 1]`, `1` on `[1, 2]`, mirrored on `[2, 3]`.
pub fn bump(x: f64) -> f64 {
    let g2 = |u: f64| {
        let g = clamp_half(u);
        2.0 * g * g
    };
    g2(x) - g2(1.0 - x) + g2(3.0 - x) - g2(x - 2.0)
}

/// `s_1(x) = sum_{i=0}^{K} s(4Kx - 4i)`.
pub fn s1(x: f64, k: usize) -> f64 {
    let kf = k as f64;
    (0..=k).map(|i| bump(4.0 * kf * x - 4.0 * i as f64)).sum()
}

/// `s_2(x) = s_1(x + 1/(2K))`.
pub fn s2(x: f64, k: usize) -> f64 {
    s1(x + 0.5 / k as f64, k)
}

/// Which of the two interleaved bump chains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shift {
    S1,
    S2,
}

impl Shift {
    pub fn from_m(m: u8) -> Result<Shift> {
        match m {
            1 => Ok(Shift::S1),
            2 => Ok(Shift::S2),
            _ => Err(Error::Spec(format!("region index {m} not in {{1, 2}}"))),
        }
    }

    fn offset(self, k: usize) -> f64 {
        match self {
            Shift::S1 => 0.0,
            Shift::S2 => 0.5 / k as f64,
        }
    }
}

/// One ReLU layer and one squared-ReLU layer realizing `s_1` or `s_2`.
pub fn make_bump_chain(k: usize, shift: Shift) -> Result<Network> {
    if k == 0 {
        return Err(Error::Spec("K must be positive".into()));
    }
    let a = 4.0 * k as f64;
    let c = shift.offset(k);
    let mut rows = Vec::new();
    let mut bias = Vec::new();
    // four clamp arguments per bump: y, 1 - y, 3 - y, y - 2 with y = a(x + c) - 4i
    for i in 0..=k {
        let y0 = a * c - 4.0 * i as f64;
        for (sign, off) in [(1.0, 0.0), (-1.0, 1.0), (-1.0, 3.0), (1.0, -2.0)] {
            let w = sign * a;
            let b = sign * y0 + off;
            rows.push(vec![(0, w)]);
            bias.push(b);
            rows.push(vec![(0, w)]);
            bias.push(b - 0.5);
        }
    }
    let n_clamp = rows.len();
    let hidden = Layer::sparse(1, rows, bias, Activation::Relu)?;
    let n_sq = n_clamp / 2;
    let sq = Layer::sparse(
        n_clamp,
        (0..n_sq).map(|q| vec![(2 * q, 1.0), (2 * q + 1, -1.0)]).collect(),
        vec![0.0; n_sq],
        Activation::ReluSquared,
    )?;
    let out = Layer::sparse(
        n_sq,
        vec![(0..n_sq)
            .map(|q| (q, if q % 4 == 0 || q % 4 == 2 { 2.0 } else { -2.0 }))
            .collect()],
        vec![0.0],
        Activation::Linear,
    )?;
    Network::new(1, vec![hidden, sq, out])
}

/// `s_m(x) = prod_j s_{m_j}(x_j)` on `[0, 1]^d`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub k: usize,
    pub m: Vec<u8>,
}

impl PartitionSpec {
    pub fn d(&self) -> usize {
        self.m.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.m
            .iter()
            .zip(x)
            .map(|(&mj, &xj)| if mj == 1 { s1(xj, self.k) } else { s2(xj, self.k) })
            .product()
    }

    /// All `2^d` region indices in lexicographic order.
    pub fn all_regions(d: usize) -> Vec<Vec<u8>> {
        (0..1usize << d)
            .map(|bits| {
                (0..d)
                    .map(|j| if bits >> (d - 1 - j) & 1 == 1 { 2 } else { 1 })
                    .collect()
            })
            .collect()
    }
}

pub fn make_partition_network(spec: &PartitionSpec) -> Result<Network> {
    let d = spec.d();
    if d == 0 || spec.k == 0 {
        return Err(Error::Spec("partition needs d >= 1 and K >= 1".into()));
    }
    let chains: Vec<Network> = spec
        .m
        .iter()
        .enumerate()
        .map(|(j, &mj)| compose(&make_bump_chain(spec.k, Shift::from_m(mj)?)?, &select(d, &[j])?))
        .collect::<Result<_>>()?;
    compose(&product_tree(d)?, &parallel(&chains)?)
}
