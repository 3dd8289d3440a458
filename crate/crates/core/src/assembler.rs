//! Assembly of the full approximant.
//!
//! For a region `m`, `gamma_m(x) = sum_alpha g_alpha(x) x^alpha` where
//! `g_alpha` is the cellwise constant coefficient of the averaged Taylor
//! polynomial. The coefficient is looked up by a ReLU pipeline
//!
//! ```text
//! x -> (i_1, .., i_d)        staircases, one per axis
//!   -> p = sum_j i_j s_j     mixed-radix cell index
//!   -> xi_alpha(p)           point fitter, values in [0, 1]
//!   -> g_alpha = 2 B_alpha xi_alpha - B_alpha
//! ```
//!
//! and multiplied with exact monomial networks by product gadgets. The
//! global network is `gamma = sum_m s_m gamma_m` with the partition of unity
//! `s_m`. All squared-ReLU layers end up in the tail.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gadgets::{
    make_monomial, make_partition_network, make_point_fitter_multi, make_step, product_pairs, select, PartitionSpec,
    StepSpec,
};
use crate::local_poly::{build_f_k_m, PiecewisePolyApproximant};
use crate::metrics::{sobolev_norms, Domain, GridSpec, RegionSpec};
use crate::net::{compose, parallel, validate_dsrn, Layer, Network};
use crate::target::TargetFunction;

/// Constant `C` against which every assembled network is validated.
pub const DSRN_C: f64 = 6.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproximantConfig {
    /// Width and depth budget `(N, L)`; absent when `K` was set directly.
    pub budget: Option<(usize, usize)>,
    /// Smoothness order of the target.
    pub n: usize,
    pub p: f64,
    pub d: usize,
    /// Cells per axis.
    pub k: usize,
}

fn floor_root(x: usize, num: u32, den: u32) -> usize {
    // floor(x^(num/den)) robust to rounding
    let guess = (x as f64).powf(num as f64 / den as f64).round() as usize;
    let pow_le = |c: usize| -> bool {
        // c^den <= x^num
        (c as f64).powi(den as i32) <= (x as f64).powi(num as i32) * (1.0 + 1e-12)
    };
    let mut c = guess + 1;
    while c > 0 && !pow_le(c) {
        c -= 1;
    }
    c
}

impl ApproximantConfig {
    /// `K = floor(N^{1/d})^2 floor(L^{2/d})` after checking the width and
    /// depth hypotheses `N log2 L + 2^{floor(log2 N)} >= max(d, n)` and `L >= N`.
    pub fn from_budget(nb: usize, lb: usize, n: usize, p: f64, d: usize) -> Result<ApproximantConfig> {
        if nb == 0 || lb == 0 || d == 0 {
            return Err(Error::Config("N, L and d must be positive".into()));
        }
        if n < 2 {
            return Err(Error::Config(format!("smoothness n = {n} must be at least 2")));
        }
        let lhs = nb as f64 * (lb as f64).log2() + 2f64.powi((nb as f64).log2().floor() as i32);
        if lhs < d.max(n) as f64 {
            return Err(Error::Config(format!(
                "N log2 L + 2^floor(log2 N) = {lhs} < max(d, n) = {}",
                d.max(n)
            )));
        }
        if lb < nb {
            return Err(Error::Config(format!("L = {lb} must be at least N = {nb}")));
        }
        let a = floor_root(nb, 1, d as u32);
        let b = floor_root(lb, 2, d as u32);
        let k = a * a * b;
        Self::check_p(p)?;
        Ok(ApproximantConfig {
            budget: Some((nb, lb)),
            n,
            p,
            d,
            k,
        })
    }

    /// Direct choice of `K`, without a width/depth budget.
    pub fn with_cells(k: usize, n: usize, p: f64, d: usize) -> Result<ApproximantConfig> {
        if k == 0 || d == 0 {
            return Err(Error::Config("K and d must be positive".into()));
        }
        if n < 2 {
            return Err(Error::Config(format!("smoothness n = {n} must be at least 2")));
        }
        Self::check_p(p)?;
        Ok(ApproximantConfig {
            budget: None,
            n,
            p,
            d,
            k,
        })
    }

    fn check_p(p: f64) -> Result<()> {
        if p >= 1.0 {
            Ok(())
        } else {
            Err(Error::Config(format!("p = {p} must lie in [1, inf]")))
        }
    }

    /// Width bound `2^{d+6} n^{d+1} (N+d) log2(8N)`.
    pub fn width_budget(&self) -> Option<f64> {
        self.budget.map(|(nb, _)| {
            let d = self.d as f64;
            2f64.powf(d + 6.0) * (self.n as f64).powf(d + 1.0) * (nb as f64 + d) * (8.0 * nb as f64).log2()
        })
    }

    /// Depth bound `10 (L+1) log2(4L)`.
    pub fn depth_budget(&self) -> Option<f64> {
        self.budget
            .map(|(_, lb)| 10.0 * (lb as f64 + 1.0) * (4.0 * lb as f64).log2())
    }
}

/// Realized sizes against the theoretical budgets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub width_realized: usize,
    pub depth_realized: usize,
    pub relu_depth: usize,
    pub relu2_depth: usize,
    pub stored_weights: usize,
    pub width_budget: Option<f64>,
    pub depth_budget: Option<f64>,
    pub over_budget: Option<bool>,
    /// Smallest `C` with `L2 <= C log2 L`.
    pub c_required: Option<f64>,
    /// Normalization bounds `B_alpha`, one per region for the full network.
    pub coefficient_bounds: Vec<Vec<f64>>,
}

fn report(net: &Network, cfg: &ApproximantConfig, bounds: Vec<Vec<f64>>) -> Result<BudgetReport> {
    let profile =
        validate_dsrn(net, DSRN_C).map_err(|e| Error::Internal(format!("assembled network is not a DSRN: {e}")))?;
    let width_budget = cfg.width_budget();
    let depth_budget = cfg.depth_budget();
    let over_budget = match (width_budget, depth_budget) {
        (Some(w), Some(dd)) => Some(net.width() as f64 > w || net.depth() as f64 > dd),
        _ => None,
    };
    Ok(BudgetReport {
        width_realized: net.width(),
        depth_realized: net.depth(),
        relu_depth: profile.relu_depth,
        relu2_depth: profile.relu2_depth,
        stored_weights: net.layers().iter().map(Layer::nnz).sum(),
        width_budget,
        depth_budget,
        over_budget,
        c_required: profile.min_c(),
        coefficient_bounds: bounds,
    })
}

/// Normalized tables `xi_alpha = (g / B_alpha + 1) / 2`.
pub fn normalized_tables(approx: &PiecewisePolyApproximant) -> (Vec<Vec<f64>>, Vec<f64>) {
    let bounds = approx.coefficient_bounds();
    let tables = (0..approx.alphas.len())
        .map(|a| {
            approx
                .table(a)
                .into_iter()
                .map(|g| ((g / bounds[a] + 1.0) / 2.0).clamp(0.0, 1.0))
                .collect()
        })
        .collect();
    (tables, bounds)
}

/// `x -> p`, the flat index of the cell of `x` (exact inside cells).
fn cell_index_net(region: &RegionSpec) -> Result<Network> {
    let d = region.d();
    let k = region.k;
    let steps: Vec<Network> = (0..d)
        .map(|j| {
            let spec = StepSpec {
                k,
                delta: 0.25 / k as f64,
                levels: region.levels(j),
                shift: region.shift(j),
            };
            compose(&make_step(&spec)?, &select(d, &[j])?)
        })
        .collect::<Result<_>>()?;
    let mut stride = 1.0;
    let mut row = Vec::with_capacity(d);
    for j in 0..d {
        row.push((j, stride));
        stride *= region.levels(j) as f64;
    }
    // p >= 0, so one ReLU neuron carries it exactly and keeps the fan-in small
    parallel(&steps)?.with_readout(vec![row], vec![0.0])?.rectify_outputs()
}

/// Coefficient pipeline: `x -> (g_alpha(x))_alpha`.
fn coefficient_net(approx: &PiecewisePolyApproximant) -> Result<(Network, Vec<f64>)> {
    let (tables, bounds) = normalized_tables(approx);
    let fitter = make_point_fitter_multi(&tables)?;
    let readout = (0..bounds.len()).map(|a| vec![(a, 2.0 * bounds[a])]).collect();
    let offsets = bounds.iter().map(|b| -b).collect();
    let fitted = compose(&fitter, &cell_index_net(&approx.region)?)?;
    Ok((fitted.with_readout(readout, offsets)?, bounds))
}

/// `gamma_m` from a prepared cellwise approximant.
pub fn gamma_m_from(approx: &PiecewisePolyApproximant) -> Result<(Network, Vec<f64>)> {
    let d = approx.region.d();
    let (coef, bounds) = coefficient_net(approx)?;
    let monos: Vec<Network> = approx
        .alphas
        .iter()
        .map(|a| make_monomial(a, d))
        .collect::<Result<_>>()?;
    let monos = parallel(&monos)?;
    let both = parallel(&[coef, monos])?;
    let r = approx.alphas.len();
    let net = compose(&product_pairs(r)?, &both)?;
    let net = net.with_readout(vec![(0..r).map(|i| (i, 1.0)).collect()], vec![0.0])?;
    Ok((net, bounds))
}

/// `gamma_m` and its budget report.
pub fn build_gamma_m(f: &TargetFunction, cfg: &ApproximantConfig, m: &[u8]) -> Result<(Network, BudgetReport)> {
    if f.d != cfg.d || m.len() != cfg.d {
        return Err(Error::Config("target, region and config dimensions differ".into()));
    }
    let approx = build_f_k_m(f, cfg.k, m, cfg.n)?;
    let (net, bounds) = gamma_m_from(&approx)?;
    let rep = report(&net, cfg, vec![bounds])?;
    Ok((net, rep))
}

/// The pieces of the global approximant, kept for diagnostics.
#[derive(Clone, Debug)]
pub struct Assembly {
    pub gamma: Network,
    pub regions: Vec<Vec<u8>>,
    pub gamma_m: Vec<Network>,
    pub partitions: Vec<Network>,
    pub report: BudgetReport,
}

/// `gamma = sum_m s_m gamma_m` over all `2^d` regions.
pub fn assemble(f: &TargetFunction, cfg: &ApproximantConfig) -> Result<Assembly> {
    if f.d != cfg.d {
        return Err(Error::Config("target and config dimensions differ".into()));
    }
    let regions = PartitionSpec::all_regions(cfg.d);
    let mut gamma_m = Vec::new();
    let mut partitions = Vec::new();
    let mut bounds = Vec::new();
    for m in &regions {
        let approx = build_f_k_m(f, cfg.k, m, cfg.n)?;
        let (g, b) = gamma_m_from(&approx)?;
        gamma_m.push(g);
        bounds.push(b);
        partitions.push(make_partition_network(&PartitionSpec { k: cfg.k, m: m.clone() })?);
    }
    let r = regions.len();
    let mut branches = partitions.clone();
    branches.extend(gamma_m.iter().cloned());
    let net = compose(&product_pairs(r)?, &parallel(&branches)?)?;
    let gamma = net.with_readout(vec![(0..r).map(|i| (i, 1.0)).collect()], vec![0.0])?;
    let report = report(&gamma, cfg, bounds)?;
    Ok(Assembly {
        gamma,
        regions,
        gamma_m,
        partitions,
        report,
    })
}

pub fn assemble_gamma(f: &TargetFunction, cfg: &ApproximantConfig) -> Result<(Network, BudgetReport)> {
    let a = assemble(f, cfg)?;
    Ok((a.gamma, a.report))
}

/// One row of a rate table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub budget: Option<(usize, usize)>,
    pub k: usize,
    pub p: f64,
    pub err_l: f64,
    pub err_w1: f64,
    pub err_w2: f64,
    pub width_realized: usize,
    pub depth_realized: usize,
    pub width_budget: Option<f64>,
    pub depth_budget: Option<f64>,
    pub over_budget: Option<bool>,
    pub kink_hits: usize,
    pub discrepancy: f64,
}

/// Least-squares slopes of `log err` against `log K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSlopes {
    pub p: f64,
    pub slope_l: f64,
    pub slope_w1: f64,
    pub slope_w2: f64,
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Samples per unit length used to measure errors at resolution `K`: 64 per
/// cell in one dimension and 8 per cell per axis otherwise, capped at 4096
/// (one dimension) or 128 (per axis) since a jet costs `O(K)` at size `K`.
/// Past the cap the grid no longer visits every cell, so sup errors become
/// sampled estimates.
pub fn sweep_grid(k: usize, d: usize, seed: u64) -> GridSpec {
    let (per_cell, cap) = if d == 1 { (64, 4096) } else { (8, 128) };
    GridSpec::new((per_cell * k).min(cap), seed)
}

/// Assembles `gamma` for every config and measures `L^p`, `W^{1,p}` and
/// `W^{2,p}` errors on the unit cube for each exponent in `ps`.
pub fn rate_sweep(
    f: &TargetFunction,
    configs: &[ApproximantConfig],
    ps: &[f64],
    seed: u64,
) -> Result<(Vec<RateRow>, Vec<RateSlopes>)> {
    if configs.windows(2).any(|w| w[0].k >= w[1].k) {
        return Err(Error::Config("sweep configs must have strictly increasing K".into()));
    }
    let mut rows = Vec::new();
    for cfg in configs {
        let a = assemble(f, cfg)?;
        let grid = sweep_grid(cfg.k, cfg.d, seed);
        let diff = crate::metrics::Difference(f, &a.gamma);
        let reports = sobolev_norms(&diff, 2, ps, &Domain::unit_cube(cfg.d), &grid)?;
        for r in reports {
            rows.push(RateRow {
                budget: cfg.budget,
                k: cfg.k,
                p: r.p,
                err_l: r.norm_of_order(0),
                err_w1: r.norm_of_order(1),
                err_w2: r.norm_of_order(2),
                width_realized: a.report.width_realized,
                depth_realized: a.report.depth_realized,
                width_budget: a.report.width_budget,
                depth_budget: a.report.depth_budget,
                over_budget: a.report.over_budget,
                kink_hits: r.kink_hits,
                discrepancy: r.discrepancy,
            });
        }
    }
    let slopes = ps
        .iter()
        .map(|&p| {
            let sel: Vec<&RateRow> = rows.iter().filter(|r| r.p == p).collect();
            let xs: Vec<f64> = sel.iter().map(|r| (r.k as f64).ln()).collect();
            let fit = |g: fn(&RateRow) -> f64| fit_slope(&xs, &sel.iter().map(|r| g(r).ln()).collect::<Vec<_>>());
            RateSlopes {
                p,
                slope_l: fit(|r| r.err_l),
                slope_w1: fit(|r| r.err_w1),
                slope_w2: fit(|r| r.err_w2),
            }
        })
        .collect();
    Ok((rows, slopes))
}
