//! Averaged Taylor polynomials and the cellwise polynomial approximant.
//!
//! For a ball `B = B_r(x0)` and the normalized bump
//! `b(y) = exp(-1 / (1 - |y - x0|^2 / r^2))`, the averaged Taylor polynomial
//! of order `n` is
//!
//! ```text
//! Q^n f(x) = int_B sum_{|beta| < n} D^beta f(y) (x - y)^beta / beta! b(y) dy / int_B b
//!          = sum_{|alpha| < n} c_alpha x^alpha.
//! ```
//!
//! Integrals use a tensor Gauss-Legendre rule on the bounding box of the
//! ball, doubled until two consecutive rules agree.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gadgets::MultiIndex;
use crate::jet::{Jet2, KinkStats};
use crate::metrics::{axis_samples, for_each_point, Domain, GridSpec, JetSource, RegionSpec};
use crate::target::{TargetFunction, DOMAIN};

const QUAD_START: usize = 12;
const QUAD_MAX: usize = 192;
const QUAD_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// `Q^n f = sum_alpha coeffs[k] x^{alphas[k]}` over `|alpha| <= n - 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvgTaylorPoly {
    pub n: usize,
    pub alphas: Vec<MultiIndex>,
    pub coeffs: Vec<f64>,
    /// Gauss-Legendre points per axis of the accepted rule.
    pub quad_points: usize,
}

/// Value, gradient and Hessian of `sum_k c_k x^{alpha_k}`.
pub fn poly_jet(alphas: &[MultiIndex], coeffs: &[f64], x: &[f64]) -> Jet2 {
    let d = x.len();
    let mut jet = Jet2::zero(d);
    // x_j^e and its first two derivatives
    let pw = |j: usize, e: usize, der: usize| -> f64 {
        if der > e {
            return 0.0;
        }
        let falling: f64 = ((e - der + 1)..=e).map(|t| t as f64).product();
        falling * x[j].powi((e - der) as i32)
    };
    for (a, &c) in alphas.iter().zip(coeffs) {
        if c == 0.0 {
            continue;
        }
        let mono = |ders: &[usize]| -> f64 {
            let mut prod = c;
            for j in 0..d {
                let k = ders.iter().filter(|&&t| t == j).count();
                prod *= pw(j, a.0[j], k);
            }
            prod
        };
        jet.value += mono(&[]);
        for i in 0..d {
            jet.grad[i] += mono(&[i]);
            for k in 0..d {
                jet.hess[i * d + k] += mono(&[i, k]);
            }
        }
    }
    jet
}

impl AvgTaylorPoly {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.alphas.iter().zip(&self.coeffs).map(|(a, c)| c * a.pow(x)).sum()
    }

    pub fn jet(&self, x: &[f64]) -> Jet2 {
        poly_jet(&self.alphas, &self.coeffs, x)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn bump_weight(y: &[f64], ball: &BallSpec) -> f64 {
    let r2: f64 = y.iter().zip(&ball.center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (ball.radius * ball.radius);
    if r2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r2)).exp()
    }
}

/// Coefficients for a fixed rule with `q` points per axis.
fn coefficients_with(f: &TargetFunction, ball: &BallSpec, alphas: &[MultiIndex], q: usize) -> Vec<f64> {
    let rule = GaussLegendre::new(NonZeroUsize::new(q).expect("q > 0"));
    let axes: Vec<Vec<(f64, f64)>> = ball
        .center
        .iter()
        .map(|&c| {
            rule.as_node_weight_pairs()
                .iter()
                .map(|&(t, w)| (c + ball.radius * t, ball.radius * w))
                .collect()
        })
        .collect();
    // for each beta: list of (alpha index, C(beta, alpha) (-1)^{|beta-alpha|} / beta!, beta - alpha)
    #[allow(clippy::type_complexity)]
    let expansion: Vec<(MultiIndex, Vec<(usize, f64, MultiIndex)>)> = alphas
        .iter()
        .map(|beta| {
            let terms = alphas
                .iter()
                .enumerate()
                .filter(|(_, a)| a.dominated_by(beta))
                .map(|(ai, a)| {
                    let diff = MultiIndex(beta.0.iter().zip(&a.0).map(|(b, a)| b - a).collect());
                    let c: f64 = beta.0.iter().zip(&a.0).map(|(&b, &a)| binom(b, a)).product();
                    let sign = if diff.order().is_multiple_of(2) { 1.0 } else { -1.0 };
                    (ai, sign * c / beta.factorial(), diff)
                })
                .collect();
            (beta.clone(), terms)
        })
        .collect();
    let mut num = vec![0.0; alphas.len()];
    let mut mass = 0.0;
    for_each_point(&axes, |y, w| {
        let b = bump_weight(y, ball);
        if b == 0.0 {
            return Ok(());
        }
        let wb = w * b;
        mass += wb;
        for (beta, terms) in &expansion {
            let dbf = f.deriv(&beta.0, y) * wb;
            for (ai, c, diff) in terms {
                num[*ai] += c * dbf * diff.pow(y);
            }
        }
        Ok(())
    })
    .expect("closure is infallible");
    num.iter().map(|v| v / mass).collect()
}

/// Averaged Taylor polynomial of order `n` (degree `n - 1`) over `ball`.
pub fn averaged_taylor(f: &TargetFunction, ball: &BallSpec, n: usize) -> Result<AvgTaylorPoly> {
    let d = f.d;
    if ball.center.len() != d {
        return Err(Error::Dimension("ball centre dimension differs from target".into()));
    }
    if n == 0 {
        return Err(Error::Spec("order n must be at least 1".into()));
    }
    if !(ball.radius > 0.0) {
        return Err(Error::Spec("ball radius must be positive".into()));
    }
    let (lo, hi) = DOMAIN;
    if ball
        .center
        .iter()
        .any(|&c| c - ball.radius < lo || c + ball.radius > hi)
    {
        return Err(Error::Domain(format!(
            "ball at {:?} with radius {} leaves [{lo}, {hi}]^{d}",
            ball.center, ball.radius
        )));
    }
    let alphas = MultiIndex::up_to(d, n - 1);
    let mut q = QUAD_START;
    let mut prev = coefficients_with(f, ball, &alphas, q);
    loop {
        let next_q = 2 * q;
        let next = coefficients_with(f, ball, &alphas, next_q);
        let scale = next.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let diff = prev.iter().zip(&next).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if diff <= QUAD_TOL * scale || scale == 0.0 {
            return Ok(AvgTaylorPoly {
                n,
                alphas,
                coeffs: next,
                quad_points: next_q,
            });
        }
        if next_q >= QUAD_MAX {
            return Err(Error::Accuracy(format!(
                "coefficients still move by {diff:.3e} (scale {scale:.3e}) at {next_q} points per axis"
            )));
        }
        q = next_q;
        prev = next;
    }
}

/// Cellwise polynomial `f_{K,m}`: on cell `Omega_{m,i}` it equals the
/// averaged Taylor polynomial over the ball inscribed in that cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePolyApproximant {
    pub region: RegionSpec,
    pub n: usize,
    pub alphas: Vec<MultiIndex>,
    /// `coeffs[p][k]` is `c_{f,i,alpha_k}` for the cell with flat index `p`.
    pub coeffs: Vec<Vec<f64>>,
}

pub fn build_f_k_m(f: &TargetFunction, k: usize, m: &[u8], n: usize) -> Result<PiecewisePolyApproximant> {
    let region = RegionSpec::new(k, m.to_vec())?;
    if region.d() != f.d {
        return Err(Error::Dimension("region and target dimensions differ".into()));
    }
    let radius = region.ball_radius();
    let coeffs = (0..region.cell_count())
        .map(|p| {
            let cell = region.unflatten(p);
            let center = cell
                .iter()
                .enumerate()
                .map(|(j, &i)| region.ball_center(j, i))
                .collect();
            averaged_taylor(f, &BallSpec { center, radius }, n).map(|q| q.coeffs)
        })
        .collect::<Result<_>>()?;
    Ok(PiecewisePolyApproximant {
        region,
        n,
        alphas: MultiIndex::up_to(f.d, n - 1),
        coeffs,
    })
}

impl PiecewisePolyApproximant {
    /// `B_alpha = max_i |c_{f,i,alpha}|`, replaced by 1 when all vanish.
    pub fn coefficient_bounds(&self) -> Vec<f64> {
        (0..self.alphas.len())
            .map(|a| {
                let b = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c[a].abs()));
                if b > 0.0 {
                    b
                } else {
                    1.0
                }
            })
            .collect()
    }

    /// `g_{f,alpha,m}` as a table over flat cell indices.
    pub fn table(&self, alpha: usize) -> Vec<f64> {
        self.coeffs.iter().map(|c| c[alpha]).collect()
    }
}

/// Jet of the local polynomial of the cell containing `x`.
pub fn eval_piecewise(approx: &PiecewisePolyApproximant, x: &[f64]) -> Result<Jet2> {
    let cell = approx
        .region
        .cell_of(x)
        .ok_or_else(|| Error::Domain(format!("{x:?} lies in no cell of region {:?}", approx.region.m)))?;
    let p = approx.region.flat_index(&cell);
    Ok(poly_jet(&approx.alphas, &approx.coeffs[p], x))
}

impl JetSource for PiecewisePolyApproximant {
    fn dim(&self) -> usize {
        self.region.d()
    }

    fn jet(&self, x: &[f64], _: &mut KinkStats) -> Result<Jet2> {
        eval_piecewise(self, x)
    }
}

/// Cutoff `h_i(x) = h(4K(x - (8i+3)/(8K)))` with `h = 1` on `|u| <= 3/2`,
/// falling linearly to 0 at `|u| = 5/2`. The family sums to one on
/// `[0, 1]` and `h_i = 1` on `[i/K, (3+4i)/(4K)]`.
pub fn cutoff(i: usize, k: usize, x: f64) -> f64 {
    let kf = k as f64;
    let u = (4.0 * kf * (x - (8.0 * i as f64 + 3.0) / (8.0 * kf))).abs();
    (2.5 - u).clamp(0.0, 1.0)
}

/// One row of a Bramble-Hilbert scaling table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BhRow {
    /// Side length of the cube.
    pub side: f64,
    /// `h = diam`.
    pub h: f64,
    pub error_seminorm: f64,
    pub f_seminorm: f64,
    /// `error / (h^{n-k} |f|_{W^{n,p}})`
    pub ratio: f64,
}

fn sup_seminorm<F: Fn(&[f64]) -> Result<Vec<f64>>>(values: F, domain: &Domain, per_unit: usize, p: f64) -> Result<f64> {
    let axes = axis_samples(
        domain,
        &GridSpec {
            per_unit,
            seed: 0,
            jitter: false,
        },
    );
    let mut acc: Vec<f64> = Vec::new();
    for_each_point(&axes, |x, w| {
        let v = values(x)?;
        if acc.is_empty() {
            acc = vec![0.0; v.len()];
        }
        for (a, t) in acc.iter_mut().zip(v) {
            if p.is_infinite() {
                *a = a.max(t.abs());
            } else {
                *a += w * t.abs().powf(p);
            }
        }
        Ok(())
    })?;
    Ok(if p.is_infinite() {
        acc.into_iter().fold(0.0, f64::max)
    } else {
        acc.into_iter().sum::<f64>().powf(1.0 / p)
    })
}

/// Ratios `|f - Q^n f|_{W^{k,p}(Q_s)} / (h^{n-k} |f|_{W^{n,p}(Q_s)})` on
/// cubes `Q_s` of side `s` centred at `center`, averaged over the inner
/// ball of radius `s/3`, for every `s` in `sides`.
pub fn bramble_hilbert_check(
    f: &TargetFunction,
    n: usize,
    k: usize,
    p: f64,
    center: &[f64],
    sides: &[f64],
) -> Result<Vec<BhRow>> {
    if k > 2 || k > n {
        return Err(Error::Spec(format!(
            "seminorm order k = {k} must satisfy k <= min(2, n)"
        )));
    }
    let d = f.d;
    let per_side = if d == 1 { 400 } else { 40 };
    let high = MultiIndex::up_to(d, n)
        .into_iter()
        .filter(|a| a.order() == n)
        .collect::<Vec<_>>();
    let low = MultiIndex::up_to(d, k)
        .into_iter()
        .filter(|a| a.order() == k)
        .collect::<Vec<_>>();
    sides
        .iter()
        .map(|&s| {
            let q = averaged_taylor(
                f,
                &BallSpec {
                    center: center.to_vec(),
                    radius: s / 3.0,
                },
                n,
            )?;
            let domain = Domain {
                axes: center.iter().map(|&c| vec![(c - s / 2.0, c + s / 2.0)]).collect(),
            };
            let per_unit = (per_side as f64 / s).ceil() as usize;
            let err = sup_seminorm(
                |x| {
                    let qj = q.jet(x);
                    let fj = f.jet(x);
                    Ok(low
                        .iter()
                        .map(|a| fj.derivative(&a.0).unwrap() - qj.derivative(&a.0).unwrap())
                        .collect())
                },
                &domain,
                per_unit,
                p,
            )?;
            let fs = sup_seminorm(
                |x| Ok(high.iter().map(|a| f.deriv(&a.0, x)).collect()),
                &domain,
                per_unit,
                p,
            )?;
            let h = s * (d as f64).sqrt();
            Ok(BhRow {
                side: s,
                h,
                error_seminorm: err,
                f_seminorm: fs,
                ratio: err / (h.powi((n - k) as i32) * fs),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_quadratics() {
        let f = TargetFunction::poly(vec![0.0, 0.0, 1.0], 1);
        let q = averaged_taylor(
            &f,
            &BallSpec {
                center: vec![0.3],
                radius: 0.1,
            },
            3,
        )
        .unwrap();
        for x in [-0.4, 0.0, 0.7, 1.2] {
            assert!((q.eval(&[x]) - x * x).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_has_single_coefficient() {
        let f = TargetFunction::constant(2.5, 1);
        let q = averaged_taylor(
            &f,
            &BallSpec {
                center: vec![0.5],
                radius: 0.2,
            },
            1,
        )
        .unwrap();
        assert_eq!(q.coeffs.len(), 1);
        assert!((q.coeffs[0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn ball_outside_domain_is_rejected() {
        let f = TargetFunction::sin_pi(1);
        let err = averaged_taylor(
            &f,
            &BallSpec {
                center: vec![1.4],
                radius: 0.2,
            },
            2,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn piecewise_constant_target() {
        let f = TargetFunction::constant(1.0, 1);
        let a = build_f_k_m(&f, 3, &[2], 3).unwrap();
        let j = eval_piecewise(&a, &[0.4]).unwrap();
        assert!((j.value - 1.0).abs() < 1e-12);
        assert!(j.grad[0].abs() < 1e-12 && j.hess[0].abs() < 1e-12);
        assert!(matches!(eval_piecewise(&a, &[0.12]), Err(Error::Domain(_))));
    }

    #[test]
    fn monomial_jet() {
        let j = poly_jet(&[MultiIndex(vec![2])], &[1.0], &[0.3]);
        assert!((j.value - 0.09).abs() < 1e-15);
        assert!((j.grad[0] - 0.6).abs() < 1e-15);
        assert_eq!(j.hess[0], 2.0);
    }

    #[test]
    fn cutoffs_partition_unity() {
        let k = 5;
        for s in 0..=500 {
            let x = s as f64 / 500.0;
            let sum: f64 = (0..=k).map(|i| cutoff(i, k, x)).sum();
            assert!((sum - 1.0).abs() < 1e-12, "x={x}: {sum}");
        }
        assert_eq!(cutoff(2, k, 2.0 / 5.0 + 0.1), 1.0);
    }

    #[test]
    fn coefficient_bounds_fall_back_to_one() {
        let f = TargetFunction::constant(0.0, 1);
        let a = build_f_k_m(&f, 2, &[1], 2).unwrap();
        assert_eq!(a.coefficient_bounds(), vec![1.0, 1.0]);
    }
}
