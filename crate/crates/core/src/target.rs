//! Target functions with analytic derivatives of every order.
//!
//! A target is a finite sum of separable products `c * prod_j u_j(x_j)` of
//! univariate pieces, so `D^alpha f` is a sum of products of univariate
//! derivatives. Targets are defined on the enlarged box `[-1/2, 3/2]^d`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gadgets::MultiIndex;
use crate::jet::Jet2;

/// Lower and upper edge of the box on which targets are defined.
pub const DOMAIN: (f64, f64) = (-0.5, 1.5);

/// Univariate building block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Piece {
    /// `sin(freq * x + phase)`
    Sin {
        freq: f64,
        phase: f64,
    },
    /// `sum_k c_k x^k`
    Poly(Vec<f64>),
    /// `exp(-((x - center) / width)^2)`
    Gauss {
        center: f64,
        width: f64,
    },
    Const(f64),
}

/// Physicists' Hermite polynomial `H_k(u)`.
fn hermite(k: usize, u: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * u);
    if k == 0 {
        return h0;
    }
    for j in 1..k {
        let h2 = 2.0 * u * h1 - 2.0 * j as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

impl Piece {
    /// `k`-th derivative at `x`.
    pub fn deriv(&self, k: usize, x: f64) -> f64 {
        match self {
            Piece::Sin { freq, phase } => freq.powi(k as i32) * (freq * x + phase + k as f64 * PI / 2.0).sin(),
            Piece::Poly(c) => {
                let mut acc = 0.0;
                for j in (k..c.len()).rev() {
                    let falling: f64 = ((j - k + 1)..=j).map(|t| t as f64).product();
                    acc = acc * x + c[j] * falling;
                }
                acc
            }
            Piece::Gauss { center, width } => {
                let u = (x - center) / width;
                let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
                sign * hermite(k, u) * (-u * u).exp() / width.powi(k as i32)
            }
            Piece::Const(c) => {
                if k == 0 {
                    *c
                } else {
                    0.0
                }
            }
        }
    }
}

/// One separable product `coef * prod_j factors[j](x_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coef: f64,
    pub factors: Vec<Piece>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetFunction {
    pub name: String,
    pub d: usize,
    pub terms: Vec<Term>,
}

impl TargetFunction {
    pub fn new(name: impl Into<String>, d: usize, terms: Vec<Term>) -> Result<TargetFunction> {
        if d == 0 {
            return Err(Error::Spec("target dimension must be positive".into()));
        }
        if terms.iter().any(|t| t.factors.len() != d) {
            return Err(Error::Spec("every term needs one factor per dimension".into()));
        }
        Ok(TargetFunction {
            name: name.into(),
            d,
            terms,
        })
    }

    /// `prod_j sin(pi x_j)`
    pub fn sin_pi(d: usize) -> TargetFunction {
        Self::sines("sin_pi", vec![PI; d])
    }

    /// `prod_j sin(2 pi x_j)`
    pub fn sin_2pi(d: usize) -> TargetFunction {
        Self::sines("sin_2pi", vec![2.0 * PI; d])
    }

    /// `prod_j sin((j + 1) pi x_j)`
    pub fn product_of_sines(d: usize) -> TargetFunction {
        Self::sines("product_of_sines", (1..=d).map(|j| j as f64 * PI).collect())
    }

    fn sines(name: &str, freqs: Vec<f64>) -> TargetFunction {
        let d = freqs.len();
        let factors = freqs.into_iter().map(|freq| Piece::Sin { freq, phase: 0.0 }).collect();
        TargetFunction::new(name, d, vec![Term { coef: 1.0, factors }]).expect("valid target")
    }

    /// `sum_k c_k x_1^k`, constant in the other coordinates.
    pub fn poly(coeffs: Vec<f64>, d: usize) -> TargetFunction {
        let mut factors = vec![Piece::Const(1.0); d];
        factors[0] = Piece::Poly(coeffs);
        TargetFunction::new("poly", d, vec![Term { coef: 1.0, factors }]).expect("valid target")
    }

    /// Gaussian centred in the unit cube.
    pub fn gaussian_bump(d: usize) -> TargetFunction {
        let factors = vec![
            Piece::Gauss {
                center: 0.5,
                width: 0.3,
            };
            d
        ];
        TargetFunction::new("gaussian_bump", d, vec![Term { coef: 1.0, factors }]).expect("valid target")
    }

    pub fn constant(c: f64, d: usize) -> TargetFunction {
        TargetFunction::new(
            "const",
            d,
            vec![Term {
                coef: c,
                factors: vec![Piece::Const(1.0); d],
            }],
        )
        .expect("valid target")
    }

    /// Polynomial `sum c_j x^{alpha_j}` in `d` variables.
    pub fn polynomial(terms: &[(f64, MultiIndex)], d: usize) -> Result<TargetFunction> {
        let terms = terms
            .iter()
            .map(|(c, a)| {
                if a.dim() != d {
                    return Err(Error::Dimension("monomial dimension mismatch".into()));
                }
                let factors =
                    a.0.iter()
                        .map(|&k| {
                            let mut co = vec![0.0; k + 1];
                            co[k] = 1.0;
                            Piece::Poly(co)
                        })
                        .collect();
                Ok(Term { coef: *c, factors })
            })
            .collect::<Result<_>>()?;
        TargetFunction::new("polynomial", d, terms)
    }

    /// Parses `sin_pi`, `sin_2pi`, `gaussian_bump`, `product_of_sines`,
    /// `const(c)` or `poly(c0,c1,..)`.
    pub fn parse(spec: &str, d: usize) -> Result<TargetFunction> {
        let spec = spec.trim();
        let args = |s: &str| -> Result<Vec<f64>> {
            s.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Config(format!("bad coefficient {t:?}: {e}")))
                })
                .collect()
        };
        if let Some(inner) = spec.strip_prefix("poly(").and_then(|s| s.strip_suffix(')')) {
            return Ok(TargetFunction::poly(args(inner)?, d));
        }
        if let Some(inner) = spec.strip_prefix("const(").and_then(|s| s.strip_suffix(')')) {
            let v = args(inner)?;
            if v.len() != 1 {
                return Err(Error::Config("const takes one value".into()));
            }
            return Ok(TargetFunction::constant(v[0], d));
        }
        match spec {
            "sin_pi" => Ok(Self::sin_pi(d)),
            "sin_2pi" => Ok(Self::sin_2pi(d)),
            "gaussian_bump" => Ok(Self::gaussian_bump(d)),
            "product_of_sines" => Ok(Self::product_of_sines(d)),
            other => Err(Error::Config(format!("unknown target {other:?}"))),
        }
    }

    pub fn check_domain(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::Dimension(format!(
                "point has {} coordinates, target {}",
                x.len(),
                self.d
            )));
        }
        let (lo, hi) = DOMAIN;
        if x.iter().any(|v| !(lo..=hi).contains(v)) {
            return Err(Error::Domain(format!("{x:?} outside [{lo}, {hi}]^{}", self.d)));
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.deriv(&vec![0; self.d], x)
    }

    /// `D^alpha f(x)`
    pub fn deriv(&self, alpha: &[usize], x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.coef
                    * t.factors
                        .iter()
                        .zip(alpha)
                        .zip(x)
                        .map(|((p, &k), &v)| p.deriv(k, v))
                        .product::<f64>()
            })
            .sum()
    }

    pub fn jet(&self, x: &[f64]) -> Jet2 {
        let d = self.d;
        let mut jet = Jet2::zero(d);
        jet.value = self.value(x);
        let mut alpha = vec![0; d];
        for i in 0..d {
            alpha[i] += 1;
            jet.grad[i] = self.deriv(&alpha, x);
            for j in 0..=i {
                alpha[j] += 1;
                let v = self.deriv(&alpha, x);
                jet.hess[i * d + j] = v;
                jet.hess[j * d + i] = v;
                alpha[j] -= 1;
            }
            alpha[i] -= 1;
        }
        jet
    }
}
