use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::base_geom::ChartMetric;
use crate::error::{GeomError, Result};
use crate::expr::{eval_jet, parse, Expr};
use crate::linalg::bilinear;

/// The functions `α`, `σ` on TM defining the isotropic structure; `δ` is
/// always derived as `(1 + σ²)/α`, so `αδ - σ² = 1` holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotropicParams {
    alpha: Expr,
    sigma: Expr,
}

impl IsotropicParams {
    pub fn new(alpha: Expr, sigma: Expr) -> IsotropicParams {
        IsotropicParams { alpha, sigma }
    }

    pub fn parse(alpha: &str, sigma: &str, n: usize) -> Result<IsotropicParams> {
        Ok(IsotropicParams {
            alpha: parse(alpha, n)?,
            sigma: parse(sigma, n)?,
        })
    }

    pub fn alpha(&self) -> &Expr {
        &self.alpha
    }

    pub fn sigma(&self) -> &Expr {
        &self.sigma
    }

    /// `(α, σ, δ)` at a point.
    pub fn values(&self, pt: &TangentPoint) -> Result<(f64, f64, f64)> {
        let coords = pt.coords();
        let alpha = eval_jet(&self.alpha, &coords, 0)?.value();
        let sigma = eval_jet(&self.sigma, &coords, 0)?.value();
        if !(alpha > 0.0) {
            return Err(GeomError::NonPositiveAlpha(alpha));
        }
        Ok((alpha, sigma, (1.0 + sigma * sigma) / alpha))
    }
}

/// A point `(p, u)` of TM in the chart `(x, u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentPoint {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

impl TangentPoint {
    pub fn new(x: Vec<f64>, u: Vec<f64>) -> TangentPoint {
        TangentPoint { x, u }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// `(x1..xn, u1..un)`.
    pub fn coords(&self) -> Vec<f64> {
        self.x.iter().chain(&self.u).copied().collect()
    }
}

/// A tangent vector to TM in the adapted frame: `Σ h_i (∂_i)^h + v_i (∂_i)^v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftVector {
    pub h: Vec<f64>,
    pub v: Vec<f64>,
}

/// Which lift a base vector is taken through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Lift {
    H,
    V,
}

impl Lift {
    pub fn symbol(self) -> char {
        match self {
            Lift::H => 'h',
            Lift::V => 'v',
        }
    }
}

impl LiftVector {
    pub fn zero(n: usize) -> LiftVector {
        LiftVector {
            h: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn new(h: Vec<f64>, v: Vec<f64>) -> LiftVector {
        assert_eq!(h.len(), v.len(), "horizontal and vertical parts must match");
        LiftVector { h, v }
    }

    /// `X^h`.
    pub fn horizontal(x: &[f64]) -> LiftVector {
        LiftVector {
            h: x.to_vec(),
            v: vec![0.0; x.len()],
        }
    }

    /// `X^v`.
    pub fn vertical(x: &[f64]) -> LiftVector {
        LiftVector {
            h: vec![0.0; x.len()],
            v: x.to_vec(),
        }
    }

    pub fn lift(kind: Lift, x: &[f64]) -> LiftVector {
        match kind {
            Lift::H => LiftVector::horizontal(x),
            Lift::V => LiftVector::vertical(x),
        }
    }

    pub fn dim(&self) -> usize {
        self.h.len()
    }

    pub fn scale(&self, k: f64) -> LiftVector {
        LiftVector {
            h: self.h.iter().map(|a| a * k).collect(),
            v: self.v.iter().map(|a| a * k).collect(),
        }
    }

    /// `self += k * other`.
    pub fn axpy(&mut self, k: f64, other: &LiftVector) {
        for (a, b) in self.h.iter_mut().zip(&other.h) {
            *a += k * b;
        }
        for (a, b) in self.v.iter_mut().zip(&other.v) {
            *a += k * b;
        }
    }

    pub fn horizontal_part(&self) -> LiftVector {
        LiftVector::horizontal(&self.h)
    }

    pub fn vertical_part(&self) -> LiftVector {
        LiftVector::vertical(&self.v)
    }

    pub fn max_abs(&self) -> f64 {
        self.h.iter().chain(&self.v).fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.h.iter().chain(&self.v).all(|x| x.is_finite())
    }

    /// Flattened `(h, v)`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.h.iter().chain(&self.v).copied().collect()
    }
}

impl Add for &LiftVector {
    type Output = LiftVector;
    fn add(self, rhs: &LiftVector) -> LiftVector {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &LiftVector {
    type Output = LiftVector;
    fn sub(self, rhs: &LiftVector) -> LiftVector {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

/// Relative and absolute thresholds for a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rel: 1e-8, abs: 1e-10 }
    }
}

/// Everything needed to evaluate the bundle geometry of one scenario.
#[derive(Debug, Clone)]
pub struct ScenarioGeometry {
    pub metric: ChartMetric,
    pub params: IsotropicParams,
    pub tolerance: Tolerance,
}

impl ScenarioGeometry {
    pub fn new(metric: ChartMetric, params: IsotropicParams) -> Result<ScenarioGeometry> {
        let n = metric.dim();
        for (name, e) in [("alpha", params.alpha()), ("sigma", params.sigma())] {
            if e.max_var_index() > n {
                return Err(GeomError::Invalid(format!(
                    "{name} references a variable beyond dimension {n}"
                )));
            }
        }
        Ok(ScenarioGeometry {
            metric,
            params,
            tolerance: Tolerance::default(),
        })
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn check_point(&self, pt: &TangentPoint) -> Result<()> {
        let n = self.dim();
        if pt.u.len() != n {
            return Err(GeomError::Dimension {
                expected: n,
                got: pt.u.len(),
            });
        }
        self.metric.check_domain(&pt.x)
    }

    /// `J_{δ,σ}` applied to `a`: `J X^h = αX^v + σX^h`, `J X^v = -σX^v - δX^h`.
    pub fn j_apply(&self, pt: &TangentPoint, a: &LiftVector) -> Result<LiftVector> {
        self.check_point(pt)?;
        let (alpha, sigma, delta) = self.params.values(pt)?;
        Ok(j_apply_with(alpha, sigma, delta, a))
    }

    /// `ḡ(a, b)` from `ḡ(X^h,Y^h) = αg`, `ḡ(X^h,Y^v) = -σg`, `ḡ(X^v,Y^v) = δg`.
    pub fn gbar_eval(&self, pt: &TangentPoint, a: &LiftVector, b: &LiftVector) -> Result<f64> {
        self.check_point(pt)?;
        let (alpha, sigma, delta) = self.params.values(pt)?;
        let g = self.metric.values(&pt.x)?;
        Ok(gbar_with(&g, alpha, sigma, delta, a, b))
    }
}

pub(crate) fn j_apply_with(alpha: f64, sigma: f64, delta: f64, a: &LiftVector) -> LiftVector {
    let h = a
        .h
        .iter()
        .zip(&a.v)
        .map(|(ah, av)| sigma * ah - delta * av)
        .collect();
    let v = a
        .h
        .iter()
        .zip(&a.v)
        .map(|(ah, av)| alpha * ah - sigma * av)
        .collect();
    LiftVector { h, v }
}

pub(crate) fn gbar_with(
    g: &[Vec<f64>],
    alpha: f64,
    sigma: f64,
    delta: f64,
    a: &LiftVector,
    b: &LiftVector,
) -> f64 {
    alpha * bilinear(g, &a.h, &b.h) - sigma * (bilinear(g, &a.h, &b.v) + bilinear(g, &a.v, &b.h))
        + delta * bilinear(g, &a.v, &b.v)
}
