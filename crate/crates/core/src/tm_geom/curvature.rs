//! Closed-form curvature, Ricci operator and sectional curvature of `ḡ` for
//! `σ = 0`, kept term by term so a disagreement can be traced to one term.

use serde::Serialize;

use crate::error::{GeomError, Result};

use super::connection::{unit, TmPoint};
use super::types::{Lift, LiftVector, ScenarioGeometry, TangentPoint};

/// One of the six independent curvature blocks `R̄(A,B)C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CurvatureCase {
    Hhh,
    Hhv,
    Hvh,
    Vhv,
    Vvh,
    Vvv,
}

impl CurvatureCase {
    pub const ALL: [CurvatureCase; 6] = [
        CurvatureCase::Hhh,
        CurvatureCase::Hhv,
        CurvatureCase::Hvh,
        CurvatureCase::Vhv,
        CurvatureCase::Vvh,
        CurvatureCase::Vvv,
    ];

    pub fn id(self) -> &'static str {
        match self {
            CurvatureCase::Hhh => "hhh",
            CurvatureCase::Hhv => "hhv",
            CurvatureCase::Hvh => "hvh",
            CurvatureCase::Vhv => "vhv",
            CurvatureCase::Vvh => "vvh",
            CurvatureCase::Vvv => "vvv",
        }
    }

    pub fn parse(s: &str) -> Option<CurvatureCase> {
        CurvatureCase::ALL.into_iter().find(|c| c.id() == s)
    }

    pub fn lifts(self) -> [Lift; 3] {
        let l = |c: u8| if c == b'h' { Lift::H } else { Lift::V };
        let b = self.id().as_bytes();
        [l(b[0]), l(b[1]), l(b[2])]
    }
}

/// Reading of the undefined `(R(u,Z)·R)(X,Y)u` term in the hhv block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DotReading {
    /// `R(u,Z)` acting as a derivation on `R`.
    Derivation,
    /// Plain composition `R(u,Z)(R(X,Y)u)`.
    Composition,
}

/// Coefficient of the `(R(u,X)R(u,Z)Y)^h` term in the vhv block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VhvReading {
    /// Literal coefficient `1/(4α⁴)`.
    AlphaFour,
    /// `1/(4α²)`.
    AlphaTwo,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Term<V> {
    pub label: String,
    pub value: V,
}

/// A total computed under a different reading of an ambiguous formula.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Alternative<V> {
    pub name: String,
    pub description: String,
    pub total: V,
}

/// A closed-form value together with its individual terms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Breakdown<V> {
    pub terms: Vec<Term<V>>,
    pub total: V,
    pub alternatives: Vec<Alternative<V>>,
}

pub type VectorBreakdown = Breakdown<LiftVector>;
pub type ScalarBreakdown = Breakdown<f64>;

struct VecTerms {
    n: usize,
    terms: Vec<Term<LiftVector>>,
}

impl VecTerms {
    fn new(n: usize) -> VecTerms {
        VecTerms { n, terms: Vec::new() }
    }

    fn push(&mut self, label: &str, coef: f64, v: LiftVector) {
        self.terms.push(Term {
            label: label.to_string(),
            value: v.scale(coef),
        });
    }

    fn h(&mut self, label: &str, coef: f64, x: &[f64]) {
        self.push(label, coef, LiftVector::horizontal(x));
    }

    fn v(&mut self, label: &str, coef: f64, x: &[f64]) {
        self.push(label, coef, LiftVector::vertical(x));
    }

    fn total(&self) -> LiftVector {
        let mut out = LiftVector::zero(self.n);
        for t in &self.terms {
            out.axpy(1.0, &t.value);
        }
        out
    }

    fn total_replacing(&self, label: &str, value: &LiftVector) -> LiftVector {
        let mut out = LiftVector::zero(self.n);
        for t in &self.terms {
            out.axpy(1.0, if t.label == label { value } else { &t.value });
        }
        out
    }

    fn finish(self, alternatives: Vec<Alternative<LiftVector>>) -> VectorBreakdown {
        let total = self.total();
        Breakdown {
            terms: self.terms,
            total,
            alternatives,
        }
    }
}

struct ScalarTerms(Vec<Term<f64>>);

impl ScalarTerms {
    fn push(&mut self, label: &str, value: f64) {
        self.0.push(Term {
            label: label.to_string(),
            value,
        });
    }

    fn finish(self, alternatives: Vec<Alternative<f64>>) -> ScalarBreakdown {
        let total = self.0.iter().map(|t| t.value).sum();
        Breakdown {
            terms: self.0,
            total,
            alternatives,
        }
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

impl TmPoint {
    /// `(R(u,Z)·R)(X,Y)u` under the given reading.
    fn dot_term(&self, reading: DotReading, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let b = &self.base;
        let u = &self.point.u;
        let ruz = |w: &[f64]| b.r(u, z, w);
        let first = ruz(&b.r(x, y, u));
        match reading {
            DotReading::Composition => first,
            DotReading::Derivation => {
                let t2 = b.r(&ruz(x), y, u);
                let t3 = b.r(x, &ruz(y), u);
                let t4 = b.r(x, y, &ruz(u));
                sub(&sub(&sub(&first, &t2), &t3), &t4)
            }
        }
    }

    /// Closed-form `R̄(A,B)C` for the block `case` and constant-coefficient
    /// base fields `X`, `Y`, `Z`. Requires `σ ≡ 0` near the point.
    pub fn riemann_bar(
        &self,
        case: CurvatureCase,
        x: &[f64],
        y: &[f64],
        z: &[f64],
    ) -> Result<VectorBreakdown> {
        self.require_sigma_zero()?;
        for w in [x, y, z] {
            if w.len() != self.n {
                return Err(GeomError::Dimension {
                    expected: self.n,
                    got: w.len(),
                });
            }
        }
        let a = self.alpha_value();
        let (a2, a3, a4) = (a * a, a * a * a, a * a * a * a);
        let b = &self.base;
        let u = self.point.u.clone();
        let u = u.as_slice();
        let ga = self.grad_alpha.clone();
        let dh = |w: &[f64]| self.d_alpha(Lift::H, w);
        let dv = |w: &[f64]| self.d_alpha(Lift::V, w);
        let nab = |p: &[f64], q: &[f64]| b.gamma_apply(p, q);
        let mut t = VecTerms::new(self.n);
        let mut alternatives = Vec::new();
        match case {
            CurvatureCase::Hhh => {
                t.h("(R(X,Y)Z)^h", 1.0, &b.r(x, y, z));
                t.h("(R(u,R(Y,Z)u)X)^h", -1.0 / (4.0 * a2), &b.r(u, &b.r(y, z, u), x));
                t.h("(R(u,R(X,Z)u)Y)^h", 1.0 / (4.0 * a2), &b.r(u, &b.r(x, z, u), y));
                t.h("(R(u,R(X,Y)u)Z)^h", 1.0 / (2.0 * a2), &b.r(u, &b.r(x, y, u), z));
                t.h("(∇_Y Z)^h(α) X^h", dh(&nab(y, z)) / (2.0 * a), x);
                t.h("Y^h(α) Z^h(α) X^h", 3.0 * dh(y) * dh(z) / (4.0 * a2), x);
                t.h("Y^h(Z^h(α)) X^h", -self.dd_alpha(Lift::H, y, Lift::H, z) / (2.0 * a), x);
                t.h("(R(Y,Z)u)^v(α) X^h", -dv(&b.r(y, z, u)) / (4.0 * a), x);
                t.h("(∇_X Z)^h(α) Y^h", -dh(&nab(x, z)) / (2.0 * a), y);
                t.h("X^h(α) Z^h(α) Y^h", -3.0 * dh(x) * dh(z) / (4.0 * a2), y);
                t.h("X^h(Z^h(α)) Y^h", self.dd_alpha(Lift::H, x, Lift::H, z) / (2.0 * a), y);
                t.h("(R(X,Z)u)^v(α) Y^h", dv(&b.r(x, z, u)) / (4.0 * a), y);
                t.v("((∇_Z R)(X,Y)u)^v", 0.5, &b.nabla_r(z, x, y, u));
                t.v("Y^h(α)(R(X,Z)u)^v", -dh(y) / (2.0 * a), &b.r(x, z, u));
                t.v("X^h(α)(R(Y,Z)u)^v", dh(x) / (2.0 * a), &b.r(y, z, u));
                t.v("Z^h(α)(R(X,Y)u)^v", -dh(z) / a, &b.r(x, y, u));
                t.push(
                    "{X^h(α)g(Y,Z) - Y^h(α)g(X,Z)} ∇̄α",
                    (dh(x) * b.inner(y, z) - dh(y) * b.inner(x, z)) / (4.0 * a),
                    ga.clone(),
                );
                t.push("g(X,Z) ∇̄_{Y^h}∇̄α", 0.5 * b.inner(x, z), self.hess_alpha(&LiftVector::horizontal(y)));
                t.push("g(Y,Z) ∇̄_{X^h}∇̄α", -0.5 * b.inner(y, z), self.hess_alpha(&LiftVector::horizontal(x)));
            }
            CurvatureCase::Hhv => {
                t.h("((∇_X R)(u,Z)Y)^h", 1.0 / (2.0 * a2), &b.nabla_r(x, u, z, y));
                t.h("((∇_Y R)(u,Z)X)^h", -1.0 / (2.0 * a2), &b.nabla_r(y, u, z, x));
                t.h("Y^h(α)(R(u,Z)X)^h", dh(y) / (2.0 * a3), &b.r(u, z, x));
                t.h("X^h(α)(R(u,Z)Y)^h", -dh(x) / (2.0 * a3), &b.r(u, z, y));
                t.h("(R(u,Z)Y)^h(α) X^h", dh(&b.r(u, z, y)) / (4.0 * a3), x);
                t.h("(∇_Y Z)^v(α) X^h", dv(&nab(y, z)) / (2.0 * a), x);
                t.h("Y^h(α) Z^v(α) X^h", dh(y) * dv(z) / (4.0 * a2), x);
                t.h("Y^h(Z^v(α)) X^h", -self.dd_alpha(Lift::H, y, Lift::V, z) / (2.0 * a), x);
                t.h("(R(u,Z)X)^h(α) Y^h", -dh(&b.r(u, z, x)) / (4.0 * a3), y);
                t.h("(∇_X Z)^v(α) Y^h", -dv(&nab(x, z)) / (2.0 * a), y);
                t.h("X^h(α) Z^v(α) Y^h", -dh(x) * dv(z) / (4.0 * a2), y);
                t.h("X^h(Z^v(α)) Y^h", self.dd_alpha(Lift::H, x, Lift::V, z) / (2.0 * a), y);
                t.v("(R(X,Y)Z)^v", 1.0, &b.r(x, y, z));
                let dot_label = "((R(u,Z)·R)(X,Y)u)^v";
                t.v(dot_label, 1.0 / (4.0 * a2), &self.dot_term(DotReading::Derivation, x, y, z));
                t.v("(R(u,Z)R(X,Y)u)^v", -1.0 / (4.0 * a2), &b.r(u, z, &b.r(x, y, u)));
                t.v("(R(X,Y)R(u,Z)u)^v", 1.0 / (4.0 * a2), &b.r(x, y, &b.r(u, z, u)));
                t.v("Z^v(α)(R(Y,X)u)^v", dv(z) / a, &b.r(y, x, u));
                // [X,Y] = 0 for constant-coefficient fields
                t.v("Z^v(α)[X,Y]^v", 0.0, &vec![0.0; self.n]);
                t.push("R(X,Y,u,Z) ∇̄α", b.r4(x, y, u, z) / a2, ga.clone());
                let alt = LiftVector::vertical(&self.dot_term(DotReading::Composition, x, y, z))
                    .scale(1.0 / (4.0 * a2));
                alternatives.push(Alternative {
                    name: "dot=composition".into(),
                    description: "(R(u,Z)·R)(X,Y)u read as R(u,Z)(R(X,Y)u)".into(),
                    total: t.total_replacing(dot_label, &alt),
                });
            }
            CurvatureCase::Hvh => {
                t.h("((∇_X R)(u,Y)Z)^h", 1.0 / (2.0 * a2), &b.nabla_r(x, u, y, z));
                t.h("X^h(α)(R(u,Y)Z)^h", -dh(x) / a3, &b.r(u, y, z));
                t.h("Z^h(α)(R(u,Y)X)^h", -dh(z) / (2.0 * a3), &b.r(u, y, x));
                t.h("(R(u,Y)Z)^h(α) X^h", dh(&b.r(u, y, z)) / (4.0 * a3), x);
                t.h("Z^h(α) Y^v(α) X^h", dh(z) * dv(y) / (4.0 * a2), x);
                t.h("Y^v(Z^h(α)) X^h", -self.dd_alpha(Lift::V, y, Lift::H, z) / (2.0 * a), x);
                t.v("(R(X,Z)Y)^v", 0.5, &b.r(x, z, y));
                t.v("(R(X,R(u,Y)Z)u)^v", -1.0 / (4.0 * a2), &b.r(x, &b.r(u, y, z), u));
                t.v("Y^v(α)(R(X,Z)u)^v", -dv(y) / (2.0 * a), &b.r(x, z, u));
                t.v("X^h(Z^h(α)) Y^v", -self.dd_alpha(Lift::H, x, Lift::H, z) / (2.0 * a), y);
                t.v("(∇_X Z)^h(α) Y^v", dh(&nab(x, z)) / (2.0 * a), y);
                t.v("Z^h(α) X^h(α) Y^v", 5.0 * dh(z) * dh(x) / (4.0 * a2), y);
                t.v("(R(X,Z)u)^v(α) Y^v", -dv(&b.r(x, z, u)) / (4.0 * a), y);
                t.push("R(u,Y,Z,X) ∇̄α", -b.r4(u, y, z, x) / (2.0 * a2), ga.clone());
                t.push("Y^v(α) g(X,Z) ∇̄α", -dv(y) * b.inner(x, z) / (4.0 * a), ga.clone());
                t.push("g(X,Z) ∇̄_{Y^v}∇̄α", 0.5 * b.inner(x, z), self.hess_alpha(&LiftVector::vertical(y)));
            }
            CurvatureCase::Vhv => {
                t.h("(R(X,Z)Y)^h", 1.0 / (2.0 * a2), &b.r(x, z, y));
                let rr = b.r(u, x, &b.r(u, z, y));
                let rr_label = "(R(u,X)R(u,Z)Y)^h";
                t.h(rr_label, 1.0 / (4.0 * a4), &rr);
                t.h("X^v(α)(R(u,Z)Y)^h", -dv(x) / (2.0 * a3), &b.r(u, z, y));
                t.h("Z^v(α)(R(u,X)Y)^h", dv(z) / (2.0 * a3), &b.r(u, x, y));
                t.h("X^v(α) Z^v(α) Y^h", dv(x) * dv(z) / (4.0 * a2), y);
                t.h("X^v(Z^v(α)) Y^h", self.dd_alpha(Lift::V, x, Lift::V, z) / (2.0 * a), y);
                // no sign precedes this brace in the literal formula; read as "+"
                t.v("(R(u,Z)Y)^h(α) X^v", -dh(&b.r(u, z, y)) / (4.0 * a3), x);
                t.v("(∇_Y Z)^v(α) X^v", -dv(&nab(y, z)) / (2.0 * a), x);
                t.v("Y^h(α) Z^v(α) X^v", -3.0 * dh(y) * dv(z) / (4.0 * a2), x);
                t.v("Y^h(Z^v(α)) X^v", self.dd_alpha(Lift::H, y, Lift::V, z) / (2.0 * a), x);
                t.push("g(X,Z) Y^h(α) ∇̄α", 3.0 * b.inner(x, z) * dh(y) / (4.0 * a3), ga.clone());
                t.push(
                    "g(X,Z) ∇̄_{Y^h}∇̄α",
                    -b.inner(x, z) / (2.0 * a2),
                    self.hess_alpha(&LiftVector::horizontal(y)),
                );
                let alt = LiftVector::horizontal(&rr).scale(1.0 / (4.0 * a2));
                alternatives.push(Alternative {
                    name: "coef=1/(4α²)".into(),
                    description: "(R(u,X)R(u,Z)Y)^h with coefficient 1/(4α²)".into(),
                    total: t.total_replacing(rr_label, &alt),
                });
            }
            CurvatureCase::Vvh => {
                t.h("(R(X,Y)Z)^h", 1.0 / a2, &b.r(x, y, z));
                t.h("X^v(α)(R(u,Y)Z)^h", -dv(x) / a3, &b.r(u, y, z));
                t.h("Y^v(α)(R(u,X)Z)^h", dv(y) / a3, &b.r(u, x, z));
                t.h("(R(u,X)R(u,Y)Z)^h", 1.0 / (4.0 * a4), &b.r(u, x, &b.r(u, y, z)));
                t.h("(R(u,Y)R(u,X)Z)^h", -1.0 / (4.0 * a4), &b.r(u, y, &b.r(u, x, z)));
                t.v("(R(u,Y)Z)^h(α) X^v", -dh(&b.r(u, y, z)) / (4.0 * a3), x);
                t.v("Y^v(Z^h(α)) X^v", self.dd_alpha(Lift::V, y, Lift::H, z) / (2.0 * a), x);
                t.v("Y^v(α) Z^h(α) X^v", -3.0 * dv(y) * dh(z) / (4.0 * a2), x);
                t.v("(R(u,X)Z)^h(α) Y^v", dh(&b.r(u, x, z)) / (4.0 * a3), y);
                t.v("X^v(Z^h(α)) Y^v", -self.dd_alpha(Lift::V, x, Lift::H, z) / (2.0 * a), y);
                t.v("X^v(α) Z^h(α) Y^v", 3.0 * dv(x) * dh(z) / (4.0 * a2), y);
            }
            CurvatureCase::Vvv => {
                t.v("Y^v(Z^v(α)) X^v", self.dd_alpha(Lift::V, y, Lift::V, z) / (2.0 * a), x);
                t.v("Y^v(α) Z^v(α) X^v", -dv(y) * dv(z) / (4.0 * a2), x);
                t.v("X^v(Z^v(α)) Y^v", -self.dd_alpha(Lift::V, x, Lift::V, z) / (2.0 * a), y);
                t.v("X^v(α) Z^v(α) Y^v", dv(x) * dv(z) / (4.0 * a2), y);
                t.push(
                    "{Y^v(α)g(X,Z) - X^v(α)g(Y,Z)} ∇̄α",
                    3.0 * (dv(y) * b.inner(x, z) - dv(x) * b.inner(y, z)) / (4.0 * a3),
                    ga.clone(),
                );
                t.push(
                    "g(Y,Z) ∇̄_{X^v}∇̄α",
                    b.inner(y, z) / (2.0 * a2),
                    self.hess_alpha(&LiftVector::vertical(x)),
                );
                t.push(
                    "g(X,Z) ∇̄_{Y^v}∇̄α",
                    -b.inner(x, z) / (2.0 * a2),
                    self.hess_alpha(&LiftVector::vertical(y)),
                );
            }
        }
        Ok(t.finish(alternatives))
    }

    /// `R̄(A,B)C` for any of the eight lift patterns, using antisymmetry in
    /// the first pair for the two blocks without their own formula.
    pub fn riemann_bar_lifts(&self, lifts: [Lift; 3], x: &[f64], y: &[f64], z: &[f64]) -> Result<LiftVector> {
        use Lift::{H, V};
        let total = |c, p: &[f64], q: &[f64]| self.riemann_bar(c, p, q, z).map(|b| b.total);
        match lifts {
            [H, H, H] => total(CurvatureCase::Hhh, x, y),
            [H, H, V] => total(CurvatureCase::Hhv, x, y),
            [H, V, H] => total(CurvatureCase::Hvh, x, y),
            [V, H, V] => total(CurvatureCase::Vhv, x, y),
            [V, V, H] => total(CurvatureCase::Vvh, x, y),
            [V, V, V] => total(CurvatureCase::Vvv, x, y),
            [V, H, H] => Ok(total(CurvatureCase::Hvh, y, x)?.scale(-1.0)),
            [H, V, V] => Ok(total(CurvatureCase::Vhv, y, x)?.scale(-1.0)),
        }
    }

    /// `R̄(A,B)C` for arbitrary adapted-frame vectors, by multilinearity.
    pub fn riemann_bar_vectors(&self, a: &LiftVector, b: &LiftVector, c: &LiftVector) -> Result<LiftVector> {
        let n = self.n;
        let parts = |w: &LiftVector| [(Lift::H, w.h.clone()), (Lift::V, w.v.clone())];
        let mut out = LiftVector::zero(n);
        for (la, xa) in parts(a) {
            if xa.iter().all(|&v| v == 0.0) {
                continue;
            }
            for (lb, xb) in parts(b) {
                if xb.iter().all(|&v| v == 0.0) {
                    continue;
                }
                for (lc, xc) in parts(c) {
                    if xc.iter().all(|&v| v == 0.0) {
                        continue;
                    }
                    out.axpy(1.0, &self.riemann_bar_lifts([la, lb, lc], &xa, &xb, &xc)?);
                }
            }
        }
        Ok(out)
    }

    /// Closed-form Ricci operator `Q̄(X^h)` or `Q̄(X^v)`. The single
    /// alternative is the direct frame trace of the closed-form curvature.
    pub fn ricci_bar(&self, lift: Lift, x: &[f64]) -> Result<VectorBreakdown> {
        self.require_sigma_zero()?;
        let n = self.n;
        let nf = n as f64;
        let a = self.alpha_value();
        let (a2, a3, a4) = (a * a, a * a * a, a * a * a * a);
        let b = &self.base;
        let u = self.point.u.clone();
        let u = u.as_slice();
        let ga = self.grad_alpha.clone();
        let hga = ga.horizontal_part();
        let vga = ga.vertical_part();
        let dh = |w: &[f64]| self.d_alpha(Lift::H, w);
        let dv = |w: &[f64]| self.d_alpha(Lift::V, w);
        let lap = self.laplacian_bar()?;
        let v_norm2 = self.gbar(&vga, &vga);
        let norm2 = self.gbar(&ga, &ga);
        let field = self.alpha_grad_field();
        let xl = LiftVector::lift(lift, x);
        let hh = self
            .covariant_derivative(&xl, &field.horizontal_part())?
            .horizontal_part();
        let vv = self
            .covariant_derivative(&xl, &field.vertical_part())?
            .vertical_part();
        let hess = self.hess_alpha(&xl);
        let frame = b.frame.clone();
        let mut t = VecTerms::new(n);
        match lift {
            Lift::H => {
                t.h("Q^h(X)", 1.0 / a, &b.ricci_apply(x));
                t.h("‖v∇̄α‖² X^h", v_norm2 / (4.0 * a2), x);
                t.h("Δα X^h", -lap / (2.0 * a), x);
                t.push("h∇̄_{X^h}h∇̄α", 1.0 / (2.0 * a), hh);
                t.push("v∇̄_{X^h}v∇̄α", -1.0 / (2.0 * a), vv);
                t.push("∇̄_{X^h}∇̄α", 1.0 / (2.0 * a), hess);
                t.push("X^h(α) ∇̄α", -(2.0 * nf + 1.0) * dh(x) / (4.0 * a2), ga.clone());
                t.push("X^h(α) h∇̄α", -dh(x) / (4.0 * a2), hga);
                t.push("X^h(α) v∇̄α", dh(x) / a2, vga);
                let mut s1 = LiftVector::zero(n);
                let mut s2 = LiftVector::zero(n);
                let mut s3 = LiftVector::zero(n);
                let mut s4 = LiftVector::zero(n);
                let mut s5 = LiftVector::zero(n);
                let mut s6 = LiftVector::zero(n);
                for e in &frame {
                    s1.axpy(3.0 / (4.0 * a3), &LiftVector::horizontal(&b.r(u, &b.r(x, e, u), e)));
                    s2.axpy(dv(&b.r(x, e, u)) / (4.0 * a2), &LiftVector::horizontal(e));
                    s3.axpy(-1.0 / (4.0 * a3), &LiftVector::horizontal(&b.r(u, e, &b.r(u, e, x))));
                    s4.axpy(1.0 / (2.0 * a), &LiftVector::vertical(&b.nabla_r(e, x, e, u)));
                    s5.axpy(-3.0 * dh(e) / (2.0 * a2), &LiftVector::vertical(&b.r(x, e, u)));
                    s6.axpy(dh(&b.r(u, e, x)) / (4.0 * a2), &LiftVector::vertical(e));
                }
                t.push("Σ (R(u,R(X,E)u)E)^h", 1.0, s1);
                t.push("Σ (R(X,E)u)^v(α) E^h", 1.0, s2);
                t.push("Σ (R(u,E)R(u,E)X)^h", 1.0, s3);
                t.push("Σ ((∇_E R)(X,E)u)^v", 1.0, s4);
                t.push("Σ E^h(α)(R(X,E)u)^v", 1.0, s5);
                t.push("Σ (R(u,E)X)^h(α) E^v", 1.0, s6);
            }
            Lift::V => {
                t.v("‖v∇̄α‖² X^v", -v_norm2 / (4.0 * a2), x);
                t.v("‖∇̄α‖² X^v", -3.0 * norm2 / (4.0 * a2), x);
                t.v("Δα X^v", lap / (2.0 * a), x);
                t.push("h∇̄_{X^v}h∇̄α", 1.0 / (2.0 * a), hh);
                t.push("v∇̄_{X^v}v∇̄α", -1.0 / (2.0 * a), vv);
                t.push("∇̄_{X^v}∇̄α", -1.0 / (2.0 * a), hess);
                t.push("X^v(α) ∇̄α", (3.0 - 2.0 * nf) * dv(x) / (4.0 * a2), ga.clone());
                t.push("X^v(α) v∇̄α", 3.0 * dv(x) / (4.0 * a2), vga);
                let mut s1 = LiftVector::zero(n);
                let mut s2 = LiftVector::zero(n);
                let mut s3 = LiftVector::zero(n);
                let mut s4 = LiftVector::zero(n);
                for e in &frame {
                    s1.axpy(-1.0 / (2.0 * a3), &LiftVector::horizontal(&b.nabla_r(e, u, x, e)));
                    s2.axpy(3.0 * dh(e) / (2.0 * a4), &LiftVector::horizontal(&b.r(u, x, e)));
                    s3.axpy(-dh(&b.r(u, x, e)) / (4.0 * a4), &LiftVector::horizontal(e));
                    s4.axpy(1.0 / (4.0 * a3), &LiftVector::vertical(&b.r(e, &b.r(u, x, e), u)));
                }
                t.push("Σ ((∇_E R)(u,X)E)^h", 1.0, s1);
                t.push("Σ E^h(α)(R(u,X)E)^h", 1.0, s2);
                t.push("Σ (R(u,X)E)^h(α) E^h", 1.0, s3);
                t.push("Σ (R(E,R(u,X)E)u)^v", 1.0, s4);
            }
        }
        let mut alternatives = vec![Alternative {
            name: "frame-trace".into(),
            description: "Σ (1/α)R̄(A,E^h)E^h + αR̄(A,E^v)E^v over the closed-form curvature blocks".into(),
            total: self.ricci_frame_trace(&xl)?,
        }];
        if lift == Lift::V {
            // Σ (R(u,X)E)^h(α) E^h = -(R(u,X)w)^h and Σ E^h(α)(R(u,X)E)^h = (R(u,X)w)^h
            // with w = Σ E^h(α)E, so only their net coefficient is meaningful.
            alternatives.push(Alternative {
                name: "net=3/(2α⁴)".into(),
                description: "net coefficient 3/(2α⁴) on (R(u,X)w)^h, w = Σ E^h(α)E: drops the Σ (R(u,X)E)^h(α) E^h term"
                    .into(),
                total: t.total_replacing("Σ (R(u,X)E)^h(α) E^h", &LiftVector::zero(n)),
            });
        }
        Ok(t.finish(alternatives))
    }

    /// `Q̄(A) = Σ (1/α)R̄(A,E_i^h)E_i^h + αR̄(A,E_i^v)E_i^v`.
    pub fn ricci_frame_trace(&self, a: &LiftVector) -> Result<LiftVector> {
        let alpha = self.alpha_value();
        let mut out = LiftVector::zero(self.n);
        for e in &self.base.frame.clone() {
            let eh = LiftVector::horizontal(e);
            let ev = LiftVector::vertical(e);
            out.axpy(1.0 / alpha, &self.riemann_bar_vectors(a, &eh, &eh)?);
            out.axpy(alpha, &self.riemann_bar_vectors(a, &ev, &ev)?);
        }
        Ok(out)
    }

    fn check_orthonormal(&self, x: &[f64], y: &[f64]) -> Result<()> {
        let b = &self.base;
        let defect = (b.norm_sq(x) - 1.0)
            .abs()
            .max((b.norm_sq(y) - 1.0).abs())
            .max(b.inner(x, y).abs());
        if defect > 1e-10 {
            return Err(GeomError::NotOrthonormal(defect));
        }
        Ok(())
    }

    /// Closed-form sectional curvature of the plane `{X^·, Y^·}` for
    /// g-orthonormal `X`, `Y`. The alternative is the normalized contraction of
    /// the closed-form curvature block.
    pub fn sectional_bar(&self, lifts: (Lift, Lift), x: &[f64], y: &[f64]) -> Result<ScalarBreakdown> {
        self.require_sigma_zero()?;
        self.check_orthonormal(x, y)?;
        let a = self.alpha_value();
        let (a2, a3) = (a * a, a * a * a);
        let b = &self.base;
        let u = &self.point.u;
        let dh = |w: &[f64]| self.d_alpha(Lift::H, w);
        let dv = |w: &[f64]| self.d_alpha(Lift::V, w);
        let mut t = ScalarTerms(Vec::new());
        let (contraction, description) = match lifts {
            (Lift::H, Lift::H) => {
                let xh = LiftVector::horizontal(x);
                t.push("K(X,Y)", b.sectional(x, y)? / a);
                t.push("‖R(X,Y)u‖²", -3.0 * b.norm_sq(&b.r(x, y, u)) / (4.0 * a3));
                t.push("Y^h(α)Y^h(α)", 3.0 * dh(y) * dh(y) / (4.0 * a3));
                t.push("Y^h(Y^h(α))", -self.dd_alpha_normal_h(y) / (2.0 * a2));
                t.push("X^h(α)X^h(α)", dh(x) * dh(x) / (4.0 * a3));
                t.push("ḡ(∇̄_{X^h}∇̄α, X^h)", -self.gbar(&self.hess_alpha(&xh), &xh) / (2.0 * a2));
                let r = self.riemann_bar(CurvatureCase::Hhh, x, y, y)?.total;
                (self.gbar(&r, &xh) / a2, "(1/α²) ḡ(R̄(X^h,Y^h)Y^h, X^h)")
            }
            (Lift::H, Lift::V) => {
                let xh = LiftVector::horizontal(x);
                t.push("‖R(u,Y)X‖²", b.norm_sq(&b.r(u, y, x)) / (4.0 * a3));
                t.push("Y^v(α)Y^v(α)", -dv(y) * dv(y) / (4.0 * a));
                t.push("Y^v(Y^v(α))", -0.5 * self.dd_alpha(Lift::V, y, Lift::V, y));
                t.push("X^h(α)X^h(α)", -3.0 * dh(x) * dh(x) / (4.0 * a3));
                t.push("ḡ(∇̄_{X^h}∇̄α, X^h)", self.gbar(&self.hess_alpha(&xh), &xh) / (2.0 * a2));
                let r = self.riemann_bar(CurvatureCase::Vhv, y, x, y)?.total;
                (-self.gbar(&r, &xh), "-ḡ(R̄(Y^v,X^h)Y^v, X^h)")
            }
            (Lift::V, Lift::V) => {
                let xv = LiftVector::vertical(x);
                t.push("Y^v(Y^v(α))", 0.5 * self.dd_alpha(Lift::V, y, Lift::V, y));
                t.push("Y^v(α)Y^v(α)", -dv(y) * dv(y) / (4.0 * a));
                t.push("X^v(α)X^v(α)", -3.0 * dv(x) * dv(x) / (4.0 * a));
                t.push("ḡ(∇̄_{X^v}∇̄α, X^v)", 0.5 * self.gbar(&self.hess_alpha(&xv), &xv));
                let r = self.riemann_bar(CurvatureCase::Vvv, x, y, y)?.total;
                (a2 * self.gbar(&r, &xv), "α² ḡ(R̄(X^v,Y^v)Y^v, X^v)")
            }
            (Lift::V, Lift::H) => return self.sectional_bar((Lift::H, Lift::V), y, x),
        };
        Ok(t.finish(vec![Alternative {
            name: "contraction".into(),
            description: description.into(),
            total: contraction,
        }]))
    }
}

/// Base directions used by the pointwise checks: the coordinate frame.
pub fn coordinate_frame(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| unit(n, i)).collect()
}

impl ScenarioGeometry {
    pub fn riemann_bar(
        &self,
        pt: &TangentPoint,
        case: CurvatureCase,
        x: &[f64],
        y: &[f64],
        z: &[f64],
    ) -> Result<VectorBreakdown> {
        self.at(pt)?.riemann_bar(case, x, y, z)
    }

    pub fn ricci_bar(&self, pt: &TangentPoint, lift: Lift, x: &[f64]) -> Result<VectorBreakdown> {
        self.at(pt)?.ricci_bar(lift, x)
    }

    pub fn sectional_bar(
        &self,
        pt: &TangentPoint,
        lifts: (Lift, Lift),
        x: &[f64],
        y: &[f64],
    ) -> Result<ScalarBreakdown> {
        self.at(pt)?.sectional_bar(lifts, x, y)
    }
}
