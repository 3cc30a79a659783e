//! Pointwise closed-form connection of `ḡ` and the derivative machinery it
//! relies on.
//!
//! Lifted vectors act on functions through the chart identities
//! `(∂_j)^h = ∂/∂x^j - Γ^k_{jm} u^m ∂/∂u^k` and `(∂_j)^v = ∂/∂u^j`; every
//! derivative of `α`, `σ`, `δ` below is obtained by pushing those operators
//! through jets.

use crate::base_geom::{BaseFields, BaseGeoCache};
use crate::error::{GeomError, Result};
use crate::expr::Expr;
use crate::jets::{self, Jet};
use crate::linalg::Mat;

use super::curvature::{Breakdown, Term};
use super::types::{gbar_with, j_apply_with, Lift, LiftVector, ScenarioGeometry, TangentPoint};

/// The four argument patterns of `∇̄_A B` for lifted `A`, `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConnectionCase {
    HH,
    HV,
    VH,
    VV,
}

impl ConnectionCase {
    pub const ALL: [ConnectionCase; 4] = [
        ConnectionCase::HH,
        ConnectionCase::HV,
        ConnectionCase::VH,
        ConnectionCase::VV,
    ];

    pub fn from_lifts(a: Lift, b: Lift) -> ConnectionCase {
        match (a, b) {
            (Lift::H, Lift::H) => ConnectionCase::HH,
            (Lift::H, Lift::V) => ConnectionCase::HV,
            (Lift::V, Lift::H) => ConnectionCase::VH,
            (Lift::V, Lift::V) => ConnectionCase::VV,
        }
    }

    pub fn lifts(self) -> (Lift, Lift) {
        match self {
            ConnectionCase::HH => (Lift::H, Lift::H),
            ConnectionCase::HV => (Lift::H, Lift::V),
            ConnectionCase::VH => (Lift::V, Lift::H),
            ConnectionCase::VV => (Lift::V, Lift::V),
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            ConnectionCase::HH => "hh",
            ConnectionCase::HV => "hv",
            ConnectionCase::VH => "vh",
            ConnectionCase::VV => "vv",
        }
    }

    pub fn parse(s: &str) -> Option<ConnectionCase> {
        ConnectionCase::ALL.into_iter().find(|c| c.id() == s)
    }
}

/// A vector field on TM near the evaluation point, as adapted-frame
/// coefficient jets.
#[derive(Debug, Clone)]
pub struct FieldJets {
    pub h: Vec<Jet>,
    pub v: Vec<Jet>,
}

impl FieldJets {
    pub fn value(&self) -> LiftVector {
        LiftVector {
            h: self.h.iter().map(Jet::value).collect(),
            v: self.v.iter().map(Jet::value).collect(),
        }
    }

    pub fn horizontal_part(&self) -> FieldJets {
        FieldJets {
            h: self.h.clone(),
            v: self.v.iter().map(|j| j.constant_like(0.0)).collect(),
        }
    }

    pub fn vertical_part(&self) -> FieldJets {
        FieldJets {
            h: self.h.iter().map(|j| j.constant_like(0.0)).collect(),
            v: self.v.clone(),
        }
    }
}

/// All closed-form ingredients at one point `(p, u)`.
#[derive(Debug, Clone)]
pub struct TmPoint {
    pub n: usize,
    pub point: TangentPoint,
    pub base: BaseGeoCache,
    pub alpha: Jet,
    pub sigma: Jet,
    pub delta: Jet,
    g: Vec<Vec<Jet>>,
    ginv: Vec<Vec<Jet>>,
    /// `conn[j][k] = Γ^k_{jm} u^m` as jets.
    conn: Vec<Vec<Jet>>,
    pub grad_alpha: LiftVector,
    pub grad_sigma: LiftVector,
    pub grad_delta: LiftVector,
    alpha_grad_field: FieldJets,
    /// `alpha_second[a][b][i][j] = L^a_i (L^b_j α)` for lifts `a, b` in `{h, v}`
    /// acting as constant-coefficient coordinate lifts.
    alpha_second: [[Mat; 2]; 2],
    /// Connection on coordinate lifts: `table[case][j][i] = ∇̄_{(∂_j)^·} (∂_i)^·`.
    table: Vec<Vec<Vec<LiftVector>>>,
}

fn lift_index(l: Lift) -> usize {
    match l {
        Lift::H => 0,
        Lift::V => 1,
    }
}

impl TmPoint {
    pub fn new(sg: &ScenarioGeometry, pt: &TangentPoint) -> Result<TmPoint> {
        sg.check_point(pt)?;
        let n = sg.dim();
        let coords = pt.coords();
        let vars = Jet::variables(&coords, 3);
        let fields = BaseFields::new(&sg.metric, &vars[..n])?;
        let base = BaseGeoCache::from_fields(&fields)?;
        let alpha = sg.params.alpha().eval_with(&vars[..n], &vars[n..])?;
        if !(alpha.value() > 0.0) {
            return Err(GeomError::NonPositiveAlpha(alpha.value()));
        }
        let sigma = sg.params.sigma().eval_with(&vars[..n], &vars[n..])?;
        let delta = (&sigma * &sigma).add_scalar(1.0).div(&alpha)?;
        let conn: Vec<Vec<Jet>> = (0..n)
            .map(|j| {
                (0..n)
                    .map(|k| {
                        let terms: Vec<Jet> =
                            (0..n).map(|m| &fields.gamma[k][j][m] * &vars[n + m]).collect();
                        jets::sum(&terms).expect("n >= 1")
                    })
                    .collect()
            })
            .collect();
        let zero = LiftVector::zero(n);
        let mut tp = TmPoint {
            n,
            point: pt.clone(),
            base,
            alpha,
            sigma,
            delta,
            g: fields.g,
            ginv: fields.ginv,
            conn,
            grad_alpha: zero.clone(),
            grad_sigma: zero.clone(),
            grad_delta: zero.clone(),
            alpha_grad_field: FieldJets { h: vec![], v: vec![] },
            alpha_second: Default::default(),
            table: Vec::new(),
        };
        tp.alpha_grad_field = tp.gradient_field(&tp.alpha.clone())?;
        tp.grad_alpha = tp.alpha_grad_field.value();
        tp.grad_sigma = tp.gradient_field(&tp.sigma.clone())?.value();
        tp.grad_delta = tp.gradient_field(&tp.delta.clone())?.value();

        let first: [Vec<Jet>; 2] = [
            (0..n).map(|j| tp.coord_lift_deriv(Lift::H, j, &tp.alpha)).collect::<Result<_>>()?,
            (0..n).map(|j| tp.coord_lift_deriv(Lift::V, j, &tp.alpha)).collect::<Result<_>>()?,
        ];
        for a in [Lift::H, Lift::V] {
            for b in [Lift::H, Lift::V] {
                let inner = &first[lift_index(b)];
                let mut m = vec![vec![0.0; n]; n];
                for (i, row) in m.iter_mut().enumerate() {
                    for (j, slot) in row.iter_mut().enumerate() {
                        *slot = tp.coord_lift_deriv(a, i, &inner[j])?.value();
                    }
                }
                tp.alpha_second[lift_index(a)][lift_index(b)] = m;
            }
        }

        let mut table = Vec::with_capacity(4);
        for case in ConnectionCase::ALL {
            let mut rows = Vec::with_capacity(n);
            for j in 0..n {
                let ej = unit(n, j);
                rows.push((0..n).map(|i| tp.nabla_bar(case, &ej, &unit(n, i))).collect());
            }
            table.push(rows);
        }
        tp.table = table;
        Ok(tp)
    }

    pub fn alpha_value(&self) -> f64 {
        self.alpha.value()
    }

    /// True if `σ` and all its retained derivatives vanish at the point.
    pub fn sigma_vanishes(&self) -> bool {
        self.sigma.is_zero()
    }

    pub(crate) fn require_sigma_zero(&self) -> Result<()> {
        if self.sigma_vanishes() {
            Ok(())
        } else {
            Err(GeomError::SigmaNonzero)
        }
    }

    /// `(∂_j)^h f` or `(∂_j)^v f` as a jet one order lower.
    fn coord_lift_deriv(&self, lift: Lift, j: usize, f: &Jet) -> Result<Jet> {
        let n = self.n;
        Ok(match lift {
            Lift::V => f.diff(n + j)?,
            Lift::H => {
                let mut acc = f.diff(j)?;
                for k in 0..n {
                    acc = &acc - &(&self.conn[j][k] * &f.diff(n + k)?);
                }
                acc
            }
        })
    }

    /// `X^h(f)` / `X^v(f)` for a constant-coefficient base vector `X`.
    pub fn lift_deriv(&self, lift: Lift, x: &[f64], f: &Jet) -> Result<Jet> {
        let mut acc: Option<Jet> = None;
        for (j, &c) in x.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let term = self.coord_lift_deriv(lift, j, f)?.scale(c);
            acc = Some(match acc {
                Some(a) => &a + &term,
                None => term,
            });
        }
        match acc {
            Some(a) => Ok(a),
            None => Ok(f.diff(0)?.constant_like(0.0)),
        }
    }

    /// `A(f)` for an adapted-frame vector with constant coefficients.
    pub fn apply(&self, a: &LiftVector, f: &Jet) -> Result<Jet> {
        Ok(&self.lift_deriv(Lift::H, &a.h, f)? + &self.lift_deriv(Lift::V, &a.v, f)?)
    }

    /// Gradient of `f` with respect to `ḡ` as a field, from
    /// `ḡ⁻¹ = [[δ, σ], [σ, α]] ⊗ g⁻¹` on the adapted frame.
    pub fn gradient_field(&self, f: &Jet) -> Result<FieldJets> {
        let n = self.n;
        let fh: Vec<Jet> = (0..n).map(|j| self.coord_lift_deriv(Lift::H, j, f)).collect::<Result<_>>()?;
        let fv: Vec<Jet> = (0..n).map(|j| self.coord_lift_deriv(Lift::V, j, f)).collect::<Result<_>>()?;
        let raise = |a: &Jet, b: &Jet, i: usize| -> Jet {
            let terms: Vec<Jet> = (0..n)
                .map(|j| &self.ginv[i][j] * &(&(a * &fh[j]) + &(b * &fv[j])))
                .collect();
            jets::sum(&terms).expect("n >= 1")
        };
        Ok(FieldJets {
            h: (0..n).map(|i| raise(&self.delta, &self.sigma, i)).collect(),
            v: (0..n).map(|i| raise(&self.sigma, &self.alpha, i)).collect(),
        })
    }

    /// `∇̄f` at the point.
    pub fn grad_bar(&self, f: &Jet) -> Result<LiftVector> {
        Ok(self.gradient_field(f)?.value())
    }

    pub fn gbar(&self, a: &LiftVector, b: &LiftVector) -> f64 {
        gbar_with(
            &self.base.g,
            self.alpha.value(),
            self.sigma.value(),
            self.delta.value(),
            a,
            b,
        )
    }

    pub fn gbar_norm(&self, a: &LiftVector) -> f64 {
        self.gbar(a, a).max(0.0).sqrt()
    }

    pub fn j_apply(&self, a: &LiftVector) -> LiftVector {
        j_apply_with(self.alpha.value(), self.sigma.value(), self.delta.value(), a)
    }

    /// Closed-form `∇̄_{X^·} Y^·` for constant-coefficient base fields `X`, `Y`,
    /// valid for general `σ`.
    pub fn nabla_bar(&self, case: ConnectionCase, x: &[f64], y: &[f64]) -> LiftVector {
        let n = self.n;
        let a = self.alpha.value();
        let s = self.sigma.value();
        let d = self.delta.value();
        let b = &self.base;
        let u = &self.point.u;
        let dval = |lift: Lift, v: &[f64], f: &Jet| -> f64 {
            self.lift_deriv(lift, v, f).map(|j| j.value()).unwrap_or(0.0)
        };
        let gxy = b.inner(x, y);
        let nab = b.gamma_apply(x, y);
        let mut out = LiftVector::zero(n);
        let h = LiftVector::horizontal;
        let v = LiftVector::vertical;
        match case {
            ConnectionCase::HH => {
                out.axpy(1.0, &h(&nab));
                out.axpy(-s / a, &h(&b.r(u, x, y)));
                out.axpy(dval(Lift::H, x, &self.alpha) / (2.0 * a), &h(y));
                out.axpy(dval(Lift::H, y, &self.alpha) / (2.0 * a), &h(x));
                out.axpy(-s / d, &v(&nab));
                out.axpy(-0.5, &v(&b.r(x, y, u)));
                out.axpy(-dval(Lift::H, x, &self.sigma) / (2.0 * d), &v(y));
                out.axpy(-dval(Lift::H, y, &self.sigma) / (2.0 * d), &v(x));
                out.axpy(-0.5 * gxy, &self.grad_alpha);
            }
            ConnectionCase::HV => {
                out.axpy(-s / a, &h(&nab));
                out.axpy(d / (2.0 * a), &h(&b.r(u, y, x)));
                out.axpy(-dval(Lift::H, x, &self.sigma) / (2.0 * a), &h(y));
                out.axpy(dval(Lift::V, y, &self.alpha) / (2.0 * a), &h(x));
                out.axpy(1.0, &v(&nab));
                out.axpy(dval(Lift::H, x, &self.delta) / (2.0 * d), &v(y));
                out.axpy(-dval(Lift::V, y, &self.sigma) / (2.0 * d), &v(x));
                out.axpy(0.5 * gxy, &self.grad_sigma);
            }
            ConnectionCase::VH => {
                out.axpy(d / (2.0 * a), &h(&b.r(u, x, y)));
                out.axpy(dval(Lift::V, x, &self.alpha) / (2.0 * a), &h(y));
                out.axpy(-dval(Lift::H, y, &self.sigma) / (2.0 * a), &h(x));
                out.axpy(-dval(Lift::V, x, &self.sigma) / (2.0 * d), &v(y));
                out.axpy(dval(Lift::H, y, &self.delta) / (2.0 * d), &v(x));
                out.axpy(0.5 * gxy, &self.grad_sigma);
            }
            ConnectionCase::VV => {
                out.axpy(-dval(Lift::V, x, &self.sigma) / (2.0 * a), &h(y));
                out.axpy(-dval(Lift::V, y, &self.sigma) / (2.0 * a), &h(x));
                out.axpy(dval(Lift::V, x, &self.delta) / (2.0 * d), &v(y));
                out.axpy(dval(Lift::V, y, &self.delta) / (2.0 * d), &v(x));
                out.axpy(-0.5 * gxy, &self.grad_delta);
            }
        }
        out
    }

    /// `∇̄_A` of the coordinate lift `(∂_i)^·`, by linearity over the table.
    fn nabla_frame(&self, a: &LiftVector, lift: Lift, i: usize) -> LiftVector {
        let (from_h, from_v) = match lift {
            Lift::H => (ConnectionCase::HH, ConnectionCase::VH),
            Lift::V => (ConnectionCase::HV, ConnectionCase::VV),
        };
        let idx = |c: ConnectionCase| ConnectionCase::ALL.iter().position(|&x| x == c).unwrap();
        let mut out = LiftVector::zero(self.n);
        for j in 0..self.n {
            if a.h[j] != 0.0 {
                out.axpy(a.h[j], &self.table[idx(from_h)][j][i]);
            }
            if a.v[j] != 0.0 {
                out.axpy(a.v[j], &self.table[idx(from_v)][j][i]);
            }
        }
        out
    }

    /// `∇̄_A B` for a field `B` given by adapted-frame coefficient jets.
    pub fn covariant_derivative(&self, a: &LiftVector, field: &FieldJets) -> Result<LiftVector> {
        let n = self.n;
        let mut out = LiftVector::zero(n);
        for i in 0..n {
            out.h[i] += self.apply(a, &field.h[i])?.value();
            out.v[i] += self.apply(a, &field.v[i])?.value();
            let bh = field.h[i].value();
            if bh != 0.0 {
                out.axpy(bh, &self.nabla_frame(a, Lift::H, i));
            }
            let bv = field.v[i].value();
            if bv != 0.0 {
                out.axpy(bv, &self.nabla_frame(a, Lift::V, i));
            }
        }
        Ok(out)
    }

    /// `∇̄_A ∇̄f`.
    pub fn second_grad_bar(&self, a: &LiftVector, f: &Jet) -> Result<LiftVector> {
        self.covariant_derivative(a, &self.gradient_field(f)?)
    }

    /// `∇̄_A ∇̄α`, reusing the cached gradient field.
    pub fn hess_alpha(&self, a: &LiftVector) -> LiftVector {
        self.covariant_derivative(a, &self.alpha_grad_field)
            .expect("alpha gradient field has order >= 1")
    }

    pub fn alpha_grad_field(&self) -> &FieldJets {
        &self.alpha_grad_field
    }

    /// `X^·(α)`.
    pub fn d_alpha(&self, lift: Lift, x: &[f64]) -> f64 {
        let g = &self.grad_alpha;
        // A(α) = ḡ(∇̄α, A)
        self.gbar(g, &LiftVector::lift(lift, x))
    }

    /// `Y^·(Z^·(α))` with `Z` a constant-coefficient coordinate field.
    pub fn dd_alpha(&self, outer: Lift, y: &[f64], inner: Lift, z: &[f64]) -> f64 {
        let m = &self.alpha_second[lift_index(outer)][lift_index(inner)];
        crate::linalg::bilinear(m, y, z)
    }

    /// `Y^h(Y^h(α))` with `Y` extended as a normal-frame field at `p`
    /// (`∇Y = 0` at `p`), i.e. the constant-coefficient value minus `(∇_Y Y)^h(α)`.
    pub fn dd_alpha_normal_h(&self, y: &[f64]) -> f64 {
        self.dd_alpha(Lift::H, y, Lift::H, y) - self.d_alpha(Lift::H, &self.base.gamma_apply(y, y))
    }

    /// Rough Laplacian of `α` from the closed-form sums (σ = 0 only).
    pub fn laplacian_bar(&self) -> Result<f64> {
        Ok(self.laplacian_breakdown()?.total)
    }

    /// The four closed-form sums, evaluated in a normal frame at `p`.
    pub fn laplacian_breakdown(&self) -> Result<Breakdown<f64>> {
        self.require_sigma_zero()?;
        let a = self.alpha.value();
        let mut sums = [0.0; 4];
        for e in &self.base.frame {
            let eh = self.d_alpha(Lift::H, e);
            let ev = self.d_alpha(Lift::V, e);
            sums[0] += self.dd_alpha_normal_h(e) / a;
            sums[1] += a * self.dd_alpha(Lift::V, e, Lift::V, e);
            sums[2] -= eh * eh / (a * a);
            sums[3] += ev * ev;
        }
        let labels = ["E^h(E^h(α))", "E^v(E^v(α))", "E^h(α)E^h(α)", "E^v(α)E^v(α)"];
        let terms: Vec<Term<f64>> = labels
            .iter()
            .zip(sums)
            .map(|(l, v)| Term {
                label: l.to_string(),
                value: v,
            })
            .collect();
        Ok(Breakdown {
            total: sums.iter().sum(),
            terms,
            alternatives: Vec::new(),
        })
    }

    /// `ḡ(B, C)` near the point as a jet, for lifted constant-coefficient `B`, `C`.
    pub fn gbar_lifts_jet(&self, lb: Lift, y: &[f64], lc: Lift, z: &[f64]) -> Jet {
        let n = self.n;
        let coef = match (lb, lc) {
            (Lift::H, Lift::H) => self.alpha.clone(),
            (Lift::V, Lift::V) => self.delta.clone(),
            _ => self.sigma.scale(-1.0),
        };
        let mut terms = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if y[i] != 0.0 && z[j] != 0.0 {
                    terms.push(self.g[i][j].scale(y[i] * z[j]));
                }
            }
        }
        let gyz = jets::sum(&terms).unwrap_or_else(|| self.alpha.constant_like(0.0));
        &coef * &gyz
    }
}

pub(crate) fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

impl ScenarioGeometry {
    pub fn at(&self, pt: &TangentPoint) -> Result<TmPoint> {
        TmPoint::new(self, pt)
    }

    pub fn nabla_bar(
        &self,
        pt: &TangentPoint,
        case: ConnectionCase,
        x: &[f64],
        y: &[f64],
    ) -> Result<LiftVector> {
        Ok(self.at(pt)?.nabla_bar(case, x, y))
    }

    /// `∇̄f` for a scalar expression on TM.
    pub fn grad_bar(&self, pt: &TangentPoint, f: &Expr) -> Result<LiftVector> {
        let tp = self.at(pt)?;
        let fj = eval_at(self, pt, f)?;
        tp.grad_bar(&fj)
    }

    pub fn second_grad_bar(&self, pt: &TangentPoint, a: &LiftVector, f: &Expr) -> Result<LiftVector> {
        let tp = self.at(pt)?;
        let fj = eval_at(self, pt, f)?;
        tp.second_grad_bar(a, &fj)
    }

    pub fn laplacian_bar(&self, pt: &TangentPoint) -> Result<f64> {
        self.at(pt)?.laplacian_bar()
    }
}

/// Order-3 jet of `f` at the point in the `2n` chart variables.
pub(crate) fn eval_at(sg: &ScenarioGeometry, pt: &TangentPoint, f: &Expr) -> Result<Jet> {
    if f.max_var_index() > sg.dim() {
        return Err(GeomError::Dimension {
            expected: sg.dim(),
            got: f.max_var_index(),
        });
    }
    Ok(crate::expr::eval_jet(f, &pt.coords(), 3)?)
}
