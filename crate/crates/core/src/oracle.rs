//! Coordinate ground truth for the bundle geometry.
//!
//! The metric `ḡ` is written out in the chart `(x, u)` of TM and fed through
//! the generic Levi-Civita and curvature formulas on `2n` variables. Only the
//! base metric, the jets and the algebraic data types are shared with the
//! closed-form side.

use crate::base_geom::BaseFields;
use crate::error::{GeomError, Result};
use crate::expr::{eval_jet, Expr};
use crate::jets::{self, Jet};
use crate::linalg::{self, invert_jet_matrix, jet_values, Mat};
use crate::tm_geom::{Lift, LiftVector, ScenarioGeometry, TangentPoint};

/// Basis change between the adapted frame and the coordinate frame of TM at
/// one point. With `N_i^k = Γ^k_{ij} u^j`, `∂/∂x^i = (∂_i)^h + N_i^k (∂_k)^v`
/// and `∂/∂u^k = (∂_k)^v`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameChange {
    /// `n[i][k] = N_i^k`.
    pub n: Mat,
}

impl FrameChange {
    pub fn dim(&self) -> usize {
        self.n.len()
    }

    /// Adapted components to coordinate components.
    pub fn to_coordinate(&self, a: &LiftVector) -> Vec<f64> {
        let n = self.dim();
        let mut out = a.h.clone();
        out.extend((0..n).map(|k| a.v[k] - (0..n).map(|i| self.n[i][k] * a.h[i]).sum::<f64>()));
        out
    }

    /// Coordinate components to adapted components.
    pub fn to_adapted(&self, w: &[f64]) -> LiftVector {
        let n = self.dim();
        let h = w[..n].to_vec();
        let v = (0..n)
            .map(|k| w[n + k] + (0..n).map(|i| self.n[i][k] * w[i]).sum::<f64>())
            .collect();
        LiftVector { h, v }
    }

    /// The `2n × 2n` matrix of [`FrameChange::to_coordinate`].
    pub fn matrix(&self) -> Mat {
        self.block(-1.0)
    }

    /// The `2n × 2n` matrix of [`FrameChange::to_adapted`].
    pub fn inverse_matrix(&self) -> Mat {
        self.block(1.0)
    }

    fn block(&self, sign: f64) -> Mat {
        let n = self.dim();
        let mut m = vec![vec![0.0; 2 * n]; 2 * n];
        for i in 0..2 * n {
            m[i][i] = 1.0;
        }
        for k in 0..n {
            for i in 0..n {
                m[n + k][i] = sign * self.n[i][k];
            }
        }
        m
    }
}

/// Coordinate data of `ḡ` at one point of TM.
#[derive(Debug, Clone)]
pub struct TmOracle {
    pub n: usize,
    pub point: TangentPoint,
    pub frame: FrameChange,
    /// `ḡ_{ab}` as order-2 jets in `(x, u)`.
    pub metric_jets: Vec<Vec<Jet>>,
    pub metric: Mat,
    inverse_jets: Vec<Vec<Jet>>,
    pub inverse: Mat,
    pub christoffel: Vec<Vec<Vec<f64>>>,
    /// `riemann[d][c][a][b] = R̄^d_{cab}`, `R̄(∂_a,∂_b)∂_c = R̄^d_{cab} ∂_d`.
    pub riemann: Vec<Vec<Vec<Vec<f64>>>>,
    /// `N_i^k` as jets, for differentiating lifted fields.
    conn_jets: Vec<Vec<Jet>>,
}

/// Coordinate components of `ḡ` as jets in the `2n` chart variables:
/// `ḡ_{x^i x^j} = αg_ij - σ(N_j^l g_il + N_i^k g_kj) + δ N_i^k N_j^l g_kl`,
/// `ḡ_{x^i u^k} = -σ g_ik + δ N_i^l g_lk`, `ḡ_{u^k u^l} = δ g_kl`.
pub fn build_tm_metric(sg: &ScenarioGeometry, pt: &TangentPoint) -> Result<Vec<Vec<Jet>>> {
    Ok(metric_parts(sg, pt)?.0)
}

type MetricParts = (Vec<Vec<Jet>>, Vec<Vec<Jet>>);

fn metric_parts(sg: &ScenarioGeometry, pt: &TangentPoint) -> Result<MetricParts> {
    sg.check_point(pt)?;
    let n = sg.dim();
    let vars = Jet::variables(&pt.coords(), 3);
    let fields = BaseFields::new(&sg.metric, &vars[..n])?;
    let g = &fields.g;
    let alpha = sg.params.alpha().eval_with(&vars[..n], &vars[n..])?;
    if !(alpha.value() > 0.0) {
        return Err(GeomError::NonPositiveAlpha(alpha.value()));
    }
    let sigma = sg.params.sigma().eval_with(&vars[..n], &vars[n..])?;
    let delta = (&sigma * &sigma).add_scalar(1.0).div(&alpha)?;
    let conn: Vec<Vec<Jet>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|k| {
                    let t: Vec<Jet> = (0..n).map(|j| &fields.gamma[k][i][j] * &vars[n + j]).collect();
                    jets::sum(&t).expect("n >= 1")
                })
                .collect()
        })
        .collect();
    // ng[i][l] = Σ_k N_i^k g_kl
    let ng: Vec<Vec<Jet>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|l| {
                    let t: Vec<Jet> = (0..n).map(|k| &conn[i][k] * &g[k][l]).collect();
                    jets::sum(&t).expect("n >= 1")
                })
                .collect()
        })
        .collect();
    let zero = vars[0].constant_like(0.0);
    let mut m = vec![vec![zero; 2 * n]; 2 * n];
    for i in 0..n {
        for j in 0..n {
            let nng: Vec<Jet> = (0..n).map(|l| &ng[i][l] * &conn[j][l]).collect();
            let nng = jets::sum(&nng).expect("n >= 1");
            let cross = &ng[j][i] + &ng[i][j];
            m[i][j] = &(&(&alpha * &g[i][j]) - &(&sigma * &cross)) + &(&delta * &nng);
            m[i][n + j] = &(&delta * &ng[i][j]) - &(&sigma * &g[i][j]);
            m[n + j][i] = m[i][n + j].clone();
            m[n + i][n + j] = &delta * &g[i][j];
        }
    }
    let m = m.into_iter().map(|row| row.into_iter().map(|j| j.truncate(2)).collect()).collect();
    Ok((m, conn))
}

impl TmOracle {
    pub fn new(sg: &ScenarioGeometry, pt: &TangentPoint) -> Result<TmOracle> {
        let n = sg.dim();
        let dim = 2 * n;
        let (metric_jets, conn_jets) = metric_parts(sg, pt)?;
        let metric = jet_values(&metric_jets);
        let inverse_jets = invert_jet_matrix(&metric_jets)?;
        let inverse = jet_values(&inverse_jets);
        let dg: Vec<Vec<Vec<Jet>>> = (0..dim)
            .map(|c| {
                metric_jets
                    .iter()
                    .map(|row| row.iter().map(|j| j.diff(c)).collect::<std::result::Result<_, _>>())
                    .collect::<std::result::Result<_, _>>()
            })
            .collect::<std::result::Result<_, _>>()?;
        // first-kind symbols [ab, d] = ½(∂_a g_bd + ∂_b g_ad - ∂_d g_ab)
        let mut christoffel_jets = Vec::with_capacity(dim);
        for c in 0..dim {
            let mut rows = Vec::with_capacity(dim);
            for a in 0..dim {
                let mut row = Vec::with_capacity(dim);
                for b in 0..dim {
                    let t: Vec<Jet> = (0..dim)
                        .map(|d| {
                            let first = &(&dg[a][b][d] + &dg[b][a][d]) - &dg[d][a][b];
                            &inverse_jets[c][d].truncate(1) * &first.scale(0.5)
                        })
                        .collect();
                    row.push(jets::sum(&t).expect("dim >= 2"));
                }
                rows.push(row);
            }
            christoffel_jets.push(rows);
        }
        let christoffel: Vec<Vec<Vec<f64>>> = christoffel_jets
            .iter()
            .map(|m| jet_values(m))
            .collect();
        let mut riemann = vec![vec![vec![vec![0.0; dim]; dim]; dim]; dim];
        for d in 0..dim {
            for c in 0..dim {
                for a in 0..dim {
                    for b in 0..dim {
                        let mut r = christoffel_jets[d][b][c].partial(a) - christoffel_jets[d][a][c].partial(b);
                        for m in 0..dim {
                            r += christoffel[d][a][m] * christoffel[m][b][c]
                                - christoffel[d][b][m] * christoffel[m][a][c];
                        }
                        riemann[d][c][a][b] = r;
                    }
                }
            }
        }
        let frame = FrameChange {
            n: jet_values(&conn_jets),
        };
        Ok(TmOracle {
            n,
            point: pt.clone(),
            frame,
            metric_jets,
            metric,
            inverse_jets,
            inverse,
            christoffel,
            riemann,
            conn_jets,
        })
    }

    pub fn gbar(&self, a: &LiftVector, b: &LiftVector) -> f64 {
        linalg::bilinear(&self.metric, &self.frame.to_coordinate(a), &self.frame.to_coordinate(b))
    }

    /// Eigenvalues of the coordinate component matrix, ascending.
    pub fn metric_eigenvalues(&self) -> Vec<f64> {
        linalg::symmetric_eigenvalues(&self.metric)
    }

    /// Coordinate components of a lifted constant-coefficient field as jets.
    fn lifted_field(&self, lift: Lift, y: &[f64]) -> Vec<Jet> {
        let n = self.n;
        let template = &self.conn_jets[0][0];
        let mut out: Vec<Jet> = Vec::with_capacity(2 * n);
        match lift {
            Lift::H => {
                out.extend(y.iter().map(|&c| template.constant_like(c)));
                for k in 0..n {
                    let t: Vec<Jet> = (0..n).map(|j| self.conn_jets[j][k].scale(-y[j])).collect();
                    out.push(jets::sum(&t).expect("n >= 1"));
                }
            }
            Lift::V => {
                out.extend((0..n).map(|_| template.constant_like(0.0)));
                out.extend(y.iter().map(|&c| template.constant_like(c)));
            }
        }
        out
    }

    /// `∇̄_A B` for a field with coordinate component jets `field`.
    fn covariant_derivative(&self, a: &LiftVector, field: &[Jet]) -> Result<LiftVector> {
        let dim = 2 * self.n;
        let ac = self.frame.to_coordinate(a);
        let bc: Vec<f64> = field.iter().map(Jet::value).collect();
        let mut out = vec![0.0; dim];
        for (c, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for a_idx in 0..dim {
                if ac[a_idx] == 0.0 {
                    continue;
                }
                acc += ac[a_idx] * field[c].diff(a_idx)?.value();
                for b in 0..dim {
                    acc += self.christoffel[c][a_idx][b] * ac[a_idx] * bc[b];
                }
            }
            *o = acc;
        }
        Ok(self.frame.to_adapted(&out))
    }

    /// `∇̄_{X^·} Y^·` with both fields lifted from constant-coefficient base fields.
    pub fn covderiv_lifted_field(&self, a: Lift, b: Lift, x: &[f64], y: &[f64]) -> Result<LiftVector> {
        self.covariant_derivative(&LiftVector::lift(a, x), &self.lifted_field(b, y))
    }

    /// `R̄(A,B)C`.
    pub fn riemann_apply(&self, a: &LiftVector, b: &LiftVector, c: &LiftVector) -> LiftVector {
        let dim = 2 * self.n;
        let (ac, bc, cc) = (
            self.frame.to_coordinate(a),
            self.frame.to_coordinate(b),
            self.frame.to_coordinate(c),
        );
        let mut out = vec![0.0; dim];
        for (d, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in 0..dim {
                if cc[k] == 0.0 {
                    continue;
                }
                for i in 0..dim {
                    if ac[i] == 0.0 {
                        continue;
                    }
                    for j in 0..dim {
                        acc += self.riemann[d][k][i][j] * cc[k] * ac[i] * bc[j];
                    }
                }
            }
            *o = acc;
        }
        self.frame.to_adapted(&out)
    }

    /// `R̄(X^·,Y^·)Z^·` for lifted base vectors.
    pub fn riemann_lifts(&self, lifts: [Lift; 3], x: &[f64], y: &[f64], z: &[f64]) -> LiftVector {
        self.riemann_apply(
            &LiftVector::lift(lifts[0], x),
            &LiftVector::lift(lifts[1], y),
            &LiftVector::lift(lifts[2], z),
        )
    }

    /// Ricci operator `Q̄(A) = Σ ḡ^{ab} R̄(A,∂_a)∂_b`.
    pub fn ricci_apply(&self, a: &LiftVector) -> LiftVector {
        let dim = 2 * self.n;
        let ac = self.frame.to_coordinate(a);
        let mut out = vec![0.0; dim];
        for (d, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..dim {
                if ac[i] == 0.0 {
                    continue;
                }
                for p in 0..dim {
                    for q in 0..dim {
                        acc += self.inverse[p][q] * self.riemann[d][q][i][p] * ac[i];
                    }
                }
            }
            *o = acc;
        }
        self.frame.to_adapted(&out)
    }

    /// Sectional curvature of the plane spanned by `A`, `B`.
    pub fn sectional(&self, a: &LiftVector, b: &LiftVector) -> Result<f64> {
        let den = self.gbar(a, a) * self.gbar(b, b) - self.gbar(a, b).powi(2);
        if den < 1e-12 {
            return Err(GeomError::DegeneratePlane(den));
        }
        Ok(self.gbar(&self.riemann_apply(a, b, b), a) / den)
    }

    fn jet_of(&self, f: &Expr) -> Result<Jet> {
        Ok(eval_jet(f, &self.point.coords(), 3)?)
    }

    fn gradient_jets(&self, fj: &Jet) -> Result<Vec<Jet>> {
        let dim = 2 * self.n;
        let df: Vec<Jet> = (0..dim).map(|b| fj.diff(b)).collect::<std::result::Result<_, _>>()?;
        Ok((0..dim)
            .map(|c| {
                let t: Vec<Jet> = (0..dim).map(|b| &self.inverse_jets[c][b] * &df[b]).collect();
                jets::sum(&t).expect("dim >= 2")
            })
            .collect())
    }

    /// `∇̄f` for a scalar expression.
    pub fn gradient(&self, f: &Expr) -> Result<LiftVector> {
        let g: Vec<f64> = self.gradient_jets(&self.jet_of(f)?)?.iter().map(Jet::value).collect();
        Ok(self.frame.to_adapted(&g))
    }

    /// `∇̄_A ∇̄f`.
    pub fn hessian_along(&self, a: &LiftVector, f: &Expr) -> Result<LiftVector> {
        let g = self.gradient_jets(&self.jet_of(f)?)?;
        self.covariant_derivative(a, &g)
    }

    /// Laplace–Beltrami `ḡ^{ab}(∂_a∂_b f - Γ̄^c_{ab}∂_c f)`.
    pub fn laplace_beltrami(&self, f: &Expr) -> Result<f64> {
        let fj = self.jet_of(f)?;
        let dim = 2 * self.n;
        let mut acc = 0.0;
        for a in 0..dim {
            for b in 0..dim {
                let mut hess = fj.second(a, b);
                for c in 0..dim {
                    hess -= self.christoffel[c][a][b] * fj.partial(c);
                }
                acc += self.inverse[a][b] * hess;
            }
        }
        Ok(acc)
    }

    /// Largest `|∂_a ḡ_bc - Γ̄^d_{ab}ḡ_dc - Γ̄^d_{ac}ḡ_bd|`.
    pub fn metric_compatibility_defect(&self) -> f64 {
        let dim = 2 * self.n;
        let mut worst: f64 = 0.0;
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    let mut r = self.metric_jets[b][c].partial(a);
                    for d in 0..dim {
                        r -= self.christoffel[d][a][b] * self.metric[d][c]
                            + self.christoffel[d][a][c] * self.metric[b][d];
                    }
                    worst = worst.max(r.abs());
                }
            }
        }
        worst
    }

    /// Largest `|Γ̄^c_{ab} - Γ̄^c_{ba}|`.
    pub fn christoffel_asymmetry(&self) -> f64 {
        let dim = 2 * self.n;
        let mut worst: f64 = 0.0;
        for c in 0..dim {
            for a in 0..dim {
                for b in 0..dim {
                    worst = worst.max((self.christoffel[c][a][b] - self.christoffel[c][b][a]).abs());
                }
            }
        }
        worst
    }

    /// Lowered `R̄(∂_a,∂_b,∂_c,∂_d) = ḡ(R̄(∂_a,∂_b)∂_c, ∂_d)`.
    pub fn riemann_lower(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        (0..2 * self.n).map(|m| self.riemann[m][c][a][b] * self.metric[m][d]).sum()
    }

    /// Largest violation over the coordinate frame of antisymmetry in each
    /// pair, pair symmetry and the first Bianchi identity.
    pub fn riemann_symmetry_defect(&self) -> f64 {
        let dim = 2 * self.n;
        let r = |a, b, c, d| self.riemann_lower(a, b, c, d);
        let mut worst: f64 = 0.0;
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    for d in 0..dim {
                        let x = r(a, b, c, d);
                        worst = worst
                            .max((x + r(b, a, c, d)).abs())
                            .max((x + r(a, b, d, c)).abs())
                            .max((x - r(c, d, a, b)).abs())
                            .max((x + r(b, c, a, d) + r(c, a, b, d)).abs());
                    }
                }
            }
        }
        worst
    }
}

pub fn oracle_christoffel_tm(sg: &ScenarioGeometry, pt: &TangentPoint) -> Result<Vec<Vec<Vec<f64>>>> {
    Ok(TmOracle::new(sg, pt)?.christoffel)
}

pub fn oracle_covderiv_lifted_field(
    sg: &ScenarioGeometry,
    pt: &TangentPoint,
    a: Lift,
    b: Lift,
    x: &[f64],
    y: &[f64],
) -> Result<LiftVector> {
    TmOracle::new(sg, pt)?.covderiv_lifted_field(a, b, x, y)
}

pub fn oracle_riemann_tm(sg: &ScenarioGeometry, pt: &TangentPoint) -> Result<Vec<Vec<Vec<Vec<f64>>>>> {
    Ok(TmOracle::new(sg, pt)?.riemann)
}

pub fn oracle_ricci_tm(sg: &ScenarioGeometry, pt: &TangentPoint, a: &LiftVector) -> Result<LiftVector> {
    Ok(TmOracle::new(sg, pt)?.ricci_apply(a))
}

/// Gradient and Laplace–Beltrami of a scalar.
pub fn oracle_scalar_ops(sg: &ScenarioGeometry, pt: &TangentPoint, f: &Expr) -> Result<(LiftVector, f64)> {
    let o = TmOracle::new(sg, pt)?;
    Ok((o.gradient(f)?, o.laplace_beltrami(f)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_geom::ChartMetric;
    use crate::expr::parse;
    use crate::tm_geom::IsotropicParams;
    use std::f64::consts::FRAC_PI_4;

    fn geometry(metric: [&str; 4], domain: Vec<(f64, f64)>, alpha: &str, sigma: &str) -> ScenarioGeometry {
        let m = ChartMetric::parse(
            &[
                vec![metric[0].into(), metric[1].into()],
                vec![metric[2].into(), metric[3].into()],
            ],
            domain,
        )
        .unwrap();
        ScenarioGeometry::new(m, IsotropicParams::parse(alpha, sigma, 2).unwrap()).unwrap()
    }

    fn flat(alpha: &str) -> ScenarioGeometry {
        geometry(["1", "0", "0", "1"], vec![(-2.0, 2.0); 2], alpha, "0")
    }

    fn sphere(alpha: &str, sigma: &str) -> ScenarioGeometry {
        geometry(["1", "0", "0", "sin(x1)^2"], vec![(0.3, 2.8), (-3.0, 3.0)], alpha, sigma)
    }

    #[test]
    fn metric_examples() {
        let pt = TangentPoint::new(vec![0.1, 0.2], vec![0.3, -0.4]);
        let m = jet_values(&build_tm_metric(&flat("1"), &pt).unwrap());
        for (i, row) in m.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_eq!(*v, if i == j { 1.0 } else { 0.0 });
            }
        }
        let m = jet_values(&build_tm_metric(&flat("2"), &pt).unwrap());
        let diag: Vec<f64> = (0..4).map(|i| m[i][i]).collect();
        assert_eq!(diag, vec![2.0, 2.0, 0.5, 0.5]);

        let pt = TangentPoint::new(vec![FRAC_PI_4, 0.0], vec![0.0, 1.0]);
        let m = jet_values(&build_tm_metric(&sphere("1", "0"), &pt).unwrap());
        // only N_2^1 = Γ^1_{22} u^2 is nonzero, so the entry sits at (x2, u1)
        assert!((m[1][2] + 0.5).abs() < 1e-14);
        assert_eq!(m[0][2], 0.0);
    }

    #[test]
    fn frame_change_round_trip_and_consistency() {
        let sg = sphere("1+u1^2", "0.3");
        let pt = TangentPoint::new(vec![1.1, 0.4], vec![0.5, -0.7]);
        let o = TmOracle::new(&sg, &pt).unwrap();
        let a = LiftVector::new(vec![0.3, -1.2], vec![0.8, 2.0]);
        let b = LiftVector::new(vec![-0.5, 0.1], vec![1.5, -0.3]);
        let back = o.frame.to_adapted(&o.frame.to_coordinate(&a));
        assert!((&back - &a).max_abs() < 1e-14);
        let prod = crate::linalg::to_dmatrix(&o.frame.matrix()) * crate::linalg::to_dmatrix(&o.frame.inverse_matrix());
        assert!((prod - nalgebra::DMatrix::<f64>::identity(4, 4)).abs().max() < 1e-14);
        let closed = sg.gbar_eval(&pt, &a, &b).unwrap();
        assert!((o.gbar(&a, &b) - closed).abs() < 1e-12 * closed.abs().max(1.0));
    }

    #[test]
    fn flat_sasaki_is_flat() {
        let o = TmOracle::new(&flat("1"), &TangentPoint::new(vec![0.0, 0.5], vec![1.0, 2.0])).unwrap();
        assert!(o.christoffel.iter().flatten().flatten().all(|&c| c == 0.0));
        assert!(o.riemann.iter().flatten().flatten().flatten().all(|&c| c == 0.0));
        assert_eq!(o.laplace_beltrami(&parse("3", 2).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn energy_alpha_values() {
        let sg = flat("1+u1^2+u2^2");
        let pt = TangentPoint::new(vec![0.0, 0.0], vec![1.0, 0.0]);
        let o = TmOracle::new(&sg, &pt).unwrap();
        let vv = o.covderiv_lifted_field(Lift::V, Lift::V, &[0.0, 1.0], &[0.0, 1.0]).unwrap();
        assert!((&vv - &LiftVector::vertical(&[0.5, 0.0])).max_abs() < 1e-12);
        let alpha = sg.params.alpha().clone();
        let (grad, lap) = oracle_scalar_ops(&sg, &pt, &alpha).unwrap();
        assert!((&grad - &LiftVector::vertical(&[4.0, 0.0])).max_abs() < 1e-12);
        assert!((lap - 12.0).abs() < 1e-12);

        let pt = TangentPoint::new(vec![0.0, 0.0], vec![1.0, 1.0]);
        let hv = oracle_covderiv_lifted_field(&sg, &pt, Lift::H, Lift::V, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((&hv - &LiftVector::horizontal(&[1.0 / 3.0, 0.0])).max_abs() < 1e-12);
    }

    #[test]
    fn sphere_zero_section() {
        let sg = sphere("1", "0");
        let pt = TangentPoint::new(vec![FRAC_PI_4, 0.3], vec![0.0, 0.0]);
        let o = TmOracle::new(&sg, &pt).unwrap();
        let x = [1.0, 0.0];
        let y = [0.0, 1.0 / FRAC_PI_4.sin()];
        let k = o.sectional(&LiftVector::horizontal(&x), &LiftVector::horizontal(&y)).unwrap();
        assert!((k - 1.0).abs() < 1e-10);
        let hh = o.covderiv_lifted_field(Lift::H, Lift::H, &[0.0, 1.0], &[0.0, 1.0]).unwrap();
        assert!((&hh - &LiftVector::horizontal(&[-0.5, 0.0])).max_abs() < 1e-12);
    }

    #[test]
    fn self_tests_hold_for_general_sigma() {
        let sg = sphere("1+u1^2", "0.3");
        let pt = TangentPoint::new(vec![1.3, -0.2], vec![0.4, 0.9]);
        let o = TmOracle::new(&sg, &pt).unwrap();
        assert!(o.christoffel_asymmetry() < 1e-12);
        assert!(o.metric_compatibility_defect() < 1e-9);
        assert!(o.riemann_symmetry_defect() < 1e-9);
        assert!(o.metric_eigenvalues()[0] > 0.0);
    }
}
