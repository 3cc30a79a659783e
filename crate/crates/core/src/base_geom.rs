//! Geometry of the base manifold `(M, g)` on a single chart.
//!
//! Curvature convention: `R(X,Y)Z = ∇_X∇_Y Z - ∇_Y∇_X Z - ∇_[X,Y] Z`, with
//! components `R(∂_i,∂_j)∂_k = R^l_{kij} ∂_l`. The lowered tensor is
//! `R_{ijkl} = g(R(∂_i,∂_j)∂_l, ∂_k)`, so that `R_1212 > 0` on a round sphere.

use crate::error::{GeomError, Result};
use crate::expr::{parse, Expr};
use crate::jets::Jet;
use crate::linalg::{self, bilinear, gram_schmidt, Mat};

/// Rank-5 array indexed `[a][b][c][d][e]`.
pub type Tensor5 = Vec<Vec<Vec<Vec<Vec<f64>>>>>;

/// Base metric `g_ij(x)` given as expressions over a coordinate box.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartMetric {
    n: usize,
    components: Vec<Vec<Expr>>,
    domain: Vec<(f64, f64)>,
}

impl ChartMetric {
    pub fn new(components: Vec<Vec<Expr>>, domain: Vec<(f64, f64)>) -> Result<ChartMetric> {
        let n = components.len();
        if n == 0 {
            return Err(GeomError::Invalid("metric must have dimension >= 1".into()));
        }
        for row in &components {
            if row.len() != n {
                return Err(GeomError::Dimension {
                    expected: n,
                    got: row.len(),
                });
            }
        }
        if domain.len() != n {
            return Err(GeomError::Dimension {
                expected: n,
                got: domain.len(),
            });
        }
        for (i, &(lo, hi)) in domain.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(GeomError::Invalid(format!(
                    "domain interval {} is empty or not finite: [{lo}, {hi}]",
                    i + 1
                )));
            }
        }
        for (i, row) in components.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                if !e.is_base_only() {
                    return Err(GeomError::Invalid(format!(
                        "metric component g{}{} depends on fiber coordinates",
                        i + 1,
                        j + 1
                    )));
                }
                if e.max_var_index() > n {
                    return Err(GeomError::Dimension {
                        expected: n,
                        got: e.max_var_index(),
                    });
                }
            }
        }
        Ok(ChartMetric {
            n,
            components,
            domain,
        })
    }

    /// Parse an `n × n` matrix of expression strings.
    pub fn parse(components: &[Vec<String>], domain: Vec<(f64, f64)>) -> Result<ChartMetric> {
        let n = components.len();
        let parsed = components
            .iter()
            .map(|row| row.iter().map(|s| parse(s, n)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        ChartMetric::new(parsed, domain)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn components(&self) -> &[Vec<Expr>] {
        &self.components
    }

    pub fn check_domain(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(GeomError::Dimension {
                expected: self.n,
                got: x.len(),
            });
        }
        for (coord, (&value, &(lo, hi))) in x.iter().zip(&self.domain).enumerate() {
            if !(value >= lo && value <= hi) {
                return Err(GeomError::OutOfDomain {
                    coord: coord + 1,
                    value,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }

    /// Metric components as jets in whatever variable layout `x` uses; the
    /// first `n` variables of that layout must be the base coordinates.
    pub fn jets(&self, x: &[Jet]) -> Result<Vec<Vec<Jet>>> {
        let g: Vec<Vec<Jet>> = self
            .components
            .iter()
            .map(|row| row.iter().map(|e| e.eval_with(x, &[])).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let diff = (g[i][j].value() - g[j][i].value()).abs();
                let scale = 1.0 + g[i][j].value().abs().max(g[j][i].value().abs());
                if diff > 1e-12 * scale {
                    return Err(GeomError::NotSymmetric { i: i + 1, j: j + 1, diff });
                }
            }
        }
        Ok(g)
    }

    /// Metric values at a base point.
    pub fn values(&self, x: &[f64]) -> Result<Mat> {
        let vars: Vec<Jet> = x.iter().map(|&v| Jet::constant(v, 1, 0)).collect();
        Ok(linalg::jet_values(&self.jets(&vars)?))
    }
}

/// Metric, Christoffel symbols and curvature as jets in a shared layout.
///
/// With `g` at order `k`: `Γ` has order `k-1` and `R` order `k-2`.
#[derive(Debug, Clone)]
pub struct BaseFields {
    pub n: usize,
    pub g: Vec<Vec<Jet>>,
    pub ginv: Vec<Vec<Jet>>,
    /// `gamma[k][i][j] = Γ^k_{ij}`.
    pub gamma: Vec<Vec<Vec<Jet>>>,
    /// `riemann[l][k][i][j] = R^l_{kij}`, present when `g` has order >= 2.
    pub riemann: Option<Vec<Vec<Vec<Vec<Jet>>>>>,
}

impl BaseFields {
    pub fn new(metric: &ChartMetric, x: &[Jet]) -> Result<BaseFields> {
        let n = metric.dim();
        let g = metric.jets(x)?;
        let ginv = linalg::invert_jet_matrix(&g)?;
        let order = g[0][0].order();
        if order == 0 {
            return Err(GeomError::Invalid("base fields need metric jets of order >= 1".into()));
        }
        // dg[l][i][j] = ∂_l g_ij
        let dg: Vec<Vec<Vec<Jet>>> = (0..n)
            .map(|l| {
                g.iter()
                    .map(|row| row.iter().map(|e| e.diff(l)).collect::<Result<Vec<_>, _>>())
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        // first-kind symbols Γ_{ijl} = ½(∂_i g_jl + ∂_j g_il - ∂_l g_ij)
        let first = |i: usize, j: usize, l: usize| -> Jet {
            (&(&dg[i][j][l] + &dg[j][i][l]) - &dg[l][i][j]).scale(0.5)
        };
        let mut gamma = vec![vec![Vec::with_capacity(n); n]; n];
        for (k, gk) in gamma.iter_mut().enumerate() {
            for (i, gki) in gk.iter_mut().enumerate() {
                for j in 0..n {
                    let mut acc = &ginv[k][0] * &first(i, j, 0);
                    for l in 1..n {
                        acc = &acc + &(&ginv[k][l] * &first(i, j, l));
                    }
                    gki.push(acc);
                }
            }
        }
        let riemann = if order >= 2 {
            Some(riemann_from_gamma(n, &gamma)?)
        } else {
            None
        };
        Ok(BaseFields {
            n,
            g,
            ginv,
            gamma,
            riemann,
        })
    }
}

/// `R^l_{kij} = ∂_iΓ^l_{jk} - ∂_jΓ^l_{ik} + Γ^l_{im}Γ^m_{jk} - Γ^l_{jm}Γ^m_{ik}`.
pub(crate) fn riemann_from_gamma(n: usize, gamma: &[Vec<Vec<Jet>>]) -> Result<Vec<Vec<Vec<Vec<Jet>>>>> {
    let mut out = Vec::with_capacity(n);
    for l in 0..n {
        let mut rl = Vec::with_capacity(n);
        for k in 0..n {
            let mut rlk = Vec::with_capacity(n);
            for i in 0..n {
                let mut rlki = Vec::with_capacity(n);
                for j in 0..n {
                    let mut acc = &gamma[l][j][k].diff(i)? - &gamma[l][i][k].diff(j)?;
                    for m in 0..n {
                        acc = &acc + &(&gamma[l][i][m] * &gamma[m][j][k]);
                        acc = &acc - &(&gamma[l][j][m] * &gamma[m][i][k]);
                    }
                    rlki.push(acc);
                }
                rlk.push(rlki);
            }
            rl.push(rlk);
        }
        out.push(rl);
    }
    Ok(out)
}

/// Values of every base-side quantity at one point.
#[derive(Debug, Clone)]
pub struct BaseGeoCache {
    pub n: usize,
    pub g: Mat,
    pub ginv: Mat,
    /// `gamma[k][i][j] = Γ^k_{ij}`.
    pub gamma: Vec<Vec<Vec<f64>>>,
    /// `dgamma[m][k][i][j] = ∂_m Γ^k_{ij}`.
    pub dgamma: Vec<Vec<Vec<Vec<f64>>>>,
    /// `d2gamma[m][p][k][i][j] = ∂_m ∂_p Γ^k_{ij}`.
    pub d2gamma: Tensor5,
    /// `riemann[l][k][i][j] = R^l_{kij}`.
    pub riemann: Vec<Vec<Vec<Vec<f64>>>>,
    /// `nabla_riemann[m][l][k][i][j] = ∇_m R^l_{kij}`.
    pub nabla_riemann: Tensor5,
    /// Ricci operator `Q^l_i`, `Q(X) = Σ R(X,E_a)E_a`.
    pub ricci: Mat,
    /// g-orthonormal frame from Gram–Schmidt on the coordinate frame.
    pub frame: Mat,
}

impl BaseGeoCache {
    /// Evaluate at a base point, using order-3 jets in the `n` base variables.
    pub fn at(metric: &ChartMetric, x: &[f64]) -> Result<BaseGeoCache> {
        metric.check_domain(x)?;
        let vars = Jet::variables(x, 3);
        BaseGeoCache::from_fields(&BaseFields::new(metric, &vars)?)
    }

    /// Extract values from fields built at order 3 (any layout whose leading
    /// variables are the base coordinates).
    pub fn from_fields(f: &BaseFields) -> Result<BaseGeoCache> {
        let n = f.n;
        let riemann_jets = f
            .riemann
            .as_ref()
            .ok_or_else(|| GeomError::Invalid("curvature needs metric jets of order 3".into()))?;
        if f.g[0][0].order() < 3 {
            return Err(GeomError::Invalid("curvature derivatives need metric jets of order 3".into()));
        }
        let g = linalg::jet_values(&f.g);
        let ginv = linalg::jet_values(&f.ginv);
        let map3 = |t: &Vec<Vec<Vec<Jet>>>, h: &dyn Fn(&Jet) -> f64| -> Vec<Vec<Vec<f64>>> {
            t.iter()
                .map(|a| a.iter().map(|b| b.iter().map(h).collect()).collect())
                .collect()
        };
        let gamma = map3(&f.gamma, &|j| j.value());
        let dgamma = (0..n).map(|m| map3(&f.gamma, &|j| j.partial(m))).collect();
        let d2gamma = (0..n)
            .map(|m| (0..n).map(|p| map3(&f.gamma, &|j| j.second(m, p))).collect())
            .collect();
        let map4 = |h: &dyn Fn(&Jet) -> f64| -> Vec<Vec<Vec<Vec<f64>>>> {
            riemann_jets.iter().map(|t| map3(t, h)).collect()
        };
        let riemann = map4(&|j| j.value());
        let dr: Tensor5 = (0..n).map(|m| map4(&|j| j.partial(m))).collect();

        let mut nabla_riemann = dr.clone();
        for m in 0..n {
            for l in 0..n {
                for k in 0..n {
                    for i in 0..n {
                        for j in 0..n {
                            let mut acc = dr[m][l][k][i][j];
                            for p in 0..n {
                                acc += gamma[l][m][p] * riemann[p][k][i][j]
                                    - gamma[p][m][k] * riemann[l][p][i][j]
                                    - gamma[p][m][i] * riemann[l][k][p][j]
                                    - gamma[p][m][j] * riemann[l][k][i][p];
                            }
                            nabla_riemann[m][l][k][i][j] = acc;
                        }
                    }
                }
            }
        }

        let frame = gram_schmidt(&g);
        let mut cache = BaseGeoCache {
            n,
            g,
            ginv,
            gamma,
            dgamma,
            d2gamma,
            riemann,
            nabla_riemann,
            ricci: vec![vec![0.0; n]; n],
            frame,
        };
        let mut ricci = vec![vec![0.0; n]; n];
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            let q = cache.ricci_apply_frame(&e);
            for l in 0..n {
                ricci[l][i] = q[l];
            }
        }
        cache.ricci = ricci;
        Ok(cache)
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        bilinear(&self.g, a, b)
    }

    pub fn norm_sq(&self, a: &[f64]) -> f64 {
        self.inner(a, a)
    }

    /// `∇_X Y` for constant-coefficient fields: `Γ^k_{ij} X^i Y^j`.
    pub fn gamma_apply(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|k| {
                let mut acc = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        acc += self.gamma[k][i][j] * x[i] * y[j];
                    }
                }
                acc
            })
            .collect()
    }

    /// `R(X,Y)Z`.
    pub fn r(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|l| {
                let mut acc = 0.0;
                for k in 0..n {
                    if z[k] == 0.0 {
                        continue;
                    }
                    for i in 0..n {
                        for j in 0..n {
                            acc += self.riemann[l][k][i][j] * z[k] * x[i] * y[j];
                        }
                    }
                }
                acc
            })
            .collect()
    }

    /// `g(R(X,Y)Z, W)`.
    pub fn r4(&self, x: &[f64], y: &[f64], z: &[f64], w: &[f64]) -> f64 {
        self.inner(&self.r(x, y, z), w)
    }

    /// `(∇_D R)(X,Y)Z`.
    pub fn nabla_r(&self, d: &[f64], x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|l| {
                let mut acc = 0.0;
                for m in 0..n {
                    for k in 0..n {
                        for i in 0..n {
                            for j in 0..n {
                                acc += self.nabla_riemann[m][l][k][i][j] * d[m] * z[k] * x[i] * y[j];
                            }
                        }
                    }
                }
                acc
            })
            .collect()
    }

    /// Lowered component `R_{ijkl} = g(R(∂_i,∂_j)∂_l, ∂_k)`.
    pub fn r_lower(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        (0..self.n).map(|m| self.riemann[m][l][i][j] * self.g[m][k]).sum()
    }

    fn ricci_apply_frame(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for e in &self.frame {
            let r = self.r(x, e, e);
            for (o, v) in out.iter_mut().zip(r) {
                *o += v;
            }
        }
        out
    }

    /// `Q(X) = Σ_a R(X,E_a)E_a`.
    pub fn ricci_apply(&self, x: &[f64]) -> Vec<f64> {
        linalg::mat_vec(&self.ricci, x)
    }

    /// Sectional curvature of the plane spanned by `X`, `Y`.
    pub fn sectional(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let den = self.norm_sq(x) * self.norm_sq(y) - self.inner(x, y).powi(2);
        if den < 1e-12 {
            return Err(GeomError::DegeneratePlane(den));
        }
        Ok(self.r4(x, y, y, x) / den)
    }
}

/// Christoffel symbols `Γ^k_{ij}` at `x`, with their first and second derivatives
/// available on the returned cache.
pub fn christoffel(metric: &ChartMetric, x: &[f64]) -> Result<BaseGeoCache> {
    BaseGeoCache::at(metric, x)
}

/// `R^l_{kij}` at `x`.
pub fn riemann(metric: &ChartMetric, x: &[f64]) -> Result<Vec<Vec<Vec<Vec<f64>>>>> {
    Ok(BaseGeoCache::at(metric, x)?.riemann)
}

/// `∇_m R^l_{kij}` at `x`.
pub fn nabla_riemann(metric: &ChartMetric, x: &[f64]) -> Result<Tensor5> {
    Ok(BaseGeoCache::at(metric, x)?.nabla_riemann)
}

/// Ricci operator matrix `Q^l_i` at `x`.
pub fn ricci_base(metric: &ChartMetric, x: &[f64]) -> Result<Mat> {
    Ok(BaseGeoCache::at(metric, x)?.ricci)
}

pub fn sectional_base(metric: &ChartMetric, x: &[f64], a: &[f64], b: &[f64]) -> Result<f64> {
    BaseGeoCache::at(metric, x)?.sectional(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn metric(rows: &[&[&str]], domain: Vec<(f64, f64)>) -> ChartMetric {
        let comps: Vec<Vec<String>> = rows
            .iter()
            .map(|r| r.iter().map(|s| s.to_string()).collect())
            .collect();
        ChartMetric::parse(&comps, domain).unwrap()
    }

    fn flat() -> ChartMetric {
        metric(&[&["1", "0"], &["0", "1"]], vec![(-2.0, 2.0); 2])
    }

    fn sphere() -> ChartMetric {
        metric(&[&["1", "0"], &["0", "sin(x1)^2"]], vec![(0.3, 2.8), (-3.0, 3.0)])
    }

    fn hyperbolic() -> ChartMetric {
        metric(&[&["1/x2^2", "0"], &["0", "1/x2^2"]], vec![(-2.0, 2.0), (0.5, 3.0)])
    }

    #[test]
    fn flat_is_flat() {
        let c = BaseGeoCache::at(&flat(), &[0.3, -0.7]).unwrap();
        assert!(c.gamma.iter().flatten().flatten().all(|&v| v == 0.0));
        assert!(c.riemann.iter().flatten().flatten().flatten().all(|&v| v == 0.0));
        assert_eq!(c.sectional(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!(c.ricci.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn sphere_christoffel_and_curvature() {
        let c = BaseGeoCache::at(&sphere(), &[FRAC_PI_4, 0.2]).unwrap();
        // Γ^1_22 = -sin cos, Γ^2_12 = cot
        assert!((c.gamma[0][1][1] + 0.5).abs() < 1e-14);
        assert!((c.gamma[1][0][1] - 1.0).abs() < 1e-14);
        assert!((c.r_lower(0, 1, 0, 1) - 0.5).abs() < 1e-14);
        assert!((c.sectional(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-13);
        for i in 0..2 {
            for l in 0..2 {
                let want = if i == l { 1.0 } else { 0.0 };
                assert!((c.ricci[l][i] - want).abs() < 1e-13);
            }
        }
        assert!(c.nabla_riemann.iter().flatten().flatten().flatten().flatten().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn hyperbolic_half_plane() {
        let c = BaseGeoCache::at(&hyperbolic(), &[0.0, 2.0]).unwrap();
        // Γ^2_11 = 1/x2, Γ^1_12 = -1/x2
        assert!((c.gamma[1][0][0] - 0.5).abs() < 1e-14);
        assert!((c.gamma[0][0][1] + 0.5).abs() < 1e-14);
        assert!((c.sectional(&[1.0, 0.0], &[0.0, 1.0]).unwrap() + 1.0).abs() < 1e-13);
        assert!((c.ricci[0][0] + 1.0).abs() < 1e-13 && (c.ricci[1][1] + 1.0).abs() < 1e-13);
        assert!(matches!(
            c.sectional(&[1.0, 0.0], &[1.0, 0.0]),
            Err(GeomError::DegeneratePlane(_))
        ));
    }

    #[test]
    fn second_bianchi_on_sphere() {
        let c = BaseGeoCache::at(&sphere(), &[1.1, 0.0]).unwrap();
        let n = 2;
        for m in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for l in 0..n {
                        for k in 0..n {
                            let s = c.nabla_riemann[m][l][k][i][j]
                                + c.nabla_riemann[i][l][k][j][m]
                                + c.nabla_riemann[j][l][k][m][i];
                            assert!(s.abs() < 1e-10);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn out_of_domain_and_asymmetric() {
        assert!(matches!(
            BaseGeoCache::at(&sphere(), &[0.1, 0.0]),
            Err(GeomError::OutOfDomain { coord: 1, .. })
        ));
        let m = metric(&[&["1", "x1"], &["0", "1"]], vec![(-1.0, 1.0); 2]);
        assert!(matches!(BaseGeoCache::at(&m, &[0.5, 0.0]), Err(GeomError::NotSymmetric { .. })));
        let singular = metric(&[&["1", "1"], &["1", "1"]], vec![(-1.0, 1.0); 2]);
        assert!(matches!(
            BaseGeoCache::at(&singular, &[0.0, 0.0]),
            Err(GeomError::SingularMetric { .. })
        ));
    }
}
