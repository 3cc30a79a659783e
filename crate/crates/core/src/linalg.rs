//! Small dense helpers shared by the base, bundle and oracle computations.

use nalgebra::DMatrix;

use crate::error::{GeomError, Result};
use crate::jets::Jet;

/// Inversion is refused above this condition number.
pub const MAX_CONDITION: f64 = 1e12;

pub type Mat = Vec<Vec<f64>>;

pub fn to_dmatrix(m: &[Vec<f64>]) -> DMatrix<f64> {
    let n = m.len();
    DMatrix::from_fn(n, n, |i, j| m[i][j])
}

pub fn from_dmatrix(m: &DMatrix<f64>) -> Mat {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(m: &[Vec<f64>]) -> Vec<f64> {
    let mut ev: Vec<f64> = to_dmatrix(m).symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Check symmetric positive definiteness and conditioning, then invert.
pub fn spd_inverse(m: &[Vec<f64>]) -> Result<Mat> {
    let ev = symmetric_eigenvalues(m);
    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
    if lo <= 0.0 {
        if lo.abs() <= hi.abs() / MAX_CONDITION || hi == 0.0 {
            return Err(GeomError::SingularMetric {
                condition: f64::INFINITY,
            });
        }
        return Err(GeomError::NotPositiveDefinite { min_eigenvalue: lo });
    }
    let condition = hi / lo;
    if condition > MAX_CONDITION {
        return Err(GeomError::SingularMetric { condition });
    }
    let inv = to_dmatrix(m)
        .try_inverse()
        .ok_or(GeomError::SingularMetric {
            condition: f64::INFINITY,
        })?;
    Ok(from_dmatrix(&inv))
}

pub fn jet_values(m: &[Vec<Jet>]) -> Mat {
    m.iter().map(|row| row.iter().map(Jet::value).collect()).collect()
}

fn jet_matmul(a: &[Vec<Jet>], b: &[Vec<Jet>]) -> Vec<Vec<Jet>> {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut acc = &a[i][0] * &b[0][j];
                    for k in 1..n {
                        acc = &acc + &(&a[i][k] * &b[k][j]);
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

/// Inverse of a symmetric positive definite matrix of jets.
///
/// With `G = G0 + N` where `N` has zero value part, `N` is nilpotent of
/// degree `order + 1`, so `G⁻¹ = Σ_{m ≤ order} (-G0⁻¹ N)^m G0⁻¹` exactly.
pub fn invert_jet_matrix(g: &[Vec<Jet>]) -> Result<Vec<Vec<Jet>>> {
    let n = g.len();
    let template = &g[0][0];
    let inv0 = spd_inverse(&jet_values(g))?;
    let inv0_jets: Vec<Vec<Jet>> = inv0
        .iter()
        .map(|row| row.iter().map(|&v| template.constant_like(v)).collect())
        .collect();
    let nil: Vec<Vec<Jet>> = g
        .iter()
        .map(|row| row.iter().map(|j| j.add_scalar(-j.value())).collect())
        .collect();
    let step: Vec<Vec<Jet>> = jet_matmul(&inv0_jets, &nil)
        .into_iter()
        .map(|row| row.into_iter().map(|j| -&j).collect())
        .collect();
    let mut term = inv0_jets.clone();
    let mut acc = inv0_jets;
    for _ in 0..template.order() {
        term = jet_matmul(&step, &term);
        for i in 0..n {
            for j in 0..n {
                acc[i][j] = &acc[i][j] + &term[i][j];
            }
        }
    }
    Ok(acc)
}

pub fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `aᵀ M b`.
pub fn bilinear(m: &[Vec<f64>], a: &[f64], b: &[f64]) -> f64 {
    dot(a, &mat_vec(m, b))
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Orthonormalize the coordinate frame with respect to `g`, in index order.
/// Column `i` of the result is returned as `frame[i]`.
pub fn gram_schmidt(g: &[Vec<f64>]) -> Mat {
    let n = g.len();
    let mut frame: Mat = Vec::with_capacity(n);
    for i in 0..n {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        for e in &frame {
            let c = bilinear(g, &v, e);
            for (vk, ek) in v.iter_mut().zip(e) {
                *vk -= c * ek;
            }
        }
        let norm = bilinear(g, &v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        frame.push(v);
    }
    frame
}

/// Orthonormalize an arbitrary list of vectors with respect to `g`.
pub fn gram_schmidt_vectors(g: &[Vec<f64>], vectors: &[Vec<f64>]) -> Mat {
    let mut out: Mat = Vec::new();
    for v0 in vectors {
        let mut v = v0.clone();
        for e in &out {
            let c = bilinear(g, &v, e);
            for (vk, ek) in v.iter_mut().zip(e) {
                *vk -= c * ek;
            }
        }
        let norm = bilinear(g, &v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        out.push(v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jet_inverse_matches_series() {
        let vars = Jet::variables(&[0.4, -0.3], 3);
        let one = vars[0].constant_like(1.0);
        let g = vec![
            vec![(&vars[0] * &vars[0]).add_scalar(2.0), &vars[0] * &vars[1]],
            vec![&vars[0] * &vars[1], &one + &(&vars[1] * &vars[1])],
        ];
        let inv = invert_jet_matrix(&g).unwrap();
        let prod = jet_matmul(&g, &inv);
        for (i, row) in prod.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((p.value() - want).abs() < 1e-14);
                assert!(p.coeffs()[1..].iter().all(|c| c.abs() < 1e-13));
            }
        }
    }

    #[test]
    fn gram_schmidt_is_orthonormal() {
        let g = vec![vec![2.0, 0.3], vec![0.3, 0.5]];
        let f = gram_schmidt(&g);
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((bilinear(&g, &f[i], &f[j]) - want).abs() < 1e-14);
            }
        }
        assert_eq!(f[0][1], 0.0);
    }

    #[test]
    fn singular_metric_rejected() {
        let g = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert!(matches!(spd_inverse(&g), Err(GeomError::SingularMetric { .. })));
        let h = vec![vec![1.0, 0.0], vec![0.0, -1.0]];
        assert!(matches!(spd_inverse(&h), Err(GeomError::NotPositiveDefinite { .. })));
    }
}
