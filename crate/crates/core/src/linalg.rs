//! Thin complex linear-algebra layer: thresholded ranks, null spaces, a
//! deterministic reduced row echelon form, and small helpers shared by the
//! algebra and module code.
//!
//! Rank decisions are made against `tol * sigma_max`; every routine that
//! discards singular values reports which threshold it used so callers can
//! echo it in diagnostics.

use ndarray::{s, Array1, Array2};
use ndarray_linalg::{Eig, SVD};
use num_complex::Complex64;

use crate::error::Error;
use crate::Result;

pub type C64 = Complex64;
pub type CMat = Array2<C64>;
pub type CVec = Array1<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn frob(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_norm(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Hermitian transpose.
pub fn dagger(m: &CMat) -> CMat {
    m.t().mapv(|z| z.conj())
}

/// Singular values of `m`, descending.
pub fn singular_values(m: &CMat) -> Result<Vec<f64>> {
    if m.is_empty() {
        return Ok(vec![]);
    }
    let (_, sv, _) = m.svd(false, false)?;
    Ok(sv.to_vec())
}

/// Numerical rank with relative threshold `tol`.
pub fn rank(m: &CMat, tol: f64) -> Result<usize> {
    let sv = singular_values(m)?;
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&x| x > tol * smax).count())
}

/// Orthonormal basis of the (right) null space of `m`, i.e. vectors `v`
/// with `m v ~ 0`.  Columns of the returned matrix are the basis.
pub fn nullspace(m: &CMat, tol: f64) -> Result<CMat> {
    let (rows, cols) = m.dim();
    if rows == 0 || cols == 0 {
        return Ok(Array2::eye(cols));
    }
    let (_, sv, vt) = m.svd(false, true)?;
    let vt = vt.ok_or_else(|| Error::Linalg("svd produced no V^H".into()))?;
    let smax = sv.first().copied().unwrap_or(0.0);
    let r = if smax == 0.0 {
        0
    } else {
        sv.iter().filter(|&&x| x > tol * smax).count()
    };
    // rows r.. of V^H span the null space; conjugate back to column vectors.
    let null = vt.slice(s![r.., ..]).mapv(|z| z.conj()).reversed_axes();
    Ok(null.to_owned())
}

/// Orthonormal basis of the column span of `m`.
pub fn column_space(m: &CMat, tol: f64) -> Result<CMat> {
    let (rows, cols) = m.dim();
    if rows == 0 || cols == 0 {
        return Ok(Array2::zeros((rows, 0)));
    }
    let (u, sv, _) = m.svd(true, false)?;
    let u = u.ok_or_else(|| Error::Linalg("svd produced no U".into()))?;
    let smax = sv.first().copied().unwrap_or(0.0);
    let r = if smax == 0.0 {
        0
    } else {
        sv.iter().filter(|&&x| x > tol * smax).count()
    };
    Ok(u.slice(s![.., ..r]).to_owned())
}

/// Orthonormal basis of the orthogonal complement of the column span of `m`
/// inside the ambient space.
pub fn complement(m: &CMat, tol: f64) -> Result<CMat> {
    let rows = m.nrows();
    if m.ncols() == 0 {
        return Ok(Array2::eye(rows));
    }
    let (u, sv, _) = m.svd(true, false)?;
    let u = u.ok_or_else(|| Error::Linalg("svd produced no U".into()))?;
    let smax = sv.first().copied().unwrap_or(0.0);
    let r = if smax == 0.0 {
        0
    } else {
        sv.iter().filter(|&&x| x > tol * smax).count()
    };
    Ok(u.slice(s![.., r..]).to_owned())
}

/// Eigen-decomposition of a square complex matrix.
pub fn eig(m: &CMat) -> Result<(CVec, CMat)> {
    let (w, v) = m.eig()?;
    Ok((w, v))
}

/// Inverse via LAPACK solve; errors if close to singular.
pub fn inverse(m: &CMat, tol: f64) -> Result<CMat> {
    use ndarray_linalg::Inverse;
    let sv = singular_values(m)?;
    let (smax, smin) = (
        sv.first().copied().unwrap_or(0.0),
        sv.last().copied().unwrap_or(0.0),
    );
    if smax == 0.0 || smin <= tol * smax {
        return Err(Error::Linalg(format!(
            "matrix numerically singular (sigma_min/sigma_max = {:.3e})",
            if smax == 0.0 { 0.0 } else { smin / smax }
        )));
    }
    Ok(m.inv()?)
}

/// Result of [`rref`]: reduced rows, pivot columns, and the threshold used.
pub struct Rref {
    pub reduced: CMat,
    pub pivots: Vec<usize>,
    pub threshold: f64,
}

/// Deterministic reduced row echelon form with relative pivot threshold.
/// Pivot columns are chosen in increasing column order, taking the row with
/// the largest modulus.  This pins a canonical complement basis ("non-pivot"
/// coordinates) for quotient constructions.
pub fn rref(m: &CMat, tol: f64) -> Rref {
    let mut a = m.clone();
    let (rows, cols) = a.dim();
    let scale = a.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    let threshold = tol * scale.max(1e-300);
    let mut pivots = Vec::new();
    let mut next_row = 0usize;
    for col in 0..cols {
        if next_row >= rows {
            break;
        }
        // best pivot row at this column
        let mut best = threshold;
        let mut piv: Option<usize> = None;
        for r in next_row..rows {
            let v = a[[r, col]].norm();
            if v > best {
                best = v;
                piv = Some(r);
            }
        }
        let Some(piv) = piv else { continue };
        if piv != next_row {
            // swap rows
            for c in 0..cols {
                let tmp = a[[next_row, c]];
                a[[next_row, c]] = a[[piv, c]];
                a[[piv, c]] = tmp;
            }
        }
        let inv = ONE / a[[next_row, col]];
        for c in 0..cols {
            a[[next_row, c]] *= inv;
        }
        for r in 0..rows {
            if r != next_row {
                let f = a[[r, col]];
                if f.norm() > 0.0 {
                    for c in 0..cols {
                        let x = a[[next_row, c]];
                        a[[r, c]] -= f * x;
                    }
                }
            }
        }
        pivots.push(col);
        next_row += 1;
    }
    Rref {
        reduced: a,
        pivots,
        threshold,
    }
}

/// Kronecker product (column-stacking convention: `vec(A X B) = (B^T (x) A) vec(X)`).
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let v = a[[i, j]];
            if v == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = v * b[[k, l]];
                }
            }
        }
    }
    out
}

/// Column-stacking vectorisation, matching [`kron`].
pub fn vec_col(m: &CMat) -> CVec {
    let (r, c) = m.dim();
    let mut v = Array1::zeros(r * c);
    for j in 0..c {
        for i in 0..r {
            v[j * r + i] = m[[i, j]];
        }
    }
    v
}

/// Inverse of [`vec_col`].
pub fn unvec_col(v: &CVec, rows: usize) -> CMat {
    let cols = v.len() / rows;
    let mut m = Array2::zeros((rows, cols));
    for j in 0..cols {
        for i in 0..rows {
            m[[i, j]] = v[j * rows + i];
        }
    }
    m
}

/// Projective distance between nonzero vectors: `1 - |<a,b>| / (|a||b|)`.
pub fn proj_distance(a: &CVec, b: &CVec) -> f64 {
    let na = vec_norm(a);
    let nb = vec_norm(b);
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    let inner: C64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    (1.0 - inner.norm() / (na * nb)).abs()
}

/// Canonical representative of a projective vector: unit norm, then rotate
/// so the first coordinate with modulus above 30% of the max is positive
/// real.  Deterministic and stable against small perturbations.
pub fn canonicalize_projective(v: &CVec) -> CVec {
    let n = vec_norm(v);
    if n == 0.0 {
        return v.clone();
    }
    let u = v.mapv(|z| z / n);
    let maxmod = u.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    let idx = u
        .iter()
        .position(|z| z.norm() > 0.3 * maxmod)
        .unwrap_or(0);
    let phase = u[idx] / u[idx].norm();
    u.mapv(|z| z / phase)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn nullspace_of_rank_one() {
        let m = array![
            [ONE, ONE, ONE],
            [ONE * 2.0, ONE * 2.0, ONE * 2.0],
        ];
        let ns = nullspace(&m, 1e-10).unwrap();
        assert_eq!(ns.ncols(), 2);
        let prod = m.dot(&ns);
        assert!(frob(&prod) < 1e-10);
    }

    #[test]
    fn rref_identifies_pivots() {
        let m = array![
            [ONE, ZERO, ONE],
            [ZERO, ZERO, ONE],
        ];
        let r = rref(&m, 1e-12);
        assert_eq!(r.pivots, vec![0, 2]);
    }

    #[test]
    fn kron_vec_convention() {
        // vec(A X B) = (B^T (x) A) vec(X)
        let a = array![[ONE, I], [ZERO, ONE * 2.0]];
        let b = array![[ONE * 3.0, ZERO], [ONE, ONE]];
        let x = array![[ONE, ONE * 5.0], [I, ZERO]];
        let lhs = vec_col(&a.dot(&x).dot(&b));
        let rhs = kron(&b.t().to_owned(), &a).dot(&vec_col(&x));
        let diff: f64 = lhs
            .iter()
            .zip(rhs.iter())
            .map(|(p, q)| (p - q).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(diff < 1e-12);
    }

    #[test]
    fn canonical_projective_is_idempotent() {
        let v: CVec = array![C64::new(0.3, -0.4), C64::new(-1.2, 0.7), ZERO, ONE];
        let c1 = canonicalize_projective(&v);
        let c2 = canonicalize_projective(&c1);
        let d: f64 = c1
            .iter()
            .zip(c2.iter())
            .map(|(p, q)| (p - q).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(d < 1e-12);
    }
}
