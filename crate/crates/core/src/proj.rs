//! The quartic embedding `E -> P^3`, linear forms, secant lines, and the
//! pencil of quadrics through the curve.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::curve::{random_exact_point, CurvePoint};
use crate::error::Error;
use crate::linalg::{self, C64, CMat, CVec, ONE, ZERO};
use crate::session::Session;
use crate::Result;

/// A point of `P^3` in canonical normalization: unit max-modulus, first
/// significant coordinate positive real.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjPoint {
    pub coords: [C64; 4],
}

impl ProjPoint {
    pub fn new(raw: [C64; 4]) -> Result<Self> {
        let maxmod = raw.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
        if maxmod == 0.0 {
            return Err(Error::DegenerateInput("zero vector in P^3".into()));
        }
        let mut c = raw.map(|z| z / maxmod);
        let idx = c
            .iter()
            .position(|z| z.norm() > 0.3)
            .expect("max-modulus normalization leaves a large coordinate");
        let phase = c[idx] / c[idx].norm();
        for z in c.iter_mut() {
            *z /= phase;
        }
        Ok(ProjPoint { coords: c })
    }

    pub fn distance(&self, other: &ProjPoint) -> f64 {
        // canonical forms are unique, so coordinatewise distance works
        self.coords
            .iter()
            .zip(other.coords.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// The coordinate point `e_i` (zero locus of the other three
    /// coordinates).
    pub fn coordinate_point(i: usize) -> Self {
        let mut c = [ZERO; 4];
        c[i] = ONE;
        ProjPoint { coords: c }
    }
}

/// An element of `A_1`, i.e. a linear form on `P^3`, stored as the four
/// coefficients on `x_0..x_3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearForm {
    pub mu: [C64; 4],
}

impl LinearForm {
    pub fn coordinate(i: usize) -> Self {
        let mut mu = [ZERO; 4];
        mu[i] = ONE;
        LinearForm { mu }
    }

    /// Pairing with a projective point.
    pub fn pair(&self, p: &ProjPoint) -> C64 {
        (0..4).map(|i| self.mu[i] * p.coords[i]).sum()
    }

    pub fn norm(&self) -> f64 {
        self.mu.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// A secant line of `E` presented by its two curve points and a basis of the
/// 2-dimensional space of linear forms vanishing on it.
#[derive(Debug, Clone)]
pub struct SecantLine {
    pub p: CurvePoint,
    pub q: CurvePoint,
    pub perp: [LinearForm; 2],
}

/// A quadric surface as a symmetric Gram matrix.
#[derive(Debug, Clone)]
pub struct Quadric {
    pub gram: CMat,
}

impl Quadric {
    pub fn evaluate(&self, p: &ProjPoint) -> C64 {
        let v = Array1::from_iter(p.coords);
        v.dot(&self.gram.dot(&v))
    }

    pub fn evaluate_pair(&self, a: &ProjPoint, b: &ProjPoint) -> C64 {
        let va = Array1::from_iter(a.coords);
        let vb = Array1::from_iter(b.coords);
        va.dot(&self.gram.dot(&vb))
    }

    /// Canonical projective 16-vector for comparisons.
    pub fn canonical_vec(&self) -> CVec {
        linalg::canonicalize_projective(&Array1::from_iter(self.gram.iter().cloned()))
    }

    pub fn rank(&self, tol: f64) -> Result<usize> {
        linalg::rank(&self.gram, tol)
    }
}

/// Evaluate the quartic embedding at a curve point.
pub fn embed(session: &Session, p: &CurvePoint) -> Result<ProjPoint> {
    ProjPoint::new(session.g_all(p.approx))
}

/// Embedding of the quotient curve `E'`.
pub fn embed_prime(session: &Session, p: &CurvePoint) -> Result<ProjPoint> {
    ProjPoint::new(session.g_prime_all(p))
}

/// Evaluate a linear form on the curve: `sum_ab mu_ab g_ab(z)`.
pub fn eval_form(session: &Session, x: &LinearForm, z: &CurvePoint) -> C64 {
    let g = session.g_all(z.approx);
    (0..4).map(|i| x.mu[i] * g[i]).sum()
}

/// Evaluate a form at an arbitrary complex lift (module internals keep fixed
/// lifts, so they bypass fundamental-domain reduction).
pub fn eval_form_lift(session: &Session, x: &LinearForm, z: C64) -> C64 {
    let g = session.g_all(z);
    (0..4).map(|i| x.mu[i] * g[i]).sum()
}

fn forms_from_nullspace(ns: &CMat) -> Result<[LinearForm; 2]> {
    if ns.ncols() != 2 {
        return Err(Error::DegenerateInput(format!(
            "perp space has dimension {} (expected 2)",
            ns.ncols()
        )));
    }
    let mut out = [LinearForm { mu: [ZERO; 4] }; 2];
    for (c, form) in out.iter_mut().enumerate() {
        let col: CVec = ns.column(c).to_owned();
        let canon = linalg::canonicalize_projective(&col);
        for i in 0..4 {
            form.mu[i] = canon[i];
        }
    }
    Ok(out)
}

/// The secant line through `p` and `q`.  When the two points coincide the
/// tangent line is used, with the derivative of the embedding supplying the
/// second point condition.
pub fn secant_perp(session: &Session, p: &CurvePoint, q: &CurvePoint) -> Result<SecantLine> {
    let gp = session.g_all(p.approx);
    let tangent = session.curve.points_equal(p, q, 1e-12);
    let second: [C64; 4] = if tangent {
        std::array::from_fn(|a| session.g_coord_deriv(a, p.approx))
    } else {
        session.g_all(q.approx)
    };
    let mut m = Array2::zeros((2, 4));
    for i in 0..4 {
        m[[0, i]] = gp[i];
        m[[1, i]] = second[i];
    }
    if !tangent && linalg::rank(&m, session.tol_rank)? < 2 {
        return Err(Error::DegenerateInput(
            "embedded points coincide; not a secant".into(),
        ));
    }
    let ns = linalg::nullspace(&m, session.tol_rank)?;
    Ok(SecantLine {
        p: *p,
        q: *q,
        perp: forms_from_nullspace(&ns)?,
    })
}

/// Degree-2 monomial vector of a projective point, index order
/// `(0,0),(0,1),(0,2),(0,3),(1,1),(1,2),(1,3),(2,2),(2,3),(3,3)`.
fn monomials2(p: &ProjPoint) -> [C64; 10] {
    let c = &p.coords;
    [
        c[0] * c[0],
        c[0] * c[1],
        c[0] * c[2],
        c[0] * c[3],
        c[1] * c[1],
        c[1] * c[2],
        c[1] * c[3],
        c[2] * c[2],
        c[2] * c[3],
        c[3] * c[3],
    ]
}

fn gram_from_coeffs(v: &CVec) -> CMat {
    let pairs = [
        (0, 0),
        (0, 1),
        (0, 2),
        (0, 3),
        (1, 1),
        (1, 2),
        (1, 3),
        (2, 2),
        (2, 3),
        (3, 3),
    ];
    let mut g = Array2::zeros((4, 4));
    for (k, &(i, j)) in pairs.iter().enumerate() {
        if i == j {
            g[[i, j]] = v[k];
        } else {
            let half = v[k] * 0.5;
            g[[i, j]] = half;
            g[[j, i]] = half;
        }
    }
    g
}

/// The pencil of quadrics containing `E`, computed as the null space of the
/// degree-2 evaluation matrix on sample points.  Exactly 2-dimensional; any
/// other dimension is a calibration failure.
pub fn quadric_pencil(session: &Session) -> Result<[Quadric; 2]> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x51AB);
    let n_samples = 30;
    let mut m = Array2::zeros((n_samples, 10));
    for r in 0..n_samples {
        let p = random_exact_point(&session.curve, 127, &mut rng);
        let e = embed(session, &p)?;
        let mono = monomials2(&e);
        for c in 0..10 {
            m[[r, c]] = mono[c];
        }
    }
    let ns = linalg::nullspace(&m, session.tol_rank)?;
    if ns.ncols() != 2 {
        return Err(Error::Calibration(format!(
            "quadric pencil dimension {} (expected 2); embedding constants wrong",
            ns.ncols()
        )));
    }
    Ok([
        Quadric {
            gram: gram_from_coeffs(&ns.column(0).to_owned()),
        },
        Quadric {
            gram: gram_from_coeffs(&ns.column(1).to_owned()),
        },
    ])
}

/// The pencil member containing the family of secant lines `L(z)`.
/// Determined from the lines `l_{p, z-p}` for two independent `p`; both
/// fits must agree.
pub fn quadric_at(session: &Session, z: &CurvePoint) -> Result<Quadric> {
    let [q1, q2] = quadric_pencil(session)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xC0FFEE);
    let mut member: Option<(C64, C64)> = None;
    for _ in 0..2 {
        let p = random_exact_point(&session.curve, 131, &mut rng);
        let other = session.curve.sub(z, &p);
        let ea = embed(session, &p)?;
        let eb = embed(session, &other)?;
        // both endpoints lie on every pencil member; the line lies on
        // alpha q1 + beta q2 iff the cross term vanishes
        let c1 = q1.evaluate_pair(&ea, &eb);
        let c2 = q2.evaluate_pair(&ea, &eb);
        let (alpha, beta) = (c2, -c1);
        match member {
            None => member = Some((alpha, beta)),
            Some((a0, b0)) => {
                let cross = (a0 * beta - b0 * alpha).norm();
                let scale = (a0.norm() + b0.norm()) * (alpha.norm() + beta.norm());
                if cross > session.tol_res.max(1e-9) * scale.max(1e-300) {
                    return Err(Error::Tolerance(format!(
                        "inconsistent pencil fits for Q(z): cross {cross:.3e}"
                    )));
                }
            }
        }
    }
    let (alpha, beta) = member.expect("two fits ran");
    Ok(Quadric {
        gram: q1.gram.mapv(|x| x * alpha) + q2.gram.mapv(|x| x * beta),
    })
}

/// The four singular members of the pencil, as `(parameter t, quadric)` for
/// members `q1 + t q2` (all roots are finite for a generic basis order; a
/// root at infinity is reported as an error).
pub fn singular_pencil_members(session: &Session) -> Result<Vec<Quadric>> {
    let [q1, q2] = quadric_pencil(session)?;
    // det(q1 + t q2) is quartic in t: interpolate on 5 nodes
    let nodes = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let mut vals = Vec::new();
    for &t in &nodes {
        let g = &q1.gram + &q2.gram.mapv(|x| x * C64::new(t, 0.0));
        vals.push(det4(&g));
    }
    // Vandermonde solve for coefficients a0..a4
    let mut v = Array2::zeros((5, 5));
    for (r, &t) in nodes.iter().enumerate() {
        let mut pw = ONE;
        for c in 0..5 {
            v[[r, c]] = pw;
            pw *= C64::new(t, 0.0);
        }
    }
    use ndarray_linalg::Solve;
    let rhs = Array1::from_vec(vals);
    let coeffs = v.solve(&rhs).map_err(|e| Error::Linalg(e.to_string()))?;
    let lead = coeffs[4];
    if lead.norm() < 1e-10 * coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max) {
        return Err(Error::DegenerateInput(
            "pencil determinant degenerate in this basis order".into(),
        ));
    }
    // companion matrix roots
    let mut comp = Array2::zeros((4, 4));
    for i in 1..4 {
        comp[[i, i - 1]] = ONE;
    }
    for i in 0..4 {
        comp[[i, 3]] = -coeffs[i] / lead;
    }
    let (roots, _) = linalg::eig(&comp)?;
    let mut out = Vec::new();
    for &t in roots.iter() {
        out.push(Quadric {
            gram: &q1.gram + &q2.gram.mapv(|x| x * t),
        });
    }
    Ok(out)
}

fn det4(m: &CMat) -> C64 {
    // direct cofactor expansion; 4x4 only
    let a = |i: usize, j: usize| m[[i, j]];
    let det3 = |r: [usize; 3], c: [usize; 3]| -> C64 {
        a(r[0], c[0]) * (a(r[1], c[1]) * a(r[2], c[2]) - a(r[1], c[2]) * a(r[2], c[1]))
            - a(r[0], c[1]) * (a(r[1], c[0]) * a(r[2], c[2]) - a(r[1], c[2]) * a(r[2], c[0]))
            + a(r[0], c[2]) * (a(r[1], c[0]) * a(r[2], c[1]) - a(r[1], c[1]) * a(r[2], c[0]))
    };
    let rows = [1, 2, 3];
    let cols = [
        [1usize, 2, 3],
        [0usize, 2, 3],
        [0usize, 1, 3],
        [0usize, 1, 2],
    ];
    let mut det = ZERO;
    let mut sign = ONE;
    for j in 0..4 {
        det += sign * a(0, j) * det3(rows, cols[j]);
        sign = -sign;
    }
    det
}

/// Intersection point of two distinct lines, or `None` if they are skew.
pub fn line_intersection(
    session: &Session,
    l1: &SecantLine,
    l2: &SecantLine,
) -> Result<Option<ProjPoint>> {
    let mut m = Array2::zeros((4, 4));
    for (r, f) in l1.perp.iter().chain(l2.perp.iter()).enumerate() {
        for c in 0..4 {
            m[[r, c]] = f.mu[c];
        }
    }
    let ns = linalg::nullspace(&m, session.tol_rank)?;
    match ns.ncols() {
        0 => Ok(None),
        1 => {
            let col = ns.column(0);
            Ok(Some(ProjPoint::new([col[0], col[1], col[2], col[3]])?))
        }
        _ => Err(Error::DegenerateInput(
            "lines coincide (rank 2 system)".into(),
        )),
    }
}

/// Secant line of the quotient curve `E'` through two of its points.
pub fn secant_perp_prime(session: &Session, p: &CurvePoint, q: &CurvePoint) -> Result<SecantLine> {
    let gp = session.g_prime_all(p);
    let gq = session.g_prime_all(q);
    let mut m = Array2::zeros((2, 4));
    for i in 0..4 {
        m[[0, i]] = gp[i];
        m[[1, i]] = gq[i];
    }
    if linalg::rank(&m, session.tol_rank)? < 2 {
        return Err(Error::DegenerateInput(
            "coincident points on E'; not a secant".into(),
        ));
    }
    let ns = linalg::nullspace(&m, session.tol_rank)?;
    Ok(SecantLine {
        p: *p,
        q: *q,
        perp: forms_from_nullspace(&ns)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::Rat;
    use crate::session::preset;
    use rand::Rng;

    #[test]
    fn embed_zero_has_vanishing_first_coordinate() {
        let s = preset("n3").unwrap();
        let raw = s.g_all(s.curve.zero().approx);
        let maxmod = raw.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
        assert!(raw[0].norm() < 1e-10 * maxmod);
    }

    #[test]
    fn coplanar_iff_zero_sum() {
        let s = preset("n3").unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let p1 = random_exact_point(&s.curve, 101, &mut rng);
            let p2 = random_exact_point(&s.curve, 101, &mut rng);
            let p3 = random_exact_point(&s.curve, 101, &mut rng);
            let p4 = s.curve.neg(&s.curve.add(&p1, &s.curve.add(&p2, &p3)));
            let mut m = Array2::zeros((4, 4));
            for (r, pt) in [p1, p2, p3, p4].iter().enumerate() {
                let g = s.g_all(pt.approx);
                for c in 0..4 {
                    m[[r, c]] = g[c];
                }
            }
            assert_eq!(linalg::rank(&m, 1e-8).unwrap(), 3);
            // break the sum
            let p4b = s.curve.add(&p4, &s.curve.exact_point(Rat::new(1, 23), Rat::new(1, 31)));
            let g = s.g_all(p4b.approx);
            for c in 0..4 {
                m[[3, c]] = g[c];
            }
            assert_eq!(linalg::rank(&m, 1e-8).unwrap(), 4);
        }
    }

    #[test]
    fn embedding_injective_spot_check() {
        let s = preset("n3").unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<_> = (0..30)
            .map(|_| {
                let z = C64::new(rng.random::<f64>(), rng.random::<f64>());
                s.curve.reduce(z * 0.93 + C64::new(0.01, 0.01))
            })
            .collect();
        let embs: Vec<_> = pts.iter().map(|p| embed(&s, p).unwrap()).collect();
        for i in 0..embs.len() {
            for j in (i + 1)..embs.len() {
                if s.curve.torus_distance(&pts[i], &pts[j]) > 1e-3 {
                    assert!(embs[i].distance(&embs[j]) > 1e-6);
                }
            }
        }
    }

    #[test]
    fn secant_perp_vanishes_at_both_points() {
        let s = preset("n3").unwrap();
        let p = s.curve.exact_point(Rat::new(3, 101), Rat::new(5, 101));
        let q = s.curve.exact_point(Rat::new(7, 103), Rat::new(2, 103));
        let l = secant_perp(&s, &p, &q).unwrap();
        for f in &l.perp {
            let scale = f.norm();
            assert!(eval_form(&s, f, &p).norm() < 1e-9 * scale);
            assert!(eval_form(&s, f, &q).norm() < 1e-9 * scale);
        }
    }

    #[test]
    fn tangent_secant_uses_derivative() {
        let s = preset("n3").unwrap();
        let p = s.curve.exact_point(Rat::new(3, 101), Rat::new(5, 101));
        let l = secant_perp(&s, &p, &p).unwrap();
        // forms vanish at p and to first order: f(p + h) = O(h^2)
        let h = 1e-5;
        for f in &l.perp {
            let v0 = eval_form_lift(&s, f, p.approx + C64::new(h, 0.0)).norm();
            assert!(
                v0 < 1e-7 * f.norm(),
                "tangent form grows linearly: {v0:.3e}"
            );
        }
    }

    #[test]
    fn pencil_and_singular_members() {
        let s = preset("n3").unwrap();
        let [q1, q2] = quadric_pencil(&s).unwrap();
        // fresh sample containment
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10 {
            let p = random_exact_point(&s.curve, 137, &mut rng);
            let e = embed(&s, &p).unwrap();
            for q in [&q1, &q2] {
                let scale = linalg::frob(&q.gram);
                assert!(q.evaluate(&e).norm() < 1e-8 * scale);
            }
        }
        let sing = singular_pencil_members(&s).unwrap();
        assert_eq!(sing.len(), 4);
        let mut vertices = Vec::new();
        for q in &sing {
            assert_eq!(q.rank(1e-6).unwrap(), 3);
            let ns = linalg::nullspace(&q.gram, 1e-6).unwrap();
            let v = ProjPoint::new([ns[[0, 0]], ns[[1, 0]], ns[[2, 0]], ns[[3, 0]]]).unwrap();
            // vertex is a coordinate point
            let best = (0..4)
                .map(|i| v.distance(&ProjPoint::coordinate_point(i)))
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-8, "vertex distance to coordinate points {best:.3e}");
            vertices.push(v);
        }
        // the four vertices are the four distinct coordinate points
        for i in 0..4 {
            for j in (i + 1)..4 {
                assert!(vertices[i].distance(&vertices[j]) > 0.5);
            }
        }
    }

    #[test]
    fn quadric_at_symmetry_and_rank() {
        let s = preset("n3").unwrap();
        let z = s.curve.exact_point(Rat::new(5, 19), Rat::new(2, 19));
        let qz = quadric_at(&s, &z).unwrap();
        let qm = quadric_at(&s, &s.curve.neg(&z)).unwrap();
        let d = linalg::proj_distance(&qz.canonical_vec(), &qm.canonical_vec());
        assert!(d < 1e-8, "Q(z) != Q(-z): {d:.3e}");
        assert_eq!(qz.rank(1e-6).unwrap(), 4);
        // singular member at 2-torsion
        let w = s.curve.exact_point(Rat::new(1, 2), Rat::zero());
        let qw = quadric_at(&s, &w).unwrap();
        assert_eq!(qw.rank(1e-6).unwrap(), 3);
        let ns = linalg::nullspace(&qw.gram, 1e-6).unwrap();
        let v = ProjPoint::new([ns[[0, 0]], ns[[1, 0]], ns[[2, 0]], ns[[3, 0]]]).unwrap();
        let best = (0..4)
            .map(|i| v.distance(&ProjPoint::coordinate_point(i)))
            .fold(f64::INFINITY, f64::min);
        assert!(best < 1e-8);
    }

    #[test]
    fn lines_in_opposite_rulings_meet() {
        let s = preset("n3").unwrap();
        let z = s.curve.exact_point(Rat::new(5, 19), Rat::new(2, 19));
        let p1 = s.curve.exact_point(Rat::new(3, 101), Rat::new(5, 101));
        let l1 = secant_perp(&s, &p1, &s.curve.sub(&z, &p1)).unwrap();
        let mz = s.curve.neg(&z);
        let p2 = s.curve.exact_point(Rat::new(9, 103), Rat::new(4, 103));
        let l2 = secant_perp(&s, &p2, &s.curve.sub(&mz, &p2)).unwrap();
        let y = line_intersection(&s, &l1, &l2).unwrap();
        let y = y.expect("lines in L(z) and L(-z) meet");
        // the intersection lies on Q(z)
        let qz = quadric_at(&s, &z).unwrap();
        assert!(qz.evaluate(&y).norm() < 1e-7 * linalg::frob(&qz.gram));
        // two generic lines in the same ruling are skew
        let p3 = s.curve.exact_point(Rat::new(11, 107), Rat::new(6, 107));
        let l3 = secant_perp(&s, &p3, &s.curve.sub(&z, &p3)).unwrap();
        assert!(line_intersection(&s, &l1, &l3).unwrap().is_none());
        // same line twice is degenerate
        assert!(line_intersection(&s, &l1, &l1).is_err());
    }
}
