//! Graded components of the algebra, built degree by degree from the six
//! defining relations, the degree-2 center, the `Omega(z)` labelling of the
//! central pencil, and the factored central product avoiding the
//! non-Azumaya locus.

use ndarray::{Array1, Array2};
use rand::SeedableRng;

use crate::curve::{CurvePoint, Rat};
use crate::error::Error;
use crate::linalg::{self, C64, CMat, CVec};
use crate::session::{line_action_matrices, relation_terms, Session};
use crate::theta::StructureConstants;
use crate::Result;

/// The six defining relations as vectors in the 16-dimensional free
/// degree-2 component, monomial order `x_a x_b -> index 4a + b`.
#[derive(Debug, Clone)]
pub struct RelationSet {
    pub rels: [CVec; 6],
}

/// Build the relation set from structure constants.  Each relation has the
/// commutator/anticommutator shape `[x0, x_alpha] - i K {x_beta, x_gamma}`
/// and `[x_alpha, x_beta] - i {x0, x_gamma}`.
pub fn build_relations(j: &StructureConstants) -> RelationSet {
    let k = crate::session::RelationConstants::from_structure(j);
    let terms = relation_terms(&k);
    let mut rels: [CVec; 6] = std::array::from_fn(|_| Array1::zeros(16));
    for (i, r) in terms.iter().enumerate() {
        for &((a, b), co) in r {
            rels[i][4 * a + b] += co;
        }
    }
    RelationSet { rels }
}

impl RelationSet {
    /// Rank of the span inside the free component.
    pub fn span_dim(&self, tol: f64) -> Result<usize> {
        let mut m = Array2::zeros((6, 16));
        for (r, rel) in self.rels.iter().enumerate() {
            for c in 0..16 {
                m[[r, c]] = rel[c];
            }
        }
        linalg::rank(&m, tol)
    }

    /// Number of monomials carrying a nonzero coefficient in relation `i`.
    pub fn support(&self, i: usize) -> usize {
        self.rels[i].iter().filter(|z| z.norm() > 1e-14).count()
    }
}

/// One graded piece `A_d` together with the multiplication maps into
/// `A_{d+1}`.
#[derive(Debug, Clone)]
pub struct AlgebraComponent {
    pub degree: usize,
    pub dim: usize,
    /// Canonical word representative of each basis element (generator
    /// indices, leftmost factor first).
    pub words: Vec<Vec<usize>>,
    /// `left_mult[a]: A_d -> A_{d+1}`; present once the next component is
    /// built.
    pub left_mult: Option<[CMat; 4]>,
    /// Smallest discarded singular value at the rank decision (diagnostic).
    pub rank_gap: f64,
}

/// The algebra built up to a maximum degree.
#[derive(Debug, Clone)]
pub struct Algebra {
    pub comps: Vec<AlgebraComponent>,
    pub relations: RelationSet,
}

fn expected_dim(d: usize) -> usize {
    (d + 1) * (d + 2) * (d + 3) / 6
}

impl Algebra {
    /// Build components `A_0 .. A_dmax` by the ideal recursion
    /// `I_{d+1} = V*I_d + R*V^(d-1)` realised as a quotient of `V (x) A_d`
    /// by the image of `R (x) A_{d-1}`.  Dimension mismatches abort with a
    /// diagnostic; proceeding on a non-flat fiber would poison every
    /// downstream result.
    pub fn build(session: &Session, dmax: usize) -> Result<Algebra> {
        let relations = build_relations(&session.j);
        let rel_terms = relation_terms(&session.rel_k);
        let mut comps = vec![
            AlgebraComponent {
                degree: 0,
                dim: 1,
                words: vec![vec![]],
                left_mult: None,
                rank_gap: 0.0,
            },
            AlgebraComponent {
                degree: 1,
                dim: 4,
                words: (0..4).map(|a| vec![a]).collect(),
                left_mult: None,
                rank_gap: 0.0,
            },
        ];
        // A_0 -> A_1 multiplication
        let mut m0: [CMat; 4] = std::array::from_fn(|_| Array2::zeros((4, 1)));
        for (a, m) in m0.iter_mut().enumerate() {
            m[[a, 0]] = linalg::ONE;
        }
        comps[0].left_mult = Some(m0);

        for d in 1..dmax.max(1) {
            let dim_d = comps[d].dim;
            let dim_dm1 = comps[d - 1].dim;
            let prev_mult = comps[d - 1]
                .left_mult
                .clone()
                .expect("multiplication built in previous step");
            // spanning set of the degree-(d+1) relation image inside V (x) A_d
            let mut span = Array2::zeros((6 * dim_dm1, 4 * dim_d));
            for (ri, r) in rel_terms.iter().enumerate() {
                for w in 0..dim_dm1 {
                    let row = ri * dim_dm1 + w;
                    for &((a, b), co) in r {
                        for idx in 0..dim_d {
                            let v = prev_mult[b][[idx, w]];
                            if v != linalg::ZERO {
                                span[[row, a * dim_d + idx]] += co * v;
                            }
                        }
                    }
                }
            }
            let rref = linalg::rref(&span, session.tol_rank);
            let pivots = &rref.pivots;
            let nonpiv: Vec<usize> =
                (0..4 * dim_d).filter(|c| !pivots.contains(c)).collect();
            let dim_next = nonpiv.len();
            if dim_next != expected_dim(d + 1) {
                let sv = linalg::singular_values(&span)?;
                let smax = sv.first().copied().unwrap_or(0.0);
                let gap = sv
                    .iter()
                    .filter(|&&x| x <= session.tol_rank * smax)
                    .fold(0.0_f64, |acc, &x| acc.max(x));
                return Err(Error::Inconsistency(format!(
                    "dim A_{} = {} (expected {}); smallest discarded singular value {:.3e}",
                    d + 1,
                    dim_next,
                    expected_dim(d + 1),
                    gap
                )));
            }
            // quotient map V (x) A_d -> A_{d+1}
            let mut qmap = Array2::zeros((dim_next, 4 * dim_d));
            for (k, &c) in nonpiv.iter().enumerate() {
                qmap[[k, c]] = linalg::ONE;
            }
            for (r, &c) in pivots.iter().enumerate() {
                for (k, &npc) in nonpiv.iter().enumerate() {
                    qmap[[k, c]] = -rref.reduced[[r, npc]];
                }
            }
            let mut mults: [CMat; 4] = std::array::from_fn(|_| Array2::zeros((dim_next, dim_d)));
            for a in 0..4 {
                for k in 0..dim_next {
                    for idx in 0..dim_d {
                        mults[a][[k, idx]] = qmap[[k, a * dim_d + idx]];
                    }
                }
            }
            let words: Vec<Vec<usize>> = nonpiv
                .iter()
                .map(|&c| {
                    let a = c / dim_d;
                    let idx = c % dim_d;
                    let mut w = vec![a];
                    w.extend_from_slice(&comps[d].words[idx]);
                    w
                })
                .collect();
            let sv = linalg::singular_values(&span)?;
            let smax = sv.first().copied().unwrap_or(0.0);
            let gap = sv
                .iter()
                .filter(|&&x| x <= session.tol_rank * smax)
                .fold(0.0_f64, |acc, &x| acc.max(x));
            comps[d].left_mult = Some(mults);
            comps.push(AlgebraComponent {
                degree: d + 1,
                dim: dim_next,
                words,
                left_mult: None,
                rank_gap: gap,
            });
        }
        if dmax >= 2 && comps[2].dim != 10 {
            return Err(Error::Calibration(format!(
                "dim A_2 = {} (expected 10)",
                comps[2].dim
            )));
        }
        Ok(Algebra { comps, relations })
    }

    pub fn dim(&self, d: usize) -> usize {
        self.comps[d].dim
    }

    /// Image of a free word in the component of its length.
    pub fn word_image(&self, word: &[usize]) -> CVec {
        let mut v: CVec = Array1::from_elem(1, linalg::ONE);
        for (step, &a) in word.iter().rev().enumerate() {
            let mult = self.comps[step]
                .left_mult
                .as_ref()
                .expect("component multiplication available");
            v = mult[a].dot(&v);
        }
        v
    }

    /// Left multiplication `x_a : A_d -> A_{d+1}`.
    pub fn mult(&self, d: usize, a: usize) -> &CMat {
        &self.comps[d].left_mult.as_ref().expect("built")[a]
    }
}

/// A degree-2 central element, stored in the `A_2` basis of the session's
/// algebra, optionally labelled by a curve point `z` (`Omega(z)`).
#[derive(Debug, Clone)]
pub struct CentralElement {
    pub coeffs: CVec,
    pub label: Option<CurvePoint>,
}

impl CentralElement {
    /// Action on a graded module: the operator `M_d -> M_{d+2}` induced by
    /// the element, given per-degree generator actions.
    pub fn action(&self, algebra: &Algebra, acts: &[[CMat; 4]], d: usize) -> CMat {
        let words = &algebra.comps[2].words;
        let rows = acts[d + 1][0].nrows();
        let cols = acts[d][0].ncols();
        let mut op: CMat = Array2::zeros((rows, cols));
        for (k, w) in words.iter().enumerate() {
            let co = self.coeffs[k];
            if co.norm() == 0.0 {
                continue;
            }
            let m = acts[d + 1][w[0]].dot(&acts[d][w[1]]);
            op = op + m.mapv(|x| x * co);
        }
        op
    }
}

/// Basis of the 2-dimensional degree-2 center: null space of the stacked
/// commutator map `A_2 -> (A_3)^4`.
pub fn center_degree2(session: &Session, algebra: &Algebra) -> Result<[CentralElement; 2]> {
    let dim2 = algebra.dim(2);
    let dim3 = algebra.dim(3);
    let words2 = &algebra.comps[2].words;
    let mut m = Array2::zeros((4 * dim3, dim2));
    for (k, w) in words2.iter().enumerate() {
        for a in 0..4 {
            let left = algebra.word_image(&[a, w[0], w[1]]);
            let right = algebra.word_image(&[w[0], w[1], a]);
            for i in 0..dim3 {
                m[[a * dim3 + i, k]] = left[i] - right[i];
            }
        }
    }
    let ns = linalg::nullspace(&m, session.tol_rank)?;
    if ns.ncols() != 2 {
        return Err(Error::Calibration(format!(
            "degree-2 center has dimension {} (expected 2)",
            ns.ncols()
        )));
    }
    Ok([
        CentralElement {
            coeffs: linalg::canonicalize_projective(&ns.column(0).to_owned()),
            label: None,
        },
        CentralElement {
            coeffs: linalg::canonicalize_projective(&ns.column(1).to_owned()),
            label: None,
        },
    ])
}

/// The central element (up to scalar) annihilating the line modules of the
/// family `p + q = z`: the one-dimensional subspace of the degree-2 center
/// killing the generator of `M(p, q)`, computed by acting on degrees 0..2.
///
/// Satisfies `Omega(z) = Omega(-z - 2 tau)` as projective vectors.
pub fn omega_at(session: &Session, algebra: &Algebra, z: &CurvePoint) -> Result<CentralElement> {
    let center = center_degree2(session, algebra)?;
    omega_at_with_center(session, algebra, &center, z, 0)
}

/// As [`omega_at`] with a precomputed center basis and a probe index for
/// choosing the auxiliary secant line (distinct indices give independent
/// recomputations).
pub fn omega_at_with_center(
    session: &Session,
    algebra: &Algebra,
    center: &[CentralElement; 2],
    z: &CurvePoint,
    probe: u64,
) -> Result<CentralElement> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x03E0 ^ probe);
    let (p, q) = loop {
        let p = crate::curve::random_exact_point(&session.curve, 89, &mut rng);
        let q = session.curve.sub(z, &p);
        if !session.diff_in_two_tau_orbit(&p, &q) {
            break (p, q);
        }
    };
    let acts: Vec<[CMat; 4]> = (0..=2)
        .map(|d| line_action_matrices(session, p.approx, q.approx, d))
        .collect();
    // images of the two center basis elements on the generator e_00
    let mut m = Array2::zeros((3, 2));
    for (c, om) in center.iter().enumerate() {
        let img = om.action(algebra, &acts, 0);
        for r in 0..3 {
            m[[r, c]] = img[[r, 0]];
        }
    }
    let ns = linalg::nullspace(&m, session.tol_rank)?;
    if ns.ncols() != 1 {
        return Err(Error::Inconsistency(format!(
            "annihilating subspace of the center has dimension {} at z (expected 1)",
            ns.ncols()
        )));
    }
    let coeffs = center[0].coeffs.mapv(|x| x * ns[[0, 0]])
        + center[1].coeffs.mapv(|x| x * ns[[1, 0]]);
    Ok(CentralElement {
        coeffs: linalg::canonicalize_projective(&coeffs),
        label: Some(*z),
    })
}

/// The central product `c` kept in factored form: the list of labelled
/// factors `Omega(omega + k tau)` over all two-torsion points and
/// `0 <= k <= s - 1`.  Annihilation questions are answered factor by
/// factor; the expanded product is never formed.
pub struct CentralProduct {
    pub factors: Vec<CentralElement>,
}

pub fn azumaya_avoider(session: &Session, algebra: &Algebra) -> Result<CentralProduct> {
    let center = center_degree2(session, algebra)?;
    let mut factors = Vec::new();
    for (wi, w) in session.curve.two_torsion().iter().enumerate() {
        let mut z = *w;
        for k in 0..session.s {
            factors.push(omega_at_with_center(
                session,
                algebra,
                &center,
                &z,
                (wi as u64) << 8 | k as u64,
            )?);
            z = session.curve.add(&z, &session.tau);
        }
    }
    Ok(CentralProduct { factors })
}

/// Convenience: exact random point with denominator coprime to the torsion
/// data, retrying until `p - q` avoids the `2 Z tau` orbit for `q = z - p`.
pub fn generic_pair_summing_to(
    session: &Session,
    z: &CurvePoint,
    seed: u64,
) -> (CurvePoint, CurvePoint) {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    loop {
        let p = crate::curve::random_exact_point(&session.curve, 97, &mut rng);
        let q = session.curve.sub(z, &p);
        if !session.diff_in_two_tau_orbit(&p, &q) && !session.curve.points_equal(&p, &q, 1e-9) {
            return (p, q);
        }
    }
}

/// Exact random `z` avoiding `E[2] + Z tau` (a generic family label).
pub fn generic_family_label(session: &Session, seed: u64) -> CurvePoint {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    loop {
        let z = crate::curve::random_exact_point(&session.curve, 83, &mut rng);
        if !session.in_e2_plus_ztau(&z) {
            return z;
        }
    }
}

#[allow(unused)]
fn unused_rat() -> Rat {
    Rat::new(1, 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::preset;

    #[test]
    fn relations_span_and_support() {
        let s = preset("n3").unwrap();
        let r = build_relations(&s.j);
        assert_eq!(r.span_dim(1e-10).unwrap(), 6);
        for i in 0..6 {
            assert_eq!(r.support(i), 4);
        }
    }

    #[test]
    fn component_dimensions() {
        let s = preset("n3").unwrap();
        let alg = Algebra::build(&s, 4).unwrap();
        assert_eq!(alg.dim(0), 1);
        assert_eq!(alg.dim(1), 4);
        assert_eq!(alg.dim(2), 10);
        assert_eq!(alg.dim(3), 20);
        assert_eq!(alg.dim(4), 35);
    }

    #[test]
    fn associativity_spot_checks() {
        use rand::Rng;
        let s = preset("n3").unwrap();
        let alg = Algebra::build(&s, 5).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        // x_i (x_j v) vs (x_i x_j) v for v a random element of A_d
        for d in 1..=3 {
            let dim = alg.dim(d);
            let mut v: CVec = Array1::zeros(dim);
            for k in 0..dim {
                v[k] = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            }
            for i in 0..4 {
                for j in 0..4 {
                    let lhs = alg.mult(d + 1, i).dot(&alg.mult(d, j).dot(&v));
                    // express x_i x_j in the A_2 basis, then act word-wise
                    let w2 = alg.word_image(&[i, j]);
                    let mut rhs: CVec = Array1::zeros(alg.dim(d + 2));
                    for (k, w) in alg.comps[2].words.iter().enumerate() {
                        if w2[k].norm() == 0.0 {
                            continue;
                        }
                        let m = alg.mult(d + 1, w[0]).dot(alg.mult(d, w[1]));
                        rhs = rhs + m.dot(&v).mapv(|x| x * w2[k]);
                    }
                    let scale = linalg::vec_norm(&lhs).max(linalg::vec_norm(&rhs)).max(1e-300);
                    let diff = linalg::vec_norm(&(&lhs - &rhs)) / scale;
                    assert!(diff < 1e-9, "associativity residual {diff:.3e}");
                }
            }
        }
    }

    #[test]
    fn center_is_two_dimensional_and_commutes_deeper() {
        use rand::Rng;
        let s = preset("n3").unwrap();
        let alg = Algebra::build(&s, 4).unwrap();
        let center = center_degree2(&s, &alg).unwrap();
        // commutes with random degree-2 elements inside A_4
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for om in &center {
            // omega as an element of A_2 in word form (basis words)
            for _ in 0..5 {
                let mut u: CVec = Array1::zeros(alg.dim(2));
                for k in 0..alg.dim(2) {
                    u[k] = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                }
                // [omega, u] in A_4 via word expansion of both
                let mut acc: CVec = Array1::zeros(alg.dim(4));
                for (k1, w1) in alg.comps[2].words.iter().enumerate() {
                    for (k2, w2) in alg.comps[2].words.iter().enumerate() {
                        let co = om.coeffs[k1] * u[k2];
                        if co.norm() == 0.0 {
                            continue;
                        }
                        let fwd = alg.word_image(&[w1[0], w1[1], w2[0], w2[1]]);
                        let bwd = alg.word_image(&[w2[0], w2[1], w1[0], w1[1]]);
                        acc = acc + (fwd - bwd).mapv(|x| x * co);
                    }
                }
                let scale = linalg::vec_norm(&om.coeffs) * linalg::vec_norm(&u);
                assert!(linalg::vec_norm(&acc) < 1e-8 * scale.max(1.0));
            }
        }
    }

    #[test]
    fn omega_labelling_involution() {
        let s = preset("n3").unwrap();
        let alg = Algebra::build(&s, 3).unwrap();
        let z = s.curve.exact_point(Rat::new(5, 23), Rat::new(3, 23));
        let o1 = omega_at(&s, &alg, &z).unwrap();
        let partner = s
            .curve
            .sub(&s.curve.neg(&z), &s.curve.mul_int(2, &s.tau));
        let o2 = omega_at(&s, &alg, &partner).unwrap();
        let d = linalg::proj_distance(&o1.coeffs, &o2.coeffs);
        assert!(d < 1e-8, "Omega(z) vs Omega(-z-2tau): {d:.3e}");
    }

    #[test]
    fn omega_at_independent_of_probe_line() {
        let s = preset("n3").unwrap();
        let alg = Algebra::build(&s, 3).unwrap();
        let center = center_degree2(&s, &alg).unwrap();
        let z = s.curve.exact_point(Rat::new(4, 21), Rat::new(2, 21));
        let o1 = omega_at_with_center(&s, &alg, &center, &z, 1).unwrap();
        let o2 = omega_at_with_center(&s, &alg, &center, &z, 2).unwrap();
        assert!(linalg::proj_distance(&o1.coeffs, &o2.coeffs) < 1e-8);
    }

    #[test]
    fn azumaya_factor_count() {
        let s = preset("n3").unwrap();
        let alg = Algebra::build(&s, 3).unwrap();
        let c = azumaya_avoider(&s, &alg).unwrap();
        assert_eq!(c.factors.len(), 4 * s.s as usize);
    }
}
