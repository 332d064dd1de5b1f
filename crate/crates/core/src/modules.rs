//! Truncated graded modules: line and point modules, the multiplicity-`s`
//! quotients `C^lambda`, intermediate fat points, graded Hom spaces,
//! de-grading to finite-dimensional modules, commutants, and standard
//! polynomial identities.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use serde_json::json;

use crate::algebra::{Algebra, CentralElement};
use crate::curve::CurvePoint;
use crate::error::Error;
use crate::linalg::{self, C64, CMat, CVec};
use crate::proj::{secant_perp, SecantLine};
use crate::session::{line_action_matrices, relation_terms, Session};
use crate::Result;

/// Construction tag of a graded module.
#[derive(Debug, Clone)]
pub enum ModuleMeta {
    Line { p: CurvePoint, q: CurvePoint },
    Point { p: CurvePoint },
    VertexPoint { i: usize },
    CLambda { p: CurvePoint, q: CurvePoint, lambda: [C64; 2] },
    FatPoint { omega: CurvePoint, k: i64, p: CurvePoint, q: CurvePoint },
    Quotient,
}

/// A truncated graded left module: per-degree dimensions and the four
/// generator actions per degree (`acts[d][a]: M_d -> M_{d+1}`).
#[derive(Debug, Clone)]
pub struct GradedModuleRep {
    pub dims: Vec<usize>,
    pub acts: Vec<[CMat; 4]>,
    pub meta: ModuleMeta,
}

impl GradedModuleRep {
    pub fn max_degree(&self) -> usize {
        self.dims.len() - 1
    }

    /// Worst relative residual of the six relations over all checkable
    /// degrees.
    pub fn relation_residual(&self, session: &Session) -> f64 {
        let rels = relation_terms(&session.rel_k);
        let mut worst: f64 = 0.0;
        for d in 0..self.acts.len().saturating_sub(1) {
            if self.dims[d] == 0 {
                continue;
            }
            for r in &rels {
                let mut op: CMat = Array2::zeros((self.dims[d + 2], self.dims[d]));
                let mut scale = 0.0;
                for &((a, b), co) in r {
                    let m = self.acts[d + 1][a].dot(&self.acts[d][b]);
                    scale += co.norm() * linalg::frob(&m);
                    op = op + m.mapv(|x| x * co);
                }
                if scale > 0.0 {
                    worst = worst.max(linalg::frob(&op) / scale);
                }
            }
        }
        worst
    }

    /// Stabilized dimension (multiplicity) read off the top degrees.
    pub fn multiplicity(&self) -> usize {
        *self.dims.last().expect("nonempty")
    }

    /// JSON export: per-degree dims and row-major `[re, im]` action entries.
    pub fn to_json(&self) -> serde_json::Value {
        let acts: Vec<_> = self
            .acts
            .iter()
            .map(|mats| {
                let per_gen: Vec<_> = mats
                    .iter()
                    .map(|m| {
                        let entries: Vec<[f64; 2]> =
                            m.iter().map(|z| [z.re, z.im]).collect();
                        json!({"rows": m.nrows(), "cols": m.ncols(), "entries": entries})
                    })
                    .collect();
                per_gen
            })
            .collect();
        json!({
            "dims": self.dims,
            "actions": acts,
            "meta": format!("{:?}", self.meta),
        })
    }
}

/// The line module `M(p, q)` truncated at degree `dmax`.  Requires
/// `p - q` outside `2 Z tau + L` (exact test when available); the basis
/// formula does not exist on special lines.
pub fn line_module(
    session: &Session,
    p: &CurvePoint,
    q: &CurvePoint,
    dmax: usize,
) -> Result<GradedModuleRep> {
    if session.diff_in_two_tau_orbit(p, q) {
        return Err(Error::SpecialLine);
    }
    let acts: Vec<[CMat; 4]> = (0..dmax)
        .map(|d| line_action_matrices(session, p.approx, q.approx, d))
        .collect();
    let m = GradedModuleRep {
        dims: (0..=dmax).map(|d| d + 1).collect(),
        acts,
        meta: ModuleMeta::Line { p: *p, q: *q },
    };
    let res = m.relation_residual(session);
    if res > session.tol_res {
        return Err(Error::Calibration(format!(
            "line module relation residual {res:.3e}"
        )));
    }
    Ok(m)
}

/// Orthonormal bases, per degree, of the submodule generated by a vector in
/// a single degree.
pub fn submodule_span(
    session: &Session,
    module: &GradedModuleRep,
    gen_deg: usize,
    gen: &CVec,
) -> Result<Vec<CMat>> {
    let dmax = module.max_degree();
    let mut spans: Vec<CMat> = (0..=dmax)
        .map(|d| Array2::zeros((module.dims[d], 0)))
        .collect();
    let mut g = Array2::zeros((module.dims[gen_deg], 1));
    for i in 0..gen.len() {
        g[[i, 0]] = gen[i];
    }
    spans[gen_deg] = linalg::column_space(&g, session.tol_rank)?;
    for d in gen_deg..dmax {
        let cur = &spans[d];
        if cur.ncols() == 0 {
            continue;
        }
        let mut cols: Vec<CMat> = Vec::new();
        for a in 0..4 {
            cols.push(module.acts[d][a].dot(cur));
        }
        let stacked = ndarray::concatenate(
            ndarray::Axis(1),
            &cols.iter().map(|c| c.view()).collect::<Vec<_>>(),
        )
        .expect("same row counts");
        spans[d + 1] = linalg::column_space(&stacked, session.tol_rank)?;
    }
    Ok(spans)
}

/// Quotient of a module by the submodule generated by `gen` in degree
/// `gen_deg`.  Returns the quotient module and the per-degree projection
/// maps (quotient coordinates of ambient vectors).
pub fn quotient_by_generator(
    session: &Session,
    module: &GradedModuleRep,
    gen_deg: usize,
    gen: &CVec,
    meta: ModuleMeta,
) -> Result<(GradedModuleRep, Vec<CMat>)> {
    let spans = submodule_span(session, module, gen_deg, gen)?;
    let dmax = module.max_degree();
    let mut proj: Vec<CMat> = Vec::with_capacity(dmax + 1);
    for d in 0..=dmax {
        let comp = linalg::complement(&spans[d], session.tol_rank)?;
        proj.push(linalg::dagger(&comp));
    }
    let mut acts = Vec::with_capacity(dmax);
    for d in 0..dmax {
        let lift = linalg::dagger(&proj[d]); // isometric section of the quotient
        let mats: [CMat; 4] =
            std::array::from_fn(|a| proj[d + 1].dot(&module.acts[d][a]).dot(&lift));
        acts.push(mats);
    }
    let dims = proj.iter().map(|p| p.nrows()).collect();
    Ok((GradedModuleRep { dims, acts, meta }, proj))
}

/// Point module specification.
pub enum PointSpec {
    /// A point of the curve.
    Curve(CurvePoint),
    /// One of the four quadric vertices `e_i`.
    Vertex(usize),
}

/// The point module `M(p)` (as the quotient of a line module by the
/// submodule generated by `e_01`) or the vertex module `M(e_i)`.
pub fn point_module(session: &Session, spec: PointSpec, dmax: usize) -> Result<GradedModuleRep> {
    match spec {
        PointSpec::Vertex(i) => {
            if i > 3 {
                return Err(Error::Precondition("vertex index must be 0..=3".into()));
            }
            let acts: Vec<[CMat; 4]> = (0..dmax)
                .map(|_| {
                    std::array::from_fn(|a| {
                        let mut m: CMat = Array2::zeros((1, 1));
                        if a == i {
                            m[[0, 0]] = linalg::ONE;
                        }
                        m
                    })
                })
                .collect();
            Ok(GradedModuleRep {
                dims: vec![1; dmax + 1],
                acts,
                meta: ModuleMeta::VertexPoint { i },
            })
        }
        PointSpec::Curve(p) => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xB0B0);
            let q = loop {
                let q = crate::curve::random_exact_point(&session.curve, 79, &mut rng);
                if !session.diff_in_two_tau_orbit(&p, &q)
                    && !session.curve.points_equal(&p, &q, 1e-9)
                {
                    break q;
                }
            };
            let line = line_module(session, &p, &q, dmax + 1)?;
            // e_01 is the first basis vector of degree 1
            let mut gen: CVec = Array1::zeros(2);
            gen[0] = linalg::ONE;
            let (mut quo, _) =
                quotient_by_generator(session, &line, 1, &gen, ModuleMeta::Point { p })?;
            quo.dims.truncate(dmax + 1);
            quo.acts.truncate(dmax);
            if quo.dims.iter().any(|&d| d != 1) {
                return Err(Error::Inconsistency(format!(
                    "point module Hilbert data {:?}",
                    quo.dims
                )));
            }
            Ok(quo)
        }
    }
}

/// Source of a graded Hom computation: a cyclic module presented by its
/// degree-1 annihilator.
pub enum CyclicSource<'a> {
    Line(&'a SecantLine),
    Point(&'a CurvePoint),
    Vertex(usize),
}

/// A graded Hom space `Hom(M(source)(-m), N)` realised as the vectors of
/// `N_m` killed by the source's degree-1 annihilator.
pub struct HomSpace {
    pub shift: usize,
    pub basis: CMat,
}

impl HomSpace {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

/// Compute `{v in N_m : u.v = 0 for all u in the source annihilator}`.
pub fn hom_from_cyclic(
    session: &Session,
    src: CyclicSource,
    m: usize,
    target: &GradedModuleRep,
) -> Result<HomSpace> {
    if m + 2 > target.max_degree() {
        return Err(Error::Precondition(format!(
            "shift {m} leaves fewer than 2 degrees of slack in a module truncated at {}",
            target.max_degree()
        )));
    }
    let forms: Vec<[C64; 4]> = match src {
        CyclicSource::Line(l) => l.perp.iter().map(|f| f.mu).collect(),
        CyclicSource::Point(p) => {
            let g = session.g_all(p.approx);
            let mut row = Array2::zeros((1, 4));
            for i in 0..4 {
                row[[0, i]] = g[i];
            }
            let ns = linalg::nullspace(&row, session.tol_rank)?;
            (0..ns.ncols())
                .map(|c| std::array::from_fn(|i| ns[[i, c]]))
                .collect()
        }
        CyclicSource::Vertex(i) => (0..4)
            .filter(|&j| j != i)
            .map(|j| {
                let mut mu = [linalg::ZERO; 4];
                mu[j] = linalg::ONE;
                mu
            })
            .collect(),
    };
    let rows: usize = forms.len() * target.dims[m + 1];
    let mut cond: CMat = Array2::zeros((rows, target.dims[m]));
    for (fi, mu) in forms.iter().enumerate() {
        let mut op: CMat = Array2::zeros((target.dims[m + 1], target.dims[m]));
        for a in 0..4 {
            op = op + target.acts[m][a].mapv(|x| x * mu[a]);
        }
        for r in 0..target.dims[m + 1] {
            for c in 0..target.dims[m] {
                cond[[fi * target.dims[m + 1] + r, c]] = op[[r, c]];
            }
        }
    }
    let basis = linalg::nullspace(&cond, session.tol_rank)?;
    Ok(HomSpace { shift: m, basis })
}

/// Does the 1-critical module `c_mod` (of the given multiplicity) lie on the
/// secant line through `(p, q)`?  Operationalised as a nonzero Hom from the
/// `(e-1)`-twisted line at shift `e - 1`.
pub fn lies_on_line(
    session: &Session,
    c_mod: &GradedModuleRep,
    mult: usize,
    p: &CurvePoint,
    q: &CurvePoint,
) -> Result<bool> {
    let k = mult as i64 - 1;
    let tp = session.curve.add(p, &session.curve.mul_int(k, &session.tau));
    let tq = session.curve.sub(q, &session.curve.mul_int(k, &session.tau));
    let line = secant_perp(session, &tp, &tq)?;
    let hom = hom_from_cyclic(session, CyclicSource::Line(&line), mult - 1, c_mod)?;
    Ok(hom.dim() > 0)
}

/// The quotient `C^lambda = M(p,q) / A(lambda_0 e_{0s} + lambda_1 e_{s0})`.
pub fn clambda(
    session: &Session,
    p: &CurvePoint,
    q: &CurvePoint,
    lambda: [C64; 2],
    dmax: usize,
) -> Result<GradedModuleRep> {
    let s = session.s as usize;
    let line = line_module(session, p, q, dmax)?;
    let mut gen: CVec = Array1::zeros(s + 1);
    gen[0] = lambda[0];
    gen[s] = lambda[1];
    let (quo, _) = quotient_by_generator(
        session,
        &line,
        s,
        &gen,
        ModuleMeta::CLambda {
            p: *p,
            q: *q,
            lambda,
        },
    )?;
    for (d, &dim) in quo.dims.iter().enumerate() {
        let expect = (d + 1).min(s);
        if dim != expect {
            return Err(Error::Inconsistency(format!(
                "C^lambda Hilbert mismatch at degree {d}: {dim} vs {expect} (submodule is not a shifted line)"
            )));
        }
    }
    Ok(quo)
}

/// A non-critical parameter with its certificate: the quotient in which
/// `f_lambda` dies, and the norm of its image there (re-checkable).
pub struct LambdaCert {
    pub lambda: [C64; 2],
    pub kind: &'static str,
    /// Projection of degree `s` onto the quotient in which the image dies.
    pub proj_s: CMat,
    pub vanish_norm: f64,
}

impl LambdaCert {
    /// Recompute the image of `f_lambda` through the stored quotient map.
    pub fn recheck(&self, s: usize) -> f64 {
        let mut f: CVec = Array1::zeros(s + 1);
        f[0] = self.lambda[0];
        f[s] = self.lambda[1];
        linalg::vec_norm(&self.proj_s.dot(&f))
    }
}

/// The finitely many `lambda` for which `C^lambda` fails to be 1-critical:
/// `f_lambda` dies in a 1-critical quotient of `M(p,q)` — the two point
/// module quotients always, plus the intermediate fat point quotient when
/// `p + q = omega + k tau` exactly with `k <= s - 2`.
pub fn noncritical_lambdas(
    session: &Session,
    p: &CurvePoint,
    q: &CurvePoint,
) -> Result<Vec<LambdaCert>> {
    let s = session.s as usize;
    let dmax = s + 3;
    let line = line_module(session, p, q, dmax)?;
    let mut out: Vec<LambdaCert> = Vec::new();
    // point-module quotients: kill e_01 (-> M(p)) and e_10 (-> M(q))
    for (idx, kind) in [(0usize, "point-module M(p)"), (1usize, "point-module M(q)")] {
        let mut gen: CVec = Array1::zeros(2);
        gen[idx] = linalg::ONE;
        let (_, proj) = quotient_by_generator(session, &line, 1, &gen, ModuleMeta::Quotient)?;
        let proj_s = proj[s].clone();
        // images of e_{0s} and e_{s0}:
        let img0 = proj_s.column(0).to_owned();
        let img1 = proj_s.column(s).to_owned();
        let mut m = Array2::zeros((img0.len(), 2));
        for r in 0..img0.len() {
            m[[r, 0]] = img0[r];
            m[[r, 1]] = img1[r];
        }
        let ns = linalg::nullspace(&m, session.tol_rank)?;
        if ns.ncols() == 1 {
            let lambda = [ns[[0, 0]], ns[[1, 0]]];
            let cert = LambdaCert {
                lambda,
                kind,
                proj_s,
                vanish_norm: 0.0,
            };
            let vanish = cert.recheck(s);
            out.push(LambdaCert {
                vanish_norm: vanish,
                ..cert
            });
        }
    }
    // intermediate quotient when p + q = omega + k tau with k <= s - 2
    let z = session.curve.add(p, q);
    if let Some((_omega, k)) = session.e2_offset(&z, s as i64 - 1) {
        let shift = (k + 1) as usize;
        let tp = session
            .curve
            .sub(p, &session.curve.mul_int(k + 1, &session.tau));
        let tq = session
            .curve
            .sub(q, &session.curve.mul_int(k + 1, &session.tau));
        let srcline = secant_perp(session, &tp, &tq)?;
        let hom = hom_from_cyclic(session, CyclicSource::Line(&srcline), shift, &line)?;
        if hom.dim() != 1 {
            return Err(Error::Inconsistency(format!(
                "embedded-line Hom dimension {} (expected 1)",
                hom.dim()
            )));
        }
        let gen = hom.basis.column(0).to_owned();
        let (_, proj) = quotient_by_generator(session, &line, shift, &gen, ModuleMeta::Quotient)?;
        let proj_s = proj[s].clone();
        let img0 = proj_s.column(0).to_owned();
        let img1 = proj_s.column(s).to_owned();
        let mut m = Array2::zeros((img0.len(), 2));
        for r in 0..img0.len() {
            m[[r, 0]] = img0[r];
            m[[r, 1]] = img1[r];
        }
        let ns = linalg::nullspace(&m, session.tol_rank)?;
        if ns.ncols() == 1 {
            let lambda = [ns[[0, 0]], ns[[1, 0]]];
            let dup = out.iter().any(|c| {
                let a = Array1::from_vec(vec![c.lambda[0], c.lambda[1]]);
                let b = Array1::from_vec(vec![lambda[0], lambda[1]]);
                linalg::proj_distance(&a, &b) < 1e-8
            });
            if !dup {
                let cert = LambdaCert {
                    lambda,
                    kind: "intermediate fat point",
                    proj_s,
                    vanish_norm: 0.0,
                };
                let vanish = cert.recheck(s);
                out.push(LambdaCert {
                    vanish_norm: vanish,
                    ..cert
                });
            }
        }
    }
    Ok(out)
}

/// The intermediate fat point `F(omega + k tau)` of multiplicity `k + 1`,
/// built as the cokernel of the unique embedding
/// `M(p-(k+1)tau, q-(k+1)tau)(-k-1) -> M(p,q)` for a generic pair with
/// `p + q = omega + k tau`.
pub fn intermediate_fatpoint(
    session: &Session,
    omega: &CurvePoint,
    k: i64,
    dmax: usize,
    seed: u64,
) -> Result<GradedModuleRep> {
    let s = session.s as i64;
    if k < 0 || k > s - 2 {
        return Err(Error::Precondition(format!(
            "k = {k} outside 0..={}",
            s - 2
        )));
    }
    let z = session
        .curve
        .add(omega, &session.curve.mul_int(k, &session.tau));
    let (p, q) = crate::algebra::generic_pair_summing_to(session, &z, seed);
    let line = line_module(session, &p, &q, dmax)?;
    let shift = (k + 1) as usize;
    let tp = session
        .curve
        .sub(&p, &session.curve.mul_int(k + 1, &session.tau));
    let tq = session
        .curve
        .sub(&q, &session.curve.mul_int(k + 1, &session.tau));
    let srcline = secant_perp(session, &tp, &tq)?;
    let hom = hom_from_cyclic(session, CyclicSource::Line(&srcline), shift, &line)?;
    if hom.dim() != 1 {
        return Err(Error::Inconsistency(format!(
            "unique-embedding Hom dimension {} (expected 1)",
            hom.dim()
        )));
    }
    let gen = hom.basis.column(0).to_owned();
    let (coker, _) = quotient_by_generator(
        session,
        &line,
        shift,
        &gen,
        ModuleMeta::FatPoint {
            omega: *omega,
            k,
            p,
            q,
        },
    )?;
    for (d, &dim) in coker.dims.iter().enumerate() {
        let expect = (d + 1).min(shift);
        if dim != expect {
            return Err(Error::Inconsistency(format!(
                "intermediate fat point Hilbert mismatch at degree {d}: {dim} vs {expect}"
            )));
        }
    }
    Ok(coker)
}

/// A finite-dimensional module: images of the four generators plus
/// diagnostics.
#[derive(Debug, Clone)]
pub struct FiniteDimModule {
    pub dim: usize,
    pub mats: [CMat; 4],
    pub omega_value: C64,
    pub residual: f64,
}

impl FiniteDimModule {
    /// Worst relation residual plus centrality defect against the given
    /// central element.
    pub fn audit(&self, session: &Session, algebra: &Algebra, omega: &CentralElement) -> f64 {
        let rels = relation_terms(&session.rel_k);
        let mut worst: f64 = 0.0;
        for r in &rels {
            let mut op: CMat = Array2::zeros((self.dim, self.dim));
            let mut scale = 0.0;
            for &((a, b), co) in r {
                let m = self.mats[a].dot(&self.mats[b]);
                scale += co.norm() * linalg::frob(&m);
                op = op + m.mapv(|x| x * co);
            }
            if scale > 0.0 {
                worst = worst.max(linalg::frob(&op) / scale);
            }
        }
        let rho_om = self.central_image(algebra, omega);
        let eye: CMat = Array2::eye(self.dim);
        let target = eye.mapv(|x| x * self.omega_value);
        let scale = linalg::frob(&rho_om).max(1e-300);
        worst = worst.max(linalg::frob(&(&rho_om - &target)) / scale);
        for a in 0..4 {
            let com = rho_om.dot(&self.mats[a]) - self.mats[a].dot(&rho_om);
            let sc = (linalg::frob(&rho_om) * linalg::frob(&self.mats[a])).max(1e-300);
            worst = worst.max(linalg::frob(&com) / sc);
        }
        worst
    }

    /// Image of a degree-2 central element under the representation.
    pub fn central_image(&self, algebra: &Algebra, omega: &CentralElement) -> CMat {
        let mut op: CMat = Array2::zeros((self.dim, self.dim));
        for (k, w) in algebra.comps[2].words.iter().enumerate() {
            let co = omega.coeffs[k];
            if co.norm() == 0.0 {
                continue;
            }
            op = op + self.mats[w[0]].dot(&self.mats[w[1]]).mapv(|x| x * co);
        }
        op
    }

    /// The `lambda`-twist: generators scaled by `lambda`; the central value
    /// scales by `lambda^2`.
    pub fn twist(&self, lambda: C64) -> FiniteDimModule {
        FiniteDimModule {
            dim: self.dim,
            mats: std::array::from_fn(|a| self.mats[a].mapv(|x| x * lambda)),
            omega_value: self.omega_value * lambda * lambda,
            residual: self.residual,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mats: Vec<_> = self
            .mats
            .iter()
            .map(|m| {
                let entries: Vec<[f64; 2]> = m.iter().map(|z| [z.re, z.im]).collect();
                json!({"rows": m.nrows(), "cols": m.ncols(), "entries": entries})
            })
            .collect();
        json!({
            "dim": self.dim,
            "mats": mats,
            "omega_value": [self.omega_value.re, self.omega_value.im],
            "residual": self.residual,
        })
    }
}

/// De-grade a fat point: `W = C_{d0} (+) C_{d0+1}` with
/// `x (u, v) = (nu Omega^{-1}(x v), x u)`, so the chosen central element
/// acts as the scalar `nu`.
pub fn degrade(
    session: &Session,
    algebra: &Algebra,
    c_mod: &GradedModuleRep,
    omega: &CentralElement,
    nu: C64,
    d0: usize,
) -> Result<FiniteDimModule> {
    if nu.norm() == 0.0 {
        return Err(Error::Precondition("nu must be nonzero".into()));
    }
    let dmax = c_mod.max_degree();
    if d0 + 3 > dmax {
        return Err(Error::Precondition(format!(
            "window [{d0}, {}] exceeds truncation {dmax}",
            d0 + 3
        )));
    }
    // invertibility of Omega on the window
    let mut omega_ops = Vec::new();
    for d in d0..=(dmax - 2).min(d0 + 1) {
        let op = omega.action(algebra, &c_mod.acts, d);
        let sv = linalg::singular_values(&op)?;
        let smax = sv.first().copied().unwrap_or(0.0);
        let smin = sv.last().copied().unwrap_or(0.0);
        if smax < 1e-12 {
            return Err(Error::Inconsistency(
                "central element annihilates the module (wrong central element)".into(),
            ));
        }
        if op.nrows() != op.ncols() || smin <= session.tol_rank * smax {
            return Err(Error::Inconsistency(format!(
                "Omega not invertible C_{d} -> C_{}; shift d0 and retry",
                d + 2
            )));
        }
        omega_ops.push(op);
    }
    let n0 = c_mod.dims[d0];
    let n1 = c_mod.dims[d0 + 1];
    let inv0 = linalg::inverse(&omega_ops[0], session.tol_rank)?;
    let mut mats: [CMat; 4] = std::array::from_fn(|_| Array2::zeros((n0 + n1, n0 + n1)));
    for a in 0..4 {
        let upper = inv0.dot(&c_mod.acts[d0 + 1][a]).mapv(|x| x * nu);
        for r in 0..n0 {
            for c in 0..n1 {
                mats[a][[r, n0 + c]] = upper[[r, c]];
            }
        }
        let lower = &c_mod.acts[d0][a];
        for r in 0..n1 {
            for c in 0..n0 {
                mats[a][[n0 + r, c]] = lower[[r, c]];
            }
        }
    }
    let mut w = FiniteDimModule {
        dim: n0 + n1,
        mats,
        omega_value: nu,
        residual: 0.0,
    };
    w.residual = w.audit(session, algebra, omega);
    if w.residual > session.tol_res {
        return Err(Error::Tolerance(format!(
            "de-graded module residual {:.3e}",
            w.residual
        )));
    }
    Ok(w)
}

/// An invariant subspace produced by the commutant search, with its
/// stability residual.
pub struct InvariantWitness {
    pub basis: CMat,
    pub residual: f64,
}

/// Dimension of `{T : [T, rho(x_a)] = 0 for all a}` plus invariant-subspace
/// witnesses extracted from a non-scalar commutant element when the
/// dimension exceeds 1.
pub fn commutant_dim(
    session: &Session,
    w: &FiniteDimModule,
) -> Result<(usize, Vec<InvariantWitness>)> {
    let n = w.dim;
    let eye: CMat = Array2::eye(n);
    let mut stack: CMat = Array2::zeros((4 * n * n, n * n));
    for a in 0..4 {
        let block = linalg::kron(&eye, &w.mats[a])
            - linalg::kron(&w.mats[a].t().to_owned(), &eye);
        for r in 0..n * n {
            for c in 0..n * n {
                stack[[a * n * n + r, c]] = block[[r, c]];
            }
        }
    }
    let ns = linalg::nullspace(&stack, session.tol_rank)?;
    let dim = ns.ncols();
    let mut witnesses = Vec::new();
    if dim > 1 {
        // pick a traceless commutant element and split along its eigenspaces
        let mut pick: Option<CMat> = None;
        for c in 0..dim {
            let t = linalg::unvec_col(&ns.column(c).to_owned(), n);
            let tr: C64 = (0..n).map(|i| t[[i, i]]).sum();
            let dev = &t - &eye.mapv(|x| x * (tr / n as f64));
            if linalg::frob(&dev) > 1e-6 * linalg::frob(&t).max(1e-300) {
                pick = Some(dev);
                break;
            }
        }
        if let Some(t) = pick {
            let (vals, vecs) = linalg::eig(&t)?;
            let mut used = vec![false; n];
            for i in 0..n {
                if used[i] {
                    continue;
                }
                let idx: Vec<usize> = (0..n)
                    .filter(|&j| (vals[j] - vals[i]).norm() < 1e-6)
                    .collect();
                for &j in &idx {
                    used[j] = true;
                }
                if idx.len() == n {
                    continue;
                }
                let mut basis: CMat = Array2::zeros((n, idx.len()));
                for (c, &j) in idx.iter().enumerate() {
                    for r in 0..n {
                        basis[[r, c]] = vecs[[r, j]];
                    }
                }
                let basis = linalg::column_space(&basis, session.tol_rank)?;
                // A-stability residual
                let mut res: f64 = 0.0;
                for a in 0..4 {
                    let img = w.mats[a].dot(&basis);
                    let back = basis.dot(&linalg::dagger(&basis).dot(&img));
                    let sc = linalg::frob(&img).max(1e-300);
                    res = res.max(linalg::frob(&(&img - &back)) / sc);
                }
                witnesses.push(InvariantWitness { basis, residual: res });
            }
        }
    }
    Ok((dim, witnesses))
}

/// Restriction of a finite module to an invariant subspace.
pub fn restrict(w: &FiniteDimModule, basis: &CMat) -> FiniteDimModule {
    let b = basis;
    let bd = linalg::dagger(b);
    FiniteDimModule {
        dim: b.ncols(),
        mats: std::array::from_fn(|a| bd.dot(&w.mats[a]).dot(b)),
        omega_value: w.omega_value,
        residual: w.residual,
    }
}

/// Is there an invertible intertwiner between two finite modules?
pub fn intertwiner_exists(session: &Session, a: &FiniteDimModule, b: &FiniteDimModule) -> Result<bool> {
    if a.dim != b.dim {
        return Ok(false);
    }
    let n = a.dim;
    let eye: CMat = Array2::eye(n);
    let mut stack: CMat = Array2::zeros((4 * n * n, n * n));
    for g in 0..4 {
        let block =
            linalg::kron(&eye, &a.mats[g]) - linalg::kron(&b.mats[g].t().to_owned(), &eye);
        for r in 0..n * n {
            for c in 0..n * n {
                stack[[g * n * n + r, c]] = block[[r, c]];
            }
        }
    }
    let ns = linalg::nullspace(&stack, session.tol_rank)?;
    if ns.ncols() == 0 {
        return Ok(false);
    }
    // random combination of the null basis is generically invertible iff an
    // invertible intertwiner exists
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x717);
    for _ in 0..4 {
        let mut t: CMat = Array2::zeros((n, n));
        for c in 0..ns.ncols() {
            let co = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            t = t + linalg::unvec_col(&ns.column(c).to_owned(), n).mapv(|x| x * co);
        }
        let sv = linalg::singular_values(&t)?;
        if sv.last().copied().unwrap_or(0.0) > 1e-8 * sv.first().copied().unwrap_or(1.0) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Max residual of the standard polynomial `S_m` over random argument
/// words, normalised by the product of argument norms.  Cost is modelled as
/// `m! * dim^3` and refused when it exceeds `budget`.
pub fn standard_identity_residual(
    w: &FiniteDimModule,
    m: usize,
    trials: usize,
    seed: u64,
    budget: f64,
) -> Result<f64> {
    let cost = (1..=m).fold(1.0_f64, |acc, k| acc * k as f64) * (w.dim as f64).powi(3);
    if cost > budget {
        return Err(Error::Budget(format!(
            "S_{m} on dimension {} costs ~{cost:.2e} (budget {budget:.2e})",
            w.dim
        )));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = w.dim;
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        // random words in the generator images
        let args: Vec<CMat> = (0..m)
            .map(|_| {
                let len = rng.random_range(1..=3);
                let mut acc: CMat = Array2::eye(n);
                for _ in 0..len {
                    let a = rng.random_range(0..4);
                    acc = acc.dot(&w.mats[a]);
                }
                acc
            })
            .collect();
        let s = standard_polynomial(&args);
        let denom: f64 = args.iter().map(linalg::frob).product();
        if denom > 0.0 {
            worst = worst.max(linalg::frob(&s) / denom);
        }
    }
    Ok(worst)
}

/// `S_m(a_1..a_m) = sum_{perm} sgn(perm) a_{perm(1)} ... a_{perm(m)}`,
/// evaluated by dynamic programming over subsets (left-to-right products,
/// sign tracked by inversion count of the appended index).
pub fn standard_polynomial(args: &[CMat]) -> CMat {
    let m = args.len();
    let n = args[0].nrows();
    let full = (1usize << m) - 1;
    let mut table: Vec<Option<CMat>> = vec![None; 1 << m];
    table[0] = Some(Array2::eye(n));
    for mask in 1..=full {
        let mut acc: CMat = Array2::zeros((n, n));
        for j in 0..m {
            if mask & (1 << j) == 0 {
                continue;
            }
            let prev = mask ^ (1 << j);
            // appending j after the elements of prev: sign flips once per
            // element of prev larger than j
            let larger = (prev >> (j + 1)).count_ones();
            let sign = if larger % 2 == 0 { 1.0 } else { -1.0 };
            let base = table[prev].as_ref().expect("filled in order");
            acc = acc + base.dot(&args[j]).mapv(|x| x * sign);
        }
        table[mask] = Some(acc);
    }
    table[full].take().expect("full mask computed")
}
