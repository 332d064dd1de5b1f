//! Points on a complex torus `E = C / L` with exact rational torsion
//! bookkeeping.
//!
//! A [`Curve`] owns a lattice basis `(omega1, omega2)`; points carry an
//! always-present complex representative inside the fundamental domain and,
//! when known, exact rational coordinates with respect to the basis.  All
//! torsion questions (orders, subgroup membership) are answered exactly from
//! the rational coordinates; approx-only points answer "unknown"/"generic".

use num_complex::Complex64;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg::C64;
use crate::theta::LatticeParam;
use crate::Result;

pub type Rat = Ratio<i64>;

/// Exact coordinates `(r1, r2)` meaning `r1 * omega1 + r2 * omega2`.
pub type RatPair = (Rat, Rat);

fn frac(r: Rat) -> Rat {
    let f = r - r.floor();
    if f < Rat::zero() {
        f + Rat::from_integer(1)
    } else {
        f
    }
}

/// A complex torus with a distinguished lattice basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub lat: LatticeParam,
    pub omega1: C64,
    pub omega2: C64,
    /// Distinguishes points of different curves in one session.
    pub tag: u8,
}

/// A point of `E`, always reduced to the fundamental domain
/// `[0,1) omega1 + [0,1) omega2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub exact: Option<RatPair>,
    pub approx: C64,
    pub curve_tag: u8,
}

impl Curve {
    /// The curve `C / (Z + Z tau_lat)`.
    pub fn new(lat: LatticeParam) -> Self {
        Curve {
            lat,
            omega1: C64::new(1.0, 0.0),
            omega2: lat.tau_lat,
            tag: 0,
        }
    }

    fn basis_det(&self) -> f64 {
        self.omega1.re * self.omega2.im - self.omega1.im * self.omega2.re
    }

    /// Real coordinates of `z` in the lattice basis.
    fn coords(&self, z: C64) -> (f64, f64) {
        let det = self.basis_det();
        let r1 = (z.re * self.omega2.im - z.im * self.omega2.re) / det;
        let r2 = (self.omega1.re * z.im - self.omega1.im * z.re) / det;
        (r1, r2)
    }

    fn from_coords(&self, r1: f64, r2: f64) -> C64 {
        self.omega1 * r1 + self.omega2 * r2
    }

    /// Reduce an arbitrary complex number to its fundamental-domain
    /// representative (approx only).
    pub fn reduce(&self, z: C64) -> CurvePoint {
        let (r1, r2) = self.coords(z);
        let f1 = r1 - r1.floor();
        let f2 = r2 - r2.floor();
        CurvePoint {
            exact: None,
            approx: self.from_coords(f1, f2),
            curve_tag: self.tag,
        }
    }

    /// Exact point `r1 * omega1 + r2 * omega2`, reduced mod the lattice.
    pub fn exact_point(&self, r1: Rat, r2: Rat) -> CurvePoint {
        let f1 = frac(r1);
        let f2 = frac(r2);
        let approx = self.from_coords(rat_f64(f1), rat_f64(f2));
        CurvePoint {
            exact: Some((f1, f2)),
            approx,
            curve_tag: self.tag,
        }
    }

    /// The zero point.
    pub fn zero(&self) -> CurvePoint {
        self.exact_point(Rat::zero(), Rat::zero())
    }

    /// Sum of two points; exact coordinates are preserved when both carry
    /// them.
    pub fn add(&self, p: &CurvePoint, q: &CurvePoint) -> CurvePoint {
        debug_assert_eq!(p.curve_tag, self.tag);
        debug_assert_eq!(q.curve_tag, self.tag);
        match (p.exact, q.exact) {
            (Some((a1, a2)), Some((b1, b2))) => self.exact_point(a1 + b1, a2 + b2),
            _ => self.reduce(p.approx + q.approx),
        }
    }

    pub fn neg(&self, p: &CurvePoint) -> CurvePoint {
        match p.exact {
            Some((a1, a2)) => self.exact_point(-a1, -a2),
            None => self.reduce(-p.approx),
        }
    }

    pub fn sub(&self, p: &CurvePoint, q: &CurvePoint) -> CurvePoint {
        self.add(p, &self.neg(q))
    }

    pub fn mul_int(&self, k: i64, p: &CurvePoint) -> CurvePoint {
        match p.exact {
            Some((a1, a2)) => self.exact_point(a1 * Rat::from_integer(k), a2 * Rat::from_integer(k)),
            None => self.reduce(p.approx * k as f64),
        }
    }

    /// Distance on the torus (smallest representative of the difference).
    pub fn torus_distance(&self, p: &CurvePoint, q: &CurvePoint) -> f64 {
        let d = self.reduce(p.approx - q.approx);
        let mut best = f64::INFINITY;
        for m in [-1.0, 0.0] {
            for k in [-1.0, 0.0] {
                let w = d.approx + self.omega1 * m + self.omega2 * k;
                best = best.min(w.norm());
            }
        }
        best
    }

    /// Exact equality when both points carry exact coordinates, otherwise a
    /// tolerance comparison on the torus.
    pub fn points_equal(&self, p: &CurvePoint, q: &CurvePoint, tol: f64) -> bool {
        match (p.exact, q.exact) {
            (Some(a), Some(b)) => a == b,
            _ => self.torus_distance(p, q) < tol,
        }
    }

    /// The four 2-torsion points.
    pub fn two_torsion(&self) -> [CurvePoint; 4] {
        let h = Rat::new(1, 2);
        let z = Rat::zero();
        [
            self.exact_point(z, z),
            self.exact_point(h, z),
            self.exact_point(z, h),
            self.exact_point(h, h),
        ]
    }

    /// Construct the quotient curve `E / <g>` for an exact torsion point
    /// `g`.  Returns the quotient curve (with its own basis and lattice
    /// parameter) and the exact 2x2 rational change of coordinates sending
    /// `E`-coordinates to coordinates in the new basis.
    pub fn quotient_by(&self, g: &CurvePoint, tag: u8) -> Result<(Curve, [[Rat; 2]; 2])> {
        let (g1, g2) = g
            .exact
            .ok_or_else(|| Error::ExactRequired("quotient generator must be exact".into()))?;
        // common denominator n: lattice L' = Z^2 + Z (g1, g2) scaled by n
        let n = g1.denom().lcm(g2.denom());
        let u = (g1 * Rat::from_integer(n)).to_integer();
        let v = (g2 * Rat::from_integer(n)).to_integer();
        let rows = vec![[n, 0], [0, n], [u, v]];
        let h = hnf2(rows);
        // basis of L' in E-coordinates: w1 = h[0]/n, w2 = h[1]/n
        let w1 = (Rat::new(h[0][0], n), Rat::new(h[0][1], n));
        let w2 = (Rat::new(h[1][0], n), Rat::new(h[1][1], n));
        let omega1 = self.omega1 * rat_f64(w1.0) + self.omega2 * rat_f64(w1.1);
        let omega2 = self.omega1 * rat_f64(w2.0) + self.omega2 * rat_f64(w2.1);
        let tau_new = omega2 / omega1;
        let lat = LatticeParam::new(tau_new, self.lat.series_tol)?;
        // inverse of [[w1.0, w2.0],[w1.1, w2.1]] maps E-coords to new coords
        let det = w1.0 * w2.1 - w1.1 * w2.0;
        if det.is_zero() {
            return Err(Error::DegenerateInput("quotient basis degenerate".into()));
        }
        let inv = [
            [w2.1 / det, -w2.0 / det],
            [-w1.1 / det, w1.0 / det],
        ];
        Ok((
            Curve {
                lat,
                omega1,
                omega2,
                tag,
            },
            inv,
        ))
    }

    /// Map a point of the covering curve into this quotient curve using the
    /// exact coordinate transform produced by [`Curve::quotient_by`].
    pub fn image_from_cover(&self, p: &CurvePoint, transform: &[[Rat; 2]; 2]) -> CurvePoint {
        match p.exact {
            Some((a1, a2)) => {
                let b1 = transform[0][0] * a1 + transform[0][1] * a2;
                let b2 = transform[1][0] * a1 + transform[1][1] * a2;
                self.exact_point(b1, b2)
            }
            None => self.reduce(p.approx),
        }
    }
}

impl CurvePoint {
    /// Smallest `m >= 1` with `m * p` in the lattice; `None` when the point
    /// carries no exact coordinates.
    pub fn torsion_order(&self) -> Option<u32> {
        let (r1, r2) = self.exact?;
        Some(r1.denom().lcm(r2.denom()) as u32)
    }

    /// Exact coordinates or an error mentioning `what`.
    pub fn require_exact(&self, what: &str) -> Result<RatPair> {
        self.exact
            .ok_or_else(|| Error::ExactRequired(what.to_string()))
    }

    /// Total order key for canonicalization of exact points.
    pub fn order_key(&self) -> Option<(Rat, Rat)> {
        self.exact
    }
}

pub fn rat_f64(r: Rat) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Hermite-style normal form of the subgroup of `Z^2` spanned by `rows`:
/// returns `[w1, w2]` with `w1 = (d11, 0)` and `w2 = (d21, d22)`,
/// `d11, d22 > 0`, `0 <= d21 < d11`.
fn hnf2(mut rows: Vec<[i64; 2]>) -> [[i64; 2]; 2] {
    // eliminate second coordinate down to a single generator
    loop {
        rows.retain(|r| r != &[0, 0]);
        let mut with_y: Vec<usize> = (0..rows.len()).filter(|&i| rows[i][1] != 0).collect();
        if with_y.len() <= 1 {
            break;
        }
        with_y.sort_by_key(|&i| rows[i][1].abs());
        let (a, b) = (with_y[0], with_y[1]);
        let q = rows[b][1].div_euclid(rows[a][1]);
        rows[b] = [rows[b][0] - q * rows[a][0], rows[b][1] - q * rows[a][1]];
    }
    let w2_idx = (0..rows.len()).find(|&i| rows[i][1] != 0);
    let mut w2 = w2_idx.map(|i| rows[i]).unwrap_or([0, 0]);
    if w2[1] < 0 {
        w2 = [-w2[0], -w2[1]];
    }
    // gcd of remaining first coordinates
    let mut d11: i64 = 0;
    for (i, r) in rows.iter().enumerate() {
        if Some(i) != w2_idx {
            d11 = d11.gcd(&r[0]);
        }
    }
    d11 = d11.abs();
    // reduce w2's first coordinate mod d11
    if d11 > 0 {
        w2[0] = w2[0].rem_euclid(d11);
    }
    [[d11, 0], w2]
}

/// Deterministic pseudo-random exact point with the given denominator.
pub fn random_exact_point<R: rand::Rng>(curve: &Curve, den: i64, rng: &mut R) -> CurvePoint {
    let a = rng.random_range(0..den);
    let b = rng.random_range(0..den);
    curve.exact_point(Rat::new(a, den), Rat::new(b, den))
}

/// Membership of `p` in the finite subset `{base + k*step : 0 <= k < count}`
/// of exact points.  Exact test; `false` if `p` has no exact coordinates.
pub fn in_translates(
    curve: &Curve,
    p: &CurvePoint,
    base: &CurvePoint,
    step: &CurvePoint,
    count: i64,
) -> bool {
    if p.exact.is_none() {
        return false;
    }
    let mut cur = *base;
    for _ in 0..count {
        if curve.points_equal(p, &cur, 0.0) {
            return true;
        }
        cur = curve.add(&cur, step);
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve() -> Curve {
        Curve::new(LatticeParam::default_lattice())
    }

    #[test]
    fn reduce_lattice_vector_to_zero() {
        let e = curve();
        let z = C64::new(1.0, 0.0) + e.lat.tau_lat;
        let p = e.reduce(z);
        assert!(e.torus_distance(&p, &e.zero()) < 1e-12);
    }

    #[test]
    fn exact_reduction_and_order() {
        let e = curve();
        let p = e.exact_point(Rat::new(1, 3), Rat::zero());
        assert_eq!(p.torsion_order(), Some(3));
        let q = e.exact_point(Rat::new(4, 3), Rat::new(-2, 1));
        assert_eq!(q.exact, p.exact);
        // (1/6, 0) has order 6 and doubling gives order 3
        let h = e.exact_point(Rat::new(1, 6), Rat::zero());
        assert_eq!(h.torsion_order(), Some(6));
        assert_eq!(e.mul_int(2, &h).torsion_order(), Some(3));
        // 2-torsion
        let w = e.exact_point(Rat::new(1, 2), Rat::new(1, 2));
        assert_eq!(w.torsion_order(), Some(2));
    }

    #[test]
    fn approx_only_order_unknown() {
        let e = curve();
        let p = e.reduce(C64::new(0.31, 0.17));
        assert_eq!(p.torsion_order(), None);
    }

    #[test]
    fn exact_approx_coherence() {
        let e = curve();
        let p = e.exact_point(Rat::new(5, 7), Rat::new(3, 11));
        let direct = e.from_coords(5.0 / 7.0, 3.0 / 11.0);
        assert!((p.approx - direct).norm() < 1e-12);
    }

    #[test]
    fn quotient_by_two_tau_order3() {
        // tau = 1/3, 2tau = 2/3 generates (1/3)Z mod 1
        let e = curve();
        let g = e.exact_point(Rat::new(2, 3), Rat::zero());
        let (ep, t) = e.quotient_by(&g, 1).unwrap();
        // omega1' = 1/3, omega2' = tau_lat
        assert!((ep.omega1 - C64::new(1.0 / 3.0, 0.0)).norm() < 1e-12);
        assert!((ep.omega2 - e.lat.tau_lat).norm() < 1e-12);
        // kernel maps to zero
        let img = ep.image_from_cover(&g, &t);
        assert!(ep.points_equal(&img, &ep.zero(), 1e-12));
        // tau itself maps to a point of order dividing 3
        let tau = e.exact_point(Rat::new(1, 3), Rat::zero());
        let itau = ep.image_from_cover(&tau, &t);
        assert_eq!(itau.torsion_order(), Some(3));
    }

    #[test]
    fn quotient_by_general_two_tau() {
        // tau = (1 + tau_lat)/5: 2tau = (2 + 2 tau_lat)/5, s = 5
        let e = curve();
        let g = e.exact_point(Rat::new(2, 5), Rat::new(2, 5));
        let (ep, t) = e.quotient_by(&g, 1).unwrap();
        let img = ep.image_from_cover(&g, &t);
        assert!(ep.points_equal(&img, &ep.zero(), 1e-12));
        // index of Z^2 in L' is 5: covolume ratio
        let det_e = e.omega1.re * e.omega2.im - e.omega1.im * e.omega2.re;
        let det_p = ep.omega1.re * ep.omega2.im - ep.omega1.im * ep.omega2.re;
        assert!((det_e / det_p - 5.0).abs() < 1e-9);
    }

    #[test]
    fn translate_membership() {
        let e = curve();
        let tau = e.exact_point(Rat::new(1, 5), Rat::zero());
        let two_tau = e.mul_int(2, &tau);
        let p = e.exact_point(Rat::new(4, 5), Rat::zero()); // = 2*(2tau)
        assert!(in_translates(&e, &p, &e.zero(), &two_tau, 5));
        let q = e.exact_point(Rat::new(1, 7), Rat::zero());
        assert!(!in_translates(&e, &q, &e.zero(), &two_tau, 5));
    }
}
