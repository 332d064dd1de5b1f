//! Jacobi theta functions with characteristics and the Sklyanin structure
//! constants.
//!
//! Convention (recorded here once, used everywhere):
//!
//! ```text
//! theta[a,b](z | t) = sum_{n in Z} exp( i pi t (n+a)^2 + 2 pi i (n+a)(z+b) )
//! ```
//!
//! with `a, b in {0, 1/2}`, nome `q = exp(i pi t)`, and label `ab` meaning
//! `(a, b) = (a/2, b/2)`.  Under this convention `theta_11` is odd and
//! vanishes exactly on `Z + Z t`; `theta_00`, `theta_01`, `theta_10` are
//! even.  Quasi-periodicity:
//!
//! ```text
//! theta[a,b](z + 1) = exp(2 pi i a) theta[a,b](z)
//! theta[a,b](z + t) = exp(-i pi t - 2 pi i (z + b)) theta[a,b](z)
//! ```
//!
//! Arguments are reduced into the fundamental strip by these rules before
//! summation, so evaluation is stable for any `z`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::curve::CurvePoint;
use crate::error::Error;
use crate::linalg::C64;
use crate::Result;

const TWO_PI: f64 = std::f64::consts::TAU;
const PI: f64 = std::f64::consts::PI;

/// Lattice `L = Z + Z tau_lat` together with the series truncation
/// threshold.  `Im(tau_lat) >= 0.3` keeps the reduced series short.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeParam {
    pub tau_lat: C64,
    pub series_tol: f64,
}

impl LatticeParam {
    pub fn new(tau_lat: C64, series_tol: f64) -> Result<Self> {
        if !(tau_lat.im > 0.0) || !tau_lat.is_finite() {
            return Err(Error::InvalidLattice(format!(
                "Im(tau_lat) must be positive, got {}",
                tau_lat
            )));
        }
        if tau_lat.im < 0.3 {
            return Err(Error::InvalidLattice(format!(
                "Im(tau_lat) = {} below the 0.3 convergence guard",
                tau_lat.im
            )));
        }
        if !(series_tol > 0.0) || series_tol >= 1e-6 {
            return Err(Error::InvalidLattice(format!(
                "series_tol must lie in (0, 1e-6), got {}",
                series_tol
            )));
        }
        Ok(Self {
            tau_lat,
            series_tol,
        })
    }

    /// Default generic lattice: fast convergence, no accidental symmetry.
    pub fn default_lattice() -> Self {
        Self::new(C64::new(0.31, 1.17), 1e-14).expect("default lattice is valid")
    }

    /// Square lattice preset.
    pub fn square() -> Self {
        Self::new(C64::new(0.0, 1.0), 1e-14).expect("square lattice is valid")
    }

    /// Hexagonal lattice preset, `tau_lat = exp(i pi / 3)`.
    pub fn hexagonal() -> Self {
        Self::new(C64::from_polar(1.0, PI / 3.0), 1e-14).expect("hexagonal lattice is valid")
    }
}

/// The four theta characteristics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ThetaChar {
    T00,
    T01,
    T10,
    T11,
}

impl ThetaChar {
    pub const ALL: [ThetaChar; 4] = [
        ThetaChar::T00,
        ThetaChar::T01,
        ThetaChar::T10,
        ThetaChar::T11,
    ];

    fn ab(self) -> (f64, f64) {
        match self {
            ThetaChar::T00 => (0.0, 0.0),
            ThetaChar::T01 => (0.0, 0.5),
            ThetaChar::T10 => (0.5, 0.0),
            ThetaChar::T11 => (0.5, 0.5),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ThetaChar::T00 => "00",
            ThetaChar::T01 => "01",
            ThetaChar::T10 => "10",
            ThetaChar::T11 => "11",
        }
    }
}

/// Reduce `z` to `z0 + m + k*t` with `z0` in the fundamental strip.
fn reduce_arg(z: C64, t: C64) -> (C64, i64, i64) {
    let k = (z.im / t.im).round();
    let z1 = z - t * k;
    let m = z1.re.round();
    let z0 = z1 - m;
    (z0, m as i64, k as i64)
}

/// Evaluate `theta[a,b](z | tau_lat)`.  Deterministic: identical inputs give
/// bit-identical output.
pub fn theta(ch: ThetaChar, z: C64, lat: &LatticeParam) -> C64 {
    theta_with_deriv(ch, z, lat).0
}

/// Evaluate the theta function and its derivative with respect to `z`.
pub fn theta_with_deriv(ch: ThetaChar, z: C64, lat: &LatticeParam) -> (C64, C64) {
    let t = lat.tau_lat;
    let (a, b) = ch.ab();
    let (z0, m, k) = reduce_arg(z, t);
    // theta(z0 + m + k t) = e^{2 pi i a m} e^{-i pi k^2 t - 2 pi i k (z0 + m + b)} theta(z0)
    let mult = (C64::new(0.0, TWO_PI * a * m as f64)
        + C64::new(0.0, -PI * (k * k) as f64) * t
        + C64::new(0.0, -TWO_PI * k as f64) * (z0 + m as f64 + b))
        .exp();
    let (v0, d0) = theta_series(a, b, z0, t, lat.series_tol);
    let value = mult * v0;
    // d/dz [mult(z) theta(z0(z))]: z0' = 1, mult' = -2 pi i k * mult
    let deriv = mult * (d0 + C64::new(0.0, -TWO_PI * k as f64) * v0);
    (value, deriv)
}

/// Truncated series on the reduced argument.  Terms are added symmetrically
/// outward until the next term is below `tol * (|partial| + 1)`.
fn theta_series(a: f64, b: f64, z: C64, t: C64, tol: f64) -> (C64, C64) {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut dsum = Complex64::new(0.0, 0.0);
    let term = |n: i64| -> (C64, C64) {
        let na = n as f64 + a;
        let expo = C64::new(0.0, PI * na * na) * t + C64::new(0.0, TWO_PI * na) * (z + b);
        let e = expo.exp();
        (e, C64::new(0.0, TWO_PI * na) * e)
    };
    // n = 0 and n = -1 straddle the characteristic offset
    let mut radius: i64 = 0;
    loop {
        let mut shell = 0.0_f64;
        for n in [radius, -radius - 1] {
            let (v, d) = term(n);
            sum += v;
            dsum += d;
            shell = shell.max(v.norm());
        }
        if radius > 2 && shell < tol * (sum.norm() + 1.0) {
            break;
        }
        radius += 1;
        if radius > 512 {
            break; // guarded by the Im >= 0.3 lattice invariant
        }
    }
    (sum, dsum)
}

/// The three structure constants of the defining relations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureConstants {
    pub j12: C64,
    pub j23: C64,
    pub j31: C64,
}

impl StructureConstants {
    /// Residual of `J12 + J23 + J31 + J12 J23 J31`, which vanishes for any
    /// admissible parameter triple.
    pub fn identity_residual(&self) -> f64 {
        (self.j12 + self.j23 + self.j31 + self.j12 * self.j23 * self.j31).norm()
    }
}

/// Structure constants at the translation point `tau`, evaluated on its
/// complex lift:
///
/// ```text
/// J12 =  theta_11^2 theta_01^2 / (theta_00^2 theta_10^2)
/// J23 =  theta_11^2 theta_10^2 / (theta_00^2 theta_01^2)
/// J31 = -theta_11^2 theta_00^2 / (theta_01^2 theta_10^2)
/// ```
///
/// Rejected for `tau` of order 1, 2 or 4 (the constants degenerate there).
pub fn structure_constants(tau_pt: &CurvePoint, lat: &LatticeParam) -> Result<StructureConstants> {
    match tau_pt.torsion_order() {
        Some(n) if n == 1 || n == 2 || n == 4 => {
            return Err(Error::UnsupportedTorsion(format!(
                "tau has order {n}; orders 1, 2, 4 are excluded"
            )));
        }
        Some(_) => {}
        None => {
            return Err(Error::UnsupportedTorsion(
                "tau must carry exact torsion coordinates".into(),
            ));
        }
    }
    let z = tau_pt.approx;
    let t11 = theta(ThetaChar::T11, z, lat);
    let t00 = theta(ThetaChar::T00, z, lat);
    let t01 = theta(ThetaChar::T01, z, lat);
    let t10 = theta(ThetaChar::T10, z, lat);
    let sq = |x: C64| x * x;
    let j12 = sq(t11) * sq(t01) / (sq(t00) * sq(t10));
    let j23 = sq(t11) * sq(t10) / (sq(t00) * sq(t01));
    let j31 = -sq(t11) * sq(t00) / (sq(t01) * sq(t10));
    let out = StructureConstants { j12, j23, j31 };
    for (name, v) in [("J12", j12), ("J23", j23), ("J31", j31)] {
        if !v.is_finite() || v.norm() == 0.0 {
            return Err(Error::UnsupportedTorsion(format!(
                "{name} degenerate at this tau: {v}"
            )));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{Curve, Rat};

    fn lat() -> LatticeParam {
        LatticeParam::default_lattice()
    }

    #[test]
    fn theta11_vanishes_at_origin_and_lattice() {
        let l = lat();
        assert!(theta(ThetaChar::T11, C64::new(0.0, 0.0), &l).norm() < 1e-13);
        for (m, k) in [(1i64, 0i64), (0, 1), (-2, 3), (5, -1)] {
            let z = C64::new(m as f64, 0.0) + l.tau_lat * k as f64;
            // quasi-periodic multiplier can be large; compare against the
            // nearby non-lattice value
            let off = theta(ThetaChar::T11, z + C64::new(0.11, 0.07), &l).norm();
            assert!(theta(ThetaChar::T11, z, &l).norm() < 1e-10 * off.max(1.0));
        }
    }

    #[test]
    fn parity() {
        let l = lat();
        let z = C64::new(0.2, 0.1);
        let odd = theta(ThetaChar::T11, -z, &l) + theta(ThetaChar::T11, z, &l);
        assert!(odd.norm() < 1e-12);
        for ch in [ThetaChar::T00, ThetaChar::T01, ThetaChar::T10] {
            let d = theta(ch, -z, &l) - theta(ch, z, &l);
            assert!(d.norm() < 1e-12 * theta(ch, z, &l).norm());
        }
    }

    #[test]
    fn translation_by_one_matches_direct_series() {
        // compare reduced evaluation at z+1 against the quasi-periodicity
        // phase applied to the value at z, for each characteristic
        let l = lat();
        let z = C64::new(0.13, 0.07);
        for ch in ThetaChar::ALL {
            let (a, _) = ch.ab();
            let direct = theta(ch, z + 1.0, &l);
            let phased = (C64::new(0.0, TWO_PI * a)).exp() * theta(ch, z, &l);
            assert!((direct - phased).norm() < 1e-12 * direct.norm().max(1.0));
        }
    }

    #[test]
    fn quartic_identity() {
        // theta_11^4 + theta_00^4 = theta_01^4 + theta_10^4 for all z
        let l = lat();
        for z in [C64::new(0.2, 0.1), C64::new(-0.37, 0.55), C64::new(0.05, -0.21)] {
            let p4 = |ch| {
                let v: C64 = theta(ch, z, &l);
                v * v * v * v
            };
            let lhs = p4(ThetaChar::T11) + p4(ThetaChar::T00);
            let rhs = p4(ThetaChar::T01) + p4(ThetaChar::T10);
            assert!((lhs - rhs).norm() < 1e-11 * lhs.norm().max(1.0));
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let l = lat();
        let z = C64::new(0.23, 0.31);
        let h = 1e-6;
        for ch in ThetaChar::ALL {
            let (_, d) = theta_with_deriv(ch, z, &l);
            let fd = (theta(ch, z + C64::new(h, 0.0), &l) - theta(ch, z - C64::new(h, 0.0), &l))
                / C64::new(2.0 * h, 0.0);
            assert!((d - fd).norm() < 1e-6 * d.norm().max(1.0));
        }
    }

    #[test]
    fn structure_constants_identity_and_signs() {
        let l = lat();
        let curve = Curve::new(l);
        let tau = curve.exact_point(Rat::new(1, 3), Rat::new(0, 1));
        let j = structure_constants(&tau, &l).unwrap();
        assert!(j.identity_residual() < 1e-9);
        // J31 carries the display's leading minus: recompute the unsigned
        // ratio directly and compare
        let sq = |ch| {
            let v: C64 = theta(ch, tau.approx, &l);
            v * v
        };
        let unsigned = sq(ThetaChar::T11) * sq(ThetaChar::T00)
            / (sq(ThetaChar::T01) * sq(ThetaChar::T10));
        assert!((j.j31 + unsigned).norm() < 1e-12 * unsigned.norm());
        assert!((j.j12 - sq(ThetaChar::T11) * sq(ThetaChar::T01)
            / (sq(ThetaChar::T00) * sq(ThetaChar::T10)))
        .norm()
            < 1e-12 * j.j12.norm());
    }

    #[test]
    fn rejects_bad_torsion_orders() {
        let l = lat();
        let curve = Curve::new(l);
        for (a, b, _n) in [(0i64, 1i64, 1u32), (1, 2, 2), (1, 4, 4)] {
            let p = curve.exact_point(Rat::new(a, b.max(1)), Rat::new(0, 1));
            assert!(structure_constants(&p, &l).is_err());
        }
    }

    #[test]
    fn rejects_invalid_lattice() {
        assert!(LatticeParam::new(C64::new(0.3, -1.0), 1e-12).is_err());
        assert!(LatticeParam::new(C64::new(0.3, 0.1), 1e-12).is_err());
        assert!(LatticeParam::new(C64::new(0.3, 1.0), 1e-3).is_err());
    }
}
