//! Splitting `x = z y_+` where `z` is fixed by a second-kind involution
//! `tau` and `y_+` extends holomorphically to the unit disc.
//!
//! The loop `u = tau(x)^{-1} x` satisfies `tau(u) = u^{-1}`; its Birkhoff
//! factorization `u = w_- w_+` leaves a constant obstruction
//! `c = tau(w_+(0))` with `tau(c) = c^{-1}`. With `X = log c` (principal
//! branch) and `b = exp(X / 2)` one has `tau(b)^{-1} b = c`, and
//! `y_+ = b w_+`, `z = x y_+^{-1}` is the splitting.

use serde::Serialize;

use crate::birkhoff::birkhoff_factor;
use crate::error::{Error, Result};
use crate::involutions::{InvolutionSpec, RealFormSpec};
use crate::linalg::{self, CMat, C64};
use crate::loops::LaurentLoop;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IwasawaDiagnostics {
    pub residual: f64,
    pub z_fixed_residual: f64,
    /// `sup |tau(u) u - I|` for the obstruction loop.
    pub u_symmetry: f64,
    /// `|tau(c) c - I|`.
    pub c_symmetry: f64,
    pub truncation: usize,
}

#[derive(Clone, Debug)]
pub struct IwasawaFactors {
    pub z_tau: LaurentLoop,
    pub y_plus: LaurentLoop,
    pub c: CMat,
    pub b: CMat,
    pub diagnostics: IwasawaDiagnostics,
}

fn tau_matrix(tau: &InvolutionSpec, m: &CMat) -> Result<CMat> {
    tau.automorphism()
        .apply_matrix(m)
        .ok_or_else(|| Error::InvalidArgument("tau image of a singular matrix".into()))
}

fn trim(x: &LaurentLoop, rel: f64) -> LaurentLoop {
    x.trimmed(rel * x.coefficient_mass())
}

/// Iwasawa-type splitting of a loop in `form` against the second-kind `tau`.
/// The Birkhoff step runs at truncation `2m`.
pub fn iwasawa_factor(
    form: &RealFormSpec,
    tau: &InvolutionSpec,
    x: &LaurentLoop,
    m: usize,
    tol: f64,
) -> Result<IwasawaFactors> {
    if x.size() != form.size() {
        return Err(Error::SizeMismatch(form.size(), x.size()));
    }
    form.check_partner(tau)?;
    let input = form.fixed_residual(x);
    if !(input <= tol) {
        return Err(Error::FormViolation {
            residual: input,
            tol,
        });
    }
    let n = x.size();
    let id = LaurentLoop::identity(n);

    let tx_inv = tau.apply(x)?.invert_auto(1e-3 * tol)?;
    let u = trim(&tx_inv.multiply(x)?, 1e-17);
    let u_symmetry = tau.apply(&u)?.multiply(&u)?.sub(&id)?.sup_norm();
    if !(u_symmetry <= 10.0 * tol) {
        return Err(Error::SymmetryResidual {
            stage: "obstruction loop",
            residual: u_symmetry,
            bound: 10.0 * tol,
        });
    }

    let w = birkhoff_factor(&u, 2 * m, 0.1 * tol).map_err(|e| Error::BirkhoffSingular(Box::new(e)))?;

    let c = tau_matrix(tau, &w.x_plus.coeff_or_zero(0))?;
    let c_symmetry = linalg::op_norm(&(tau_matrix(tau, &c)? * &c - linalg::identity(n)));
    if !(c_symmetry <= 10.0 * tol) {
        return Err(Error::SymmetryResidual {
            stage: "constant obstruction",
            residual: c_symmetry,
            bound: 10.0 * tol,
        });
    }

    let big_x = linalg::logm_principal(&c)?;
    let skew = linalg::op_norm(&(tau.automorphism().apply_algebra_matrix(&big_x) + &big_x));
    let skew_bound = tol * linalg::op_norm(&big_x).max(1.0);
    if !(skew <= skew_bound) {
        return Err(Error::SymmetryResidual {
            stage: "logarithm",
            residual: skew,
            bound: skew_bound,
        });
    }
    let b = linalg::expm(&(&big_x * C64::new(0.5, 0.0)));

    let y_plus = trim(&w.x_plus.left_mul_const(&b), 1e-17);
    let z_tau = trim(&x.multiply(&y_plus.invert_auto(1e-3 * tol)?)?, 1e-17);
    finish(x, tau, z_tau, y_plus, c, b, u_symmetry, c_symmetry, m, tol)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    x: &LaurentLoop,
    tau: &InvolutionSpec,
    z_tau: LaurentLoop,
    y_plus: LaurentLoop,
    c: CMat,
    b: CMat,
    u_symmetry: f64,
    c_symmetry: f64,
    m: usize,
    tol: f64,
) -> Result<IwasawaFactors> {
    let residual = x.sub(&z_tau.multiply(&y_plus)?)?.sup_norm();
    if !(residual <= tol) {
        return Err(Error::ResidualTooLarge {
            residual,
            tol,
            truncation: m,
        });
    }
    let z_fixed_residual = tau.fixed_residual(&z_tau);
    if !(z_fixed_residual <= tol) {
        return Err(Error::SymmetryResidual {
            stage: "fixed point",
            residual: z_fixed_residual,
            bound: tol,
        });
    }
    Ok(IwasawaFactors {
        z_tau,
        y_plus,
        c,
        b,
        diagnostics: IwasawaDiagnostics {
            residual,
            z_fixed_residual,
            u_symmetry,
            c_symmetry,
            truncation: m,
        },
    })
}

/// Tolerance on the `tau`-invariance of the coset correction.
pub const CANONICAL_TOL: f64 = 1e-8;

/// Moves `fac` to the canonical representative of its coset: the constant
/// term `Y` of `y_+` is replaced by `exp(log(tau(Y)^{-1} Y) / 2)`, which
/// depends only on the coset. Factorizations produced by
/// [`iwasawa_factor`] are already canonical.
pub fn coset_representative(tau: &InvolutionSpec, fac: &IwasawaFactors) -> Result<IwasawaFactors> {
    let n = fac.y_plus.size();
    let y0 = fac.y_plus.coeff_or_zero(0);
    let y0_inv = linalg::inverse(&y0).ok_or(Error::NonCanonical(f64::INFINITY))?;
    let ty0_inv = linalg::inverse(&tau_matrix(tau, &y0)?).ok_or(Error::NonCanonical(f64::INFINITY))?;
    let w = ty0_inv * &y0;
    let log_w = linalg::logm_principal(&w).map_err(|_| Error::NonCanonical(f64::INFINITY))?;
    let yc = linalg::expm(&(log_w * C64::new(0.5, 0.0)));
    let h = &yc * y0_inv;
    let dev = linalg::op_norm(&(tau_matrix(tau, &h)? - &h));
    if !(dev <= CANONICAL_TOL * linalg::op_norm(&h).max(1.0)) {
        return Err(Error::NonCanonical(dev));
    }
    let h_inv = linalg::inverse(&h).ok_or(Error::NonCanonical(f64::INFINITY))?;
    let b = linalg::inverse(&yc).unwrap_or_else(|| linalg::identity(n));
    Ok(IwasawaFactors {
        z_tau: fac.z_tau.right_mul_const(&h_inv),
        y_plus: fac.y_plus.left_mul_const(&h),
        c: fac.c.clone(),
        b,
        diagnostics: fac.diagnostics.clone(),
    })
}

fn comparison_points(a: &LaurentLoop, b: &LaurentLoop) -> Vec<C64> {
    let len = a.window().hull(&b.window()).len();
    let count = (4 * len).max(16);
    (0..count)
        .map(|j| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / count as f64))
        .collect()
}

/// Returns the constant `h` with `fac2.z_tau = fac1.z_tau h`, checking that
/// it is independent of the loop parameter and fixed by `tau`.
pub fn verify_uniqueness(
    tau: &InvolutionSpec,
    x: &LaurentLoop,
    fac1: &IwasawaFactors,
    fac2: &IwasawaFactors,
) -> Result<CMat> {
    for f in [fac1, fac2] {
        let r = x.sub(&f.z_tau.multiply(&f.y_plus)?)?.sup_norm();
        if r > 1e-6 * x.sup_norm().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "factors do not reproduce the loop (residual {r:.3e})"
            )));
        }
    }
    let points = comparison_points(&fac1.z_tau, &fac2.z_tau);
    let hs = points
        .iter()
        .map(|&l| {
            linalg::inverse(&fac1.z_tau.eval(l))
                .map(|inv| inv * fac2.z_tau.eval(l))
                .ok_or(Error::NotConstant(f64::INFINITY))
        })
        .collect::<Result<Vec<_>>>()?;
    let h = hs[0].clone();
    let spread = hs
        .iter()
        .map(|hj| linalg::op_norm(&(hj - &h)))
        .fold(0.0, f64::max);
    let scale = linalg::op_norm(&h).max(1.0);
    if spread > 1e-8 * scale {
        return Err(Error::NotConstant(spread));
    }
    let asym = linalg::op_norm(&(tau_matrix(tau, &h)? - &h));
    if asym > 1e-8 * scale {
        return Err(Error::NotConstant(asym));
    }
    Ok(h)
}

/// Distance between the cosets `z2 H0` and `z3 H0`: with `h` the value of
/// `z2^{-1} z3` at `lambda = 1`, returns
/// `max_j |z3(l_j) - z2(l_j) h| + |tau(h) - h|` over circle samples.
pub fn coset_distance(tau: &InvolutionSpec, z2: &LaurentLoop, z3: &LaurentLoop) -> f64 {
    let one = C64::new(1.0, 0.0);
    let Some(h) = linalg::inverse(&z2.eval(one)).map(|inv| inv * z3.eval(one)) else {
        return f64::INFINITY;
    };
    let spread = comparison_points(z2, z3)
        .iter()
        .map(|&l| linalg::op_norm(&(z3.eval(l) - z2.eval(l) * &h)))
        .fold(0.0, f64::max);
    match tau.automorphism().apply_matrix(&h) {
        Some(th) => spread + linalg::op_norm(&(th - &h)),
        None => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::involutions::curved_flat_form;

    fn rotation4(theta: f64) -> CMat {
        let (s, c) = theta.sin_cos();
        linalg::from_real(4, &[c, -s, 0.0, 0.0, s, c, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0])
    }

    #[test]
    fn tau_fixed_input_splits_trivially() {
        let form = curved_flat_form(2, 1).unwrap();
        let tau = form.tau().unwrap().clone();
        let x = LaurentLoop::constant(rotation4(0.4));
        let f = iwasawa_factor(&form, &tau, &x, 6, 1e-10).unwrap();
        assert!(f.y_plus.coeff_distance(&LaurentLoop::identity(4)) < 1e-12);
        assert!(f.z_tau.coeff_distance(&x) < 1e-12);
    }

    #[test]
    fn constant_input_reduces_to_finite_split() {
        let form = curved_flat_form(2, 1).unwrap();
        let tau = form.tau().unwrap().clone();
        // real orthogonal, commutes with P but not with Q
        let (s, c) = 0.7f64.sin_cos();
        let g = linalg::from_real(4, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, c, -s, 0.0, 0.0, s, c]);
        let x = LaurentLoop::constant(g.clone());
        let f = iwasawa_factor(&form, &tau, &x, 6, 1e-10).unwrap();
        let tg_inv = linalg::inverse(&tau_matrix(&tau, &g).unwrap()).unwrap();
        let root = linalg::expm(&(linalg::logm_principal(&(tg_inv * &g)).unwrap() * C64::new(0.5, 0.0)));
        // g = z root with z tau-fixed; the algorithm's b is root^{-1}
        assert!(f.y_plus.coeff_distance(&LaurentLoop::constant(root.clone())) < 1e-10);
        assert!(linalg::frobenius(&(&f.b * &root - linalg::identity(4))) < 1e-10);
    }

    #[test]
    fn random_loop_splits_and_is_canonical() {
        let form = curved_flat_form(2, 1).unwrap();
        let tau = form.tau().unwrap().clone();
        let x = form.random_loop(2, 0.5, 21).unwrap();
        let f = iwasawa_factor(&form, &tau, &x, 12, 1e-8).unwrap();
        assert!(f.diagnostics.residual <= 1e-8);
        assert!(f.diagnostics.z_fixed_residual <= 1e-8);
        let tc = tau_matrix(&tau, &f.c).unwrap();
        assert!(linalg::op_norm(&(tc * &f.c - linalg::identity(4))) < 1e-9);
        let g = coset_representative(&tau, &f).unwrap();
        assert!(g.z_tau.coeff_distance(&f.z_tau) < 1e-10);

        let h0 = rotation4(1.1);
        let moved = IwasawaFactors {
            z_tau: f.z_tau.right_mul_const(&h0),
            y_plus: f.y_plus.left_mul_const(&h0.transpose()),
            ..f.clone()
        };
        let h = verify_uniqueness(&tau, &x, &f, &moved).unwrap();
        assert!(linalg::op_norm(&(h - &h0)) < 1e-9);
        let back = coset_representative(&tau, &moved).unwrap();
        assert!(back.z_tau.coeff_distance(&f.z_tau) < 1e-8);
        assert!(coset_distance(&tau, &f.z_tau, &moved.z_tau) < 1e-9);
    }
}
