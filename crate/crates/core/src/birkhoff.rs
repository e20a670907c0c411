//! Birkhoff factorization `x = x_- x_+` with `x_-(inf) = I`.
//!
//! The inverse `Z = x_-^{-1} = I + sum_{j=1}^m Z_{-j} lambda^{-j}` is found by
//! requiring every negative-degree coefficient of `Z x` to vanish. That is a
//! tall block-Toeplitz system in the unknowns `Z_{-j}`, solved in the least
//! squares sense through an SVD whose smallest singular value doubles as the
//! big-cell certificate.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::involutions::RealFormSpec;
use crate::linalg::{self, CMat, C64};
use crate::loops::{LaurentLoop, Window};

/// Relative threshold on the smallest Toeplitz singular value.
pub const BIG_CELL_THRESHOLD: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellReport {
    pub in_big_cell: bool,
    pub det_winding: i64,
    pub smallest_singular_value: f64,
    /// `smallest_singular_value` divided by the sup-norm of the input.
    pub relative_singular_value: f64,
    pub truncation: usize,
}

impl fmt::Display for CellReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "in_big_cell={} det_winding={} smin={:.3e} (relative {:.3e}) m={}",
            self.in_big_cell,
            self.det_winding,
            self.smallest_singular_value,
            self.relative_singular_value,
            self.truncation
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostics {
    pub residual: f64,
    pub smin: f64,
    pub condition: f64,
    pub winding: i64,
    pub truncation: usize,
    /// Form-membership residuals, filled in by [`factor_in_form`].
    pub minus_form_residual: Option<f64>,
    pub plus_form_residual: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct BirkhoffFactors {
    pub x_minus: LaurentLoop,
    pub x_plus: LaurentLoop,
    /// Partial indices; all zero on the big-cell path.
    pub indices: Vec<i64>,
    pub diagnostics: Diagnostics,
}

struct ToeplitzSolve {
    z: LaurentLoop,
    smin: f64,
    smax: f64,
}

/// Assembles and solves the transposed system
/// `sum_j x_{j-e}^T Z_{-j}^T = -x_{-e}^T` for `e = 1..=m+p`.
fn solve_toeplitz(x: &LaurentLoop, m: usize) -> ToeplitzSolve {
    let n = x.size();
    let p = (-x.window().min).max(0) as usize;
    let rows = (m + p) * n;
    let cols = m * n;
    let mut a = CMat::zeros(rows, cols);
    let mut b = CMat::zeros(rows, n);
    for e in 1..=(m + p) {
        let r0 = (e - 1) * n;
        if let Some(c) = x.coeff(-(e as i64)) {
            b.view_mut((r0, 0), (n, n)).copy_from(&(-c.transpose()));
        }
        for j in 1..=m {
            if let Some(c) = x.coeff(j as i64 - e as i64) {
                a.view_mut((r0, (j - 1) * n), (n, n)).copy_from(&c.transpose());
            }
        }
    }
    let svd = a.svd(true, true);
    let sv = &svd.singular_values;
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let sol = svd.solve(&b, 0.0).expect("u and v were computed");
    let mut coeffs = Vec::with_capacity(m + 1);
    for j in (1..=m).rev() {
        coeffs.push(sol.view(((j - 1) * n, 0), (n, n)).transpose());
    }
    coeffs.push(linalg::identity(n));
    let z = LaurentLoop::new(n, -(m as i64), coeffs).expect("finite solution");
    ToeplitzSolve { z, smin, smax }
}

fn report(x: &LaurentLoop, m: usize, smin: f64, winding: i64) -> CellReport {
    let scale = x.sup_norm().max(f64::MIN_POSITIVE);
    let relative = smin / scale;
    CellReport {
        in_big_cell: relative >= BIG_CELL_THRESHOLD && winding == 0,
        det_winding: winding,
        smallest_singular_value: smin,
        relative_singular_value: relative,
        truncation: m,
    }
}

/// Big-cell diagnostic at truncation `m`.
pub fn certify_big_cell(x: &LaurentLoop, m: usize) -> Result<CellReport> {
    if m == 0 {
        return Err(Error::InvalidArgument("truncation must be >= 1".into()));
    }
    let winding = x.winding_det()?;
    let solve = solve_toeplitz(x, m);
    Ok(report(x, m, solve.smin, winding))
}

fn factor_once(x: &LaurentLoop, m: usize, tol: f64) -> Result<BirkhoffFactors> {
    let n = x.size();
    let winding = x.winding_det()?;
    let solve = solve_toeplitz(x, m);
    let cell = report(x, m, solve.smin, winding);
    if !cell.in_big_cell {
        return Err(Error::NotInBigCell(Box::new(cell)));
    }
    let zx = solve.z.multiply(x)?;
    let top = zx.window().max.max(0);
    let (x_plus, _) = zx.truncate(Window::new(0, top), f64::INFINITY)?;
    let mut x_minus = match solve
        .z
        .invert_within(Some(Window::new(-(m as i64), 0)), 0.1 * tol)
    {
        Ok(y) => y,
        Err(Error::TruncationResidual { achieved, .. }) => {
            return Err(Error::ResidualTooLarge {
                residual: achieved,
                tol,
                truncation: m,
            })
        }
        Err(e) => return Err(e),
    };
    if !x_minus.window().contains(0) {
        let w = x_minus.window().hull(&Window::new(0, 0));
        x_minus = x_minus.truncate(w, 0.0)?.0;
    }
    x_minus.set_coeff(0, linalg::identity(n));
    let residual = x.sub(&x_minus.multiply(&x_plus)?)?.sup_norm();
    if !(residual <= tol) {
        return Err(Error::ResidualTooLarge {
            residual,
            tol,
            truncation: m,
        });
    }
    let condition = if solve.smin > 0.0 {
        solve.smax / solve.smin
    } else {
        f64::INFINITY
    };
    Ok(BirkhoffFactors {
        x_minus,
        x_plus,
        indices: vec![0; n],
        diagnostics: Diagnostics {
            residual,
            smin: solve.smin,
            condition,
            winding,
            truncation: m,
            minus_form_residual: None,
            plus_form_residual: None,
        },
    })
}

/// Factors `x = x_- x_+`. On `ResidualTooLarge` the factorization is retried
/// exactly once at truncation `2m`.
pub fn birkhoff_factor(x: &LaurentLoop, m: usize, tol: f64) -> Result<BirkhoffFactors> {
    if m == 0 {
        return Err(Error::InvalidArgument("truncation must be >= 1".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    match factor_once(x, m, tol) {
        Err(Error::ResidualTooLarge { .. }) => factor_once(x, 2 * m, tol),
        other => other,
    }
}

/// Birkhoff factorization of a loop in `form`, certifying that both
/// factors stay in the form within `10 * tol`.
pub fn factor_in_form(
    form: &RealFormSpec,
    x: &LaurentLoop,
    m: usize,
    tol: f64,
) -> Result<BirkhoffFactors> {
    if x.size() != form.size() {
        return Err(Error::SizeMismatch(form.size(), x.size()));
    }
    let input = form.fixed_residual(x);
    if !(input <= tol) {
        return Err(Error::FormViolation {
            residual: input,
            tol,
        });
    }
    let bound = 10.0 * tol;
    let mut truncation = m;
    for attempt in 0..2 {
        let mut f = birkhoff_factor(x, truncation, tol)?;
        let minus = form.fixed_residual(&f.x_minus);
        let plus = form.fixed_residual(&f.x_plus);
        f.diagnostics.minus_form_residual = Some(minus);
        f.diagnostics.plus_form_residual = Some(plus);
        if minus <= bound && plus <= bound {
            return Ok(f);
        }
        if attempt == 1 {
            return Err(Error::FactorFormViolation { minus, plus, bound });
        }
        truncation = 2 * f.diagnostics.truncation;
    }
    unreachable!()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

/// `gamma_t(lambda) = x(t lambda)` for `Side::Plus` and `x(lambda / t)` for
/// `Side::Minus`; contracts a one-sided loop onto its constant term.
pub fn retraction(x: &LaurentLoop, t: f64, side: Side) -> Result<LaurentLoop> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("t = {t} must lie in [0, 1]")));
    }
    let w = x.window();
    let one_sided = match side {
        Side::Plus => w.min >= 0,
        Side::Minus => w.max <= 0,
    };
    if !one_sided {
        return Err(Error::WrongSidedInput);
    }
    if t == 1.0 {
        return Ok(x.clone());
    }
    if t == 0.0 {
        return Ok(LaurentLoop::constant(x.coeff_or_zero(0)));
    }
    Ok(x.map_coeffs(|d, c| c * C64::new(t.powi(d.unsigned_abs() as i32), 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::involutions::{curved_flat_form, unitary_form};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn identity_factors_trivially() {
        let id = LaurentLoop::identity(3);
        let f = birkhoff_factor(&id, 4, 1e-12).unwrap();
        assert_eq!(f.diagnostics.residual, 0.0);
        assert!(f.x_minus.coeff_distance(&id) == 0.0);
        assert!(f.x_plus.coeff_distance(&id) == 0.0);
    }

    #[test]
    fn plus_loop_has_trivial_minus_factor() {
        let a = CMat::from_fn(2, 2, |i, j| c(0.2 * (i + j) as f64, 0.1));
        let x = LaurentLoop::from_terms(2, &[(0, linalg::identity(2)), (1, a), (2, linalg::identity(2) * c(0.1, 0.0))]).unwrap();
        let f = birkhoff_factor(&x, 6, 1e-12).unwrap();
        assert!(f.x_minus.coeff_distance(&LaurentLoop::identity(2)) < 1e-14);
        assert!(f.x_plus.coeff_distance(&x) < 1e-14);
    }

    #[test]
    fn monomial_loops_are_not_in_the_big_cell() {
        let x = LaurentLoop::diagonal_monomials(&[1, -1]);
        match birkhoff_factor(&x, 8, 1e-10) {
            Err(Error::NotInBigCell(r)) => {
                assert_eq!(r.det_winding, 0);
                assert!(!r.in_big_cell);
            }
            other => panic!("unexpected {other:?}"),
        }
        let r = certify_big_cell(&LaurentLoop::diagonal_monomials(&[2, 0]), 8).unwrap();
        assert!(!r.in_big_cell);
        assert_eq!(r.det_winding, 2);
    }

    #[test]
    fn identity_is_certified() {
        let r = certify_big_cell(&LaurentLoop::identity(2), 4).unwrap();
        assert!(r.in_big_cell);
        assert_eq!(r.det_winding, 0);
    }

    #[test]
    fn unitary_loop_factors_in_form() {
        let form = unitary_form(2, 1).unwrap();
        let x = form.random_loop(3, 0.8, 5).unwrap();
        let f = factor_in_form(&form, &x, 16, 1e-9).unwrap();
        assert!(f.diagnostics.residual <= 1e-9);
        assert!(f.diagnostics.minus_form_residual.unwrap() <= 1e-8);
        assert!(f.diagnostics.plus_form_residual.unwrap() <= 1e-8);
        assert_eq!(f.x_minus.coeff(0).unwrap(), &linalg::identity(2));
    }

    #[test]
    fn form_violation_is_rejected() {
        let form = unitary_form(2, 1).unwrap();
        let x = LaurentLoop::constant(linalg::identity(2) * c(2.0, 0.0));
        assert!(matches!(
            factor_in_form(&form, &x, 4, 1e-9),
            Err(Error::FormViolation { .. })
        ));
    }

    #[test]
    fn retraction_laws() {
        let form = curved_flat_form(2, 1).unwrap();
        let x = form.random_loop(2, 0.5, 9).unwrap();
        let f = factor_in_form(&form, &x, 12, 1e-8).unwrap();
        let xp = &f.x_plus;
        assert_eq!(&retraction(xp, 1.0, Side::Plus).unwrap(), xp);
        let g0 = retraction(xp, 0.0, Side::Plus).unwrap();
        assert_eq!(g0.coeff(0), xp.coeff(0));
        assert_eq!(g0.window(), Window::new(0, 0));
        let g = retraction(xp, 0.5, Side::Plus).unwrap();
        assert!(form.fixed_residual(&g) <= 1e-8);
        assert!(matches!(retraction(&x, 0.5, Side::Plus), Err(Error::WrongSidedInput)));
        assert!(retraction(&f.x_minus, 0.5, Side::Minus).is_ok());
    }
}
