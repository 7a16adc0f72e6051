//! Kepler's equation in the elliptic form `xi - e sin xi = ell` and the
//! degenerate `e = 1` form `xi - sin xi = x` used along radial orbits.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-14;
pub const MAX_ITER: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeplerSolution {
    pub xi: f64,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexKeplerSolution {
    pub xi: Complex64,
    pub residual: f64,
    pub iterations: usize,
}

/// Newton with a bisection safeguard on the bracket `[lo, hi]`.
/// `f` must be increasing on the bracket.
fn safeguarded_root(f: impl Fn(f64) -> (f64, f64), mut lo: f64, mut hi: f64, guess: f64, tol: f64) -> Result<KeplerSolution> {
    let mut x = guess.clamp(lo, hi);
    for it in 1..=MAX_ITER {
        let (v, dv) = f(x);
        if v.abs() <= tol {
            return Ok(KeplerSolution { xi: x, residual: v.abs(), iterations: it });
        }
        if v > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let step = x - v / dv;
        x = if dv > 0.0 && step > lo && step < hi { step } else { 0.5 * (lo + hi) };
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            let r = f(x).0.abs();
            if r <= tol {
                return Ok(KeplerSolution { xi: x, residual: r, iterations: it });
            }
        }
    }
    let r = f(x).0.abs();
    if r <= tol {
        Ok(KeplerSolution { xi: x, residual: r, iterations: MAX_ITER })
    } else {
        Err(Error::NoConvergence { iterations: MAX_ITER, residual: r })
    }
}

/// Eccentric anomaly for mean anomaly `ell`, any real `ell`.
pub fn solve_kepler(e: f64, ell: f64, tol: f64) -> Result<KeplerSolution> {
    if !(0.0..1.0).contains(&e) {
        return Err(Error::arg("e", format!("{e} not in [0,1)")));
    }
    if !(tol > 0.0) || !ell.is_finite() {
        return Err(Error::arg("tol", "tolerance must be positive, ell finite"));
    }
    // Reduce to [0, 2pi) so the solution shifts by whole turns.
    let turns = (ell / TAU).floor();
    let m = ell - turns * TAU;
    let f = |x: f64| (x - e * x.sin() - m, 1.0 - e * x.cos());
    let mut sol = safeguarded_root(f, m - e, m + e, m + e * m.sin(), tol)?;
    // The residual must refer to the caller's ell, not the reduced one.
    sol.xi += turns * TAU;
    sol.residual = (sol.xi - e * sol.xi.sin() - ell).abs();
    if sol.residual > tol {
        // only rounding from the shift can get here; re-polish once
        let d = (sol.xi - e * sol.xi.sin() - ell) / (1.0 - e * sol.xi.cos());
        sol.xi -= d;
        sol.residual = (sol.xi - e * sol.xi.sin() - ell).abs();
    }
    Ok(sol)
}

/// Real solution of `xi - sin xi = x` for `x` in `[0, 2pi]`.
pub fn solve_radial(x: f64, tol: f64) -> Result<KeplerSolution> {
    if !(0.0..=TAU).contains(&x) {
        return Err(Error::OutsideStrip { re: x, im: 0.0 });
    }
    // xi - sin xi is increasing, and xi is within pi of x. Near 0 the cubic
    // seed (6x)^(1/3) is much better than x itself.
    let seed = if x < 1.0 {
        (6.0 * x).cbrt()
    } else if x > TAU - 1.0 {
        TAU - (6.0 * (TAU - x)).cbrt()
    } else {
        x + x.sin()
    };
    let f = |xi: f64| (xi - xi.sin() - x, 1.0 - xi.cos());
    safeguarded_root(f, 0.0, TAU, seed, tol)
}

/// Half-width of the admissible strip for a given `eps0`.
fn strip_bounds(eps0: f64) -> (f64, f64) {
    let s = eps0.sqrt();
    (PI - 2.0 * s, s)
}

/// Complex solution of `xi - sin xi = x`, continued from the real solution at
/// `Re x` along a straight segment in `Im x`. `eps0` fixes the strip.
pub fn solve_radial_complex(x: Complex64, eps0: f64, tol: f64) -> Result<ComplexKeplerSolution> {
    if !(eps0 > 0.0 && eps0 < 1.0) {
        return Err(Error::arg("eps0", format!("{eps0} not in (0,1)")));
    }
    let (half_re, half_im) = strip_bounds(eps0);
    if (x.re - PI).abs() > half_re + 1e-15 || x.im.abs() > half_im + 1e-15 {
        return Err(Error::OutsideStrip { re: x.re, im: x.im });
    }
    let base = solve_radial(x.re, tol)?;
    let mut z = Complex64::new(base.xi, 0.0);
    let mut total = base.iterations;
    let pieces = 8;
    for piece in 1..=pieces {
        let target = Complex64::new(x.re, x.im * piece as f64 / pieces as f64);
        let mut converged = false;
        for _ in 0..MAX_ITER {
            total += 1;
            let v = z - z.sin() - target;
            if v.norm() <= tol {
                converged = true;
                break;
            }
            let dv = Complex64::new(1.0, 0.0) - z.cos();
            z -= v / dv;
        }
        if !converged {
            let r = (z - z.sin() - target).norm();
            // tolerance floor for |x| ~ 2pi is a few ulps
            if r > tol.max(8.0 * f64::EPSILON * TAU) {
                return Err(Error::NoConvergence { iterations: total, residual: r });
            }
        }
    }
    let residual = (z - z.sin() - x).norm();
    Ok(ComplexKeplerSolution { xi: z, residual, iterations: total })
}

/// Dispatch helper matching the two argument kinds of the radial form.
pub fn solve_kepler_zero_ecc_form(x: Complex64, eps0: f64, tol: f64) -> Result<ComplexKeplerSolution> {
    if x.im == 0.0 {
        let s = solve_radial(x.re, tol)?;
        return Ok(ComplexKeplerSolution { xi: Complex64::new(s.xi, 0.0), residual: s.residual, iterations: s.iterations });
    }
    solve_radial_complex(x, eps0, tol)
}

/// Smallest `|1 - cos xi'(x)| / eps0` over a `grid_n x grid_n` grid on the
/// complex strip. Measured, never assumed.
pub fn estimate_c0(eps0: f64, grid_n: usize) -> Result<f64> {
    if !(eps0 > 0.0 && eps0 < 1.0) {
        return Err(Error::arg("eps0", format!("{eps0} not in (0,1)")));
    }
    if grid_n < 16 {
        return Err(Error::arg("grid_n", "need at least 16 nodes"));
    }
    let (half_re, half_im) = strip_bounds(eps0);
    let mut best = f64::INFINITY;
    for i in 0..grid_n {
        let re = PI - half_re + 2.0 * half_re * i as f64 / (grid_n - 1) as f64;
        for j in 0..grid_n {
            let im = -half_im + 2.0 * half_im * j as f64 / (grid_n - 1) as f64;
            let s = solve_radial_complex(Complex64::new(re, im), eps0, 1e-13)?;
            let v = (Complex64::new(1.0, 0.0) - s.xi.cos()).norm() / eps0;
            best = best.min(v);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn circular_orbit_is_identity() {
        assert_eq!(solve_kepler(0.0, 1.2, DEFAULT_TOL).unwrap().xi, 1.2);
    }

    #[test]
    fn apocenter_is_fixed() {
        let s = solve_kepler(0.5, PI, DEFAULT_TOL).unwrap();
        assert!((s.xi - PI).abs() < 1e-14);
    }

    #[test]
    fn high_eccentricity_matches_bisection() {
        let oracle = bisect(|x| x - 0.9 * x.sin() - 1.0, 0.0, TAU);
        let s = solve_kepler(0.9, 1.0, DEFAULT_TOL).unwrap();
        assert!((s.xi - oracle).abs() < 1e-13);
        assert!((s.xi - 1.8621).abs() < 1e-4);
    }

    #[test]
    fn whole_turn_shifts_solution() {
        let a = solve_kepler(0.7, 0.3, DEFAULT_TOL).unwrap().xi;
        let b = solve_kepler(0.7, 0.3 + TAU, DEFAULT_TOL).unwrap().xi;
        assert!((b - a - TAU).abs() < 1e-12);
    }

    #[test]
    fn rejects_unbound_eccentricity() {
        assert!(solve_kepler(1.0, 0.5, DEFAULT_TOL).is_err());
    }

    #[test]
    fn radial_form_examples() {
        assert!((solve_radial(PI, DEFAULT_TOL).unwrap().xi - PI).abs() < 1e-15);
        let s = solve_radial(PI / 2.0, DEFAULT_TOL).unwrap();
        let oracle = bisect(|x| x - x.sin() - PI / 2.0, 0.0, TAU);
        assert!((s.xi - oracle).abs() < 1e-13);
        assert!((s.xi - 2.3099).abs() < 1e-4);
        let edge = solve_radial(TAU - 1.0, DEFAULT_TOL).unwrap();
        assert!(1.0 - edge.xi.cos() > 0.0);
    }

    #[test]
    fn complex_form_solves_equation() {
        let x = Complex64::new(2.0, 0.3);
        let s = solve_radial_complex(x, 0.25, 1e-14).unwrap();
        assert!((s.xi - s.xi.sin() - x).norm() < 1e-13);
        // continuity: tiny imaginary part stays near the real root
        let r = solve_radial(2.0, 1e-14).unwrap().xi;
        let s = solve_radial_complex(Complex64::new(2.0, 1e-6), 0.25, 1e-14).unwrap();
        assert!((s.xi.re - r).abs() < 1e-5);
    }

    #[test]
    fn complex_form_rejects_points_off_strip() {
        assert!(matches!(solve_radial_complex(Complex64::new(0.1, 0.0), 0.25, 1e-14), Err(Error::OutsideStrip { .. })));
        assert!(solve_radial_complex(Complex64::new(PI, 0.6), 0.25, 1e-14).is_err());
    }

    #[test]
    fn c0_is_positive_and_grid_stable() {
        let a = estimate_c0(0.25, 64).unwrap();
        let b = estimate_c0(0.25, 128).unwrap();
        assert!(a > 0.0);
        assert!((a - b).abs() / b < 0.05);
        for eps0 in [0.1, 0.9] {
            let c = estimate_c0(eps0, 32).unwrap();
            assert!(c.is_finite() && c > 0.0);
        }
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn residual_small(e in 0.0f64..0.99, ell in 0.0f64..TAU) {
                let s = solve_kepler(e, ell, DEFAULT_TOL).unwrap();
                prop_assert!(s.residual <= 1e-13);
                prop_assert!(s.iterations <= MAX_ITER);
            }

            #[test]
            fn odd_about_pi(e in 0.0f64..0.99, ell in 0.0f64..TAU) {
                let a = solve_kepler(e, ell, DEFAULT_TOL).unwrap().xi;
                let b = solve_kepler(e, TAU - ell, DEFAULT_TOL).unwrap().xi;
                prop_assert!((a + b - TAU).abs() < 1e-12);
            }
        }
    }
}
