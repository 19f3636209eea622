//! Bulk spectrum of `γ ⊠ L_T` with `γ = (1/δ)δ₁ + (1 − 1/δ)δ₀`.
//!
//! For `Im z < 0` the reciprocal subordination value `τ = τ_T(z)` is the
//! unique root of `Λ(τ) = z` in the lower half-plane, and
//! `G(z) = (1 − 1/δ) τ / (z (τ − z))`. `G` includes the atom of mass
//! `1 − 1/δ` at zero; the density on `x > 0` integrates to `1/δ`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::theory;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BulkSupport {
    pub lambda_l: f64,
    pub tau_l: f64,
    pub lambda_r: f64,
    pub tau_r: f64,
}

/// Support `[λ_l, λ_r]` from the extrema of `Λ` on `(−∞, 0]` and `[1, ∞)`.
pub fn bulk_support(m: &Model) -> Result<BulkSupport> {
    let (tau_r, lambda_r) = theory::find_tau_r(m)?;
    let sv = *m.solver();
    // Λ is concave on (−∞, 0] with slope 1/δ at −∞.
    let d0 = theory::lambda_prime(m, 0.0)?;
    let (tau_l, lambda_l) = if d0 >= 0.0 {
        (0.0, theory::lambda(m, 0.0)?)
    } else {
        let (mut lo, mut hi) = (-1.0, 0.0);
        loop {
            if theory::lambda_prime(m, lo)? > 0.0 {
                break;
            }
            hi = lo;
            lo *= 2.0;
            if lo < -sv.max_bracket {
                return Err(Error::Solver("maximum of Lambda on (-inf, 0] not bracketed".into()));
            }
        }
        let mut iters = 0;
        while hi - lo > sv.width * lo.abs().max(1.0) {
            let mid = 0.5 * (lo + hi);
            let d = theory::lambda_prime(m, mid)?;
            if d.abs() < sv.residual {
                lo = mid;
                hi = mid;
                break;
            }
            if d > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            iters += 1;
            if iters > 200 {
                return Err(Error::Solver("bisection for tau_l stalled".into()));
            }
        }
        let t = 0.5 * (lo + hi);
        (t, theory::lambda(m, t)?)
    };
    Ok(BulkSupport { lambda_l, tau_l, lambda_r, tau_r })
}

/// Real `τ` with `Λ(τ) = x` on the increasing branch outside `[τ_l, τ_r]`,
/// for `x > λ_r` or `x < λ_l`.
pub fn real_preimage(m: &Model, support: &BulkSupport, x: f64) -> Result<f64> {
    let (lo, hi) = if x > support.lambda_r {
        let mut hi = support.tau_r + 1.0;
        while theory::lambda(m, hi)? < x {
            hi = support.tau_r + 2.0 * (hi - support.tau_r);
            if hi > 1e12 {
                return Err(Error::Solver(format!("no preimage of {x} above tau_r")));
            }
        }
        (support.tau_r, hi)
    } else if x < support.lambda_l {
        let mut lo = support.tau_l - 1.0;
        while theory::lambda(m, lo)? > x {
            lo = support.tau_l - 2.0 * (support.tau_l - lo);
            if lo < -1e12 {
                return Err(Error::Solver(format!("no preimage of {x} below tau_l")));
            }
        }
        (lo, support.tau_l)
    } else {
        return Err(Error::Domain(format!("{x} lies inside the bulk")));
    };
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-15 * mid.abs().max(1.0) {
            break;
        }
        if theory::lambda(m, mid)? < x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `E[G], E[G²], E[TG]` at complex `τ`.
fn complex_moments(m: &Model, tau: Complex64) -> Result<[Complex64; 3]> {
    let r = m.integrate(|_, t| {
        let g = (tau - t).inv();
        let g2 = g * g;
        let tg = g * t;
        [g.re, g.im, g2.re, g2.im, tg.re, tg.im]
    })?;
    let v = r.value;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Solver(format!("divergent moments at complex tau = {tau}")));
    }
    Ok([
        Complex64::new(v[0], v[1]),
        Complex64::new(v[2], v[3]),
        Complex64::new(v[4], v[5]),
    ])
}

/// `Λ(τ)` and `Λ′(τ)` at complex `τ`.
pub fn lambda_complex(m: &Model, tau: Complex64) -> Result<(Complex64, Complex64)> {
    let delta = m.delta();
    let [g, g2, tg] = complex_moments(m, tau)?;
    let a = 1.0 - 1.0 / delta;
    Ok((tau / delta + tg / g * a, Complex64::new(1.0, 0.0) - g2 / (g * g) * a))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubordinationPoint {
    pub z: Complex64,
    pub tau_t: Complex64,
    pub cauchy: Complex64,
    pub residual: f64,
    pub iterations: usize,
}

impl SubordinationPoint {
    /// `G(z)` minus the zero atom `(1 − 1/δ)/z`.
    pub fn continuous_cauchy(&self, delta: f64) -> Complex64 {
        self.cauchy - (1.0 - 1.0 / delta) / self.z
    }
}

fn cauchy_from(delta: f64, z: Complex64, tau: Complex64) -> Complex64 {
    tau * (1.0 - 1.0 / delta) / (z * (tau - z))
}

fn residual_tol(z: Complex64) -> f64 {
    1e-10 * z.norm().max(1.0)
}

const MAX_NEWTON: usize = 200;

/// Damped Newton for `Λ(τ) = z` keeping `Im τ` on the side of `Im z`.
fn newton(m: &Model, z: Complex64, seed: Complex64) -> Result<(Complex64, f64, usize)> {
    let side = z.im.signum();
    let mut tau = seed;
    if tau.im * side <= 0.0 {
        tau.im = side * tau.im.abs().max(1e-3 * z.im.abs());
    }
    let (mut lam, mut dlam) = lambda_complex(m, tau)?;
    let mut res = (lam - z).norm();
    let tol = residual_tol(z);
    for it in 0..MAX_NEWTON {
        if res < tol {
            return Ok((tau, res, it));
        }
        let step = (lam - z) / dlam;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..50 {
            let cand = tau - step * t;
            if cand.im * side > 0.0 {
                let (l, d) = lambda_complex(m, cand)?;
                let r = (l - z).norm();
                if r < res {
                    tau = cand;
                    lam = l;
                    dlam = d;
                    res = r;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if res < tol {
        return Ok((tau, res, MAX_NEWTON));
    }
    Err(Error::Solver(format!("subordination Newton at z = {z} stopped with residual {res:e}")))
}

/// Imaginary-part levels of the continuation path towards `|Im z|`.
fn homotopy_levels(eps: f64) -> Vec<f64> {
    let mut levels: Vec<f64> = [10.0, 3.0, 1.0, 0.3, 0.1, 0.03, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8]
        .into_iter()
        .filter(|&y| y > eps)
        .collect();
    levels.push(eps);
    levels
}

/// Solves `Λ(τ) = z` for `Im z ≠ 0`, continuing from `Im = ±10` down to `Im z`.
/// For `Im z > 0` the solution is sought in the upper half-plane directly.
pub fn subordinate(m: &Model, z: Complex64) -> Result<SubordinationPoint> {
    if z.im == 0.0 || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Domain(format!("subordination needs Im z != 0, got {z}")));
    }
    let delta = m.delta();
    let side = z.im.signum();
    let et = m.expect(|_, t| t)?;
    let levels = homotopy_levels(z.im.abs());
    let z0 = Complex64::new(z.re, side * levels[0]);
    // Λ(τ) ≈ τ/δ + (1 − 1/δ) E[T] for large |τ|
    let mut tau = z0 * delta - (delta - 1.0) * et;
    let mut iterations = 0;
    let mut residual = 0.0;
    for &y in &levels {
        let zy = Complex64::new(z.re, side * y);
        let (t, r, it) = newton(m, zy, tau)?;
        tau = t;
        residual = r;
        iterations += it;
    }
    Ok(SubordinationPoint { z, tau_t: tau, cauchy: cauchy_from(delta, z, tau), residual, iterations })
}

/// Warm-started solve from a nearby solution `seed`; falls back to the full
/// continuation when Newton fails.
pub fn subordinate_from(m: &Model, z: Complex64, seed: Complex64) -> Result<SubordinationPoint> {
    if z.im == 0.0 {
        return Err(Error::Domain(format!("subordination needs Im z != 0, got {z}")));
    }
    match newton(m, z, seed) {
        Ok((tau, residual, iterations)) => Ok(SubordinationPoint {
            z,
            tau_t: tau,
            cauchy: cauchy_from(m.delta(), z, tau),
            residual,
            iterations,
        }),
        Err(_) => subordinate(m, z),
    }
}

/// ε-schedule of the Stieltjes inversion.
pub const EPS_SCHEDULE: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];

#[derive(Debug, Clone, PartialEq)]
pub struct BulkSpectrum {
    pub lambda_l: f64,
    pub lambda_r: f64,
    pub tau_l: f64,
    pub tau_r: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    /// Per-point flag; unconverged points carry density 0.
    pub converged: Vec<bool>,
    pub outlier: Option<f64>,
}

impl BulkSpectrum {
    /// Trapezoid integral of the density over the grid.
    pub fn mass(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, r)| 0.5 * (x[1] - x[0]) * (r[0] + r[1]))
            .sum()
    }
}

/// `(1/π) Im G(x − iε)` along [`EPS_SCHEDULE`] with the zero atom removed,
/// extrapolated linearly in `ε` from the two smallest values.
fn density_at(m: &Model, x: f64) -> Result<f64> {
    let mut vals = [0.0; EPS_SCHEDULE.len()];
    let mut seed: Option<Complex64> = None;
    for (k, &eps) in EPS_SCHEDULE.iter().enumerate() {
        let z = Complex64::new(x, -eps);
        let p = match seed {
            None => subordinate(m, z)?,
            Some(s) => subordinate_from(m, z, s)?,
        };
        seed = Some(p.tau_t);
        vals[k] = p.continuous_cauchy(m.delta()).im / std::f64::consts::PI;
    }
    let k = EPS_SCHEDULE.len() - 1;
    let (e1, e2) = (EPS_SCHEDULE[k - 1], EPS_SCHEDULE[k]);
    Ok((e1 * vals[k] - e2 * vals[k - 1]) / (e1 - e2))
}

/// Density of the continuous part on `grid` (all points must be positive).
pub fn bulk_density(m: &Model, grid: &[f64]) -> Result<BulkSpectrum> {
    if let Some(&x) = grid.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::Domain(format!("density grid points must be positive, got {x}")));
    }
    let sup = bulk_support(m)?;
    let pts: Vec<Option<f64>> = grid.par_iter().map(|&x| density_at(m, x).ok()).collect();
    Ok(BulkSpectrum {
        lambda_l: sup.lambda_l,
        lambda_r: sup.lambda_r,
        tau_l: sup.tau_l,
        tau_r: sup.tau_r,
        grid: grid.to_vec(),
        density: pts.iter().map(|p| p.unwrap_or(0.0).max(0.0)).collect(),
        converged: pts.iter().map(Option::is_some).collect(),
        outlier: None,
    })
}

/// Location `Λ(θ)` of the eigenvalue produced by a spike `θ` outside `[τ_l, τ_r]`.
pub fn outlier_location(m: &Model, support: &BulkSupport, theta: f64) -> Result<Option<f64>> {
    if theta >= support.tau_l && theta <= support.tau_r {
        return Ok(None);
    }
    Ok(Some(theory::lambda(m, theta)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::QuadratureSettings;
    use crate::trimmer::TrimmingFunction;

    fn mm3() -> Model {
        Model::for_theory(TrimmingFunction::mm(3.0).unwrap(), 3.0, QuadratureSettings::default()).unwrap()
    }

    #[test]
    fn constant_trimmer_cauchy_is_two_atoms() {
        let (c, delta) = (0.4, 2.0);
        let m = Model::for_theory(TrimmingFunction::constant(c).unwrap(), delta, QuadratureSettings::default())
            .unwrap();
        let z = Complex64::new(0.7, -0.3);
        let p = subordinate(&m, z).unwrap();
        let exact = (1.0 / delta) / (z - c) + (1.0 - 1.0 / delta) / z;
        assert!((p.cauchy - exact).norm() < 1e-10);
    }

    #[test]
    fn support_ordering() {
        let m = mm3();
        let s = bulk_support(&m).unwrap();
        assert!(s.lambda_l >= 0.0);
        assert!(s.tau_l <= 0.0 && s.tau_r >= 1.0);
        assert!(s.lambda_r >= s.lambda_l + 1.0 / 3.0);
    }

    #[test]
    fn outlier_map() {
        let m = mm3();
        let s = bulk_support(&m).unwrap();
        assert_eq!(outlier_location(&m, &s, 0.5 * (s.tau_l + s.tau_r)).unwrap(), None);
        let out = outlier_location(&m, &s, s.tau_r + 1.0).unwrap().unwrap();
        assert!(out > s.lambda_r);
    }

    #[test]
    fn rejects_real_axis() {
        let m = mm3();
        assert!(matches!(subordinate(&m, Complex64::new(1.0, 0.0)), Err(Error::Domain(_))));
        assert!(bulk_density(&m, &[0.0, 1.0]).is_err());
    }
}
