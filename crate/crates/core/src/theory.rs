//! Limits of the top eigenvalue and the overlap of the spectral estimator.
//!
//! With `G = 1/(τ − T)` the four functions are
//! `Λ(τ) = τ − (1 − 1/δ)/E[G]`, `ψ₁ = E[SG]/E[G]`, `ψ₂ = E[G²]/E[G]²` and
//! `ψ₃² = E[SG²]/E[G]²`. Where `E[G]` diverges at an endpoint of the range of
//! `T`, `Λ` equals `τ` there and `ψ₁` equals 1.

use crate::error::{Error, Result};
use crate::model::Model;
use crate::quadrature::{Quadrature, QuadratureSettings};
use crate::trimmer::{AffineMap, TrimmingFunction};

/// Expectations `E[G], E[G²], E[SG], E[SG²], E[TG], E[STG]` at real `τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub g: f64,
    pub g2: f64,
    pub sg: f64,
    pub sg2: f64,
    pub tg: f64,
    pub stg: f64,
}

impl Moments {
    pub fn divergent(&self) -> bool {
        self.g.is_infinite()
    }

    /// `τ − 1/E[G]`, written as `E[TG]/E[G]` to avoid cancellation.
    fn shifted_inverse(&self, tau: f64) -> f64 {
        if self.divergent() {
            tau
        } else {
            self.tg / self.g
        }
    }
}

/// Computes [`Moments`] for any `τ` outside the open range of `T`.
pub fn moments(m: &Model, tau: f64) -> Result<Moments> {
    let (lo, hi) = m.trimmer().declared_range();
    if tau > lo && tau < hi || tau.is_nan() {
        return Err(Error::Domain(format!("tau = {tau} lies inside the range ({lo}, {hi}) of T")));
    }
    let above = tau >= hi;
    let r = m.integrate(|s, t| {
        let d = tau - t;
        if d == 0.0 {
            let inf = if above { f64::INFINITY } else { f64::NEG_INFINITY };
            let (tg, stg) = if t == 0.0 { (-1.0, -s) } else { (t.signum() * inf, t.signum() * inf) };
            return [inf, f64::INFINITY, inf, f64::INFINITY, tg, stg];
        }
        let g = 1.0 / d;
        [g, g * g, s * g, s * g * g, t * g, s * t * g]
    })?;
    let [g, g2, sg, sg2, tg, stg] = r.value;
    Ok(Moments { g, g2, sg, sg2, tg, stg })
}

/// `Λ(τ)` for real `τ` outside the open range of `T`.
pub fn lambda(m: &Model, tau: f64) -> Result<f64> {
    Ok(lambda_from(m.delta(), tau, &moments(m, tau)?))
}

fn lambda_from(delta: f64, tau: f64, mo: &Moments) -> f64 {
    tau / delta + (1.0 - 1.0 / delta) * mo.shifted_inverse(tau)
}

/// `Λ′(τ) = 1 − (1 − 1/δ) ψ₂(τ)`. At an endpoint where `ψ₂` is undefined the
/// one-sided limit is approximated just outside the range of `T`.
pub fn lambda_prime(m: &Model, tau: f64) -> Result<f64> {
    let mo = moments(m, tau)?;
    if mo.divergent() {
        let (_, hi) = m.trimmer().declared_range();
        let step = 1e-9 * tau.abs().max(1.0);
        let shifted = if tau >= hi { tau + step } else { tau - step };
        return lambda_prime(m, shifted);
    }
    Ok(1.0 - (1.0 - 1.0 / m.delta()) * mo.g2 / (mo.g * mo.g))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformValues {
    pub tau: f64,
    pub lambda_of_tau: f64,
    pub psi1: f64,
    /// `None` where `E[1/(τ − T)]` diverges.
    pub psi2: Option<f64>,
    pub psi3sq: Option<f64>,
}

fn transforms_from(delta: f64, tau: f64, mo: &Moments) -> TransformValues {
    if mo.divergent() {
        return TransformValues { tau, lambda_of_tau: tau, psi1: 1.0, psi2: None, psi3sq: None };
    }
    let g2 = mo.g * mo.g;
    TransformValues {
        tau,
        lambda_of_tau: lambda_from(delta, tau, mo),
        psi1: mo.sg / mo.g,
        psi2: Some(mo.g2 / g2),
        psi3sq: Some(mo.sg2 / g2),
    }
}

fn require_theory(m: &Model) -> Result<()> {
    let t = m.trimmer();
    if !t.bounded() {
        return Err(Error::UnboundedTrimmer(t.to_string()));
    }
    if !t.is_normalized() {
        return Err(Error::NotNormalized(t.to_string()));
    }
    Ok(())
}

/// `Λ, ψ₁, ψ₂, ψ₃²` at `τ ≥ 1`.
pub fn eval_transforms(m: &Model, tau: f64) -> Result<TransformValues> {
    require_theory(m)?;
    if !(tau >= 1.0) {
        return Err(Error::Domain(format!("transforms need tau >= 1, got {tau}")));
    }
    Ok(transforms_from(m.delta(), tau, &moments(m, tau)?))
}

/// Bisection on `[lo, hi]` where `f(lo)` and `f(hi)` have opposite signs.
/// Stops when `|f| < resid` or the bracket is narrower than `width·max(1, |x|)`.
fn bisect<F>(mut lo: f64, mut hi: f64, f_lo: f64, resid: f64, width: f64, mut f: F) -> Result<(f64, usize)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let lo_neg = f_lo < 0.0;
    let mut iters = 0;
    loop {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= width * mid.abs().max(1.0) || mid == lo || mid == hi {
            return Ok((mid, iters));
        }
        iters += 1;
        let v = f(mid)?;
        if v.is_nan() {
            return Err(Error::Solver(format!("indicator is NaN at {mid}")));
        }
        if v.abs() < resid {
            return Ok((mid, iters));
        }
        if (v < 0.0) == lo_neg {
            lo = mid;
        } else {
            hi = mid;
        }
        if iters > 400 {
            return Err(Error::Solver(format!("bisection stalled on [{lo}, {hi}]")));
        }
    }
}

/// Minimizer `τ_r` of `Λ` on `[1, ∞)` and `λ_r = Λ(τ_r)`.
pub fn find_tau_r(m: &Model) -> Result<(f64, f64)> {
    require_theory(m)?;
    let sv = *m.solver();
    let d1 = lambda_prime(m, 1.0)?;
    if d1 >= 0.0 {
        return Ok((1.0, lambda(m, 1.0)?));
    }
    let (mut lo, mut hi) = (1.0, 2.0);
    let mut d_lo = d1;
    loop {
        let d = lambda_prime(m, hi)?;
        if d >= 0.0 {
            break;
        }
        lo = hi;
        d_lo = d;
        hi = 1.0 + 2.0 * (hi - 1.0);
        if hi > sv.max_bracket {
            return Err(Error::NoMinimum(sv.max_bracket));
        }
    }
    let (tau, _) = bisect(lo, hi, d_lo, sv.residual, sv.width, |t| lambda_prime(m, t))?;
    Ok((tau, lambda(m, tau)?))
}

fn overlap_target(delta: f64) -> f64 {
    delta / (delta - 1.0)
}

fn psi1(m: &Model, tau: f64) -> Result<f64> {
    Ok(transforms_from(m.delta(), tau, &moments(m, tau)?).psi1)
}

fn theta_star_from(m: &Model, tau_r: f64) -> Result<Option<f64>> {
    let c = overlap_target(m.delta());
    let p_r = psi1(m, tau_r)?;
    if !(p_r > c) {
        return Ok(None);
    }
    let sv = *m.solver();
    let (mut lo, mut hi) = (tau_r, tau_r + 1.0);
    let mut f_lo = p_r - c;
    loop {
        let v = psi1(m, hi)? - c;
        if v <= 0.0 {
            break;
        }
        lo = hi;
        f_lo = v;
        hi = tau_r + 2.0 * (hi - tau_r);
        if hi > sv.max_bracket {
            return Err(Error::Solver(format!("psi1 stays above {c} up to tau = {hi:e}")));
        }
    }
    let (theta, iters) = bisect(lo, hi, f_lo, 0.0, 1e-13, |t| Ok(psi1(m, t)? - c))?;
    let resid = (psi1(m, theta)? - c).abs();
    if resid > sv.residual {
        return Err(Error::Solver(format!(
            "psi1 root residual {resid:e} at theta = {theta} after {iters} bisections"
        )));
    }
    Ok(Some(theta))
}

/// Unique root `θ⋆ > τ_r` of `ψ₁(θ) = δ/(δ − 1)`, if `ψ₁(τ_r)` exceeds the target.
pub fn find_theta_star(m: &Model) -> Result<Option<f64>> {
    let (tau_r, _) = find_tau_r(m)?;
    theta_star_from(m, tau_r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Uninformative,
    Informative,
    Boundary,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Uninformative => "uninformative",
            Regime::Informative => "informative",
            Regime::Boundary => "boundary",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryPrediction {
    pub regime: Regime,
    pub tau_r: f64,
    pub lambda_r: f64,
    pub psi1_at_tau_r: f64,
    pub theta_star: Option<f64>,
    /// Limit of `λ₁` for the trimmer as evaluated by the model.
    pub lambda1_limit: f64,
    pub rho2_limit: f64,
    pub vartheta_star: Option<f64>,
    pub vartheta_c: f64,
    /// `E[S T]`.
    pub e_st: f64,
    /// Normalization applied to the trimmer; see [`TheoryPrediction::lambda1_original`].
    pub affine: AffineMap,
}

impl TheoryPrediction {
    /// `λ₁` limit mapped back to the trimmer before normalization.
    pub fn lambda1_original(&self) -> f64 {
        self.affine.invert(self.lambda1_limit)
    }
}

fn e_st(m: &Model) -> Result<f64> {
    m.expect(|s, t| s * t)
}

/// `(ψ₂, ψ₃²)`-form of the overlap limit at `θ`.
fn overlap_formula(delta: f64, tv: &TransformValues) -> Result<f64> {
    let c = overlap_target(delta);
    let (Some(p2), Some(p3)) = (tv.psi2, tv.psi3sq) else {
        return Err(Error::Solver(format!("psi2, psi3 undefined at tau = {}", tv.tau)));
    };
    let den = p3 - c * p2;
    if !(den > 0.0) {
        return Err(Error::Solver(format!("overlap denominator {den:e} is not positive")));
    }
    Ok((c * c - c * p2) / den)
}

/// Limits of `λ₁` and of the overlap.
pub fn predict(m: &Model) -> Result<TheoryPrediction> {
    require_theory(m)?;
    let delta = m.delta();
    let c = overlap_target(delta);
    let (tau_r, lambda_r) = find_tau_r(m)?;
    let p_r = psi1(m, tau_r)?;
    let est = e_st(m)?;
    let vc = vartheta_c(m)?;
    let mut pred = TheoryPrediction {
        regime: Regime::Uninformative,
        tau_r,
        lambda_r,
        psi1_at_tau_r: p_r,
        theta_star: None,
        lambda1_limit: lambda_r,
        rho2_limit: 0.0,
        vartheta_star: None,
        vartheta_c: vc,
        e_st: est,
        affine: m.trimmer().affine(),
    };
    if (p_r - c).abs() < 1e-9 {
        pred.regime = Regime::Boundary;
        let tv = transforms_from(delta, tau_r, &moments(m, tau_r)?);
        pred.rho2_limit = overlap_formula(delta, &tv).map(|r| r.clamp(0.0, 1.0)).unwrap_or(0.0);
        pred.vartheta_star = Some(1.0 / (lambda_r - est));
        return Ok(pred);
    }
    match theta_star_from(m, tau_r)? {
        None => {
            pred.vartheta_star = Some(1.0 / (lambda_r - est));
        }
        Some(theta) => {
            let mo = moments(m, theta)?;
            let tv = transforms_from(delta, theta, &mo);
            let rho = overlap_formula(delta, &tv)?;
            if !(-1e-9..=1.0 + 1e-9).contains(&rho) {
                return Err(Error::Solver(format!("overlap limit {rho} outside [0, 1]")));
            }
            pred.regime = Regime::Informative;
            pred.theta_star = Some(theta);
            pred.lambda1_limit = tv.lambda_of_tau;
            pred.rho2_limit = rho.clamp(0.0, 1.0);
            pred.vartheta_star = Some(1.0 / (mo.stg / mo.sg - est));
        }
    }
    Ok(pred)
}

/// `ϑ_c = (1 − 1/E[S/(1 − T)] − E[ST])⁻¹`.
pub fn vartheta_c(m: &Model) -> Result<f64> {
    let mo = moments(m, 1.0)?;
    let tilted = if mo.sg.is_infinite() { 1.0 } else { mo.stg / mo.sg };
    Ok(1.0 / (tilted - e_st(m)?))
}

/// `λ − 1/E[S/(λ − T)]` computed as a tilted mean of `T`.
fn tilted_mean(m: &Model, lam: f64) -> Result<f64> {
    let mo = moments(m, lam)?;
    Ok(if mo.sg.is_infinite() { lam } else { mo.stg / mo.sg })
}

/// `θ(ϑ)`: 1 below `ϑ_c`, else the root of `λ − E[ST] − 1/ϑ = 1/E[S/(λ − T)]`.
pub fn theta_of_vartheta(m: &Model, vartheta: f64) -> Result<f64> {
    require_theory(m)?;
    let est = e_st(m)?;
    theta_of_vartheta_with(m, vartheta, est, vartheta_c(m)?)
}

fn theta_of_vartheta_with(m: &Model, vartheta: f64, est: f64, vc: f64) -> Result<f64> {
    if !(vartheta > 0.0) {
        return Err(Error::Domain(format!("vartheta must be positive, got {vartheta}")));
    }
    if vartheta <= vc {
        return Ok(1.0);
    }
    let h = |lam: f64| -> Result<f64> { Ok(tilted_mean(m, lam)? - est - 1.0 / vartheta) };
    let mut lo = (est + 1.0 / vartheta).max(1.0);
    let mut h_lo = h(lo)?;
    if h_lo <= 0.0 {
        // Only possible through rounding when ϑ is within noise of ϑ_c.
        return Ok(lo);
    }
    let base = lo;
    let mut hi = base + 1.0;
    loop {
        let v = h(hi)?;
        if v < 0.0 {
            break;
        }
        lo = hi;
        h_lo = v;
        hi = base + 2.0 * (hi - base);
        if hi > 1e3 * m.solver().max_bracket {
            return Err(Error::Solver(format!("theta({vartheta}) not bracketed below {hi:e}")));
        }
    }
    let (theta, _) = bisect(lo, hi, h_lo, 0.0, 1e-14, h)?;
    Ok(theta)
}

/// `θ⁻¹(λ) = (λ − E[ST] − 1/E[S/(λ − T)])⁻¹` for `λ > 1`.
pub fn theta_inverse(m: &Model, lam: f64) -> Result<f64> {
    require_theory(m)?;
    if !(lam > 1.0) {
        return Err(Error::Domain(format!("theta inverse needs lambda > 1, got {lam}")));
    }
    Ok(1.0 / (tilted_mean(m, lam)? - e_st(m)?))
}

/// `θ′(ϑ) = ϑ⁻² E[SG]² / (E[SG²] − E[SG]²)` with `G = 1/(θ(ϑ) − T)`, for `ϑ > ϑ_c`.
pub fn theta_prime(m: &Model, vartheta: f64) -> Result<f64> {
    let theta = theta_of_vartheta(m, vartheta)?;
    if theta == 1.0 {
        return Ok(0.0);
    }
    let mo = moments(m, theta)?;
    Ok(mo.sg * mo.sg / (mo.sg2 - mo.sg * mo.sg) / (vartheta * vartheta))
}

/// `Λ₊(τ)`: `λ_r` up to `τ_r`, `Λ(τ)` beyond.
pub fn lambda_plus(m: &Model, tau: f64, tau_r: f64, lambda_r: f64) -> Result<f64> {
    if tau <= tau_r {
        Ok(lambda_r)
    } else {
        lambda(m, tau)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarthetaStar {
    pub vartheta_star: f64,
    /// `Λ₊(θ(ϑ⋆))`, the second route to the `λ₁` limit.
    pub lambda1_check: f64,
    /// Derivative of `ϑ ↦ Λ₊(θ(ϑ))` at `ϑ⋆`.
    pub derivative: f64,
    pub theta: f64,
    pub informative: bool,
}

/// Root of `Λ₊(θ(ϑ)) = 1/ϑ + E[ST]` by bisection in `ϑ`.
pub fn vartheta_star(m: &Model) -> Result<VarthetaStar> {
    require_theory(m)?;
    let delta = m.delta();
    let c = overlap_target(delta);
    let (tau_r, lambda_r) = find_tau_r(m)?;
    let est = e_st(m)?;
    let vc = vartheta_c(m)?;
    let g = |v: f64| -> Result<f64> {
        let th = theta_of_vartheta_with(m, v, est, vc)?;
        Ok(lambda_plus(m, th, tau_r, lambda_r)? - 1.0 / v - est)
    };
    let mut lo = 1.0;
    let mut g_lo = g(lo)?;
    while g_lo >= 0.0 {
        lo *= 0.5;
        if lo < 1e-12 {
            return Err(Error::Solver("vartheta star not bracketed from below".into()));
        }
        g_lo = g(lo)?;
    }
    let mut hi = 2.0 * lo;
    while g(hi)? <= 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > m.solver().max_bracket {
            return Err(Error::Solver("vartheta star not bracketed from above".into()));
        }
    }
    let g_lo = g(lo)?;
    let (vs, _) = bisect(lo, hi, g_lo, 0.0, 1e-14, g)?;
    let theta = theta_of_vartheta_with(m, vs, est, vc)?;
    let check = lambda_plus(m, theta, tau_r, lambda_r)?;
    let informative = psi1(m, tau_r)? > c;
    let derivative = if informative {
        let tv = transforms_from(delta, theta, &moments(m, theta)?);
        let (p2, p3) = (tv.psi2.unwrap_or(f64::NAN), tv.psi3sq.unwrap_or(f64::NAN));
        c * (c - p2) / (p3 - c * c) / (vs * vs)
    } else {
        0.0
    };
    Ok(VarthetaStar { vartheta_star: vs, lambda1_check: check, derivative, theta, informative })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaTransition {
    pub delta_t: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
}

/// Sign of `ψ₁(τ_r) − δ/(δ − 1)` for the trimmer family at `δ`.
pub fn transition_indicator<F>(family: &F, delta: f64, settings: QuadratureSettings) -> Result<f64>
where
    F: Fn(f64) -> Result<TrimmingFunction>,
{
    let m = Model::for_theory(family(delta)?, delta, settings)?;
    let (tau_r, _) = find_tau_r(&m)?;
    Ok(psi1(&m, tau_r)? - overlap_target(delta))
}

/// Critical sampling ratio where the indicator changes sign, to width `1e-4`.
pub fn find_delta_transition<F>(family: F, range: (f64, f64), settings: QuadratureSettings) -> Result<DeltaTransition>
where
    F: Fn(f64) -> Result<TrimmingFunction>,
{
    let (mut a, mut b) = range;
    if !(a > 1.0 && b > a) {
        return Err(Error::Domain(format!("delta range [{a}, {b}] must satisfy 1 < a < b")));
    }
    let fa = transition_indicator(&family, a, settings)?;
    let fb = transition_indicator(&family, b, settings)?;
    if fa == 0.0 {
        return Ok(DeltaTransition { delta_t: a, bracket: (a, a), iterations: 0 });
    }
    if (fa < 0.0) == (fb < 0.0) {
        return Err(Error::NoTransition(a, b));
    }
    let mut iterations = 0;
    while b - a > 1e-4 {
        let mid = 0.5 * (a + b);
        let v = transition_indicator(&family, mid, settings)?;
        if (v < 0.0) == (fa < 0.0) {
            a = mid;
        } else {
            b = mid;
        }
        iterations += 1;
    }
    Ok(DeltaTransition { delta_t: 0.5 * (a + b), bracket: (a, b), iterations })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalOverlap {
    pub delta: f64,
    pub theta_star: Option<f64>,
    /// `(θ⋆ − 1)/(θ⋆ − 1/δ)`.
    pub rho2: f64,
    /// The `ψ₂, ψ₃²` overlap formula at `θ⋆` for the same law.
    pub rho2_psi: f64,
}

/// Moments `E[G], E[G²], E[SG], E[SG²]` for `T = 1 − 1/S`, where
/// `G = S/((τ − 1)S + 1)`.
fn opt_moments(q: &Quadrature, tau: f64) -> Result<[f64; 4]> {
    let r = q.integrate(|s| {
        let g = s / ((tau - 1.0) * s + 1.0);
        [g, g * g, s * g, s * g * g]
    })?;
    Ok(r.value)
}

/// Best achievable overlap limit, attained by `T = 1 − 1/S`.
pub fn rho_opt_detail(delta: f64) -> Result<OptimalOverlap> {
    if !(delta > 1.0) {
        return Err(Error::InvalidDelta(delta));
    }
    if delta <= 2.0 {
        return Ok(OptimalOverlap { delta, theta_star: None, rho2: 0.0, rho2_psi: 0.0 });
    }
    let q = Quadrature::new(QuadratureSettings::default())?;
    let c = overlap_target(delta);
    let psi1 = |tau: f64| -> Result<f64> {
        let [g, _, sg, _] = opt_moments(&q, tau)?;
        Ok(sg / g - c)
    };
    // ψ₁ equals 2 at τ = 1 and decreases to 1.
    let (mut lo, mut hi) = (1.0, 2.0);
    let mut f_lo = 2.0 - c;
    loop {
        let v = psi1(hi)?;
        if v <= 0.0 {
            break;
        }
        lo = hi;
        f_lo = v;
        hi = 1.0 + 2.0 * (hi - 1.0);
    }
    let (theta, _) = bisect(lo, hi, f_lo, 0.0, 1e-14, psi1)?;
    let [g, g2, _, sg2] = opt_moments(&q, theta)?;
    let (p2, p3) = (g2 / (g * g), sg2 / (g * g));
    Ok(OptimalOverlap {
        delta,
        theta_star: Some(theta),
        rho2: (theta - 1.0) / (theta - 1.0 / delta),
        rho2_psi: (c * c - c * p2) / (p3 - c * p2),
    })
}

/// `ρ²_opt(δ)`: 0 for `δ ≤ 2`, else `(θ⋆ − 1)/(θ⋆ − 1/δ)`.
pub fn rho_opt(delta: f64) -> Result<f64> {
    Ok(rho_opt_detail(delta)?.rho2)
}
