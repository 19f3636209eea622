//! Integrals of the form `∫₀^∞ f(s) e^{-s} ds`.
//!
//! A Gauss–Laguerre rule of order `N` is compared against order `2N`; when the
//! two disagree the integral is recomputed by globally adaptive Gauss–Kronrod
//! (7/15) on `s ∈ [0, 4]` and, beyond that, in the variable `q = e^{-s}`.
//! Vector-valued integrands share nodes, so several moments cost one pass.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use faer::{Mat, Side};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    /// Order of the primary Gauss–Laguerre rule; the check rule has twice as many nodes.
    pub primary_order: usize,
    /// Relative tolerance for the rule comparison and the adaptive fallback.
    pub adaptive_tol: f64,
    /// Partial sums beyond this magnitude are reported as infinite.
    pub divergence_threshold: f64,
    /// Subinterval budget of the adaptive fallback.
    pub max_intervals: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            primary_order: 64,
            adaptive_tol: 1e-11,
            divergence_threshold: 1e12,
            max_intervals: 2000,
        }
    }
}

impl QuadratureSettings {
    pub fn validate(&self) -> Result<()> {
        if self.primary_order < 32 || self.primary_order > 256 {
            return Err(Error::Settings(format!(
                "primary_order must lie in [32, 256], got {}",
                self.primary_order
            )));
        }
        if !(self.adaptive_tol > 0.0 && self.adaptive_tol <= 1e-6) {
            return Err(Error::Settings(format!(
                "adaptive_tol must lie in (0, 1e-6], got {}",
                self.adaptive_tol
            )));
        }
        if !(self.divergence_threshold > 1.0) {
            return Err(Error::Settings("divergence_threshold must exceed 1".into()));
        }
        if self.max_intervals < 16 {
            return Err(Error::Settings("max_intervals must be at least 16".into()));
        }
        Ok(())
    }
}

/// Nodes and weights of a Gauss–Laguerre rule for the weight `e^{-s}`.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// `L_n(x)` and `L_{n-1}(x)` scaled by a common factor `e^{-log_scale}`.
fn laguerre_pair(n: usize, x: f64) -> (f64, f64, f64) {
    let (mut prev, mut cur) = (0.0, 1.0);
    let mut log_scale = 0.0;
    for k in 0..n {
        let next = (((2 * k + 1) as f64 - x) * cur - k as f64 * prev) / (k + 1) as f64;
        prev = cur;
        cur = next;
        if cur.abs() > 1e150 {
            cur *= 1e-150;
            prev *= 1e-150;
            log_scale += 150.0 * std::f64::consts::LN_10;
        }
    }
    (cur, prev, log_scale)
}

fn build_rule(n: usize) -> Rule {
    // Golub–Welsch, with nodes polished by Newton on L_n.
    let jacobi = Mat::<f64>::from_fn(n, n, |i, j| {
        if i == j {
            (2 * i + 1) as f64
        } else if i.abs_diff(j) == 1 {
            i.max(j) as f64
        } else {
            0.0
        }
    });
    let evd = jacobi.self_adjoint_eigen(Side::Lower).expect("tridiagonal eigenproblem");
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = evd.S()[i];
        for _ in 0..100 {
            let (ln, lm1, _) = laguerre_pair(n, x);
            // x L_n'(x) = n (L_n - L_{n-1})
            let step = x * ln / (n as f64 * (ln - lm1));
            x -= step;
            if step.abs() <= 4.0 * f64::EPSILON * x.abs() {
                break;
            }
        }
        // Eigenvector weights are accurate only relative to the largest weight;
        // the recurrence is accurate except for cancellation at small nodes.
        let v = evd.U()[(0, i)];
        let w = if v * v > 1e-8 {
            v * v
        } else {
            let (_, lm1, log_scale) = laguerre_pair(n, x);
            (x.ln() - 2.0 * (n as f64).ln() - 2.0 * (lm1.abs().ln() + log_scale)).exp()
        };
        nodes.push(x);
        weights.push(w);
    }
    Rule { nodes, weights }
}

/// Cached Gauss–Laguerre rule of order `n`.
pub fn gauss_laguerre(n: usize) -> Arc<Rule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Rule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().unwrap().get(&n) {
        return r.clone();
    }
    let rule = Arc::new(build_rule(n));
    cache.lock().unwrap().entry(n).or_insert(rule).clone()
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Result of a vector integral. Divergent components are `±∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral<const K: usize> {
    pub value: [f64; K],
    /// Error estimate per component (zero when the Laguerre pair agreed exactly).
    pub error: [f64; K],
    pub converged: bool,
    pub adaptive: bool,
}

#[derive(Clone, Copy, PartialEq)]
enum Map {
    /// `s = x`, weight `e^{-x}`.
    Lin,
    /// `s = -ln q`, unit weight.
    Exp,
}

struct Piece<const K: usize> {
    a: f64,
    b: f64,
    map: Map,
    est: [f64; K],
    err: [f64; K],
    abs: [f64; K],
    splittable: bool,
}

/// Deterministic integration engine; cheap to clone.
#[derive(Debug, Clone)]
pub struct Quadrature {
    settings: QuadratureSettings,
    lo: Arc<Rule>,
    hi: Arc<Rule>,
}

impl Quadrature {
    pub fn new(settings: QuadratureSettings) -> Result<Self> {
        settings.validate()?;
        Ok(Quadrature {
            lo: gauss_laguerre(settings.primary_order),
            hi: gauss_laguerre(2 * settings.primary_order),
            settings,
        })
    }

    pub fn settings(&self) -> &QuadratureSettings {
        &self.settings
    }

    fn scales<const K: usize>(&self, total: &[f64; K], abs: &[f64; K]) -> [f64; K] {
        let big = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        std::array::from_fn(|k| {
            total[k]
                .abs()
                .max(1e-8 * big)
                .max(64.0 * f64::EPSILON * abs[k] / self.settings.adaptive_tol)
                .max(f64::MIN_POSITIVE)
        })
    }

    fn laguerre<const K: usize, F>(&self, rule: &Rule, f: &F) -> Result<Option<[f64; K]>>
    where
        F: Fn(f64) -> [f64; K],
    {
        let mut acc = [0.0; K];
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let v = f(x);
            for k in 0..K {
                if v[k].is_nan() {
                    return Err(Error::Integrand { s: x });
                }
                if v[k].is_infinite() {
                    return Ok(None);
                }
                acc[k] += w * v[k];
            }
        }
        Ok(Some(acc))
    }

    /// `∫₀^∞ f(s) e^{-s} ds` for each component of `f`.
    pub fn integrate<const K: usize, F>(&self, f: F) -> Result<Integral<K>>
    where
        F: Fn(f64) -> [f64; K],
    {
        if let (Some(a), Some(b)) = (self.laguerre(&self.lo, &f)?, self.laguerre(&self.hi, &f)?) {
            let abs = b.map(f64::abs);
            let scale = self.scales(&b, &abs);
            let ok = (0..K).all(|k| {
                b[k].abs() <= self.settings.divergence_threshold
                    && (a[k] - b[k]).abs() <= self.settings.adaptive_tol * scale[k]
            });
            if ok {
                let error = std::array::from_fn(|k| (a[k] - b[k]).abs());
                return Ok(Integral { value: b, error, converged: true, adaptive: false });
            }
        }
        self.adaptive(&f)
    }

    fn kronrod<const K: usize, F>(
        &self,
        a: f64,
        b: f64,
        map: Map,
        f: &F,
        diverged: &mut [f64; K],
    ) -> Result<Piece<K>>
    where
        F: Fn(f64) -> [f64; K],
    {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let eval = |p: f64, diverged: &mut [f64; K]| -> Result<[f64; K]> {
            let (s, w) = match map {
                Map::Lin => (p, (-p).exp()),
                Map::Exp => (-p.ln(), 1.0),
            };
            let v = f(s);
            let mut out = [0.0; K];
            for k in 0..K {
                if v[k].is_nan() {
                    return Err(Error::Integrand { s });
                }
                if v[k].is_infinite() {
                    diverged[k] = v[k];
                } else {
                    out[k] = w * v[k];
                }
            }
            Ok(out)
        };
        let mut kr = [0.0; K];
        let mut ga = [0.0; K];
        let mut ab = [0.0; K];
        for j in 0..8 {
            let pts: &[f64] = if j == 7 { &[c] } else { &[c - h * XGK[j], c + h * XGK[j]] };
            for &p in pts {
                let v = eval(p, diverged)?;
                for k in 0..K {
                    kr[k] += WGK[j] * v[k];
                    ab[k] += WGK[j] * v[k].abs();
                    if j % 2 == 1 {
                        ga[k] += WG[j / 2] * v[k];
                    }
                }
            }
        }
        let est = kr.map(|v| v * h);
        let err = std::array::from_fn(|k| ((kr[k] - ga[k]) * h).abs());
        let abs = ab.map(|v| v * h);
        let splittable = h > 4.0 * f64::EPSILON * a.abs().max(b.abs()) && h > 1e-300;
        Ok(Piece { a, b, map, est, err, abs, splittable })
    }

    fn adaptive<const K: usize, F>(&self, f: &F) -> Result<Integral<K>>
    where
        F: Fn(f64) -> [f64; K],
    {
        let mut diverged = [0.0f64; K];
        let mut pieces: Vec<Piece<K>> = Vec::new();
        let lin = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0];
        for w in lin.windows(2) {
            pieces.push(self.kronrod(w[0], w[1], Map::Lin, f, &mut diverged)?);
        }
        let exp = [0.0, (-64.0f64).exp(), (-32.0f64).exp(), (-16.0f64).exp(), (-8.0f64).exp(), (-4.0f64).exp()];
        for w in exp.windows(2) {
            pieces.push(self.kronrod(w[0], w[1], Map::Exp, f, &mut diverged)?);
        }
        let tol = self.settings.adaptive_tol;
        let mut converged = false;
        loop {
            let mut total = [0.0; K];
            let mut err = [0.0; K];
            let mut abs = [0.0; K];
            for p in &pieces {
                for k in 0..K {
                    total[k] += p.est[k];
                    err[k] += p.err[k];
                    abs[k] += p.abs[k];
                }
            }
            for k in 0..K {
                if diverged[k] == 0.0 && total[k].abs() > self.settings.divergence_threshold {
                    diverged[k] = total[k].signum() * f64::INFINITY;
                }
            }
            let scale = self.scales(&total, &abs);
            let live = |k: usize| diverged[k] == 0.0;
            if (0..K).filter(|&k| live(k)).all(|k| err[k] <= tol * scale[k]) {
                converged = true;
            }
            if converged {
                let value = std::array::from_fn(|k| if live(k) { total[k] } else { diverged[k] });
                return Ok(Integral { value, error: err, converged, adaptive: true });
            }
            if pieces.len() >= self.settings.max_intervals {
                break;
            }
            let worst = pieces
                .iter()
                .enumerate()
                .filter(|(_, p)| p.splittable)
                .map(|(i, p)| {
                    let r = (0..K).filter(|&k| live(k)).fold(0.0f64, |m, k| m.max(p.err[k] / scale[k]));
                    (i, r)
                })
                .max_by(|x, y| x.1.total_cmp(&y.1));
            let Some((i, _)) = worst else {
                break;
            };
            let p = pieces.swap_remove(i);
            let mid = 0.5 * (p.a + p.b);
            pieces.push(self.kronrod(p.a, mid, p.map, f, &mut diverged)?);
            pieces.push(self.kronrod(mid, p.b, p.map, f, &mut diverged)?);
        }
        Ok(self.unconverged(&pieces, diverged))
    }

    /// Budget exhausted. A sign-definite component whose unresolved error sits
    /// in a piece touching `s = 0` or `s = ∞` is treated as divergent there;
    /// anything else is returned as a best estimate flagged unconverged.
    fn unconverged<const K: usize>(&self, pieces: &[Piece<K>], mut diverged: [f64; K]) -> Integral<K> {
        let mut total = [0.0; K];
        let mut err = [0.0; K];
        let mut abs = [0.0; K];
        for p in pieces {
            for k in 0..K {
                total[k] += p.est[k];
                err[k] += p.err[k];
                abs[k] += p.abs[k];
            }
        }
        let scale = self.scales(&total, &abs);
        for k in 0..K {
            if diverged[k] != 0.0 || err[k] <= self.settings.adaptive_tol * scale[k] {
                continue;
            }
            let definite = total[k].abs() >= (1.0 - 1e-9) * abs[k];
            let worst = pieces.iter().max_by(|x, y| x.err[k].total_cmp(&y.err[k]));
            if let Some(p) = worst {
                if definite && p.a == 0.0 {
                    diverged[k] = total[k].signum() * f64::INFINITY;
                }
            }
        }
        let value = std::array::from_fn(|k| if diverged[k] == 0.0 { total[k] } else { diverged[k] });
        Integral { value, error: err, converged: false, adaptive: true }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(k: u32) -> f64 {
        (1..=k).map(|i| i as f64).product()
    }

    #[test]
    fn laguerre_rule_reproduces_moments() {
        for n in [32, 64, 128, 256] {
            let r = gauss_laguerre(n);
            let total: f64 = r.weights.iter().sum();
            assert!((total - 1.0).abs() < 2e-12, "n={n}: {total}");
            for k in 0..20u32 {
                let v: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(k as i32)).sum();
                assert!((v / factorial(k) - 1.0).abs() < 1e-11, "n={n} k={k}: {v}");
            }
        }
    }

    #[test]
    fn kronrod_pair_exact_on_polynomials() {
        let q = Quadrature::new(QuadratureSettings::default()).unwrap();
        let mut d = [0.0; 2];
        // x^22 on [0,1]: Kronrod exact through degree 22, Gauss through 13
        let p = q
            .kronrod(0.0, 1.0, Map::Exp, &|s: f64| {
                let x = (-s).exp();
                [x.powi(13), x.powi(22)]
            }, &mut d)
            .unwrap();
        assert!((p.est[0] - 1.0 / 14.0).abs() < 1e-15);
        assert!((p.est[1] - 1.0 / 23.0).abs() < 1e-15);
        assert!(p.err[0] < 1e-15);
    }

    #[test]
    fn adaptive_handles_sharp_peak() {
        let q = Quadrature::new(QuadratureSettings::default()).unwrap();
        // ∫ e^{-s} / ((s-3)^2 + h^2) ds ≈ π e^{-3} / h for small h
        let h = 1e-6;
        let r = q.integrate(|s| [1.0 / ((s - 3.0).powi(2) + h * h)]).unwrap();
        assert!(r.adaptive && r.converged);
        let approx = std::f64::consts::PI * (-3.0f64).exp() / h;
        assert!((r.value[0] / approx - 1.0).abs() < 1e-5);
    }

    #[test]
    fn divergence_reported_as_infinity() {
        let q = Quadrature::new(QuadratureSettings::default()).unwrap();
        let r = q.integrate(|s| [s.exp() * s, 1.0]).unwrap();
        assert_eq!(r.value[0], f64::INFINITY);
        assert!((r.value[1] - 1.0).abs() < 1e-12);
        let r = q.integrate(|s| [if s > 1.0 { f64::NEG_INFINITY } else { 0.0 }]).unwrap();
        assert_eq!(r.value[0], f64::NEG_INFINITY);
    }

    #[test]
    fn nan_is_an_error() {
        let q = Quadrature::new(QuadratureSettings::default()).unwrap();
        assert!(matches!(q.integrate(|_| [f64::NAN]), Err(Error::Integrand { .. })));
    }

    #[test]
    fn settings_validation() {
        let bad = QuadratureSettings { primary_order: 16, ..Default::default() };
        assert!(Quadrature::new(bad).is_err());
        let bad = QuadratureSettings { adaptive_tol: 1e-3, ..Default::default() };
        assert!(Quadrature::new(bad).is_err());
    }
}
