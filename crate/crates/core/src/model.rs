//! Joint law of `(S, T)` with `S = |Z|² ~ Exp(1)` and `T = 𝒯(√(S/δ))`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::quadrature::{Integral, Quadrature, QuadratureSettings};
use crate::trimmer::{normalize_trimmer, TrimmingFunction};

/// Tolerances of the scalar root finders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Residual at which a root is accepted.
    pub residual: f64,
    /// Bracket width (relative to `max(1, |x|)`) at which bisection stops.
    pub width: f64,
    /// Bracket expansion gives up beyond this magnitude.
    pub max_bracket: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { residual: 1e-10, width: 1e-12, max_bracket: 1e8 }
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    trimmer: TrimmingFunction,
    delta: f64,
    quad: Quadrature,
    solver: SolverSettings,
}

impl Model {
    pub fn new(trimmer: TrimmingFunction, delta: f64, settings: QuadratureSettings) -> Result<Self> {
        if !(delta.is_finite() && delta > 1.0) {
            return Err(Error::InvalidDelta(delta));
        }
        Ok(Model { trimmer, delta, quad: Quadrature::new(settings)?, solver: SolverSettings::default() })
    }

    /// Model ready for theory use: trimmers whose range already lies in
    /// `[0, 1]` are kept, bounded ones are normalized, unbounded ones rejected.
    pub fn for_theory(trimmer: TrimmingFunction, delta: f64, settings: QuadratureSettings) -> Result<Self> {
        let t = if trimmer.is_normalized() { trimmer } else { normalize_trimmer(&trimmer)? };
        Self::new(t, delta, settings)
    }

    pub fn with_solver(mut self, solver: SolverSettings) -> Self {
        self.solver = solver;
        self
    }

    pub fn solver(&self) -> &SolverSettings {
        &self.solver
    }

    pub fn quadrature(&self) -> &Quadrature {
        &self.quad
    }

    /// Model with default quadrature settings.
    pub fn with_defaults(trimmer: TrimmingFunction, delta: f64) -> Result<Self> {
        Self::new(trimmer, delta, QuadratureSettings::default())
    }

    pub fn trimmer(&self) -> &TrimmingFunction {
        &self.trimmer
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn settings(&self) -> &QuadratureSettings {
        self.quad.settings()
    }

    /// `T` as a function of `s`.
    #[inline]
    pub fn t_of_s(&self, s: f64) -> f64 {
        self.trimmer.eval((s / self.delta).sqrt())
    }

    /// `E[f(S, T)]` componentwise, with error estimate and convergence flag.
    pub fn integrate<const K: usize, F>(&self, f: F) -> Result<Integral<K>>
    where
        F: Fn(f64, f64) -> [f64; K],
    {
        self.quad.integrate(|s| f(s, self.t_of_s(s)))
    }

    /// `E[f(S, T)]`; `±∞` when the expectation diverges.
    pub fn expect<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(f64, f64) -> f64,
    {
        Ok(self.integrate(|s, t| [f(s, t)])?.value[0])
    }

    /// `E[f(S, T)]` for several integrands sharing one pass.
    pub fn expect_many<const K: usize, F>(&self, f: F) -> Result<[f64; K]>
    where
        F: Fn(f64, f64) -> [f64; K],
    {
        Ok(self.integrate(f)?.value)
    }

    /// Draws `count` pairs `(s, t)`; deterministic in `seed`.
    pub fn sample_trimmed(&self, seed: u64, count: usize) -> Result<Vec<(f64, f64)>> {
        if count == 0 {
            return Err(Error::Precondition("count must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..count)
            .map(|_| {
                let s: f64 = Exp1.sample(&mut rng);
                (s, self.t_of_s(s))
            })
            .collect())
    }
}
