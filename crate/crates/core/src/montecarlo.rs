//! Finite-size simulation of the sub-sampled Haar model and empirical
//! counterparts of the asymptotic predictions.

use std::io::Write;
use std::path::Path;

use faer::{c64, Col, Mat, MatRef, Side};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::trimmer::TrimmingFunction;

/// Largest `m` accepted by the bulk simulators.
pub const MAX_BULK_DIM: usize = 4096;
/// Above this size the leading eigenpair is found by power iteration.
pub const FULL_EIGEN_MAX_N: usize = 512;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of trial `t` in a run started from `seed`.
pub fn trial_seed(seed: u64, t: u64) -> u64 {
    splitmix64(seed ^ splitmix64(t.wrapping_add(1)))
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat<c64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut g = Mat::<c64>::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            g[(i, j)] = c64::new(s * re, s * im);
        }
    }
    g
}

/// First `n` columns of an `m × m` Haar unitary.
#[derive(Debug, Clone)]
pub struct SensingMatrix {
    a: Mat<c64>,
}

impl SensingMatrix {
    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn matrix(&self) -> MatRef<'_, c64> {
        self.a.as_ref()
    }

    /// `max |(A^H A − I)_ij|`.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.a.adjoint() * &self.a;
        let mut e: f64 = 0.0;
        for j in 0..g.ncols() {
            for i in 0..g.nrows() {
                let d = if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) };
                e = e.max((g[(i, j)] - d).norm());
            }
        }
        e
    }
}

/// Gaussian matrix orthonormalized by QR with the diagonal of `R` rotated to
/// be real positive.
pub fn sample_sensing(m: usize, n: usize, seed: u64) -> Result<SensingMatrix> {
    if n == 0 || m <= n {
        return Err(Error::Dimension(format!("need m > n >= 1, got m = {m}, n = {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = gaussian_matrix(&mut rng, m, n);
    let qr = g.qr();
    let mut q = qr.compute_thin_Q();
    let r = qr.thin_R();
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { c64::new(1.0, 0.0) };
        for i in 0..m {
            q[(i, j)] *= ph;
        }
    }
    Ok(SensingMatrix { a: q })
}

/// `√n e₁`.
pub fn canonical_signal(n: usize) -> Vec<c64> {
    let mut x = vec![c64::new(0.0, 0.0); n];
    x[0] = c64::new((n as f64).sqrt(), 0.0);
    x
}

/// Uniformly oriented complex signal of norm `√n`.
pub fn random_signal(n: usize, seed: u64) -> Vec<c64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = gaussian_matrix(&mut rng, n, 1);
    let norm = g.col(0).norm_l2();
    let s = (n as f64).sqrt() / norm;
    (0..n).map(|i| g[(i, 0)] * s).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum EigenMethod {
    Power,
    Full,
    /// Power iteration gave up and the full decomposition was used.
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub seed: u64,
    pub lambda1_hat: f64,
    pub overlap: f64,
    pub iterations: usize,
    pub a_m: f64,
    pub method: EigenMethod,
    /// Leading eigenvalue not separated from the second one.
    pub degenerate: bool,
}

/// Leading eigenpair of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct LeadingPair {
    pub value: f64,
    pub vector: Vec<c64>,
    pub iterations: usize,
    pub method: EigenMethod,
    pub degenerate: bool,
}

fn degenerate_gap(l1: f64, l2: f64) -> bool {
    l1 - l2 <= 1e-10 * l1.abs().max(1.0)
}

fn full_leading(mm: MatRef<'_, c64>) -> Result<LeadingPair> {
    let n = mm.nrows();
    let evd = mm
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Solver(format!("Hermitian eigendecomposition failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let l1 = s[n - 1].re;
    let degenerate = n > 1 && degenerate_gap(l1, s[n - 2].re);
    Ok(LeadingPair {
        value: l1,
        vector: (0..n).map(|i| u[(i, n - 1)]).collect(),
        iterations: 0,
        method: EigenMethod::Full,
        degenerate,
    })
}

/// Power iteration on a positive semidefinite matrix; returns `None` when the
/// observed convergence rate predicts more work than a full decomposition.
fn power_leading(mm: MatRef<'_, c64>, rel_tol: f64, max_iter: usize) -> Option<LeadingPair> {
    let n = mm.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed ^ n as u64);
    let g = gaussian_matrix(&mut rng, n, 1);
    let nv = g.col(0).norm_l2();
    let mut v = Col::<c64>::from_fn(n, |i| g[(i, 0)] / nv);
    // One power step costs n² against roughly 10n³ for the full solver.
    let budget = max_iter.min(10 * n);
    let mut lam_prev = f64::NAN;
    let mut diff_prev = f64::NAN;
    for k in 1..=budget {
        let w = mm * &v;
        let lam = (v.adjoint() * &w).re;
        let nw = w.norm_l2();
        if nw == 0.0 {
            return None;
        }
        v = Col::from_fn(n, |i| w[i] / nw);
        let diff = (lam - lam_prev).abs();
        let tol = rel_tol * lam.abs().max(f64::MIN_POSITIVE);
        if diff.is_finite() {
            if diff == 0.0 {
                return Some(LeadingPair {
                    value: lam,
                    vector: v.iter().copied().collect(),
                    iterations: k,
                    method: EigenMethod::Power,
                    degenerate: k <= 2,
                });
            }
            if diff_prev.is_finite() {
                let q = diff / diff_prev;
                if q < 1.0 {
                    // remaining error of a geometric sequence
                    let err = diff * q / (1.0 - q);
                    if err <= tol {
                        return Some(LeadingPair {
                            value: lam,
                            vector: v.iter().copied().collect(),
                            iterations: k,
                            method: EigenMethod::Power,
                            degenerate: k <= 2,
                        });
                    }
                    if k > 50 {
                        let needed = (tol * (1.0 - q) / diff).ln() / q.ln();
                        if k as f64 + needed > budget as f64 {
                            return None;
                        }
                    }
                }
            }
            diff_prev = diff;
        }
        lam_prev = lam;
    }
    None
}

/// Leading eigenpair by the size/sign policy: power iteration for large
/// PSD problems, full decomposition otherwise or on stagnation.
pub fn leading_eigenpair(mm: MatRef<'_, c64>, psd: bool) -> Result<LeadingPair> {
    let n = mm.nrows();
    if !psd || n <= FULL_EIGEN_MAX_N {
        return full_leading(mm);
    }
    match power_leading(mm, 1e-10, 100_000) {
        Some(p) => Ok(p),
        None => {
            let mut p = full_leading(mm)?;
            p.method = EigenMethod::Fallback;
            Ok(p)
        }
    }
}

/// `A^H diag(t) A`.
fn weighted_gram(a: MatRef<'_, c64>, t: &[f64]) -> Mat<c64> {
    let ta = Mat::<c64>::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * t[i]);
    let mut g = a.adjoint() * &ta;
    // exact Hermitian symmetry
    for j in 0..g.ncols() {
        g[(j, j)] = c64::new(g[(j, j)].re, 0.0);
        for i in j + 1..g.nrows() {
            g[(j, i)] = g[(i, j)].conj();
        }
    }
    g
}

/// Trimmed measurements `𝒯(|A x⋆|)`.
pub fn trimmed_measurements(a: &SensingMatrix, x_star: &[c64], trimmer: &TrimmingFunction) -> Result<Vec<f64>> {
    if x_star.len() != a.n() {
        return Err(Error::Dimension(format!("signal has length {}, expected {}", x_star.len(), a.n())));
    }
    let mat = a.matrix();
    Ok((0..a.m())
        .map(|i| {
            let y: c64 = (0..a.n()).map(|j| mat[(i, j)] * x_star[j]).sum();
            trimmer.eval(y.norm())
        })
        .collect())
}

fn spectral_estimate_seeded(
    a: &SensingMatrix,
    x_star: &[c64],
    trimmer: &TrimmingFunction,
    seed: u64,
) -> Result<TrialResult> {
    let n = a.n();
    let t = trimmed_measurements(a, x_star, trimmer)?;
    let mm = weighted_gram(a.matrix(), &t);
    let psd = !trimmer.has_negative_values();
    let lead = leading_eigenpair(mm.as_ref(), psd)?;
    let ip: c64 = x_star.iter().zip(&lead.vector).map(|(x, v)| x.conj() * v).sum();
    let overlap = (ip.norm_sqr() / n as f64).clamp(0.0, 1.0);
    let mut a_m = 0.0;
    for j in 0..n {
        for i in 0..n {
            a_m += (x_star[i].conj() * mm[(i, j)] * x_star[j]).re;
        }
    }
    Ok(TrialResult {
        seed,
        lambda1_hat: lead.value,
        overlap,
        iterations: lead.iterations,
        a_m: a_m / n as f64,
        method: lead.method,
        degenerate: lead.degenerate,
    })
}

/// Leading eigenpair of `M = A^H T A` and its overlap with `x⋆` (`‖x⋆‖² = n`).
pub fn spectral_estimate(a: &SensingMatrix, x_star: &[c64], trimmer: &TrimmingFunction) -> Result<TrialResult> {
    spectral_estimate_seeded(a, x_star, trimmer, 0)
}

#[derive(Debug, Clone, Default)]
pub struct TrialOptions {
    pub parallel: bool,
    /// Uniformly random `x⋆` instead of `√n e₁`.
    pub random_signal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalSummary {
    pub trimmer: String,
    pub delta: f64,
    pub n: usize,
    pub m: usize,
    pub trials: usize,
    pub seed: u64,
    pub lambda1_mean: f64,
    pub lambda1_std: f64,
    pub overlap_mean: f64,
    pub overlap_std: f64,
    pub a_m_mean: f64,
    pub results: Vec<TrialResult>,
}

fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let k = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / k;
    if k < 2.0 {
        return (mean, 0.0);
    }
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0);
    (mean, var.sqrt())
}

/// `round(δ n)`.
pub fn measurement_count(delta: f64, n: usize) -> usize {
    (delta * n as f64).round() as usize
}

/// One trial with seed `s`: sensing matrix from `s`, random signal (if any)
/// from `splitmix64(s)`.
pub fn run_single(model: &Model, n: usize, s: u64, random_signal: bool) -> Result<TrialResult> {
    let m = measurement_count(model.delta(), n);
    let a = sample_sensing(m, n, s)?;
    let x = if random_signal { random_signal_for(n, s) } else { canonical_signal(n) };
    spectral_estimate_seeded(&a, &x, model.trimmer(), s)
}

fn random_signal_for(n: usize, s: u64) -> Vec<c64> {
    random_signal(n, splitmix64(s))
}

/// Independent trials with seeds [`trial_seed`]`(seed, t)`; results are kept
/// in trial order so parallel and serial runs agree exactly.
pub fn run_trials_with(model: &Model, n: usize, trials: usize, seed: u64, opts: &TrialOptions) -> Result<EmpiricalSummary> {
    if trials == 0 {
        return Err(Error::Precondition("trials must be at least 1".into()));
    }
    let m = measurement_count(model.delta(), n);
    if n == 0 || m <= n {
        return Err(Error::Dimension(format!("need round(delta n) > n >= 1, got m = {m}, n = {n}")));
    }
    let one = |t: usize| run_single(model, n, trial_seed(seed, t as u64), opts.random_signal);
    let results: Vec<TrialResult> = if opts.parallel {
        (0..trials).into_par_iter().map(one).collect::<Result<_>>()?
    } else {
        (0..trials).map(one).collect::<Result<_>>()?
    };
    let (lambda1_mean, lambda1_std) = mean_std(results.iter().map(|r| r.lambda1_hat));
    let (overlap_mean, overlap_std) = mean_std(results.iter().map(|r| r.overlap));
    let (a_m_mean, _) = mean_std(results.iter().map(|r| r.a_m));
    Ok(EmpiricalSummary {
        trimmer: model.trimmer().to_string(),
        delta: model.delta(),
        n,
        m,
        trials,
        seed,
        lambda1_mean,
        lambda1_std,
        overlap_mean,
        overlap_std,
        a_m_mean,
        results,
    })
}

pub fn run_trials(model: &Model, n: usize, trials: usize, seed: u64) -> Result<EmpiricalSummary> {
    run_trials_with(model, n, trials, seed, &TrialOptions { parallel: true, random_signal: false })
}

#[derive(Serialize)]
struct DumpRecord {
    seed: u64,
    lambda1_hat: f64,
    overlap: f64,
    iterations: usize,
    a_m: f64,
}

/// One JSON object per trial.
pub fn write_trial_dump(summary: &EmpiricalSummary, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in &summary.results {
        let rec = DumpRecord { seed: r.seed, lambda1_hat: r.lambda1_hat, overlap: r.overlap, iterations: r.iterations, a_m: r.a_m };
        serde_json::to_writer(&mut f, &rec).map_err(|e| Error::Io(e.to_string()))?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

fn bulk_dims(m_dim: usize, delta: f64) -> Result<usize> {
    if m_dim > MAX_BULK_DIM {
        return Err(Error::Dimension(format!("m = {m_dim} exceeds {MAX_BULK_DIM}")));
    }
    let n = (m_dim as f64 / delta).round() as usize;
    if n == 0 || n >= m_dim {
        return Err(Error::Dimension(format!("m = {m_dim} gives rank n = {n}")));
    }
    Ok(n)
}

/// Eigenvalues of `A^H T A` (ascending) followed by the `m − n` zeros.
fn bulk_spectrum(m_dim: usize, n: usize, t: &[f64], seed: u64) -> Result<Vec<f64>> {
    let a = sample_sensing(m_dim, n, splitmix64(seed ^ 0xa11ce))?;
    let g = weighted_gram(a.matrix(), t);
    let ev = g
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Solver(format!("Hermitian eigendecomposition failed: {e:?}")))?;
    let mut all = vec![0.0; m_dim - n];
    all.extend(ev);
    all.sort_by(f64::total_cmp);
    Ok(all)
}

/// All `m` eigenvalues (ascending) of `T^{1/2} U R U^H T^{1/2}` with
/// `T` i.i.d. from the model and `rank R = round(m/δ)`.
pub fn empirical_bulk(m_dim: usize, model: &Model, seed: u64) -> Result<Vec<f64>> {
    let n = bulk_dims(m_dim, model.delta())?;
    let t: Vec<f64> = model.sample_trimmed(seed, m_dim)?.into_iter().map(|p| p.1).collect();
    bulk_spectrum(m_dim, n, &t, seed)
}

/// As [`empirical_bulk`] with the first diagonal entry of `T` set to `θ`;
/// returns the largest eigenvalue and the largest of the rest.
pub fn empirical_spiked(m_dim: usize, model: &Model, theta: f64, seed: u64) -> Result<(f64, f64)> {
    if !theta.is_finite() {
        return Err(Error::Precondition(format!("spike must be finite, got {theta}")));
    }
    let n = bulk_dims(m_dim, model.delta())?;
    let mut t: Vec<f64> = model.sample_trimmed(seed, m_dim)?.into_iter().map(|p| p.1).collect();
    t[0] = theta;
    let ev = bulk_spectrum(m_dim, n, &t, seed)?;
    Ok((ev[m_dim - 1], ev[m_dim - 2]))
}

fn top_eigenvalue(mat: MatRef<'_, c64>) -> Result<f64> {
    let ev = mat
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Solver(format!("Hermitian eigendecomposition failed: {e:?}")))?;
    Ok(ev[ev.len() - 1])
}

#[derive(Debug, Clone, PartialEq)]
pub enum RankOneReport {
    Solved {
        vartheta: f64,
        lambda1: f64,
        fixed_point_lambda: f64,
        lambda_residual: f64,
        overlap: f64,
        overlap_formula: f64,
        overlap_residual: f64,
    },
    /// `q = 0` and `λ₁(P) ≤ a`: the fixed point does not exist.
    DegenerateCase,
}

/// Checks `λ₁(D) = L(ϑ⋆)` with `L(ϑ) = λ₁(P + ϑ q q^H)` and
/// `L(ϑ⋆) = 1/ϑ⋆ + a`, for `D = [a q^H; q P]`, and the overlap formula
/// `|e₁^H v₁|² = L′/(L′ + 1/ϑ⋆²)` with `L′` by central differences.
pub fn verify_rank_one_reduction(d: MatRef<'_, c64>) -> Result<RankOneReport> {
    let k = d.nrows();
    if k != d.ncols() || k < 3 {
        return Err(Error::Dimension(format!("need a square matrix of size >= 3, got {}x{}", k, d.ncols())));
    }
    let a = d[(0, 0)].re;
    let q: Vec<c64> = (1..k).map(|i| d[(i, 0)]).collect();
    let p = Mat::<c64>::from_fn(k - 1, k - 1, |i, j| d[(i + 1, j + 1)]);
    let qnorm: f64 = q.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let lp = top_eigenvalue(p.as_ref())?;
    if qnorm == 0.0 && lp <= a {
        return Ok(RankOneReport::DegenerateCase);
    }
    let l_of = |th: f64| -> Result<f64> {
        let pt = Mat::<c64>::from_fn(k - 1, k - 1, |i, j| p[(i, j)] + q[i] * q[j].conj() * th);
        top_eigenvalue(pt.as_ref())
    };
    let h = |th: f64| -> Result<f64> { Ok(l_of(th)? - 1.0 / th - a) };
    let (mut lo, mut hi) = (1.0, 1.0);
    while h(lo)? > 0.0 {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::Solver("rank-one fixed point not bracketed below".into()));
        }
    }
    while h(hi)? < 0.0 {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Solver("rank-one fixed point not bracketed above".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-15 * mid {
            break;
        }
        if h(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let th = 0.5 * (lo + hi);
    let fixed_point_lambda = l_of(th)?;
    let step = 1e-5 * th;
    let dl = (l_of(th + step)? - l_of(th - step)?) / (2.0 * step);
    let overlap_formula = dl / (dl + 1.0 / (th * th));

    let lead = full_leading(d)?;
    let overlap = lead.vector[0].norm_sqr();
    Ok(RankOneReport::Solved {
        vartheta: th,
        lambda1: lead.value,
        fixed_point_lambda,
        lambda_residual: (lead.value - fixed_point_lambda).abs(),
        overlap,
        overlap_formula,
        overlap_residual: (overlap - overlap_formula).abs(),
    })
}

/// `A^H T A` for the canonical signal, as used by the reduction check.
pub fn data_matrix(a: &SensingMatrix, trimmer: &TrimmingFunction) -> Result<Mat<c64>> {
    let t = trimmed_measurements(a, &canonical_signal(a.n()), trimmer)?;
    Ok(weighted_gram(a.matrix(), &t))
}

/// `Q_m(λ) = Σ |A_{i1}|²/(λ − T_i)` for the canonical signal.
pub fn empirical_qm(a: &SensingMatrix, trimmer: &TrimmingFunction, lambda_grid: &[f64]) -> Result<Vec<f64>> {
    let t = trimmed_measurements(a, &canonical_signal(a.n()), trimmer)?;
    let tmax = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mat = a.matrix();
    lambda_grid
        .iter()
        .map(|&l| {
            if !(l > tmax) {
                return Err(Error::Domain(format!("Q_m needs lambda > max T = {tmax}, got {l}")));
            }
            Ok((0..a.m()).map(|i| mat[(i, 0)].norm_sqr() / (l - t[i])).sum())
        })
        .collect()
}

/// `a_m = A₁^H T A₁` for the canonical signal.
pub fn empirical_am(a: &SensingMatrix, trimmer: &TrimmingFunction) -> Result<f64> {
    let t = trimmed_measurements(a, &canonical_signal(a.n()), trimmer)?;
    let mat = a.matrix();
    Ok((0..a.m()).map(|i| mat[(i, 0)].norm_sqr() * t[i]).sum())
}

#[derive(Debug, Clone)]
pub struct EThetaReport {
    /// Descending eigenvalues of `E(ϑ)`.
    pub eigenvalues: Vec<f64>,
    /// Descending trimmed measurements.
    pub sorted_t: Vec<f64>,
    pub a_m: f64,
    /// Largest violation of `T₍ᵢ₊₁₎ ≤ λᵢ ≤ T₍ᵢ₋₁₎` (0 when it holds).
    pub interlacing_violation: f64,
    /// `λ₁(E)` when it exceeds `T₍₁₎`, with `|Q_m(λ) − 1/(λ − a_m − 1/ϑ)|`.
    pub outlier: Option<(f64, f64)>,
}

/// Builds `E(ϑ) = B^H (T + ϑ T A₁ (T A₁)^H) B` with `B` an orthonormal basis
/// of `A₁^⊥` taken from a full QR of `A₁`.
pub fn e_theta_check(a: &SensingMatrix, trimmer: &TrimmingFunction, vartheta: f64) -> Result<EThetaReport> {
    let m = a.m();
    let t = trimmed_measurements(a, &canonical_signal(a.n()), trimmer)?;
    let mat = a.matrix();
    let a1 = Mat::<c64>::from_fn(m, 1, |i, _| mat[(i, 0)]);
    let full_q = a1.qr().compute_Q();
    let b = full_q.get(.., 1..m);
    let ta1: Vec<c64> = (0..m).map(|i| a1[(i, 0)] * t[i]).collect();
    // B^H T B + ϑ (B^H T A₁)(B^H T A₁)^H
    let mut e = weighted_gram(b, &t);
    let bt: Vec<c64> = (0..m - 1).map(|j| (0..m).map(|i| b[(i, j)].conj() * ta1[i]).sum()).collect();
    for j in 0..m - 1 {
        for i in 0..m - 1 {
            e[(i, j)] += bt[i] * bt[j].conj() * vartheta;
        }
    }
    let mut ev = e
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Solver(format!("Hermitian eigendecomposition failed: {e:?}")))?;
    ev.reverse();
    let mut ts = t.clone();
    ts.sort_by(|x, y| y.total_cmp(x));
    let mut viol: f64 = 0.0;
    for (i, &l) in ev.iter().enumerate() {
        // λ_{i+1} in 1-based terms: ≥ T₍ᵢ₊₂₎ and (for i ≥ 1) ≤ T₍ᵢ₎
        viol = viol.max(ts[i + 1] - l);
        if i >= 1 {
            viol = viol.max(l - ts[i - 1]);
        }
    }
    let a_m: f64 = (0..m).map(|i| a1[(i, 0)].norm_sqr() * t[i]).sum();
    let outlier = if ev[0] > ts[0] {
        let l = ev[0];
        let qm: f64 = (0..m).map(|i| a1[(i, 0)].norm_sqr() / (l - t[i])).sum();
        Some((l, (qm - 1.0 / (l - a_m - 1.0 / vartheta)).abs()))
    } else {
        None
    };
    Ok(EThetaReport { eigenvalues: ev, sorted_t: ts, a_m, interlacing_violation: viol, outlier })
}
