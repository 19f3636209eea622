use haarspec::freeconv::*;
use haarspec::theory::{self, lambda, predict, Regime};
use haarspec::{Model, QuadratureSettings, TrimmingFunction};
use num_complex::Complex64;
use proptest::prelude::*;

fn mm3() -> Model {
    Model::for_theory(TrimmingFunction::mm(3.0).unwrap(), 3.0, QuadratureSettings::default()).unwrap()
}

fn scan(f: impl Fn(f64) -> f64, a: f64, b: f64, coarse: f64, fine: f64, maximize: bool) -> f64 {
    let sgn = if maximize { -1.0 } else { 1.0 };
    let best = |lo: f64, hi: f64, h: f64| {
        let k = ((hi - lo) / h).round() as usize;
        (0..=k)
            .map(|i| lo + i as f64 * h)
            .map(|x| (x, sgn * f(x)))
            .fold((lo, f64::INFINITY), |acc, p| if p.1 < acc.1 { p } else { acc })
            .0
    };
    let x0 = best(a, b, coarse);
    best((x0 - 2.0 * coarse).max(a), (x0 + 2.0 * coarse).min(b), fine)
}

#[test]
fn support_matches_grid_scan() {
    let m = mm3();
    let s = bulk_support(&m).unwrap();
    let tl = scan(|t| lambda(&m, t).unwrap(), -50.0, 0.0, 1e-2, 1e-4, true);
    let tr = scan(|t| lambda(&m, t).unwrap(), 1.0, 50.0, 1e-2, 1e-4, false);
    assert!((s.tau_l - tl).abs() < 2e-4, "{} vs {tl}", s.tau_l);
    assert!((s.tau_r - tr).abs() < 2e-4, "{} vs {tr}", s.tau_r);
    assert!((s.lambda_l - lambda(&m, tl).unwrap()).abs() < 1e-6);
    assert!((s.lambda_r - lambda(&m, tr).unwrap()).abs() < 1e-6);
    assert!(s.lambda_l >= 0.0);
    assert!(s.lambda_r >= s.lambda_l + 1.0 / 3.0);
}

#[test]
fn support_gap_for_several_trimmers() {
    for delta in [1.5, 3.0, 6.0] {
        for t in [TrimmingFunction::mm(delta).unwrap(), TrimmingFunction::lal(delta).unwrap()] {
            let m = Model::for_theory(t, delta, QuadratureSettings::default()).unwrap();
            let s = bulk_support(&m).unwrap();
            assert!(s.lambda_l >= 0.0);
            assert!(s.lambda_r >= s.lambda_l + 1.0 / delta, "{s:?}");
        }
    }
}

#[test]
fn real_axis_round_trip() {
    let m = mm3();
    let s = bulk_support(&m).unwrap();
    for x in [s.lambda_r + 0.1, s.lambda_r + 1.0, s.lambda_r + 10.0] {
        let tau = real_preimage(&m, &s, x).unwrap();
        assert!(tau > s.tau_r);
        assert!((lambda(&m, tau).unwrap() - x).abs() < 1e-8);
        let p = subordinate(&m, Complex64::new(x, -1e-8)).unwrap();
        assert!((p.tau_t.re - tau).abs() < 1e-6, "{} vs {tau}", p.tau_t);
        assert!(p.tau_t.im < 0.0);
    }
    for x in [s.lambda_l - 0.05, s.lambda_l - 0.1] {
        let tau = real_preimage(&m, &s, x).unwrap();
        assert!(tau < s.tau_l);
        assert!((lambda(&m, tau).unwrap() - x).abs() < 1e-8);
    }
}

#[test]
fn boundary_map_is_increasing() {
    let m = mm3();
    let s = bulk_support(&m).unwrap();
    let taus: Vec<f64> = (1..=20).map(|k| real_preimage(&m, &s, s.lambda_r + 0.05 * k as f64).unwrap()).collect();
    assert!(taus.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn conjugate_symmetry() {
    let m = mm3();
    for z in [Complex64::new(0.4, -0.05), Complex64::new(1.2, -0.3), Complex64::new(0.1, -1e-3)] {
        let lower = subordinate(&m, z).unwrap();
        let upper = subordinate(&m, z.conj()).unwrap();
        assert!(upper.tau_t.im > 0.0);
        assert!((upper.tau_t - lower.tau_t.conj()).norm() < 1e-8, "{} vs {}", upper.tau_t, lower.tau_t);
        assert!((upper.cauchy - lower.cauchy.conj()).norm() < 1e-8);
    }
}

#[test]
fn large_z_expansion() {
    let m = mm3();
    let z = Complex64::new(1e6, -1.0);
    let p = subordinate(&m, z).unwrap();
    let cont = p.continuous_cauchy(3.0);
    // nonzero part carries mass 1/δ
    assert!(((cont * z).re - 1.0 / 3.0).abs() < 1e-3 / 3.0);
    // next term: E[T]/δ / z²
    let et = m.expect(|_, t| t).unwrap();
    let second = (p.cauchy - 1.0 / z) * z * z;
    assert!((second.re - et / 3.0).abs() < 1e-3, "{second} vs {}", et / 3.0);
}

#[test]
fn density_properties() {
    let m = mm3();
    let s = bulk_support(&m).unwrap();
    let grid: Vec<f64> = (1..=400).map(|i| 1.2 * i as f64 / 400.0).collect();
    let b = bulk_density(&m, &grid).unwrap();
    assert!(b.converged.iter().all(|&c| c));
    assert!(b.density.iter().all(|&r| r >= 0.0));
    for (x, r) in grid.iter().zip(&b.density) {
        if *x < s.lambda_l - 0.01 || *x > s.lambda_r + 0.01 {
            assert!(*r < 1e-6, "density {r} at {x}");
        }
    }
    assert!((b.mass() - 1.0 / 3.0).abs() < 1e-2, "mass {}", b.mass());
}

#[test]
fn chunked_density_equals_whole() {
    let m = mm3();
    let grid: Vec<f64> = (1..=24).map(|i| 0.04 * i as f64).collect();
    let whole = bulk_density(&m, &grid).unwrap();
    let mut parts = Vec::new();
    for c in grid.chunks(5) {
        parts.extend(bulk_density(&m, c).unwrap().density);
    }
    assert_eq!(parts, whole.density);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let serial = pool.install(|| bulk_density(&m, &grid).unwrap());
    assert_eq!(serial.density, whole.density);
}

#[test]
fn outlier_agrees_with_theory() {
    let m = mm3();
    let s = bulk_support(&m).unwrap();
    let p = predict(&m).unwrap();
    assert_eq!(p.regime, Regime::Informative);
    let th = p.theta_star.unwrap();
    let vs = theory::vartheta_star(&m).unwrap();
    assert!((vs.theta - th).abs() < 1e-6 * th.max(1.0));
    let out = outlier_location(&m, &s, th).unwrap().unwrap();
    assert!((out - p.lambda1_limit).abs() < 1e-8);
    assert!(out > s.lambda_r);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solver_stays_in_lower_half_plane(x in 0.01f64..2.0, e in -4.0f64..0.0) {
        let m = mm3();
        let z = Complex64::new(x, -(10f64.powf(e)));
        let p = subordinate(&m, z).unwrap();
        prop_assert!(p.tau_t.im < 0.0);
        prop_assert!(p.residual < 1e-10 * z.norm().max(1.0));
        prop_assert!(p.cauchy.im >= -1e-12);
    }
}
