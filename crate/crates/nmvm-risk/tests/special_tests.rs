#![allow(clippy::excessive_precision)] // frozen oracle constants keep their full transcribed digits

//! Tests for the scalar special functions: log-scale modified Bessel K and
//! the standard normal pdf/cdf/quantile.

use nmvm_risk::special::{bessel_k_log, norm_cdf, norm_pdf, norm_quantile, norm_sf};
use nmvm_risk::Error;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

// ---------------------------------------------------------------------------
// Reference values computed with 40-digit arithmetic (mpmath besselk).
// ---------------------------------------------------------------------------

#[test]
fn bessel_matches_high_precision_references() {
    let cases: &[(f64, f64, f64)] = &[
        // (order, argument, ln K)
        (0.5, 1.0, -0.77420864735527256764),
        (1.0, 1.0, -0.50765194821075233095),
        (0.0, 1.0, 0.42102443824070833334_f64.ln()),
        (2.0, 1.0, 0.48540867156564619815),
        (1.689, 0.00789, 8.5579090349606945571),
        (0.0, 0.01, 1.552072478848215843),
        (2.5, 0.1, 7.0792022745188130362),
        (5.0, 10.0, -9.7629980490662249065),
        (0.5, 100.0, -102.07679374034931825),
        (3.0, 2.0, -0.43481350347114886148),
        (1.3, 7.0, -7.6509542437247761864),
        (60.0, 1e-8, 1330.6703571516281908),
        (0.311, 1e-10, 7.7414554721909089124),
        (4.5, 700.0, -703.03547333850964024),
    ];
    for &(order, z, expected_ln) in cases {
        let got = bessel_k_log(order, z).unwrap();
        let tol = 1e-11 * expected_ln.abs().max(1.0);
        assert!(
            (got - expected_ln).abs() <= tol,
            "ln K_{order}({z}): got {got}, expected {expected_ln}"
        );
    }
}

#[test]
fn bessel_matches_half_integer_closed_forms() {
    // K_{1/2}(z) = sqrt(pi/(2z)) e^{-z}
    // K_{3/2}(z) = sqrt(pi/(2z)) e^{-z} (1 + 1/z)
    // K_{5/2}(z) = sqrt(pi/(2z)) e^{-z} (1 + 3/z + 3/z^2)
    for &z in &[0.001, 0.05, 0.5, 1.0, 2.0, 3.5, 20.0, 150.0, 699.0] {
        let base = 0.5 * (std::f64::consts::PI / (2.0 * z)).ln() - z;
        let expect = [
            base,
            base + (1.0 + 1.0 / z).ln(),
            base + (1.0 + 3.0 / z + 3.0 / (z * z)).ln(),
        ];
        for (i, &order) in [0.5, 1.5, 2.5].iter().enumerate() {
            let got = bessel_k_log(order, z).unwrap();
            assert!(
                (got - expect[i]).abs() <= 1e-12 * expect[i].abs().max(1.0),
                "ln K_{order}({z}): got {got}, expected {}",
                expect[i]
            );
        }
    }
}

// ---------------------------------------------------------------------------
// Integral-definition oracle: K_order(z) = ∫_0^∞ exp(-z cosh t) cosh(order·t) dt
// evaluated by adaptive Simpson quadrature, independent of the implementation
// under test.
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

fn integrate_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // First pass with a crude absolute tolerance to get the scale, second pass
    // with the tolerance tied to the estimate.
    let rough = simpson_rec(f, a, b, fa, fm, fb, whole, whole.abs() * 1e-6 + 1e-300, 30);
    simpson_rec(f, a, b, fa, fm, fb, whole, rough.abs() * rel_tol, 48)
}

fn bessel_k_by_quadrature(order: f64, z: f64) -> f64 {
    let nu = order.abs();
    let log_f = |t: f64| -> f64 {
        // ln(exp(-z cosh t) cosh(nu t)), with ln cosh evaluated stably.
        let c = nu * t;
        let ln_cosh = if c > 30.0 {
            c - std::f64::consts::LN_2
        } else {
            c.cosh().ln()
        };
        -z * t.cosh() + ln_cosh
    };
    // Peak of the integrand, then an upper limit where it has fallen by e^-90.
    let t_star = libm::asinh(nu / z);
    let ln_peak = log_f(t_star).max(log_f(0.0));
    let mut upper = t_star.max(1.0);
    while log_f(upper) > ln_peak - 90.0 && upper < 60.0 {
        upper += 1.0;
    }
    let f = |t: f64| (-z * t.cosh()).exp() * (nu * t).cosh();
    integrate_simpson(&f, 0.0, upper, 1e-13)
}

#[test]
fn bessel_matches_integral_definition_on_grid() {
    let mut order = -5.0;
    while order <= 5.0 + 1e-12 {
        for &z in &[0.01, 0.1, 1.0, 10.0, 100.0] {
            let ln_k = bessel_k_log(order, z).unwrap();
            let reference = bessel_k_by_quadrature(order, z);
            let got = ln_k.exp();
            assert!(
                (got - reference).abs() <= 1e-10 * reference.abs(),
                "K_{order}({z}): got {got}, quadrature reference {reference}"
            );
        }
        order += 0.5;
    }
}

// ---------------------------------------------------------------------------
// Structural identities.
// ---------------------------------------------------------------------------

#[test]
fn bessel_recurrence_identity_holds() {
    // K_{order+1}(z) = K_{order-1}(z) + (2·order/z)·K_order(z), checked at
    // random points after rescaling by the largest term.
    let mut rng = StdRng::seed_from_u64(0x5eed_b355);
    for _ in 0..300 {
        let order: f64 = rng.gen_range(-58.5..58.5);
        let z = 10f64.powf(rng.gen_range(-6.0..2.8)).min(650.0);
        let lk_m1 = bessel_k_log(order - 1.0, z).unwrap();
        let lk_0 = bessel_k_log(order, z).unwrap();
        let lk_p1 = bessel_k_log(order + 1.0, z).unwrap();
        let scale = lk_p1.max(lk_m1);
        let a = (lk_p1 - scale).exp();
        let b = (lk_m1 - scale).exp();
        let c = (2.0 * order / z) * (lk_0 - scale).exp();
        let magnitude = a.abs().max(b.abs()).max(c.abs());
        assert!(
            (a - b - c).abs() <= 1e-10 * magnitude,
            "recurrence failed at order={order}, z={z}: {a} vs {b} + {c}"
        );
    }
}

#[test]
fn bessel_order_symmetry_is_exact() {
    for &order in &[0.3, 1.0, 2.5, 17.25, 59.9] {
        for &z in &[1e-6, 0.37, 2.0, 55.0, 700.0] {
            let plus = bessel_k_log(order, z).unwrap();
            let minus = bessel_k_log(-order, z).unwrap();
            assert_eq!(plus.to_bits(), minus.to_bits(), "order={order}, z={z}");
        }
    }
}

#[test]
fn bessel_rejects_out_of_domain_inputs() {
    for (order, z) in [
        (1.0, 0.0),
        (1.0, -3.0),
        (1.0, 700.0 + 1e-9),
        (60.5, 1.0),
        (-60.5, 1.0),
        (1.0, f64::NAN),
        (f64::NAN, 1.0),
        (1.0, f64::INFINITY),
    ] {
        match bessel_k_log(order, z) {
            Err(Error::Domain(_)) => {}
            other => panic!("expected Domain error for order={order}, z={z}, got {other:?}"),
        }
    }
    // Boundary values are accepted.
    assert!(bessel_k_log(60.0, 700.0).is_ok());
    assert!(bessel_k_log(-60.0, 1e-12).is_ok());
}

// ---------------------------------------------------------------------------
// Standard normal.
// ---------------------------------------------------------------------------

#[test]
fn normal_known_values() {
    assert!((norm_pdf(0.0) - 0.3989422804014327).abs() < 1e-16);
    assert!((norm_cdf(0.0) - 0.5).abs() < 1e-16);
    assert!((norm_sf(0.0) - 0.5).abs() < 1e-16);
    // Φ̄(1.6448536269514722) = 0.05 to machine accuracy.
    assert!((norm_sf(1.6448536269514722) - 0.05).abs() < 1e-15);
    assert!((norm_pdf(1.6448536269514722) - 0.10313564037537130096).abs() < 1e-15);
    // Φ(-8) stays relatively accurate deep in the tail.
    let p = norm_cdf(-8.0);
    assert!((p - 6.22096057427178e-16).abs() < 1e-27, "got {p}");
}

#[test]
fn normal_cdf_derivative_matches_pdf() {
    let mut rng = StdRng::seed_from_u64(0x6e30_72ad);
    let h = 1e-5;
    for _ in 0..100 {
        let x: f64 = rng.gen_range(-6.0..6.0);
        let numeric = (norm_cdf(x + h) - norm_cdf(x - h)) / (2.0 * h);
        assert!(
            (numeric - norm_pdf(x)).abs() <= 1e-9,
            "derivative mismatch at x={x}: {numeric} vs {}",
            norm_pdf(x)
        );
    }
}

#[test]
fn normal_quantile_round_trip() {
    assert!((norm_quantile(0.95).unwrap() - 1.6448536269514722).abs() < 1e-13);
    assert!(norm_quantile(0.5).unwrap().abs() < 1e-15);

    let fixed = [
        1e-250, 1e-12, 1e-5, 0.02424, 0.02426, 0.1, 0.25, 0.5, 0.75, 0.9, 0.97574, 0.97576,
        0.99999, 0.9999999999,
    ];
    for &p in &fixed {
        let q = norm_quantile(p).unwrap();
        assert!(
            (norm_cdf(q) - p).abs() <= 1e-12,
            "round trip failed at p={p}: q={q}, cdf={}",
            norm_cdf(q)
        );
    }
    let mut rng = StdRng::seed_from_u64(0x9a41_77fe);
    for _ in 0..1000 {
        let p: f64 = rng.gen_range(1e-9..1.0 - 1e-9);
        let q = norm_quantile(p).unwrap();
        assert!((norm_cdf(q) - p).abs() <= 1e-12, "p={p}, q={q}");
    }
    // Inverse direction on the relatively-accurate side of the distribution.
    for i in 0..=330 {
        let x = -30.0 + i as f64 * 0.1; // −30 … 3
        let q = norm_quantile(norm_cdf(x)).unwrap();
        assert!(
            (q - x).abs() <= 1e-11 * x.abs().max(1.0),
            "quantile(cdf({x})) = {q}"
        );
    }
}

#[test]
fn normal_quantile_rejects_out_of_domain() {
    for p in [0.0, 1.0, -0.2, 1.7, f64::NAN] {
        assert!(matches!(norm_quantile(p), Err(Error::Domain(_))), "p={p}");
    }
}
