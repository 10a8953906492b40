//! Tests for the adaptive Gauss–Kronrod integrator.

use nmvm_risk::quad::{integrate, integrate_with_breakpoints};
use nmvm_risk::Error;

#[test]
fn exact_on_low_degree_polynomials() {
    let q = integrate(|x| x * x, 0.0, 1.0, 1e-14, 1e-14).unwrap();
    assert!((q.value - 1.0 / 3.0).abs() < 1e-15, "got {}", q.value);
    // A single 15-point Kronrod panel integrates degree-22 polynomials
    // exactly; the requested tolerance must stay above the 50·ε·∫|f|
    // roundoff floor of the error estimator.
    let q = integrate(|x| x.powi(10) - 3.0 * x.powi(7) + x, -1.0, 2.0, 1e-11, 1e-12).unwrap();
    let exact = (2048.0 - (-1.0_f64)) / 11.0 - 3.0 * (256.0 - 1.0) / 8.0 + (4.0 - 1.0) / 2.0;
    assert!((q.value - exact).abs() < 1e-12 * exact.abs(), "got {}", q.value);
}

#[test]
fn matches_known_transcendental_integrals() {
    let q = integrate(f64::sin, 0.0, std::f64::consts::PI, 1e-14, 1e-13).unwrap();
    assert!((q.value - 2.0).abs() < 1e-13);

    // Full-mass Gaussian integral.
    let q = integrate(|x| (-0.5 * x * x).exp(), -10.0, 10.0, 1e-14, 1e-13).unwrap();
    let sqrt_2pi = (2.0 * std::f64::consts::PI).sqrt();
    assert!((q.value - sqrt_2pi).abs() < 1e-13 * sqrt_2pi);

    // Damped oscillation: ∫_0^20 e^{-x} cos x dx = 1/2 + e^{-20}(sin 20 − cos 20)/2.
    let q = integrate(|x| (-x).exp() * x.cos(), 0.0, 20.0, 1e-14, 1e-13).unwrap();
    let exact = 0.5 + (-20.0_f64).exp() * (20.0_f64.sin() - 20.0_f64.cos()) / 2.0;
    assert!((q.value - exact).abs() < 1e-13);
}

#[test]
fn handles_integrable_endpoint_singularity() {
    // ∫_0^1 x^{-1/2} dx = 2; nodes never touch the endpoints.
    let q = integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, 1e-10, 1e-10).unwrap();
    assert!((q.value - 2.0).abs() < 1e-9, "got {}", q.value);
}

#[test]
fn narrow_spike_found_with_breakpoints() {
    // Gaussian spike of width 1e-3 centred at 0.3 inside [0, 1000]: a seeded
    // panel boundary near the spike lets the subdivision find it cheaply.
    let f = |x: f64| (-0.5 * ((x - 0.3) / 1e-3).powi(2)).exp();
    let exact = 1e-3 * (2.0 * std::f64::consts::PI).sqrt();
    let q = integrate_with_breakpoints(f, &[0.0, 0.25, 0.35, 1000.0], 1e-16, 1e-12).unwrap();
    assert!(
        (q.value - exact).abs() < 1e-12 * exact,
        "got {}, expected {exact}",
        q.value
    );
}

#[test]
fn reports_failure_on_divergent_integral() {
    let result = integrate(|x| 1.0 / x, 0.0, 1.0, 1e-10, 1e-10);
    assert!(matches!(result, Err(Error::QuadratureFailure(_))));
}

#[test]
fn rejects_bad_boundaries() {
    assert!(matches!(
        integrate_with_breakpoints(|x: f64| x, &[1.0, 0.5], 1e-10, 1e-10),
        Err(Error::QuadratureFailure(_))
    ));
    assert!(matches!(
        integrate_with_breakpoints(|x: f64| x, &[1.0], 1e-10, 1e-10),
        Err(Error::QuadratureFailure(_))
    ));
}
