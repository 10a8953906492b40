#![allow(clippy::excessive_precision)] // frozen oracle constants keep their full transcribed digits

//! Tests for the mixing laws: moments, tilting, densities, and sampling.

use nmvm_risk::mixing::MixingModel;
use nmvm_risk::quad;
use nmvm_risk::Error;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn assert_rel(got: f64, expected: f64, tol: f64, what: &str) {
    assert!(
        (got - expected).abs() <= tol * expected.abs().max(1e-300),
        "{what}: got {got}, expected {expected}"
    );
}

// ---------------------------------------------------------------------------
// Moments.
// ---------------------------------------------------------------------------

#[test]
fn zeroth_moment_is_one_for_all_kinds() {
    let models = [
        MixingModel::gig(1.0, 1.0, 1.0).unwrap(),
        MixingModel::gig(2.3, 0.0, 1.7).unwrap(),
        MixingModel::gig(-2.5, 0.8, 0.0).unwrap(),
        MixingModel::degenerate(0.7).unwrap(),
        MixingModel::numeric(vec![1.0, 2.0, 3.0], vec![0.0, 1.0, 0.0]).unwrap(),
    ];
    for m in &models {
        assert_eq!(m.moment(0).unwrap(), 1.0);
    }
}

#[test]
fn degenerate_moments_are_powers() {
    let m = MixingModel::degenerate(2.0).unwrap();
    assert_eq!(m.moment(3).unwrap(), 8.0);
    assert_eq!(m.max_finite_moment(), None);
}

#[test]
fn interior_gig_moments_match_references() {
    // 40-digit references: E[Θ^l] = (χ/ψ)^{l/2} K_{λ+l}(√(χψ)) / K_λ(√(χψ)).
    let m = MixingModel::gig(1.0, 1.0, 1.0).unwrap();
    assert_rel(m.moment(1).unwrap(), 2.6994839355937723439, 1e-12, "GIG(1,1,1) E[Θ]");
    assert_rel(m.moment(2).unwrap(), 11.797935742375089376, 1e-12, "GIG(1,1,1) E[Θ²]");

    let half = MixingModel::gig(-0.5, 1.0, 1.0).unwrap();
    assert_rel(half.moment(1).unwrap(), 1.0, 1e-12, "GIG(-1/2,1,1) E[Θ]");
}

#[test]
fn gamma_branch_moments() {
    // χ = 0: Gamma(λ, rate ψ/2), E[Θ] = 2λ/ψ.
    let m = MixingModel::gig(2.3, 0.0, 1.7).unwrap();
    assert_rel(m.moment(1).unwrap(), 2.7058823529411763323, 1e-13, "Gamma E[Θ]");
    assert_eq!(m.max_finite_moment(), None);
}

#[test]
fn inverse_gamma_branch_moments_and_guard() {
    // ψ = 0: inverse-Gamma(−λ, χ/2); E[Θ^l] finite only for l < −λ.
    let m = MixingModel::gig(-2.5, 0.8, 0.0).unwrap();
    assert_rel(m.moment(1).unwrap(), 0.26666666666666668147, 1e-13, "InvGamma E[Θ]");
    assert_rel(m.moment(2).unwrap(), 0.21333333333333335702, 1e-13, "InvGamma E[Θ²]");
    assert_eq!(m.max_finite_moment(), Some(2));
    match m.moment(3) {
        Err(Error::MomentNotFinite { requested: 3, ceiling: 2 }) => {}
        other => panic!("expected MomentNotFinite, got {other:?}"),
    }
    match m.tilt(3) {
        Err(Error::MomentNotFinite { requested: 3, ceiling: 2 }) => {}
        other => panic!("expected MomentNotFinite from tilt, got {other:?}"),
    }
    // Tilting inside the finite range lands on a still-valid branch.
    let tilted = m.tilt(2).unwrap();
    match &tilted {
        MixingModel::Gig(p) => {
            assert_eq!(p.lambda, -0.5);
            assert_eq!(p.psi, 0.0);
        }
        other => panic!("expected GIG, got {other:?}"),
    }
}

#[test]
fn moments_match_direct_quadrature_on_gig_grid() {
    // Independent oracle: ∫ θ^l π(θ) dθ on the log axis.
    let grid = [
        (1.0, 1.0, 1.0),
        (-1.689, 1.380, 4.509e-5),
        (0.0, 2.0, 0.5),
        (2.5, 0.3, 1.2),
        (-0.5, 1.0, 1.0),
    ];
    for &(lambda, chi, psi) in &grid {
        let m = MixingModel::gig(lambda, chi, psi).unwrap();
        for l in 1..=4u32 {
            let closed = m.moment(l).unwrap();
            let numeric = moment_by_quadrature(&m, l);
            assert_rel(
                numeric,
                closed,
                1e-8,
                &format!("GIG({lambda},{chi},{psi}) moment {l}"),
            );
        }
    }
}

fn moment_by_quadrature(m: &MixingModel, l: u32) -> f64 {
    // Wide log-axis window around the untilted mode; the tilted peak lives at
    // most ~ln(moment scale) to the right, well inside ±120.
    let theta_star = match m {
        MixingModel::Gig(p) => {
            let root = (p.lambda * p.lambda + p.chi * p.psi).sqrt();
            if p.lambda > 0.0 {
                (p.lambda + root) / p.psi
            } else if p.psi == 0.0 {
                -p.chi / (2.0 * p.lambda)
            } else {
                p.chi / (root - p.lambda)
            }
        }
        _ => unreachable!("grid is GIG-only"),
    };
    let u0 = theta_star.ln();
    let points: Vec<f64> = (0..=120).map(|i| u0 - 120.0 + 2.0 * i as f64).collect();
    quad::integrate_with_breakpoints(
        |u: f64| {
            let theta = u.exp();
            let log_f = f64::from(l) * u + m.log_density(theta) + u;
            if log_f == f64::NEG_INFINITY {
                0.0
            } else {
                log_f.exp()
            }
        },
        &points,
        1e-300,
        1e-11,
    )
    .unwrap()
    .value
}

// ---------------------------------------------------------------------------
// Tilting.
// ---------------------------------------------------------------------------

#[test]
fn tilt_shifts_gig_order_parameter() {
    let m = MixingModel::gig(-1.689, 1.380, 4.509e-5).unwrap();
    match m.tilt(1).unwrap() {
        MixingModel::Gig(p) => {
            assert!((p.lambda - (-0.689)).abs() < 1e-15);
            assert_eq!(p.chi, 1.380);
            assert_eq!(p.psi, 4.509e-5);
        }
        other => panic!("expected GIG, got {other:?}"),
    }
}

#[test]
fn tilt_zero_is_identity_and_point_mass_is_invariant() {
    let g = MixingModel::gig(1.0, 1.0, 1.0).unwrap();
    assert_eq!(g.tilt(0).unwrap(), g);
    let d = MixingModel::degenerate(0.7).unwrap();
    assert_eq!(d.tilt(5).unwrap(), d);
}

#[test]
fn tilt_composition_on_numeric_density() {
    let nodes: Vec<f64> = (0..=100).map(|i| 0.5 + 2.5 * i as f64 / 100.0).collect();
    let raw: Vec<f64> = nodes.iter().map(|x| (-(x - 1.5f64).powi(2) * 2.0).exp()).collect();
    let mass: f64 = nodes
        .windows(2)
        .zip(raw.windows(2))
        .map(|(x, v)| 0.5 * (v[0] + v[1]) * (x[1] - x[0]))
        .sum();
    let values: Vec<f64> = raw.iter().map(|v| v / mass).collect();
    let m = MixingModel::numeric(nodes.clone(), values).unwrap();

    let twice = m.tilt(1).unwrap().tilt(2).unwrap();
    let once = m.tilt(3).unwrap();
    for i in 0..50 {
        let theta = 0.55 + 2.4 * i as f64 / 49.0;
        let a = twice.log_density(theta).exp();
        let b = once.log_density(theta).exp();
        assert!(
            (a - b).abs() <= 1e-10 * b.abs().max(1.0),
            "tilt composition differs at θ={theta}: {a} vs {b}"
        );
    }
}

#[test]
fn tilted_densities_integrate_to_one() {
    let models = [
        MixingModel::gig(1.0, 1.0, 1.0).unwrap(),
        MixingModel::gig(-1.689, 1.380, 4.509e-5).unwrap(),
        MixingModel::gig(2.3, 0.0, 1.7).unwrap(),
    ];
    for m in &models {
        for l in 0..=4u32 {
            let mass = moment_by_quadrature(&m.tilt(l).unwrap(), 0);
            assert!(
                (mass - 1.0).abs() <= 1e-9,
                "tilt level {l} density mass {mass}"
            );
        }
    }
}

// ---------------------------------------------------------------------------
// Numeric kind specifics.
// ---------------------------------------------------------------------------

#[test]
fn numeric_triangle_density_moments() {
    // Triangle on [1,3] peaked at 2: E[Θ] = 2, E[Θ²] = 25/6.
    let m = MixingModel::numeric(vec![1.0, 2.0, 3.0], vec![0.0, 1.0, 0.0]).unwrap();
    assert_rel(m.moment(1).unwrap(), 2.0, 1e-12, "triangle E[Θ]");
    assert_rel(m.moment(2).unwrap(), 25.0 / 6.0, 1e-12, "triangle E[Θ²]");
    assert_eq!(m.max_finite_moment(), None);
}

#[test]
fn numeric_density_must_be_normalised() {
    let r = MixingModel::numeric(vec![1.0, 2.0, 3.0], vec![0.0, 1.1, 0.0]);
    assert!(matches!(r, Err(Error::InvalidModel(_))));
}

#[test]
fn gig_branch_invariant_is_enforced() {
    // (λ<0, χ=0) and (λ=0 with a zero parameter) and (λ>0, ψ=0) all invalid.
    assert!(MixingModel::gig(-1.0, 0.0, 1.0).is_err());
    assert!(MixingModel::gig(0.0, 0.0, 1.0).is_err());
    assert!(MixingModel::gig(0.0, 1.0, 0.0).is_err());
    assert!(MixingModel::gig(1.0, 1.0, 0.0).is_err());
    assert!(MixingModel::gig(f64::NAN, 1.0, 1.0).is_err());
    assert!(MixingModel::gig(1.0, -0.1, 1.0).is_err());
    // One valid representative of each branch.
    assert!(MixingModel::gig(-1.0, 1.0, 0.0).is_ok());
    assert!(MixingModel::gig(0.0, 1.0, 1.0).is_ok());
    assert!(MixingModel::gig(1.0, 0.0, 1.0).is_ok());
    // Degenerate needs a positive atom.
    assert!(MixingModel::degenerate(0.0).is_err());
    assert!(MixingModel::degenerate(-1.0).is_err());
}

// ---------------------------------------------------------------------------
// Sampling.
// ---------------------------------------------------------------------------

#[test]
fn sampling_is_deterministic_given_seed() {
    let m = MixingModel::gig(-1.689, 1.380, 4.509e-5).unwrap();
    let a = m.sample(&mut StdRng::seed_from_u64(42), 1000);
    let b = m.sample(&mut StdRng::seed_from_u64(42), 1000);
    assert_eq!(a, b);
    assert!(a.iter().all(|t| *t > 0.0));
}

#[test]
fn degenerate_sampling_returns_the_atom() {
    let m = MixingModel::degenerate(1.0).unwrap();
    let draws = m.sample(&mut StdRng::seed_from_u64(1), 5);
    assert_eq!(draws, vec![1.0; 5]);
}

#[test]
fn sample_means_match_first_moments() {
    let cases = [
        MixingModel::gig(1.0, 1.0, 1.0).unwrap(),
        MixingModel::gig(-0.5, 1.0, 1.0).unwrap(),
        MixingModel::gig(-1.689, 1.380, 4.509e-5).unwrap(),
        MixingModel::gig(2.3, 0.0, 1.7).unwrap(),
        MixingModel::gig(-2.5, 0.8, 0.0).unwrap(),
        MixingModel::numeric(vec![1.0, 2.0, 3.0], vec![0.0, 1.0, 0.0]).unwrap(),
    ];
    let n = 400_000usize;
    for (i, m) in cases.iter().enumerate() {
        let draws = m.sample(&mut StdRng::seed_from_u64(1000 + i as u64), n);
        let mean: f64 = draws.iter().sum::<f64>() / n as f64;
        let expected = m.moment(1).unwrap();
        let var = m.moment(2).unwrap() - expected * expected;
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - expected).abs() <= 4.0 * se,
            "case {i}: sample mean {mean} vs E[Θ] {expected} (4·SE = {})",
            4.0 * se
        );
    }
}

#[test]
fn gig_samples_pass_kolmogorov_smirnov() {
    // Compare 1e5 draws against the CDF obtained by cumulative quadrature of
    // the density; gate at the 0.1% critical value 1.9495/√n.
    let cases = [
        MixingModel::gig(1.0, 1.0, 1.0).unwrap(),
        MixingModel::gig(-1.689, 1.380, 4.509e-5).unwrap(),
        MixingModel::gig(0.5, 2.0, 0.25).unwrap(),
    ];
    let n = 100_000usize;
    let critical = 1.9495 / (n as f64).sqrt();
    for (i, m) in cases.iter().enumerate() {
        let mut draws = m.sample(&mut StdRng::seed_from_u64(7000 + i as u64), n);
        draws.sort_by(f64::total_cmp);

        // Cumulative CDF at each order statistic, integrating on ln θ.
        let mut cdf = Vec::with_capacity(n);
        let mut acc = cdf_segment(m, draws[0] / 1e12, draws[0]);
        cdf.push(acc);
        for w in draws.windows(2) {
            if w[1] > w[0] {
                acc += cdf_segment(m, w[0], w[1]);
            }
            cdf.push(acc);
        }

        let mut d_stat = 0.0f64;
        for (k, f) in cdf.iter().enumerate() {
            let below = f - k as f64 / n as f64;
            let above = (k + 1) as f64 / n as f64 - f;
            d_stat = d_stat.max(below).max(above);
        }
        assert!(
            d_stat < critical,
            "case {i}: KS statistic {d_stat} ≥ critical {critical}"
        );
    }
}

fn cdf_segment(m: &MixingModel, a: f64, b: f64) -> f64 {
    quad::integrate(
        |u: f64| {
            let lf = m.log_density(u.exp()) + u;
            if lf == f64::NEG_INFINITY {
                0.0
            } else {
                lf.exp()
            }
        },
        a.ln(),
        b.ln(),
        1e-14,
        1e-9,
    )
    .unwrap()
    .value
}

#[test]
fn numeric_inverse_cdf_sampling_matches_density() {
    // Mean/variance of 2e5 draws from the triangle density.
    let m = MixingModel::numeric(vec![1.0, 2.0, 3.0], vec![0.0, 1.0, 0.0]).unwrap();
    let n = 200_000usize;
    let draws = m.sample(&mut StdRng::seed_from_u64(99), n);
    assert!(draws.iter().all(|t| (1.0..=3.0).contains(t)));
    let mean: f64 = draws.iter().sum::<f64>() / n as f64;
    let se = (1.0f64 / 6.0 / n as f64).sqrt(); // Var = 25/6 − 4 = 1/6
    assert!((mean - 2.0).abs() <= 4.0 * se, "mean {mean}");
}
