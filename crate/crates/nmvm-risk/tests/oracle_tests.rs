#![allow(clippy::excessive_precision)] // frozen oracle constants keep their full transcribed digits

//! Tests for the Monte Carlo oracle: sampling, empirical tail functionals,
//! and the validation report.

use nalgebra::DMatrix;
use nmvm_risk::mixing::MixingModel;
use nmvm_risk::nmvm::MultivariateNmvm;
use nmvm_risk::oracle::{
    empirical_tail_functional, sample_nmvm, validation_report, TailFunctional, TailSample,
};
use nmvm_risk::Error;

fn gaussian_model() -> MultivariateNmvm {
    MultivariateNmvm::new(
        vec![0.5, -0.2],
        vec![0.0, 0.0],
        DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.8]),
        MixingModel::degenerate(1.0).unwrap(),
    )
    .unwrap()
}

fn reference_model() -> MultivariateNmvm {
    MultivariateNmvm::new(
        vec![0.05, -0.02, 0.10],
        vec![0.30, -0.10, 0.20],
        DMatrix::from_row_slice(
            3,
            3,
            &[0.60, 0.15, 0.10, 0.15, 0.40, 0.05, 0.10, 0.05, 0.50],
        ),
        MixingModel::gig(0.8, 1.3, 2.1).unwrap(),
    )
    .unwrap()
}

/// Batch-means mean and standard error of `f` over the rows of a batch.
fn batch_means(
    batch: &nmvm_risk::oracle::SampleBatch,
    f: impl Fn(&[f64]) -> f64,
) -> (f64, f64) {
    let b = 50usize;
    let mut estimates = Vec::with_capacity(b);
    for c in 0..b {
        let start = c * batch.count() / b;
        let end = (c + 1) * batch.count() / b;
        let sum: f64 = (start..end).map(|r| f(batch.row(r))).sum();
        estimates.push(sum / (end - start) as f64);
    }
    let mean = estimates.iter().sum::<f64>() / b as f64;
    let var = estimates.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (b as f64 - 1.0);
    (mean, (var / b as f64).sqrt())
}

// ---------------------------------------------------------------------------
// Sampling.
// ---------------------------------------------------------------------------

#[test]
fn sampling_is_deterministic_and_seed_sensitive() {
    let m = reference_model();
    let a = sample_nmvm(&m, 200_000, 42).unwrap();
    let b = sample_nmvm(&m, 200_000, 42).unwrap();
    assert_eq!(a.count(), 200_000);
    for r in (0..a.count()).step_by(9_973) {
        assert_eq!(a.row(r), b.row(r), "row {r}");
        assert_eq!(a.theta(r), b.theta(r), "theta {r}");
    }
    let c = sample_nmvm(&m, 200_000, 43).unwrap();
    assert_ne!(a.row(0), c.row(0));
}

#[test]
fn zero_count_is_rejected() {
    assert!(matches!(
        sample_nmvm(&gaussian_model(), 0, 1),
        Err(Error::Domain(_))
    ));
}

#[test]
fn thetas_are_positive_and_degenerate_mixing_is_constant() {
    let m = gaussian_model();
    let batch = sample_nmvm(&m, 10_000, 7).unwrap();
    for r in 0..batch.count() {
        assert_eq!(batch.theta(r), 1.0);
    }
    let gig = reference_model();
    let batch = sample_nmvm(&gig, 10_000, 7).unwrap();
    assert!((0..batch.count()).all(|r| batch.theta(r) > 0.0));
}

#[test]
fn gaussian_sample_moments_match() {
    let m = gaussian_model();
    let batch = sample_nmvm(&m, 1_000_000, 2024).unwrap();

    // Means within 4 SE of μ.
    for i in 0..2 {
        let (mean, se) = batch_means(&batch, |row| row[i]);
        let z = (mean - m.mu()[i]) / se;
        assert!(z.abs() <= 4.0, "mean[{i}]: {mean} vs {} (z={z:.2})", m.mu()[i]);
    }
    // Covariances within 4 SE of Σ.
    for i in 0..2 {
        for j in i..2 {
            let (mi, mj) = (m.mu()[i], m.mu()[j]);
            let (cov, se) = batch_means(&batch, |row| (row[i] - mi) * (row[j] - mj));
            let z = (cov - m.sigma()[(i, j)]) / se;
            assert!(
                z.abs() <= 4.0,
                "cov[{i}{j}]: {cov} vs {} (z={z:.2})",
                m.sigma()[(i, j)]
            );
        }
    }
}

#[test]
fn mixture_sample_mean_matches_first_moment() {
    let m = reference_model();
    let c1 = m.mixing().moment(1).unwrap();
    let batch = sample_nmvm(&m, 400_000, 99).unwrap();
    for i in 0..3 {
        let expected = m.mu()[i] + c1 * m.gamma()[i];
        let (mean, se) = batch_means(&batch, |row| row[i]);
        let z = (mean - expected) / se;
        assert!(z.abs() <= 4.0, "mean[{i}]: {mean} vs {expected} (z={z:.2})");
    }
}

#[test]
fn semidefinite_covariance_is_factorised() {
    let m = MultivariateNmvm::new(
        vec![0.3, -0.1],
        vec![0.0, 0.0],
        DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
        MixingModel::degenerate(1.0).unwrap(),
    )
    .unwrap();
    let batch = sample_nmvm(&m, 1_000, 5).unwrap();
    // Rank-one covariance: both components share one Gaussian driver.
    for r in 0..batch.count() {
        let row = batch.row(r);
        assert!(
            ((row[0] - 0.3) - (row[1] + 0.1)).abs() < 1e-12,
            "row {r}: {row:?}"
        );
    }
}

#[test]
fn csv_dump_has_expected_shape() {
    let m = gaussian_model();
    let batch = sample_nmvm(&m, 25, 3).unwrap();
    let mut out = Vec::new();
    batch.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 26);
    assert_eq!(lines[0], "x1,x2,theta");
    assert!(lines[1].split(',').count() == 3);
}

// ---------------------------------------------------------------------------
// Empirical tail functionals.
// ---------------------------------------------------------------------------

#[test]
fn standard_normal_tail_mean_matches_closed_form() {
    let m = MultivariateNmvm::new(
        vec![0.0],
        vec![0.0],
        DMatrix::from_row_slice(1, 1, &[1.0]),
        MixingModel::degenerate(1.0).unwrap(),
    )
    .unwrap();
    let batch = sample_nmvm(&m, 1_000_000, 314).unwrap();
    let est = empirical_tail_functional(&batch, 0.95, TailFunctional::TmK(1)).unwrap();
    let z = (est.value - 2.0627128075074260193) / est.std_error;
    assert!(z.abs() <= 4.0, "tail mean {} (z={z:.2})", est.value);
    assert!(est.tail_count > 45_000 && est.tail_count < 55_000);

    // The centred first moment is identically zero with zero spread.
    let tcm1 = empirical_tail_functional(&batch, 0.95, TailFunctional::TcmK(1)).unwrap();
    assert_eq!(tcm1.value, 0.0);
    assert_eq!(tcm1.std_error, 0.0);
}

#[test]
fn empirical_estimates_agree_with_analytic_engine() {
    use nmvm_risk::allocation::AllocationEngine;
    let m = reference_model();
    let engine = AllocationEngine::new(&m, 0.95, 4).unwrap();
    let batch = sample_nmvm(&m, 1_000_000, 777).unwrap();
    let tails = TailSample::build(&batch, 0.95).unwrap();

    let t = engine.table();
    let checks: Vec<(String, f64, TailFunctional)> = vec![
        ("tm_1".into(), t.value(0, 1), TailFunctional::TmK(1)),
        ("tm_2".into(), t.value(0, 2), TailFunctional::TmK(2)),
        ("tcm_2".into(), t.central_moment(2), TailFunctional::TcmK(2)),
        ("tcm_3".into(), t.central_moment(3), TailFunctional::TcmK(3)),
        (
            "cte_alloc_1".into(),
            engine.cte_allocation().capitals[0],
            TailFunctional::CteAlloc(0),
        ),
        (
            "tv_alloc_2".into(),
            engine.tv_allocation().unwrap().capitals[1],
            TailFunctional::TvAlloc(1),
        ),
        (
            "tcm3_alloc_3".into(),
            engine.tcm_allocation(3).unwrap().capitals[2],
            TailFunctional::TcmAlloc(2, 3),
        ),
        (
            "cross_1_2".into(),
            engine.conditional_cross_moment(0, 1).unwrap(),
            TailFunctional::CrossMoment(0, 1),
        ),
    ];
    for (name, analytic, functional) in checks {
        let est = tails.estimate(functional).unwrap();
        let z = (est.value - analytic) / est.std_error;
        assert!(
            z.abs() <= 4.0,
            "{name}: analytic {analytic}, empirical {} ± {} (z={z:.2})",
            est.value,
            est.std_error
        );
    }
}

#[test]
fn empirical_splits_sum_to_empirical_totals() {
    let m = reference_model();
    let batch = sample_nmvm(&m, 200_000, 31337).unwrap();
    let tails = TailSample::build(&batch, 0.95).unwrap();

    let total: f64 = (0..3)
        .map(|i| tails.estimate(TailFunctional::CteAlloc(i)).unwrap().value)
        .sum();
    let tm1 = tails.estimate(TailFunctional::TmK(1)).unwrap().value;
    assert!(
        (total - tm1).abs() <= 1e-9 * tm1.abs().max(1.0),
        "ΣK̂ᵢ = {total} vs empirical tail mean {tm1}"
    );

    let tv_total: f64 = (0..3)
        .map(|i| tails.estimate(TailFunctional::TvAlloc(i)).unwrap().value)
        .sum();
    let tcm2 = tails.estimate(TailFunctional::TcmK(2)).unwrap().value;
    assert!(
        (tv_total - tcm2).abs() <= 1e-9 * tcm2.abs().max(1.0),
        "ΣK̂ᵢ = {tv_total} vs empirical tail variance {tcm2}"
    );
}

#[test]
fn standard_error_shrinks_with_sample_size() {
    let m = reference_model();
    let functionals = [
        TailFunctional::TmK(1),
        TailFunctional::CteAlloc(1),
        TailFunctional::CrossMoment(0, 2),
    ];
    let small = sample_nmvm(&m, 300_000, 1001).unwrap();
    let large = sample_nmvm(&m, 600_000, 1501).unwrap();
    let small_tails = TailSample::build(&small, 0.95).unwrap();
    let large_tails = TailSample::build(&large, 0.95).unwrap();
    for f in functionals {
        let se_small = small_tails.estimate(f).unwrap().std_error;
        let se_large = large_tails.estimate(f).unwrap().std_error;
        let ratio = se_large / se_small;
        assert!(
            (0.6..=0.85).contains(&ratio),
            "{f:?}: SE ratio {ratio:.3} outside [0.6, 0.85] \
             ({se_small:.3e} -> {se_large:.3e})"
        );
    }
}

#[test]
fn empty_tail_and_small_batches_are_rejected() {
    let m = gaussian_model();
    let batch = sample_nmvm(&m, 100, 1).unwrap();
    assert!(matches!(
        empirical_tail_functional(&batch, 0.999, TailFunctional::TmK(1)),
        Err(Error::EmptyTail)
    ));
    let tiny = sample_nmvm(&m, 30, 1).unwrap();
    assert!(matches!(
        empirical_tail_functional(&tiny, 0.9, TailFunctional::TmK(1)),
        Err(Error::Domain(_))
    ));
    let batch = sample_nmvm(&m, 10_000, 1).unwrap();
    assert!(matches!(
        empirical_tail_functional(&batch, 0.95, TailFunctional::CteAlloc(5)),
        Err(Error::Domain(_))
    ));
}

// ---------------------------------------------------------------------------
// Validation report.
// ---------------------------------------------------------------------------

#[test]
fn validation_report_passes_on_gaussian_model() {
    let m = gaussian_model();
    let rows = validation_report(&m, &[0.95], 3, 400_000, 2718).unwrap();
    // tm 1..3, tcm 1..3, three allocation families × 2 components, 3 cross moments.
    assert_eq!(rows.len(), 3 + 3 + 2 + 2 + 2 + 3);
    for row in &rows {
        assert!(
            !row.flagged(),
            "{}: analytic {}, empirical {} ± {} (z={})",
            row.quantity,
            row.analytic,
            row.empirical,
            row.std_error,
            row.z_score
        );
    }
    // Deterministic replay.
    let again = validation_report(&m, &[0.95], 3, 400_000, 2718).unwrap();
    for (a, b) in rows.iter().zip(again.iter()) {
        assert_eq!(a.quantity, b.quantity);
        assert_eq!(a.empirical, b.empirical);
        assert_eq!(a.std_error, b.std_error);
    }
}
