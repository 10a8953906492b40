//! Independent Monte Carlo oracle.
//!
//! This module deliberately shares no numerical machinery with the analytic
//! engine: vectors are sampled directly from the defining stochastic
//! representation `X = μ⃗ + Θγ⃗ + √Θ·L·Z` (with `L` a lower-triangular square
//! root of `Σ`), tail thresholds are empirical order statistics of the
//! sampled aggregate, and every tail functional is a plug-in conditional
//! sample average. Standard errors come from nonparametric batch means over
//! 50 contiguous sub-batches, each with its own threshold, which keeps the
//! correlation between numerator and denominator of the conditional ratio
//! estimators inside the error estimate.
//!
//! Generation is chunked with per-chunk derived seeds, so parallel and
//! serial runs produce bit-identical batches.

use crate::allocation::AllocationEngine;
use crate::error::{Error, Result};
use crate::nmvm::MultivariateNmvm;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::io::Write;

/// Rows generated per RNG chunk. Fixed so that batch contents depend only on
/// `(model, count, seed)`, never on thread scheduling.
pub const CHUNK_ROWS: usize = 65_536;

/// Number of contiguous sub-batches used for batch-means standard errors.
pub const SUB_BATCHES: usize = 50;

/// A materialised batch of model draws: `count` rows of the loss vector and
/// the paired mixing draws.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    dimension: usize,
    count: usize,
    seed: u64,
    /// Row-major `count × dimension` draws of the loss vector.
    draws: Vec<f64>,
    /// Paired mixing-variable draws, one per row.
    thetas: Vec<f64>,
}

impl SampleBatch {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The `r`-th draw of the loss vector.
    pub fn row(&self, r: usize) -> &[f64] {
        &self.draws[r * self.dimension..(r + 1) * self.dimension]
    }

    /// The mixing draw paired with row `r`.
    pub fn theta(&self, r: usize) -> f64 {
        self.thetas[r]
    }

    /// Per-row aggregate sums `S_r = Σᵢ x_{r,i}`.
    pub fn aggregate_sums(&self) -> Vec<f64> {
        self.draws
            .par_chunks(self.dimension)
            .map(|row| row.iter().sum())
            .collect()
    }

    /// Dumps the batch as CSV with header `x1,…,xn,theta`, one row per draw,
    /// full float precision.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for i in 0..self.dimension {
            if i > 0 {
                out.write_all(b",")?;
            }
            write!(out, "x{}", i + 1)?;
        }
        out.write_all(b",theta\n")?;
        for r in 0..self.count {
            for v in self.row(r) {
                write!(out, "{v},")?;
            }
            writeln!(out, "{}", self.thetas[r])?;
        }
        Ok(())
    }
}

/// Derives the RNG seed for one generation chunk from the batch seed
/// (SplitMix64 finalisation of a golden-ratio sequence).
fn chunk_seed(seed: u64, chunk: u64) -> u64 {
    let mut z = seed.wrapping_add(chunk.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Lower-triangular square root of a positive-semidefinite matrix.
///
/// Semidefinite pivots (within `1e-10` of zero relative to the largest
/// diagonal entry) zero their column; genuinely negative pivots or
/// inconsistent off-diagonal residuals fail with
/// [`Error::FactorisationFailure`].
fn tolerant_cholesky(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = sigma.nrows();
    let scale = sigma
        .diagonal()
        .iter()
        .fold(0.0f64, |a, d| a.max(d.abs()))
        .max(1e-300);
    let tol = 1e-10 * scale;
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut pivot = sigma[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if pivot > tol {
            let root = pivot.sqrt();
            l[(j, j)] = root;
            for i in (j + 1)..n {
                let mut v = sigma[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = v / root;
            }
        } else if pivot >= -tol {
            // Semidefinite direction: the remaining column must vanish too,
            // otherwise the matrix was not positive semidefinite.
            for i in (j + 1)..n {
                let mut v = sigma[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)];
                }
                if v.abs() > 1e-7 * scale {
                    return Err(Error::FactorisationFailure(format!(
                        "column {j} has zero pivot but residual {v:.3e} at row {i}"
                    )));
                }
            }
        } else {
            return Err(Error::FactorisationFailure(format!(
                "negative pivot {pivot:.6e} at column {j}"
            )));
        }
    }
    Ok(l)
}

/// Draws `count` i.i.d. samples of the loss vector from its defining
/// representation. Deterministic given `(model, count, seed)`; chunks are
/// generated in parallel with independently derived streams.
pub fn sample_nmvm(model: &MultivariateNmvm, count: usize, seed: u64) -> Result<SampleBatch> {
    if count == 0 {
        return Err(Error::Domain("sample count must be positive".into()));
    }
    let n = model.dimension();
    let chol = tolerant_cholesky(model.sigma())?;
    // Row-major copy of the factor for the inner triangular product.
    let mut lmat = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            lmat[i * n + j] = chol[(i, j)];
        }
    }
    let mu = model.mu().to_vec();
    let gamma = model.gamma().to_vec();
    let mixing = model.mixing();

    let mut draws = vec![0.0f64; count * n];
    let mut thetas = vec![0.0f64; count];
    draws
        .par_chunks_mut(CHUNK_ROWS * n)
        .zip(thetas.par_chunks_mut(CHUNK_ROWS))
        .enumerate()
        .for_each(|(c, (draw_chunk, theta_chunk))| {
            let rows = theta_chunk.len();
            let mut rng = ChaCha8Rng::seed_from_u64(chunk_seed(seed, c as u64));
            let mut th = Vec::with_capacity(rows);
            mixing.sample_into(&mut rng, rows, &mut th);
            theta_chunk.copy_from_slice(&th);
            let mut z = vec![0.0f64; n];
            for (r, &theta) in th.iter().enumerate() {
                for zi in z.iter_mut() {
                    *zi = StandardNormal.sample(&mut rng);
                }
                let sqrt_theta = theta.sqrt();
                let row = &mut draw_chunk[r * n..(r + 1) * n];
                for i in 0..n {
                    let mut dot = 0.0;
                    for j in 0..=i {
                        dot += lmat[i * n + j] * z[j];
                    }
                    row[i] = mu[i] + theta * gamma[i] + sqrt_theta * dot;
                }
            }
        });
    Ok(SampleBatch {
        dimension: n,
        count,
        seed,
        draws,
        thetas,
    })
}

/// A tail functional estimated from a sample batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailFunctional {
    /// `E[S^k | S > threshold]`.
    TmK(u32),
    /// `E[(S − m̂)^k | S > threshold]` with `m̂` the conditional sample mean.
    TcmK(u32),
    /// `E[X_i | S > threshold]` (0-based component index).
    CteAlloc(usize),
    /// Conditional covariance of `X_i` with `S`.
    TvAlloc(usize),
    /// Conditional covariance of `X_i` with `(S − m̂)^{k−1}`, `k ≥ 2`.
    TcmAlloc(usize, u32),
    /// `E[X_i X_j | S > threshold]`.
    CrossMoment(usize, usize),
}

/// An empirical tail estimate with its batch-means standard error.
#[derive(Debug, Clone, Copy)]
pub struct EmpiricalTailEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Number of draws above the full-batch threshold.
    pub tail_count: usize,
}

/// Index of the rows of one (sub-)batch that exceed its own empirical
/// aggregate quantile.
struct TailIndex {
    rows: Vec<u32>,
}

/// Tail conditioning data for one (batch, alpha) pair: the full-batch tail
/// plus one tail per contiguous sub-batch, each thresholded by its own
/// order statistic.
pub struct TailSample<'a> {
    batch: &'a SampleBatch,
    sums: Vec<f64>,
    full: TailIndex,
    subs: Vec<TailIndex>,
}

/// Threshold a contiguous row range at the order statistic `⌈α·m⌉` of its
/// aggregate sums, keeping strictly larger rows.
fn tail_index(sums: &[f64], start: usize, end: usize, alpha: f64) -> Result<TailIndex> {
    let m = end - start;
    let k0 = (alpha * m as f64).ceil() as usize;
    if k0 >= m {
        return Err(Error::EmptyTail);
    }
    let mut work: Vec<f64> = sums[start..end].to_vec();
    let (_, threshold, _) = work.select_nth_unstable_by(k0 - 1, f64::total_cmp);
    let threshold = *threshold;
    let rows: Vec<u32> = (start..end)
        .filter(|&r| sums[r] > threshold)
        .map(|r| r as u32)
        .collect();
    if rows.is_empty() {
        return Err(Error::EmptyTail);
    }
    Ok(TailIndex { rows })
}

impl<'a> TailSample<'a> {
    /// Builds the conditioning index for `batch` at level `alpha`. Fails with
    /// [`Error::EmptyTail`] if the full batch or any sub-batch has no draws
    /// above its threshold, and warns on stderr when fewer than 100 draws
    /// survive the full-batch threshold.
    pub fn build(batch: &'a SampleBatch, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!(
                "confidence level must lie in (0,1), got {alpha}"
            )));
        }
        if batch.count < SUB_BATCHES {
            return Err(Error::Domain(format!(
                "batch of {} rows is too small for {SUB_BATCHES}-way batch means",
                batch.count
            )));
        }
        let sums = batch.aggregate_sums();
        let full = tail_index(&sums, 0, batch.count, alpha)?;
        let mut subs = Vec::with_capacity(SUB_BATCHES);
        for c in 0..SUB_BATCHES {
            let start = c * batch.count / SUB_BATCHES;
            let end = (c + 1) * batch.count / SUB_BATCHES;
            subs.push(tail_index(&sums, start, end, alpha)?);
        }
        if full.rows.len() < 100 {
            eprintln!(
                "warning: only {} draws exceed the empirical threshold; \
                 tail estimates will be noisy",
                full.rows.len()
            );
        }
        Ok(Self {
            batch,
            sums,
            full,
            subs,
        })
    }

    /// Number of draws above the full-batch threshold.
    pub fn tail_count(&self) -> usize {
        self.full.rows.len()
    }

    fn tail_mean(&self, idx: &TailIndex, f: impl Fn(u32) -> f64) -> f64 {
        let total: f64 = idx.rows.iter().map(|&r| f(r)).sum();
        total / idx.rows.len() as f64
    }

    fn evaluate(&self, functional: TailFunctional, idx: &TailIndex) -> Result<f64> {
        let n = self.batch.dimension;
        let component = |r: u32, i: usize| self.batch.draws[r as usize * n + i];
        let check_index = |i: usize| -> Result<()> {
            if i >= n {
                return Err(Error::Domain(format!(
                    "component index {i} out of range for dimension {n}"
                )));
            }
            Ok(())
        };
        match functional {
            TailFunctional::TmK(k) => Ok(self.tail_mean(idx, |r| {
                self.sums[r as usize].powi(k as i32)
            })),
            TailFunctional::TcmK(k) => {
                if k == 0 {
                    return Err(Error::Domain(
                        "tail central moment order must be at least 1".into(),
                    ));
                }
                if k == 1 {
                    // Centred first moment: identically zero by construction;
                    // returning the algebraic value avoids reporting pure
                    // accumulation roundoff as an estimate.
                    return Ok(0.0);
                }
                let m = self.tail_mean(idx, |r| self.sums[r as usize]);
                Ok(self.tail_mean(idx, |r| (self.sums[r as usize] - m).powi(k as i32)))
            }
            TailFunctional::CteAlloc(i) => {
                check_index(i)?;
                Ok(self.tail_mean(idx, |r| component(r, i)))
            }
            TailFunctional::TvAlloc(i) => {
                check_index(i)?;
                let mean_x = self.tail_mean(idx, |r| component(r, i));
                let mean_s = self.tail_mean(idx, |r| self.sums[r as usize]);
                let mean_xs = self.tail_mean(idx, |r| component(r, i) * self.sums[r as usize]);
                Ok(mean_xs - mean_x * mean_s)
            }
            TailFunctional::TcmAlloc(i, k) => {
                check_index(i)?;
                if k < 2 {
                    return Err(Error::Domain(format!(
                        "tail central moment allocation needs order k ≥ 2, got {k}"
                    )));
                }
                let m = self.tail_mean(idx, |r| self.sums[r as usize]);
                let pow = |r: u32| (self.sums[r as usize] - m).powi(k as i32 - 1);
                let mean_x = self.tail_mean(idx, |r| component(r, i));
                let mean_p = self.tail_mean(idx, pow);
                let mean_xp = self.tail_mean(idx, |r| component(r, i) * pow(r));
                Ok(mean_xp - mean_x * mean_p)
            }
            TailFunctional::CrossMoment(i, j) => {
                check_index(i)?;
                check_index(j)?;
                Ok(self.tail_mean(idx, |r| component(r, i) * component(r, j)))
            }
        }
    }

    /// Estimates a tail functional: the value from the full batch, the
    /// standard error from the spread of the per-sub-batch estimates.
    pub fn estimate(&self, functional: TailFunctional) -> Result<EmpiricalTailEstimate> {
        let value = self.evaluate(functional, &self.full)?;
        let mut sub_values = Vec::with_capacity(self.subs.len());
        for idx in &self.subs {
            sub_values.push(self.evaluate(functional, idx)?);
        }
        let b = sub_values.len() as f64;
        let mean: f64 = sub_values.iter().sum::<f64>() / b;
        let var: f64 = sub_values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (b - 1.0);
        let std_error = (var / b).sqrt();
        Ok(EmpiricalTailEstimate {
            value,
            std_error,
            tail_count: self.full.rows.len(),
        })
    }
}

/// One-shot empirical estimate of a tail functional at level `alpha`.
pub fn empirical_tail_functional(
    batch: &SampleBatch,
    alpha: f64,
    functional: TailFunctional,
) -> Result<EmpiricalTailEstimate> {
    TailSample::build(batch, alpha)?.estimate(functional)
}

/// One row of a validation report: an analytic quantity, its empirical
/// counterpart, and the agreement z-score.
#[derive(Debug, Clone)]
pub struct ValidationRow {
    pub quantity: String,
    pub analytic: f64,
    pub empirical: f64,
    pub std_error: f64,
    pub z_score: f64,
}

impl ValidationRow {
    /// Whether this row violates the 4-standard-error agreement gate.
    /// A NaN z-score counts as a violation.
    pub fn flagged(&self) -> bool {
        self.z_score.is_nan() || self.z_score.abs() > 4.0
    }
}

/// Standardised disagreement between an analytic value and an empirical
/// estimate: zero when they coincide exactly, signed infinity when they
/// differ but the standard error is zero, and the usual ratio otherwise.
pub fn z_score(analytic: f64, empirical: f64, std_error: f64) -> f64 {
    let diff = empirical - analytic;
    if diff == 0.0 {
        0.0
    } else if std_error == 0.0 {
        f64::INFINITY.copysign(diff)
    } else {
        diff / std_error
    }
}

/// Runs the full analytic-versus-empirical comparison for one model:
/// tail moments and central moments up to `k_max`, every per-component
/// capital for the conditional-tail-expectation, tail-variance and
/// third-order splits, and all conditional second cross moments, at every
/// requested level.
pub fn validation_report(
    model: &MultivariateNmvm,
    alphas: &[f64],
    k_max: u32,
    count: usize,
    seed: u64,
) -> Result<Vec<ValidationRow>> {
    let k_max = k_max.max(2);
    let batch = sample_nmvm(model, count, seed)?;
    let n = model.dimension();
    let mut rows = Vec::new();
    let push = |rows: &mut Vec<ValidationRow>,
                    quantity: String,
                    analytic: f64,
                    est: EmpiricalTailEstimate| {
        rows.push(ValidationRow {
            quantity,
            analytic,
            empirical: est.value,
            std_error: est.std_error,
            z_score: z_score(analytic, est.value, est.std_error),
        });
    };

    for &alpha in alphas {
        let engine = AllocationEngine::new(model, alpha, k_max.max(3))?;
        let tails = TailSample::build(&batch, alpha)?;
        let table = engine.table();

        for k in 1..=k_max {
            let est = tails.estimate(TailFunctional::TmK(k))?;
            push(&mut rows, format!("tm_{k}@{alpha}"), table.value(0, k), est);
        }
        for k in 1..=k_max {
            let est = tails.estimate(TailFunctional::TcmK(k))?;
            push(
                &mut rows,
                format!("tcm_{k}@{alpha}"),
                table.central_moment(k),
                est,
            );
        }

        let cte = engine.cte_allocation();
        for i in 0..n {
            let est = tails.estimate(TailFunctional::CteAlloc(i))?;
            push(
                &mut rows,
                format!("cte_alloc_{}@{alpha}", i + 1),
                cte.capitals[i],
                est,
            );
        }
        let tv = engine.tv_allocation()?;
        for i in 0..n {
            let est = tails.estimate(TailFunctional::TvAlloc(i))?;
            push(
                &mut rows,
                format!("tv_alloc_{}@{alpha}", i + 1),
                tv.capitals[i],
                est,
            );
        }
        let tcm3 = engine.tcm_allocation(3)?;
        for i in 0..n {
            let est = tails.estimate(TailFunctional::TcmAlloc(i, 3))?;
            push(
                &mut rows,
                format!("tcm3_alloc_{}@{alpha}", i + 1),
                tcm3.capitals[i],
                est,
            );
        }
        for i in 0..n {
            for j in i..n {
                let est = tails.estimate(TailFunctional::CrossMoment(i, j))?;
                push(
                    &mut rows,
                    format!("cross_moment_{}_{}@{alpha}", i + 1, j + 1),
                    engine.conditional_cross_moment(i, j)?,
                    est,
                );
            }
        }
    }
    Ok(rows)
}
