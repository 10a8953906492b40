//! Capital allocation for multivariate mean–variance mixture portfolios.
//!
//! Every component loss decomposes against the portfolio aggregate
//! `S = Σᵢ Xᵢ` through three coefficient vectors: `a₁` (covariance shares),
//! `a₀` (location residuals) and `a₂` (skewness residuals). All allocation
//! rules — conditional tail expectation, tail variance, tail central moments
//! of arbitrary order, their non-negative mixtures, and the Euler-style
//! rooted variant — are linear in those coefficients plus a handful of
//! scalars from one tilt ladder and one tail-moment table built on the
//! aggregate. [`AllocationEngine`] owns that shared state; the free
//! functions are one-shot conveniences that build an engine of exactly the
//! required order.
//!
//! Weighted portfolios are handled upstream: rescale the model with
//! [`MultivariateNmvm::reweight`] and allocate with unit weights.

use crate::error::{Error, Result};
use crate::nmvm::{MultivariateNmvm, UnivariateNmvm};
use crate::tail_moments::{TailMomentTable, TiltLadder};

/// Allocation rule identifiers, in the canonical reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AllocationMethod {
    /// Conditional tail expectation split.
    Cte,
    /// Tail-variance split.
    Tv,
    /// Tail central moment split of a chosen order.
    Tcm,
    /// Non-negative mixture of the CTE, TV and third-order TCM splits.
    Combined,
    /// TCM split rescaled so the total is the k-th root of the TCM.
    EulerRooted,
}

impl AllocationMethod {
    /// All methods in canonical reporting order.
    pub const ALL: [AllocationMethod; 5] = [
        AllocationMethod::Cte,
        AllocationMethod::Tv,
        AllocationMethod::Tcm,
        AllocationMethod::Combined,
        AllocationMethod::EulerRooted,
    ];

    /// Stable lower-case name used in CSV output and CLI flags.
    pub fn as_str(self) -> &'static str {
        match self {
            AllocationMethod::Cte => "cte",
            AllocationMethod::Tv => "tv",
            AllocationMethod::Tcm => "tcm",
            AllocationMethod::Combined => "combined",
            AllocationMethod::EulerRooted => "euler_rooted",
        }
    }
}

impl std::fmt::Display for AllocationMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AllocationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cte" => Ok(AllocationMethod::Cte),
            "tv" => Ok(AllocationMethod::Tv),
            "tcm" => Ok(AllocationMethod::Tcm),
            "combined" => Ok(AllocationMethod::Combined),
            "euler_rooted" => Ok(AllocationMethod::EulerRooted),
            other => Err(Error::Parse(format!(
                "unknown allocation method {other:?}; expected one of \
                 cte, tv, tcm, combined, euler_rooted"
            ))),
        }
    }
}

/// Component decomposition coefficients against the aggregate:
/// `a1[i] = σ_iS/σ_S²`, `a0[i] = μᵢ − a1[i]·Σⱼμⱼ`, `a2[i] = γᵢ − a1[i]·Σⱼγⱼ`.
///
/// By construction `Σ a1 = 1` and `Σ a0 = Σ a2 = 0` (up to roundoff).
#[derive(Debug, Clone)]
pub struct AllocationCoefficients {
    pub a0: Vec<f64>,
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
}

/// Result of one allocation run: the total risk figure and its split into
/// per-component capitals.
///
/// Capitals may be negative (a diversification benefit), so proportions may
/// lie outside `[0, 1]`; when the total is exactly zero the proportions are
/// undefined and reported as `None`.
#[derive(Debug, Clone)]
pub struct AllocationReport {
    pub method: AllocationMethod,
    pub alpha: f64,
    /// Moment order of the rule: 1 for CTE, 2 for TV, `k` for TCM and the
    /// rooted variant, `None` for the combined mixture.
    pub order_k: Option<u32>,
    pub total: f64,
    pub capitals: Vec<f64>,
    pub proportions: Option<Vec<f64>>,
    /// Mixture coefficients `(m₁, m₂, m₃)`; only present for
    /// [`AllocationMethod::Combined`].
    pub mixture_weights: Option<(f64, f64, f64)>,
}

impl AllocationReport {
    fn new(
        method: AllocationMethod,
        alpha: f64,
        order_k: Option<u32>,
        total: f64,
        capitals: Vec<f64>,
        mixture_weights: Option<(f64, f64, f64)>,
    ) -> Self {
        let proportions = if total != 0.0 {
            Some(capitals.iter().map(|k| k / total).collect())
        } else {
            None
        };
        Self {
            method,
            alpha,
            order_k,
            total,
            capitals,
            proportions,
            mixture_weights,
        }
    }
}

/// Computes the decomposition coefficients of each component against the
/// unit-weight aggregate.
pub fn coefficients(model: &MultivariateNmvm) -> Result<AllocationCoefficients> {
    let n = model.dimension();
    let sigma_total = model.sigma_total();
    if sigma_total <= 0.0 {
        return Err(Error::DegenerateAggregate {
            sigma2: sigma_total,
        });
    }
    let mu_sum: f64 = model.mu().iter().sum();
    let gamma_sum: f64 = model.gamma().iter().sum();
    let mut a0 = Vec::with_capacity(n);
    let mut a1 = Vec::with_capacity(n);
    let mut a2 = Vec::with_capacity(n);
    for i in 0..n {
        let a1_i = model.sigma_row_sum(i) / sigma_total;
        a0.push(model.mu()[i] - a1_i * mu_sum);
        a1.push(a1_i);
        a2.push(model.gamma()[i] - a1_i * gamma_sum);
    }
    Ok(AllocationCoefficients { a0, a1, a2 })
}

/// Shared state for allocating one model at one confidence level: the
/// aggregate law, the coefficient vectors, and the tilt ladder and
/// tail-moment table built to a chosen maximum order.
#[derive(Debug)]
pub struct AllocationEngine<'a> {
    model: &'a MultivariateNmvm,
    aggregate: UnivariateNmvm,
    coefficients: AllocationCoefficients,
    ladder: TiltLadder,
    table: TailMomentTable,
}

impl<'a> AllocationEngine<'a> {
    /// Builds the engine with tables up to `max_order` (at least 1). Rules
    /// of order `k` need `max_order ≥ k`; the combined mixture needs 3; the
    /// conditional cross moments need 2.
    pub fn new(model: &'a MultivariateNmvm, alpha: f64, max_order: u32) -> Result<Self> {
        let max_order = max_order.max(1);
        let coefficients = coefficients(model)?;
        let ones = vec![1.0; model.dimension()];
        let aggregate = model.aggregate(&ones)?;
        let ladder = TiltLadder::build(&aggregate, alpha, max_order)?;
        let table = TailMomentTable::from_ladder(&aggregate, &ladder, max_order)?;
        Ok(Self {
            model,
            aggregate,
            coefficients,
            ladder,
            table,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.ladder.alpha()
    }

    pub fn s_alpha(&self) -> f64 {
        self.ladder.s_alpha()
    }

    pub fn aggregate(&self) -> &UnivariateNmvm {
        &self.aggregate
    }

    pub fn coefficients(&self) -> &AllocationCoefficients {
        &self.coefficients
    }

    pub fn ladder(&self) -> &TiltLadder {
        &self.ladder
    }

    pub fn table(&self) -> &TailMomentTable {
        &self.table
    }

    fn require_order(&self, needed: u32, what: &str) -> Result<()> {
        if self.table.max_order() < needed {
            return Err(Error::Domain(format!(
                "{what} needs tables of order {needed}, but the engine was \
                 built with order {}",
                self.table.max_order()
            )));
        }
        Ok(())
    }

    fn check_component(&self, i: usize) -> Result<()> {
        if i >= self.model.dimension() {
            return Err(Error::Domain(format!(
                "component index {i} out of range for a {}-dimensional model",
                self.model.dimension()
            )));
        }
        Ok(())
    }

    /// Splits the conditional tail expectation:
    /// `K_i = a0[i] + a1[i]·CTE + a2[i]·w₁`.
    pub fn cte_allocation(&self) -> AllocationReport {
        let cte = self.table.cte();
        let w1 = self.ladder.tilt_weight(1);
        let c = &self.coefficients;
        let capitals: Vec<f64> = (0..c.a0.len())
            .map(|i| c.a0[i] + c.a1[i] * cte + c.a2[i] * w1)
            .collect();
        AllocationReport::new(
            AllocationMethod::Cte,
            self.alpha(),
            Some(1),
            cte,
            capitals,
            None,
        )
    }

    /// Splits the tail variance:
    /// `K_i = a1[i]·TV + a2[i]·w₁·(E[S₁|S₁>s_α] − CTE)`.
    pub fn tv_allocation(&self) -> Result<AllocationReport> {
        self.require_order(2, "tail-variance allocation")?;
        let tv = self.table.central_moment(2);
        let cte = self.table.cte();
        let w1 = self.ladder.tilt_weight(1);
        let tilt_gap = self.table.value(1, 1) - cte;
        let c = &self.coefficients;
        let capitals: Vec<f64> = (0..c.a1.len())
            .map(|i| c.a1[i] * tv + c.a2[i] * w1 * tilt_gap)
            .collect();
        Ok(AllocationReport::new(
            AllocationMethod::Tv,
            self.alpha(),
            Some(2),
            tv,
            capitals,
            None,
        ))
    }

    /// Splits the tail central moment of order `k ≥ 2`:
    /// `K_i = a1[i]·TCM_k + a2[i]·w₁·(E[(S₁−CTE)^{k−1}|S₁>s_α] − TCM_{k−1})`.
    pub fn tcm_allocation(&self, k: u32) -> Result<AllocationReport> {
        if k < 2 {
            return Err(Error::Domain(format!(
                "tail central moment allocation needs order k ≥ 2, got {k}"
            )));
        }
        self.require_order(k, "tail central moment allocation")?;
        let cte = self.table.cte();
        let tcm_k = self.table.central_moment(k);
        let tcm_prev = self.table.central_moment(k - 1);
        let shifted = self.table.shifted_power(1, cte, k - 1);
        let w1 = self.ladder.tilt_weight(1);
        let c = &self.coefficients;
        let capitals: Vec<f64> = (0..c.a1.len())
            .map(|i| c.a1[i] * tcm_k + c.a2[i] * w1 * (shifted - tcm_prev))
            .collect();
        Ok(AllocationReport::new(
            AllocationMethod::Tcm,
            self.alpha(),
            Some(k),
            tcm_k,
            capitals,
            None,
        ))
    }

    /// Splits the mixture `m₁·CTE + m₂·TV + m₃·TCM₃` with non-negative
    /// mixture coefficients.
    pub fn combined_allocation(&self, m1: f64, m2: f64, m3: f64) -> Result<AllocationReport> {
        for (name, m) in [("m1", m1), ("m2", m2), ("m3", m3)] {
            if !m.is_finite() || m < 0.0 {
                return Err(Error::Domain(format!(
                    "mixture coefficient {name} must be a non-negative finite \
                     number, got {m}"
                )));
            }
        }
        self.require_order(3, "combined allocation")?;
        let cte = self.cte_allocation();
        let tv = self.tv_allocation()?;
        let tcm3 = self.tcm_allocation(3)?;
        let total = m1 * cte.total + m2 * tv.total + m3 * tcm3.total;
        let capitals: Vec<f64> = (0..cte.capitals.len())
            .map(|i| m1 * cte.capitals[i] + m2 * tv.capitals[i] + m3 * tcm3.capitals[i])
            .collect();
        Ok(AllocationReport::new(
            AllocationMethod::Combined,
            self.alpha(),
            None,
            total,
            capitals,
            Some((m1, m2, m3)),
        ))
    }

    /// Rescales the order-`k` TCM split so the total is `TCM_k^{1/k}`,
    /// keeping the same relative shares. Fails with
    /// [`Error::NonPositiveTcm`] when the TCM is not positive (possible for
    /// odd `k`).
    pub fn euler_rooted_allocation(&self, k: u32) -> Result<AllocationReport> {
        let tcm = self.tcm_allocation(k)?;
        if tcm.total <= 0.0 {
            return Err(Error::NonPositiveTcm { value: tcm.total });
        }
        let scale = tcm.total.powf(1.0 - 1.0 / k as f64);
        let capitals: Vec<f64> = tcm.capitals.iter().map(|c| c / scale).collect();
        Ok(AllocationReport::new(
            AllocationMethod::EulerRooted,
            self.alpha(),
            Some(k),
            tcm.total.powf(1.0 / k as f64),
            capitals,
            None,
        ))
    }

    /// Conditional tail covariance between component `i` and the
    /// `(k−1)`-th power of the aggregate, `k ≥ 2`:
    ///
    /// `a1[i]·(T[0][k] − T[0][1]·T[0][k−1]) + a2[i]·w₁·(T[1][k−1] − T[0][k−1])`.
    pub fn tail_cov_power(&self, i: usize, k: u32) -> Result<f64> {
        self.check_component(i)?;
        if k < 2 {
            return Err(Error::Domain(format!(
                "tail covariance power needs order k ≥ 2, got {k}"
            )));
        }
        self.require_order(k, "tail covariance power")?;
        let t = &self.table;
        let w1 = self.ladder.tilt_weight(1);
        let c = &self.coefficients;
        Ok(c.a1[i] * (t.value(0, k) - t.value(0, 1) * t.value(0, k - 1))
            + c.a2[i] * w1 * (t.value(1, k - 1) - t.value(0, k - 1)))
    }

    /// Conditional second cross moment `E[Xᵢ Xⱼ | S > s_α]`.
    pub fn conditional_cross_moment(&self, i: usize, j: usize) -> Result<f64> {
        self.check_component(i)?;
        self.check_component(j)?;
        self.require_order(2, "conditional cross moments")?;
        let t = &self.table;
        let c = &self.coefficients;
        let w1 = self.ladder.tilt_weight(1);
        let w2 = self.ladder.tilt_weight(2);
        let sigma_ij = self.model.sigma()[(i, j)];
        let sigma_s2 = self.model.sigma_total();
        let (a0i, a1i, a2i) = (c.a0[i], c.a1[i], c.a2[i]);
        let (a0j, a1j, a2j) = (c.a0[j], c.a1[j], c.a2[j]);
        Ok(a1i * a1j * t.value(0, 2)
            + (a1i * a0j + a0i * a1j) * t.value(0, 1)
            + (a1i * a2j + a2i * a1j) * w1 * t.value(1, 1)
            + a0i * a0j
            + (a2i * a0j + a0i * a2j + sigma_ij - a1i * a1j * sigma_s2) * w1
            + a2i * a2j * w2)
    }
}

/// One-shot conditional tail expectation allocation.
pub fn cte_allocation(model: &MultivariateNmvm, alpha: f64) -> Result<AllocationReport> {
    Ok(AllocationEngine::new(model, alpha, 1)?.cte_allocation())
}

/// One-shot tail-variance allocation.
pub fn tv_allocation(model: &MultivariateNmvm, alpha: f64) -> Result<AllocationReport> {
    AllocationEngine::new(model, alpha, 2)?.tv_allocation()
}

/// One-shot tail central moment allocation of order `k ≥ 2`.
pub fn tcm_allocation(model: &MultivariateNmvm, alpha: f64, k: u32) -> Result<AllocationReport> {
    if k < 2 {
        return Err(Error::Domain(format!(
            "tail central moment allocation needs order k ≥ 2, got {k}"
        )));
    }
    AllocationEngine::new(model, alpha, k)?.tcm_allocation(k)
}

/// One-shot combined allocation with mixture coefficients `(m1, m2, m3)`.
pub fn combined_allocation(
    model: &MultivariateNmvm,
    alpha: f64,
    m1: f64,
    m2: f64,
    m3: f64,
) -> Result<AllocationReport> {
    AllocationEngine::new(model, alpha, 3)?.combined_allocation(m1, m2, m3)
}

/// One-shot Euler-style rooted allocation of order `k ≥ 2`.
pub fn euler_rooted_allocation(
    model: &MultivariateNmvm,
    alpha: f64,
    k: u32,
) -> Result<AllocationReport> {
    if k < 2 {
        return Err(Error::Domain(format!(
            "rooted allocation needs order k ≥ 2, got {k}"
        )));
    }
    AllocationEngine::new(model, alpha, k)?.euler_rooted_allocation(k)
}

/// One-shot conditional tail covariance between component `i` and the
/// `(k−1)`-th power of the aggregate.
pub fn tail_cov_power(model: &MultivariateNmvm, i: usize, alpha: f64, k: u32) -> Result<f64> {
    if k < 2 {
        return Err(Error::Domain(format!(
            "tail covariance power needs order k ≥ 2, got {k}"
        )));
    }
    AllocationEngine::new(model, alpha, k)?.tail_cov_power(i, k)
}

/// One-shot conditional second cross moment `E[Xᵢ Xⱼ | S > s_α]`.
pub fn conditional_cross_moment(
    model: &MultivariateNmvm,
    i: usize,
    j: usize,
    alpha: f64,
) -> Result<f64> {
    AllocationEngine::new(model, alpha, 2)?.conditional_cross_moment(i, j)
}
