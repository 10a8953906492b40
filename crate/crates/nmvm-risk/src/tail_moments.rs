//! Tail moments of an aggregate loss under mean–variance mixture models.
//!
//! The central objects are:
//!
//! * [`TiltLadder`] — a per-(model, α) cache holding the base quantile
//!   `s_alpha` together with, for each moment-tilt level `l`, the mixing
//!   moment `c_l`, the tail mass of the level-`l` tilted law at `s_alpha`,
//!   and its hazard rate there. Every conditional quantity at every tilt
//!   level conditions on the *base* quantile, never on the tilted law's own
//!   quantile.
//! * [`TailMomentTable`] — the triangular table of conditional tail power
//!   moments `T[l][k] = E[(S_l)^k | S_l > s_alpha]` filled by a single
//!   recursion, where `S_l` denotes the aggregate with level-`l` tilted
//!   mixing.
//!
//! Tail central moments and shifted power moments are binomial recentrings
//! of table rows; because those alternating sums can cancel catastrophically
//! for large orders or large location shifts, they are evaluated with
//! compensated summation and expose a condition estimate
//! `Σ|terms| / |result|`. One-shot helpers emit a warning on stderr when the
//! estimate exceeds [`CONDITION_WARNING_THRESHOLD`].
//!
//! Closed forms for the conditional tail expectation and the tail variance
//! are provided as independent cross-checks of the recursion.

use crate::error::{Error, Result};
use crate::nmvm::UnivariateNmvm;

/// Largest moment order accepted by the one-shot helpers. Higher orders are
/// reachable through [`TailMomentTable::from_ladder`] directly, but their
/// numerics are unvalidated.
pub const DEFAULT_MAX_ORDER: u32 = 8;

/// Condition-estimate threshold above which the binomial recentring of a
/// tail moment is considered numerically unreliable.
pub const CONDITION_WARNING_THRESHOLD: f64 = 1e12;

/// Per-level entry of a [`TiltLadder`].
#[derive(Debug, Clone, Copy)]
pub struct TiltLevel {
    /// Mixing moment `c_l = E[Θ^l]` (1 at level 0).
    pub mixing_moment: f64,
    /// Tail mass of the level-`l` tilted aggregate at the base quantile.
    pub tail_mass: f64,
    /// Hazard rate of the level-`l` tilted aggregate at the base quantile.
    pub hazard: f64,
}

/// Cache of everything a (model, α) pair contributes to tail moments: the
/// base quantile and the per-tilt-level triples used by the recursion and
/// the closed forms.
#[derive(Debug, Clone)]
pub struct TiltLadder {
    alpha: f64,
    s_alpha: f64,
    levels: Vec<TiltLevel>,
}

impl TiltLadder {
    /// Builds the ladder for `model` at confidence level `alpha` with tilt
    /// levels `0..=max_level`.
    ///
    /// Fails with [`Error::MomentNotFinite`] if the mixing law lacks a
    /// finite moment of order `max_level`, and with [`Error::TailUnderflow`]
    /// if any level's tail mass underflows.
    pub fn build(model: &UnivariateNmvm, alpha: f64, max_level: u32) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) || !alpha.is_finite() {
            return Err(Error::Domain(format!(
                "confidence level must lie strictly inside (0, 1), got {alpha}"
            )));
        }
        let s_alpha = model.quantile(alpha)?;
        let mut levels = Vec::with_capacity(max_level as usize + 1);
        for l in 0..=max_level {
            let mixing_moment = model.mixing.moment(l)?;
            let tilted;
            let level_model = if l == 0 {
                model
            } else {
                tilted = model.with_tilted_mixing(l)?;
                &tilted
            };
            let tail_mass = level_model.survival(s_alpha)?;
            if tail_mass <= 1e-300 {
                return Err(Error::TailUnderflow { threshold: s_alpha });
            }
            let hazard = level_model.hazard(s_alpha)?;
            levels.push(TiltLevel {
                mixing_moment,
                tail_mass,
                hazard,
            });
        }
        // The base tail mass must reproduce 1 − α; anything else means the
        // quantile inversion failed its own contract.
        if (levels[0].tail_mass - (1.0 - alpha)).abs() > 1e-9 {
            return Err(Error::RootFindingFailure(format!(
                "base tail mass {} is inconsistent with confidence level {alpha}",
                levels[0].tail_mass
            )));
        }
        Ok(Self {
            alpha,
            s_alpha,
            levels,
        })
    }

    /// Confidence level the ladder was built for.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Quantile of the base aggregate at [`Self::alpha`].
    pub fn s_alpha(&self) -> f64 {
        self.s_alpha
    }

    /// Highest tilt level stored.
    pub fn max_level(&self) -> u32 {
        (self.levels.len() - 1) as u32
    }

    /// Entry for tilt level `l`.
    ///
    /// # Panics
    /// If `l` exceeds [`Self::max_level`].
    pub fn level(&self, l: u32) -> &TiltLevel {
        &self.levels[l as usize]
    }

    /// Cumulative reweighting factor `c_l · tail_mass_l / tail_mass_0`
    /// that converts base-law conditional expectations into level-`l`
    /// tilted ones. Equals 1 at level 0.
    ///
    /// # Panics
    /// If `l` exceeds [`Self::max_level`].
    pub fn tilt_weight(&self, l: u32) -> f64 {
        let lvl = &self.levels[l as usize];
        lvl.mixing_moment * lvl.tail_mass / self.levels[0].tail_mass
    }

    /// Step ratio `c_{l+1}·tail_{l+1} / (c_l·tail_l)` between consecutive
    /// levels, as consumed by the table recursion.
    fn step_ratio(&self, l: usize) -> f64 {
        let cur = &self.levels[l];
        let next = &self.levels[l + 1];
        (next.mixing_moment * next.tail_mass) / (cur.mixing_moment * cur.tail_mass)
    }
}

/// Triangular table of conditional tail power moments
/// `T[l][k] = E[(S_l)^k | S_l > s_alpha]` for `l = 0..=K`, `k = 0..=K−l`.
#[derive(Debug, Clone)]
pub struct TailMomentTable {
    alpha: f64,
    s_alpha: f64,
    rows: Vec<Vec<f64>>,
}

impl TailMomentTable {
    /// Fills the table of maximum order `max_order` from a prebuilt ladder.
    ///
    /// The ladder must hold at least `max_order` levels. The recursion runs
    /// level-descending, order-ascending:
    ///
    /// ```text
    /// T[l][k] = μ·T[l][k−1]
    ///         + r_l·σ²·s_α^{k−1}·hazard_{l+1}
    ///         + r_l·(γ·T[l+1][k−1] + (k−1)·σ²·T[l+1][k−2])
    /// ```
    ///
    /// with `r_l = c_{l+1}·tail_{l+1}/(c_l·tail_l)` and `T[l][0] = 1`.
    pub fn from_ladder(
        model: &UnivariateNmvm,
        ladder: &TiltLadder,
        max_order: u32,
    ) -> Result<Self> {
        if max_order == 0 {
            return Err(Error::Domain(
                "tail moment table order must be at least 1".into(),
            ));
        }
        if ladder.max_level() < max_order {
            return Err(Error::Domain(format!(
                "table of order {max_order} needs a ladder with {max_order} levels, \
                 but only {} are available",
                ladder.max_level()
            )));
        }
        let kk = max_order as usize;
        let s_alpha = ladder.s_alpha;
        let (mu, gamma, sigma2) = (model.mu, model.gamma, model.sigma2);
        let mut rows: Vec<Vec<f64>> = (0..=kk).map(|l| vec![1.0; kk - l + 1]).collect();
        for l in (0..kk).rev() {
            let r_l = ladder.step_ratio(l);
            let hazard_next = ladder.levels[l + 1].hazard;
            for k in 1..=(kk - l) {
                let mut t = mu * rows[l][k - 1]
                    + r_l * sigma2 * s_alpha.powi(k as i32 - 1) * hazard_next
                    + r_l * gamma * rows[l + 1][k - 1];
                if k >= 2 {
                    t += r_l * (k - 1) as f64 * sigma2 * rows[l + 1][k - 2];
                }
                rows[l][k] = t;
            }
        }
        Ok(Self {
            alpha: ladder.alpha,
            s_alpha,
            rows,
        })
    }

    /// Confidence level the table was built for.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Quantile of the base aggregate at [`Self::alpha`].
    pub fn s_alpha(&self) -> f64 {
        self.s_alpha
    }

    /// Maximum order `K` of the table.
    pub fn max_order(&self) -> u32 {
        (self.rows.len() - 1) as u32
    }

    /// Table entry `T[level][order]`.
    ///
    /// # Panics
    /// If `(level, order)` lies outside the triangle `level + order ≤ K`.
    pub fn value(&self, level: u32, order: u32) -> f64 {
        self.rows[level as usize][order as usize]
    }

    /// Conditional tail expectation `E[S | S > s_alpha]`, i.e. `T[0][1]`.
    pub fn cte(&self) -> f64 {
        self.rows[0][1]
    }

    /// Tail central moment of order `k`, recentring the base row around the
    /// conditional tail expectation.
    ///
    /// # Panics
    /// If `k` exceeds [`Self::max_order`].
    pub fn central_moment(&self, k: u32) -> f64 {
        self.central_moment_with_condition(k).0
    }

    /// Tail central moment of order `k` together with the cancellation
    /// condition estimate `Σ|terms| / |result|`.
    ///
    /// # Panics
    /// If `k` exceeds [`Self::max_order`].
    pub fn central_moment_with_condition(&self, k: u32) -> (f64, f64) {
        self.shifted_power_with_condition(0, self.cte(), k)
    }

    /// Shifted conditional power moment
    /// `E[(S_level − shift)^k | S_level > s_alpha]`.
    ///
    /// # Panics
    /// If `level + k` exceeds [`Self::max_order`].
    pub fn shifted_power(&self, level: u32, shift: f64, k: u32) -> f64 {
        self.shifted_power_with_condition(level, shift, k).0
    }

    /// Shifted conditional power moment with its cancellation condition
    /// estimate `Σ|terms| / |result|`.
    ///
    /// The first central moment (`level == 0`, `shift` equal to the
    /// conditional tail expectation, `k == 1`) cancels exactly by
    /// construction; orders `k ≤ 1` therefore report a condition of 1.
    ///
    /// # Panics
    /// If `level + k` exceeds [`Self::max_order`].
    pub fn shifted_power_with_condition(&self, level: u32, shift: f64, k: u32) -> (f64, f64) {
        let row = &self.rows[level as usize];
        let k = k as usize;
        assert!(
            k < row.len(),
            "order {k} exceeds the table triangle at level {level}"
        );
        // Σ_{j=0}^{k} C(k,j) · T[level][k−j] · (−shift)^j with compensated
        // (Neumaier) summation.
        let mut sum = 0.0f64;
        let mut compensation = 0.0f64;
        let mut abs_sum = 0.0f64;
        let mut binom = 1.0f64;
        let mut shift_pow = 1.0f64;
        for j in 0..=k {
            let term = binom * row[k - j] * shift_pow;
            abs_sum += term.abs();
            let t = sum + term;
            if sum.abs() >= term.abs() {
                compensation += (sum - t) + term;
            } else {
                compensation += (term - t) + sum;
            }
            sum = t;
            binom = binom * (k - j) as f64 / (j + 1) as f64;
            shift_pow *= -shift;
        }
        let value = sum + compensation;
        let condition = if k <= 1 {
            1.0
        } else if value == 0.0 {
            f64::INFINITY
        } else {
            abs_sum / value.abs()
        };
        (value, condition)
    }
}

/// Builds a [`TiltLadder`] for `model` at level `alpha` with tilt levels
/// `0..=max_level`.
pub fn build_ladder(model: &UnivariateNmvm, alpha: f64, max_level: u32) -> Result<TiltLadder> {
    TiltLadder::build(model, alpha, max_level)
}

/// Builds the tail moment table of order `max_order` for `model` at `alpha`,
/// constructing the ladder internally. One-shot orders are capped at
/// [`DEFAULT_MAX_ORDER`].
pub fn tail_moment_table(
    model: &UnivariateNmvm,
    alpha: f64,
    max_order: u32,
) -> Result<TailMomentTable> {
    check_order_ceiling(max_order)?;
    let ladder = TiltLadder::build(model, alpha, max_order)?;
    TailMomentTable::from_ladder(model, &ladder, max_order)
}

/// Tail central moment `E[(S − CTE)^k | S > s_alpha]` of order `k ≥ 1`.
///
/// Emits a warning on stderr when the cancellation condition estimate
/// exceeds [`CONDITION_WARNING_THRESHOLD`].
pub fn tail_central_moment(model: &UnivariateNmvm, alpha: f64, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain(
            "tail central moment order must be at least 1".into(),
        ));
    }
    let table = tail_moment_table(model, alpha, k)?;
    let (value, condition) = table.central_moment_with_condition(k);
    warn_if_ill_conditioned("tail central moment", k, condition);
    Ok(value)
}

/// Shifted conditional power moment
/// `E[(S_level − shift)^k | S_level > s_alpha]` for the level-`level`
/// tilted aggregate, with `k ≥ 0`.
pub fn shifted_tail_power(
    model: &UnivariateNmvm,
    alpha: f64,
    level: u32,
    shift: f64,
    k: u32,
) -> Result<f64> {
    let max_order = (level + k).max(1);
    check_order_ceiling(max_order)?;
    let ladder = TiltLadder::build(model, alpha, max_order)?;
    let table = TailMomentTable::from_ladder(model, &ladder, max_order)?;
    let (value, condition) = table.shifted_power_with_condition(level, shift, k);
    warn_if_ill_conditioned("shifted tail power", k, condition);
    Ok(value)
}

/// Conditional tail expectation by its closed form
/// `μ + w₁·(γ + σ²·h₁)` where `w₁` is the level-1 tilt weight and `h₁` the
/// level-1 hazard. Serves as an independent cross-check of the recursion.
pub fn cte_closed_form(model: &UnivariateNmvm, alpha: f64) -> Result<f64> {
    let ladder = TiltLadder::build(model, alpha, 1)?;
    Ok(cte_from_ladder(model, &ladder))
}

/// Closed-form conditional tail expectation from a prebuilt ladder
/// (requires level 1).
pub fn cte_from_ladder(model: &UnivariateNmvm, ladder: &TiltLadder) -> f64 {
    let w1 = ladder.tilt_weight(1);
    let h1 = ladder.level(1).hazard;
    model.mu + w1 * (model.gamma + model.sigma2 * h1)
}

/// Second tail moment and tail variance by their closed forms:
///
/// ```text
/// TM₂ = μ² + w₁·(σ² + 2μγ + σ²(s_α + μ)h₁) + w₂·(γ² + γσ²h₂)
/// TV  = w₁σ²(1 + (s_α − μ)h₁) + w₂γ(γ + σ²h₂) − (w₁(γ + σ²h₁))²
/// ```
///
/// with `w_l` the level-`l` tilt weights and `h_l` the tilted hazards.
pub fn tm2_tv_closed_form(model: &UnivariateNmvm, alpha: f64) -> Result<(f64, f64)> {
    let ladder = TiltLadder::build(model, alpha, 2)?;
    Ok(tm2_tv_from_ladder(model, &ladder))
}

/// Closed-form second tail moment and tail variance from a prebuilt ladder
/// (requires level 2).
pub fn tm2_tv_from_ladder(model: &UnivariateNmvm, ladder: &TiltLadder) -> (f64, f64) {
    let (mu, gamma, sigma2) = (model.mu, model.gamma, model.sigma2);
    let s_alpha = ladder.s_alpha();
    let w1 = ladder.tilt_weight(1);
    let w2 = ladder.tilt_weight(2);
    let h1 = ladder.level(1).hazard;
    let h2 = ladder.level(2).hazard;
    let tm2 = mu * mu
        + w1 * (sigma2 + 2.0 * mu * gamma + sigma2 * (s_alpha + mu) * h1)
        + w2 * (gamma * gamma + gamma * sigma2 * h2);
    let tv = w1 * sigma2 * (1.0 + (s_alpha - mu) * h1) + w2 * gamma * (gamma + sigma2 * h2)
        - (w1 * (gamma + sigma2 * h1)).powi(2);
    (tm2, tv)
}

/// Rejects moment orders beyond [`DEFAULT_MAX_ORDER`], the ceiling applied
/// by the one-shot convenience functions.
pub fn check_order_ceiling(order: u32) -> Result<()> {
    if order > DEFAULT_MAX_ORDER {
        return Err(Error::Domain(format!(
            "moment order {order} exceeds the supported ceiling {DEFAULT_MAX_ORDER}; \
             build a TailMomentTable explicitly to go beyond it"
        )));
    }
    Ok(())
}

/// Prints a stderr warning when a cancellation condition estimate exceeds
/// [`CONDITION_WARNING_THRESHOLD`].
pub fn warn_if_ill_conditioned(what: &str, k: u32, condition: f64) {
    if condition > CONDITION_WARNING_THRESHOLD {
        eprintln!(
            "warning: {what} of order {k} lost most significant digits \
             (cancellation condition estimate {condition:.2e}); \
             the result is unreliable"
        );
    }
}
