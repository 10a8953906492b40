//! Univariate and multivariate normal mean–variance mixture laws.
//!
//! A random vector `X` follows the mixture law when, conditionally on the
//! mixing variable `Θ = θ`, it is multivariate normal with mean `μ + θγ` and
//! covariance `θΣ`. The family is closed under linear maps: for a weight
//! vector `w`, the aggregate `S = w'X` is the univariate mixture with
//! `μ = w'μ⃗`, `γ = w'γ⃗`, `σ² = w'Σw` and the same mixing law.
//!
//! Scalar distribution functions are mixture integrals over θ, evaluated on
//! the log axis `u = ln θ` (which tames both endpoints of sharply peaked
//! mixing densities) by adaptive Gauss–Kronrod quadrature over a window where
//! the integrand's log-envelope is within 120 nats of its peak; degenerate
//! mixing bypasses quadrature entirely.

use crate::error::{Error, Result};
use crate::mixing::MixingModel;
use crate::quad;
use crate::special::{norm_log_pdf, norm_pdf, norm_sf};
use nalgebra::DMatrix;

/// Scalar mean–variance mixture law (e.g. a portfolio aggregate).
#[derive(Debug, Clone)]
pub struct UnivariateNmvm {
    pub mu: f64,
    pub gamma: f64,
    pub sigma2: f64,
    pub mixing: MixingModel,
}

/// Vector mean–variance mixture law over `n` components.
#[derive(Debug, Clone)]
pub struct MultivariateNmvm {
    mu: Vec<f64>,
    gamma: Vec<f64>,
    sigma: DMatrix<f64>,
    mixing: MixingModel,
}

impl UnivariateNmvm {
    pub fn new(mu: f64, gamma: f64, sigma2: f64, mixing: MixingModel) -> Result<Self> {
        if !mu.is_finite() || !gamma.is_finite() || !sigma2.is_finite() {
            return Err(Error::InvalidModel(format!(
                "univariate parameters must be finite, got mu={mu}, gamma={gamma}, sigma2={sigma2}"
            )));
        }
        if sigma2 <= 0.0 {
            return Err(Error::InvalidModel(format!(
                "sigma2 must be positive, got {sigma2}"
            )));
        }
        Ok(UnivariateNmvm { mu, gamma, sigma2, mixing })
    }

    /// The same location/scale/skew parameters over the `l`-th moment-tilted
    /// mixing law.
    pub fn with_tilted_mixing(&self, l: u32) -> Result<Self> {
        Ok(UnivariateNmvm {
            mu: self.mu,
            gamma: self.gamma,
            sigma2: self.sigma2,
            mixing: self.mixing.tilt(l)?,
        })
    }

    /// Probability density at `s`, with relative quadrature error ≤ ~1e-10.
    pub fn density(&self, s: f64) -> Result<f64> {
        match &self.mixing {
            MixingModel::Degenerate { theta0 } => {
                let sd = (theta0 * self.sigma2).sqrt();
                Ok(norm_pdf((s - self.mu - theta0 * self.gamma) / sd) / sd)
            }
            _ => {
                let sigma = self.sigma2.sqrt();
                let value = self.mixture_integral(
                    |theta, log_pi| {
                        let z = (s - self.mu - self.gamma * theta) / (sigma * theta.sqrt());
                        (norm_log_pdf(z) - sigma.ln() - 0.5 * theta.ln() + log_pi).exp()
                    },
                    0.5,
                    s,
                )?;
                Ok(value.max(0.0))
            }
        }
    }

    /// Survival probability `P(S > s)`, with absolute error ≤ ~1e-11.
    pub fn survival(&self, s: f64) -> Result<f64> {
        match &self.mixing {
            MixingModel::Degenerate { theta0 } => {
                let sd = (theta0 * self.sigma2).sqrt();
                Ok(norm_sf((s - self.mu - theta0 * self.gamma) / sd))
            }
            _ => {
                let sigma = self.sigma2.sqrt();
                let value = self.mixture_integral(
                    |theta, log_pi| {
                        let z = (s - self.mu - self.gamma * theta) / (sigma * theta.sqrt());
                        norm_sf(z) * log_pi.exp()
                    },
                    0.0,
                    s,
                )?;
                Ok(value.clamp(0.0, 1.0))
            }
        }
    }

    /// Hazard rate `density(s) / survival(s)`.
    pub fn hazard(&self, s: f64) -> Result<f64> {
        let tail = self.survival(s)?;
        if tail <= 1e-300 {
            return Err(Error::TailUnderflow { threshold: s });
        }
        Ok(self.density(s)? / tail)
    }

    /// The `alpha`-quantile `s_α`: the root of `P(S > s) = 1 − α`, bracketed
    /// from mixture mean/scale proxies (or by geometric expansion from `μ`
    /// when the first mixing moment does not exist) and polished until the
    /// abscissa reaches machine precision or the probability residual drops
    /// below `1e-13` — whichever comes first.
    pub fn quantile(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!(
                "quantile level must lie in (0,1), got {alpha}"
            )));
        }
        let target = 1.0 - alpha;

        let (centre, mut radius) = match self.mixing.moment(1) {
            Ok(c1) => (
                self.mu + c1 * self.gamma,
                10.0 * (c1 * self.sigma2).sqrt().max(1e-12),
            ),
            Err(Error::MomentNotFinite { .. }) => (self.mu, 10.0 * self.sigma2.sqrt()),
            Err(e) => return Err(e),
        };

        let mut lo = centre - radius;
        let mut hi = centre + radius;
        let mut f_lo = self.survival(lo)? - target;
        let mut f_hi = self.survival(hi)? - target;
        let mut expansions = 0;
        while f_lo < 0.0 {
            radius *= 2.0;
            lo = centre - radius;
            f_lo = self.survival(lo)? - target;
            expansions += 1;
            if expansions > 60 {
                return Err(Error::RootFindingFailure(format!(
                    "no lower quantile bracket after 60 expansions (alpha={alpha})"
                )));
            }
        }
        let mut expansions = 0;
        while f_hi > 0.0 {
            radius *= 2.0;
            hi = centre + radius;
            f_hi = self.survival(hi)? - target;
            expansions += 1;
            if expansions > 60 {
                return Err(Error::RootFindingFailure(format!(
                    "no upper quantile bracket after 60 expansions (alpha={alpha})"
                )));
            }
        }

        self.brent(lo, hi, f_lo, f_hi, target)
    }

    /// Brent's method on `survival(s) − target` over a sign-changing bracket.
    fn brent(&self, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64, target: f64) -> Result<f64> {
        if fa == 0.0 {
            return Ok(a);
        }
        if fb == 0.0 {
            return Ok(b);
        }
        debug_assert!(fa * fb < 0.0);
        let mut c = a;
        let mut fc = fa;
        let mut d = b - a;
        let mut e = d;
        for _ in 0..200 {
            if fb * fc > 0.0 {
                c = a;
                fc = fa;
                d = b - a;
                e = d;
            }
            if fc.abs() < fb.abs() {
                a = b;
                b = c;
                c = a;
                fa = fb;
                fb = fc;
                fc = fa;
            }
            // Abscissa tolerance at machine precision: a looser, scale-
            // relative cut-off would leave large-|s| roots with probability
            // residuals above the 1e-9 contract.
            let tol = 2.0 * f64::EPSILON * b.abs() + 1e-15;
            let xm = 0.5 * (c - b);
            if xm.abs() <= tol || fb.abs() <= 1e-13 {
                return Ok(b);
            }
            if e.abs() >= tol && fa.abs() > fb.abs() {
                let s = fb / fa;
                let (mut p, mut q) = if a == c {
                    (2.0 * xm * s, 1.0 - s)
                } else {
                    let q = fa / fc;
                    let r = fb / fc;
                    (
                        s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0)),
                        (q - 1.0) * (r - 1.0) * (s - 1.0),
                    )
                };
                if p > 0.0 {
                    q = -q;
                }
                p = p.abs();
                if 2.0 * p < (3.0 * xm * q - (tol * q).abs()).min((e * q).abs()) {
                    e = d;
                    d = p / q;
                } else {
                    d = xm;
                    e = d;
                }
            } else {
                d = xm;
                e = d;
            }
            a = b;
            fa = fb;
            b += if d.abs() > tol { d } else { tol.copysign(xm) };
            fb = self.survival(b)? - target;
        }
        Err(Error::RootFindingFailure(
            "quantile refinement did not converge in 200 iterations".into(),
        ))
    }

    /// Mixture integral `∫ g(θ)·π(θ) dθ` for a continuous mixing law. `g` is
    /// passed `(θ, ln π(θ))` and must fold the density in itself (this lets
    /// density-like integrands combine exponents before exponentiating).
    /// `half_power` describes the `θ^{−half_power}` growth of `g` near zero,
    /// which the window envelope must absorb.
    fn mixture_integral<G>(&self, g: G, half_power: f64, split_hint_s: f64) -> Result<f64>
    where
        G: Fn(f64, f64) -> f64,
    {
        let mixing = &self.mixing;
        let log_norm = mixing.log_norm_constant()?;

        if let Some(nodes) = self.mixing.numeric_nodes() {
            // Compact support: integrate in θ directly with the grid nodes as
            // panel boundaries.
            let mut points: Vec<f64> = nodes.to_vec();
            if let Some(theta_c) = self.transition_theta(split_hint_s) {
                if theta_c > points[0] && theta_c < *points.last().unwrap() {
                    insert_point(&mut points, theta_c);
                }
            }
            let q = quad::integrate_with_breakpoints(
                |theta| {
                    let log_pi = mixing.log_density_kernel(theta) + log_norm;
                    if log_pi == f64::NEG_INFINITY {
                        return 0.0;
                    }
                    g(theta, log_pi)
                },
                &points,
                1e-300,
                5e-13,
            )?;
            return Ok(q.value);
        }

        // Integrand on u = ln θ: g(e^u)·e^u·π(e^u); log-envelope of the
        // mixing part is ln π̃(u) = ln π(e^u) + u, adjusted by the
        // θ^{−half_power} growth of g.
        let envelope =
            |u: f64| mixing.log_density_kernel(u.exp()) + log_norm + u - half_power * u;
        let u_star = mixing
            .log_axis_mode_theta()
            .expect("continuous mixing has a log-axis mode")
            .ln();
        // The envelope mode shifts when half_power > 0; probe around u_star.
        let mut peak_u = u_star;
        let mut peak = envelope(u_star);
        let mut probe = u_star;
        loop {
            probe -= 0.25;
            let v = envelope(probe);
            if v > peak {
                peak = v;
                peak_u = probe;
            } else if probe < u_star - 3.0 && v < peak - 1.0 {
                break;
            }
            if probe < -745.0 {
                break;
            }
        }
        if !peak.is_finite() {
            return Err(Error::QuadratureFailure(
                "mixing density has no representable peak on the log axis".into(),
            ));
        }
        const DROP: f64 = 120.0;
        let expand = |dir: f64| -> f64 {
            let mut u = peak_u;
            let mut step = 0.5;
            loop {
                u += dir * step;
                if u < -745.0 {
                    return -745.0;
                }
                if u > 700.0 {
                    return 700.0;
                }
                if envelope(u) < peak - DROP {
                    return u;
                }
                step = (step * 1.5).min(32.0);
            }
        };
        let u_lo = expand(-1.0);
        let u_hi = expand(1.0);

        // Seed panels: a uniform pre-split plus the transition abscissa of
        // the conditional-normal argument, if it falls inside the window.
        let mut points: Vec<f64> = (0..=16)
            .map(|i| u_lo + (u_hi - u_lo) * i as f64 / 16.0)
            .collect();
        if let Some(theta_c) = self.transition_theta(split_hint_s) {
            let u_c = theta_c.ln();
            if u_c > u_lo && u_c < u_hi {
                insert_point(&mut points, u_c);
            }
        }

        let q = quad::integrate_with_breakpoints(
            |u: f64| {
                let theta = u.exp();
                let log_pi_u = mixing.log_density_kernel(theta) + log_norm + u;
                if log_pi_u == f64::NEG_INFINITY {
                    return 0.0;
                }
                g(theta, log_pi_u)
            },
            &points,
            1e-300,
            5e-13,
        )?;
        Ok(q.value)
    }

    /// The θ at which the conditional-normal argument `(s−μ−γθ)/(σ√θ)`
    /// crosses zero — where survival-type integrands switch regimes.
    fn transition_theta(&self, s: f64) -> Option<f64> {
        if self.gamma == 0.0 {
            return None;
        }
        let theta_c = (s - self.mu) / self.gamma;
        (theta_c.is_finite() && theta_c > 0.0).then_some(theta_c)
    }
}

fn insert_point(points: &mut Vec<f64>, x: f64) {
    if points.iter().all(|p| (p - x).abs() > 1e-12 * x.abs().max(1e-12)) {
        points.push(x);
        points.sort_by(f64::total_cmp);
    }
}

impl MultivariateNmvm {
    /// Validates and builds an `n`-dimensional mixture model. `sigma` must be
    /// symmetric within `1e-12` (relative to its largest entry) and positive
    /// semi-definite within `−1e-10·‖Σ‖` on its smallest eigenvalue.
    pub fn new(
        mu: Vec<f64>,
        gamma: Vec<f64>,
        sigma: DMatrix<f64>,
        mixing: MixingModel,
    ) -> Result<Self> {
        let n = mu.len();
        if n == 0 {
            return Err(Error::InvalidModel("dimension must be at least 1".into()));
        }
        if gamma.len() != n {
            return Err(Error::InvalidModel(format!(
                "gamma has length {}, expected {n}",
                gamma.len()
            )));
        }
        if sigma.nrows() != n || sigma.ncols() != n {
            return Err(Error::InvalidModel(format!(
                "sigma is {}×{}, expected {n}×{n}",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        if mu.iter().chain(gamma.iter()).any(|v| !v.is_finite())
            || sigma.iter().any(|v| !v.is_finite())
        {
            return Err(Error::InvalidModel(
                "mu, gamma, and sigma entries must all be finite".into(),
            ));
        }

        let scale = sigma.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
        for i in 0..n {
            for j in (i + 1)..n {
                let gap = (sigma[(i, j)] - sigma[(j, i)]).abs();
                if gap > 1e-12 * scale {
                    return Err(Error::InvalidModel(format!(
                        "sigma is not symmetric: entries ({i},{j}) and ({j},{i}) \
                         differ by {gap:e}"
                    )));
                }
            }
        }

        let eigen = sigma.clone().symmetric_eigen();
        let max_abs = eigen.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let min = eigen.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(*v));
        if min < -1e-10 * max_abs.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidModel(format!(
                "sigma is not positive semi-definite: smallest eigenvalue {min:e} \
                 (largest magnitude {max_abs:e})"
            )));
        }

        Ok(MultivariateNmvm { mu, gamma, sigma, mixing })
    }

    pub fn dimension(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn mixing(&self) -> &MixingModel {
        &self.mixing
    }

    /// Covariance row sum `σ_iS = Σ_j σ_ij`.
    pub fn sigma_row_sum(&self, i: usize) -> f64 {
        self.sigma.row(i).iter().sum()
    }

    /// Total covariance mass `σ_S² = Σ_i Σ_j σ_ij`.
    pub fn sigma_total(&self) -> f64 {
        self.sigma.iter().sum()
    }

    /// The scalar law of `S = w'X`.
    pub fn aggregate(&self, weights: &[f64]) -> Result<UnivariateNmvm> {
        let n = self.dimension();
        if weights.len() != n || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "weights must be {n} finite numbers"
            )));
        }
        let mu = dot(weights, &self.mu);
        let gamma = dot(weights, &self.gamma);
        let mut sigma2 = 0.0;
        for i in 0..n {
            for j in 0..n {
                sigma2 += weights[i] * self.sigma[(i, j)] * weights[j];
            }
        }
        if sigma2 <= 0.0 {
            return Err(Error::DegenerateAggregate { sigma2 });
        }
        UnivariateNmvm::new(mu, gamma, sigma2, self.mixing.clone())
    }

    /// Componentwise nominal scaling: `μᵢ ← wᵢμᵢ`, `γᵢ ← wᵢγᵢ`,
    /// `σᵢⱼ ← wᵢwⱼσᵢⱼ`. The scaled matrix stays symmetric PSD by congruence.
    pub fn reweight(&self, weights: &[f64]) -> Result<Self> {
        let n = self.dimension();
        if weights.len() != n || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "weights must be {n} finite numbers"
            )));
        }
        let mu = self.mu.iter().zip(weights).map(|(m, w)| m * w).collect();
        let gamma = self.gamma.iter().zip(weights).map(|(g, w)| g * w).collect();
        let mut sigma = self.sigma.clone();
        for i in 0..n {
            for j in 0..n {
                sigma[(i, j)] *= weights[i] * weights[j];
            }
        }
        Ok(MultivariateNmvm { mu, gamma, sigma, mixing: self.mixing.clone() })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
