//! The positive mixing random variable Θ of the mean–variance mixture.
//!
//! Three kinds are supported:
//!
//! * **GIG(λ, χ, ψ)** — the generalised inverse Gaussian family, density
//!   `π(θ) ∝ θ^{λ−1} exp(−(χ/θ + ψθ)/2)` on `(0, ∞)`, including its boundary
//!   branches: `χ = 0, λ > 0` is a Gamma(λ, rate ψ/2) law and
//!   `ψ = 0, λ < 0` is an inverse-Gamma(−λ, χ/2) law (implemented explicitly
//!   to avoid 0·∞ in the Bessel prefactor).
//! * **Degenerate** — a point mass at `θ₀ > 0` (the Gaussian special case of
//!   the mixture).
//! * **Numeric** — a tabulated density on a positive grid, interpreted as its
//!   piecewise-linear interpolant and zero outside the grid.
//!
//! The module provides raw moments `E[Θ^l]`, the moment-tilted laws
//! `π^{(l)}(θ) = θ^l π(θ) / E[Θ^l]` (GIG maps to GIG with λ ← λ+l), and
//! random sampling. Moment finiteness is policed on every call: the
//! inverse-Gamma branch has `E[Θ^l] < ∞` only for `l < −λ`.

use crate::error::{Error, Result};
use crate::quad;
use crate::special::{bessel_k_log, ln_gamma};
use rand::Rng;
use rand_distr::{Distribution, Gamma};

/// Parameters of a generalised inverse Gaussian law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GigParams {
    pub lambda: f64,
    pub chi: f64,
    pub psi: f64,
}

/// A tabulated density on a positive grid, interpreted piecewise-linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericMixing {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

/// The mixing random variable Θ.
#[derive(Debug, Clone, PartialEq)]
pub enum MixingModel {
    Gig(GigParams),
    Degenerate { theta0: f64 },
    Numeric(NumericMixing),
}

impl GigParams {
    /// `√(χψ)`, the argument of the Bessel prefactor.
    fn omega(&self) -> f64 {
        (self.chi * self.psi).sqrt()
    }

    fn is_gamma_branch(&self) -> bool {
        self.chi == 0.0
    }

    fn is_inverse_gamma_branch(&self) -> bool {
        self.psi == 0.0
    }
}

impl MixingModel {
    /// Builds a GIG mixing law, enforcing the parameter-branch invariant:
    /// exactly one of `(λ<0, χ>0, ψ≥0)`, `(λ=0, χ>0, ψ>0)`, `(λ>0, χ≥0, ψ>0)`.
    pub fn gig(lambda: f64, chi: f64, psi: f64) -> Result<Self> {
        if !lambda.is_finite() || !chi.is_finite() || !psi.is_finite() {
            return Err(Error::InvalidModel(format!(
                "GIG parameters must be finite, got lambda={lambda}, chi={chi}, psi={psi}"
            )));
        }
        if chi < 0.0 || psi < 0.0 {
            return Err(Error::InvalidModel(format!(
                "GIG requires chi ≥ 0 and psi ≥ 0, got chi={chi}, psi={psi}"
            )));
        }
        let branch_ok = if lambda < 0.0 {
            chi > 0.0
        } else if lambda == 0.0 {
            chi > 0.0 && psi > 0.0
        } else {
            psi > 0.0
        };
        if !branch_ok {
            return Err(Error::InvalidModel(format!(
                "GIG parameter branch violated: lambda={lambda} requires {}",
                if lambda < 0.0 {
                    "chi > 0 (psi ≥ 0)"
                } else if lambda == 0.0 {
                    "chi > 0 and psi > 0"
                } else {
                    "psi > 0 (chi ≥ 0)"
                }
            )));
        }
        Ok(MixingModel::Gig(GigParams { lambda, chi, psi }))
    }

    /// Builds a point mass at `theta0 > 0`.
    pub fn degenerate(theta0: f64) -> Result<Self> {
        if !(theta0.is_finite() && theta0 > 0.0) {
            return Err(Error::InvalidModel(format!(
                "degenerate mixing needs a positive finite point, got {theta0}"
            )));
        }
        Ok(MixingModel::Degenerate { theta0 })
    }

    /// Builds a tabulated density from strictly increasing positive `nodes`
    /// and non-negative `values`. The piecewise-linear interpolant must
    /// integrate to 1 within 1e-10.
    pub fn numeric(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != values.len() {
            return Err(Error::InvalidModel(format!(
                "numeric mixing needs matching node/value lists of length ≥ 2, \
                 got {} nodes and {} values",
                nodes.len(),
                values.len()
            )));
        }
        if nodes[0] <= 0.0 || !nodes[0].is_finite() {
            return Err(Error::InvalidModel(format!(
                "numeric mixing nodes must be positive, first node is {}",
                nodes[0]
            )));
        }
        for w in nodes.windows(2) {
            if !(w[1].is_finite() && w[1] > w[0]) {
                return Err(Error::InvalidModel(format!(
                    "numeric mixing nodes must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidModel(
                "numeric mixing density values must be finite and non-negative".into(),
            ));
        }
        let mass = trapezoid_mass(&nodes, &values);
        if (mass - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidModel(format!(
                "numeric mixing density integrates to {mass}, not 1 (tolerance 1e-10)"
            )));
        }
        Ok(MixingModel::Numeric(NumericMixing { nodes, values }))
    }

    /// Largest `l` with `E[Θ^l] < ∞`; `None` means every moment is finite.
    pub fn max_finite_moment(&self) -> Option<u32> {
        match self {
            MixingModel::Gig(p) if p.is_inverse_gamma_branch() => {
                let ceiling = (-p.lambda).ceil() - 1.0;
                Some(ceiling.max(0.0) as u32)
            }
            _ => None,
        }
    }

    fn require_moment(&self, l: u32) -> Result<()> {
        if let Some(ceiling) = self.max_finite_moment() {
            if l > ceiling {
                return Err(Error::MomentNotFinite { requested: l, ceiling });
            }
        }
        Ok(())
    }

    /// Raw moment `E[Θ^l]` (1 for `l = 0`).
    pub fn moment(&self, l: u32) -> Result<f64> {
        self.require_moment(l)?;
        if l == 0 {
            return Ok(1.0);
        }
        let lf = f64::from(l);
        match self {
            MixingModel::Gig(p) if p.is_gamma_branch() => {
                // Gamma(λ, rate ψ/2): E[Θ^l] = (2/ψ)^l Γ(λ+l)/Γ(λ).
                Ok((lf * (2.0 / p.psi).ln() + ln_gamma(p.lambda + lf) - ln_gamma(p.lambda)).exp())
            }
            MixingModel::Gig(p) if p.is_inverse_gamma_branch() => {
                // Inverse-Gamma(−λ, χ/2): E[Θ^l] = (χ/2)^l Γ(−λ−l)/Γ(−λ).
                Ok((lf * (p.chi / 2.0).ln() + ln_gamma(-p.lambda - lf) - ln_gamma(-p.lambda))
                    .exp())
            }
            MixingModel::Gig(p) => {
                // (χ/ψ)^{l/2} K_{λ+l}(ω) / K_λ(ω).
                let omega = p.omega();
                let log_ratio = bessel_k_log(p.lambda + lf, omega)? - bessel_k_log(p.lambda, omega)?;
                Ok((0.5 * lf * (p.chi.ln() - p.psi.ln()) + log_ratio).exp())
            }
            MixingModel::Degenerate { theta0 } => Ok(theta0.powi(l as i32)),
            MixingModel::Numeric(n) => {
                let q = quad::integrate_with_breakpoints(
                    |theta| theta.powi(l as i32) * n.interp(theta),
                    &n.nodes,
                    1e-300,
                    1e-12,
                )?;
                Ok(q.value)
            }
        }
    }

    /// The `l`-th moment-tilted mixing law, with density `θ^l π(θ) / E[Θ^l]`.
    pub fn tilt(&self, l: u32) -> Result<MixingModel> {
        self.require_moment(l)?;
        if l == 0 {
            return Ok(self.clone());
        }
        match self {
            MixingModel::Gig(p) => MixingModel::gig(p.lambda + f64::from(l), p.chi, p.psi),
            MixingModel::Degenerate { theta0 } => Ok(MixingModel::Degenerate { theta0: *theta0 }),
            MixingModel::Numeric(n) => {
                let raw: Vec<f64> = n
                    .nodes
                    .iter()
                    .zip(&n.values)
                    .map(|(x, v)| x.powi(l as i32) * v)
                    .collect();
                let mass = trapezoid_mass(&n.nodes, &raw);
                if !(mass.is_finite() && mass > 0.0) {
                    return Err(Error::InvalidModel(
                        "tilted numeric mixing density has no mass".into(),
                    ));
                }
                Ok(MixingModel::Numeric(NumericMixing {
                    nodes: n.nodes.clone(),
                    values: raw.into_iter().map(|v| v / mass).collect(),
                }))
            }
        }
    }

    /// Natural log of the mixing density at `theta`. Outside the support this
    /// is `-∞`. The degenerate kind has no density; it returns `+∞` at the
    /// atom and `-∞` elsewhere and is never integrated by the callers.
    pub fn log_density(&self, theta: f64) -> f64 {
        match self {
            MixingModel::Degenerate { theta0 } => {
                if theta == *theta0 {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                }
            }
            _ => {
                let norm = self.log_norm_constant().unwrap_or(f64::NAN);
                self.log_density_kernel(theta) + norm
            }
        }
    }

    /// Log of the density's normalisation constant (zero for the numeric
    /// kind, whose tabulated values are already normalised). Fails only when
    /// the Bessel prefactor of an interior GIG law is out of domain.
    pub(crate) fn log_norm_constant(&self) -> Result<f64> {
        match self {
            MixingModel::Gig(p) if p.is_gamma_branch() => {
                let rate = p.psi / 2.0;
                Ok(p.lambda * rate.ln() - ln_gamma(p.lambda))
            }
            MixingModel::Gig(p) if p.is_inverse_gamma_branch() => {
                let a = -p.lambda;
                let b = p.chi / 2.0;
                Ok(a * b.ln() - ln_gamma(a))
            }
            MixingModel::Gig(p) => Ok(0.5 * p.lambda * (p.psi.ln() - p.chi.ln())
                - std::f64::consts::LN_2
                - bessel_k_log(p.lambda, p.omega())?),
            MixingModel::Degenerate { .. } | MixingModel::Numeric(_) => Ok(0.0),
        }
    }

    /// Unnormalised log-density: `log_density = log_density_kernel +
    /// log_norm_constant`. Cheap to evaluate (no Bessel functions), which
    /// matters inside quadrature loops.
    pub(crate) fn log_density_kernel(&self, theta: f64) -> f64 {
        if theta.is_nan() || theta <= 0.0 {
            return f64::NEG_INFINITY;
        }
        match self {
            MixingModel::Gig(p) if p.is_gamma_branch() => {
                (p.lambda - 1.0) * theta.ln() - 0.5 * p.psi * theta
            }
            MixingModel::Gig(p) if p.is_inverse_gamma_branch() => {
                (p.lambda - 1.0) * theta.ln() - 0.5 * p.chi / theta
            }
            MixingModel::Gig(p) => {
                (p.lambda - 1.0) * theta.ln() - 0.5 * (p.chi / theta + p.psi * theta)
            }
            MixingModel::Degenerate { .. } => f64::NEG_INFINITY,
            MixingModel::Numeric(n) => {
                let v = n.interp(theta);
                if v > 0.0 {
                    v.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// Location `θ*` of the mode of the log-axis density `θ·π(θ)`, used to
    /// centre quadrature windows. `None` for the degenerate kind.
    pub(crate) fn log_axis_mode_theta(&self) -> Option<f64> {
        match self {
            MixingModel::Gig(p) => {
                // Maximise λu − (χe^{−u} + ψe^u)/2  ⇒  ψθ² − 2λθ − χ = 0.
                let root = (p.lambda * p.lambda + p.chi * p.psi).sqrt();
                let theta = if p.lambda > 0.0 {
                    (p.lambda + root) / p.psi
                } else if p.is_inverse_gamma_branch() {
                    -p.chi / (2.0 * p.lambda)
                } else {
                    p.chi / (root - p.lambda)
                };
                Some(theta)
            }
            MixingModel::Degenerate { .. } => None,
            MixingModel::Numeric(n) => {
                let (mut best, mut best_val) = (n.nodes[0], f64::NEG_INFINITY);
                for (x, v) in n.nodes.iter().zip(&n.values) {
                    let val = if *v > 0.0 { v.ln() + x.ln() } else { f64::NEG_INFINITY };
                    if val > best_val {
                        best = *x;
                        best_val = val;
                    }
                }
                Some(best)
            }
        }
    }

    /// Interior grid nodes of the numeric kind (quadrature breakpoints).
    pub(crate) fn numeric_nodes(&self) -> Option<&[f64]> {
        match self {
            MixingModel::Numeric(n) => Some(&n.nodes),
            _ => None,
        }
    }

    /// Appends `count` i.i.d. draws from the mixing law to `out`.
    /// Deterministic given the RNG state.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, count: usize, out: &mut Vec<f64>) {
        out.reserve(count);
        match self {
            MixingModel::Degenerate { theta0 } => {
                out.extend(std::iter::repeat_n(*theta0, count));
            }
            MixingModel::Gig(p) if p.is_gamma_branch() => {
                let g = Gamma::new(p.lambda, 2.0 / p.psi).expect("validated shape/scale");
                out.extend(g.sample_iter(rng).take(count));
            }
            MixingModel::Gig(p) if p.is_inverse_gamma_branch() => {
                let g = Gamma::new(-p.lambda, 2.0 / p.chi).expect("validated shape/scale");
                out.extend(g.sample_iter(rng).take(count).map(|y: f64| 1.0 / y));
            }
            MixingModel::Gig(p) => {
                let sampler = GigSampler::new(p);
                out.extend((0..count).map(|_| sampler.draw(rng)));
            }
            MixingModel::Numeric(n) => {
                out.extend((0..count).map(|_| n.inverse_cdf(rng.gen::<f64>())));
            }
        }
    }

    /// Convenience wrapper returning a fresh vector.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(count);
        self.sample_into(rng, count, &mut out);
        out
    }
}

/// Exact integral of the piecewise-linear interpolant of `(nodes, values)`.
fn trapezoid_mass(nodes: &[f64], values: &[f64]) -> f64 {
    let mut mass = 0.0;
    for i in 1..nodes.len() {
        mass += 0.5 * (values[i] + values[i - 1]) * (nodes[i] - nodes[i - 1]);
    }
    mass
}

impl NumericMixing {
    /// Piecewise-linear interpolation; zero outside the grid.
    fn interp(&self, theta: f64) -> f64 {
        let n = self.nodes.len();
        if theta < self.nodes[0] || theta > self.nodes[n - 1] {
            return 0.0;
        }
        let idx = match self.nodes.binary_search_by(|x| x.total_cmp(&theta)) {
            Ok(i) => return self.values[i],
            Err(i) => i, // first node greater than theta; ≥ 1 here
        };
        let (x0, x1) = (self.nodes[idx - 1], self.nodes[idx]);
        let (v0, v1) = (self.values[idx - 1], self.values[idx]);
        v0 + (v1 - v0) * (theta - x0) / (x1 - x0)
    }

    /// Exact inverse CDF of the piecewise-linear density (quadratic per
    /// segment, solved in closed form).
    fn inverse_cdf(&self, p: f64) -> f64 {
        let n = self.nodes.len();
        let mut cum = 0.0;
        for i in 1..n {
            let h = self.nodes[i] - self.nodes[i - 1];
            let seg = 0.5 * (self.values[i] + self.values[i - 1]) * h;
            if p <= cum + seg || i == n - 1 {
                let target = (p - cum).clamp(0.0, seg);
                let v0 = self.values[i - 1];
                let slope = (self.values[i] - v0) / h;
                // Solve v0·t + slope·t²/2 = target for t ∈ [0, h].
                let t = if slope.abs() * h < 1e-12 * v0.max(1e-300) {
                    if v0 > 0.0 {
                        target / v0
                    } else {
                        0.0
                    }
                } else {
                    let disc = (v0 * v0 + 2.0 * slope * target).max(0.0);
                    ((disc.sqrt() - v0) / slope).clamp(0.0, h)
                };
                return self.nodes[i - 1] + t;
            }
            cum += seg;
        }
        *self.nodes.last().unwrap()
    }
}

/// Rejection sampler for the strictly interior GIG branch (`χ > 0, ψ > 0`)
/// on the log axis `u = ln θ`, where `h(u) = λu − (χe^{−u} + ψe^u)/2` is
/// strictly concave: a three-piece hat (two tangent exponentials and a flat
/// cap) dominates `e^{h}` and yields a bounded rejection rate for every
/// parameter combination.
struct GigSampler {
    lambda: f64,
    chi: f64,
    psi: f64,
    h_mode: f64,
    /// Tangent slopes at the left/right touch points.
    slope_l: f64,
    slope_r: f64,
    /// Hat knots: the flat cap spans `[cut_l, cut_r]`.
    cut_l: f64,
    cut_r: f64,
    /// Cumulative piece probabilities (left, left+middle).
    p_left: f64,
    p_left_mid: f64,
}

impl GigSampler {
    fn new(p: &GigParams) -> Self {
        let (lambda, chi, psi) = (p.lambda, p.chi, p.psi);
        let h = |u: f64| lambda * u - 0.5 * (chi * (-u).exp() + psi * u.exp());
        let dh = |u: f64| lambda + 0.5 * (chi * (-u).exp() - psi * u.exp());

        let root = (lambda * lambda + chi * psi).sqrt();
        let theta_star = if lambda > 0.0 { (lambda + root) / psi } else { chi / (root - lambda) };
        let u_star = theta_star.ln();
        let h_mode = h(u_star);
        const DROP: f64 = 0.9;

        // Find the abscissae left/right of the mode where h has dropped by
        // DROP, by expansion then bisection (h is monotone on each side).
        let locate = |dir: f64| -> f64 {
            let mut step = 1.0;
            let mut prev = u_star;
            let mut probe = u_star + dir * step;
            while h(probe) > h_mode - DROP {
                prev = probe;
                step *= 2.0;
                probe = u_star + dir * step;
                if step > 1e6 {
                    break;
                }
            }
            let (mut lo, mut hi) = (prev, probe);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if h(mid) > h_mode - DROP {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let u_l = locate(-1.0);
        let u_r = locate(1.0);
        let (h_l, h_r) = (h(u_l), h(u_r));
        let (slope_l, slope_r) = (dh(u_l), dh(u_r));

        // Tangents meet the flat cap `h_mode` at the hat knots.
        let cut_l = u_l + (h_mode - h_l) / slope_l;
        let cut_r = u_r + (h_mode - h_r) / slope_r;

        // Piece areas relative to e^{h_mode}: the exponential tails integrate
        // to 1/|slope|, the cap to its width.
        let area_l = 1.0 / slope_l;
        let area_m = (cut_r - cut_l).max(0.0);
        let area_r = -1.0 / slope_r;
        let total = area_l + area_m + area_r;

        GigSampler {
            lambda,
            chi,
            psi,
            h_mode,
            slope_l,
            slope_r,
            cut_l,
            cut_r,
            p_left: area_l / total,
            p_left_mid: (area_l + area_m) / total,
        }
    }

    fn hat(&self, u: f64) -> f64 {
        if u < self.cut_l {
            self.h_mode + self.slope_l * (u - self.cut_l)
        } else if u > self.cut_r {
            self.h_mode + self.slope_r * (u - self.cut_r)
        } else {
            self.h_mode
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let h = |u: f64| {
            self.lambda * u - 0.5 * (self.chi * (-u).exp() + self.psi * u.exp())
        };
        loop {
            let pick: f64 = rng.gen();
            let tail: f64 = 1.0 - rng.gen::<f64>(); // in (0, 1]
            let u = if pick < self.p_left {
                self.cut_l + tail.ln() / self.slope_l
            } else if pick < self.p_left_mid {
                self.cut_l + rng.gen::<f64>() * (self.cut_r - self.cut_l)
            } else {
                self.cut_r + tail.ln() / self.slope_r
            };
            let v: f64 = 1.0 - rng.gen::<f64>();
            if v.ln() <= h(u) - self.hat(u) {
                return u.exp();
            }
        }
    }
}
