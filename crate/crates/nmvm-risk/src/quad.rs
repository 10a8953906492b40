//! Adaptive numerical integration on finite intervals.
//!
//! A 15-point Kronrod rule with embedded 7-point Gauss rule supplies both a
//! panel estimate and an error estimate (the classic QUADPACK `qk15` scheme,
//! including the `resasc`-scaled error heuristic); panels are bisected
//! greedily, worst error first, until the requested tolerance is met.

use crate::error::{Error, Result};

/// Abscissae of the 15-point Kronrod rule on `[-1, 1]` (non-negative half;
/// the rule is symmetric). Odd indices are the embedded 7-point Gauss nodes.
#[allow(clippy::excessive_precision)] // full published table digits
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

/// Weights of the 15-point Kronrod rule, matching `XGK`.
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// Weights of the embedded 7-point Gauss rule, matching `XGK[1], XGK[3],
/// XGK[5], XGK[7]`.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    /// Estimated value of the integral.
    pub value: f64,
    /// Estimated absolute error bound.
    pub abs_error: f64,
    /// Number of panels in the final subdivision.
    pub panels: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

/// One `qk15` application on `[a, b]`: returns the Kronrod estimate and the
/// QUADPACK error bound.
#[allow(clippy::needless_range_loop)] // `j` drives paired Gauss/Kronrod index arithmetic
fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64)> {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(centre);
    let mut fv1 = [0.0_f64; 7];
    let mut fv2 = [0.0_f64; 7];
    let mut resg = WG[3] * fc;
    let mut resk = WGK[7] * fc;
    let mut resabs = resk.abs();

    for j in 0..3 {
        let idx = 2 * j + 1; // Gauss node
        let offset = half * XGK[idx];
        let f1 = f(centre - offset);
        let f2 = f(centre + offset);
        fv1[idx] = f1;
        fv2[idx] = f2;
        let fsum = f1 + f2;
        resg += WG[j] * fsum;
        resk += WGK[idx] * fsum;
        resabs += WGK[idx] * (f1.abs() + f2.abs());
    }
    for j in 0..4 {
        let idx = 2 * j; // Kronrod-only node
        let offset = half * XGK[idx];
        let f1 = f(centre - offset);
        let f2 = f(centre + offset);
        fv1[idx] = f1;
        fv2[idx] = f2;
        let fsum = f1 + f2;
        resk += WGK[idx] * fsum;
        resabs += WGK[idx] * (f1.abs() + f2.abs());
    }

    if !resk.is_finite() {
        return Err(Error::QuadratureFailure(format!(
            "integrand returned a non-finite value on [{a}, {b}]"
        )));
    }

    let reskh = 0.5 * resk;
    let mut resasc = WGK[7] * (fc - reskh).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }

    let value = resk * half;
    let resabs_scaled = resabs * half.abs();
    let resasc_scaled = resasc * half.abs();
    let mut err = ((resk - resg) * half).abs();
    if resasc_scaled != 0.0 && err != 0.0 {
        err = resasc_scaled * (200.0 * err / resasc_scaled).powf(1.5).min(1.0);
    }
    if resabs_scaled > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs_scaled);
    }
    Ok((value, err))
}

/// Neumaier-compensated sum of panel values and errors.
fn totals(panels: &[Panel]) -> (f64, f64) {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    let mut err = 0.0_f64;
    for p in panels {
        let t = sum + p.value;
        comp += if sum.abs() >= p.value.abs() {
            (sum - t) + p.value
        } else {
            (p.value - t) + sum
        };
        sum = t;
        err += p.error;
    }
    (sum + comp, err)
}

/// Adaptively integrates `f` over `[a, b]` until the summed error estimate is
/// below `max(eps_abs, eps_rel·|value|)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    eps_abs: f64,
    eps_rel: f64,
) -> Result<Quadrature> {
    integrate_with_breakpoints(f, &[a, b], eps_abs, eps_rel)
}

/// Like [`integrate`], but starts from the subdivision given by `points`
/// (strictly increasing panel boundaries). Seeding panels at known kinks,
/// peaks, or scale changes keeps the subdivision shallow.
pub fn integrate_with_breakpoints<F: Fn(f64) -> f64>(
    f: F,
    points: &[f64],
    eps_abs: f64,
    eps_rel: f64,
) -> Result<Quadrature> {
    const MAX_PANELS: usize = 4000;

    if points.len() < 2 {
        return Err(Error::QuadratureFailure(
            "integration range needs at least two boundary points".into(),
        ));
    }
    for w in points.windows(2) {
        if w[0].is_nan() || w[1].is_nan() || w[0] >= w[1] {
            return Err(Error::QuadratureFailure(format!(
                "integration boundaries must be strictly increasing, got {} then {}",
                w[0], w[1]
            )));
        }
    }

    let mut panels: Vec<Panel> = Vec::with_capacity(64);
    for w in points.windows(2) {
        let (value, error) = kronrod15(&f, w[0], w[1])?;
        panels.push(Panel { a: w[0], b: w[1], value, error });
    }

    loop {
        let (total, total_err) = totals(&panels);
        let tolerance = eps_abs.max(eps_rel * total.abs());
        if total_err <= tolerance {
            return Ok(Quadrature { value: total, abs_error: total_err, panels: panels.len() });
        }
        if panels.len() >= MAX_PANELS {
            return Err(Error::QuadratureFailure(format!(
                "failed to reach tolerance {tolerance:.3e} (error {total_err:.3e}) \
                 after {MAX_PANELS} panels"
            )));
        }

        let worst = panels
            .iter()
            .enumerate()
            .max_by(|(_, x), (_, y)| x.error.total_cmp(&y.error))
            .map(|(i, _)| i)
            .expect("panel list is non-empty");
        let Panel { a, b, .. } = panels[worst];
        let mid = 0.5 * (a + b);
        if !(a < mid && mid < b) {
            return Err(Error::QuadratureFailure(format!(
                "panel [{a}, {b}] cannot be subdivided further; \
                 integrand is too singular for the requested tolerance"
            )));
        }
        let (lv, le) = kronrod15(&f, a, mid)?;
        let (rv, re) = kronrod15(&f, mid, b)?;
        panels[worst] = Panel { a, b: mid, value: lv, error: le };
        panels.push(Panel { a: mid, b, value: rv, error: re });
    }
}
