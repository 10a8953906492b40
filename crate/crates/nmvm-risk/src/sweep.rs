//! Allocation sweeps over confidence-level grids and CSV report writers.
//!
//! A sweep evaluates a set of allocation methods on a reweighted portfolio
//! at every level of an ascending alpha grid and emits one CSV row per
//! (alpha, method, component) cell:
//!
//! ```text
//! alpha,method,k,component,capital,proportion,total
//! ```
//!
//! Rows are deterministically ordered by alpha ascending, then method in
//! canonical order (cte, tv, tcm, combined, euler_rooted), then component
//! index. `proportion` is `NA` whenever the method total is zero. Numbers
//! are rendered with six significant digits by default, or with Rust's
//! shortest round-trip representation in full-precision mode. Files are
//! written to a temporary sibling and atomically renamed into place.

use crate::allocation::{AllocationEngine, AllocationMethod, AllocationReport};
use crate::error::{Error, Result};
use crate::nmvm::MultivariateNmvm;
use crate::oracle::ValidationRow;
use crate::tail_moments::check_order_ceiling;
use rayon::prelude::*;
use std::io::Write as _;
use std::path::Path;

/// An ascending grid of confidence levels in (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaGrid {
    start: f64,
    stop: f64,
    points: usize,
}

impl AlphaGrid {
    /// Builds a grid of `points` equally spaced levels from `start` to
    /// `stop` inclusive. Requires both endpoints in (0, 1) and
    /// `start < stop`, except that a single-point grid requires
    /// `start == stop`.
    pub fn new(start: f64, stop: f64, points: usize) -> Result<Self> {
        for (name, value) in [("start", start), ("stop", stop)] {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::Domain(format!(
                    "alpha grid {name} must lie in (0, 1), got {value}"
                )));
            }
        }
        if points == 0 {
            return Err(Error::Domain("alpha grid needs at least 1 point".into()));
        }
        if points == 1 && start != stop {
            return Err(Error::Domain(format!(
                "a 1-point alpha grid requires start == stop, got {start} and {stop}"
            )));
        }
        if points > 1 && start >= stop {
            return Err(Error::Domain(format!(
                "alpha grid must be strictly increasing, got start {start} >= stop {stop}"
            )));
        }
        Ok(AlphaGrid { start, stop, points })
    }

    /// A grid holding a single confidence level.
    pub fn single(alpha: f64) -> Result<Self> {
        AlphaGrid::new(alpha, alpha, 1)
    }

    /// The grid values, ascending, with exact endpoints.
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                if i + 1 == self.points {
                    self.stop
                } else {
                    self.start + step * i as f64
                }
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// What to compute at every grid level.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub alpha_grid: AlphaGrid,
    /// Methods to evaluate; deduplicated and run in canonical order.
    pub methods: Vec<AllocationMethod>,
    /// Central-moment order used by the tcm and euler_rooted methods.
    pub order: u32,
    /// Mixture weights (m1, m2, m3) used by the combined method.
    pub mixture_weights: (f64, f64, f64),
    /// Portfolio weights applied to the model before allocating.
    pub weights: Vec<f64>,
}

/// One output cell of a sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub alpha: f64,
    pub method: AllocationMethod,
    /// The moment order the method's total is built from.
    pub order: u32,
    pub component: String,
    pub capital: f64,
    /// `capital / total`, or `None` when the total is zero.
    pub proportion: Option<f64>,
    pub total: f64,
}

/// Runs a sweep: reweights the model, evaluates every requested method at
/// every grid level, and returns rows ordered by (alpha, method, component).
/// The row count is always `grid length x methods x dimension`.
pub fn run_sweep(
    model: &MultivariateNmvm,
    labels: &[String],
    config: &SweepConfig,
) -> Result<Vec<SweepRow>> {
    let n = model.dimension();
    if labels.len() != n {
        return Err(Error::Domain(format!(
            "got {} labels for a {n}-component model",
            labels.len()
        )));
    }
    if config.methods.is_empty() {
        return Err(Error::Domain("no allocation methods requested".into()));
    }
    let methods: Vec<AllocationMethod> = AllocationMethod::ALL
        .into_iter()
        .filter(|m| config.methods.contains(m))
        .collect();
    let needs_order_k = methods
        .iter()
        .any(|m| matches!(m, AllocationMethod::Tcm | AllocationMethod::EulerRooted));
    if needs_order_k {
        check_order_ceiling(config.order)?;
        if config.order < 2 {
            return Err(Error::Domain(format!(
                "central-moment methods need order >= 2, got {}",
                config.order
            )));
        }
    }
    let max_order = methods
        .iter()
        .map(|m| match m {
            AllocationMethod::Cte => 1,
            AllocationMethod::Tv => 2,
            AllocationMethod::Combined => 3,
            AllocationMethod::Tcm | AllocationMethod::EulerRooted => config.order,
        })
        .max()
        .unwrap_or(1);
    let weighted = model.reweight(&config.weights)?;
    let alphas = config.alpha_grid.values();

    let per_alpha: Vec<Result<Vec<SweepRow>>> = alphas
        .par_iter()
        .map(|&alpha| {
            let engine = AllocationEngine::new(&weighted, alpha, max_order)?;
            let mut rows = Vec::with_capacity(methods.len() * n);
            for &method in &methods {
                let report = match method {
                    AllocationMethod::Cte => engine.cte_allocation(),
                    AllocationMethod::Tv => engine.tv_allocation()?,
                    AllocationMethod::Tcm => engine.tcm_allocation(config.order)?,
                    AllocationMethod::Combined => {
                        let (m1, m2, m3) = config.mixture_weights;
                        engine.combined_allocation(m1, m2, m3)?
                    }
                    AllocationMethod::EulerRooted => {
                        engine.euler_rooted_allocation(config.order)?
                    }
                };
                append_report_rows(&mut rows, &report, labels, config.order);
            }
            Ok(rows)
        })
        .collect();

    let mut rows = Vec::with_capacity(alphas.len() * methods.len() * n);
    for chunk in per_alpha {
        rows.extend(chunk?);
    }
    Ok(rows)
}

fn append_report_rows(
    rows: &mut Vec<SweepRow>,
    report: &AllocationReport,
    labels: &[String],
    configured_order: u32,
) {
    let order = match report.method {
        AllocationMethod::Cte => 1,
        AllocationMethod::Tv => 2,
        AllocationMethod::Combined => 3,
        AllocationMethod::Tcm | AllocationMethod::EulerRooted => configured_order,
    };
    for (i, label) in labels.iter().enumerate() {
        rows.push(SweepRow {
            alpha: report.alpha,
            method: report.method,
            order,
            component: label.clone(),
            capital: report.capitals[i],
            proportion: report.proportions.as_ref().map(|p| p[i]),
            total: report.total,
        });
    }
}

/// Renders a value with six significant digits (fixed notation where the
/// decimal exponent lies in [-4, 5], scientific otherwise, trailing zeros
/// trimmed in fixed notation), or with the shortest round-trip
/// representation when `full_precision` is set.
pub fn format_numeric(value: f64, full_precision: bool) -> String {
    if full_precision || !value.is_finite() {
        return format!("{value}");
    }
    if value == 0.0 {
        return "0".to_string();
    }
    let magnitude = value.abs();
    let mut exp = magnitude.log10().floor() as i32;
    // log10 can land on the wrong side of an exact power of ten.
    if 10f64.powi(exp + 1) <= magnitude {
        exp += 1;
    } else if 10f64.powi(exp) > magnitude {
        exp -= 1;
    }
    if !(-4..6).contains(&exp) {
        return format!("{value:.5e}");
    }
    let decimals = (5 - exp).max(0) as usize;
    let fixed = format!("{value:.decimals$}");
    // Trim trailing zeros of the fractional part only; integer zeros as in
    // 100000 are significant.
    let trimmed = if fixed.contains('.') {
        fixed.trim_end_matches('0').trim_end_matches('.')
    } else {
        fixed.as_str()
    };
    if trimmed == "-0" {
        "0".to_string()
    } else {
        trimmed.to_string()
    }
}

/// Renders sweep rows as a CSV document with LF line endings.
pub fn sweep_csv_string(rows: &[SweepRow], full_precision: bool) -> String {
    let mut out = String::from("alpha,method,k,component,capital,proportion,total\n");
    for row in rows {
        let proportion = match row.proportion {
            Some(p) => format_numeric(p, full_precision),
            None => "NA".to_string(),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            format_numeric(row.alpha, full_precision),
            row.method.as_str(),
            row.order,
            row.component,
            format_numeric(row.capital, full_precision),
            proportion,
            format_numeric(row.total, full_precision),
        ));
    }
    out
}

/// Writes sweep rows as CSV via a temporary file and an atomic rename.
pub fn write_sweep_csv(rows: &[SweepRow], path: &Path, full_precision: bool) -> Result<()> {
    write_text_atomic(path, &sweep_csv_string(rows, full_precision))
}

/// Renders oracle validation rows as a CSV document with LF line endings.
pub fn validation_csv_string(rows: &[ValidationRow], full_precision: bool) -> String {
    let mut out = String::from("quantity,analytic,empirical,std_error,z\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.quantity,
            format_numeric(row.analytic, full_precision),
            format_numeric(row.empirical, full_precision),
            format_numeric(row.std_error, full_precision),
            format_numeric(row.z_score, full_precision),
        ));
    }
    out
}

/// Writes validation rows as CSV via a temporary file and an atomic rename.
pub fn write_validation_csv(
    rows: &[ValidationRow],
    path: &Path,
    full_precision: bool,
) -> Result<()> {
    write_text_atomic(path, &validation_csv_string(rows, full_precision))
}

/// Writes a text document to `path` via a temporary sibling file and an
/// atomic rename, so readers never observe a partially written report.
pub fn write_text_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(parent) if !parent.as_os_str().is_empty() => parent,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| {
        Error::Io(format!(
            "cannot create temporary file in {}: {e}",
            dir.display()
        ))
    })?;
    tmp.write_all(contents.as_bytes())
        .map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))?;
    tmp.persist(path)
        .map_err(|e| Error::Io(format!("cannot rename into {}: {e}", path.display())))?;
    Ok(())
}
