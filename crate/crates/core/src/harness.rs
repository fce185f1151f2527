//! Perturbed test functions, θ calibration, end-to-end experiments and
//! report emission.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approximants::{
    decompose_full, DiagnosticsSummary, Directions, IterKind, IterationSpec, LimitControl,
};
use crate::bounds::{stability_bound, BoundContext, BoundKind, PhiForm, PowerBound};
use crate::equations::{mixed_stencil, EquationParams, FunctionHandle};
use crate::error::{invalid, Error, Result};
use crate::quasinorm::{CodomainVector, PNormSpace};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    /// `ε sin(ωx)`
    BoundedSmooth,
    /// `ε|x|^λ cos(ωx)`, or `ε(cos(ωx) - 1)` when `λ = 0`
    PowerScaled,
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "none" => Ok(NoiseKind::None),
            "bounded_smooth" | "smooth" => Ok(NoiseKind::BoundedSmooth),
            "power_scaled" | "power" => Ok(NoiseKind::PowerScaled),
            other => Err(invalid(format!("unknown noise kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub amplitude: f64,
    pub seed: u64,
}

/// Control-function shape with `θ` left free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiTemplate {
    pub form: PhiForm,
    #[serde(default)]
    pub r: f64,
    #[serde(default)]
    pub s: f64,
}

impl PhiTemplate {
    pub fn with_theta<T: Scalar>(&self, theta: T) -> Result<PowerBound<T>> {
        PowerBound::new(self.form, theta, T::of(self.r), T::of(self.s))
    }

    /// Exponent of the power-scaled noise.
    fn noise_exponent(&self) -> f64 {
        match self.form {
            PhiForm::Sum => self.r,
            PhiForm::Product => self.r + self.s,
            PhiForm::Constant => 0.0,
        }
    }
}

/// Inclusive evenly spaced points `min, …, max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.count < 2 {
            return Err(invalid("grid needs at least 2 points"));
        }
        if !(self.min < self.max) || !self.min.is_finite() || !self.max.is_finite() {
            return Err(invalid(format!(
                "grid needs finite min < max, got [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(())
    }

    /// `(min·(n-1-i) + max·i)/(n-1)`: endpoints are exact and symmetric
    /// grids are exactly symmetric.
    pub fn points<T: Scalar>(&self) -> Vec<T> {
        let n = self.count - 1;
        let (lo, hi) = (T::of(self.min), T::of(self.max));
        let den = T::of_int(n as i64);
        (0..=n)
            .map(|i| (lo * T::of_int((n - i) as i64) + hi * T::of_int(i as i64)) / den)
            .collect()
    }

    /// Cartesian square of [`GridSpec::points`], row-major in `x`.
    pub fn lattice<T: Scalar>(&self) -> Vec<(T, T)> {
        let pts = self.points::<T>();
        pts.iter()
            .flat_map(|&x| pts.iter().map(move |&y| (x, y)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub k: i64,
    pub p: f64,
    pub codomain_dim: usize,
    /// `(a3, a2, a1)` per component; a single triple is used for every one.
    pub poly: Vec<[f64; 3]>,
    pub noise: NoiseSpec,
    pub phi_form: PhiTemplate,
    pub grid: GridSpec,
    pub tol: f64,
    /// `None` keeps each iteration's default.
    #[serde(default)]
    pub max_n: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            k: 2,
            p: 1.0,
            codomain_dim: 1,
            poly: vec![[1.0, 1.0, 1.0]],
            noise: NoiseSpec {
                kind: NoiseKind::BoundedSmooth,
                amplitude: 0.01,
                seed: 0,
            },
            phi_form: PhiTemplate {
                form: PhiForm::Constant,
                r: 0.0,
                s: 0.0,
            },
            grid: GridSpec {
                min: -5.0,
                max: 5.0,
                count: 101,
            },
            tol: 1e-10,
            max_n: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        EquationParams::new(self.k)?;
        PNormSpace::new(self.codomain_dim, self.p)?;
        if self.poly.len() != 1 && self.poly.len() != self.codomain_dim {
            return Err(invalid(format!(
                "{} coefficient triples for a {}-dimensional codomain",
                self.poly.len(),
                self.codomain_dim
            )));
        }
        if self.poly.iter().flatten().any(|c| !c.is_finite()) {
            return Err(invalid("polynomial coefficients must be finite"));
        }
        if !(self.noise.amplitude >= 0.0) || !self.noise.amplitude.is_finite() {
            return Err(invalid("noise amplitude must be finite and nonnegative"));
        }
        self.phi_form.with_theta(1.0f64)?;
        self.grid.validate()?;
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(invalid("tol must be positive"));
        }
        if self.max_n == Some(0) {
            return Err(invalid("max_n must be at least 1"));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<EquationParams> {
        EquationParams::new(self.k)
    }

    fn coefficients(&self) -> Vec<[f64; 3]> {
        if self.poly.len() == 1 {
            vec![self.poly[0]; self.codomain_dim]
        } else {
            self.poly.clone()
        }
    }

    /// Per-component noise frequencies, uniform in `[1, 3)`.
    pub fn frequencies(&self) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.noise.seed);
        (0..self.codomain_dim)
            .map(|_| rng.random_range(1.0..3.0))
            .collect()
    }
}

/// `a3x³ + a2x² + a1x + η(x)` per component, with `η(0) = 0`.
pub fn make_test_function<T: Scalar>(cfg: &ExperimentConfig) -> Result<FunctionHandle<T>> {
    cfg.validate()?;
    let space = PNormSpace::new(cfg.codomain_dim, T::of(cfg.p))?;
    let coeffs: Vec<[T; 3]> = cfg
        .coefficients()
        .iter()
        .map(|c| [T::of(c[0]), T::of(c[1]), T::of(c[2])])
        .collect();
    let omegas: Vec<T> = cfg.frequencies().into_iter().map(T::of).collect();
    let eps = T::of(cfg.noise.amplitude);
    let kind = if eps == T::zero() {
        NoiseKind::None
    } else {
        cfg.noise.kind
    };
    let lambda = T::of(cfg.phi_form.noise_exponent());
    FunctionHandle::new(space, move |x: T| {
        let comps = coeffs
            .iter()
            .zip(&omegas)
            .map(|(&[a3, a2, a1], &w)| {
                let poly = ((a3 * x + a2) * x + a1) * x;
                let noise = match kind {
                    NoiseKind::None => T::zero(),
                    NoiseKind::BoundedSmooth => eps * (w * x).sin(),
                    NoiseKind::PowerScaled if lambda == T::zero() => {
                        eps * ((w * x).cos() - T::one())
                    }
                    NoiseKind::PowerScaled => eps * x.pow_abs(lambda) * (w * x).cos(),
                };
                poly + noise
            })
            .collect();
        CodomainVector::new(comps)
    })
}

/// `1.01 · max ‖D_f(x, y)‖ / φ₁(x, y)` over `grid`, `φ₁` being `φ` with
/// `θ = 1`. Points where `φ₁ = 0` are skipped when `D_f` vanishes there (up to
/// `1e-9` of the stencil magnitude) and rejected otherwise.
pub fn calibrate_theta<T: Scalar>(
    f: &FunctionHandle<T>,
    params: EquationParams,
    phi: &PhiTemplate,
    grid: &[(T, T)],
) -> Result<T> {
    if grid.is_empty() {
        return Err(invalid("calibration grid is empty"));
    }
    let unit = phi.with_theta(T::one())?;
    let zero_slack = T::of(1e-9);
    let ratios: Vec<Result<T>> = grid
        .par_iter()
        .map(|&(x, y)| {
            let (d, stencil) = mixed_stencil(f, params, x, y);
            let d = f.space().norm(&d);
            let u = unit.eval_unit(x, y);
            if u > T::zero() {
                Ok(d / u)
            } else if d <= zero_slack * (T::one() + stencil) {
                Ok(T::zero())
            } else {
                Err(Error::UnboundablePerturbation {
                    x: x.lossy_f64(),
                    y: y.lossy_f64(),
                    residual: d.lossy_f64(),
                })
            }
        })
        .collect();
    let mut max = T::zero();
    for r in ratios {
        let r = r?;
        if r.is_nan() {
            return Err(invalid("non-finite residual during calibration"));
        }
        max = max.max(r);
    }
    Ok(max * T::of(1.01))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub x: f64,
    pub f: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: Vec<f64>,
    #[serde(rename = "C")]
    pub c: Vec<f64>,
    pub residual_norm: f64,
    pub bound: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentDiagnostics {
    #[serde(rename = "Q")]
    pub q: DiagnosticsSummary,
    #[serde(rename = "A")]
    pub a: DiagnosticsSummary,
    #[serde(rename = "C")]
    pub c: DiagnosticsSummary,
}

impl ComponentDiagnostics {
    pub fn all_converged(&self) -> bool {
        self.q.all_converged() && self.a.all_converged() && self.c.all_converged()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub config: ExperimentConfig,
    pub theta_used: f64,
    pub directions: Directions,
    pub diagnostics: ComponentDiagnostics,
    pub min_margin: f64,
    pub pass: bool,
    pub rows: Vec<ReportRow>,
}

impl StabilityReport {
    /// Rows whose margin is below `-1e-12 (1 + bound)`.
    pub fn violations(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| !row_passes(r))
    }
}

fn row_passes(r: &ReportRow) -> bool {
    r.margin >= -1e-12 * (1.0 + r.bound)
}

/// Stopping-rule settings, with the perturbation decay rates implied by `φ`.
fn limit_control<T: Scalar>(cfg: &ExperimentConfig, ctx: &BoundContext<T>) -> LimitControl<T> {
    let kinds = [IterKind::Quadratic, IterKind::Additive, IterKind::Cubic];
    let dirs = [ctx.directions.q, ctx.directions.a, ctx.directions.c];
    let implied = ctx.decay_rates();
    let rates = std::array::from_fn(|i| {
        implied[i].unwrap_or_else(|| IterationSpec::<T>::default_rate(kinds[i], ctx.params, dirs[i]))
    });
    LimitControl {
        max_n: cfg.max_n,
        tol: T::of(cfg.tol),
        rates: Some(rates),
    }
}

/// Pipeline: test function, θ calibration on the square lattice of the grid,
/// directions from the exponents of `φ`, decomposition, then the full bound
/// at every grid point.
pub fn run_experiment<T: Scalar>(cfg: &ExperimentConfig) -> Result<StabilityReport> {
    let f = make_test_function::<T>(cfg)?;
    let params = cfg.params()?;
    let theta = calibrate_theta(&f, params, &cfg.phi_form, &cfg.grid.lattice::<T>())?;
    let phi = cfg.phi_form.with_theta(theta)?;
    let ctx = BoundContext::new(params, *f.space(), phi)?;
    let ctrl = limit_control(cfg, &ctx);
    let dec = decompose_full(&f, params, ctx.directions, &ctrl)?;
    let space = *f.space();
    let rows = cfg
        .grid
        .points::<T>()
        .par_iter()
        .map(|&x| {
            let fx = f.eval(x);
            let (a, q, c) = (dec.a.eval(x), dec.q.eval(x), dec.c.eval(x));
            let mut rem = fx.clone();
            for part in [&a, &q, &c] {
                rem.add_scaled(-T::one(), part);
            }
            let residual = space.norm(&rem);
            let bound = stability_bound(BoundKind::Full, &ctx, x)?;
            Ok(ReportRow {
                x: x.lossy_f64(),
                f: fx.to_f64(),
                a: a.to_f64(),
                q: q.to_f64(),
                c: c.to_f64(),
                residual_norm: residual.lossy_f64(),
                bound: bound.lossy_f64(),
                margin: (bound - residual).lossy_f64(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let [q, a, c] = dec.summaries();
    let diagnostics = ComponentDiagnostics { q, a, c };
    let min_margin = rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    let pass = diagnostics.all_converged() && rows.iter().all(row_passes);
    Ok(StabilityReport {
        config: cfg.clone(),
        theta_used: theta.lossy_f64(),
        directions: ctx.directions,
        diagnostics,
        min_margin,
        pass,
        rows,
    })
}

/// One grid point of a decomposition without bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRow {
    pub x: f64,
    pub f: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: Vec<f64>,
    #[serde(rename = "C")]
    pub c: Vec<f64>,
    pub residual_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub config: ExperimentConfig,
    pub directions: Directions,
    pub diagnostics: ComponentDiagnostics,
    pub converged: bool,
    pub rows: Vec<DecompositionRow>,
}

/// Test function and decomposition only. Directions come from the
/// exponents of the `φ` template; no calibration takes place.
pub fn run_decomposition<T: Scalar>(cfg: &ExperimentConfig) -> Result<DecompositionReport> {
    let f = make_test_function::<T>(cfg)?;
    let params = cfg.params()?;
    let ctx = BoundContext::new(params, *f.space(), cfg.phi_form.with_theta(T::one())?)?;
    let ctrl = limit_control(cfg, &ctx);
    let dec = decompose_full(&f, params, ctx.directions, &ctrl)?;
    let space = *f.space();
    let rows = cfg
        .grid
        .points::<T>()
        .par_iter()
        .map(|&x| {
            let fx = f.eval(x);
            let (a, q, c) = (dec.a.eval(x), dec.q.eval(x), dec.c.eval(x));
            let residual = space.norm(&(&(&(&fx - &a) - &q) - &c));
            DecompositionRow {
                x: x.lossy_f64(),
                f: fx.to_f64(),
                a: a.to_f64(),
                q: q.to_f64(),
                c: c.to_f64(),
                residual_norm: residual.lossy_f64(),
            }
        })
        .collect();
    let [q, a, c] = dec.summaries();
    let diagnostics = ComponentDiagnostics { q, a, c };
    Ok(DecompositionReport {
        config: cfg.clone(),
        directions: ctx.directions,
        converged: diagnostics.all_converged(),
        diagnostics,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(invalid(format!("unknown report format {other:?}"))),
        }
    }
}

/// Column order of the CSV report.
pub const CSV_HEADER: [&str; 8] = ["x", "f", "A", "Q", "C", "residual", "bound", "margin"];

/// 17 significant digits.
fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Vector cells of a multi-component codomain are joined with `;`.
fn fmt_vector(v: &[f64]) -> String {
    v.iter().map(|c| fmt_float(*c)).collect::<Vec<_>>().join(";")
}

/// Column order of the decomposition CSV.
pub const DECOMPOSITION_CSV_HEADER: [&str; 6] = ["x", "f", "A", "Q", "C", "residual"];

fn write_csv<W: Write, const N: usize>(
    out: W,
    header: [&str; N],
    rows: impl Iterator<Item = [String; N]>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<W: Write, S: Serialize>(value: &S, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn write_report<W: Write>(report: &StabilityReport, format: ReportFormat, out: W) -> Result<()> {
    match format {
        ReportFormat::Json => write_json(report, out),
        ReportFormat::Csv => write_csv(
            out,
            CSV_HEADER,
            report.rows.iter().map(|r| {
                [
                    fmt_float(r.x),
                    fmt_vector(&r.f),
                    fmt_vector(&r.a),
                    fmt_vector(&r.q),
                    fmt_vector(&r.c),
                    fmt_float(r.residual_norm),
                    fmt_float(r.bound),
                    fmt_float(r.margin),
                ]
            }),
        ),
    }
}

pub fn write_decomposition<W: Write>(
    report: &DecompositionReport,
    format: ReportFormat,
    out: W,
) -> Result<()> {
    match format {
        ReportFormat::Json => write_json(report, out),
        ReportFormat::Csv => write_csv(
            out,
            DECOMPOSITION_CSV_HEADER,
            report.rows.iter().map(|r| {
                [
                    fmt_float(r.x),
                    fmt_vector(&r.f),
                    fmt_vector(&r.a),
                    fmt_vector(&r.q),
                    fmt_vector(&r.c),
                    fmt_float(r.residual_norm),
                ]
            }),
        ),
    }
}

pub fn render_report(report: &StabilityReport, format: ReportFormat) -> Result<String> {
    let mut buf = Vec::new();
    write_report(report, format, &mut buf)?;
    String::from_utf8(buf).map_err(|e| invalid(e.to_string()))
}

/// Writes the report to `path`.
pub fn emit_report(report: &StabilityReport, format: ReportFormat, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    write_report(report, format, &mut out)?;
    out.flush()?;
    Ok(())
}
