use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use cqa_core::{
    bound_table, cross_check, run_decomposition, run_experiment, verify_solution, write_decomposition,
    write_report, BoundContext, BoundKind, DoubleDouble, EquationParams, ExperimentConfig,
    NoiseKind, NoiseSpec, PhiForm, PhiTemplate, ReportFormat, Scalar,
};

/// Relative agreement required of exact closed-form constants.
const CROSS_CHECK_RTOL: f64 = 1e-9;

#[derive(Parser)]
#[command(name = "cqa", version, about = "Stability experiments for the mixed cubic-quadratic-additive equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Residual of the test function on the square lattice of the grid.
    Check(Common),
    /// Additive, quadratic and cubic parts at each grid point.
    Decompose(Common),
    /// Closed-form constants against their series, and the bound on the grid.
    Bounds {
        #[command(flatten)]
        common: Common,
        /// Control-function scale.
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        /// quadratic, additive_g, cubic_h, odd_combined or full
        #[arg(long, default_value = "full")]
        kind: String,
    },
    /// Calibrate θ, decompose and compare the residual with the full bound.
    Experiment(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Precision {
    F64,
    Dd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
        }
    }
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    k: Option<i64>,
    #[arg(long)]
    p: Option<f64>,
    /// Codomain dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// a3,a2,a1 for every component, or several triples separated by '/'.
    #[arg(long, allow_hyphen_values = true)]
    poly: Option<String>,
    /// kind:eps:seed with kind none, bounded_smooth or power_scaled.
    #[arg(long)]
    noise: Option<String>,
    /// form:r:s with form constant, sum or product.
    #[arg(long)]
    phi: Option<String>,
    /// min:max:count
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "max-n")]
    max_n: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file whose fields override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "dd")]
    precision: Precision,
}

fn parse_f64(s: &str, what: &str) -> anyhow::Result<f64> {
    s.trim().parse().with_context(|| format!("bad number {s:?} in {what}"))
}

fn parse_poly(s: &str) -> anyhow::Result<Vec<[f64; 3]>> {
    s.split('/')
        .map(|triple| {
            let c: Vec<f64> = triple
                .split(',')
                .map(|v| parse_f64(v, "--poly"))
                .collect::<anyhow::Result<_>>()?;
            match c[..] {
                [a3, a2, a1] => Ok([a3, a2, a1]),
                _ => bail!("--poly expects a3,a2,a1, got {triple:?}"),
            }
        })
        .collect()
}

fn parse_noise(s: &str) -> anyhow::Result<NoiseSpec> {
    let parts: Vec<&str> = s.split(':').collect();
    let kind: NoiseKind = parts[0].parse()?;
    let amplitude = match parts.get(1) {
        Some(v) => parse_f64(v, "--noise")?,
        None if kind == NoiseKind::None => 0.0,
        None => bail!("--noise expects kind:eps:seed"),
    };
    let seed = match parts.get(2) {
        Some(v) => v.trim().parse().with_context(|| format!("bad seed {v:?}"))?,
        None => 0,
    };
    if parts.len() > 3 {
        bail!("--noise expects kind:eps:seed");
    }
    Ok(NoiseSpec { kind, amplitude, seed })
}

fn parse_phi(s: &str) -> anyhow::Result<PhiTemplate> {
    let parts: Vec<&str> = s.split(':').collect();
    let form: PhiForm = parts[0].parse()?;
    let num = |i: usize| parts.get(i).map_or(Ok(0.0), |v| parse_f64(v, "--phi"));
    if parts.len() > 3 {
        bail!("--phi expects form:r:s");
    }
    Ok(PhiTemplate { form, r: num(1)?, s: num(2)? })
}

fn parse_grid(s: &str) -> anyhow::Result<cqa_core::GridSpec> {
    let parts: Vec<&str> = s.split(':').collect();
    let [min, max, count] = parts[..] else {
        bail!("--grid expects min:max:count");
    };
    Ok(cqa_core::GridSpec {
        min: parse_f64(min, "--grid")?,
        max: parse_f64(max, "--grid")?,
        count: count.trim().parse().with_context(|| format!("bad count {count:?}"))?,
    })
}

/// Recursive merge; objects are merged key by key, everything else replaced.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (key, v) in o {
                match b.get_mut(&key) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(key, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl Common {
    fn config(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(p) = self.p {
            cfg.p = p;
        }
        if let Some(dim) = self.dim {
            cfg.codomain_dim = dim;
        }
        if let Some(poly) = &self.poly {
            cfg.poly = parse_poly(poly)?;
        }
        if let Some(noise) = &self.noise {
            cfg.noise = parse_noise(noise)?;
        }
        if let Some(phi) = &self.phi {
            cfg.phi_form = parse_phi(phi)?;
        }
        if let Some(grid) = &self.grid {
            cfg.grid = parse_grid(grid)?;
        }
        if let Some(tol) = self.tol {
            cfg.tol = tol;
        }
        if self.max_n.is_some() {
            cfg.max_n = self.max_n;
        }
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let over: Value = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            if !over.is_object() {
                bail!("{} must contain a JSON object", path.display());
            }
            let mut base = serde_json::to_value(&cfg)?;
            merge(&mut base, over);
            cfg = serde_json::from_value(base)
                .with_context(|| format!("invalid configuration in {}", path.display()))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn output(&self) -> anyhow::Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            )),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }
}

fn check<T: Scalar>(common: &Common, cfg: &ExperimentConfig) -> anyhow::Result<bool> {
    let f = cqa_core::make_test_function::<T>(cfg)?;
    let report = verify_solution(&f, cfg.params()?, &cfg.grid.lattice::<T>(), T::of(cfg.tol))?;
    let mut out = common.output()?;
    match common.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &report)?;
            writeln!(out)?;
        }
        Format::Csv => {
            writeln!(out, "equation,k,max_residual,x,y,scale,pass")?;
            writeln!(
                out,
                "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                report.equation,
                report.k.map_or(String::new(), |k| k.to_string()),
                report.max_residual,
                report.argmax_point[0],
                report.argmax_point[1],
                report.scale,
                report.pass
            )?;
        }
    }
    out.flush()?;
    Ok(report.pass)
}

fn decompose<T: Scalar>(common: &Common, cfg: &ExperimentConfig) -> anyhow::Result<bool> {
    let report = run_decomposition::<T>(cfg)?;
    let mut out = common.output()?;
    write_decomposition(&report, common.format.into(), &mut out)?;
    out.flush()?;
    Ok(report.converged)
}

fn bounds<T: Scalar>(
    common: &Common,
    cfg: &ExperimentConfig,
    theta: f64,
    kind: BoundKind,
) -> anyhow::Result<bool> {
    let params = EquationParams::new(cfg.k)?;
    let (p, r, s) = (T::of(cfg.p), T::of(cfg.phi_form.r), T::of(cfg.phi_form.s));
    let checks = cross_check(params, p, r, s)?;
    let space = cqa_core::PNormSpace::new(cfg.codomain_dim, p)?;
    let ctx = BoundContext::new(params, space, cfg.phi_form.with_theta(T::of(theta))?)?;
    let table = bound_table(kind, &ctx, &cfg.grid.points::<T>())?;
    let ok = checks
        .iter()
        .all(|c| !c.exact || c.relative_difference <= CROSS_CHECK_RTOL);
    let mut out = common.output()?;
    match common.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &json!({ "table": table, "cross_check": checks }))?;
            writeln!(out)?;
        }
        Format::Csv => {
            writeln!(out, "constant,form,closed_form,from_series,relative_difference,exact")?;
            for c in &checks {
                writeln!(
                    out,
                    "{},{},{:.16e},{:.16e},{:.16e},{}",
                    c.constant, c.form, c.closed_form, c.from_series, c.relative_difference, c.exact
                )?;
            }
        }
    }
    out.flush()?;
    Ok(ok)
}

fn experiment<T: Scalar>(common: &Common, cfg: &ExperimentConfig) -> anyhow::Result<bool> {
    let report = run_experiment::<T>(cfg)?;
    let mut out = common.output()?;
    write_report(&report, common.format.into(), &mut out)?;
    out.flush()?;
    if !report.pass {
        eprintln!(
            "experiment failed: min margin {:e}, all converged: {}",
            report.min_margin,
            report.diagnostics.all_converged()
        );
    }
    Ok(report.pass)
}

fn dispatch<T: Scalar>(command: &Command) -> anyhow::Result<bool> {
    match command {
        Command::Check(c) => check::<T>(c, &c.config()?),
        Command::Decompose(c) => decompose::<T>(c, &c.config()?),
        Command::Bounds { common, theta, kind } => {
            bounds::<T>(common, &common.config()?, *theta, kind.parse()?)
        }
        Command::Experiment(c) => experiment::<T>(c, &c.config()?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let precision = match &cli.command {
        Command::Check(c) | Command::Decompose(c) | Command::Experiment(c) => c.precision,
        Command::Bounds { common, .. } => common.precision,
    };
    let result = match precision {
        Precision::F64 => dispatch::<f64>(&cli.command),
        Precision::Dd => dispatch::<DoubleDouble>(&cli.command),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
