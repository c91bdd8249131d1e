//! `anticonc`: one binary for every module of the laboratory.
//!
//! Exit codes: 0 success, 1 a checked inequality failed, 2 configuration
//! or domain error, 3 capability or size error, 4 resolution or numeric
//! error. Failures print one line `error[kind] exit=N: reason` on stderr.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anticonc::bounds::{
    bernstein_report, cauchy_interval_report, mixture_bounds, rv_smallball_bound, theorem_bound, Constants, MixtureInput, TheoremId,
};
use anticonc::distributions::DistributionSpec;
use anticonc::estimators::{self, DEFAULT_ENUM_LIMIT};
use anticonc::lcd::{default_search_cap, lcd, CoefficientVector, DEFAULT_TOL};
use anticonc::logconcave::{sector_mass_bound, verify_levelset, PlanarDensity, PlanarGrid};
use anticonc::report::{self, Envelope, Provenance, ReportRow};
use anticonc::sodin::{run_pipeline, PipelineScenario, ScenarioConfig};
use anticonc::stress::{self, RatioSettings, SearchConfig};
use anticonc::verify::{self, VerifyOptions};
use anticonc::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use config::Layers;

#[derive(Parser)]
#[command(name = "anticonc", version, about = "Relative anti-concentration laboratory")]
struct Cli {
    /// Worker threads; defaults to the number of cores. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML file with the subcommand settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Cmd {
    /// Essential least common denominator of a vector.
    Lcd(LcdArgs),
    /// Exact or Monte Carlo P{|<a,X>| <= |<b,X>|}.
    Estimate(EstimateArgs),
    /// Right-hand side of a bound with its term breakdown.
    Bounds(BoundsArgs),
    /// Level-set constants of a planar log-concave density.
    Levelset(LevelsetArgs),
    /// Step-by-step checks of the characteristic-function pipeline.
    Sodin(SodinArgs),
    /// Hill-climbing search for large estimate/bound ratios.
    Stress(StressArgs),
    /// Invariant suite over the built-in catalogs.
    Verify(VerifyArgs),
    /// Aggregates JSON outputs into one CSV.
    Report(ReportArgs),
}

#[derive(Args)]
struct LcdArgs {
    /// Comma-separated entries or @file with one decimal per line.
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Divide alpha by its norm first.
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    cap: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LcdConfig {
    alpha: Vec<f64>,
    gamma: f64,
    #[serde(default)]
    normalize: bool,
    /// `None` means `1e3·n/‖α‖`.
    #[serde(default)]
    cap: Option<f64>,
    #[serde(default = "default_tol")]
    tol: f64,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

#[derive(Args)]
struct EstimateArgs {
    /// Family name (rademacher, gaussian, laplace, uniform) or a TOML file.
    #[arg(long)]
    dist: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ci_level: Option<f64>,
    #[arg(long)]
    enum_limit: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum MethodArg {
    Auto,
    Exact,
    Mc,
}

impl MethodArg {
    fn name(self) -> &'static str {
        match self {
            MethodArg::Auto => "auto",
            MethodArg::Exact => "exact",
            MethodArg::Mc => "mc",
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EstimateConfig {
    dist: DistributionSpec,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    #[serde(default = "default_method")]
    method: MethodArg,
    #[serde(default = "default_samples")]
    samples: u64,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_ci")]
    ci_level: f64,
    #[serde(default = "default_enum_limit")]
    enum_limit: u64,
}

fn default_method() -> MethodArg {
    MethodArg::Auto
}

fn default_samples() -> u64 {
    1_000_000
}

fn default_ci() -> f64 {
    0.99
}

fn default_enum_limit() -> u64 {
    DEFAULT_ENUM_LIMIT
}

#[derive(Args)]
struct BoundsArgs {
    /// conjecture, gaussian, subgaussian, subexponential, logconcave, sodin,
    /// rv_smallball, bernstein_tail, cauchy_interval, mix_logconcave, mix_uniform.
    #[arg(long)]
    theorem: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Constant override NAME=VALUE; repeatable.
    #[arg(long = "const")]
    constants: Vec<String>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    ell: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Density law for mix_uniform or scale law for mix_logconcave.
    #[arg(long)]
    dist: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsConfig {
    theorem: TheoremId,
    #[serde(default)]
    alpha: Option<Vec<f64>>,
    #[serde(default)]
    beta: Option<Vec<f64>>,
    /// `None` means `√n`.
    #[serde(default)]
    gamma: Option<f64>,
    #[serde(default)]
    constants: Constants,
    #[serde(default)]
    t0: Option<f64>,
    #[serde(default)]
    nu: Option<f64>,
    #[serde(default)]
    b: Option<f64>,
    #[serde(default)]
    a: Option<f64>,
    #[serde(default)]
    ell: Option<f64>,
    #[serde(default)]
    epsilon: Option<f64>,
    #[serde(default)]
    mixture: Option<MixtureInput>,
}

#[derive(Args)]
struct LevelsetArgs {
    /// gaussian, uniform-disk or isotropic-laplace.
    #[arg(long)]
    density: Option<String>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also bound the mass of the sector of this half-angle.
    #[arg(long)]
    theta: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LevelsetConfig {
    density: String,
    #[serde(default = "default_grid")]
    grid: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    theta: Option<f64>,
}

fn default_grid() -> usize {
    2001
}

#[derive(Args)]
struct SodinArgs {
    /// Scenario TOML file (same as --config).
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct StressArgs {
    /// Family name (rademacher, gaussian, laplace, uniform) or a TOML file.
    #[arg(long)]
    dist: Option<String>,
    /// Dimension of alpha and beta.
    #[arg(long)]
    n: Option<usize>,
    /// conjecture, gaussian, subgaussian, subexponential, logconcave or sodin.
    #[arg(long)]
    theorem: Option<String>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<u64>,
    /// Constant override NAME=VALUE; repeatable.
    #[arg(long = "const")]
    constants: Vec<String>,
    /// Write the trace of the winning restart as CSV.
    #[arg(long)]
    trace_csv: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StressConfig {
    dist: DistributionSpec,
    #[serde(flatten)]
    search: SearchConfig,
}

#[derive(Args)]
struct VerifyArgs {
    /// Smaller sample sizes and grids.
    #[arg(long)]
    quick: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ReportArgs {
    /// JSON documents written by the other subcommands.
    inputs: Vec<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportConfig {
    inputs: Vec<PathBuf>,
}

/// What a command produced.
struct Output {
    json: String,
    csv: Option<String>,
    failure: Option<String>,
}

fn emit<C: Serialize, R: Serialize>(command: &str, statement: &str, config: &C, result: &R, rows: Vec<ReportRow>) -> Result<Output> {
    let csv = report::csv(&rows);
    let failed: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.scenario.as_str()).collect();
    let failure = (!failed.is_empty()).then(|| format!("{} check(s) failed: {}", failed.len(), failed.join(" ")));
    let env = Envelope {
        provenance: Provenance::default(),
        command,
        statement,
        config,
        result,
        rows,
    };
    Ok(Output {
        json: report::to_json(&env)?,
        csv: Some(csv),
        failure,
    })
}

fn vec_flag(layers: &mut Layers, key: &str, text: &Option<String>) -> Result<()> {
    if let Some(t) = text {
        layers.set(key, config::vector_value(&config::vector(key, t)?));
    }
    Ok(())
}

fn dist_flag(layers: &mut Layers, text: &Option<String>) -> Result<()> {
    if let Some(t) = text {
        layers.set_table("dist", config::dist_table(t)?);
    }
    Ok(())
}

fn const_flags(layers: &mut Layers, key: &str, flags: &[String]) -> Result<()> {
    for f in flags {
        let (k, v) = config::constant(f)?;
        layers.set_nested(key, &k, v);
    }
    Ok(())
}

fn run_lcd(layers: Layers, a: &LcdArgs) -> Result<Output> {
    let mut layers = layers;
    vec_flag(&mut layers, "alpha", &a.alpha)?;
    layers.set_opt("gamma", a.gamma);
    if a.normalize {
        layers.set("normalize", true);
    }
    layers.set_opt("cap", a.cap);
    layers.set_opt("tol", a.tol);
    let mut cfg: LcdConfig = layers.resolve()?;
    let mut alpha = CoefficientVector::new(cfg.alpha.clone())?;
    if cfg.normalize {
        alpha = alpha.normalized()?;
    }
    let cap = *cfg.cap.get_or_insert_with(|| default_search_cap(&alpha));
    let res = lcd(&alpha, cfg.gamma, cap, cfg.tol)?;
    emit("lcd", "essential-lcd", &cfg, &res, Vec::new())
}

fn run_estimate(layers: Layers, a: &EstimateArgs) -> Result<Output> {
    let mut layers = layers;
    dist_flag(&mut layers, &a.dist)?;
    vec_flag(&mut layers, "alpha", &a.alpha)?;
    vec_flag(&mut layers, "beta", &a.beta)?;
    layers.set_opt("method", a.method.map(|m| m.name()));
    layers.set_opt("samples", a.samples.map(|v| v as i64));
    layers.set_opt("seed", a.seed.map(|v| v as i64));
    layers.set_opt("ci_level", a.ci_level);
    layers.set_opt("enum_limit", a.enum_limit.map(|v| v as i64));
    let cfg: EstimateConfig = layers.resolve()?;
    config::check_dist(&cfg.dist)?;
    let alpha = CoefficientVector::new(cfg.alpha.clone())?;
    let beta = CoefficientVector::new_allow_zero(cfg.beta.clone())?;
    let est = match cfg.method {
        MethodArg::Auto => estimators::probability(&alpha, &beta, &cfg.dist, cfg.enum_limit, cfg.samples, cfg.seed, cfg.ci_level)?,
        MethodArg::Exact => estimators::exact_probability(&alpha, &beta, &cfg.dist, cfg.enum_limit)?,
        MethodArg::Mc => estimators::mc_probability(&alpha, &beta, &cfg.dist, cfg.samples, cfg.seed, cfg.ci_level)?,
    };
    emit("estimate", "relative-small-ball-probability", &cfg, &est, Vec::new())
}

fn need<T: Copy>(v: Option<T>, key: &str, theorem: TheoremId) -> Result<T> {
    v.ok_or_else(|| Error::config(key, format!("required by theorem {}", theorem.name())))
}

fn need_vec(v: &Option<Vec<f64>>, key: &str, theorem: TheoremId, allow_zero: bool) -> Result<CoefficientVector> {
    let v = v
        .clone()
        .ok_or_else(|| Error::config(key, format!("required by theorem {}", theorem.name())))?;
    if allow_zero {
        CoefficientVector::new_allow_zero(v)
    } else {
        CoefficientVector::new(v)
    }
}

fn run_bounds(layers: Layers, a: &BoundsArgs) -> Result<Output> {
    let mut layers = layers;
    layers.set_opt("theorem", a.theorem.clone());
    vec_flag(&mut layers, "alpha", &a.alpha)?;
    vec_flag(&mut layers, "beta", &a.beta)?;
    layers.set_opt("gamma", a.gamma);
    const_flags(&mut layers, "constants", &a.constants)?;
    for (k, v) in [
        ("t0", a.t0),
        ("nu", a.nu),
        ("b", a.b),
        ("a", a.a),
        ("ell", a.ell),
        ("epsilon", a.epsilon),
    ] {
        layers.set_opt(k, v);
    }
    if let Some(d) = &a.dist {
        let mut t = toml::Table::new();
        t.insert("kind".into(), "density".into());
        t.insert("spec".into(), toml::Value::Table(config::dist_table(d)?));
        layers.set_table("mixture", t);
    }
    let mut cfg: BoundsConfig = layers.resolve()?;
    cfg.constants = Constants::default().with("C", 1.0).with("C_conj", 1.0).merged(&cfg.constants);
    cfg.constants.validate()?;
    let t = cfg.theorem;
    let rep = match t {
        TheoremId::BernsteinTail => {
            let beta = need_vec(&cfg.beta, "beta", t, false)?;
            bernstein_report(need(cfg.t0, "t0", t)?, need(cfg.nu, "nu", t)?, need(cfg.b, "b", t)?, &beta)?
        }
        TheoremId::CauchyInterval => cauchy_interval_report(need(cfg.a, "a", t)?, need(cfg.ell, "ell", t)?)?,
        TheoremId::RvSmallball => {
            let alpha = need_vec(&cfg.alpha, "alpha", t, false)?;
            let gamma = *cfg.gamma.get_or_insert_with(|| anticonc::bounds::default_gamma(alpha.len()));
            let l = anticonc::lcd::lcd_normalized(&alpha, gamma)?;
            rv_smallball_bound(
                need(cfg.epsilon, "epsilon", t)?,
                l.theta_star,
                gamma,
                cfg.constants.get("C_p")?,
                cfg.constants.get("c_p")?,
            )?
        }
        TheoremId::MixLogconcave | TheoremId::MixUniform => {
            let alpha = need_vec(&cfg.alpha, "alpha", t, false)?;
            let beta = need_vec(&cfg.beta, "beta", t, true)?;
            let input = cfg
                .mixture
                .clone()
                .ok_or_else(|| Error::config("mixture", format!("required by theorem {}", t.name())))?;
            mixture_bounds(t, &input, &alpha, &beta, &cfg.constants)?
        }
        _ => {
            let alpha = need_vec(&cfg.alpha, "alpha", t, false)?;
            let beta = need_vec(&cfg.beta, "beta", t, true)?;
            let gamma = *cfg.gamma.get_or_insert_with(|| anticonc::bounds::default_gamma(alpha.len()));
            if t == TheoremId::Gaussian {
                anticonc::bounds::gaussian_bound(&alpha, &beta)?
            } else {
                theorem_bound(t, &alpha, &beta, Some(gamma), &cfg.constants)?
            }
        }
    };
    emit("bounds", t.name(), &cfg, &rep, Vec::new())
}

#[derive(Serialize)]
struct LevelsetResult {
    levels: anticonc::logconcave::LevelSetReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    sector: Option<anticonc::logconcave::SectorReport>,
}

fn run_levelset(layers: Layers, a: &LevelsetArgs) -> Result<Output> {
    let mut layers = layers;
    layers.set_opt("density", a.density.clone());
    layers.set_opt("grid", a.grid.map(|v| v as i64));
    layers.set_opt("seed", a.seed.map(|v| v as i64));
    layers.set_opt("theta", a.theta);
    let cfg: LevelsetConfig = layers.resolve()?;
    let p = PlanarDensity::by_name(&cfg.density)?;
    let levels = verify_levelset(&p, PlanarGrid::for_density(&p, cfg.grid), cfg.seed)?;
    let sector = cfg.theta.map(|th| sector_mass_bound(&p, th, &levels)).transpose()?;
    let mut rows = vec![
        ReportRow {
            scenario: format!("{}/inradius", levels.density),
            lhs: anticonc::logconcave::LEVEL_A,
            rhs: levels.measured_a,
            ratio: anticonc::logconcave::LEVEL_A / levels.measured_a,
            pass: levels.contains_a_disk,
        },
        ReportRow {
            scenario: format!("{}/circumradius", levels.density),
            lhs: levels.measured_big_a,
            rhs: anticonc::logconcave::LEVEL_CAP,
            ratio: levels.measured_big_a / anticonc::logconcave::LEVEL_CAP,
            pass: levels.within_a_disk,
        },
        ReportRow {
            scenario: format!("{}/peak", levels.density),
            lhs: levels.peak,
            rhs: anticonc::logconcave::PEAK_HI,
            ratio: levels.peak / anticonc::logconcave::PEAK_HI,
            pass: levels.peak_in_range,
        },
    ];
    if let Some(s) = &sector {
        rows.push(ReportRow {
            scenario: format!("{}/sector", levels.density),
            lhs: s.mass,
            rhs: s.bound,
            ratio: stress::divide(s.mass, s.bound),
            pass: s.holds,
        });
    }
    emit("levelset", "level-set-lemma", &cfg, &LevelsetResult { levels, sector }, rows)
}

fn run_sodin(layers: Layers, a: &SodinArgs) -> Result<Output> {
    let mut layers = match &a.scenario {
        Some(p) => Layers::from_file(Some(p))?,
        None => layers,
    };
    layers.set_opt("samples", a.samples.map(|v| v as i64));
    layers.set_opt("seed", a.seed.map(|v| v as i64));
    let cfg: ScenarioConfig = layers.resolve()?;
    let s = PipelineScenario::from_config(cfg)?;
    let rep = run_pipeline(&s)?;
    let name = s.config.name.clone();
    let rows = rep.checks.iter().map(|c| ReportRow::from_check(&name, c)).collect();
    emit("sodin", "sodin-pipeline", &s.config, &rep, rows)
}

fn run_stress(layers: Layers, a: &StressArgs) -> Result<Output> {
    let mut layers = layers;
    dist_flag(&mut layers, &a.dist)?;
    layers.set_opt("n", a.n.map(|v| v as i64));
    layers.set_opt("theorem", a.theorem.clone());
    layers.set_opt("restarts", a.restarts.map(|v| v as i64));
    layers.set_opt("steps", a.steps.map(|v| v as i64));
    layers.set_opt("seed", a.seed.map(|v| v as i64));
    if let Some(m) = a.samples {
        layers.set_nested("settings", "samples", m as i64);
    }
    let mut cfg: StressConfig = layers.resolve()?;
    let mut constants = RatioSettings::default().constants.merged(&cfg.search.settings.constants);
    for f in &a.constants {
        let (k, v) = config::constant(f)?;
        constants = constants.with(&k, v);
    }
    cfg.search.settings.constants = constants;
    config::check_dist(&cfg.dist)?;
    cfg.search.settings.constants.validate()?;
    let res = stress::search(&cfg.dist, &cfg.search)?;
    if let Some(p) = &a.trace_csv {
        write_file(p, &stress::trace_csv(&res))?;
    }
    let rows = vec![ReportRow {
        scenario: format!("stress/{}/{}/n{}", cfg.dist.family_name(), cfg.search.theorem.name(), cfg.search.n),
        lhs: res.estimate.value,
        rhs: res.bound.rhs,
        ratio: res.ratio,
        pass: res.ratio <= 1.0,
    }];
    let mut out = emit("stress", cfg.search.theorem.name(), &cfg, &res, rows)?;
    // a ratio above one is a finding of the search, not a failed run
    out.failure = None;
    out.csv = Some(stress::trace_csv(&res));
    Ok(out)
}

fn run_verify(layers: Layers, a: &VerifyArgs) -> Result<Output> {
    let mut layers = layers;
    if a.quick {
        layers.set("quick", true);
    }
    layers.set_opt("seed", a.seed.map(|v| v as i64));
    let cfg: VerifyOptions = layers.resolve()?;
    let rep = verify::run_suite(cfg)?;
    let rows = rep
        .sections
        .iter()
        .flat_map(|s| s.checks.iter().map(|c| ReportRow::from_check(&s.name, c)))
        .collect();
    emit("verify", "all", &cfg, &rep, rows)
}

fn run_report(layers: Layers, a: &ReportArgs) -> Result<Output> {
    let mut layers = layers;
    if !a.inputs.is_empty() {
        layers.set(
            "inputs",
            toml::Value::Array(a.inputs.iter().map(|p| toml::Value::String(p.display().to_string())).collect()),
        );
    }
    let cfg: ReportConfig = layers.resolve()?;
    let mut rows = Vec::new();
    for p in &cfg.inputs {
        let text = config::read(p)?;
        let doc: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::config(p.display().to_string(), format!("not JSON: {e}")))?;
        let items = doc
            .get("rows")
            .and_then(|r| r.as_array())
            .ok_or_else(|| Error::config(format!("{}:rows", p.display()), "missing; not an anticonc document"))?;
        for (i, item) in items.iter().enumerate() {
            let row: ReportRow =
                serde_json::from_value(item.clone()).map_err(|e| Error::config(format!("{}:rows[{i}]", p.display()), e.to_string()))?;
            rows.push(row);
        }
    }
    let csv = report::csv(&rows);
    let mut out = emit("report", "aggregate", &cfg, &rows.len(), rows)?;
    out.csv = Some(csv);
    out.failure = None;
    Ok(out)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::config(path.display().to_string(), format!("cannot write: {e}")))
}

fn dispatch(cli: &Cli) -> Result<Output> {
    let layers = Layers::from_file(cli.config.as_deref())?;
    match &cli.cmd {
        Cmd::Lcd(a) => run_lcd(layers, a),
        Cmd::Estimate(a) => run_estimate(layers, a),
        Cmd::Bounds(a) => run_bounds(layers, a),
        Cmd::Levelset(a) => run_levelset(layers, a),
        Cmd::Sodin(a) => run_sodin(layers, a),
        Cmd::Stress(a) => run_stress(layers, a),
        Cmd::Verify(a) => run_verify(layers, a),
        Cmd::Report(a) => run_report(layers, a),
    }
}

fn fail(e: &Error) -> ExitCode {
    let msg = e.to_string().replace('\n', " ");
    eprintln!("error[{}] exit={}: {msg}", e.kind(), e.exit_code());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("error[config] exit=2: {first}");
            return ExitCode::from(2);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return fail(&Error::config("threads", "must be >= 1"));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(&Error::config("threads", e.to_string()));
        }
    }
    let out = match dispatch(&cli) {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };
    let text = match cli.format {
        Format::Json => out.json,
        Format::Csv => out.csv.unwrap_or_default(),
    };
    let written = match &cli.out {
        Some(p) => write_file(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    };
    if let Err(e) = written {
        return fail(&e);
    }
    match out.failure {
        Some(reason) => fail(&Error::Assertion(reason)),
        None => ExitCode::SUCCESS,
    }
}
