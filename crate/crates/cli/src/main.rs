use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use sha2::{Digest, Sha256};

use funreg::eiv::{estimate_noise_variance, fit_corrected, select_rho_corrected};
use funreg::estimator::{center, fit, midpoint_grid, CenteredDesign};
use funreg::io::{
    load_curves_csv, load_model, regularize, regularize_curves, save_model, write_csv, write_labeled_csv, CurveData,
    ModelFile, Provenance,
};
use funreg::prediction::{predict, predict_fine, prediction_interval, residual_variance};
use funreg::selection::{log_grid, select_rho, select_rho_and_m, GcvPath, GcvPoint, GcvResult, DEFAULT_GRID_POINTS,
    DEFAULT_GRID_RANGE};
use funreg::synthetic::{
    coverage_study, rate_study, CoverageConfig, ProcessSpec, RateStudyConfig, RhoRule, Seminorm,
    DEFAULT_RATE_SIGMA_EPS, DEFAULT_RHO_SCALE,
};
use funreg::{FunctionalSample, Grid, PenaltyOperator};

#[derive(Parser)]
#[command(name = "funreg", version, about = "Smoothing-spline functional linear regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the penalised estimator and save a model file.
    Fit(FitArgs),
    /// Evaluate the GCV criterion over a grid of smoothing parameters.
    Gcv(GcvArgs),
    /// Fit with the errors-in-variables correction for noisy curves.
    DenoiseFit(DenoiseArgs),
    /// Point predictions and prediction intervals from a saved model.
    Predict(PredictArgs),
    /// Monte Carlo study of the convergence rate.
    SimulateRate(RateArgs),
    /// Monte Carlo study of prediction-interval coverage.
    SimulateCoverage(CoverageArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Curves CSV, wide (`t_1,…,t_p,y`) or long (`curve_id,time,value`).
    #[arg(long)]
    curves: PathBuf,
    /// Responses CSV (`curve_id,y`) for long-format curves.
    #[arg(long)]
    responses: Option<PathBuf>,
    /// Target grid size for long-format curves.
    #[arg(long)]
    p: Option<usize>,
    /// Time interval mapped onto [0, 1] for long-format curves, as `lo:hi`.
    #[arg(long, value_parser = parse_range)]
    time_range: Option<(f64, f64)>,
}

#[derive(Args)]
struct RhoArgs {
    /// Fixed smoothing parameter.
    #[arg(long, conflicts_with = "rho_grid")]
    rho: Option<f64>,
    /// Log-spaced GCV grid as `min:max:count`.
    #[arg(long, value_parser = parse_rho_grid)]
    rho_grid: Option<RhoGrid>,
}

/// Parsed `--rho-grid`; a newtype so clap treats it as a single value.
#[derive(Clone)]
struct RhoGrid(Vec<f64>);

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Spline order parameter (the penalty uses the m-th derivative).
    #[arg(long, default_value_t = 2)]
    m: usize,
    #[command(flatten)]
    rho: RhoArgs,
    /// Model file to write; the slope estimate goes to `<out>.alpha.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GcvArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Orders to compare, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    m: Vec<usize>,
    #[command(flatten)]
    rho: RhoArgs,
    /// CSV of (rho, score, trace); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DenoiseArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 2)]
    m: usize,
    #[command(flatten)]
    rho: RhoArgs,
    /// Known noise standard deviation; estimated from second differences when omitted.
    #[arg(long, conflicts_with = "no_correct")]
    sigma_delta: Option<f64>,
    /// Fit without the correction (noise variance is still reported).
    #[arg(long)]
    no_correct: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Model file written by `fit` or `denoise-fit`.
    #[arg(long)]
    model: PathBuf,
    /// Curves on the model grid, on a multiple of it, or in long format.
    #[arg(long)]
    curves: PathBuf,
    #[arg(long, value_parser = parse_range)]
    time_range: Option<(f64, f64)>,
    /// Confidence level of the intervals.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// CSV of (id, y_hat, lower, upper); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProcessArg {
    Brownian,
    Fourier,
}

#[derive(Args)]
struct ProcessArgs {
    #[arg(long, value_enum, default_value = "brownian")]
    process: ProcessArg,
    /// Eigendecay exponent of the Fourier process.
    #[arg(long)]
    q: Option<f64>,
    /// Truncation of the Fourier expansion.
    #[arg(long, default_value_t = 100)]
    modes: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Run replicates on one thread.
    #[arg(long)]
    serial: bool,
}

impl ProcessArgs {
    fn spec(&self) -> Result<ProcessSpec> {
        match (self.process, self.q) {
            (ProcessArg::Brownian, Some(_)) => bail!(usage("--q applies only to --process fourier")),
            (ProcessArg::Brownian, None) => Ok(ProcessSpec::brownian(self.seed)),
            (ProcessArg::Fourier, q) => Ok(ProcessSpec::fourier(q.unwrap_or(1.0), self.modes, self.seed)),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SeminormArg {
    GammaNp,
    GammaN,
    GammaTrue,
}

#[derive(Clone, Copy, ValueEnum)]
enum RhoRuleArg {
    Theoretical,
    Gcv,
}

#[derive(Args)]
struct RateArgs {
    #[command(flatten)]
    process: ProcessArgs,
    #[arg(long, default_value_t = 2)]
    m: usize,
    #[arg(long, value_delimiter = ',', default_value = "50,100,200,400,800")]
    n_values: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    p: usize,
    #[arg(long, default_value_t = 50)]
    replicates: usize,
    #[arg(long, default_value_t = DEFAULT_RATE_SIGMA_EPS)]
    sigma_eps: f64,
    #[arg(long, value_enum, default_value = "gamma-np")]
    seminorm: SeminormArg,
    #[arg(long, value_enum, default_value = "theoretical")]
    rho_rule: RhoRuleArg,
    /// Constant in front of the theoretical rule.
    #[arg(long, default_value_t = DEFAULT_RHO_SCALE)]
    rho_scale: f64,
    /// Per-replicate errors as CSV; the summary goes to the same path with a `.json` extension.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CoverageArgs {
    #[command(flatten)]
    process: ProcessArgs,
    #[arg(long, default_value_t = 2)]
    m: usize,
    /// Training sample size.
    #[arg(long, default_value_t = 300)]
    n: usize,
    #[arg(long, default_value_t = 50)]
    n_test: usize,
    #[arg(long, default_value_t = 100)]
    p: usize,
    #[arg(long, default_value_t = 20)]
    replicates: usize,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value_t = 0.2)]
    sigma_eps: f64,
    #[arg(long)]
    out: PathBuf,
}

/// Marker for flag errors detected after parsing.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> Usage {
    Usage(msg.into())
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or("expected `lo:hi`")?;
    let lo: f64 = a.trim().parse().map_err(|_| format!("bad number {a:?}"))?;
    let hi: f64 = b.trim().parse().map_err(|_| format!("bad number {b:?}"))?;
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(format!("empty range {s}"));
    }
    Ok((lo, hi))
}

fn parse_rho_grid(s: &str) -> std::result::Result<RhoGrid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, c] = parts[..] else {
        return Err("expected `min:max:count`".into());
    };
    let lo: f64 = a.trim().parse().map_err(|_| format!("bad number {a:?}"))?;
    let hi: f64 = b.trim().parse().map_err(|_| format!("bad number {b:?}"))?;
    let count: usize = c.trim().parse().map_err(|_| format!("bad count {c:?}"))?;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || count == 0 {
        return Err(format!("need 0 < min <= max and count >= 1, got {s}"));
    }
    Ok(RhoGrid(log_grid(lo, hi, count)))
}

fn digest(paths: &[&Path]) -> Result<String> {
    let mut h = Sha256::new();
    for p in paths {
        h.update(std::fs::read(p).with_context(|| format!("reading {}", p.display()))?);
    }
    Ok(hex::encode(h.finalize()))
}

fn warn(msg: &str, provenance: &mut Provenance) {
    eprintln!("warning: {msg}");
    provenance.warnings.push(msg.to_string());
}

fn load_sample(input: &InputArgs, m: usize) -> Result<(FunctionalSample, Provenance)> {
    let mut paths = vec![input.curves.as_path()];
    paths.extend(input.responses.as_deref());
    let mut prov = Provenance {
        input_digest: Some(digest(&paths)?),
        ..Provenance::default()
    };
    let sample = match load_curves_csv(&input.curves, input.responses.as_deref())? {
        CurveData::Wide(w) => {
            if input.time_range.is_some() {
                bail!(usage("--time-range applies only to long-format curves"));
            }
            if let Some(p) = input.p {
                if p != w.p() {
                    bail!(usage(format!("--p {p} conflicts with the {} columns of the wide file", w.p())));
                }
            }
            w.into_sample()?
        }
        CurveData::Long(mut raw) => {
            let p = input
                .p
                .ok_or_else(|| usage("--p is required for long-format curves"))?;
            if raw.responses.is_none() {
                bail!(usage("--responses is required for long-format curves"));
            }
            if let Some(w) = raw.rescale_times(input.time_range)? {
                warn(&w, &mut prov);
            }
            let reg = regularize(&raw, p, m)?;
            for &i in &reg.extrapolated {
                warn(
                    &format!("curve {} extrapolated beyond its observed times", raw.curves[i].id),
                    &mut prov,
                );
            }
            prov.min_points = Some(reg.min_points);
            reg.sample
        }
    };
    Ok((sample, prov))
}

fn operator(p: usize, m: usize) -> Result<PenaltyOperator> {
    Ok(PenaltyOperator::new(&Grid::new(p)?, m)?)
}

fn report_gcv_warnings(result: &GcvResult, prov: &mut Provenance) {
    for w in &result.warnings {
        warn(&format!("skipped rho = {:e} (m = {}): {}", w.rho, w.m, w.reason), prov);
    }
}

/// The fixed `ρ`, or the GCV minimiser over the given or default grid.
fn resolve_rho(
    rho: &RhoArgs,
    design: &CenteredDesign,
    op: &PenaltyOperator,
    prov: &mut Provenance,
) -> Result<f64> {
    if let Some(r) = rho.rho {
        return Ok(r);
    }
    let grid = match &rho.rho_grid {
        Some(g) => g.0.clone(),
        None => GcvPath::new(design, op)?.default_grid(),
    };
    let result = select_rho(design, op, &grid)?;
    report_gcv_warnings(&result, prov);
    prov.gcv_trace = result.points.clone();
    Ok(result.best_rho)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn alpha_path(out: &Path) -> PathBuf {
    out.with_extension("alpha.csv")
}

fn write_alpha_csv(model: &funreg::FittedModel, path: &Path) -> Result<()> {
    let ts = midpoint_grid(10 * model.p());
    let rows = ts.iter().map(|&t| vec![t, model.alpha_at(t)]);
    let mut w = create(path)?;
    write_csv(&mut w, &["t", "alpha_hat"], rows)?;
    w.flush()?;
    Ok(())
}

fn run_fit(args: FitArgs) -> Result<()> {
    let (sample, mut prov) = load_sample(&args.input, args.m)?;
    let op = operator(sample.p(), args.m)?;
    let design = center(&sample);
    let rho = resolve_rho(&args.rho, &design, &op, &mut prov)?;
    let mut model = fit(&sample, &op, rho)?;
    model.sigma_eps_hat_sq = Some(residual_variance(&model, &sample)?);
    let mut file = ModelFile::from_model(&model);
    file.provenance = prov;
    save_model(&file, &args.out)?;
    write_alpha_csv(&model, &alpha_path(&args.out))?;
    println!("{}", json!({"rho": rho, "m": args.m, "alpha0_hat": model.alpha0_hat}));
    Ok(())
}

fn run_gcv(args: GcvArgs) -> Result<()> {
    let m0 = *args.m.iter().min().ok_or_else(|| usage("--m needs at least one order"))?;
    let (sample, mut prov) = load_sample(&args.input, m0)?;
    let design = center(&sample);
    let ops = args
        .m
        .iter()
        .map(|&m| operator(sample.p(), m))
        .collect::<Result<Vec<_>>>()?;
    let grid = match (&args.rho.rho, &args.rho.rho_grid) {
        (Some(r), _) => vec![*r],
        (None, Some(g)) => g.0.clone(),
        (None, None) => {
            let mut scale: f64 = 0.0;
            for op in &ops {
                scale = scale.max(GcvPath::new(&design, op)?.scale());
            }
            log_grid(DEFAULT_GRID_RANGE.0 * scale, DEFAULT_GRID_RANGE.1 * scale, DEFAULT_GRID_POINTS)
        }
    };
    let result = if ops.len() == 1 {
        select_rho(&design, &ops[0], &grid)?
    } else {
        select_rho_and_m(&design, &ops, &grid)?
    };
    report_gcv_warnings(&result, &mut prov);
    let joint = ops.len() > 1;
    let row = |pt: &GcvPoint| {
        if joint {
            vec![pt.m as f64, pt.rho, pt.score, pt.trace]
        } else {
            vec![pt.rho, pt.score, pt.trace]
        }
    };
    let header: &[&str] = if joint {
        &["m", "rho", "score", "trace"]
    } else {
        &["rho", "score", "trace"]
    };
    let rows = result.points.iter().map(row);
    match &args.out {
        Some(path) => {
            let mut w = create(path)?;
            write_csv(&mut w, header, rows)?;
            w.flush()?;
        }
        None => write_csv(std::io::stdout().lock(), header, rows)?,
    }
    let best = result.best();
    let summary = json!({"best_rho": best.rho, "best_m": best.m, "score": best.score, "trace": best.trace});
    if args.out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}

fn run_denoise(args: DenoiseArgs) -> Result<()> {
    if let Some(s) = args.sigma_delta {
        if !(s >= 0.0 && s.is_finite()) {
            bail!(usage(format!("--sigma-delta must be nonnegative, got {s}")));
        }
    }
    let (sample, mut prov) = load_sample(&args.input, args.m)?;
    let op = operator(sample.p(), args.m)?;
    let design = center(&sample);
    let override_sq = args.sigma_delta.map(|s| s * s);
    let sigma_sq = match override_sq {
        Some(v) => v,
        None => estimate_noise_variance(sample.x())?,
    };
    let (model, corrected) = if args.no_correct {
        let rho = resolve_rho(&args.rho, &design, &op, &mut prov)?;
        (fit(&sample, &op, rho)?, false)
    } else {
        let rho = match (&args.rho.rho, &args.rho.rho_grid) {
            (Some(r), _) => *r,
            (None, grid) => {
                let grid = match grid {
                    Some(g) => g.0.clone(),
                    None => funreg::eiv::default_grid(&design, &op)?,
                };
                let result = select_rho_corrected(&design, &op, &grid, sigma_sq)?;
                report_gcv_warnings(&result, &mut prov);
                prov.gcv_trace = result.points.clone();
                result.best_rho
            }
        };
        let report = fit_corrected(&sample, &op, rho, override_sq)?;
        if !report.corrected {
            warn(
                &format!(
                    "corrected system not positive definite (min pivot {:e}); returned the uncorrected fit",
                    report.min_pivot
                ),
                &mut prov,
            );
        }
        (report.model, report.corrected)
    };
    let mut model = model;
    model.sigma_eps_hat_sq = Some(residual_variance(&model, &sample)?);
    let mut file = ModelFile::from_model(&model);
    file.sigma_delta_hat_sq = Some(sigma_sq);
    file.corrected = corrected;
    file.provenance = prov;
    save_model(&file, &args.out)?;
    write_alpha_csv(&model, &alpha_path(&args.out))?;
    println!(
        "{}",
        json!({"rho": model.rho, "m": args.m, "sigma_delta_hat_sq": sigma_sq, "corrected": corrected})
    );
    Ok(())
}

fn run_predict(args: PredictArgs) -> Result<()> {
    if !(args.level > 0.0 && args.level < 1.0) {
        bail!(usage(format!("--level must lie in (0, 1), got {}", args.level)));
    }
    let file = load_model(&args.model)?;
    let model = file.to_model()?;
    let sigma_sq = model
        .sigma_eps_hat_sq
        .ok_or_else(|| anyhow!("model file has no residual variance"))?;
    let tau = 1.0 - args.level;
    let (ids, yhat): (Vec<String>, Vec<f64>) = match load_curves_csv(&args.curves, None)? {
        CurveData::Wide(w) => {
            if args.time_range.is_some() {
                bail!(usage("--time-range applies only to long-format curves"));
            }
            let p = w.p();
            if p != model.p() && (p < model.p() || p % model.p() != 0) {
                bail!(funreg::Error::InvalidInput(format!(
                    "grid mismatch: curves have {p} points, model grid has {} (or a multiple)",
                    model.p()
                )));
            }
            let mut out = Vec::with_capacity(w.n());
            for i in 0..w.n() {
                let row: Vec<f64> = w.x.row(i).iter().copied().collect();
                let y = if p == model.p() {
                    predict(&model, &row)?
                } else {
                    predict_fine(&model, &row)?
                };
                out.push(((i + 1).to_string(), y));
            }
            out.into_iter().unzip()
        }
        CurveData::Long(mut raw) => {
            if let Some(w) = raw.rescale_times(args.time_range)? {
                eprintln!("warning: {w}");
            }
            let reg = regularize_curves(&raw, model.p(), model.m)?;
            for &i in &reg.extrapolated {
                eprintln!("warning: curve {} extrapolated beyond its observed times", raw.curves[i].id);
            }
            let mut out = Vec::with_capacity(raw.n());
            for (i, c) in raw.curves.iter().enumerate() {
                let row: Vec<f64> = reg.x.row(i).iter().copied().collect();
                out.push((c.id.clone(), predict(&model, &row)?));
            }
            out.into_iter().unzip()
        }
    };
    let rows = ids
        .into_iter()
        .zip(yhat)
        .map(|(id, y)| {
            let iv = prediction_interval(y, sigma_sq.sqrt(), tau)?;
            Ok((id, vec![iv.point, iv.lower, iv.upper]))
        })
        .collect::<funreg::Result<Vec<_>>>()?;
    let header = ["id", "y_hat", "lower", "upper"];
    match &args.out {
        Some(path) => {
            let mut w = create(path)?;
            write_labeled_csv(&mut w, &header, rows)?;
            w.flush()?;
        }
        None => write_labeled_csv(std::io::stdout().lock(), &header, rows)?,
    }
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn run_rate(args: RateArgs) -> Result<()> {
    let process = args.process.spec()?;
    let config = RateStudyConfig {
        process,
        alpha: funreg::synthetic::default_alpha,
        alpha0: funreg::synthetic::DEFAULT_ALPHA0,
        sigma_eps: args.sigma_eps,
        m: args.m,
        n_values: args.n_values.clone(),
        p: args.p,
        replicates: args.replicates,
        seminorm: match args.seminorm {
            SeminormArg::GammaNp => Seminorm::GammaNp,
            SeminormArg::GammaN => Seminorm::GammaN,
            SeminormArg::GammaTrue => Seminorm::GammaTrue,
        },
        rho_rule: match args.rho_rule {
            RhoRuleArg::Theoretical => RhoRule::Theoretical { scale: args.rho_scale },
            RhoRuleArg::Gcv => RhoRule::Gcv,
        },
        parallel: !args.process.serial,
    };
    let result = rate_study(&config)?;
    let rows = result.n_values.iter().zip(&result.errors).flat_map(|(&n, errs)| {
        errs.iter()
            .enumerate()
            .map(move |(r, &e)| vec![n as f64, r as f64, e])
    });
    let mut w = create(&args.out)?;
    write_csv(&mut w, &["n", "replicate", "error"], rows)?;
    w.flush()?;
    let summary = json!({
        "slope": result.slope,
        "theoretical_exponent": result.theoretical_exponent,
        "n_values": result.n_values,
        "medians": result.medians,
        "seminorm": result.seminorm,
        "process": process,
        "m": args.m,
        "p": args.p,
        "replicates": args.replicates,
        "sigma_eps": args.sigma_eps,
        "rho_rule": config.rho_rule,
    });
    write_json(&args.out.with_extension("json"), &summary)?;
    println!("{}", json!({"slope": result.slope, "theoretical_exponent": result.theoretical_exponent}));
    Ok(())
}

fn run_coverage(args: CoverageArgs) -> Result<()> {
    let config = CoverageConfig {
        process: args.process.spec()?,
        alpha: funreg::synthetic::default_alpha,
        alpha0: funreg::synthetic::DEFAULT_ALPHA0,
        sigma_eps: args.sigma_eps,
        m: args.m,
        n_train: args.n,
        n_test: args.n_test,
        p: args.p,
        replicates: args.replicates,
        level: args.level,
        parallel: !args.process.serial,
    };
    let result = coverage_study(&config)?;
    let rows = result.replicates.iter().enumerate().map(|(i, r)| {
        vec![i as f64, r.rho, r.sigma_eps_hat, r.covered as f64, r.tested as f64, r.eqm]
    });
    let mut w = create(&args.out)?;
    write_csv(&mut w, &["replicate", "rho", "sigma_eps_hat", "covered", "tested", "eqm"], rows)?;
    w.flush()?;
    let summary = json!({
        "coverage": result.coverage,
        "level": result.level,
        "process": config.process,
        "m": args.m,
        "n_train": args.n,
        "n_test": args.n_test,
        "p": args.p,
        "replicates": args.replicates,
        "sigma_eps": args.sigma_eps,
    });
    write_json(&args.out.with_extension("json"), &summary)?;
    println!("{}", json!({"coverage": result.coverage, "level": result.level}));
    Ok(())
}

fn error_line(kind: &str, message: &str) -> String {
    json!({"error": {"kind": kind, "message": message}}).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", error_line("usage", first));
            return ExitCode::from(2);
        }
    };
    let outcome = match cli.command {
        Command::Fit(a) => run_fit(a),
        Command::Gcv(a) => run_gcv(a),
        Command::DenoiseFit(a) => run_denoise(a),
        Command::Predict(a) => run_predict(a),
        Command::SimulateRate(a) => run_rate(a),
        Command::SimulateCoverage(a) => run_coverage(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(u) = e.downcast_ref::<Usage>() {
                eprintln!("{}", error_line("usage", &u.0));
                return ExitCode::from(2);
            }
            let kind = e.downcast_ref::<funreg::Error>().map_or("io", funreg::Error::kind);
            eprintln!("{}", error_line(kind, &format!("{e:#}")));
            ExitCode::FAILURE
        }
    }
}
