//! Command-line harness for the de-biased sparse PCA estimator: seeded
//! coverage and interval-length experiments on spiked models, histogram
//! export, single-dataset runs, and a quick self test.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use despca::debias::normal_quantile;
use despca::error::Error;
use despca::linalg::DataMatrix;
use despca::pipeline::{default_config, run_pipeline, PipelineConfig};
use despca::report::{csv_row, format_f64, Json};
use despca::sim::{
    run_coverage, CoverageReport, ExperimentConfig, MethodReport, ModelSpec, VarianceMode,
};

const VERSION_STRING: &str = concat!("despca-v", env!("CARGO_PKG_VERSION"));

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "despca",
    version,
    about = "De-biased sparse PCA: estimation, confidence intervals and Monte-Carlo experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coverage experiment over seeded replications of a spiked model.
    Coverage(ExperimentArgs),
    /// Average confidence-interval lengths with estimated variances.
    CiLength(ExperimentArgs),
    /// Coverage experiment that also exports per-replication normalized
    /// estimates, one CSV per method.
    Histograms(ExperimentArgs),
    /// Run the full pipeline once on a CSV data file.
    RunOne(RunOneArgs),
    /// Quick numerical invariant checks.
    Selftest,
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    /// Key-value config file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Spiked model: 1 (small spike, top eigenvalue 1.8) or 2 (large spike,
    /// top eigenvalue 5).
    #[arg(long)]
    model: Option<u8>,
    /// Dimension.
    #[arg(long)]
    p: Option<usize>,
    /// Sample size per replication.
    #[arg(long)]
    n: Option<usize>,
    /// Number of replications.
    #[arg(long)]
    reps: Option<usize>,
    /// Base seed; replication r uses seed (base XOR r).
    #[arg(long)]
    seed: Option<u64>,
    /// Interval variances: known (closed form) or estimated.
    #[arg(long)]
    variance: Option<String>,
    /// Confidence level in (0, 1).
    #[arg(long)]
    level: Option<f64>,
    /// Output directory for CSV/JSON files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for replications.
    #[arg(long)]
    threads: Option<usize>,
    /// Support-threshold constant C.
    #[arg(long)]
    threshold_c: Option<f64>,
    /// Column-mean center each sample before the covariance.
    #[arg(long)]
    center: bool,
}

#[derive(Args, Clone)]
struct RunOneArgs {
    /// Input CSV: one observation per row.
    #[arg(long)]
    input: PathBuf,
    /// Skip the first line of the input.
    #[arg(long)]
    header: bool,
    /// Key-value config file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Confidence level in (0, 1).
    #[arg(long)]
    level: Option<f64>,
    /// Support-threshold constant C.
    #[arg(long)]
    threshold_c: Option<f64>,
    /// Column-mean center the data before the covariance.
    #[arg(long)]
    center: bool,
    /// Output directory.
    #[arg(long, default_value = "despca_out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Coverage(args) => experiment(args, ExperimentKind::Coverage),
        Command::CiLength(args) => experiment(args, ExperimentKind::CiLength),
        Command::Histograms(args) => experiment(args, ExperimentKind::Histograms),
        Command::RunOne(args) => run_one(args),
        Command::Selftest => selftest(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

enum ExperimentKind {
    Coverage,
    CiLength,
    Histograms,
}

/// CLI failure carrying the documented exit codes.
#[derive(Debug)]
enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) | CliError::Numerical(m) | CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io(_) => EXIT_IO,
        }
    }

    fn io(path: &Path, e: std::io::Error) -> CliError {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> CliError {
        fn innermost(e: &Error) -> &Error {
            match e {
                Error::Stage { source, .. } => innermost(source),
                other => other,
            }
        }
        match innermost(&e) {
            Error::InvalidInput(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

/// `key = value` configuration file; `#` starts a comment.
#[derive(Default)]
struct FileConfig {
    entries: Vec<(String, String)>,
}

impl FileConfig {
    fn load(path: &Path) -> Result<FileConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "{}:{}: expected `key = value`",
                    path.display(),
                    lineno + 1
                )));
            };
            entries.push((key.trim().to_string(), value.trim().to_string()));
        }
        Ok(FileConfig { entries })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                CliError::Config(format!("config key `{key}`: cannot parse `{raw}`"))
            }),
        }
    }

    fn known_keys() -> &'static [&'static str] {
        &[
            "model",
            "p",
            "n",
            "reps",
            "seed",
            "variance",
            "level",
            "threads",
            "out",
            "threshold_c",
            "center",
            "lambda",
            "lambda_init",
            "lambda_nodewise",
            "eta",
            "l1_budget",
            "nodewise_budget",
            "variance_shortcut",
            "fantope_max_iter",
            "fantope_tol",
            "second_step_max_iter",
            "second_step_tol",
            "nodewise_max_iter",
            "nodewise_tol",
        ]
    }

    fn validate_keys(&self) -> Result<(), CliError> {
        for (key, _) in &self.entries {
            if !Self::known_keys().contains(&key.as_str()) {
                return Err(CliError::Config(format!("unknown config key `{key}`")));
            }
        }
        Ok(())
    }
}

fn apply_pipeline_overrides(
    pipeline: &mut PipelineConfig,
    file: &FileConfig,
) -> Result<(), CliError> {
    if let Some(v) = file.parse::<f64>("lambda")? {
        pipeline.lambda = v;
    }
    if let Some(v) = file.parse::<f64>("lambda_init")? {
        pipeline.lambda_init = v;
    }
    if let Some(v) = file.parse::<f64>("lambda_nodewise")? {
        pipeline.lambda_nodewise = v;
    }
    if let Some(v) = file.parse::<f64>("eta")? {
        pipeline.locality_radius = Some(v);
    }
    if let Some(v) = file.parse::<f64>("l1_budget")? {
        pipeline.l1_budget = Some(v);
    }
    if let Some(v) = file.parse::<f64>("nodewise_budget")? {
        pipeline.nodewise_budget = Some(v);
    }
    if let Some(v) = file.parse::<bool>("variance_shortcut")? {
        pipeline.gaussian_variance_shortcut = v;
    }
    if let Some(v) = file.parse::<usize>("fantope_max_iter")? {
        pipeline.fantope_max_iter = v;
    }
    if let Some(v) = file.parse::<f64>("fantope_tol")? {
        pipeline.fantope_tol = v;
    }
    if let Some(v) = file.parse::<usize>("second_step_max_iter")? {
        pipeline.second_step_max_iter = v;
    }
    if let Some(v) = file.parse::<f64>("second_step_tol")? {
        pipeline.second_step_tol = v;
    }
    if let Some(v) = file.parse::<usize>("nodewise_max_iter")? {
        pipeline.nodewise_max_iter = v;
    }
    if let Some(v) = file.parse::<f64>("nodewise_tol")? {
        pipeline.nodewise_tol = v;
    }
    Ok(())
}

fn build_experiment(
    args: &ExperimentArgs,
    force_estimated: bool,
) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let file = match &args.config {
        Some(path) => {
            let f = FileConfig::load(path)?;
            f.validate_keys()?;
            f
        }
        None => FileConfig::default(),
    };

    let model_id = args.model.or(file.parse::<u8>("model")?).unwrap_or(2);
    let model = match model_id {
        1 => ModelSpec::Model1,
        2 => ModelSpec::Model2,
        other => {
            return Err(CliError::Config(format!(
                "unknown model {other}; expected 1 or 2"
            )))
        }
    };
    let p = args.p.or(file.parse("p")?).unwrap_or(200);
    let n = args.n.or(file.parse("n")?).unwrap_or(200);
    let replications = args.reps.or(file.parse("reps")?).unwrap_or(200);
    let base_seed = args.seed.or(file.parse("seed")?).unwrap_or(1);
    let variance_raw = args
        .variance
        .clone()
        .or(file.get("variance").map(str::to_string))
        .unwrap_or_else(|| "known".to_string());
    let variance_mode = match variance_raw.as_str() {
        _ if force_estimated => VarianceMode::Estimated,
        "known" => VarianceMode::Known,
        "estimated" => VarianceMode::Estimated,
        other => {
            return Err(CliError::Config(format!(
                "unknown variance mode `{other}`; expected known or estimated"
            )))
        }
    };
    let threads = args.threads.or(file.parse("threads")?).unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|v| v.get())
            .unwrap_or(1)
    });
    let out = args
        .out
        .clone()
        .or(file.get("out").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("despca_out"));

    if p < 5 {
        return Err(CliError::Config("spiked models need p >= 5".to_string()));
    }
    let mut pipeline = default_config(p, n).map_err(|e| CliError::Config(e.to_string()))?;
    apply_pipeline_overrides(&mut pipeline, &file)?;
    if let Some(level) = args.level.or(file.parse("level")?) {
        pipeline.level = level;
    }
    if let Some(c) = args.threshold_c.or(file.parse("threshold_c")?) {
        pipeline.threshold_constant = c;
    }
    if args.center || file.parse::<bool>("center")?.unwrap_or(false) {
        pipeline.center_data = true;
    }

    let config = ExperimentConfig {
        model,
        p,
        n,
        replications,
        base_seed,
        variance_mode,
        run_debiased: true,
        run_classical: true,
        coordinates: ExperimentConfig::default_coordinates(p),
        threads,
        pipeline,
    };
    config
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok((config, out))
}

fn experiment(args: ExperimentArgs, kind: ExperimentKind) -> Result<(), CliError> {
    let force_estimated = matches!(kind, ExperimentKind::CiLength);
    let (config, out_dir) = build_experiment(&args, force_estimated)?;
    let report = run_coverage(&config)?;
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;

    write_coverage_csv(&out_dir, &report)?;
    if matches!(kind, ExperimentKind::Histograms) {
        write_histograms(&out_dir, &report)?;
    }
    let summary = summary_json(&report);
    write_file(&out_dir.join("summary.json"), &summary.render())?;

    eprintln!(
        "{} replications done in {:.1}s ({} failed); outputs in {}",
        report.config_echo.replications,
        report.runtime_secs,
        report.failures.len(),
        out_dir.display()
    );
    print_summary_table(&report);
    Ok(())
}

fn print_summary_table(report: &CoverageReport) {
    let line = |name: &str, m: &MethodReport| {
        println!(
            "{name}: coverage S0 {:.3}, S0c {:.3} | avg length S0 {:.4}, S0c {:.4} | eigenvalue coverage {:.3}",
            m.coverage_s0, m.coverage_s0c, m.length_s0, m.length_s0c, m.eigenvalue_coverage
        );
    };
    if let Some(m) = &report.debiased {
        line("de-biased", m);
    }
    if let Some(m) = &report.classical {
        line("classical", m);
    }
    println!(
        "efficient length S0 {:.4}, S0c {:.4}",
        report.efficient_length_s0, report.efficient_length_s0c
    );
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content).map_err(|e| CliError::io(path, e))
}

fn write_coverage_csv(dir: &Path, report: &CoverageReport) -> Result<(), CliError> {
    let mut lines = vec![csv_row(&[
        "method".into(),
        "coordinate".into(),
        "in_support".into(),
        "coverage".into(),
        "avg_length".into(),
    ])];
    let mut emit = |name: &str, m: &MethodReport| {
        for (j, (c, l)) in m.coverage.iter().zip(&m.avg_length).enumerate() {
            lines.push(csv_row(&[
                name.into(),
                (j + 1).to_string(),
                report.support.contains(&j).to_string(),
                format_f64(*c),
                format_f64(*l),
            ]));
        }
    };
    if let Some(m) = &report.debiased {
        emit("debiased", m);
    }
    if let Some(m) = &report.classical {
        emit("classical", m);
    }
    write_file(&dir.join("coverage.csv"), &(lines.join("\r\n") + "\r\n"))
}

fn write_histograms(dir: &Path, report: &CoverageReport) -> Result<(), CliError> {
    let coords = &report.config_echo.coordinates;
    let emit = |name: &str, m: &MethodReport| -> Result<(), CliError> {
        let mut lines = vec![csv_row(&[
            "coordinate".into(),
            "replication".into(),
            "normalized_value".into(),
        ])];
        for (r, row) in m.normalized.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                lines.push(csv_row(&[
                    (coords[k] + 1).to_string(),
                    (r + 1).to_string(),
                    format_f64(*v),
                ]));
            }
        }
        write_file(
            &dir.join(format!("histogram_{name}.csv")),
            &(lines.join("\r\n") + "\r\n"),
        )
    };
    if let Some(m) = &report.debiased {
        emit("debiased", m)?;
    }
    if let Some(m) = &report.classical {
        emit("classical", m)?;
    }
    Ok(())
}

fn method_json(m: &MethodReport) -> Json {
    let mut o = Json::obj();
    o.push("coverage_s0", Json::Num(m.coverage_s0));
    o.push("coverage_s0c", Json::Num(m.coverage_s0c));
    o.push("length_s0", Json::Num(m.length_s0));
    o.push("length_s0c", Json::Num(m.length_s0c));
    o.push("eigenvalue_coverage", Json::Num(m.eigenvalue_coverage));
    o.push("coverage", Json::from_f64_slice(&m.coverage));
    o.push("avg_length", Json::from_f64_slice(&m.avg_length));
    o.push(
        "normalized_eigenvalue",
        Json::from_f64_slice(&m.normalized_eigenvalue),
    );
    o
}

fn summary_json(report: &CoverageReport) -> Json {
    let echo = &report.config_echo;
    let mut config = Json::obj();
    config.push("model", Json::Str(echo.model.clone()));
    config.push("p", Json::UInt(echo.p as u64));
    config.push("n", Json::UInt(echo.n as u64));
    config.push("replications", Json::UInt(echo.replications as u64));
    config.push("base_seed", Json::UInt(echo.base_seed));
    config.push("variance", Json::Str(echo.variance_mode.clone()));
    config.push("level", Json::Num(echo.level));
    config.push(
        "coordinates",
        Json::from_usize_slice(&echo.coordinates.iter().map(|c| c + 1).collect::<Vec<_>>()),
    );

    let mut o = Json::obj();
    o.push("version", Json::Str(VERSION_STRING.to_string()));
    o.push("config", config);
    o.push(
        "support",
        Json::from_usize_slice(&report.support.iter().map(|c| c + 1).collect::<Vec<_>>()),
    );
    if let Some(m) = &report.debiased {
        o.push("debiased", method_json(m));
    }
    if let Some(m) = &report.classical {
        o.push("classical", method_json(m));
    }
    o.push("efficient_length_s0", Json::Num(report.efficient_length_s0));
    o.push(
        "efficient_length_s0c",
        Json::Num(report.efficient_length_s0c),
    );
    o.push(
        "failed_replications",
        Json::UInt(report.failures.len() as u64),
    );
    o
}

fn read_csv_matrix(path: &Path, skip_header: bool) -> Result<DataMatrix, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        if lineno == 0 && skip_header {
            continue;
        }
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            let field = field.trim().trim_matches('"');
            let value: f64 = field.parse().map_err(|_| {
                CliError::Io(format!(
                    "{}:{}: cannot parse `{field}` as a number",
                    path.display(),
                    lineno + 1
                ))
            })?;
            row.push(value);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Io(format!("{}: no data rows", path.display())));
    }
    DataMatrix::from_rows(&rows).map_err(|e| CliError::Config(e.to_string()))
}

fn run_one(args: RunOneArgs) -> Result<(), CliError> {
    let x = read_csv_matrix(&args.input, args.header)?;
    let file = match &args.config {
        Some(path) => {
            let f = FileConfig::load(path)?;
            f.validate_keys()?;
            f
        }
        None => FileConfig::default(),
    };
    let mut pipeline = default_config(x.p(), x.n()).map_err(CliError::from)?;
    apply_pipeline_overrides(&mut pipeline, &file)?;
    if let Some(level) = args.level.or(file.parse("level")?) {
        pipeline.level = level;
    }
    if let Some(c) = args.threshold_c.or(file.parse("threshold_c")?) {
        pipeline.threshold_constant = c;
    }
    if args.center || file.parse::<bool>("center")?.unwrap_or(false) {
        pipeline.center_data = true;
    }

    let report = run_pipeline(&x, &pipeline)?;
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;

    let inf = &report.inference;
    let mut lines = vec![csv_row(&[
        "coordinate".into(),
        "debiased".into(),
        "sigma_hat".into(),
        "lower".into(),
        "upper".into(),
        "in_support".into(),
    ])];
    for j in 0..x.p() {
        lines.push(csv_row(&[
            (j + 1).to_string(),
            format_f64(inf.b_hat[j]),
            format_f64(inf.sigma_j_hat[j]),
            format_f64(inf.intervals[j].0),
            format_f64(inf.intervals[j].1),
            inf.support.contains(&j).to_string(),
        ]));
    }
    write_file(
        &args.out.join("intervals.csv"),
        &(lines.join("\r\n") + "\r\n"),
    )?;

    let z = normal_quantile((1.0 + inf.level) / 2.0);
    let half = z * inf.sigma_lambda_hat / (x.n() as f64).sqrt();
    let mut o = Json::obj();
    o.push("version", Json::Str(VERSION_STRING.to_string()));
    let mut cfg = Json::obj();
    cfg.push("input", Json::Str(args.input.display().to_string()));
    cfg.push("n", Json::UInt(x.n() as u64));
    cfg.push("p", Json::UInt(x.p() as u64));
    cfg.push("level", Json::Num(inf.level));
    cfg.push("centered", Json::Bool(pipeline.center_data));
    cfg.push("lambda", Json::Num(pipeline.lambda));
    cfg.push("lambda_init", Json::Num(pipeline.lambda_init));
    cfg.push("lambda_nodewise", Json::Num(pipeline.lambda_nodewise));
    o.push("config", cfg);
    o.push("eigenvalue", Json::Num(inf.lambda_hat));
    o.push(
        "eigenvalue_interval",
        Json::from_f64_slice(&[inf.lambda_hat - half, inf.lambda_hat + half]),
    );
    o.push("sigma_lambda", Json::Num(inf.sigma_lambda_hat));
    o.push("loadings", Json::from_f64_slice(&report.loadings.beta));
    o.push("debiased", Json::from_f64_slice(&inf.b_hat));
    o.push(
        "support",
        Json::from_usize_slice(&inf.support.iter().map(|c| c + 1).collect::<Vec<_>>()),
    );
    o.push(
        "classical_pca",
        Json::from_f64_slice(&report.classical_baseline),
    );
    let mut diag = Json::obj();
    diag.push(
        "fantope_iterations",
        Json::UInt(report.fantope.iterations as u64),
    );
    diag.push("fantope_converged", Json::Bool(report.fantope.converged));
    diag.push(
        "second_step_iterations",
        Json::UInt(report.loadings.iterations as u64),
    );
    diag.push(
        "second_step_converged",
        Json::Bool(report.loadings.converged),
    );
    diag.push("second_step_kkt", Json::Num(report.loadings.kkt_residual));
    diag.push("locality_radius", Json::Num(report.eta));
    diag.push("l1_budget", Json::Num(report.l1_budget));
    let worst_kkt = report
        .precision
        .columns
        .iter()
        .map(|c| c.kkt_residual)
        .fold(0.0f64, f64::max);
    diag.push("nodewise_worst_kkt", Json::Num(worst_kkt));
    o.push("diagnostics", diag);
    write_file(&args.out.join("run_one.json"), &o.render())?;
    eprintln!("outputs in {}", args.out.display());
    Ok(())
}

fn selftest() -> Result<(), CliError> {
    use despca::linalg;
    use despca::linalg::vecops;
    let mut failures = 0usize;
    let mut check = |name: &str, pass: bool| {
        println!("{}: {}", if pass { "PASS" } else { "FAIL" }, name);
        if !pass {
            failures += 1;
        }
    };

    {
        let m = despca::spiked::model_2(12).unwrap();
        let x = despca::spiked::sample_gaussian(&m, 30, 11).unwrap();
        let s = linalg::sample_covariance(&x).unwrap();
        let eig = linalg::symmetric_eigen(&s).unwrap();
        let min = eig.values.last().copied().unwrap();
        check(
            "sample covariance is positive semi-definite",
            min >= -1e-10 * s.frobenius_norm(),
        );
    }
    {
        let v = vec![2.0, -1.0, 0.5, 3.0];
        let w = linalg::project_l1_ball(&v, 2.0).unwrap();
        let w2 = linalg::project_l1_ball(&w, 2.0).unwrap();
        check(
            "l1 projection is idempotent",
            vecops::l2_distance(&w, &w2) < 1e-12,
        );
        let mut rng = despca::rng::SplitMix64::new(3);
        let a = linalg::SymmetricMatrix::from_fn(5, |_, _| rng.next_f64() - 0.5);
        let z = linalg::project_fantope(&a).unwrap();
        let z2 = linalg::project_fantope(&z).unwrap();
        check(
            "fantope projection is idempotent",
            z.add_scaled(&z2, -1.0).max_abs() < 1e-9,
        );
        check(
            "fantope projection has unit trace",
            (z.trace() - 1.0).abs() < 1e-9,
        );
    }
    {
        let mut rng = despca::rng::SplitMix64::new(17);
        let a = linalg::SymmetricMatrix::from_fn(20, |_, _| rng.next_f64() * 2.0 - 1.0);
        let eig = linalg::symmetric_eigen(&a).unwrap();
        let rec = eig.reassemble_with(&eig.values);
        check(
            "eigendecomposition reconstructs the matrix",
            rec.add_scaled(&a, -1.0).max_abs() <= 1e-8 * (1.0 + a.frobenius_norm()),
        );
    }
    {
        let mut rng = despca::rng::SplitMix64::new(29);
        let s = linalg::SymmetricMatrix::from_fn(6, |_, _| rng.next_f64() - 0.5);
        let beta: Vec<f64> = (0..6).map(|_| rng.next_f64() - 0.5).collect();
        let g = despca::mstep::risk_gradient(&s, &beta);
        let h = 1e-5;
        let mut ok = true;
        for i in 0..6 {
            let mut plus = beta.clone();
            let mut minus = beta.clone();
            plus[i] += h;
            minus[i] -= h;
            let fd = (despca::mstep::empirical_risk(&s, &plus)
                - despca::mstep::empirical_risk(&s, &minus))
                / (2.0 * h);
            if (fd - g[i]).abs() / g[i].abs().max(1.0) > 1e-6 {
                ok = false;
            }
        }
        check("risk gradient matches finite differences", ok);
    }
    {
        let s = linalg::SymmetricMatrix::from_fn(4, |i, j| if i == j { (4 - i) as f64 } else { 0.0 });
        let sol = despca::fantope::solve_fantope(&s, 0.0, 5000, 1e-8).unwrap();
        check(
            "unpenalized fantope solve concentrates on the top eigenvector",
            (sol.z.get(0, 0) - 1.0).abs() < 1e-4,
        );
    }
    {
        let a = linalg::SymmetricMatrix::try_from_rows(&[
            vec![2.0, 0.3, 0.0, 0.1],
            vec![0.3, 1.5, 0.2, 0.0],
            vec![0.0, 0.2, 1.2, 0.1],
            vec![0.1, 0.0, 0.1, 1.8],
        ])
        .unwrap();
        let est =
            despca::nodewise::assemble_precision(&a, &[1e-6; 4], &[1e6; 4], 50_000, 1e-9).unwrap();
        let r = despca::nodewise::inverse_residual(&a, &est);
        check(
            "nodewise inversion matches the direct inverse",
            r.max_abs_deviation < 1e-3,
        );
    }
    {
        let m = despca::spiked::model_2(20).unwrap();
        let t = despca::spiked::theta0_closed_form(&m).unwrap();
        let hess = despca::mstep::risk_hessian(&m.sigma0, &m.beta0);
        let mut max_dev = 0.0f64;
        for i in 0..20 {
            let row = hess.matvec(t.row(i));
            for (k, v) in row.iter().enumerate() {
                let target = if k == i { 1.0 } else { 0.0 };
                max_dev = max_dev.max((v - target).abs());
            }
        }
        check(
            "closed-form Theta_0 inverts the Hessian at beta_0",
            max_dev < 1e-8,
        );
    }
    {
        let m = despca::spiked::model_1(8).unwrap();
        let a = despca::spiked::sample_gaussian(&m, 4, 123).unwrap();
        let b = despca::spiked::sample_gaussian(&m, 4, 123).unwrap();
        check("seeded sampling is bit-reproducible", a.row(3) == b.row(3));
    }
    {
        check(
            "normal quantile at 0.975",
            (normal_quantile(0.975) - 1.959963984540054).abs() < 1e-8,
        );
    }

    if failures > 0 {
        Err(CliError::Numerical(format!(
            "{failures} selftest check(s) failed"
        )))
    } else {
        println!("all selftest checks passed");
        Ok(())
    }
}
