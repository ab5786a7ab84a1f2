//! Command-line front end: reproducible experiments with machine-readable
//! outputs.
//!
//! Every run is fully determined by (subcommand, flags, seed); thread count
//! only affects wall time. File outputs come with a manifest (the complete
//! configuration plus version and timing): JSON outputs embed it, CSV outputs
//! get a `<output>.manifest.json` sidecar so the data schema stays pure.
//! `rerun --manifest <file>` re-executes a manifest and reproduces the data
//! byte for byte.

// `!(x > 0.0)` guards reject NaN together with out-of-domain values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use yule_simon::asymptotics::{fit_exponential_tail, fit_power_tail, fit_stretched_tail};
use yule_simon::cmj::{sample_total_progeny, sample_x, ProgenyOutcome};
use yule_simon::distributions::{
    borel_total_progeny_pmf, extinction_probability, mean_x, prob_x_equals_one, survival_theta0,
    yule_simon_pmf_theta0,
};
use yule_simon::exec::{configure_threads, run_batched};
use yule_simon::forest::{run_forest_experiment, MutationRegime};
use yule_simon::full_precision;
use yule_simon::summary::MeanAccumulator;
use yule_simon::tail::{direct_curve, representation_curve, tilted_curve, TailCurve};
use yule_simon::{Error, ModelParams};

#[derive(Parser)]
#[command(name = "yule-simon", version, about = "Two-parameter Yule-Simon simulation toolkit")]
struct Cli {
    /// Seed for all replicated computations; fixed seed means fixed output.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Worker threads (defaults to all cores, or $YULE_SIMON_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum EstimatorArg {
    Direct,
    Representation,
    Tilted,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RegimeArg {
    A,
    B,
    C,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum FitKindArg {
    Power,
    Exponential,
    Stretched,
}

#[derive(Subcommand, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
enum Command {
    /// Analytic pmf and survival table of the classical law (theta = 0).
    Pmf(PmfArgs),
    /// Mean of X and P(X = 1) by quadrature.
    Moments(MomentsArgs),
    /// Draw exact samples of X and summarize them.
    Sample(SampleArgs),
    /// Estimate the survival curve P(X > n).
    Tail(TailArgs),
    /// Fit a tail regime to a curve document produced by `tail`.
    Fit(FitArgs),
    /// Allelic-partition frequencies of the mutation forest vs their limit.
    Forest(ForestArgs),
    /// Sample total progenies (theta > 0) against the Borel law.
    Progeny(ProgenyArgs),
    /// Re-execute a recorded manifest, reproducing its data output.
    Rerun(RerunArgs),
}

#[derive(Args, Serialize, Deserialize)]
struct PmfArgs {
    #[arg(long)]
    rho: f64,
    #[arg(long, default_value_t = 50)]
    k_max: u64,
}

#[derive(Args, Serialize, Deserialize)]
struct MomentsArgs {
    #[arg(long, allow_negative_numbers = true)]
    theta: f64,
    #[arg(long)]
    rho: f64,
    /// Absolute tolerance of the P(X = 1) quadrature.
    #[arg(long, default_value_t = 1e-10)]
    quad_tol: f64,
}

#[derive(Args, Serialize, Deserialize)]
struct SampleArgs {
    #[arg(long, allow_negative_numbers = true)]
    theta: f64,
    #[arg(long)]
    rho: f64,
    #[arg(long, default_value_t = 100_000)]
    replicates: u64,
}

#[derive(Args, Serialize, Deserialize)]
struct TailArgs {
    #[arg(long, allow_negative_numbers = true)]
    theta: f64,
    #[arg(long)]
    rho: f64,
    #[arg(long)]
    n_max: u64,
    /// Comma-separated curve points overriding the default grid.
    #[arg(long)]
    n_list: Option<String>,
    #[arg(long, default_value_t = 100_000)]
    replicates: u64,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Representation)]
    estimator: EstimatorArg,
    /// Tilt rate (tilted estimator only; defaults to theta).
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Args, Serialize, Deserialize)]
struct FitArgs {
    /// Curve JSON document (as written by `tail --format json`).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    kind: FitKindArg,
    #[arg(long)]
    n_lo: u64,
    #[arg(long)]
    n_hi: u64,
}

#[derive(Args, Serialize, Deserialize)]
struct ForestArgs {
    /// Fertility decay rate of the underlying branching process; must be <= 0.
    #[arg(long, allow_negative_numbers = true)]
    theta: f64,
    /// Mutation regime: (a) i.i.d. Bernoulli, (b) log-rare, (c) power-rare.
    #[arg(long, value_enum)]
    regime: RegimeArg,
    /// Clone probability p in (0,1); regime (a) only.
    #[arg(long)]
    clone_prob: Option<f64>,
    /// Exponent rho in (0,1); regime (c) only.
    #[arg(long)]
    regime_rho: Option<f64>,
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 50)]
    runs: u64,
    #[arg(long, default_value_t = 10)]
    k_max: u64,
    /// Replicates for the Monte Carlo target pmf (theta < 0 limits).
    #[arg(long, default_value_t = 1_000_000)]
    target_replicates: u64,
}

#[derive(Args, Serialize, Deserialize)]
struct ProgenyArgs {
    #[arg(long)]
    theta: f64,
    #[arg(long, default_value_t = 100_000)]
    replicates: u64,
    /// Stop a run once the population reaches this size. Lower it for
    /// theta < 1, where runs escape to infinity with positive probability.
    #[arg(long, default_value_t = yule_simon::cmj::DEFAULT_PROGENY_CAP)]
    cap: u64,
    /// Histogram rows to report.
    #[arg(long, default_value_t = 20)]
    k_max: u64,
}

#[derive(Args, Serialize, Deserialize)]
struct RerunArgs {
    #[arg(long)]
    manifest: PathBuf,
}

/// Complete record of one invocation; enough to reproduce it.
#[derive(Serialize, Deserialize)]
struct Manifest {
    version: String,
    seed: u64,
    format: Format,
    output: Option<String>,
    command: Command,
    wall_time_seconds: f64,
}

struct Rendered {
    csv: String,
    data: serde_json::Value,
}

fn usage_error(msg: &str) -> ! {
    eprintln!("error: usage: {msg}");
    std::process::exit(2);
}

fn numeric_error(msg: &str) -> ! {
    eprintln!("error: numeric: {msg}");
    std::process::exit(3);
}

fn fail(err: Error) -> ! {
    match err {
        Error::Domain(m) | Error::Input(m) => usage_error(&m),
        Error::Numeric(m) | Error::FitDomain(m) => numeric_error(&m),
    }
}

fn unwrap_or_fail<T>(result: Result<T, Error>) -> T {
    result.unwrap_or_else(|e| fail(e))
}

fn main() {
    let cli = Cli::parse();
    let threads = cli.threads.or_else(|| {
        std::env::var("YULE_SIMON_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Err(e) = configure_threads(threads) {
        fail(e);
    }

    let started = Instant::now();
    let rendered = match &cli.command {
        Command::Pmf(args) => run_pmf(args),
        Command::Moments(args) => run_moments(args),
        Command::Sample(args) => run_sample(args, cli.seed),
        Command::Tail(args) => run_tail(args, cli.seed),
        Command::Fit(args) => run_fit(args),
        Command::Forest(args) => run_forest(args, cli.seed),
        Command::Progeny(args) => run_progeny(args, cli.seed),
        Command::Rerun(args) => {
            run_rerun(args, cli.output.as_deref());
            return;
        }
    };

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cli.seed,
        format: cli.format,
        output: cli.output.as_ref().map(|p| p.display().to_string()),
        command: cli.command,
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    write_output(&rendered, &manifest, cli.format, cli.output.as_deref());
}

fn write_output(rendered: &Rendered, manifest: &Manifest, format: Format, output: Option<&Path>) {
    let body = match format {
        Format::Csv => rendered.csv.clone(),
        Format::Json => {
            let doc = json!({
                "manifest": manifest,
                "data": rendered.data,
            });
            let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
            s.push('\n');
            s
        }
    };
    match output {
        None => print!("{body}"),
        Some(path) => {
            if let Err(e) = fs::write(path, &body) {
                numeric_error(&format!("cannot write {}: {e}", path.display()));
            }
            if format == Format::Csv {
                let sidecar = manifest_sidecar_path(path);
                let mut s = serde_json::to_string_pretty(manifest).expect("serializable");
                s.push('\n');
                if let Err(e) = fs::write(&sidecar, s) {
                    numeric_error(&format!("cannot write {}: {e}", sidecar.display()));
                }
            }
        }
    }
}

fn manifest_sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}

fn validated_params(theta: f64, rho: f64) -> ModelParams {
    unwrap_or_fail(ModelParams::new(theta, rho))
}

fn run_pmf(args: &PmfArgs) -> Rendered {
    if args.k_max == 0 {
        usage_error("k-max must be >= 1");
    }
    let mut csv = String::from("k,pmf,survival\n");
    let mut rows = Vec::new();
    for k in 1..=args.k_max {
        let pmf = unwrap_or_fail(yule_simon_pmf_theta0(args.rho, k));
        let survival = unwrap_or_fail(survival_theta0(args.rho, k));
        csv.push_str(&format!(
            "{k},{},{}\n",
            full_precision(pmf),
            full_precision(survival)
        ));
        rows.push(json!({"k": k, "pmf": pmf, "survival": survival}));
    }
    Rendered {
        csv,
        data: json!({"rho": args.rho, "rows": rows}),
    }
}

fn run_moments(args: &MomentsArgs) -> Rendered {
    let params = validated_params(args.theta, args.rho);
    let mean = mean_x(&params);
    let p_one = unwrap_or_fail(prob_x_equals_one(&params, args.quad_tol));
    let mean_text = if mean.is_finite() {
        full_precision(mean)
    } else {
        "infinite".to_string()
    };
    let csv = format!(
        "theta,rho,mean,mean_finite,prob_x_equals_one\n{},{},{},{},{}\n",
        full_precision(params.theta),
        full_precision(params.rho),
        mean_text,
        params.mean_finite(),
        full_precision(p_one)
    );
    Rendered {
        csv,
        data: json!({
            "theta": params.theta,
            "rho": params.rho,
            "mean": if mean.is_finite() { json!(mean) } else { json!("infinite") },
            "mean_finite": params.mean_finite(),
            "prob_x_equals_one": p_one,
        }),
    }
}

fn run_sample(args: &SampleArgs, seed: u64) -> Rendered {
    let params = validated_params(args.theta, args.rho);
    if args.replicates < 2 {
        usage_error("at least 2 replicates are required");
    }
    let (acc, min, max) = run_batched(
        seed,
        args.replicates,
        || (MeanAccumulator::default(), u64::MAX, 0u64),
        |(acc, min, max), _i, rng| {
            let x = sample_x(&params, rng);
            acc.add(x as f64);
            *min = (*min).min(x);
            *max = (*max).max(x);
        },
        |(a, min, max), (b, bmin, bmax)| {
            a.merge(&b);
            *min = (*min).min(bmin);
            *max = (*max).max(bmax);
        },
    );
    let csv = format!(
        "replicates,mean,stderr,min,max\n{},{},{},{min},{max}\n",
        args.replicates,
        full_precision(acc.mean()),
        full_precision(acc.stderr()),
    );
    Rendered {
        csv,
        data: json!({
            "theta": params.theta,
            "rho": params.rho,
            "replicates": args.replicates,
            "mean": acc.mean(),
            "stderr": acc.stderr(),
            "min": min,
            "max": max,
        }),
    }
}

fn parse_n_list(text: &str) -> Vec<u64> {
    let mut ns = Vec::new();
    for part in text.split(',') {
        match part.trim().parse::<u64>() {
            Ok(n) => ns.push(n),
            Err(_) => usage_error(&format!("bad n-list entry '{part}'")),
        }
    }
    ns
}

fn run_tail(args: &TailArgs, seed: u64) -> Rendered {
    let params = validated_params(args.theta, args.rho);
    if args.n_max == 0 {
        usage_error("n-max must be >= 1");
    }
    let curve: TailCurve = match args.estimator {
        EstimatorArg::Direct => {
            if args.lambda.is_some() {
                usage_error("--lambda only applies to the tilted estimator");
            }
            let mut curve = unwrap_or_fail(direct_curve(&params, args.n_max, args.replicates, seed));
            if let Some(list) = &args.n_list {
                let keep = parse_n_list(list);
                curve.points.retain(|p| keep.contains(&p.n));
            }
            curve
        }
        EstimatorArg::Representation => {
            if args.lambda.is_some() {
                usage_error("--lambda only applies to the tilted estimator");
            }
            let ns = grid(args);
            unwrap_or_fail(representation_curve(&params, &ns, args.replicates, seed))
        }
        EstimatorArg::Tilted => {
            let lambda = args.lambda.unwrap_or(params.theta);
            if !(lambda > 0.0) {
                usage_error(&format!(
                    "tilt rate must be > 0; pass --lambda explicitly (default theta = {})",
                    params.theta
                ));
            }
            let ns = grid(args);
            unwrap_or_fail(tilted_curve(&params, &ns, lambda, args.replicates, seed))
        }
    };
    let mut csv = Vec::new();
    curve.write_csv(&mut csv).expect("in-memory write");
    Rendered {
        csv: String::from_utf8(csv).expect("ascii"),
        data: curve.to_json(),
    }
}

fn grid(args: &TailArgs) -> Vec<u64> {
    match &args.n_list {
        Some(list) => parse_n_list(list),
        None => (1..=args.n_max).collect(),
    }
}

fn run_fit(args: &FitArgs) -> Rendered {
    let text = fs::read_to_string(&args.input)
        .unwrap_or_else(|e| usage_error(&format!("cannot read {}: {e}", args.input.display())));
    let value: serde_json::Value = serde_json::from_str(&text)
        .unwrap_or_else(|e| usage_error(&format!("{} is not JSON: {e}", args.input.display())));
    // accept both a bare curve document and a CLI output wrapping it in "data"
    let curve_value = if value.get("points").is_some() {
        &value
    } else if let Some(inner) = value.get("data") {
        inner
    } else {
        usage_error("input holds no curve document");
    };
    let curve = unwrap_or_fail(TailCurve::from_json(curve_value));
    let fit = match args.kind {
        FitKindArg::Power => fit_power_tail(&curve, args.n_lo, args.n_hi),
        FitKindArg::Exponential => fit_exponential_tail(&curve, args.n_lo, args.n_hi),
        FitKindArg::Stretched => fit_stretched_tail(&curve, args.n_lo, args.n_hi),
    };
    let fit = unwrap_or_fail(fit);
    let theoretical = fit
        .theoretical_exponent
        .map_or("".to_string(), full_precision);
    let csv = format!(
        "kind,fitted_exponent,theoretical_exponent,intercept,n_lo,n_hi,residual_rms,weighted\n\
         {:?},{},{theoretical},{},{},{},{},{}\n",
        fit.kind,
        full_precision(fit.fitted_exponent),
        full_precision(fit.intercept),
        fit.fit_range.0,
        fit.fit_range.1,
        full_precision(fit.residual_rms),
        fit.weighted
    );
    Rendered {
        csv,
        data: fit.to_json(),
    }
}

fn run_forest(args: &ForestArgs, seed: u64) -> Rendered {
    let regime = match args.regime {
        RegimeArg::A => {
            let p = args
                .clone_prob
                .unwrap_or_else(|| usage_error("regime (a) requires --clone-prob"));
            MutationRegime::IidBernoulli { clone_prob: p }
        }
        RegimeArg::B => MutationRegime::LogRare,
        RegimeArg::C => {
            let rho = args
                .regime_rho
                .unwrap_or_else(|| usage_error("regime (c) requires --regime-rho"));
            MutationRegime::PowerRare { rho }
        }
    };
    let experiment = unwrap_or_fail(run_forest_experiment(
        args.theta,
        regime,
        args.n,
        args.runs,
        args.k_max,
        args.target_replicates,
        seed,
    ));
    let mut csv = Vec::new();
    experiment.write_csv(&mut csv).expect("in-memory write");
    Rendered {
        csv: String::from_utf8(csv).expect("ascii"),
        data: experiment.to_json(),
    }
}

fn run_progeny(args: &ProgenyArgs, seed: u64) -> Rendered {
    if args.replicates < 2 || args.k_max == 0 {
        usage_error("progeny needs replicates >= 2 and k-max >= 1");
    }
    if !(args.theta > 0.0) {
        usage_error("total progeny requires theta > 0 (it is infinite otherwise)");
    }
    let theta = args.theta;
    let cap = args.cap;
    let k_len = args.k_max as usize;
    let (counts, exceeded, finite_beyond) = run_batched(
        seed,
        args.replicates,
        || (vec![0u64; k_len + 1], 0u64, 0u64),
        |(counts, exceeded, beyond), _i, rng| {
            match sample_total_progeny(theta, cap, rng).expect("theta > 0") {
                ProgenyOutcome::Finite(n) if n as usize <= k_len => counts[n as usize] += 1,
                ProgenyOutcome::Finite(_) => *beyond += 1,
                ProgenyOutcome::ExceededCap => *exceeded += 1,
            }
        },
        |(a, ae, ab), (b, be, bb)| {
            for (x, y) in a.iter_mut().zip(b.iter()) {
                *x += y;
            }
            *ae += be;
            *ab += bb;
        },
    );
    let r = args.replicates as f64;
    let mut csv = String::from("n,count,frequency,borel_pmf\n");
    let mut rows = Vec::new();
    for n in 1..=args.k_max {
        let count = counts[n as usize];
        let freq = count as f64 / r;
        let pmf = unwrap_or_fail(borel_total_progeny_pmf(theta, n));
        csv.push_str(&format!(
            "{n},{count},{},{}\n",
            full_precision(freq),
            full_precision(pmf)
        ));
        rows.push(json!({"n": n, "count": count, "frequency": freq, "borel_pmf": pmf}));
    }
    let finite_fraction = 1.0 - exceeded as f64 / r;
    let expected_finite = if theta >= 1.0 {
        1.0
    } else {
        unwrap_or_fail(extinction_probability(theta))
    };
    Rendered {
        csv,
        data: json!({
            "theta": theta,
            "replicates": args.replicates,
            "cap": cap,
            "rows": rows,
            "finite_beyond_k_max": finite_beyond,
            "exceeded_cap": exceeded,
            "finite_fraction": finite_fraction,
            "expected_finite_fraction": expected_finite,
        }),
    }
}

fn run_rerun(args: &RerunArgs, output: Option<&Path>) {
    let text = fs::read_to_string(&args.manifest)
        .unwrap_or_else(|e| usage_error(&format!("cannot read {}: {e}", args.manifest.display())));
    let manifest: Manifest = serde_json::from_str(&text)
        .unwrap_or_else(|e| usage_error(&format!("not a manifest: {e}")));
    let started = Instant::now();
    let rendered = match &manifest.command {
        Command::Pmf(a) => run_pmf(a),
        Command::Moments(a) => run_moments(a),
        Command::Sample(a) => run_sample(a, manifest.seed),
        Command::Tail(a) => run_tail(a, manifest.seed),
        Command::Fit(a) => run_fit(a),
        Command::Forest(a) => run_forest(a, manifest.seed),
        Command::Progeny(a) => run_progeny(a, manifest.seed),
        Command::Rerun(_) => usage_error("manifests of rerun itself cannot be re-executed"),
    };
    let new_manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: manifest.seed,
        format: manifest.format,
        output: output.map(|p| p.display().to_string()).or(manifest.output.clone()),
        command: manifest.command,
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    let target = output
        .map(Path::to_path_buf)
        .or_else(|| new_manifest.output.as_ref().map(PathBuf::from));
    write_output(&rendered, &new_manifest, manifest.format, target.as_deref());
}
