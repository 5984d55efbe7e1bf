//! Command-line front end: sketch application, benchmark sweeps, coherence
//! reports and the wiring-smoothing experiment. Every run echoes its full
//! configuration (with a stable hash) so results are replayable.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use blocksketch::coherence;
use blocksketch::data::DatasetSpec;
use blocksketch::hashing::{mix64, sub_seed, GOLDEN_GAMMA};
use blocksketch::tasks::{
    self, distortion_tail, gram_error, ose_spectral_error, OseBasis, Sketcher, TaskReport,
};
use blocksketch::{make_layout_default, DenseMatrix, IntraMode, SketchOperator, SketchParams};

/// Exit code for bad usage (invalid flag combinations or values).
const USAGE_EXIT: i32 = 2;

#[derive(Parser, Debug, Serialize)]
#[command(name = "blocksketch", version, about = "Block-permuted sparse sketching toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
enum Command {
    /// Apply the sketch operator to a dataset and write the result.
    Sketch(SketchArgs),
    /// Run task/method sweeps and write TaskReport rows (CSV or JSONL).
    Bench(BenchArgs),
    /// Block and neighborhood coherence of a subspace (JSON report).
    Coherence(CoherenceArgs),
    /// mu_nbr under random wirings as kappa grows (JSON report).
    Smoothing(SmoothingArgs),
}

#[derive(Args, Debug, Serialize, Clone)]
struct DatasetArgs {
    /// gaussian | lowrank | mtx
    #[arg(long, default_value = "gaussian")]
    dataset: String,
    /// Rank for the lowrank dataset.
    #[arg(long, default_value_t = 16)]
    rank: usize,
    /// Noise level for the lowrank dataset.
    #[arg(long, default_value_t = 0.1)]
    noise_sigma: f64,
    /// Matrix Market file for the mtx dataset.
    #[arg(long)]
    path: Option<PathBuf>,
    /// Crop the mtx dataset to the top-left (d, n) window.
    #[arg(long, default_value_t = false)]
    crop: bool,
}

impl DatasetArgs {
    fn spec(&self, d: usize, n: usize, seed: u64) -> Result<DatasetSpec> {
        Ok(match self.dataset.as_str() {
            "gaussian" => DatasetSpec::Gaussian { d, n, seed },
            "lowrank" => DatasetSpec::LowRankNoise {
                d,
                n,
                rank: self.rank,
                noise_sigma: self.noise_sigma,
                seed,
            },
            "mtx" => {
                let path = self
                    .path
                    .as_ref()
                    .ok_or_else(|| usage("--path is required for --dataset mtx"))?;
                DatasetSpec::MatrixMarketFile {
                    path: path.display().to_string(),
                    crop: self.crop.then_some((d, n)),
                }
            }
            other => return Err(usage(&format!("unknown dataset '{other}'"))),
        })
    }
}

#[derive(Args, Debug, Serialize)]
struct SketchArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long = "M", default_value_t = 16)]
    m: usize,
    #[arg(long, default_value_t = 4)]
    kappa: usize,
    #[arg(long, default_value_t = 2)]
    s: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = IntraModeArg::Affine)]
    intra: IntraModeArg,
    #[arg(long, value_enum, default_value_t = PrecisionArg::F64)]
    precision: PrecisionArg,
    #[arg(long, default_value_t = 1)]
    slices: usize,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[command(flatten)]
    data: DatasetArgs,
    /// Output file for the sketched matrix (binary dense format).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct BenchArgs {
    /// Comma-separated tasks from {gram, ose, ridge, lsq, tail}.
    #[arg(long, value_delimiter = ',')]
    tasks: Vec<String>,
    /// Comma-separated methods from {tiled, blockrow, gaussian, plain_sparse}.
    #[arg(long, value_delimiter = ',', default_value = "tiled")]
    methods: Vec<String>,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    n: usize,
    /// Sweep of sketch sizes.
    #[arg(long = "k", value_delimiter = ',')]
    ks: Vec<usize>,
    #[arg(long = "M", default_value_t = 16)]
    m: usize,
    #[arg(long = "kappa", value_delimiter = ',', default_value = "4")]
    kappas: Vec<usize>,
    #[arg(long = "s", value_delimiter = ',', default_value = "2")]
    ss: Vec<usize>,
    /// Ridge regularization sweep.
    #[arg(long = "lambda", value_delimiter = ',', default_value = "1.0")]
    lambdas: Vec<f64>,
    /// Subspace width for the ose task (Gaussian probes).
    #[arg(long, default_value_t = 32)]
    probes: usize,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Also time apply (warmup, then mean of 10 runs) per method/config.
    #[arg(long, default_value_t = false)]
    timing: bool,
    #[command(flatten)]
    data: DatasetArgs,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct CoherenceArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    r: usize,
    #[arg(long = "M")]
    m: usize,
    #[arg(long)]
    kappa: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    data: DatasetArgs,
    /// Output JSON file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SmoothingArgs {
    #[arg(long, default_value_t = 4096)]
    d: usize,
    #[arg(long)]
    r: usize,
    #[arg(long = "M")]
    m: usize,
    #[arg(long = "kappa", value_delimiter = ',')]
    kappas: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use the planted maximally coherent subspace instead of a random one.
    #[arg(long, default_value_t = false)]
    planted: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
enum IntraModeArg {
    Affine,
    Rowpart,
}

impl From<IntraModeArg> for IntraMode {
    fn from(v: IntraModeArg) -> Self {
        match v {
            IntraModeArg::Affine => IntraMode::AffineUnique,
            IntraModeArg::Rowpart => IntraMode::RowPartitioned,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
enum PrecisionArg {
    F32,
    F64,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq)]
enum FormatArg {
    Csv,
    Jsonl,
}

fn usage(msg: &str) -> anyhow::Error {
    anyhow::anyhow!("usage error: {msg}")
}

fn is_usage(err: &anyhow::Error) -> bool {
    err.to_string().starts_with("usage error:")
}

/// Stable 64-bit hash of the serialized config (for replayable run ids).
fn config_hash(json: &str) -> String {
    let mut h = 0u64;
    for &b in json.as_bytes() {
        h = mix64(h.wrapping_mul(GOLDEN_GAMMA) ^ b as u64);
    }
    format!("{h:016x}")
}

/// Resolve worker-count and output-dir environment overrides.
fn effective_workers(flag: usize) -> Result<usize> {
    match std::env::var("BLOCKSKETCH_WORKERS") {
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|&w| w >= 1)
            .ok_or_else(|| usage(&format!("BLOCKSKETCH_WORKERS = '{v}' is not a positive integer"))),
        Err(_) => Ok(flag),
    }
}

fn effective_out(path: &Path) -> PathBuf {
    match std::env::var("BLOCKSKETCH_OUTDIR") {
        Ok(dir) if path.is_relative() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn echo_config<T: Serialize>(subcommand: &str, args: &T) -> Result<String> {
    let cfg = serde_json::json!({
        "subcommand": subcommand,
        "config": args,
    });
    let json = serde_json::to_string(&cfg)?;
    let hash = config_hash(&json);
    println!("{{\"config_hash\":\"{hash}\",\"echo\":{json}}}");
    Ok(hash)
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sketch(a) => cmd_sketch(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Coherence(a) => cmd_coherence(a),
        Command::Smoothing(a) => cmd_smoothing(a),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(if is_usage(&err) { USAGE_EXIT } else { 1 });
    }
}

fn load_dense(spec: &DatasetSpec) -> Result<DenseMatrix<f64>> {
    spec.load().context("loading dataset")
}

fn cmd_sketch(args: SketchArgs) -> Result<()> {
    let hash = echo_config("sketch", &args)?;
    let workers = effective_workers(args.workers)?;
    let out = effective_out(&args.out);
    let layout = make_layout_default(args.d, args.k, args.m)?;
    let params = SketchParams::new(args.kappa, args.s, args.seed).with_mode(args.intra.into());
    let op = SketchOperator::new(layout, params)?;
    let a = load_dense(&args.data.spec(args.d, args.n, sub_seed(args.seed, 900, 0))?)?;
    if a.rows != args.d || a.cols != args.n {
        bail!(
            "dataset shape {}x{} does not match --d {} --n {}",
            a.rows,
            a.cols,
            args.d,
            args.n
        );
    }
    let t0 = Instant::now();
    let (rows, cols) = match args.precision {
        PrecisionArg::F64 => {
            let y = op.apply_sliced(&a, args.slices, workers)?;
            y.write_bin(&out)?;
            (y.rows, y.cols)
        }
        PrecisionArg::F32 => {
            let a32 = DenseMatrix::<f32> {
                rows: a.rows,
                cols: a.cols,
                data: a.data.iter().map(|&v| v as f32).collect(),
            };
            let y = op.apply_sliced(&a32, args.slices, workers)?;
            y.write_bin(&out)?;
            (y.rows, y.cols)
        }
    };
    let summary = serde_json::json!({
        "config_hash": hash,
        "out": out.display().to_string(),
        "rows": rows,
        "cols": cols,
        "precision": format!("{:?}", args.precision),
        "elapsed_ms": t0.elapsed().as_secs_f64() * 1e3,
    });
    let summary_path = out.with_extension("summary.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)
        .with_context(|| format!("writing {}", summary_path.display()))?;
    println!("{summary}");
    Ok(())
}

struct MethodSpec {
    name: String,
}

fn validate_list<T>(list: &[T], what: &str) -> Result<()> {
    if list.is_empty() {
        return Err(usage(&format!("{what} list must be non-empty")));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn build_sketcher<'a>(
    method: &str,
    d: usize,
    k: usize,
    m: usize,
    kappa: usize,
    s: usize,
    seed: u64,
    op_slot: &'a mut Option<SketchOperator>,
    layout_slot: &'a mut Option<(blocksketch::BlockLayout, SketchParams)>,
) -> Result<Sketcher<'a>> {
    match method {
        "tiled" => {
            let layout = make_layout_default(d, k, m)?;
            *op_slot = Some(SketchOperator::new(layout, SketchParams::new(kappa, s, seed))?);
            Ok(Sketcher::Operator(op_slot.as_ref().unwrap()))
        }
        "blockrow" => {
            let layout = make_layout_default(d, k, m)?;
            *layout_slot = Some((layout, SketchParams::new(kappa, s, seed)));
            let (l, p) = layout_slot.as_ref().unwrap();
            Ok(Sketcher::BlockRow { layout: l, params: p })
        }
        "gaussian" => Ok(Sketcher::DenseGaussian { d, k, seed }),
        "plain_sparse" => Ok(Sketcher::PlainSparse { d, k, s, seed }),
        other => Err(usage(&format!("unknown method '{other}'"))),
    }
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let hash = echo_config("bench", &args)?;
    let workers = effective_workers(args.workers)?;
    let out = effective_out(&args.out);
    validate_list(&args.tasks, "task")?;
    validate_list(&args.methods, "method")?;
    validate_list(&args.ks, "k")?;
    validate_list(&args.kappas, "kappa")?;
    validate_list(&args.ss, "s")?;
    validate_list(&args.lambdas, "lambda")?;
    if args.trials == 0 {
        return Err(usage("trials must be >= 1"));
    }
    for t in &args.tasks {
        if !["gram", "ose", "ridge", "lsq", "tail"].contains(&t.as_str()) {
            return Err(usage(&format!("unknown task '{t}'")));
        }
    }
    let methods: Vec<MethodSpec> = args
        .methods
        .iter()
        .map(|m| MethodSpec { name: m.clone() })
        .collect();

    let a = load_dense(&args.data.spec(args.d, args.n, sub_seed(args.seed, 900, 0))?)?;
    let b: Vec<f64> = blocksketch::data::gen_gaussian(args.d, 1, sub_seed(args.seed, 901, 0)).data;
    let x: Vec<f64> = b.clone();

    let mut rows: Vec<TaskReport> = Vec::new();
    let mut point = 0usize;
    for &k in &args.ks {
        for &kappa in &args.kappas {
            for &s in &args.ss {
                for method in &methods {
                    for task in &args.tasks {
                        run_task_point(
                            &args, task, method, k, kappa, s, &a, &b, &x, workers, point,
                            &mut rows,
                        )?;
                    }
                    if args.timing {
                        let mut op_slot = None;
                        let mut layout_slot = None;
                        let sk = build_sketcher(
                            &method.name,
                            args.d,
                            k,
                            args.m,
                            kappa,
                            s,
                            sub_seed(args.seed, point, 0),
                            &mut op_slot,
                            &mut layout_slot,
                        )?;
                        // warmup, then mean of 10 timed applies
                        for _ in 0..2 {
                            sk.apply(&a, workers)?;
                        }
                        let t0 = Instant::now();
                        for _ in 0..10 {
                            sk.apply(&a, workers)?;
                        }
                        rows.push(TaskReport {
                            task: "timing".into(),
                            method: method.name.clone(),
                            d: args.d,
                            n: args.n,
                            k,
                            kappa,
                            s,
                            seed: args.seed,
                            metric: "apply_ms_mean10".into(),
                            value: t0.elapsed().as_secs_f64() * 1e3 / 10.0,
                        });
                    }
                    point += 1;
                }
            }
        }
    }

    let mut body = String::new();
    match args.format {
        FormatArg::Csv => {
            writeln!(body, "{}", tasks::CSV_HEADER)?;
            for r in &rows {
                writeln!(body, "{}", r.csv_row())?;
            }
        }
        FormatArg::Jsonl => {
            for r in &rows {
                writeln!(body, "{}", r.jsonl())?;
            }
        }
    }
    std::fs::write(&out, body).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "{}",
        serde_json::json!({
            "config_hash": hash,
            "out": out.display().to_string(),
            "rows": rows.len(),
        })
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_task_point(
    args: &BenchArgs,
    task: &str,
    method: &MethodSpec,
    k: usize,
    kappa: usize,
    s: usize,
    a: &DenseMatrix<f64>,
    b: &[f64],
    x: &[f64],
    workers: usize,
    point: usize,
    rows: &mut Vec<TaskReport>,
) -> Result<()> {
    let mut values = Vec::new();
    let report = |metric: &str, seed: u64, value: f64| TaskReport {
        task: task.into(),
        method: method.name.clone(),
        d: args.d,
        n: args.n,
        k,
        kappa,
        s,
        seed,
        metric: metric.into(),
        value,
    };
    for trial in 0..args.trials {
        let seed = sub_seed(args.seed, point, trial);
        let mut op_slot = None;
        let mut layout_slot = None;
        let sk = build_sketcher(
            &method.name,
            args.d,
            k,
            args.m,
            kappa,
            s,
            seed,
            &mut op_slot,
            &mut layout_slot,
        )?;
        match task {
            "gram" => {
                let sa = sk.apply(a, workers)?;
                let v = gram_error(a, &sa);
                values.push(v);
                rows.push(report("gram_rel_err", seed, v));
            }
            "ose" => {
                let v = ose_spectral_error(
                    &sk,
                    OseBasis::GaussianProbes {
                        d: args.d,
                        r: args.probes,
                        seed: sub_seed(args.seed, 800 + point, trial),
                    },
                    workers,
                )?;
                values.push(v);
                rows.push(report("ose_err", seed, v));
            }
            "ridge" => {
                for &lambda in &args.lambdas {
                    let rep = tasks::sketched_ridge(&sk, a, b, lambda, workers)?;
                    values.push(rep.residual);
                    let mut r = report("ridge_residual", seed, rep.residual);
                    // keep lambda visible without widening the schema
                    r.metric = format!("ridge_residual_lambda_{lambda}");
                    rows.push(r);
                }
            }
            "lsq" => {
                let rep = tasks::sketch_solve_lsq(&sk, a, b, workers)?;
                values.push(rep.suboptimality);
                rows.push(report("lsq_suboptimality", seed, rep.suboptimality));
            }
            "tail" => {
                let base = sub_seed(args.seed, 700 + point, trial);
                let d = args.d;
                let m = args.m;
                let name = method.name.clone();
                let summary = distortion_tail(x, 200, |t, xm| {
                    let seed_t = sub_seed(base, 0, t);
                    let mut op_slot = None;
                    let mut layout_slot = None;
                    let sk = build_sketcher(
                        &name, d, k, m, kappa, s, seed_t, &mut op_slot, &mut layout_slot,
                    )
                    .map_err(|e| blocksketch::Error::InvalidArgument(e.to_string()))?;
                    sk.apply(xm, workers)
                })?;
                values.push(summary.q90);
                rows.push(report("tail_q50", seed, summary.q50));
                rows.push(report("tail_q90", seed, summary.q90));
                rows.push(report("tail_q99", seed, summary.q99));
                rows.push(report("tail_mean_ratio", seed, summary.mean_ratio));
            }
            _ => unreachable!("tasks validated above"),
        }
    }
    // aggregate row (median over trials of this point's primary metric)
    if !values.is_empty() {
        values.sort_by(|p, q| p.partial_cmp(q).unwrap());
        let median = if values.len() % 2 == 1 {
            values[values.len() / 2]
        } else {
            0.5 * (values[values.len() / 2 - 1] + values[values.len() / 2])
        };
        rows.push(report("median", args.seed, median));
    }
    Ok(())
}

fn cmd_coherence(args: CoherenceArgs) -> Result<()> {
    let hash = echo_config("coherence", &args)?;
    if args.kappa == 0 || args.kappa > args.m {
        return Err(usage(&format!(
            "kappa = {} must be in [1, M = {}]",
            args.kappa, args.m
        )));
    }
    if args.r == 0 || args.r > args.d {
        return Err(usage(&format!("r = {} must be in [1, d = {}]", args.r, args.d)));
    }
    let layout = make_layout_default(args.d, args.m, args.m)?;
    let a = load_dense(&args.data.spec(args.d, args.r, sub_seed(args.seed, 900, 0))?)?;
    let u = coherence::orthonormalize(&a);
    let wiring = blocksketch::Wiring::iterated_affine(args.seed, args.m, args.kappa)?;
    let rep = coherence::coherence_report(&u, &layout, &wiring)?;
    let doc = serde_json::json!({
        "config_hash": hash,
        "seed": args.seed,
        "report": rep,
        "sandwich_ok":
            rep.mu_blk / args.kappa as f64 <= rep.mu_nbr + 1e-10
                && rep.mu_nbr <= rep.mu_blk + 1e-10,
    });
    emit_json(&doc, args.out.as_deref())
}

fn cmd_smoothing(args: SmoothingArgs) -> Result<()> {
    let hash = echo_config("smoothing", &args)?;
    validate_list(&args.kappas, "kappa")?;
    if args.kappas.iter().any(|&k| k == 0 || k > args.m) {
        return Err(usage("every kappa must be in [1, M]"));
    }
    if args.trials == 0 {
        return Err(usage("trials must be >= 1"));
    }
    let layout = make_layout_default(args.d, args.m, args.m)?;
    let u = if args.planted {
        coherence::planted_coherent_basis(args.d, args.r)
    } else {
        coherence::orthonormalize(&blocksketch::data::gen_gaussian(
            args.d,
            args.r,
            sub_seed(args.seed, 900, 0),
        ))
    };
    let rep = coherence::smoothing_experiment(&u, &layout, &args.kappas, args.trials, args.seed)?;
    let doc = serde_json::json!({
        "config_hash": hash,
        "seed": args.seed,
        "planted": args.planted,
        "report": rep,
    });
    emit_json(&doc, args.out.as_deref())
}

fn emit_json(doc: &serde_json::Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(doc)?;
    match out {
        Some(p) => {
            let p = effective_out(p);
            std::fs::write(&p, &text).with_context(|| format!("writing {}", p.display()))?;
            println!("{}", serde_json::json!({"out": p.display().to_string()}));
        }
        None => println!("{text}"),
    }
    Ok(())
}
