//! Command-line entry point: analyze, search, simulate, gen-trace.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use serde::Deserialize;
use servesim::autosearch::{self, GreedyParams};
use servesim::cost::{self, BatchComposition, NetMode};
use servesim::pipeline::{self, NanoSplit};
use servesim::profiles::{synth_profiles, AlphaConfig};
use servesim::sim::{self, Backend, ServerConfig};
use servesim::specs::{self, HardwareSpec, ModelConfig, WorkloadStats};

#[derive(Parser)]
#[command(
    name = "servesim",
    version,
    about = "Analytical cost model, schedule search, and iteration-level simulator for LLM serving"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Per-operation resource table, workload classification, and the
    /// optimal throughput bound
    Analyze(AnalyzeArgs),
    /// Greedy execution-unit schedule search over nano-batch splits
    Search(SearchArgs),
    /// Iteration-level serving simulation over a trace
    Simulate(SimulateArgs),
    /// Generate a synthetic request trace
    GenTrace(GenTraceArgs),
}

#[derive(Args)]
struct SpecArgs {
    /// Model: catalog name (e.g. llama-2-70b) or TOML spec path
    #[arg(long)]
    model: String,
    /// Hardware: catalog name (e.g. "A100 - 80G") or TOML spec path
    #[arg(long)]
    hw: String,
    /// Override the hardware device count
    #[arg(long)]
    devices: Option<u32>,
}

#[derive(Args)]
struct WorkloadArgs {
    /// Workload: dataset name (sharegpt|lmsys|splitwise) or TOML path
    #[arg(long)]
    workload: Option<String>,
    /// Mean prefill length (tokens); overrides --workload
    #[arg(short = 'p', long)]
    p_avg: Option<f64>,
    /// Mean decode length (tokens); overrides --workload
    #[arg(short = 'd', long)]
    d_avg: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Both,
}

/// Optional TOML tuning file shared by `search` and `simulate`:
///
/// ```toml
/// [profiles.alpha]
/// compute = 0.5
/// memory = 0.15
/// network = 0.043
///
/// [profiles]
/// launch_overhead = 0.0   # seconds per op instance per layer
/// ```
#[derive(Debug, Default, Deserialize)]
struct TuningFile {
    #[serde(default)]
    profiles: ProfilesSection,
}

#[derive(Debug, Default, Deserialize)]
struct ProfilesSection {
    #[serde(default)]
    alpha: AlphaSection,
    #[serde(default)]
    launch_overhead: f64,
}

#[derive(Debug, Default, Deserialize)]
struct AlphaSection {
    compute: Option<f64>,
    memory: Option<f64>,
    network: Option<f64>,
}

/// Applies the tuning file (when given) over the default curve parameters.
fn load_tuning(path: &Option<PathBuf>) -> Result<(AlphaConfig, f64)> {
    let mut alphas = AlphaConfig::default();
    let Some(path) = path else {
        return Ok((alphas, 0.0));
    };
    let text = fs::read_to_string(resolve_path(path.to_str().unwrap_or_default()))
        .with_context(|| format!("reading tuning file {}", path.display()))?;
    let parsed: TuningFile = toml::from_str(&text).context("parsing tuning file")?;
    if let Some(v) = parsed.profiles.alpha.compute {
        alphas.compute = v;
    }
    if let Some(v) = parsed.profiles.alpha.memory {
        alphas.memory = v;
    }
    if let Some(v) = parsed.profiles.alpha.network {
        alphas.network = v;
    }
    Ok((alphas, parsed.profiles.launch_overhead))
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    workload: WorkloadArgs,
    /// Dense batch size; defaults to the KV-capacity steady state
    #[arg(long)]
    b_dense: Option<f64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    workload: WorkloadArgs,
    /// Dense batch size; defaults to the KV-capacity steady state
    #[arg(long)]
    b_dense: Option<f64>,
    /// Split granularity as a fraction, e.g. 1/4 or 1/8
    #[arg(long, default_value = "1/4")]
    splits_granularity: String,
    /// Drop splits equal to another under nano-batch relabeling
    #[arg(long)]
    symmetric_dedup: bool,
    /// Execution-unit budget; defaults to the device's unit count
    #[arg(long)]
    budget: Option<u32>,
    /// Measured profile CSV overriding the synthetic curves
    #[arg(long)]
    profiles: Option<PathBuf>,
    /// Tuning TOML with `[profiles.alpha]` overrides and launch overhead
    #[arg(long)]
    config: Option<PathBuf>,
    /// Pipeline flavor to search
    #[arg(long, value_enum, default_value_t = PipelineKind::Overlapped)]
    pipeline: PipelineKind,
    /// Units moved per greedy step
    #[arg(long, default_value_t = 1)]
    quantum: u32,
    #[arg(long, default_value_t = 200)]
    max_iters: u32,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PipelineKind {
    Overlapped,
    SingleDevice,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendArg {
    Sequential,
    Overlapped,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Trace CSV path
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, value_enum, default_value_t = BackendArg::Overlapped)]
    backend: BackendArg,
    /// Force all arrivals to zero and run to drain
    #[arg(long)]
    offline: bool,
    /// Online rate sweep: rerun the trace with arrivals rescaled to each
    /// rate (requests/s), one metrics row per rate
    #[arg(long, value_delimiter = ',')]
    rates: Vec<f64>,
    /// Dense batch size options
    #[arg(long, value_delimiter = ',', default_values_t = vec![512u64, 768, 1024, 1536, 2048])]
    options: Vec<u64>,
    /// Iterations between EOS and batch removal
    #[arg(long, default_value_t = 2)]
    eos_lag: u32,
    /// Assumed decode length for peak-memory admission; defaults to the
    /// trace's mean output length
    #[arg(long)]
    decode_hint: Option<f64>,
    /// Model eager KV offload and its bandwidth check
    #[arg(long)]
    offload: bool,
    /// Tuning TOML with `[profiles.alpha]` overrides and launch overhead
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct GenTraceArgs {
    /// Dataset name: sharegpt | lmsys | splitwise
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    p_avg: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    p_std: f64,
    #[arg(long)]
    d_avg: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    d_std: f64,
    /// Number of requests
    #[arg(short = 'n', long, default_value_t = 1000)]
    count: usize,
    /// Arrival rate in requests/s (0 = offline trace)
    #[arg(long, default_value_t = 0.0)]
    rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output trace path
    #[arg(long, default_value = "trace.csv")]
    out: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Analyze(args) => cmd_analyze(args),
        Cmd::Search(args) => cmd_search(args),
        Cmd::Simulate(args) => cmd_simulate(args),
        Cmd::GenTrace(args) => cmd_gen_trace(args),
    };
    if let Err(err) = outcome {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

/// Resolves a path argument, falling back to `$SERVESIM_CONFIG_DIR/<path>`
/// when the direct path does not exist.
fn resolve_path(raw: &str) -> PathBuf {
    let p = Path::new(raw);
    if p.exists() {
        return p.to_path_buf();
    }
    if let Ok(dir) = std::env::var("SERVESIM_CONFIG_DIR") {
        let joined = Path::new(&dir).join(raw);
        if joined.exists() {
            return joined;
        }
    }
    p.to_path_buf()
}

fn load_hw(args: &SpecArgs) -> Result<HardwareSpec> {
    let mut hw = match specs::find_hardware(&args.hw) {
        Some(hw) => hw,
        None => specs::load_hardware_spec(resolve_path(&args.hw))
            .with_context(|| format!("hardware `{}` is neither a catalog name nor a readable spec", args.hw))?,
    };
    if let Some(n) = args.devices {
        hw.n_devices = n;
        hw.validate()?;
    }
    Ok(hw)
}

fn load_model(args: &SpecArgs) -> Result<ModelConfig> {
    match specs::find_model(&args.model) {
        Some(m) => Ok(m),
        None => specs::load_model_config(resolve_path(&args.model))
            .with_context(|| format!("model `{}` is neither a catalog name nor a readable spec", args.model)),
    }
}

fn load_workload(args: &WorkloadArgs) -> Result<WorkloadStats> {
    let mut stats = match &args.workload {
        Some(name) => match specs::find_workload(name) {
            Some(s) => s,
            None => specs::load_workload_stats(resolve_path(name)).with_context(|| {
                format!("workload `{name}` is neither a dataset name nor a readable spec")
            })?,
        },
        None => {
            if args.p_avg.is_none() && args.d_avg.is_none() {
                bail!("provide --workload or explicit -p/-d lengths");
            }
            WorkloadStats::new(0.0, 0.0)
        }
    };
    if let Some(p) = args.p_avg {
        stats.p_avg = p;
    }
    if let Some(d) = args.d_avg {
        stats.d_avg = d;
    }
    stats.validate()?;
    Ok(stats)
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, content).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn parse_fraction(s: &str) -> Result<u32> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let num: u32 = num.trim().parse().context("bad fraction numerator")?;
        let den: u32 = den.trim().parse().context("bad fraction denominator")?;
        if num != 1 || den == 0 {
            bail!("granularity must be a unit fraction like 1/4");
        }
        Ok(den)
    } else {
        // Accept a bare denominator too.
        s.parse().context("bad granularity")
    }
}

fn steady_composition(
    hw: &HardwareSpec,
    model: &ModelConfig,
    stats: &WorkloadStats,
    b_dense: Option<f64>,
) -> Result<(BatchComposition, f64)> {
    let b = match b_dense {
        Some(b) => b,
        None => {
            let b_req = cost::max_requests(hw, model, stats)?;
            cost::dense_batch(b_req, stats)
        }
    };
    Ok((BatchComposition::steady_state(model, stats, b), b))
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let hw = load_hw(&args.spec)?;
    let model = load_model(&args.spec)?;
    let stats = load_workload(&args.workload)?;
    let (comp, b_dense) = steady_composition(&hw, &model, &stats, args.b_dense)?;

    let rows = cost::op_resource_table(&hw, &model, &comp, &stats);
    let breakdown = cost::t_ratio(&hw, &model, &stats)?;
    let optimal = cost::optimal_throughput(&hw, &model);
    let converted = cost::convert_throughput(optimal, &stats)?;
    let e_kv = cost::e_kv(&hw, &model)?;
    let b_req_max = cost::max_requests(&hw, &model, &stats)?;
    let offload = cost::offload_bandwidth(optimal, &model);
    let comm_flops = cost::comm_reduction_flops(comp.b_dense, &model, &hw);

    let mut report = String::new();
    report.push_str(&format!(
        "configuration: {} on {} x {} (p={}, d={}, b_dense={:.0})\n",
        model.name, hw.n_devices, hw.name, stats.p_avg, stats.d_avg, b_dense
    ));
    report.push_str(&format!(
        "kv capacity: {:.4e} elements; max in-flight requests: {:.1}\n",
        e_kv, b_req_max
    ));
    report.push_str(&format!(
        "iteration times: T_mem {:.3} ms, T_compute {:.3} ms, T_net {:.3} ms\n",
        breakdown.t_mem * 1e3,
        breakdown.t_compute * 1e3,
        breakdown.t_net * 1e3
    ));
    report.push_str(&format!(
        "T_R = {:.4} -> {}\n",
        breakdown.t_ratio, breakdown.classification
    ));
    report.push_str(&format!(
        "optimal throughput: {:.1} tokens/s total ({:.1} tokens/s/device)\n",
        optimal,
        optimal / hw.n_devices as f64
    ));
    report.push_str(&format!(
        "  decoding {:.1} tokens/s, {:.2} requests/s at these lengths\n",
        converted.decoding, converted.rps
    ));
    report.push_str(&format!(
        "offload bandwidth at optimal: {:.2} GB/s ({:.2} GiB/s) vs host link {:.2} GB/s\n",
        offload / 1e9,
        offload / (1u64 << 30) as f64,
        hw.host_link_bw / 1e9
    ));
    report.push_str("\nper-operation resource accounting (aggregated over layers):\n");
    report.push_str(&format!(
        "{:<18}{:>14}{:>10}{:>10}{:>12}{:>10}{:>10}  {}\n",
        "operation", "compute", "mem", "net", "t_compute", "t_mem", "t_net", "bound"
    ));
    for r in &rows {
        report.push_str(&format!(
            "{:<18}{:>12.1}GF{:>8.1}GB{:>8.1}GB{:>10.2}ms{:>8.2}ms{:>8.2}ms  {}\n",
            r.op.label(),
            r.compute / 1e9,
            r.mem_moved / 1e9,
            r.net_moved / 1e9,
            r.t_compute * 1e3,
            r.t_mem * 1e3,
            r.t_net * 1e3,
            r.bound_by
        ));
    }
    let (tc, tm, tn) = rows.iter().fold((0.0, 0.0, 0.0), |acc, r| {
        (acc.0 + r.t_compute, acc.1 + r.t_mem, acc.2 + r.t_net)
    });
    report.push_str(&format!(
        "{:<18}{:>14}{:>10}{:>10}{:>10.2}ms{:>8.2}ms{:>8.2}ms\n",
        "total", "", "", "", tc * 1e3, tm * 1e3, tn * 1e3
    ));
    report.push_str(&format!(
        "\nnote: the communication row books the all-reduce summation as \
         {:.1} GFLOP ((n-1)*B*D*L); the doubled accounting {:.1} GFLOP is \
         also reported for comparison with measured tables.\n",
        comm_flops / 1e9,
        2.0 * comm_flops / 1e9
    ));
    report.push_str(&format!(
        "network accounting: detailed {:.2} ms vs closed-form {:.2} ms\n",
        cost::iter_time_network(comp.b_dense, &model, &hw, NetMode::Detailed) * 1e3,
        cost::iter_time_network(comp.b_dense, &model, &hw, NetMode::Simple) * 1e3,
    ));

    if matches!(args.format, Format::Text | Format::Both) {
        write_file(&args.out.join("analysis.txt"), &report)?;
    }
    if matches!(args.format, Format::Csv | Format::Both) {
        write_file(&args.out.join("optable.csv"), &cost::rows_to_csv(&rows))?;
    }
    print!("{report}");
    Ok(())
}

fn cmd_search(args: SearchArgs) -> Result<()> {
    let hw = load_hw(&args.spec)?;
    let model = load_model(&args.spec)?;
    let stats = load_workload(&args.workload)?;
    let budget = args.budget.unwrap_or(hw.n_units);
    if budget == 0 {
        bail!("--budget must be positive");
    }
    let (comp, b_dense) = steady_composition(&hw, &model, &stats, args.b_dense)?;

    let (alphas, launch_overhead) = load_tuning(&args.config)?;
    let rows = cost::op_resource_table(&hw, &model, &comp, &stats);
    let mut profiles = synth_profiles(&hw, &model, &rows, &alphas, launch_overhead)
        .map_err(|e| anyhow!(e))?;
    if let Some(path) = &args.profiles {
        let loaded = servesim::profiles::load_profiles(path, hw.n_units)?;
        for w in &loaded.warnings {
            eprintln!("profile warning: {w}");
        }
        profiles.merge_measured(loaded.curves);
    }

    let den = parse_fraction(&args.splits_granularity)?;
    let mut splits = pipeline::enumerate_splits(den, args.symmetric_dedup)?;
    // Coarse granularities cannot populate the four-way groups; the
    // canonical split still deserves evaluation.
    if !splits.iter().any(|s| *s == NanoSplit::default()) {
        splits.insert(0, NanoSplit::default());
    }

    let builder = |split: &NanoSplit| match args.pipeline {
        PipelineKind::Overlapped => pipeline::build_overlapped_pipeline(&comp, split),
        PipelineKind::SingleDevice => pipeline::build_single_device_pipeline(&comp, split),
    };
    let params = GreedyParams {
        quantum: args.quantum,
        max_iters: args.max_iters,
    };
    let result = autosearch::search(&builder, &splits, &profiles, budget, &params)?;

    // Sequential baseline on the same composition for the speedup line.
    let seq_graph = pipeline::build_sequential_pipeline(&comp)?;
    let seq_assign = autosearch::UnitAssignment::uniform(&seq_graph, budget);
    let seq = autosearch::simulate_schedule(
        &seq_graph,
        &seq_assign,
        &profiles,
        &servesim::profiles::InterferenceMatrix::identity(),
        budget,
    )?;

    let layers = model.n_layers as f64;
    let mut summary = String::new();
    summary.push_str(&format!(
        "search: {} on {} x {} (b_dense={:.0}, budget={budget}, {} splits)\n",
        model.name,
        hw.n_devices,
        hw.name,
        b_dense,
        result.candidates.len()
    ));
    summary.push_str(&format!("best split: {}\n", result.best_split.describe()));
    summary.push_str(&format!(
        "per-iteration makespan: {:.3} ms (per layer {:.6} ms)\n",
        result.best_schedule.makespan * layers * 1e3,
        result.best_schedule.makespan * 1e3
    ));
    summary.push_str(&format!(
        "bounds: lower {:.3} ms <= best {:.3} ms <= serial-at-full-units {:.3} ms\n",
        result.bounds.lower * layers * 1e3,
        result.best_schedule.makespan * layers * 1e3,
        result.bounds.upper * layers * 1e3
    ));
    summary.push_str(&format!(
        "sequential pipeline: {:.3} ms per iteration ({:.1}% improvement)\n",
        seq.makespan * layers * 1e3,
        (1.0 - result.best_schedule.makespan / seq.makespan) * 100.0
    ));
    for (class, util) in &result.best_schedule.utilization {
        summary.push_str(&format!("{class} busy fraction: {util:.3}\n"));
    }

    let mut candidates_csv = String::from("split,makespan_s\n");
    for c in &result.candidates {
        match c.makespan {
            Some(m) => candidates_csv.push_str(&format!("{},{:.9}\n", c.split.describe(), m * layers)),
            None => candidates_csv.push_str(&format!("{},infeasible\n", c.split.describe())),
        }
    }

    write_file(&args.out.join("search.txt"), &summary)?;
    write_file(
        &args.out.join("schedule.csv"),
        &result.best_schedule.to_csv(&result.best_graph),
    )?;
    write_file(&args.out.join("candidates.csv"), &candidates_csv)?;
    write_file(&args.out.join("pipeline.txt"), &result.best_graph.to_text())?;
    print!("{summary}");
    Ok(())
}

fn build_server_config(
    args: &SimulateArgs,
    trace: &[specs::TraceRequest],
    alphas: AlphaConfig,
) -> ServerConfig {
    let mean_out = if trace.is_empty() {
        1.0
    } else {
        trace.iter().map(|r| r.output_len as f64).sum::<f64>() / trace.len() as f64
    };
    ServerConfig {
        dense_batch_options: args.options.clone(),
        latency_backend: match args.backend {
            BackendArg::Sequential => Backend::Sequential,
            BackendArg::Overlapped => Backend::Overlapped,
        },
        eos_lag_iters: args.eos_lag,
        avg_decode_hint: args.decode_hint.unwrap_or(mean_out.max(1.0)),
        offload_enabled: args.offload,
        alphas,
        ..Default::default()
    }
}

fn summarize(
    label: &str,
    metrics: &sim::SimMetrics,
    hw: &HardwareSpec,
    model: &ModelConfig,
) -> String {
    let optimal = cost::optimal_throughput(hw, model);
    format!(
        "{label}: throughput {:.1} tokens/s ({:.1}/device, {:.1}% of optimal), \
         normalized latency {:.4} s/token, {} iterations, {} wasted tokens\n",
        metrics.total_throughput,
        metrics.total_throughput / hw.n_devices as f64,
        100.0 * metrics.total_throughput / optimal,
        metrics.normalized_latency,
        metrics.iterations,
        metrics.wasted_tokens
    )
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let hw = load_hw(&args.spec)?;
    let model = load_model(&args.spec)?;
    let trace = specs::load_trace(&args.trace)?;
    let (alphas, _) = load_tuning(&args.config)?;
    let config = build_server_config(&args, &trace, alphas);

    if !args.rates.is_empty() {
        // Rate sweep: rescale arrivals so each run hits the target mean
        // rate over the trace.
        let mut sweep_csv =
            String::from("rate_rps,throughput_tok_s,norm_latency_s,completed,wasted\n");
        let mut lines = String::new();
        for &rate in &args.rates {
            if rate <= 0.0 {
                bail!("sweep rates must be positive");
            }
            let scaled: Vec<specs::TraceRequest> = trace
                .iter()
                .enumerate()
                .map(|(i, r)| specs::TraceRequest {
                    arrival: i as f64 / rate,
                    ..r.clone()
                })
                .collect();
            let metrics = sim::run_online(&scaled, &hw, &model, &config)?;
            metrics.verify_conservation()?;
            sweep_csv.push_str(&format!(
                "{rate},{:.3},{:.6},{},{}\n",
                metrics.total_throughput,
                metrics.normalized_latency,
                metrics.completed,
                metrics.wasted_tokens
            ));
            lines.push_str(&summarize(&format!("rate {rate}"), &metrics, &hw, &model));
        }
        write_file(&args.out.join("rate_sweep.csv"), &sweep_csv)?;
        print!("{lines}");
        return Ok(());
    }

    let metrics = if args.offline {
        sim::run_offline(&trace, &hw, &model, &config)?
    } else {
        sim::run_online(&trace, &hw, &model, &config)?
    };
    metrics.verify_conservation()?;

    let mut summary = summarize("simulate", &metrics, &hw, &model);
    if args.offload {
        let report = sim::offload_check(metrics.total_throughput, &model, &hw);
        summary.push_str(&format!(
            "offload: required {:.2} GB/s vs link {:.2} GB/s{}\n",
            report.required_bw / 1e9,
            report.link_bw / 1e9,
            if report.exceeds {
                format!(
                    " EXCEEDED (overflow {:.1}%, stall {:.3} s)",
                    report.overflow_ratio * 100.0,
                    metrics.offload_stall
                )
            } else {
                String::new()
            }
        ));
    }

    write_file(&args.out.join("latency_cdf.csv"), &metrics.cdf_csv())?;
    write_file(&args.out.join("per_iter.csv"), &metrics.per_iter_csv())?;
    write_file(&args.out.join("simulate.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn cmd_gen_trace(args: GenTraceArgs) -> Result<()> {
    let stats = match &args.dataset {
        Some(name) => specs::find_workload(name)
            .ok_or_else(|| anyhow!("unknown dataset `{name}` (try sharegpt, lmsys, splitwise)"))?,
        None => {
            let p_avg = args.p_avg.ok_or_else(|| anyhow!("--p-avg required without --dataset"))?;
            let d_avg = args.d_avg.ok_or_else(|| anyhow!("--d-avg required without --dataset"))?;
            WorkloadStats {
                p_avg,
                d_avg,
                p_std: args.p_std,
                d_std: args.d_std,
            }
        }
    };
    let trace = sim::gen_trace(&stats, args.count, args.rate, args.seed)?;
    specs::save_trace(&args.out, &trace)?;
    let n = trace.len().max(1) as f64;
    let mean_in = trace.iter().map(|r| r.input_len as f64).sum::<f64>() / n;
    let mean_out = trace.iter().map(|r| r.output_len as f64).sum::<f64>() / n;
    println!(
        "wrote {} requests to {} (sample means: input {:.1}, output {:.1}; targets {:.0}/{:.0})",
        trace.len(),
        args.out.display(),
        mean_in,
        mean_out,
        stats.p_avg,
        stats.d_avg
    );
    Ok(())
}
