use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;
use sha2::{Digest, Sha256};

use boolres::analysis::plot::{render, Trace};
use boolres::analysis::spectrum::DEFAULT_EMBED_DELAY_MG;
use boolres::analysis::{
    delay_embed, measure_decay_time, median, power_spectrum, run_sweep, write_sweep_csv, BoundingBox, SweepAxis,
    SweepGrid,
};
use boolres::experiment::{run_prediction, ExperimentConfig, PredictionData, PredictionOutcome};
use boolres::hdl::emit;
use boolres::mackey_glass::{integrate_mg, normalize_mg, resample, LYAPUNOV_TIME_MG};
use boolres::network::{appendix_example, build_reservoir, Hyperparams, ReservoirSpec};
use boolres::sim::EngineKind;

/// Hardware reference for the prediction error over one Lyapunov time.
const REFERENCE_NRMSE: (f64, f64) = (0.028, 0.010);

#[derive(Parser)]
#[command(name = "boolres", version, about = "Time-delay Boolean reservoir computer experiments")]
struct Cli {
    /// TOML experiment config; defaults are used for anything missing.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Use this single reservoir seed instead of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    engine: Option<EngineArg>,
    /// Use the full repetition counts (100 decay repetitions, 5 reservoirs x 5
    /// trials per sweep point) instead of the desk-scale defaults.
    #[arg(long, global = true)]
    paper_scale: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Fixed,
    Event,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate Mackey-Glass and write raw, normalised and resampled series.
    Generate,
    /// Train the readout and score closed-loop prediction for every seed.
    TrainPredict,
    /// Measure the fading-memory decay time for every seed.
    Decay,
    /// Hyperparameter sweeps from the config, or the four default sweeps.
    Sweep(SweepArgs),
    /// Free-run spectrum and delay embedding against the true attractor.
    Spectrum(SpectrumArgs),
    /// Write the Verilog bundle for a reservoir.
    EmitHdl(EmitArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep only this axis.
    #[arg(long, value_enum)]
    axis: Option<AxisArg>,
    /// Comma-separated grid values for --axis.
    #[arg(long, value_delimiter = ',', requires = "axis")]
    values: Vec<f64>,
    /// Also measure decay times at every point.
    #[arg(long)]
    decay: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Rho,
    K,
    TauBar,
    Sigma,
}

impl From<AxisArg> for SweepAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Rho => SweepAxis::Rho,
            AxisArg::K => SweepAxis::K,
            AxisArg::TauBar => SweepAxis::TauBar,
            AxisArg::Sigma => SweepAxis::Sigma,
        }
    }
}

#[derive(Args)]
struct SpectrumArgs {
    /// Free-run length in Lyapunov times.
    #[arg(long, default_value_t = 100.0)]
    lyapunov_times: f64,
}

#[derive(Args)]
struct EmitArgs {
    /// Emit the three-node illustration network instead of a generated one.
    #[arg(long)]
    appendix: bool,
    /// Train a readout first and bake its weights into the sampler stub.
    #[arg(long, conflicts_with = "appendix")]
    trained: bool,
}

struct Run {
    config: ExperimentConfig,
    hash: String,
    out: PathBuf,
}

impl Run {
    fn provenance(&self, seed: u64) -> Vec<(&'static str, String)> {
        vec![("config_hash", self.hash.clone()), ("seed", seed.to_string())]
    }

    fn dir(&self, name: &str) -> Result<PathBuf> {
        let dir = self.out.join(name);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }

    fn hp(&self, seed: u64) -> Hyperparams {
        Hyperparams {
            seed,
            ..self.config.hyperparams.clone()
        }
    }
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    config_hash: &'a str,
    seed: u64,
    #[serde(flatten)]
    body: T,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, run: &Run, seed: u64, body: T) -> Result<()> {
    let stamped = Stamped {
        config_hash: &run.hash,
        seed,
        body,
    };
    let mut text = serde_json::to_string_pretty(&stamped)?;
    text.push('\n');
    write_text(path, &text)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn header(out: &mut impl Write, provenance: &[(&str, String)]) -> Result<()> {
    for (k, v) in provenance {
        writeln!(out, "# {k}={v}")?;
    }
    Ok(())
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config: ExperimentConfig = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seeds = vec![seed];
        config.hyperparams.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        config.output_dir = dir.to_string_lossy().into_owned();
    }
    if let Some(engine) = cli.engine {
        let kind = match engine {
            EngineArg::Fixed => EngineKind::FixedStep,
            EngineArg::Event => EngineKind::EventDriven,
        };
        config.task.engine = kind;
        config.decay.engine = kind;
    }
    if cli.paper_scale {
        config.decay.repetitions = 100;
        for grid in &mut config.sweeps {
            grid.reservoirs_per_point = 5;
            grid.trials_per_reservoir = 5;
        }
    }
    config.validate().context("invalid configuration")?;
    Ok(config)
}

fn config_hash(config: &ExperimentConfig) -> Result<String> {
    let canonical = serde_json::to_string(&ExperimentConfig {
        output_dir: String::new(),
        ..config.clone()
    })?;
    Ok(format!("{:x}", Sha256::digest(canonical.as_bytes())))
}

fn cmd_generate(run: &Run) -> Result<()> {
    let c = &run.config;
    let dir = run.dir("generate")?;
    let prov = run.provenance(c.hyperparams.seed);
    let raw = integrate_mg(&c.task.mg, c.task.transient_mg + c.generate_duration_mg).context("integrating Mackey-Glass")?;
    let skip = (c.task.transient_mg / c.task.mg.step).round() as usize;
    let tail = raw.slice(skip, raw.len() - skip)?;
    let normalized = normalize_mg(&tail);
    let resampled = resample(&normalized, c.task.sample_dt_mg)?;
    for (name, series) in [("mg_raw.csv", &tail), ("mg_normalized.csv", &normalized), ("mg_resampled.csv", &resampled)] {
        let mut f = create(&dir.join(name))?;
        series.write_csv(&mut f, &prov)?;
        f.flush()?;
    }
    println!(
        "generated {} MG units: normalised variance {:.4}, {} resampled points -> {}",
        c.generate_duration_mg,
        normalized.variance(),
        resampled.len(),
        dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct SeedReport {
    seed: u64,
    nrmse: Vec<f64>,
    ridge_param: f64,
    training_error: f64,
    loo_error: f64,
}

#[derive(Serialize)]
struct PredictionReport {
    seeds: Vec<SeedReport>,
    median_nrmse: f64,
    reference_nrmse: f64,
    reference_nrmse_error: f64,
    scored_samples: usize,
}

fn predict(run: &Run, seed: u64) -> Result<(ReservoirSpec, PredictionOutcome)> {
    let hp = run.hp(seed);
    let spec = build_reservoir(&hp).with_context(|| format!("building reservoir for seed {seed}"))?;
    let data = PredictionData::generate(&run.config.task, &hp).context("generating training data")?;
    let outcome = run_prediction(&spec, &data, &run.config.task).with_context(|| format!("prediction for seed {seed}"))?;
    Ok((spec, outcome))
}

fn cmd_train_predict(run: &Run) -> Result<()> {
    let dir = run.dir("train_predict")?;
    let mut seeds = Vec::new();
    let mut all = Vec::new();
    for &seed in &run.config.seeds {
        let (spec, outcome) = predict(run, seed)?;
        #[derive(Serialize)]
        struct Model<'a> {
            spec: &'a ReservoirSpec,
            readout: &'a boolres::io::TrainedReadout,
        }
        write_json(&dir.join(format!("model_seed{seed}.json")), run, seed, Model {
            spec: &spec,
            readout: &outcome.readout,
        })?;
        let mut f = create(&dir.join(format!("prediction_seed{seed}.csv")))?;
        header(&mut f, &run.provenance(seed))?;
        writeln!(f, "trial,step,time_mg,truth,predicted")?;
        for (j, trial) in outcome.trials.iter().enumerate() {
            let predicted = trial.predicted.in_mg_units();
            for (i, (t, p)) in trial.truth.values.iter().zip(&predicted.values).enumerate() {
                writeln!(f, "{j},{i},{},{t},{p}", trial.truth.time(i))?;
            }
        }
        f.flush()?;
        if let Some(trial) = outcome.trials.first() {
            let predicted = trial.predicted.in_mg_units();
            let pts = |s: &boolres::mackey_glass::TimeSeries| -> Vec<(f64, f64)> {
                (0..s.len()).map(|i| (s.time(i), s.values[i])).collect()
            };
            let (truth_pts, pred_pts) = (pts(&trial.truth), pts(&predicted));
            let svg = render(
                &format!("closed-loop prediction, seed {seed}"),
                "time (MG units)",
                "u",
                &[
                    Trace { label: "truth", points: &truth_pts, scatter: false },
                    Trace { label: "prediction", points: &pred_pts, scatter: false },
                ],
            );
            write_text(&dir.join(format!("prediction_seed{seed}.svg")), &svg)?;
        }
        let nrmse = outcome.nrmse_values();
        info!("seed {seed}: NRMSE {nrmse:?}");
        all.extend(nrmse.iter().copied());
        seeds.push(SeedReport {
            seed,
            nrmse,
            ridge_param: outcome.readout.ridge_param,
            training_error: outcome.readout.training_error,
            loo_error: outcome.readout.loo_error,
        });
    }
    let report = PredictionReport {
        seeds,
        median_nrmse: median(&all),
        reference_nrmse: REFERENCE_NRMSE.0,
        reference_nrmse_error: REFERENCE_NRMSE.1,
        scored_samples: run.config.task.scored_samples(),
    };
    println!(
        "median NRMSE over one Lyapunov time ({} samples): {:.4} (hardware reference {} ± {})",
        report.scored_samples, report.median_nrmse, REFERENCE_NRMSE.0, REFERENCE_NRMSE.1
    );
    write_json(&dir.join("report.json"), run, run.config.seeds[0], report)
}

fn cmd_decay(run: &Run) -> Result<()> {
    let dir = run.dir("decay")?;
    let mut f = create(&dir.join("decay.csv"))?;
    header(&mut f, &run.provenance(run.config.seeds[0]))?;
    writeln!(f, "seed,lambda_ns,stderr_ns,repetitions,discarded")?;
    for &seed in &run.config.seeds {
        let spec = build_reservoir(&run.hp(seed)).with_context(|| format!("building reservoir for seed {seed}"))?;
        let r = measure_decay_time(&spec, &run.config.decay).with_context(|| format!("decay for seed {seed}"))?;
        println!("seed {seed}: λ = {:.2} ± {:.2} ns", r.lambda_ns, r.stderr_ns);
        writeln!(
            f,
            "{seed},{},{},{},{}",
            r.lambda_ns,
            r.stderr_ns,
            r.per_repetition_ns.len(),
            r.discarded
        )?;
    }
    f.flush()?;
    Ok(())
}

fn default_grids(paper_scale: bool) -> Vec<SweepGrid> {
    let grids = [
        (SweepAxis::Rho, vec![0.5, 1.0, 1.5, 2.0]),
        (SweepAxis::K, vec![1.0, 2.0, 3.0, 4.0]),
        (SweepAxis::TauBar, vec![4.0, 6.0, 8.0, 9.5, 11.0, 14.0]),
        (SweepAxis::Sigma, vec![0.25, 0.5, 0.75, 1.0]),
    ];
    grids
        .into_iter()
        .map(|(axis, values)| {
            let mut g = SweepGrid::new(axis, values);
            if paper_scale {
                g.reservoirs_per_point = 5;
                g.trials_per_reservoir = 5;
            }
            g
        })
        .collect()
}

fn cmd_sweep(run: &Run, args: &SweepArgs, paper_scale: bool) -> Result<()> {
    let dir = run.dir("sweep")?;
    let mut grids = if run.config.sweeps.is_empty() {
        default_grids(paper_scale)
    } else {
        run.config.sweeps.clone()
    };
    if let Some(axis) = args.axis {
        let axis = SweepAxis::from(axis);
        grids.retain(|g| g.axis == axis);
        if !args.values.is_empty() {
            let mut g = grids.pop().unwrap_or_else(|| SweepGrid::new(axis, Vec::new()));
            g.values = args.values.clone();
            grids = vec![g];
        }
        if grids.is_empty() {
            bail!("no sweep grid configured for axis {}", axis.name());
        }
    }
    for grid in &mut grids {
        grid.measure_decay |= args.decay;
    }
    let base = &run.config.hyperparams;
    for grid in &grids {
        let points = run_sweep(grid, base, &run.config.task, &run.config.decay)
            .with_context(|| format!("sweep over {}", grid.axis.name()))?;
        let name = grid.axis.name();
        let mut f = create(&dir.join(format!("sweep_{name}.csv")))?;
        write_sweep_csv(&points, &mut f, &run.provenance(base.seed))?;
        f.flush()?;
        let medians: Vec<(f64, f64)> = points.iter().map(|p| (p.value, p.nrmse_median)).collect();
        let each: Vec<(f64, f64)> = points.iter().flat_map(|p| p.nrmse.iter().map(move |&v| (p.value, v))).collect();
        let svg = render(
            &format!("NRMSE vs {name}"),
            name,
            "NRMSE",
            &[
                Trace { label: "median", points: &medians, scatter: false },
                Trace { label: "trials", points: &each, scatter: true },
            ],
        );
        write_text(&dir.join(format!("sweep_{name}.svg")), &svg)?;
        for p in &points {
            println!(
                "{name} = {}: median NRMSE {:.4} (mean {:.4} ± {:.4}){}",
                p.value,
                p.nrmse_median,
                p.nrmse_mean,
                p.nrmse_stderr,
                if p.lambda_ns.is_empty() {
                    String::new()
                } else {
                    format!(", λ {:.2} ± {:.2} ns", p.lambda_mean, p.lambda_stderr)
                }
            );
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SpectrumReport {
    nrmse: f64,
    free_run_peak_per_mg: f64,
    true_peak_per_mg: f64,
    relative_peak_offset: f64,
    embed_delay_mg: f64,
    embedding_inside_inflated_box: bool,
}

fn cmd_spectrum(run: &Run, args: &SpectrumArgs) -> Result<()> {
    if !(args.lyapunov_times > 0.0) {
        bail!("--lyapunov-times must be positive");
    }
    let dir = run.dir("spectrum")?;
    let seed = run.config.seeds[0];
    let task = boolres::experiment::PredictionTask {
        free_run_cycles: Some((args.lyapunov_times * LYAPUNOV_TIME_MG / run.config.task.sample_dt_mg).ceil() as usize),
        trials: 1,
        ..run.config.task.clone()
    };
    let hp = run.hp(seed);
    let spec = build_reservoir(&hp).context("building reservoir")?;
    let data = PredictionData::generate(&task, &hp).context("generating data")?;
    let outcome = run_prediction(&spec, &data, &task).context("free run")?;
    let trial = &outcome.trials[0];
    let free = trial.predicted.in_mg_units();
    let truth = &trial.truth;
    let fs = power_spectrum(&free).context("free-run spectrum")?;
    let ft = power_spectrum(truth).context("true spectrum")?;
    let prov = run.provenance(seed);

    let mut f = create(&dir.join("spectrum.csv"))?;
    header(&mut f, &prov)?;
    writeln!(f, "freq_per_mg,power_free_run,power_true")?;
    for ((fr, a), b) in fs.freqs.iter().zip(&fs.power).zip(&ft.power) {
        writeln!(f, "{fr},{a},{b}")?;
    }
    f.flush()?;

    let emb_free = delay_embed(&free, DEFAULT_EMBED_DELAY_MG)?;
    let emb_true = delay_embed(truth, DEFAULT_EMBED_DELAY_MG)?;
    for (name, pts) in [("embedding_free_run.csv", &emb_free), ("embedding_true.csv", &emb_true)] {
        let mut f = create(&dir.join(name))?;
        header(&mut f, &prov)?;
        writeln!(f, "u_t,u_t_minus_delay")?;
        for (a, b) in pts.iter() {
            writeln!(f, "{a},{b}")?;
        }
        f.flush()?;
    }
    let bbox = BoundingBox::of(&emb_true).context("empty true embedding")?.inflate(0.2);
    let inside = emb_free.iter().all(|&p| bbox.contains(p));

    let spec_free: Vec<(f64, f64)> = fs.freqs.iter().copied().zip(fs.power.iter().copied()).collect();
    let spec_true: Vec<(f64, f64)> = ft.freqs.iter().copied().zip(ft.power.iter().copied()).collect();
    write_text(
        &dir.join("spectrum.svg"),
        &render(
            "normalised power spectrum",
            "frequency (1 / MG unit)",
            "power",
            &[
                Trace { label: "true", points: &spec_true, scatter: false },
                Trace { label: "free run", points: &spec_free, scatter: false },
            ],
        ),
    )?;
    write_text(
        &dir.join("embedding.svg"),
        &render(
            &format!("delay embedding, lag {DEFAULT_EMBED_DELAY_MG} MG units"),
            "u(t)",
            "u(t - lag)",
            &[
                Trace { label: "true", points: &emb_true, scatter: true },
                Trace { label: "free run", points: &emb_free, scatter: true },
            ],
        ),
    )?;
    let report = SpectrumReport {
        nrmse: trial.nrmse,
        free_run_peak_per_mg: fs.peak_freq,
        true_peak_per_mg: ft.peak_freq,
        relative_peak_offset: (fs.peak_freq - ft.peak_freq).abs() / ft.peak_freq,
        embed_delay_mg: DEFAULT_EMBED_DELAY_MG,
        embedding_inside_inflated_box: inside,
    };
    println!(
        "free-run peak {:.5} vs true {:.5} per MG unit ({:.1} % off); embedding inside 20 % box: {inside}",
        fs.peak_freq,
        ft.peak_freq,
        100.0 * report.relative_peak_offset
    );
    write_json(&dir.join("report.json"), run, seed, report)
}

fn cmd_emit_hdl(run: &Run, args: &EmitArgs) -> Result<()> {
    let dir = run.dir("hdl")?;
    let seed = run.config.seeds[0];
    let bundle = if args.appendix {
        emit(&appendix_example(), 1, None)?
    } else {
        let hp = run.hp(seed);
        if args.trained {
            let (spec, outcome) = predict(run, seed)?;
            emit(&spec, hp.input_bits, Some(&outcome.readout))?
        } else {
            let spec = build_reservoir(&hp).context("building reservoir")?;
            emit(&spec, hp.input_bits, None)?
        }
    };
    bundle.write_to_dir(&dir).with_context(|| format!("writing HDL to {}", dir.display()))?;
    #[derive(Serialize)]
    struct Provenance {
        appendix_example: bool,
        trained: bool,
    }
    write_json(&dir.join("provenance.json"), run, seed, Provenance {
        appendix_example: args.appendix,
        trained: args.trained,
    })?;
    println!(
        "{} nodes, {} delay lines -> {}",
        bundle.manifest.n_nodes,
        bundle.manifest.n_delay_lines,
        dir.display()
    );
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let config = load_config(&cli)?;
    let hash = config_hash(&config)?;
    let run = Run {
        out: PathBuf::from(&config.output_dir),
        config,
        hash,
    };
    match &cli.command {
        Command::Generate => cmd_generate(&run).context("generate"),
        Command::TrainPredict => cmd_train_predict(&run).context("train-predict"),
        Command::Decay => cmd_decay(&run).context("decay"),
        Command::Sweep(args) => cmd_sweep(&run, args, cli.paper_scale).context("sweep"),
        Command::Spectrum(args) => cmd_spectrum(&run, args).context("spectrum"),
        Command::EmitHdl(args) => cmd_emit_hdl(&run, args).context("emit-hdl"),
    }
}
