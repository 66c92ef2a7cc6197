use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use brainex::cascade::{conform, extract_brain, restore_native_grid, RoiEntry, Status};
use brainex::config::PipelineConfig;
use brainex::defaults::{ModelId, CONFORM_SIDE, CONFORM_SPACING};
use brainex::metrics::overlap_report;
use brainex::nifti::{read_nifti, read_nifti_as, write_nifti, DataType};
use brainex::predictor::protocol::{serve, ServeOptions};
use brainex::predictor::NoiseSpec;
use brainex::simulate::{run_simulation, SimulationSpec};
use brainex::synth::{generate_batch, LabelSource, SynthesisParams};
use brainex::volume::BoundingBox;
use brainex::windowing::{coverage_counts, plan_windows_within, AccumulateMode};
use brainex::{Volume, VolumeKind};

const EXIT_NO_BRAIN: u8 = 2;
/// clap's own usage-error code is 2, which is taken by "no brain found".
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "brainex", version, about = "Sliding-window cascade brain extraction")]
struct Cli {
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (outputs do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Pipeline configuration (JSON).
    #[arg(long, global = true, env = "BRAINEX_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Extract the brain mask of a NIfTI volume.
    Extract(ExtractArgs),
    /// Generate synthetic training pairs.
    Synth(SynthArgs),
    /// Compare a predicted mask with a reference mask.
    Eval(EvalArgs),
    /// Paired single-pass vs. cascade simulation with noisy oracles.
    Simulate(SimulateArgs),
    /// Print the sliding-window plan for a volume.
    Plan(PlanArgs),
    /// Predictor-protocol test server.
    #[command(hide = true)]
    ServeFixture(ServeArgs),
}

#[derive(Args)]
struct ExtractArgs {
    input: PathBuf,
    output: PathBuf,
    /// Region trace JSON [default: <output>.roi.json]
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Label map to synthesize from.
    #[arg(long, conflicts_with = "phantom")]
    labelmap: Option<PathBuf>,
    /// Use built-in random phantoms (the default without --labelmap).
    #[arg(long)]
    phantom: bool,
    /// Take synthesis ranges from this model's defaults.
    #[arg(long, value_parser = parse_model, conflicts_with = "params")]
    model: Option<ModelId>,
    /// Synthesis parameters as JSON.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long)]
    outdir: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    pred: PathBuf,
    gt: PathBuf,
    /// Append one CSV row here (header written when the file is new).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Case id for the CSV row [default: prediction file name]
    #[arg(long)]
    id: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Sum,
    Mean,
}

#[derive(Args)]
struct SimulateArgs {
    /// Noise specification JSON; overrides --per-voxel-fp.
    #[arg(long)]
    noise_spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    per_voxel_fp: f64,
    #[arg(long, default_value_t = 20)]
    seeds: usize,
    #[arg(long, default_value_t = CONFORM_SIDE)]
    side: usize,
    #[arg(long, value_enum, default_value_t = Mode::Sum)]
    mode: Mode,
    /// Per-seed CSV output.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Full JSON report.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    /// `N` or `N0,N1,N2`
    #[arg(long, value_parser = parse_dims)]
    dims: [usize; 3],
    #[arg(long)]
    window: usize,
    #[arg(long)]
    step: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ServeArgs {
    /// Answer every voxel with this value.
    #[arg(long, conflicts_with = "echo")]
    constant: Option<f32>,
    /// Answer with the patch itself.
    #[arg(long)]
    echo: bool,
    #[arg(long)]
    advertise_window: Option<u32>,
    #[arg(long)]
    die_after: Option<usize>,
    /// Sleep before every answer.
    #[arg(long)]
    stall_ms: Option<u64>,
}

fn parse_model(s: &str) -> Result<ModelId, String> {
    s.parse()
}

fn parse_dims(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("bad dimension `{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [n] => Ok([n; 3]),
        [a, b, c] => Ok([a, b, c]),
        _ => Err("expected N or N0,N1,N2".into()),
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    config: Option<&'a Path>,
    seed: u64,
    inputs: Vec<&'a Path>,
    outputs: Vec<&'a Path>,
    version: &'static str,
    timestamp_unix: u64,
}

impl<'a> RunManifest<'a> {
    fn new(command: &'a str, cli: &'a Cli) -> Self {
        RunManifest {
            command,
            config: cli.config.as_deref(),
            seed: cli.seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            version: env!("CARGO_PKG_VERSION"),
            timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        }
    }

    fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn load_config(cli: &Cli) -> Result<(PipelineConfig, PathBuf)> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| anyhow!("no pipeline config: pass --config or set BRAINEX_CONFIG"))?;
    let cfg = PipelineConfig::from_path(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, base))
}

#[derive(Serialize)]
struct TraceFile<'a> {
    status: Status,
    native_dims: [usize; 3],
    native_spacing: [f64; 3],
    conform_side: usize,
    conform_spacing: f64,
    roi_trace: &'a [RoiEntry],
    stage_voxels: Vec<(String, usize)>,
    mask_voxels: usize,
}

fn cmd_extract(cli: &Cli, a: &ExtractArgs) -> Result<u8> {
    let (cfg, base) = load_config(cli)?;
    let input = read_nifti_as(&a.input, VolumeKind::Intensity)?;
    let cascade = cfg.build(&base, cli.seed)?;
    let res = extract_brain(&input, &cascade)?;
    let native = restore_native_grid(&res.mask, input.dims(), input.spacing())?;
    write_nifti(&native, &a.output, DataType::Uint8)?;

    let trace_path = a.trace.clone().unwrap_or_else(|| with_suffix(&a.output, ".roi.json"));
    write_json(
        &trace_path,
        &TraceFile {
            status: res.status,
            native_dims: input.dims(),
            native_spacing: input.spacing(),
            conform_side: cascade.conform_side,
            conform_spacing: cascade.conform_spacing,
            roi_trace: &res.roi_trace,
            stage_voxels: res.stage_masks.iter().map(|(n, m)| (n.clone(), m.count_nonzero())).collect(),
            mask_voxels: native.count_nonzero(),
        },
    )?;
    let manifest_path = with_suffix(&a.output, ".manifest.json");
    let mut m = RunManifest::new("extract", cli);
    m.inputs.push(&a.input);
    m.outputs.extend([a.output.as_path(), trace_path.as_path()]);
    m.write(&manifest_path)?;

    match res.status {
        Status::Ok => {
            writeln!(io::stdout(), "brain found: {} voxels -> {}", native.count_nonzero(), a.output.display())?;
            Ok(0)
        }
        Status::NoBrainFound => {
            eprintln!("no brain found; wrote empty mask to {}", a.output.display());
            Ok(EXIT_NO_BRAIN)
        }
    }
}

fn cmd_synth(cli: &Cli, a: &SynthArgs) -> Result<u8> {
    let params = match (&a.model, &a.params) {
        (Some(m), _) => SynthesisParams::for_model(*m),
        (None, Some(p)) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        (None, None) => bail!("pass --model A..D or --params <json>"),
    };
    let source = match &a.labelmap {
        Some(p) => LabelSource::LabelMap(read_nifti_as(p, VolumeKind::Label)?),
        None => LabelSource::Phantom,
    };
    let records = generate_batch(&source, &params, a.count, cli.seed, &a.outdir)?;
    let mut m = RunManifest::new("synth", cli);
    if let Some(p) = &a.labelmap {
        m.inputs.push(p);
    }
    m.outputs.push(&a.outdir);
    m.write(&a.outdir.join("manifest.json"))?;
    writeln!(io::stdout(), "wrote {} pairs ({}³) to {}", records.len(), params.window, a.outdir.display())?;
    Ok(0)
}

fn read_binary(path: &Path) -> Result<Volume> {
    let v = read_nifti(path)?;
    let data = v.data().iter().map(|&x| (x != 0.0) as u8 as f32).collect();
    let mask = Volume::from_vec(v.dims(), v.spacing(), VolumeKind::Mask, data)?;
    Ok(conform(&mask, CONFORM_SIDE, CONFORM_SPACING)?)
}

fn cmd_eval(a: &EvalArgs) -> Result<u8> {
    let pred = read_binary(&a.pred)?;
    let gt = read_binary(&a.gt)?;
    let rep = overlap_report(&pred, &gt, [CONFORM_SPACING; 3])?;
    writeln!(io::stdout(), "{}", serde_json::to_string_pretty(&rep)?)?;
    if let Some(csv) = &a.csv {
        let fresh = fs::metadata(csv).map_or(true, |m| m.len() == 0);
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(csv)
            .with_context(|| format!("opening {}", csv.display()))?;
        let id = a
            .id
            .clone()
            .unwrap_or_else(|| a.pred.file_name().map_or_else(String::new, |s| s.to_string_lossy().into()));
        rep.write_csv_row(&id, file, fresh)?;
    }
    Ok(0)
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs) -> Result<u8> {
    let noise = match &a.noise_spec {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => NoiseSpec::per_voxel(a.per_voxel_fp),
    };
    let spec = SimulationSpec {
        seeds: a.seeds,
        master_seed: cli.seed,
        side: a.side,
        noise,
        accumulate_mode: match a.mode {
            Mode::Sum => AccumulateMode::Sum,
            Mode::Mean => AccumulateMode::Mean,
        },
    };
    let rep = run_simulation(&spec)?;
    write!(io::stdout(), "{}", rep.summary())?;
    if let Some(p) = &a.csv {
        let f = fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
        rep.write_csv(f)?;
    }
    if let Some(p) = &a.report {
        write_json(p, &rep)?;
    }
    Ok(0)
}

fn cmd_plan(a: &PlanArgs) -> Result<u8> {
    let plan = plan_windows_within(BoundingBox::full(a.dims), a.window, a.step, a.dims)?;
    let cov = coverage_counts(&plan);
    let (lo, hi) = cov.min_max();
    if a.json {
        writeln!(io::stdout(), "{}", serde_json::to_string_pretty(&plan)?)?;
        return Ok(0);
    }
    let mut out = io::stdout().lock();
    writeln!(out, "dims {:?} window {} step {}: {} windows", a.dims, a.window, a.step, plan.len())?;
    for o in &plan.origins {
        writeln!(out, "{} {} {}", o[0], o[1], o[2])?;
    }
    writeln!(out, "coverage min {lo} max {hi}")?;
    Ok(0)
}

fn cmd_serve(a: &ServeArgs) -> Result<u8> {
    let opts = ServeOptions {
        advertise_window: a.advertise_window,
        die_after: a.die_after,
    };
    let constant = a.constant.unwrap_or(0.5);
    let stall = a.stall_ms.map(Duration::from_millis);
    serve(io::stdin().lock(), io::stdout().lock(), &opts, |w, _origin, patch| {
        if let Some(d) = stall {
            std::thread::sleep(d);
        }
        if a.echo {
            patch.to_vec()
        } else {
            vec![constant; w * w * w]
        }
    })?;
    Ok(0)
}

fn run(cli: &Cli) -> Result<u8> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Cmd::Extract(a) => cmd_extract(cli, a),
        Cmd::Synth(a) => cmd_synth(cli, a),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Simulate(a) => cmd_simulate(cli, a),
        Cmd::Plan(a) => cmd_plan(a),
        Cmd::ServeFixture(a) => cmd_serve(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        // a closed downstream pipe (`| head`) is not a failure
        Err(e) if e.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            // library errors already embed their cause in the message
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
