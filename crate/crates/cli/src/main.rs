//! Command-line front end: track, eval, ablate, viz and synth.

mod seqs;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gmphd_mots::eval::{evaluate, EvalOptions, MetricReport};
use gmphd_mots::io::{load_frame, read_result_records, result_records, write_results, DetectionReader, ResultRecord, Thresholds};
use gmphd_mots::synth::{Scenario, Scene, SynthOptions};
use gmphd_mots::viz::render_sequence;
use gmphd_mots::{FrameResult, ObjectClass, Pipeline, Tracker, TrackerConfig};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "gmphd-mots", version, about = "Online multi-object tracking and segmentation")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track detections and write one result file per sequence.
    Track(TrackArgs),
    /// Score result files against ground truth.
    Eval(EvalArgs),
    /// Run pipelines p1 to p5 and print their scores side by side.
    Ablate(AblateArgs),
    /// Draw result masks and ids over the frames.
    Viz(VizArgs),
    /// Render a synthetic sequence with detections and ground truth.
    Synth(SynthArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Detection file, `{seq}` expands to the sequence name.
    #[arg(long)]
    dets: String,
    /// Frame images, e.g. `img/{seq}/{frame:06}.png`.
    #[arg(long)]
    imgs: Option<String>,
    /// Sequence names; discovered from `--dets` when omitted.
    #[arg(long, value_delimiter = ',')]
    seqs: Vec<String>,
    /// `key = value` parameter overrides.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Classes to track.
    #[arg(long, value_delimiter = ',', default_value = "car,ped")]
    classes: Vec<ObjectClass>,
}

#[derive(Args)]
struct TrackArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    out: PathBuf,
    /// p1 to p5; overrides the config file.
    #[arg(long)]
    pipeline: Option<Pipeline>,
}

#[derive(Args)]
struct EvalArgs {
    /// Ground-truth file, or a directory of per-sequence files.
    #[arg(long)]
    gt: PathBuf,
    /// Result file, or a directory with the same file names.
    #[arg(long)]
    res: PathBuf,
    /// Also write the `key = value` report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// `timing.txt` from `track`, to include FPS.
    #[arg(long)]
    timing: Option<PathBuf>,
    /// Count hypotheses inside ignore regions as false positives.
    #[arg(long)]
    no_ignore: bool,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Ground truth, `{seq}` expands to the sequence name.
    #[arg(long)]
    gt: String,
    /// Keep each pipeline's results under `out/p1` .. `out/p5`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VizArgs {
    #[arg(long)]
    res: PathBuf,
    /// Frame images, e.g. `img/{frame:06}.png`.
    #[arg(long)]
    imgs: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// crossing, occlusion, clutter or parallel.
    #[arg(long)]
    scenario: Scenario,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 40)]
    frames: u32,
    #[arg(long, default_value_t = 320)]
    width: u32,
    #[arg(long, default_value_t = 192)]
    height: u32,
    /// Probability of dropping each true detection.
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
    /// Maximum mask offset in pixels.
    #[arg(long, default_value_t = 0)]
    jitter: u32,
    /// Spurious detections per frame; scenario default when omitted.
    #[arg(long)]
    fp_rate: Option<f64>,
}

/// Bad flags or flag combinations; exits with 1 instead of 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(Usage(msg.into()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let run = match cli.cmd {
        Command::Track(a) => track(a),
        Command::Eval(a) => eval(a),
        Command::Ablate(a) => ablate(a),
        Command::Viz(a) => viz(a),
        Command::Synth(a) => synth(a),
    };
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<Usage>() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

struct SeqRun {
    name: String,
    results: Vec<FrameResult>,
    frames: u64,
    seconds: f64,
}

fn load_config(input: &InputArgs, pipeline: Option<Pipeline>) -> Result<TrackerConfig> {
    let mut cfg = TrackerConfig::default();
    if let Some(path) = &input.config {
        cfg.load_overrides(path).map_err(|e| usage(e.to_string()))?;
    }
    if let Some(p) = pipeline {
        cfg.pipeline = p;
    }
    if cfg.pipeline.uses_appearance() && input.imgs.is_none() {
        bail!(usage("this pipeline uses appearance and needs --imgs"));
    }
    Ok(cfg)
}

fn track_sequence(input: &InputArgs, name: &str, cfg: &TrackerConfig) -> Result<SeqRun> {
    let dets = seqs::substitute(&input.dets, name);
    let imgs = input.imgs.as_deref().map(|p| seqs::substitute(p, name));
    let reader = DetectionReader::open(&dets, Thresholds::from(cfg)).with_context(|| format!("opening {dets}"))?;
    let mut tracker = Tracker::new(cfg.clone());
    let mut run = SeqRun { name: name.to_string(), results: Vec::new(), frames: 0, seconds: 0.0 };
    for item in reader {
        let (frame, mut segs) = item?;
        segs.retain(|s| input.classes.contains(&s.class));
        let image = match &imgs {
            Some(p) if cfg.pipeline.uses_appearance() && !segs.is_empty() => Some(load_frame(p, frame, None)?),
            _ => None,
        };
        let start = Instant::now();
        run.results.push(tracker.step(frame, &segs, image.as_ref())?);
        run.seconds += start.elapsed().as_secs_f64();
        run.frames += 1;
    }
    Ok(run)
}

fn track_all(input: &InputArgs, cfg: &TrackerConfig) -> Result<Vec<SeqRun>> {
    let names = seqs::resolve(&input.dets, &input.seqs).map_err(|e| usage(e.to_string()))?;
    names
        .par_iter()
        .map(|n| track_sequence(input, n, cfg).with_context(|| format!("sequence {n}")))
        .collect()
}

fn fps(runs: &[SeqRun]) -> (u64, f64, f64) {
    let frames: u64 = runs.iter().map(|r| r.frames).sum();
    let secs: f64 = runs.iter().map(|r| r.seconds).sum();
    (frames, secs, if secs > 0.0 { frames as f64 / secs } else { 0.0 })
}

fn track(a: TrackArgs) -> Result<()> {
    let cfg = load_config(&a.input, a.pipeline)?;
    let runs = track_all(&a.input, &cfg)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for r in &runs {
        let path = a.out.join(format!("{}.txt", r.name));
        write_results(&path, &r.results).with_context(|| format!("sequence {}", r.name))?;
        let objects: usize = r.results.iter().map(|f| f.objects.len()).sum();
        println!("{}: {} frames, {} masks -> {}", r.name, r.frames, objects, path.display());
    }
    let (frames, secs, rate) = fps(&runs);
    std::fs::write(
        a.out.join("timing.txt"),
        format!("frames = {frames}\ntracker_seconds = {secs:.6}\nfps = {rate:.3}\n"),
    )?;
    println!("tracked {frames} frames in {secs:.3}s ({rate:.1} FPS)");
    Ok(())
}

fn read_or_empty(path: &Path) -> Result<Vec<ResultRecord>> {
    if path.exists() {
        Ok(read_result_records(path)?)
    } else {
        eprintln!("warning: {} missing, scored as empty", path.display());
        Ok(Vec::new())
    }
}

fn evaluate_pair(gt: &Path, res: &Path, opts: EvalOptions) -> Result<MetricReport> {
    let g = read_result_records(gt).with_context(|| format!("reading {}", gt.display()))?;
    let r = read_or_empty(res).with_context(|| format!("reading {}", res.display()))?;
    evaluate(&g, &r, opts).with_context(|| format!("scoring {}", gt.display()))
}

fn read_fps(path: &Path) -> Result<f64> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .filter_map(|l| l.split_once('='))
        .find(|(k, _)| k.trim() == "fps")
        .and_then(|(_, v)| v.trim().parse().ok())
        .ok_or_else(|| anyhow!("no fps entry in {}", path.display()))
}

fn eval(a: EvalArgs) -> Result<()> {
    let opts = EvalOptions { use_ignore_regions: !a.no_ignore };
    let mut report = if a.gt.is_dir() {
        if !a.res.is_dir() {
            bail!(usage("--res must be a directory when --gt is one"));
        }
        let mut files: Vec<PathBuf> = std::fs::read_dir(&a.gt)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        files.sort();
        let reports: Vec<MetricReport> = files
            .par_iter()
            .map(|g| evaluate_pair(g, &a.res.join(g.file_name().unwrap()), opts))
            .collect::<Result<_>>()?;
        reports.iter().fold(MetricReport::default(), |mut acc, r| {
            acc.merge(r);
            acc
        })
    } else {
        evaluate_pair(&a.gt, &a.res, opts)?
    };
    if let Some(t) = &a.timing {
        report.fps = Some(read_fps(t)?);
    }
    print!("{}", report.to_text());
    if let Some(path) = &a.report {
        std::fs::write(path, report.to_key_values()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn ablate(a: AblateArgs) -> Result<()> {
    // p5 needs frames, so check flags against it once
    let base = load_config(&a.input, Pipeline::preset(5))?;
    println!("{:<4} {:<5} {:>7} {:>7} {:>6} {:>6} {:>6} {:>6} {:>8}", "", "class", "sMOTSA", "MOTSA", "FP", "FN", "IDS", "FM", "FPS");
    for level in 1..=5 {
        let cfg = TrackerConfig { pipeline: Pipeline::preset(level).unwrap(), ..base.clone() };
        let runs = track_all(&a.input, &cfg)?;
        let mut report = MetricReport::default();
        for r in &runs {
            let gt = PathBuf::from(seqs::substitute(&a.gt, &r.name));
            let g = read_result_records(&gt).with_context(|| format!("reading {}", gt.display()))?;
            let res = result_records(&r.results)?;
            report.merge(&evaluate(&g, &res, EvalOptions::default())?);
            if let Some(out) = &a.out {
                let dir = out.join(format!("p{level}"));
                std::fs::create_dir_all(&dir)?;
                write_results(dir.join(format!("{}.txt", r.name)), &r.results)?;
            }
        }
        let rate = fps(&runs).2;
        for class in &a.input.classes {
            let c = report.class(*class);
            println!(
                "p{level:<3} {:<5} {:>7.1} {:>7.1} {:>6} {:>6} {:>6} {:>6} {:>8.1}",
                class.to_string(),
                c.smotsa(),
                c.motsa(),
                c.fp,
                c.fn_,
                c.ids,
                c.fm,
                rate
            );
        }
    }
    Ok(())
}

fn viz(a: VizArgs) -> Result<()> {
    let records = read_result_records(&a.res).with_context(|| format!("reading {}", a.res.display()))?;
    let summary = render_sequence(&records, &a.imgs, &a.out)?;
    for f in &summary.missing {
        eprintln!("warning: no image for frame {f}, skipped");
    }
    println!("wrote {} frames to {}", summary.written.len(), a.out.display());
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&a.dropout) {
        bail!(usage("--dropout must be in [0, 1]"));
    }
    if a.fp_rate.is_some_and(|r| !(r >= 0.0)) {
        bail!(usage("--fp-rate must be nonnegative"));
    }
    if a.width < 64 || a.height < 64 || a.frames == 0 {
        bail!(usage("frames must be positive and frames at least 64x64"));
    }
    let opts = SynthOptions {
        seed: a.seed,
        frames: a.frames,
        width: a.width,
        height: a.height,
        dropout: a.dropout,
        jitter: a.jitter,
        fp_rate: a.fp_rate,
    };
    Scene::new(a.scenario, opts).write(&a.out)?;
    println!(
        "wrote {} frames of {} to {} (dets.txt, gt.txt, img/{{frame:06}}.png)",
        a.frames,
        a.scenario.name(),
        a.out.display()
    );
    Ok(())
}
