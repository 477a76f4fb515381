//! Command-line front end. Every subcommand writes its files through an
//! [`Outputs`] guard that deletes them again if the command fails.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::consistency::{cycle_energy, geometric_loss, occlusion_mask};
use crate::error::{Error, Result};
use crate::estimator::estimate_batched;
use crate::grid::{Direction, FrameGrid};
use crate::harness::drift::{chain_frames, drift_experiment};
use crate::harness::metrics::{sensitivity_sweep, warping_error, FlowSource, SWEEP_ALPHA1, SWEEP_ALPHA2};
use crate::harness::noise::{NoiseKind, VarianceLaw};
use crate::harness::theorems::{theorem_scene, verify_theorem1, verify_theorem2, ErrorSeries};
use crate::io::config::RunConfig;
use crate::io::flo::{read_flo, write_flo};
use crate::io::pnm::{read_mask, read_pnm, write_mask, write_pnm};
use crate::io::report::{config_hash, Table};
use crate::motion::Refresh;
use crate::synth::{render, shipped_scenes, valid_area_curve, Anchor};

#[derive(Debug, Parser)]
#[command(name = "eulerflow", version, about = "Dense motion-field experiments")]
pub struct Cli {
    /// Seed for all randomness (default: $EULERFLOW_SEED or 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run configuration file (`key = value` with `[section]` headers).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a scene with its ground truth into a directory.
    Synth(SynthArgs),
    /// Estimate flows between consecutive frames of a directory.
    Estimate(EstimateArgs),
    /// Occlusion mask and cycle energy of a forward/backward pair.
    Mask(MaskArgs),
    /// Masked reconstruction loss of one frame pair.
    Loss(LossArgs),
    /// Anchored-error growth experiment.
    Theorem1(Theorem1Args),
    /// Per-step error uniformity experiment.
    Theorem2(Theorem2Args),
    /// Anchored versus per-step chain drift.
    Drift(DriftArgs),
    /// Threshold sensitivity table.
    Sweep(SweepArgs),
    /// Flow-aligned warping error of a frame directory.
    Ewarp(EwarpArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Scene preset; overrides the configured scene.
    #[arg(long)]
    scene: Option<String>,
    #[arg(long)]
    frames: Option<usize>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// Directory of `.pgm`/`.ppm` frames, read in file-name order.
    #[arg(long)]
    frames: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Also write backward fields.
    #[arg(long)]
    bidirectional: bool,
}

#[derive(Debug, Args)]
struct MaskArgs {
    #[arg(long)]
    fwd: PathBuf,
    #[arg(long)]
    bwd: PathBuf,
    /// Mask PGM (valid = 255).
    #[arg(long)]
    out_mask: PathBuf,
    /// Cycle energy PGM, scaled by its maximum.
    #[arg(long)]
    out_energy: Option<PathBuf>,
    #[arg(long)]
    alpha1: Option<f64>,
    #[arg(long)]
    alpha2: Option<f64>,
}

#[derive(Debug, Args)]
struct LossArgs {
    /// Frame warped by the flow (frame t+1 for a forward field).
    #[arg(long)]
    source: PathBuf,
    /// Frame compared against (frame t).
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    flow: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Gaussian,
    StudentT,
    UniformDisk,
}

impl From<KindArg> for NoiseKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Gaussian => NoiseKind::Gaussian,
            KindArg::StudentT => NoiseKind::StudentT,
            KindArg::UniformDisk => NoiseKind::UniformDisk,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LawArg {
    Constant,
    LinearInT,
}

impl From<LawArg> for VarianceLaw {
    fn from(l: LawArg) -> Self {
        match l {
            LawArg::Constant => VarianceLaw::Constant,
            LawArg::LinearInT => VarianceLaw::LinearInT,
        }
    }
}

#[derive(Debug, Args)]
struct NoiseArgs {
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    /// Target norm kurtosis for `student-t` errors.
    #[arg(long)]
    kappa: Option<f64>,
}

#[derive(Debug, Args)]
struct Theorem1Args {
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long, default_value_t = 256)]
    horizon: usize,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct Theorem2Args {
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long, default_value_t = 256)]
    horizon: usize,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DriftArgs {
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long, value_enum)]
    variance_law: Option<LawArg>,
    #[arg(long)]
    pixel_sigma: Option<f64>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long, default_value_t = 50)]
    seeds: usize,
    /// Scene preset (default `drift_default` unless a config is given).
    #[arg(long)]
    scene: Option<String>,
    /// Output directory for the CSV and final frames.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FlowArg {
    Analytic,
    Noisy,
    Estimated,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    scene: Option<String>,
    #[arg(long, default_value_t = 20)]
    frames: usize,
    #[arg(long, value_enum, default_value_t = FlowArg::Estimated)]
    flows: FlowArg,
    /// Std-dev of the flow perturbation for `--flows noisy`, px.
    #[arg(long, default_value_t = 0.3)]
    flow_sigma: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EwarpArgs {
    #[arg(long)]
    frames: PathBuf,
}

// Report hashes cover the resolved settings but not file paths, so equal
// configurations give byte-identical CSVs wherever they are written.

/// Files and directories created by a command, removed again on failure.
#[derive(Default)]
struct Outputs {
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
}

impl Outputs {
    fn dir(&mut self, path: &Path) -> Result<PathBuf> {
        if !path.exists() {
            std::fs::create_dir_all(path)?;
            self.dirs.push(path.to_path_buf());
        }
        Ok(path.to_path_buf())
    }

    fn file(&mut self, path: PathBuf) -> PathBuf {
        self.files.push(path.clone());
        path
    }

    fn discard(self) {
        for f in &self.files {
            let _ = std::fs::remove_file(f);
        }
        for d in self.dirs.iter().rev() {
            let _ = std::fs::remove_dir_all(d);
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let mut outputs = Outputs::default();
    match run(cli, &mut outputs) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            outputs.discard();
            ExitCode::FAILURE
        }
    }
}

fn base_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::from_env()?;
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read config {}: {e}", path.display())))?;
        cfg = cfg.apply(&text)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn apply_noise(cfg: &mut RunConfig, args: &NoiseArgs) {
    if let Some(s) = args.sigma {
        cfg.noise.sigma = s;
    }
    if let Some(k) = args.kind {
        cfg.noise.kind = k.into();
    }
    if let Some(k) = args.kappa {
        cfg.noise.kurtosis_target = Some(k);
        if args.kind.is_none() {
            cfg.noise.kind = NoiseKind::StudentT;
        }
    }
}

fn preset(cfg: &mut RunConfig, name: &Option<String>) -> Result<()> {
    if let Some(name) = name {
        cfg.scene = shipped_scenes()
            .into_iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
            .ok_or_else(|| {
                let names: Vec<&str> = shipped_scenes().iter().map(|(n, _)| *n).collect();
                Error::invalid(format!("unknown scene {name:?}; known: {}", names.join(", ")))
            })?;
    }
    Ok(())
}

fn image_name(prefix: &str, index: usize, grid: &FrameGrid) -> String {
    let ext = if grid.channels() == 1 { "pgm" } else { "ppm" };
    format!("{prefix}_{index:03}.{ext}")
}

/// Three-channel copy of a frame; grey frames are replicated.
fn rgb(frame: &FrameGrid) -> Result<FrameGrid> {
    match frame.channels() {
        3 => Ok(frame.clone()),
        1 => FrameGrid::from_fn(frame.width(), frame.height(), 3, |x, y, _| frame.get(x, y, 0) as f64),
        c => Err(Error::invalid(format!("cannot show a {c}-channel frame as RGB"))),
    }
}

fn read_frames(dir: &Path) -> Result<Vec<FrameGrid>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::invalid(format!("cannot read frame directory {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "pgm" || x == "ppm"))
        .filter(|p| p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("frame")))
        .collect();
    paths.sort();
    if paths.len() < 2 {
        return Err(Error::invalid(format!(
            "{} holds fewer than 2 frame_*.pgm/ppm files",
            dir.display()
        )));
    }
    paths.iter().map(|p| read_pnm(p)).collect()
}

fn series_table(s: &ErrorSeries) -> Table {
    let mut t = Table::new(&[
        "t",
        "mean_epe",
        "mean_sq_epe",
        "valid_fraction",
        "bound_value",
        "kurtosis_hat",
        "seeds_used",
    ]);
    for i in 0..s.len() {
        t.push(vec![
            s.t[i].to_string(),
            s.mean_epe[i].to_string(),
            s.mean_sq_epe[i].to_string(),
            s.valid_fraction[i].to_string(),
            s.bound_value[i].to_string(),
            s.kurtosis_hat[i].to_string(),
            s.seeds_used.to_string(),
        ]);
    }
    t
}

fn run(cli: Cli, out: &mut Outputs) -> Result<()> {
    let mut cfg = base_config(&cli)?;
    match &cli.command {
        Command::Synth(a) => {
            preset(&mut cfg, &a.scene)?;
            if let Some(n) = a.frames {
                cfg.horizon = n;
            }
            let cfg = cfg.validated()?;
            let b = render(&cfg.scene, cfg.horizon)?;
            let dir = out.dir(&a.out)?;
            for (t, f) in b.frames.iter().enumerate() {
                write_pnm(&out.file(dir.join(image_name("frame", t, f))), f)?;
            }
            for t in 0..b.fwd_flows.len() {
                write_flo(&out.file(dir.join(format!("fwd_{t:03}.flo"))), &b.fwd_flows[t])?;
                write_flo(&out.file(dir.join(format!("bwd_{t:03}.flo"))), &b.bwd_flows[t])?;
                write_mask(&out.file(dir.join(format!("occ_{t:03}.pgm"))), &b.occlusion[t])?;
                write_flo(&out.file(dir.join(format!("cum_{:03}.flo", t + 1))), &b.cum_flows[t])?;
            }
            let reference = valid_area_curve(&b, Anchor::Reference);
            let adjacent = valid_area_curve(&b, Anchor::Adjacent);
            let mut table = Table::new(&["t", "reference", "adjacent"]);
            for t in 0..reference.len() {
                table.push(vec![t.to_string(), reference[t].to_string(), adjacent[t].to_string()]);
            }
            table.write(
                &out.file(dir.join("valid_area.csv")),
                &config_hash(&("synth", &cfg)),
                cfg.seed,
            )?;
            eprintln!("wrote {} frames to {}", b.frames.len(), dir.display());
        }
        Command::Estimate(a) => {
            let cfg = cfg.validated()?;
            let frames = read_frames(&a.frames)?;
            let (fwd, bwd) = estimate_batched(&frames, &cfg.estimator, a.workers)?;
            let dir = out.dir(&a.out)?;
            for (t, f) in fwd.iter().enumerate() {
                write_flo(&out.file(dir.join(format!("fwd_{t:03}.flo"))), f)?;
            }
            if a.bidirectional {
                for (t, f) in bwd.iter().enumerate() {
                    write_flo(&out.file(dir.join(format!("bwd_{t:03}.flo"))), f)?;
                }
            }
            eprintln!("estimated {} pairs with {} workers", fwd.len(), a.workers);
        }
        Command::Mask(a) => {
            if let Some(v) = a.alpha1 {
                cfg.bgc.alpha1 = v;
            }
            if let Some(v) = a.alpha2 {
                cfg.bgc.alpha2 = v;
            }
            let cfg = cfg.validated()?;
            let fwd = read_flo(&a.fwd)?;
            let bwd = read_flo(&a.bwd)?.with_frames(Direction::Backward, 1, 0);
            let mask = occlusion_mask(&fwd, &bwd, &cfg.bgc)?;
            write_mask(&out.file(a.out_mask.clone()), &mask)?;
            if let Some(path) = &a.out_energy {
                let e = cycle_energy(&fwd, &bwd)?;
                let max = e.max();
                let scale = if max > 0.0 { 1.0 / max } else { 0.0 };
                let img = FrameGrid::from_fn(e.width(), e.height(), 1, |x, y, _| e.get(x, y) * scale)?;
                write_pnm(&out.file(path.clone()), &img)?;
            }
            println!("{}", mask.valid_fraction());
        }
        Command::Loss(a) => {
            let cfg = cfg.validated()?;
            let source = read_pnm(&a.source)?;
            let target = read_pnm(&a.target)?;
            let flow = read_flo(&a.flow)?;
            let mask = read_mask(&a.mask)?;
            let loss = geometric_loss(&source, &target, &flow, &mask, &cfg.bgc)?;
            if let Some(path) = &a.csv {
                let mut t = Table::new(&["loss", "valid_fraction"]);
                t.push(vec![loss.to_string(), mask.valid_fraction().to_string()]);
                t.write(&out.file(path.clone()), &config_hash(&("loss", &cfg)), cfg.seed)?;
            }
            println!("{loss}");
        }
        Command::Theorem1(a) => {
            apply_noise(&mut cfg, &a.noise);
            cfg.noise.variance_law = VarianceLaw::LinearInT;
            let cfg = cfg.validated()?;
            let r = verify_theorem1(&cfg.seeded_noise(), a.horizon, a.trials)?;
            series_table(&r.series).write(
                &out.file(a.out.clone()),
                &config_hash(&("theorem1", a.horizon, a.trials, &cfg)),
                cfg.seed,
            )?;
            eprintln!(
                "log-log slope {:.4} (target 0.4..0.6), proof bound holds: {}, min ratio to sigma*sqrt(t): {:.4}",
                r.loglog_slope, r.bound_holds, r.stated_ratio
            );
        }
        Command::Theorem2(a) => {
            apply_noise(&mut cfg, &a.noise);
            cfg.noise.variance_law = VarianceLaw::Constant;
            let cfg = cfg.validated()?;
            let r = verify_theorem2(&cfg.seeded_noise(), a.horizon, a.trials, &theorem_scene())?;
            series_table(&r.series).write(
                &out.file(a.out.clone()),
                &config_hash(&("theorem2", a.horizon, a.trials, &cfg)),
                cfg.seed,
            )?;
            eprintln!(
                "max mean_epe {:.4} (bound {:.4}), slope {:.2e} px/step",
                r.max_mean_epe, r.bound, r.slope
            );
        }
        Command::Drift(a) => {
            apply_noise(&mut cfg, &a.noise);
            if let Some(l) = a.variance_law {
                cfg.noise.variance_law = l.into();
            }
            if let Some(p) = a.pixel_sigma {
                cfg.noise.pixel_sigma = p;
            }
            if let Some(n) = a.frames {
                cfg.horizon = n;
            }
            match (&a.scene, &cli.config) {
                (None, None) => preset(&mut cfg, &Some("drift_default".to_string()))?,
                _ => preset(&mut cfg, &a.scene)?,
            }
            let cfg = cfg.validated()?;
            let noise = cfg.seeded_noise();
            let r = drift_experiment(&cfg.scene, &noise, cfg.horizon, a.seeds)?;
            let dir = out.dir(&a.out)?;
            let mut table = Table::new(&[
                "seed",
                "eulerian_final_epe",
                "lagrangian_final_epe",
                "eulerian_final_rmse",
                "lagrangian_final_rmse",
            ]);
            for o in &r.outcomes {
                table.push(vec![
                    o.seed.to_string(),
                    o.eulerian.final_endpoint().to_string(),
                    o.lagrangian.final_endpoint().to_string(),
                    o.eulerian.final_photometric.to_string(),
                    o.lagrangian.final_photometric.to_string(),
                ]);
            }
            let hash = config_hash(&("drift", a.seeds, &cfg));
            table.write(&out.file(dir.join("drift.csv")), &hash, cfg.seed)?;
            let (e, l) = r.mean_endpoint_series();
            let mut series = Table::new(&["t", "eulerian_epe", "lagrangian_epe"]);
            for t in 0..e.len() {
                series.push(vec![(t + 1).to_string(), e[t].to_string(), l[t].to_string()]);
            }
            series.write(&out.file(dir.join("drift_series.csv")), &hash, cfg.seed)?;
            let bundle = render(&cfg.scene, cfg.horizon)?;
            for (name, refresh) in [
                ("eulerian", Refresh::EulerianStep),
                ("lagrangian", Refresh::LagrangianAnchor),
            ] {
                let frames = chain_frames(&bundle, &noise, refresh)?;
                let last = rgb(frames.last().expect("non-empty chain"))?;
                write_pnm(
                    &out.file(dir.join(image_name(&format!("{name}_final"), cfg.horizon - 1, &last))),
                    &last,
                )?;
            }
            let truth = rgb(bundle.frames.last().expect("non-empty"))?;
            write_pnm(
                &out.file(dir.join(image_name("truth_final", cfg.horizon - 1, &truth))),
                &truth,
            )?;
            match r.eulerian_win_fraction {
                Some(f) => eprintln!(
                    "per-step refresh wins on {:.1}% of decided seeds ({} ties); 80% is the acceptance threshold",
                    100.0 * f,
                    r.ties
                ),
                None => eprintln!("all {} seeds tie", r.ties),
            }
        }
        Command::Sweep(a) => {
            preset(&mut cfg, &a.scene)?;
            let cfg = cfg.validated()?;
            let source = match a.flows {
                FlowArg::Analytic => FlowSource::Analytic,
                FlowArg::Noisy => FlowSource::Noisy {
                    sigma: a.flow_sigma,
                    seed: cfg.seed,
                },
                FlowArg::Estimated => FlowSource::Estimated(cfg.estimator),
            };
            let rows = sensitivity_sweep(&SWEEP_ALPHA1, &SWEEP_ALPHA2, &cfg.scene, a.frames, &source)?;
            let mut t = Table::new(&["alpha1", "alpha2", "iou", "loss", "valid_fraction"]);
            for r in &rows {
                t.push(vec![
                    r.alpha1.to_string(),
                    r.alpha2.to_string(),
                    r.iou.to_string(),
                    r.loss.to_string(),
                    r.valid_fraction.to_string(),
                ]);
            }
            t.write(
                &out.file(a.out.clone()),
                &config_hash(&("sweep", a.frames, a.flows, a.flow_sigma, &cfg)),
                cfg.seed,
            )?;
        }
        Command::Ewarp(a) => {
            let cfg = cfg.validated()?;
            let frames = read_frames(&a.frames)?;
            println!("{}", warping_error(&frames, &cfg.estimator)?);
        }
    }
    Ok(())
}
