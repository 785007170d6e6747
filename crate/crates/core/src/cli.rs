//! Command-line front end: argument parsing, run orchestration and output files.
//!
//! Every run writes a CSV whose leading `#` lines echo the tool version and
//! the fully resolved config, plus a `<stem>.meta.toml` sidecar that parses
//! back into the same config. Numbers are written with nine significant
//! digits and LF line endings, so identical inputs give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bloch::{propagate, BlochVector, PhysicsParams, SimGrid};
use crate::config::{emit_config, parse_unresolved, Mode, RunConfig};
use crate::ensemble::{ensemble_spectrum, rescale_to_match_peak, spectrum_for_detunings};
use crate::error::{Error, Result};
use crate::noise::{noise_stats, ou_trace, FitStatus, NoiseStats};
use crate::spectrum::{averaged_spectrum, Metadata, Spectrum};
use crate::tpi::{averaged_hom, CombineOptions, TpiCurve};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Horizon and step of the free-decay self-check.
const DECAY_CHECK_T: f64 = 3.0;
const DECAY_CHECK_DT: f64 = 1e-3;
const DECAY_CHECK_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(
    name = "pulsed-emitter",
    version,
    about = "Spectra and two-photon interference of pulse-driven emitters"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Emission spectrum of one emitter, averaged over noise realizations.
    Spectrum(RunArgs),
    /// Hong-Ou-Mandel cross-correlation of two emitters.
    Tpi(TpiArgs),
    /// Summed spectrum of an ensemble with static Gaussian detunings.
    Ensemble(RunArgs),
    /// One detuning trace and its fitted statistics.
    Noise(RunArgs),
    /// Checks free decay of the excited population against exp(-gamma t).
    DecayCheck(RunArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub realizations: Option<usize>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Also write an SVG plot.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TpiArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Divide by the distinguishable-photon background.
    #[arg(long)]
    pub normalized: bool,
}

impl Command {
    fn parts(&self) -> (Mode, &RunArgs, bool) {
        match self {
            Command::Spectrum(a) => (Mode::Spectrum, a, false),
            Command::Tpi(a) => (Mode::Tpi, &a.run, a.normalized),
            Command::Ensemble(a) => (Mode::Ensemble, a, false),
            Command::Noise(a) => (Mode::Noise, a, false),
            Command::DecayCheck(a) => (Mode::DecayCheck, a, false),
        }
    }
}

/// Outcome of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    /// Human-readable summary for stdout.
    pub message: String,
    /// False only when a self-check failed.
    pub success: bool,
}

/// Builds the resolved config for a command: file, then flag overrides.
pub fn load_config(command: &Command) -> Result<RunConfig> {
    let (mode, args, normalized) = command.parts();
    let raw = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            parse_unresolved(&text)?
        }
        None => RunConfig::empty(mode),
    };
    let mut cfg = raw.with_mode(mode)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(r) = args.realizations {
        cfg.realizations = Some(r);
    }
    if let Some(t) = args.threads {
        cfg.threads = Some(t);
    }
    cfg.output.svg |= args.svg;
    cfg.output.normalized |= normalized;
    cfg.resolve()
}

/// Parses arguments, runs, and returns the report.
pub fn execute(cli: &Cli) -> Result<RunReport> {
    let cfg = load_config(&cli.command)?;
    let (_, args, _) = cli.command.parts();
    run(&cfg, &args.out)
}

/// Runs a resolved config, writing outputs into `out_dir`.
pub fn run(config: &RunConfig, out_dir: &Path) -> Result<RunReport> {
    match config.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("threads: {e}")))?;
            pool.install(|| run_inner(config, out_dir))
        }
        None => run_inner(config, out_dir),
    }
}

fn run_inner(config: &RunConfig, out_dir: &Path) -> Result<RunReport> {
    if config.mode() == Mode::DecayCheck {
        return decay_check(config);
    }
    fs::create_dir_all(out_dir)?;
    let mut out = Output::new(config, out_dir);
    let message = match config.mode() {
        Mode::Spectrum => {
            let spec = averaged_spectrum(
                &config.emitter_config()?,
                config.realizations.unwrap_or(1),
                config.seed,
                &config.omega_values()?,
            )?;
            out.spectrum("spectrum", &spec)?;
            summarize_spectrum(&spec)
        }
        Mode::Tpi => {
            let (c1, c2) = config.emitter_pair()?;
            let opts = CombineOptions {
                interference: true,
                normalized: config.output.normalized,
            };
            let curve = averaged_hom(
                &c1,
                &c2,
                config.realizations.unwrap_or(1),
                config.seed,
                opts,
            )?;
            out.tpi(&curve)?;
            format!("g2_34: {} lags, max {:.6e}", curve.g2_34.len(), curve.max())
        }
        Mode::Ensemble => {
            let spec = config.ensemble_spec()?;
            let omegas = config.omega_values()?;
            let driven = ensemble_spectrum(&spec, &omegas)?;
            out.spectrum("ensemble", &driven)?;
            let detunings = spec.detunings();
            out.table(
                "detunings",
                "index,delta",
                detunings.iter().enumerate().map(|(k, d)| (k as f64, *d)),
                &Metadata::new(),
                true,
            )?;
            if config.ensemble.is_some_and(|e| e.reference) {
                let free = SimGrid::free(spec.grid.dt(), spec.grid.n_steps())?;
                let undriven = spectrum_for_detunings(&detunings, &free, &spec.physics, &omegas)?;
                let mut scaled = rescale_to_match_peak(&undriven, &driven)?;
                scaled
                    .metadata
                    .insert("rescaled_to".into(), "ensemble peak".into());
                out.spectrum("ensemble_reference", &scaled)?;
            }
            summarize_spectrum(&driven)
        }
        Mode::Noise => {
            let g = config.grid.unwrap_or_default();
            let (dt, n) = (g.dt.unwrap_or(1e-3), g.n_steps.unwrap_or(0));
            let trace = ou_trace(&config.noise_process()?, dt, n)?;
            let stats = noise_stats(&trace, dt)?;
            let mut meta = Metadata::new();
            stats_metadata(&stats, &mut meta);
            out.table(
                "noise",
                "t,delta",
                trace.iter().enumerate().map(|(k, d)| (k as f64 * dt, *d)),
                &meta,
                false,
            )?;
            format_stats(&stats)
        }
        Mode::DecayCheck => unreachable!(),
    };
    Ok(RunReport {
        files: out.files,
        message,
        success: true,
    })
}

fn decay_check(config: &RunConfig) -> Result<RunReport> {
    let physics = PhysicsParams::new(config.physics.gamma)?;
    let n = (DECAY_CHECK_T / DECAY_CHECK_DT).round() as usize;
    let grid = SimGrid::free(DECAY_CHECK_DT, n)?;
    let traj = propagate(&BlochVector::excited(), &grid, &vec![0.0; n], &physics)?;
    let err = traj
        .iter()
        .enumerate()
        .map(|(k, s)| (s.rho_ee.re - (-physics.gamma * k as f64 * DECAY_CHECK_DT).exp()).abs())
        .fold(0.0, f64::max);
    let success = err < DECAY_CHECK_TOL;
    Ok(RunReport {
        files: Vec::new(),
        message: format!(
            "decay-check: max |rho_ee - exp(-gamma t)| = {err:.3e} over t in [0, {DECAY_CHECK_T}] (dt = {DECAY_CHECK_DT}): {}",
            if success { "ok" } else { "FAILED" }
        ),
        success,
    })
}

fn summarize_spectrum(spec: &Spectrum) -> String {
    let k = spec.argmax();
    let fwhm = spec
        .fwhm_at(k)
        .map_or("n/a".to_string(), |w| format!("{w:.4}"));
    format!(
        "spectrum: {} points, peak at omega = {:.4}, FWHM {fwhm}",
        spec.p.len(),
        spec.omega_grid[k]
    )
}

fn stats_metadata(s: &NoiseStats, m: &mut Metadata) {
    m.insert("fit.mean".into(), s.mean.to_string());
    m.insert("fit.std".into(), s.std.to_string());
    m.insert(
        "fit.tau_c".into(),
        s.tau_c.map_or("none".into(), |t| t.to_string()),
    );
    m.insert("fit.status".into(), status_name(s.fit).into());
}

fn status_name(f: FitStatus) -> &'static str {
    match f {
        FitStatus::Converged => "converged",
        FitStatus::Degenerate => "degenerate",
        FitStatus::ResolutionLimited => "resolution-limited",
        FitStatus::NotConverged => "not-converged",
    }
}

fn format_stats(s: &NoiseStats) -> String {
    let tau = s.tau_c.map_or("n/a".to_string(), |t| format!("{t:.6}"));
    format!(
        "noise: mean = {:.6}, std = {:.6}, tau_c = {tau} ({})",
        s.mean,
        s.std,
        status_name(s.fit)
    )
}

/// Number format shared by every output file.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.8e}")
}

struct Output<'a> {
    config: &'a RunConfig,
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl<'a> Output<'a> {
    fn new(config: &'a RunConfig, dir: &'a Path) -> Self {
        Self {
            config,
            dir,
            files: Vec::new(),
        }
    }

    fn header(&self, derived: &Metadata) -> String {
        let mut h = format!("# pulsed-emitter {VERSION}\n");
        for line in emit_config(self.config).lines() {
            let _ = writeln!(h, "{}", format!("# {line}").trim_end());
        }
        for (k, v) in derived {
            let _ = writeln!(h, "# derived {k} = {v}");
        }
        h
    }

    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, text)?;
        self.files.push(path);
        Ok(())
    }

    fn table(
        &mut self,
        stem: &str,
        columns: &str,
        rows: impl Iterator<Item = (f64, f64)>,
        derived: &Metadata,
        integer_index: bool,
    ) -> Result<()> {
        let mut text = self.header(derived);
        text.push_str(columns);
        text.push('\n');
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (x, y) in rows {
            if integer_index {
                let _ = writeln!(text, "{},{}", x as u64, fmt_num(y));
            } else {
                let _ = writeln!(text, "{},{}", fmt_num(x), fmt_num(y));
            }
            xs.push(x);
            ys.push(y);
        }
        self.write(&format!("{stem}.csv"), &text)?;

        let mut sidecar = format!("# pulsed-emitter {VERSION}\n");
        for (k, v) in derived {
            let _ = writeln!(sidecar, "# derived {k} = {v}");
        }
        sidecar.push_str(&emit_config(self.config));
        self.write(&format!("{stem}.meta.toml"), &sidecar)?;

        if self.config.output.svg && !integer_index {
            let (xl, yl) = columns.split_once(',').unwrap_or(("x", "y"));
            self.write(&format!("{stem}.svg"), &render_svg(&xs, &ys, xl, yl, stem))?;
        }
        Ok(())
    }

    fn spectrum(&mut self, stem: &str, spec: &Spectrum) -> Result<()> {
        self.table(
            stem,
            "omega,p",
            spec.omega_grid.iter().copied().zip(spec.p.iter().copied()),
            &spec.metadata,
            false,
        )
    }

    fn tpi(&mut self, curve: &TpiCurve) -> Result<()> {
        self.table(
            "tpi",
            "theta,g2_34",
            curve
                .theta_grid
                .iter()
                .copied()
                .zip(curve.g2_34.iter().copied()),
            &curve.metadata,
            false,
        )
    }
}

/// Minimal line plot with labelled axis extents.
pub fn render_svg(xs: &[f64], ys: &[f64], xlabel: &str, ylabel: &str, title: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 50.0;
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() && hi > lo {
            (lo, hi)
        } else {
            (lo.min(0.0), lo.max(0.0) + 1.0)
        }
    };
    let (x0, x1) = range(xs);
    let (y0, y1) = range(ys);
    let px = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let py = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    );
    let _ = writeln!(s, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<path d=\"M{M} {M} V{b} H{r}\" fill=\"none\" stroke=\"black\"/>",
        b = H - M,
        r = W - M
    );
    let pts: Vec<String> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
        .collect();
    let _ = writeln!(
        s,
        "<polyline fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"1.2\" points=\"{}\"/>",
        pts.join(" ")
    );
    let text = |s: &mut String, x: f64, y: f64, anchor: &str, t: &str| {
        let _ = writeln!(
            s,
            "<text x=\"{x:.1}\" y=\"{y:.1}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"{anchor}\">{t}</text>"
        );
    };
    text(&mut s, W / 2.0, 25.0, "middle", title);
    text(&mut s, W / 2.0, H - 12.0, "middle", xlabel);
    text(&mut s, 14.0, H / 2.0, "start", ylabel);
    text(&mut s, M, H - M + 16.0, "middle", &format!("{x0:.3}"));
    text(&mut s, W - M, H - M + 16.0, "middle", &format!("{x1:.3}"));
    text(&mut s, M - 4.0, H - M, "end", &format!("{y0:.3e}"));
    text(&mut s, M - 4.0, M + 4.0, "end", &format!("{y1:.3e}"));
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_is_nine_digits() {
        assert_eq!(fmt_num(0.1), "1.00000000e-1");
        assert_eq!(fmt_num(-40.0), "-4.00000000e1");
        assert_eq!(fmt_num(0.0), "0.00000000e0");
    }

    #[test]
    fn svg_is_well_formed() {
        let s = render_svg(&[0.0, 1.0, 2.0], &[1.0, 3.0, 2.0], "omega", "p", "spectrum");
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert_eq!(s.matches("<polyline").count(), 1);
        // flat data must not divide by zero
        assert!(!render_svg(&[0.0, 1.0], &[0.0, 0.0], "x", "y", "t").contains("NaN"));
    }

    #[test]
    fn decay_check_passes() {
        let cfg = RunConfig::empty(Mode::DecayCheck).resolve().unwrap();
        let r = run(&cfg, Path::new(".")).unwrap();
        assert!(r.success, "{}", r.message);
        assert!(r.files.is_empty());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "[noise]\ndelta0 = 1.0\n[grid]\nt_total = 0.5\n").unwrap();
        let cmd = Command::Spectrum(RunArgs {
            config: Some(path),
            seed: Some(7),
            realizations: Some(3),
            ..Default::default()
        });
        let cfg = load_config(&cmd).unwrap();
        assert_eq!((cfg.seed, cfg.realizations), (7, Some(3)));
        let Command::Spectrum(a) = cmd else {
            unreachable!()
        };
        assert!(load_config(&Command::Tpi(TpiArgs {
            run: a,
            normalized: true
        }))
        .is_err());
    }
}
