//! Command-line front end. The `omk` binary only parses arguments and calls [`execute`].
//!
//! Every output file starts with the hash of the canonical config, so reruns with the
//! same config and seed produce byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::estimate::{cooling_curve, Pipeline, PipelineMode};
use crate::model::{total_occupation, Regime};
use crate::noisebudget::budget;
use crate::oracle::{covariance_spectrum_with, equivalence_check, timedomain_check, Fault, TimeDomainOptions};
use crate::presets::Setup;
use crate::spectra::{
    heterodyne_spectrum_with, homodyne_theta_spectrum_with, inloop_spectrum, linspace, loop_damping, n_imp_hom,
    optimal_gain, sideband_weights_with, visibility, FeedbackConfig, InLoopMode, Spectrum,
};

#[derive(Debug, Parser)]
#[command(name = "omk", version, about = "Spectra, oracles and sideband estimation for a feedback-cooled optomechanical oscillator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads for the parallel parts.
    #[arg(long, global = true, value_name = "N", env = "OMK_THREADS")]
    pub threads: Option<usize>,
    /// spectrum: also write the covariance-oracle spectrum.
    #[arg(long, global = true)]
    pub oracle: bool,
    /// Evaluate closed forms outside the weak-coupling, bad-cavity regime.
    #[arg(long, global = true)]
    pub allow_out_of_regime: bool,
    /// oracle-check: corrupt one coefficient of the oracle (scale-c, mirror-omega, drop-a-resonance).
    #[arg(long, global = true, value_name = "NAME")]
    pub fault_inject: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Heterodyne and homodyne spectra as CSV.
    Spectrum,
    /// Cooling curve over a log-spaced gain grid.
    Sweep,
    /// Classical-noise report as JSON.
    NoiseBudget,
    /// Both oracles against the closed forms; nonzero exit on disagreement.
    OracleCheck,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Sweep => "sweep",
            Command::NoiseBudget => "noise-budget",
            Command::OracleCheck => "oracle-check",
        }
    }
}

/// What a command did.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub files: Vec<PathBuf>,
    pub message: String,
}

/// Runs the command on a thread pool of the requested size and maps errors to exit codes.
pub fn execute(cli: &Cli) -> i32 {
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return 2;
        }
    };
    match pool.install(|| run(cli)) {
        Ok(out) => {
            if !out.message.is_empty() {
                if out.code == 0 {
                    println!("{}", out.message);
                } else {
                    eprintln!("{}", out.message);
                }
            }
            out.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config PATH is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let fault = cli.fault_inject.as_deref().map(Fault::from_name).transpose()?;
    let ctx = Context {
        hash: cfg.hash()?,
        setup: cfg.setup()?,
        cfg,
        base: path.parent().map(Path::to_path_buf),
        out: cli.out.clone(),
        command: cli.command,
    };
    prepare_out(&ctx.out)?;
    match cli.command {
        Command::Spectrum => cmd_spectrum(&ctx, cli.oracle, cli.allow_out_of_regime),
        Command::Sweep => cmd_sweep(&ctx),
        Command::NoiseBudget => cmd_noise_budget(&ctx),
        Command::OracleCheck => cmd_oracle_check(&ctx, fault),
    }
}

struct Context {
    cfg: RunConfig,
    setup: Setup,
    hash: String,
    base: Option<PathBuf>,
    out: PathBuf,
    command: Command,
}

impl Context {
    /// `# key=value ...` metadata line.
    fn header(&self, extra: &[(&str, String)]) -> String {
        let mut h = format!(
            "# config_hash={} command={} seed={} version={}",
            self.hash,
            self.command.name(),
            self.cfg.seed,
            env!("CARGO_PKG_VERSION")
        );
        for (k, v) in extra {
            let _ = write!(h, " {k}={v}");
        }
        h
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.out.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Config(format!("output directory {}: {e}", dir.display())))?;
    let probe = dir.join(".omk-write-test");
    std::fs::write(&probe, b"")
        .and_then(|_| std::fs::remove_file(&probe))
        .map_err(|e| Error::Config(format!("output directory {} is not writable: {e}", dir.display())))
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn csv(header: String, columns: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = header;
    s.push('\n');
    s.push_str(&columns.join(","));
    s.push('\n');
    for row in rows {
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn spectrum_csv(ctx: &Context, kind: &str, s: &Spectrum, extra: &[(&str, String)]) -> String {
    let mut meta = vec![
        ("kind", kind.to_string()),
        ("sidedness", ser_name(&s.sidedness)),
        ("normalization", ser_name(&s.normalization)),
    ];
    meta.extend(extra.iter().cloned());
    csv(
        ctx.header(&meta),
        &["omega_rad_s", "psd"],
        s.grid.iter().zip(&s.values).map(|(w, v)| vec![num(*w), num(*v)]),
    )
}

fn ser_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|j| j.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// Linear windows of `points` samples at `±center` (heterodyne) or `+center` (homodyne).
fn grids(ctx: &Context) -> Result<(Vec<f64>, Vec<f64>)> {
    let s = &ctx.setup;
    let g = &ctx.cfg.grid;
    let tau = std::f64::consts::TAU;
    let center = g.center_hz.map_or(s.system.omega_m, |c| tau * c);
    let linewidth = s.system.gamma_m * (1.0 + s.feedback.g_fb);
    let span = g.span_hz.map_or(40.0 * linewidth, |v| tau * v);
    if span >= 2.0 * center {
        return Err(Error::invalid("grid.span_hz", "must be smaller than twice grid.center_hz"));
    }
    let pos = linspace(center - 0.5 * span, center + 0.5 * span, g.points);
    let mut het: Vec<f64> = pos.iter().rev().map(|w| -w).collect();
    het.extend(&pos);
    Ok((het, pos))
}

fn feedback_of(s: &Setup) -> Option<&FeedbackConfig> {
    (s.feedback.g_fb > 0.0).then_some(&s.feedback)
}

fn cmd_spectrum(ctx: &Context, oracle: bool, allow: bool) -> Result<Outcome> {
    let s = &ctx.setup;
    let (p, n, d, conv) = (&s.system, &s.noise, &s.detection, &s.conventions);
    let regime = if allow { Regime::unchecked() } else { Regime::default() };
    regime.check(p)?;
    let (het_grid, hom_grid) = grids(ctx)?;
    let fb = feedback_of(s);

    let het = heterodyne_spectrum_with(&het_grid, p, n, d, fb, conv)?;
    let w = sideband_weights_with(p, n, d, fb, conv)?;
    let r = w.ratio();
    let het_meta = [
        ("g_fb", num(s.feedback.g_fb)),
        ("w_lower", num(w.lower)),
        ("w_upper", num(w.upper)),
        ("r", num(r)),
        ("visibility", num(visibility(r))),
    ];
    let mut files = vec![ctx.write("heterodyne.csv", &spectrum_csv(ctx, "heterodyne", &het, &het_meta))?];

    let hom = homodyne_theta_spectrum_with(&hom_grid, p, n, d, true, &regime, conv)?;
    let hom_meta = [("theta_rad", num(d.theta)), ("feedback", "open-loop".to_string())];
    files.push(ctx.write("homodyne.csv", &spectrum_csv(ctx, "homodyne", &hom, &hom_meta))?);

    if let Some(fb) = fb {
        let consistent = inloop_spectrum(&hom_grid, p, n, d, fb, InLoopMode::ClosedLoopConsistent)?;
        let literal = inloop_spectrum(&hom_grid, p, n, d, fb, InLoopMode::ThreeTerm)?;
        let meta = [
            ("kind", "inloop".to_string()),
            ("sidedness", ser_name(&consistent.sidedness)),
            ("normalization", ser_name(&consistent.normalization)),
            ("g_fb", num(fb.g_fb)),
        ];
        let rows = (0..hom_grid.len())
            .map(|i| vec![num(hom_grid[i]), num(consistent.values[i]), num(literal.values[i])]);
        let text = csv(ctx.header(&meta), &["omega_rad_s", "closed_loop_consistent", "three_term"], rows);
        files.push(ctx.write("inloop.csv", &text)?);
    }

    let mut message = format!("R = {r:.6}, 1 - R = {:.4}%", 100.0 * (1.0 - r));
    if oracle {
        // the covariance oracle has no feedback loop: compare open-loop spectra
        let closed = heterodyne_spectrum_with(&het_grid, p, n, d, None, conv)?;
        let exact = covariance_spectrum_with(&het_grid, p, n, d, None)?;
        let dev: Vec<f64> = closed.values.iter().zip(&exact.values).map(|(c, e)| (e - c) / c).collect();
        let max = dev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let bound = 5.0 * crate::model::approximation_scale(p);
        let meta = [
            ("kind", "heterodyne-oracle".to_string()),
            ("sidedness", ser_name(&exact.sidedness)),
            ("normalization", ser_name(&exact.normalization)),
            ("feedback", "open-loop".to_string()),
            ("max_rel_dev", num(max)),
            ("bound", num(bound)),
        ];
        let rows = (0..het_grid.len())
            .map(|i| vec![num(het_grid[i]), num(closed.values[i]), num(exact.values[i]), num(dev[i])]);
        let text = csv(ctx.header(&meta), &["omega_rad_s", "closed_form", "oracle", "rel_dev"], rows);
        files.push(ctx.write("heterodyne_oracle.csv", &text)?);
        let _ = write!(message, "; oracle max relative deviation {max:.3e} (bound {bound:.3e})");
    }
    Ok(Outcome { code: 0, files, message })
}

fn cmd_sweep(ctx: &Context) -> Result<Outcome> {
    let s = &ctx.setup;
    let gains = ctx.cfg.gains()?;
    let mut pipe = match ctx.cfg.sweep.mode {
        crate::config::SweepMode::ClosedForm => Pipeline::closed_form(*s),
        crate::config::SweepMode::Synthetic => {
            Pipeline::synthetic(*s, ctx.cfg.sweep.acquisition.to_acquisition(), ctx.cfg.seed)
        }
    };
    pipe.fit = ctx.cfg.fit_options();
    let points = cooling_curve(&gains, &pipe);
    let ok = points.iter().filter(|p| p.is_ok()).count();

    let n_tot = total_occupation(&s.system, &s.noise, s.conventions.backaction);
    let imp = n_imp_hom(&s.system, &s.detection);
    let mode = match pipe.mode {
        PipelineMode::ClosedForm => "closed-form",
        PipelineMode::Synthetic { .. } => "synthetic",
    };
    let meta = [
        ("mode", mode.to_string()),
        ("n_tot", num(n_tot)),
        ("n_imp_hom", num(imp)),
        ("g_opt", num(optimal_gain(&s.system, &s.noise, &s.detection))),
        ("n_m_min_high_gain", num(2.0 * (n_tot * imp).sqrt() - 0.5)),
        ("ok", format!("{ok}/{}", points.len())),
    ];
    let columns = [
        "g_fb",
        "gamma_fb",
        "R",
        "dR",
        "n_m_R",
        "dn_m_R",
        "n_m_area",
        "dn_m_area",
        "n_m_high_gain",
        "n_m_closed_loop",
        "status",
    ];
    let rows = points.iter().map(|p| {
        let mut row: Vec<String> = [
            p.g_fb,
            p.gamma_fb,
            p.r,
            p.dr,
            p.n_m_from_r,
            p.dn_m_from_r,
            p.n_m_from_area,
            p.dn_m_from_area,
            p.n_m_high_gain,
            p.n_m_closed_loop,
        ]
        .iter()
        .map(|v| num(*v))
        .collect();
        // statuses may carry error text; keep the CSV one field per column
        row.push(if p.status.contains([',', '"']) {
            format!("\"{}\"", p.status.replace('"', "'"))
        } else {
            p.status.clone()
        });
        row
    });
    let file = ctx.write("cooling_curve.csv", &csv(ctx.header(&meta), &columns, rows))?;
    let pass = 5 * ok >= 4 * points.len();
    Ok(Outcome {
        code: if pass { 0 } else { 4 },
        files: vec![file],
        message: format!("{ok}/{} points ok", points.len()),
    })
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    config_hash: &'a str,
    command: &'a str,
    #[serde(flatten)]
    body: T,
}

fn json<T: Serialize>(ctx: &Context, body: T) -> Result<String> {
    let r = Report { config_hash: &ctx.hash, command: ctx.command.name(), body };
    let mut s = serde_json::to_string_pretty(&r).map_err(|e| Error::Numerical(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn cmd_noise_budget(ctx: &Context) -> Result<Outcome> {
    let (rin, freq) = ctx.cfg.measurements(ctx.base.as_deref())?;
    let nb = ctx.cfg.noise_budget.as_ref().expect("checked by measurements()");
    let report = budget(&ctx.setup.system, &rin, &freq, nb.c_qp, &nb.thresholds)?;
    let file = ctx.write("noise_budget.json", &json(ctx, &report)?)?;
    if !report.covariance.valid {
        return Ok(Outcome {
            code: 2,
            files: vec![file],
            message: format!("invalid input covariance: {}", report.covariance.witness),
        });
    }
    Ok(Outcome {
        code: 0,
        files: vec![file],
        message: format!(
            "n_phi = {:.4e}, excursion bound = {:.3e}: {}",
            report.n_phi, report.excursion_probability_bound, report.verdict
        ),
    })
}

#[derive(Serialize)]
struct OracleSummary {
    fault: Option<String>,
    covariance: crate::oracle::EquivalenceCheck,
    timedomain: Option<crate::oracle::TimeDomainCheck>,
    timedomain_note: String,
    pass: bool,
}

fn cmd_oracle_check(ctx: &Context, fault: Option<Fault>) -> Result<Outcome> {
    let s = &ctx.setup;
    let (p, n, d) = (&s.system, &s.noise, &s.detection);
    let cov = equivalence_check(p, n, d, &s.conventions, fault)?;

    let t = &ctx.cfg.trajectory;
    let (td, note) = if p.cooperativity() == 0.0 {
        (None, "skipped: no measurement coupling, nothing to feed back".to_string())
    } else {
        let g = t.g_fb.unwrap_or(if s.feedback.g_fb > 0.0 {
            s.feedback.g_fb
        } else {
            optimal_gain(p, n, d)
        });
        let fb = FeedbackConfig { g_fb: g, ..s.feedback };
        let opts = TimeDomainOptions {
            dt: t.dt_s,
            duration: t.duration_s,
            burn_in: t.burn_in_s,
            scheme: t.scheme,
            seeds: (0..t.seeds as u64).map(|i| ctx.cfg.seed.wrapping_add(i)).collect(),
            ..TimeDomainOptions::default()
        };
        let gamma_eff = loop_damping(p, &fb).0;
        let check = timedomain_check(p, n, d, &fb, &opts)?;
        (Some(check), format!("g_fb = {g:.6e}, closed-loop rate {gamma_eff:.6e} rad/s"))
    };
    let pass = cov.pass && td.as_ref().is_none_or(|c| c.pass);
    let summary = OracleSummary {
        fault: fault.map(|f| f.name()),
        covariance: cov,
        timedomain: td,
        timedomain_note: note,
        pass,
    };
    let file = ctx.write("oracle_check.json", &json(ctx, &summary)?)?;
    let mut message = format!(
        "covariance: max rel dev {:.3e} (bound {:.3e}){}",
        summary.covariance.max_rel_dev,
        summary.covariance.bound,
        if summary.covariance.applicable { "" } else { " [not applicable]" }
    );
    if let Some(c) = &summary.timedomain {
        let _ = write!(
            message,
            "; time domain: n_m {:.4} vs {:.4}, in-loop rms dev {:.3}",
            c.n_m_simulated, c.n_m_closed_form, c.inloop_rms_dev
        );
    }
    let _ = write!(message, "; {}", if pass { "PASS" } else { "FAIL" });
    Ok(Outcome { code: if pass { 0 } else { 4 }, files: vec![file], message })
}
