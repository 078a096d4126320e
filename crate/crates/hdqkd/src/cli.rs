//! Argument parsing and command implementations.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use hdqkd_core::channel::{detection_prob, expected_tallies, Intensity};
use hdqkd_core::finite_key::analytic_key_rate;
use hdqkd_core::montecarlo::TrialConfig;
use hdqkd_core::optimizer::optimize;
use hdqkd_core::txpattern::{demo_sequence, TxCompiler};
use hdqkd_core::{Basis, Dimension};
use serde_json::json;

use crate::config::RunConfig;
use crate::parallel::{run_partitioned, run_with_event_log};
use crate::sweep::{run_sweep, to_csv};
use crate::timeline_io::{annotate, parse_sequence, read_timeline, write_timeline};
use crate::validate::{run_all, timeline_check};
use crate::AppError;

#[derive(Debug, Parser)]
#[command(
    name = "hdqkd",
    version,
    about = "Key-rate analysis and simulation for time-bin qudit QKD"
)]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print full diagnostics as JSON.
    #[arg(long, short, global = true)]
    pub verbose: bool,
    /// Protocol dimensions, e.g. `2,4`.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_dim)]
    pub dims: Option<Vec<Dimension>>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

fn parse_dim(s: &str) -> Result<Dimension, String> {
    let d: u32 = s
        .trim()
        .parse()
        .map_err(|_| format!("not a dimension: {s:?}"))?;
    Dimension::new(d).map_err(|e| e.to_string())
}

/// Overrides for the physical point shared by several commands.
#[derive(Debug, Clone, Default, Args)]
pub struct PointArgs {
    /// Fiber length in km.
    #[arg(long)]
    pub length: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub p_mu: Option<f64>,
    #[arg(long)]
    pub p_x: Option<f64>,
    /// Receiver excess loss in dB.
    #[arg(long)]
    pub rx_loss: Option<f64>,
    #[arg(long)]
    pub misalignment: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analytic secret key rate at one distance.
    Keyrate {
        #[command(flatten)]
        point: PointArgs,
    },
    /// Key rate over a range of distances, as CSV.
    Sweep {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long)]
        from: Option<f64>,
        #[arg(long)]
        to: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        /// Optimize the parameters at every distance.
        #[arg(long)]
        optimize: bool,
        /// Write the CSV here instead of stdout.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Pulse-level Monte Carlo run.
    Simulate {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long)]
        states: Option<u64>,
        /// Report true photon-number classes of sifted events.
        #[arg(long)]
        bookkeeping: bool,
        /// Line-delimited JSON log of every conclusive click (single-threaded).
        #[arg(long, value_name = "PATH")]
        event_log: Option<PathBuf>,
    },
    /// Maximize the key rate over mu, nu, p_mu and p_x.
    Optimize {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long)]
        budget: Option<usize>,
        /// Write the evaluation trace as CSV.
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
    },
    /// Compile a transmit sequence into a binary drive timeline.
    Txpattern {
        /// One `BASIS SYMBOL INTENSITY` per line; the 8-state demo if omitted.
        #[arg(long, value_name = "PATH")]
        sequence: Option<PathBuf>,
        #[arg(long, short, value_name = "PATH")]
        out: PathBuf,
        /// Per-frame annotations as JSON.
        #[arg(long, value_name = "PATH")]
        json_export: Option<PathBuf>,
        #[arg(long)]
        sample_rate: Option<u64>,
    },
    /// Run the embedded invariant suite.
    Validate {
        /// Also decode this timeline file.
        #[arg(long, value_name = "PATH")]
        timeline: Option<PathBuf>,
    },
    /// Print the effective configuration as JSON.
    Config,
}

impl PointArgs {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(v) = self.length {
            c.length_km = v;
        }
        if let Some(v) = self.mu {
            c.settings.mu = v;
        }
        if let Some(v) = self.nu {
            c.settings.nu = v;
        }
        if let Some(v) = self.p_mu {
            c.settings.p_mu = v;
        }
        if let Some(v) = self.p_x {
            c.settings.p_x_alice = v;
        }
        if let Some(v) = self.rx_loss {
            c.link.rx_excess_loss_db = v;
        }
        if let Some(v) = self.misalignment {
            c.link.misalignment = v;
        }
    }
}

/// Loads the config file (or defaults) and applies every flag.
pub fn effective_config(cli: &Cli) -> Result<RunConfig, AppError> {
    let mut c = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    if let Some(w) = cli.workers {
        c.workers = w;
    }
    if let Some(d) = &cli.dims {
        if d.is_empty() {
            return Err(AppError::Config("dims: list is empty".into()));
        }
        c.dimension = d[0];
        c.dims = Some(d.clone());
    }
    match &cli.command {
        Command::Keyrate { point } => point.apply(&mut c),
        Command::Sweep {
            point,
            from,
            to,
            step,
            optimize,
            ..
        } => {
            point.apply(&mut c);
            if let Some(v) = from {
                c.sweep.from_km = *v;
            }
            if let Some(v) = to {
                c.sweep.to_km = *v;
            }
            if let Some(v) = step {
                c.sweep.step_km = *v;
            }
            c.sweep.optimize |= optimize;
        }
        Command::Simulate {
            point,
            states,
            bookkeeping,
            ..
        } => {
            point.apply(&mut c);
            if let Some(n) = states {
                c.simulation.states = *n;
            }
            c.simulation.bookkeeping |= bookkeeping;
        }
        Command::Optimize { point, budget, .. } => {
            point.apply(&mut c);
            if let Some(b) = budget {
                c.optimizer.budget = *b;
            }
        }
        Command::Txpattern { .. } | Command::Validate { .. } | Command::Config => {}
    }
    c.validate()?;
    Ok(c)
}

fn create(path: &PathBuf) -> Result<BufWriter<File>, AppError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| AppError::Config(format!("cannot create {}: {e}", path.display())))
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), AppError> {
    let cfg = effective_config(cli)?;
    match &cli.command {
        Command::Keyrate { .. } => keyrate(&cfg, cli.verbose, out),
        Command::Sweep { out: path, .. } => {
            let csv = to_csv(&run_sweep(&cfg)?);
            match path {
                Some(p) => {
                    let mut f = create(p)?;
                    f.write_all(csv.as_bytes())?;
                    f.flush()?;
                    Ok(())
                }
                None => Ok(out.write_all(csv.as_bytes())?),
            }
        }
        Command::Simulate { event_log, .. } => simulate(&cfg, event_log.as_ref(), cli.verbose, out),
        Command::Optimize { trace, .. } => optimize_cmd(&cfg, trace.as_ref(), cli.verbose, out),
        Command::Txpattern {
            sequence,
            out: path,
            json_export,
            sample_rate,
        } => txpattern(
            sequence.as_ref(),
            path,
            json_export.as_ref(),
            *sample_rate,
            out,
        ),
        Command::Validate { timeline } => validate(timeline.as_ref(), out),
        Command::Config => Ok(writeln!(out, "{}", cfg.to_json())?),
    }
}

fn keyrate(cfg: &RunConfig, verbose: bool, out: &mut dyn Write) -> Result<(), AppError> {
    for dim in cfg.sweep_dims() {
        let link = cfg.link.params(dim, cfg.length_km);
        let r = analytic_key_rate(&cfg.settings, &link, &cfg.security, dim)?;
        writeln!(out, "dimension {}", dim.d())?;
        writeln!(out, "distance_km {}", cfg.length_km)?;
        writeln!(out, "rep_rate_hz {}", link.repetition_rate_hz)?;
        writeln!(out, "qber_z {:.6}", r.diagnostics.qber_z)?;
        writeln!(out, "phi_z {:.6}", r.diagnostics.phi_z_up)?;
        writeln!(out, "ell_bits {}", r.ell_bits)?;
        writeln!(out, "skr_bps {:.6e}", r.skr_bps)?;
        if verbose {
            writeln!(out, "{}", to_json(&r))?;
        }
    }
    Ok(())
}

fn simulate(
    cfg: &RunConfig,
    event_log: Option<&PathBuf>,
    verbose: bool,
    out: &mut dyn Write,
) -> Result<(), AppError> {
    for dim in cfg.sweep_dims() {
        let link = cfg.link.params(dim, cfg.length_km);
        let trial = TrialConfig::new(cfg.seed, cfg.simulation.states, cfg.settings, link, dim)?
            .with_bookkeeping(cfg.simulation.bookkeeping);
        let res = match event_log {
            Some(p) => run_with_event_log(&trial, create(p)?)?,
            None => run_partitioned(&trial, cfg.workers)?,
        };
        let r = &res.report;
        let expect = expected_tallies(&cfg.settings, &link, dim, r.states_sent as f64)?;
        writeln!(
            out,
            "dimension {} states {} seed {}",
            dim.d(),
            r.states_sent,
            cfg.seed
        )?;
        writeln!(out, "quantity   empirical    analytic")?;
        for k in Intensity::ALL {
            let q = detection_prob(cfg.settings.mean(k), &link, dim);
            writeln!(out, "gain_{:<6} {:.6e} {:.6e}", k, r.gains[k.index()], q)?;
        }
        for b in Basis::ALL {
            let (emp, ana) = match b {
                Basis::Z => (r.qber_z, expect.qber(b)),
                Basis::X => (r.qber_x, expect.qber(b)),
            };
            writeln!(out, "qber_{b}     {emp:.6}     {ana:.6}")?;
        }
        for b in Basis::ALL {
            let t = r.tallies.basis_total(b);
            writeln!(out, "sifted_{b}   n {} m {}", t.n, t.m)?;
        }
        if let Some(pc) = &r.photon_counts {
            for b in Basis::ALL {
                for k in Intensity::ALL {
                    let c = pc[b.index()][k.index()];
                    writeln!(
                        out,
                        "photons_{b}_{k} vacuum {} single {} multi {}",
                        c.vacuum, c.single, c.multi
                    )?;
                }
            }
        }
        writeln!(
            out,
            "wall_clock_s {:.3} throughput {:.3e} states/s workers {}",
            res.metrics.wall_clock_s, res.metrics.states_per_s, res.metrics.workers
        )?;
        if verbose {
            writeln!(out, "{}", to_json(&res))?;
        }
    }
    Ok(())
}

fn optimize_cmd(
    cfg: &RunConfig,
    trace: Option<&PathBuf>,
    verbose: bool,
    out: &mut dyn Write,
) -> Result<(), AppError> {
    let mut trace_file = trace.map(create).transpose()?;
    if let Some(f) = trace_file.as_mut() {
        writeln!(f, "dimension,evaluation,mu,nu,p_mu,p_x_alice,skr_bps")?;
    }
    let o = &cfg.optimizer;
    for dim in cfg.sweep_dims() {
        let link = cfg.link.params(dim, cfg.length_km);
        let r = optimize(&o.search, &link, &cfg.security, dim, o.budget, &o.options())?;
        let b = &r.best;
        writeln!(out, "dimension {} distance_km {}", dim.d(), cfg.length_km)?;
        writeln!(
            out,
            "mu {:.6} nu {:.6} p_mu {:.6} p_x_alice {:.6}",
            b.mu, b.nu, b.p_mu, b.p_x_alice
        )?;
        writeln!(
            out,
            "skr_bps {:.6e} evaluations {}",
            r.best_skr, r.evaluations
        )?;
        if r.zero_rate {
            writeln!(out, "zero_rate: no evaluated point yields a positive key")?;
        }
        if let Some(f) = trace_file.as_mut() {
            for t in &r.trace {
                let s = &t.settings;
                writeln!(
                    f,
                    "{},{},{},{},{},{},{}",
                    dim.d(),
                    t.evaluation,
                    s.mu,
                    s.nu,
                    s.p_mu,
                    s.p_x_alice,
                    t.skr_bps
                )?;
            }
        }
        if verbose {
            writeln!(
                out,
                "{}",
                to_json(
                    &json!({ "best": r.best, "best_skr": r.best_skr, "evaluations": r.evaluations, "zero_rate": r.zero_rate })
                )
            )?;
        }
    }
    if let Some(mut f) = trace_file {
        f.flush()?;
    }
    Ok(())
}

fn txpattern(
    sequence: Option<&PathBuf>,
    path: &PathBuf,
    json_export: Option<&PathBuf>,
    sample_rate: Option<u64>,
    out: &mut dyn Write,
) -> Result<(), AppError> {
    let frames = match sequence {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| AppError::Input(format!("cannot read {}: {e}", p.display())))?;
            parse_sequence(&text)?
        }
        None => demo_sequence(),
    };
    let mut c = TxCompiler::default();
    if let Some(r) = sample_rate {
        c.sample_rate_hz = r;
    }
    c.validate().map_err(|e| AppError::Config(e.to_string()))?;
    let tl = c.compile_sequence(&frames)?;
    let mut f = create(path)?;
    write_timeline(&mut f, &tl)?;
    if let Some(p) = json_export {
        let mut j = create(p)?;
        writeln!(j, "{}", to_json(&annotate(&c, &frames)?))?;
        j.flush()?;
    }
    writeln!(
        out,
        "wrote {} frames, {} samples per frame at {} Sa/s to {}",
        tl.frame_count(),
        tl.samples_per_frame,
        tl.sample_rate_hz,
        path.display()
    )?;
    Ok(())
}

fn validate(timeline: Option<&PathBuf>, out: &mut dyn Write) -> Result<(), AppError> {
    let mut checks = run_all();
    if let Some(p) = timeline {
        let f = File::open(p)
            .map_err(|e| AppError::Input(format!("cannot open {}: {e}", p.display())))?;
        checks.push(timeline_check(&read_timeline(std::io::BufReader::new(f))?));
    }
    for c in &checks {
        writeln!(out, "{}", c.line())?;
    }
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name)
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(AppError::Invariant(failed.join(", ")))
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    match run(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = main_with_args(
            std::iter::once("hdqkd").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn dims_flag() {
        let (code, out, _) = run_args(&["--dims", "2,4", "config"]);
        assert_eq!(code, 0);
        let c = RunConfig::from_json(&out).unwrap();
        assert_eq!(c.dims, Some(vec![Dimension::Two, Dimension::Four]));
        let (code, _, err) = run_args(&["--dims", "3", "config"]);
        assert_eq!(code, 2, "{err}");
    }

    #[test]
    fn keyrate_zero_km() {
        let (code, out, _) = run_args(&["keyrate", "--length", "0"]);
        assert_eq!(code, 0);
        let skr: f64 = out
            .lines()
            .find_map(|l| l.strip_prefix("skr_bps "))
            .unwrap()
            .parse()
            .unwrap();
        assert!(skr > 0.0);
    }
}
