//! Argument parsing and subcommand dispatch.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use demonsim_core::{SigmaKind, TrajectoryBatch};

use crate::config::{overlay, parse_config_text, SweepConfig};
use crate::error::{CliError, ConfigError};
use crate::output::{format_number, write_table};
use crate::sweep::{point_seed, run_sweep, McColumns, Point};

#[derive(Debug, Parser)]
#[command(
    name = "demonsim",
    version,
    about = "Entropy production and work bounds for a measured, feedback-controlled qubit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a grid of (theta_c, epsilon) points and write a table.
    Sweep(ConfigArgs),
    /// Check the three integral fluctuation theorems at one point.
    VerifyFt(ConfigArgs),
    /// Print the full ensemble report for one point as JSON.
    Report(ConfigArgs),
    /// Dump sampled trajectories for one point as CSV.
    Sample(ConfigArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Config file of `key = value` lines; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// szilard | flip | ion
    #[arg(long)]
    pub protocol: Option<String>,
    /// Preparation angles: list (`pi/6,pi/3`) or `start:stop:step`.
    #[arg(long = "theta-c", allow_hyphen_values = true)]
    pub theta_c: Option<String>,
    /// Measurement errors in [0, 1]: list or `start:stop:step`.
    #[arg(long)]
    pub epsilon: Option<String>,
    /// Measurement pulse angles, mapped through epsilon = 1 - exp(-zeta*theta).
    #[arg(long = "pulse-theta")]
    pub pulse_theta: Option<String>,
    #[arg(long)]
    pub zeta: Option<String>,
    /// exact | montecarlo | both
    #[arg(long)]
    pub engine: Option<String>,
    #[arg(long)]
    pub samples: Option<String>,
    /// Root seed; falls back to $DEMONSIM_SEED, then 7.
    #[arg(long)]
    pub seed: Option<String>,
    /// Battery storage efficiency.
    #[arg(long)]
    pub kappa: Option<String>,
    #[arg(long = "lamb-dicke")]
    pub lamb_dicke: Option<String>,
    #[arg(long)]
    pub nbar: Option<String>,
    #[arg(long = "n-max")]
    pub n_max: Option<String>,
    #[arg(long = "pulse-area")]
    pub pulse_area: Option<String>,
    /// marginal | cycle-improper | partial-average
    #[arg(long = "coarse-variant")]
    pub coarse_variant: Option<String>,
    /// model | empirical
    #[arg(long = "sigma-mode")]
    pub sigma_mode: Option<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// csv | json
    #[arg(long)]
    pub format: Option<String>,
    /// Omit the generated-at header line so reruns are byte-identical.
    #[arg(long = "no-timestamp")]
    pub no_timestamp: bool,
}

impl ConfigArgs {
    fn flag_pairs(&self) -> BTreeMap<String, String> {
        let mut pairs = BTreeMap::new();
        let mut set = |key: &str, v: &Option<String>| {
            if let Some(v) = v {
                pairs.insert(key.to_string(), v.clone());
            }
        };
        set("protocol.name", &self.protocol);
        set("protocol.kappa", &self.kappa);
        set("protocol.lamb_dicke", &self.lamb_dicke);
        set("protocol.nbar", &self.nbar);
        set("protocol.n_max", &self.n_max);
        set("protocol.pulse_area", &self.pulse_area);
        set("sweep.theta_c", &self.theta_c);
        set("sweep.epsilon", &self.epsilon);
        set("sweep.pulse_theta", &self.pulse_theta);
        set("sweep.zeta", &self.zeta);
        set("sweep.coarse_variant", &self.coarse_variant);
        set("sweep.format", &self.format);
        set("engine.mode", &self.engine);
        set("engine.samples", &self.samples);
        set("engine.seed", &self.seed);
        set("engine.sigma_mode", &self.sigma_mode);
        if let Some(path) = &self.output {
            pairs.insert("sweep.output".into(), path.display().to_string());
        }
        if self.no_timestamp {
            pairs.insert("sweep.timestamp".into(), "false".into());
        }
        pairs
    }

    /// Merges the config file (if any) with the flags and validates.
    pub fn resolve(&self) -> Result<SweepConfig, CliError> {
        let file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                parse_config_text(&text)?
            }
            None => BTreeMap::new(),
        };
        Ok(SweepConfig::from_pairs(&overlay(file, self.flag_pairs()))?)
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn with_output<F>(config: &SweepConfig, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    match &config.output {
        Some(path) => {
            let file = File::create(path).map_err(io_err(path))?;
            let mut w = BufWriter::new(file);
            f(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            match f(&mut w).and_then(|_| w.flush()) {
                Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
                r => r.map_err(io_err(Path::new("<stdout>"))),
            }
        }
    }
}

fn single_point(config: &SweepConfig) -> Result<Point, CliError> {
    let eps = config.epsilons();
    if config.theta_c.len() != 1 {
        return Err(
            ConfigError::new("sweep.theta_c", "this command takes exactly one value").into(),
        );
    }
    if eps.len() != 1 {
        return Err(ConfigError::new(
            "error_axis",
            "this command takes exactly one measurement error",
        )
        .into());
    }
    Point::new(&config.protocol, config.theta_c[0], eps[0])
}

/// Tolerance on `value + deficit = 1` in `verify-ft`.
pub const FT_TOL: f64 = 1e-10;

fn verify_ft(config: &SweepConfig, w: &mut dyn Write) -> Result<bool, CliError> {
    let point = single_point(config)?;
    let report = point.report(config.protocol.kappa)?;
    let mc = if config.engine.monte_carlo() {
        Some(McColumns::from_batch(
            &point.sample(config, point_seed(config.seed, 0))?,
        )?)
    } else {
        None
    };
    let mut ok = true;
    let write =
        |w: &mut dyn Write, s: String| writeln!(w, "{s}").map_err(io_err(Path::new("<stdout>")));
    write(w, "sigma,exact,support_deficit,sum,mc,stderr,status".into())?;
    for kind in SigmaKind::ALL {
        let ft = report.ft(kind);
        let sum = ft.value + ft.support_deficit;
        let mut pass = (sum - 1.0).abs() <= FT_TOL;
        let (mc_mean, mc_err) = match &mc {
            Some(m) => {
                let e = match kind {
                    SigmaKind::Conditional => m.ft_cond,
                    SigmaKind::Unconditional => m.ft_uncond,
                    SigmaKind::Information => m.ft_info,
                };
                pass &= e.agrees_with(ft.value, 3.0);
                (format_number(e.mean), format_number(e.stderr))
            }
            None => (String::new(), String::new()),
        };
        ok &= pass;
        write(
            w,
            format!(
                "{},{},{},{},{},{},{}",
                kind.name(),
                format_number(ft.value),
                format_number(ft.support_deficit),
                format_number(sum),
                mc_mean,
                mc_err,
                if pass { "pass" } else { "fail" }
            ),
        )?;
    }
    Ok(ok)
}

fn write_batch(batch: &TrajectoryBatch, w: &mut dyn Write) -> io::Result<()> {
    writeln!(w, "# protocol: {}", batch.protocol_id)?;
    writeln!(w, "# seed: {}", batch.seed)?;
    writeln!(w, "# beta: {}", format_number(batch.beta))?;
    writeln!(w, "# epsilon: {}", format_number(batch.epsilon))?;
    writeln!(
        w,
        "index,x0,x0_system,y,xc,xc_system,xt,work,heat,sigma_cond,sigma_uncond,sigma_info"
    )?;
    for (i, r) in batch.records.iter().enumerate() {
        writeln!(
            w,
            "{i},{},{},{},{},{},{},{},{},{},{},{}",
            r.x0,
            r.x0_system,
            r.y.index(),
            r.xc,
            r.xc_system,
            r.xt,
            format_number(r.work),
            format_number(r.heat),
            format_number(r.sigma.cond),
            format_number(r.sigma.uncond),
            format_number(r.sigma.info),
        )?;
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Sweep(args) => {
            let config = args.resolve()?;
            let table = run_sweep(&config)?;
            with_output(&config, |w| write_table(&table, w))
        }
        Command::VerifyFt(args) => {
            let config = args.resolve()?;
            let mut buf = Vec::new();
            let ok = verify_ft(&config, &mut buf)?;
            with_output(&config, |w| w.write_all(&buf))?;
            if ok {
                Ok(())
            } else {
                Err(CliError::Check("fluctuation theorem check failed".into()))
            }
        }
        Command::Report(args) => {
            let config = args.resolve()?;
            let report = single_point(&config)?.report(config.protocol.kappa)?;
            let json = serde_json::to_string_pretty(&report).expect("report serializes");
            with_output(&config, |w| writeln!(w, "{json}"))
        }
        Command::Sample(args) => {
            let config = args.resolve()?;
            let point = single_point(&config)?;
            let batch = point.sample(&config, config.seed)?;
            with_output(&config, |w| write_batch(&batch, w))
        }
    }
}
