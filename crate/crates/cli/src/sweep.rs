//! Evaluation of a configured grid of operating points.

use rayon::prelude::*;

use demonsim_core::{
    ensemble_report, equilibrium_distribution, ft_estimate, ion_composite_protocol, measure,
    montecarlo::sample_trajectories_with, state_flip_protocol, szilard_protocol, Estimate,
    FeedbackProtocol, IonCompositeModel, MeasurementOutcomeTable, PulsePrep, ThermalContext,
    TrajectoryBatch, WorkReport,
};

use crate::config::{ProtocolName, ProtocolSpec, SweepConfig};
use crate::error::CliError;

/// Thermal context for a preparation angle.
pub fn context_for(theta_c: f64) -> Result<ThermalContext, CliError> {
    Ok(PulsePrep::new(theta_c)?.context()?)
}

pub fn build_protocol(
    spec: &ProtocolSpec,
    ctx: &ThermalContext,
) -> Result<FeedbackProtocol, CliError> {
    let space = ctx.two_level_space();
    Ok(match spec.name {
        ProtocolName::Szilard => szilard_protocol(&space)?,
        ProtocolName::Flip => state_flip_protocol(&space)?,
        ProtocolName::Ion => {
            let model = IonCompositeModel::with_pulse_area(
                spec.lamb_dicke,
                spec.nbar,
                spec.n_max,
                spec.pulse_area,
            )?;
            ion_composite_protocol(&model, ctx)?
        }
    })
}

/// Everything needed to evaluate one `(θ_c, ε)` point.
pub struct Point {
    pub theta_c: f64,
    pub ctx: ThermalContext,
    pub protocol: FeedbackProtocol,
    pub table: MeasurementOutcomeTable,
}

impl Point {
    pub fn new(spec: &ProtocolSpec, theta_c: f64, epsilon: f64) -> Result<Self, CliError> {
        let ctx = context_for(theta_c)?;
        let protocol = build_protocol(spec, &ctx)?;
        let p_eq = equilibrium_distribution(&ctx, &ctx.two_level_space());
        let table = measure(&p_eq, epsilon)?;
        Ok(Point {
            theta_c,
            ctx,
            protocol,
            table,
        })
    }

    pub fn report(&self, kappa: f64) -> Result<WorkReport, CliError> {
        Ok(ensemble_report(
            &self.protocol,
            &self.table,
            &self.ctx,
            kappa,
        )?)
    }

    pub fn sample(&self, config: &SweepConfig, seed: u64) -> Result<TrajectoryBatch, CliError> {
        Ok(sample_trajectories_with(
            &self.protocol,
            &self.table,
            config.samples,
            seed,
            config.sigma_mode,
        )?)
    }
}

/// Monte Carlo estimates reported next to the exact columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McColumns {
    pub w_out: Estimate,
    pub mean_sigma_cond: Estimate,
    pub mean_sigma_uncond: Estimate,
    pub mean_sigma_info: Estimate,
    pub ft_cond: Estimate,
    pub ft_uncond: Estimate,
    pub ft_info: Estimate,
}

impl McColumns {
    pub fn from_batch(batch: &TrajectoryBatch) -> Result<Self, CliError> {
        use demonsim_core::estimate;
        let [ft_cond, ft_uncond, ft_info] = ft_estimate(batch)?;
        Ok(McColumns {
            w_out: estimate(batch, |r| r.work)?,
            mean_sigma_cond: estimate(batch, |r| r.sigma.cond)?,
            mean_sigma_uncond: estimate(batch, |r| r.sigma.uncond)?,
            mean_sigma_info: estimate(batch, |r| r.sigma.info)?,
            ft_cond,
            ft_uncond,
            ft_info,
        })
    }

    /// Pairs in column order.
    pub fn named(&self) -> [(&'static str, &Estimate); 7] {
        [
            ("w_out", &self.w_out),
            ("mean_sigma_cond", &self.mean_sigma_cond),
            ("mean_sigma_uncond", &self.mean_sigma_uncond),
            ("mean_sigma_info", &self.mean_sigma_info),
            ("ft_cond", &self.ft_cond),
            ("ft_uncond", &self.ft_uncond),
            ("ft_info", &self.ft_info),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub theta_c: f64,
    pub beta: f64,
    pub temperature: f64,
    pub epsilon: f64,
    pub exact: Option<WorkReport>,
    pub mc: Option<McColumns>,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub config: SweepConfig,
    pub reconstruction: bool,
    pub rows: Vec<SweepRow>,
}

/// Seed for the `index`-th grid point. Point 0 uses the root seed itself.
pub fn point_seed(root: u64, index: usize) -> u64 {
    root ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// `(θ_c, ε)` pairs in output order: `θ_c` outer, `ε` inner.
pub fn grid(config: &SweepConfig) -> Vec<(f64, f64)> {
    let eps = config.epsilons();
    config
        .theta_c
        .iter()
        .flat_map(|&t| eps.iter().map(move |&e| (t, e)))
        .collect()
}

fn run_row(
    config: &SweepConfig,
    index: usize,
    theta_c: f64,
    epsilon: f64,
) -> Result<SweepRow, CliError> {
    let point = Point::new(&config.protocol, theta_c, epsilon)?;
    let exact = if config.engine.exact() {
        Some(point.report(config.protocol.kappa)?)
    } else {
        None
    };
    let mc = if config.engine.monte_carlo() {
        let batch = point.sample(config, point_seed(config.seed, index))?;
        Some(McColumns::from_batch(&batch)?)
    } else {
        None
    };
    Ok(SweepRow {
        theta_c,
        beta: point.ctx.beta(),
        temperature: point.ctx.temperature(),
        epsilon: point.table.epsilon(),
        exact,
        mc,
    })
}

/// Evaluates every grid point in parallel; rows come back in grid order.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepTable, CliError> {
    let points = grid(config);
    let rows = points
        .par_iter()
        .enumerate()
        .map(|(i, &(t, e))| run_row(config, i, t, e))
        .collect::<Result<Vec<_>, _>>()?;
    let reconstruction = match config.theta_c.first() {
        Some(&t) => build_protocol(&config.protocol, &context_for(t)?)?.is_reconstruction(),
        None => false,
    };
    Ok(SweepTable {
        config: config.clone(),
        reconstruction,
        rows,
    })
}
