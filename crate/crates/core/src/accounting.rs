//! Entropy productions, free energies, work bounds and efficacies.
//!
//! Pointwise, for an outcome `(x₀, y, x_c)`:
//!
//! * `σ_{X|Y} = ln q(x_c|y) / p_eq(x_c)`
//! * `σ_X     = ln p(x_c)   / p_eq(x_c)`
//! * `σ_I     = ln q(x_c|y) / p(x_c)`
//! * `ΔS_{X|Y} = ln q(x_c|y) − ln p_eq(x₀)`, `ΔS_X = ln p(x_c) − ln p_eq(x₀)`
//!
//! With this sign convention `ΔF = T⟨ΔS_{X|Y}⟩` and
//! `T⟨σ_{X|Y}⟩ = ΔF − W_out` hold exactly, which the report re-checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{
    enumerate_outcomes, ft_exponential_average, ledger_expectation, Enumeration, FtResult,
    SigmaKind,
};
use crate::measurement::{MeasurementOutcomeTable, Record};
use crate::protocols::{battery_gain, work_of_step, ControlledDistributions, FeedbackProtocol};
use crate::sum::{compensated_sum, NeumaierSum};
use crate::thermo::{mutual_information, Distribution, StateSpace, ThermalContext};

/// Tolerance for the internally re-checked ensemble identities.
pub const IDENTITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyProductions {
    pub cond: f64,
    pub uncond: f64,
    pub info: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyChanges {
    pub cond: f64,
    pub coarse: f64,
}

/// Everything booked for one realizable outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyLedger {
    pub sigma_cond: f64,
    pub sigma_uncond: f64,
    pub sigma_info: f64,
    pub delta_s_cond: f64,
    pub delta_s_coarse: f64,
    /// Work released by the qubit during control.
    pub work: f64,
    /// Thermalization heat `E(x_t) − E(x_c)` averaged over `x_t ~ p_eq`.
    pub heat: f64,
}

pub fn entropy_productions(
    y: Record,
    xc: usize,
    cd: &ControlledDistributions,
    p_eq: &Distribution,
) -> Result<EntropyProductions> {
    let q = cd.q(xc, y);
    if q <= 0.0 {
        return Err(Error::ZeroProbabilityOutcome {
            record: y.index(),
            state: xc,
        });
    }
    let eq = p_eq.prob(xc);
    if eq <= 0.0 {
        return Err(Error::AbsolutelyIrreversible { state: xc });
    }
    let p = cd.marginal()[xc];
    Ok(EntropyProductions {
        cond: (q / eq).ln(),
        uncond: (p / eq).ln(),
        info: (q / p).ln(),
    })
}

pub fn stochastic_entropy_changes(
    x0: usize,
    y: Record,
    xc: usize,
    cd: &ControlledDistributions,
    p_eq: &Distribution,
) -> Result<EntropyChanges> {
    let q = cd.q(xc, y);
    if q <= 0.0 {
        return Err(Error::ZeroProbabilityOutcome {
            record: y.index(),
            state: xc,
        });
    }
    let initial = p_eq.prob(x0).ln();
    Ok(EntropyChanges {
        cond: q.ln() - initial,
        coarse: cd.marginal()[xc].ln() - initial,
    })
}

/// Full ledger for a realizable `(x₀, y, x_c)` on the qubit.
pub fn ledger(
    x0: usize,
    y: Record,
    xc: usize,
    cd: &ControlledDistributions,
    p_eq: &Distribution,
    system: &StateSpace,
) -> Result<EntropyLedger> {
    let sigma = entropy_productions(y, xc, cd, p_eq)?;
    let changes = stochastic_entropy_changes(x0, y, xc, cd, p_eq)?;
    let bath_energy = compensated_sum((0..system.len()).map(|s| p_eq.prob(s) * system.energy(s)));
    Ok(EntropyLedger {
        sigma_cond: sigma.cond,
        sigma_uncond: sigma.uncond,
        sigma_info: sigma.info,
        delta_s_cond: changes.cond,
        delta_s_coarse: changes.coarse,
        work: work_of_step(x0, xc, system),
        heat: bath_energy - system.energy(xc),
    })
}

/// How the demon-marginalized ("coarse-grained") second law is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CoarseVariant {
    /// `ΔF_X = T⟨ΔS_X⟩` with `ΔS_X` built from `p(x_c)`. Never violated.
    Marginal,
    /// Improper full-cycle production `σ̃ = −βw`: thermalization returns the
    /// qubit to equilibrium, so the cycle's free-energy change is zero.
    CycleImproper,
    /// `ΔS_{X|Y}` averaged over `p(y)` at fixed `(x₀, x_c)`; cells where some
    /// record cannot reach `x_c` diverge to `−∞`.
    PartialAverage,
}

impl CoarseVariant {
    pub const ALL: [CoarseVariant; 3] = [
        CoarseVariant::Marginal,
        CoarseVariant::CycleImproper,
        CoarseVariant::PartialAverage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CoarseVariant::Marginal => "marginal",
            CoarseVariant::CycleImproper => "cycle-improper",
            CoarseVariant::PartialAverage => "partial-average",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == name)
    }
}

/// Outcome of testing `W_out ≤ ΔF_variant`.
///
/// `margin` is `T⟨σ_X⟩` (energy) for the marginal variant, `−βW_out` (nats)
/// for the cycle variant and `ΔF_variant − W_out` for the partial average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoarseCheck {
    pub variant: CoarseVariant,
    pub delta_f: f64,
    pub w_out: f64,
    pub violated: bool,
    pub margin: f64,
    /// Probability mass on `−∞` cells (partial average only).
    pub absolute_mass: f64,
}

pub fn coarse_grained_check(
    variant: CoarseVariant,
    en: &Enumeration,
    ctx: &ThermalContext,
) -> Result<CoarseCheck> {
    let w_out = ledger_expectation(en, |l| l.work)?;
    let check = match variant {
        CoarseVariant::Marginal => {
            let delta_f = ctx.energy_of_entropy(ledger_expectation(en, |l| l.delta_s_coarse)?);
            let margin = ctx.energy_of_entropy(ledger_expectation(en, |l| l.sigma_uncond)?);
            CoarseCheck {
                variant,
                delta_f,
                w_out,
                violated: w_out > delta_f + IDENTITY_TOL,
                margin,
                absolute_mass: 0.0,
            }
        }
        CoarseVariant::CycleImproper => CoarseCheck {
            variant,
            delta_f: 0.0,
            w_out,
            violated: w_out > IDENTITY_TOL,
            margin: -ctx.beta() * w_out,
            absolute_mass: 0.0,
        },
        CoarseVariant::PartialAverage => partial_average(en, ctx, w_out),
    };
    Ok(check)
}

fn partial_average(en: &Enumeration, ctx: &ThermalContext, w_out: f64) -> CoarseCheck {
    let cd = en.controlled();
    let states = en.system().len();
    let mut pair_mass = vec![vec![0.0; states]; states];
    for atom in en.realized() {
        pair_mass[atom.x0_system][atom.xc] += atom.probability;
    }
    let mut mean = NeumaierSum::new();
    let mut absolute_mass = NeumaierSum::new();
    for (x0, row) in pair_mass.iter().enumerate() {
        for (xc, &mass) in row.iter().enumerate() {
            if mass <= 0.0 {
                continue;
            }
            let records = Record::ALL.iter().filter(|&&y| cd.record(y) > 0.0);
            if records.clone().any(|&y| cd.q(xc, y) <= 0.0) {
                absolute_mass += mass;
                continue;
            }
            let averaged = compensated_sum(records.map(|&y| cd.record(y) * cd.q(xc, y).ln()));
            mean += mass * (averaged - en.p_eq().prob(x0).ln());
        }
    }
    let absolute_mass = absolute_mass.total();
    let delta_f = if absolute_mass > 0.0 {
        f64::NEG_INFINITY
    } else {
        ctx.energy_of_entropy(mean.total())
    };
    let margin = delta_f - w_out;
    CoarseCheck {
        variant: CoarseVariant::PartialAverage,
        delta_f,
        w_out,
        violated: margin < -IDENTITY_TOL,
        margin,
        absolute_mass,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Efficacies {
    pub out: f64,
    pub ext: f64,
    pub max: f64,
}

impl Efficacies {
    /// `η_ext ≤ η_out ≤ η_max ≤ 1`, up to `tol`.
    pub fn is_ordered(&self, tol: f64) -> bool {
        self.ext <= self.out + tol && self.out <= self.max + tol && self.max <= 1.0 + tol
    }
}

/// Ensemble averages for one protocol at one operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkReport {
    pub beta: f64,
    pub temperature: f64,
    pub epsilon: f64,
    pub kappa: f64,
    pub w_out: f64,
    pub w_ext: f64,
    pub delta_f: f64,
    /// Marginal-variant `ΔF_X`.
    pub delta_f_coarse: f64,
    /// `ΔF − T⟨σ_I⟩`, the tighter work bound.
    pub info_bound: f64,
    pub mean_heat: f64,
    pub mean_delta_s_cond: f64,
    pub mean_delta_s_coarse: f64,
    pub mean_sigma_cond: f64,
    pub mean_sigma_uncond: f64,
    pub mean_sigma_info: f64,
    pub mutual_information: f64,
    pub ft_cond: FtResult,
    pub ft_uncond: FtResult,
    pub ft_info: FtResult,
    pub support_deficit_cond: f64,
    pub support_deficit_info: f64,
    pub eta_out: Option<f64>,
    pub eta_ext: Option<f64>,
    pub eta_max: Option<f64>,
    /// Mean phonon gain of the battery, when the protocol has one.
    pub battery_gain: Option<f64>,
    /// `|T⟨σ_{X|Y}⟩ − (ΔF − W_out)|`; in nats when `T` is infinite.
    pub cond_identity_residual: f64,
    /// `|T⟨σ_X⟩ − (ΔF_X − W_out)|`; in nats when `T` is infinite.
    pub coarse_identity_residual: f64,
    /// `|W_out − ⟨Q_{X|Y}⟩|`.
    pub heat_identity_residual: f64,
    pub coarse: [CoarseCheck; 3],
}

impl WorkReport {
    pub fn identities_hold(&self) -> bool {
        self.cond_identity_residual <= IDENTITY_TOL
            && self.coarse_identity_residual <= IDENTITY_TOL
            && self.heat_identity_residual <= IDENTITY_TOL
    }

    pub fn coarse_check(&self, variant: CoarseVariant) -> &CoarseCheck {
        self.coarse
            .iter()
            .find(|c| c.variant == variant)
            .expect("all variants are evaluated")
    }

    pub fn ft(&self, which: SigmaKind) -> &FtResult {
        match which {
            SigmaKind::Conditional => &self.ft_cond,
            SigmaKind::Unconditional => &self.ft_uncond,
            SigmaKind::Information => &self.ft_info,
        }
    }

    /// `W_out ≤ ΔF − T⟨σ_I⟩ ≤ ΔF`, up to `tol`.
    pub fn bound_chain_holds(&self, tol: f64) -> bool {
        self.w_out <= self.info_bound + tol && self.info_bound <= self.delta_f + tol
    }
}

fn residual(ctx: &ThermalContext, sigma: f64, delta_s: f64, w_out: f64) -> f64 {
    if ctx.is_infinite_temperature() {
        (sigma - delta_s).abs()
    } else {
        let t = ctx.temperature();
        (t * sigma - (t * delta_s - w_out)).abs()
    }
}

pub fn ensemble_report(
    protocol: &FeedbackProtocol,
    table: &MeasurementOutcomeTable,
    ctx: &ThermalContext,
    kappa: f64,
) -> Result<WorkReport> {
    if !(0.0..=1.0).contains(&kappa) {
        return Err(Error::InvalidParameter {
            name: "kappa",
            reason: format!("storage efficiency must lie in [0, 1], got {kappa}"),
        });
    }
    let en = enumerate_outcomes(protocol, table)?;
    let w_out = ledger_expectation(&en, |l| l.work)?;
    let mean_heat = ledger_expectation(&en, |l| l.heat)?;
    let mean_delta_s_cond = ledger_expectation(&en, |l| l.delta_s_cond)?;
    let mean_delta_s_coarse = ledger_expectation(&en, |l| l.delta_s_coarse)?;
    let mean_sigma_cond = ledger_expectation(&en, |l| l.sigma_cond)?;
    let mean_sigma_uncond = ledger_expectation(&en, |l| l.sigma_uncond)?;
    let mean_sigma_info = ledger_expectation(&en, |l| l.sigma_info)?;

    let delta_f = ctx.energy_of_entropy(mean_delta_s_cond);
    let delta_f_coarse = ctx.energy_of_entropy(mean_delta_s_coarse);
    let info_bound = ctx.energy_of_entropy(mean_delta_s_cond - mean_sigma_info);

    let [ft_cond, ft_uncond, ft_info] = SigmaKind::ALL.map(|k| ft_exponential_average(&en, k));
    let coarse = [
        coarse_grained_check(CoarseVariant::Marginal, &en, ctx)?,
        coarse_grained_check(CoarseVariant::CycleImproper, &en, ctx)?,
        coarse_grained_check(CoarseVariant::PartialAverage, &en, ctx)?,
    ];

    let beta = ctx.beta();
    let mut report = WorkReport {
        beta,
        temperature: ctx.temperature(),
        epsilon: table.epsilon(),
        kappa,
        w_out,
        w_ext: kappa * w_out,
        delta_f,
        delta_f_coarse,
        info_bound,
        mean_heat,
        mean_delta_s_cond,
        mean_delta_s_coarse,
        mean_sigma_cond,
        mean_sigma_uncond,
        mean_sigma_info,
        mutual_information: mutual_information(table),
        support_deficit_cond: ft_cond.support_deficit,
        support_deficit_info: ft_info.support_deficit,
        ft_cond,
        ft_uncond,
        ft_info,
        eta_out: None,
        eta_ext: None,
        eta_max: None,
        battery_gain: battery_gain(protocol, table)?,
        cond_identity_residual: residual(ctx, mean_sigma_cond, mean_delta_s_cond, w_out),
        coarse_identity_residual: residual(ctx, mean_sigma_uncond, mean_delta_s_coarse, w_out),
        heat_identity_residual: (w_out - mean_heat).abs(),
        coarse,
    };
    if let Ok(eta) = efficacies(&report) {
        report.eta_out = Some(eta.out);
        report.eta_ext = Some(eta.ext);
        report.eta_max = Some(eta.max);
    }
    Ok(report)
}

/// Free-energy budgets below this (in nats) leave the efficacies undefined.
const MIN_FREE_ENERGY_NATS: f64 = 1e-12;

/// `η_out = W_out/ΔF`, `η_ext = W_ext/ΔF`, `η_max = 1 − T⟨σ_I⟩/ΔF`.
///
/// Evaluated in entropy units so the ratios stay finite at `β = 0`.
pub fn efficacies(report: &WorkReport) -> Result<Efficacies> {
    let budget = report.mean_delta_s_cond;
    if budget.is_nan() || budget <= MIN_FREE_ENERGY_NATS {
        return Err(Error::UndefinedEfficacy(report.delta_f));
    }
    let out = report.beta * report.w_out / budget;
    Ok(Efficacies {
        out,
        ext: report.beta * report.w_ext / budget,
        max: 1.0 - report.mean_sigma_info / budget,
    })
}
