//! Exact enumeration of the joint outcome space `(x₀, y, x_c)`.
//!
//! This is the ground truth every other estimate is checked against. Atoms
//! with zero weight are kept so that support structure is read off exact
//! zeros rather than thresholds, and every reduction runs in atom order with
//! compensated sums.

use serde::{Deserialize, Serialize};

use crate::accounting::{ledger, EntropyLedger};
use crate::error::{Error, Result};
use crate::measurement::{MeasurementOutcomeTable, Record};
use crate::protocols::{apply_control, ControlledDistributions, FeedbackProtocol};
use crate::sum::{compensated_sum, NeumaierSum};
use crate::thermo::{Distribution, StateSpace};

/// One cell of the joint outcome space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeAtom {
    /// Initial state in the protocol's control space (qubit or qubit ⊗ phonon).
    pub x0: usize,
    /// Initial qubit state.
    pub x0_system: usize,
    pub y: Record,
    /// Qubit state after control.
    pub xc: usize,
    pub probability: f64,
    /// Present iff `probability > 0`.
    pub ledger: Option<EntropyLedger>,
}

/// All outcome atoms together with the distributions they were built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Enumeration {
    atoms: Vec<OutcomeAtom>,
    controlled: ControlledDistributions,
    p_eq: Distribution,
    system: StateSpace,
}

impl Enumeration {
    pub fn atoms(&self) -> &[OutcomeAtom] {
        &self.atoms
    }

    pub fn controlled(&self) -> &ControlledDistributions {
        &self.controlled
    }

    pub fn p_eq(&self) -> &Distribution {
        &self.p_eq
    }

    pub fn system(&self) -> &StateSpace {
        &self.system
    }

    /// Atoms with nonzero weight.
    pub fn realized(&self) -> impl Iterator<Item = &OutcomeAtom> {
        self.atoms.iter().filter(|a| a.probability > 0.0)
    }

    /// Whether some atom with record `y` ends in `xc` with nonzero weight.
    pub fn supported(&self, y: Record, xc: usize) -> bool {
        self.realized().any(|a| a.y == y && a.xc == xc)
    }

    pub fn total_weight(&self) -> f64 {
        compensated_sum(self.atoms.iter().map(|a| a.probability))
    }
}

pub fn enumerate_outcomes(
    protocol: &FeedbackProtocol,
    table: &MeasurementOutcomeTable,
) -> Result<Enumeration> {
    let controlled = apply_control(protocol, table)?;
    let p_eq = table.prior().clone();
    let system = protocol.system().clone();
    let initial = protocol.initial_joint(table);
    let dim = protocol.space().len();

    let mut atoms = Vec::with_capacity(dim * 2 * system.len());
    for (x0, weights) in initial.iter().enumerate() {
        let x0_system = protocol.system_state(x0);
        for y in Record::ALL {
            let channel = protocol.channel(y);
            for xc in 0..system.len() {
                let transfer = compensated_sum(
                    (0..dim)
                        .filter(|&t| protocol.system_state(t) == xc)
                        .map(|t| channel.prob(t, x0)),
                );
                let probability = weights[y.index()] * transfer;
                let ledger = if probability > 0.0 {
                    Some(ledger(x0_system, y, xc, &controlled, &p_eq, &system)?)
                } else {
                    None
                };
                atoms.push(OutcomeAtom {
                    x0,
                    x0_system,
                    y,
                    xc,
                    probability,
                    ledger,
                });
            }
        }
    }
    Ok(Enumeration {
        atoms,
        controlled,
        p_eq,
        system,
    })
}

/// Which entropy production a fluctuation-theorem sum refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SigmaKind {
    /// `σ_{X|Y}`, demon-conditioned.
    Conditional,
    /// `σ_X`, demon-marginalized.
    Unconditional,
    /// `σ_I = σ_{X|Y} − σ_X`, dissipative information.
    Information,
}

impl SigmaKind {
    pub const ALL: [SigmaKind; 3] = [
        SigmaKind::Conditional,
        SigmaKind::Unconditional,
        SigmaKind::Information,
    ];

    pub fn of(self, ledger: &EntropyLedger) -> f64 {
        match self {
            SigmaKind::Conditional => ledger.sigma_cond,
            SigmaKind::Unconditional => ledger.sigma_uncond,
            SigmaKind::Information => ledger.sigma_info,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SigmaKind::Conditional => "cond",
            SigmaKind::Unconditional => "uncond",
            SigmaKind::Information => "info",
        }
    }
}

/// `⟨e^{−σ}⟩` and the reference mass the forward process never reaches.
///
/// `value + support_deficit == 1` is an identity of the construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FtResult {
    pub value: f64,
    pub support_deficit: f64,
    pub which: SigmaKind,
}

pub fn ft_exponential_average(en: &Enumeration, which: SigmaKind) -> FtResult {
    let value = compensated_sum(en.realized().map(|a| {
        let ledger = a.ledger.as_ref().expect("realized atoms carry a ledger");
        a.probability * (-which.of(ledger)).exp()
    }));

    let cd = en.controlled();
    let states = en.system().len();
    let mut deficit = NeumaierSum::new();
    match which {
        SigmaKind::Unconditional => {
            for xc in 0..states {
                if !Record::ALL.iter().any(|&y| en.supported(y, xc)) {
                    deficit += en.p_eq().prob(xc);
                }
            }
        }
        SigmaKind::Conditional | SigmaKind::Information => {
            for y in Record::ALL {
                let py = cd.record(y);
                if py <= 0.0 {
                    continue;
                }
                for xc in 0..states {
                    if !en.supported(y, xc) {
                        let reference = if which == SigmaKind::Conditional {
                            en.p_eq().prob(xc)
                        } else {
                            cd.marginal()[xc]
                        };
                        deficit += py * reference;
                    }
                }
            }
        }
    }
    FtResult {
        value,
        support_deficit: deficit.total(),
        which,
    }
}

/// Probability-weighted sum of a per-atom observable over realized atoms.
pub fn exact_expectation<F>(en: &Enumeration, observable: F) -> Result<f64>
where
    F: Fn(&OutcomeAtom) -> f64,
{
    let mut acc = NeumaierSum::new();
    for atom in en.realized() {
        let v = observable(atom);
        if !v.is_finite() {
            return Err(Error::DivergentObservable);
        }
        acc += atom.probability * v;
    }
    Ok(acc.total())
}

/// Expectation of a ledger field; realized atoms always carry one.
pub fn ledger_expectation<F>(en: &Enumeration, field: F) -> Result<f64>
where
    F: Fn(&EntropyLedger) -> f64,
{
    exact_expectation(en, |a| a.ledger.as_ref().map_or(f64::NAN, &field))
}
