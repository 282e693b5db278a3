//! Feedback control channels and the trapped-ion battery model.
//!
//! A protocol acts on a *control space* which is either the bare qubit or the
//! qubit tensored with a truncated phonon mode. Every control-space state
//! projects onto a qubit state; the measurement only ever sees the qubit.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{MeasurementOutcomeTable, Record};
use crate::sum::compensated_sum;
use crate::thermo::{StateSpace, ThermalContext, DOWN, UP};

const STOCHASTIC_TOL: f64 = 1e-12;

/// A column-stochastic matrix `C(target | source)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    dim: usize,
    // entries[target * dim + source]
    entries: Vec<f64>,
}

impl Channel {
    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        Self { dim, entries }
    }

    /// Deterministic channel sending `source` to `map[source]`.
    pub fn from_map(map: &[usize]) -> Result<Self> {
        let dim = map.len();
        if let Some(&t) = map.iter().find(|&&t| t >= dim) {
            return Err(Error::DimensionMismatch(format!(
                "target {t} outside a {dim}-state space"
            )));
        }
        let mut entries = vec![0.0; dim * dim];
        for (source, &target) in map.iter().enumerate() {
            entries[target * dim + source] = 1.0;
        }
        Ok(Self { dim, entries })
    }

    /// Builds a channel from `entries[target * dim + source]`, checking that
    /// every source column is a probability distribution.
    pub fn from_entries(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {dim}x{dim} channel",
                entries.len()
            )));
        }
        if entries.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidDistribution(
                "channel entries must be finite and >= 0".into(),
            ));
        }
        let channel = Self { dim, entries };
        for source in 0..dim {
            let total = compensated_sum((0..dim).map(|t| channel.prob(t, source)));
            if (total - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidDistribution(format!(
                    "channel column {source} sums to {total}"
                )));
            }
        }
        Ok(channel)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn prob(&self, target: usize, source: usize) -> f64 {
        self.entries[target * self.dim + source]
    }

    /// Targets reachable from `source` with nonzero probability, in index order.
    pub fn targets(&self, source: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.dim)
            .map(move |t| (t, self.prob(t, source)))
            .filter(|&(_, p)| p > 0.0)
    }
}

/// Trapped-ion battery: a phonon mode coupled to the qubit by a red-sideband pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IonCompositeModel {
    lamb_dicke: f64,
    nbar: f64,
    n_max: usize,
    pulse_area: f64,
}

impl IonCompositeModel {
    pub const LAMB_DICKE: f64 = 0.11;
    /// Mean phonon number left after sideband cooling.
    pub const RESIDUAL_NBAR: f64 = 0.14;
    pub const DEFAULT_N_MAX: usize = 30;
    pub const MAX_TAIL: f64 = 1e-10;

    /// Model with the calibrated pulse, for which `|↑,0⟩ → |↓,1⟩` is a full π transfer.
    pub fn new(lamb_dicke: f64, nbar: f64, n_max: usize) -> Result<Self> {
        Self::with_pulse_area(lamb_dicke, nbar, n_max, PI)
    }

    pub fn with_pulse_area(
        lamb_dicke: f64,
        nbar: f64,
        n_max: usize,
        pulse_area: f64,
    ) -> Result<Self> {
        if !(lamb_dicke.is_finite() && lamb_dicke > 0.0) {
            return Err(Error::InvalidParameter {
                name: "lamb_dicke",
                reason: format!("must be positive, got {lamb_dicke}"),
            });
        }
        if !(nbar.is_finite() && nbar >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "nbar",
                reason: format!("mean phonon number must be >= 0, got {nbar}"),
            });
        }
        if n_max < 2 {
            return Err(Error::InvalidParameter {
                name: "n_max",
                reason: format!("truncation must be >= 2, got {n_max}"),
            });
        }
        if !(pulse_area.is_finite() && pulse_area > 0.0) {
            return Err(Error::InvalidParameter {
                name: "pulse_area",
                reason: format!("must be positive, got {pulse_area}"),
            });
        }
        Ok(Self {
            lamb_dicke,
            nbar,
            n_max,
            pulse_area,
        })
    }

    pub fn lamb_dicke(&self) -> f64 {
        self.lamb_dicke
    }

    pub fn nbar(&self) -> f64 {
        self.nbar
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn pulse_area(&self) -> f64 {
        self.pulse_area
    }

    /// Pulse duration `area / (η̃ Ω)` for carrier Rabi frequency `rabi`.
    pub fn pulse_duration(&self, rabi: f64) -> f64 {
        self.pulse_area / (self.lamb_dicke * rabi)
    }

    /// Thermal occupation mass beyond `n_max` before truncation.
    pub fn tail_mass(&self) -> f64 {
        let ratio = self.nbar / (1.0 + self.nbar);
        ratio.powi(self.n_max as i32 + 1)
    }

    /// Geometric phonon distribution with mean `nbar`, truncated at `n_max`
    /// and renormalized.
    pub fn thermal_phonons(&self) -> Result<Vec<f64>> {
        let tail = self.tail_mass();
        if tail >= Self::MAX_TAIL {
            return Err(Error::TruncationTail {
                n_max: self.n_max,
                tail,
            });
        }
        let ratio = self.nbar / (1.0 + self.nbar);
        let weights: Vec<f64> = (0..=self.n_max).map(|n| ratio.powi(n as i32)).collect();
        let total = compensated_sum(weights.iter().copied());
        Ok(weights.into_iter().map(|w| w / total).collect())
    }
}

impl Default for IonCompositeModel {
    fn default() -> Self {
        Self {
            lamb_dicke: Self::LAMB_DICKE,
            nbar: Self::RESIDUAL_NBAR,
            n_max: Self::DEFAULT_N_MAX,
            pulse_area: PI,
        }
    }
}

/// Population transfer between `|↑, n−1⟩` and `|↓, n⟩`: `sin²(A √n / 2)`.
pub fn sideband_transfer_prob(n: usize, model: &IonCompositeModel) -> Result<f64> {
    if n == 0 {
        return Err(Error::NoSidebandPartner);
    }
    Ok((0.5 * model.pulse_area * (n as f64).sqrt()).sin().powi(2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProtocolKind {
    Szilard,
    StateFlip,
    Identity,
    IonComposite(IonCompositeModel),
    Custom,
}

/// Measurement-conditioned control: one channel per record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackProtocol {
    name: String,
    kind: ProtocolKind,
    system: StateSpace,
    space: StateSpace,
    projection: Vec<usize>,
    /// p(control state | its qubit state) before the control step.
    ancilla: Vec<f64>,
    channels: [Channel; 2],
}

impl FeedbackProtocol {
    /// Protocol acting directly on the qubit.
    pub fn bare(
        name: impl Into<String>,
        kind: ProtocolKind,
        system: &StateSpace,
        channels: [Channel; 2],
    ) -> Result<Self> {
        if !system.is_two_level() {
            return Err(Error::DimensionMismatch(format!(
                "feedback needs a two-level system, got {} states",
                system.len()
            )));
        }
        let dim = system.len();
        if channels.iter().any(|c| c.dim() != dim) {
            return Err(Error::DimensionMismatch(
                "channel size differs from the system".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            kind,
            system: system.clone(),
            space: system.clone(),
            projection: (0..dim).collect(),
            ancilla: vec![1.0; dim],
            channels,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &ProtocolKind {
        &self.kind
    }

    /// Whether the channel is a reconstruction rather than a directly described protocol.
    pub fn is_reconstruction(&self) -> bool {
        matches!(self.kind, ProtocolKind::StateFlip)
    }

    /// The measured qubit.
    pub fn system(&self) -> &StateSpace {
        &self.system
    }

    /// The space the channels act on.
    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn is_composite(&self) -> bool {
        self.space.len() != self.system.len()
    }

    pub fn channel(&self, y: Record) -> &Channel {
        &self.channels[y.index()]
    }

    /// Qubit state of a control-space state.
    pub fn system_state(&self, state: usize) -> usize {
        self.projection[state]
    }

    /// Phonon number of a control-space state, for the ion model.
    pub fn phonon_number(&self, state: usize) -> Option<usize> {
        match self.kind {
            ProtocolKind::IonComposite(model) => Some(state % (model.n_max() + 1)),
            _ => None,
        }
    }

    /// Initial weights `p(s, y)` over control states and records.
    pub fn initial_joint(&self, table: &MeasurementOutcomeTable) -> Vec<[f64; 2]> {
        (0..self.space.len())
            .map(|s| {
                let x = self.projection[s];
                Record::ALL.map(|y| table.joint(x, y) * self.ancilla[s])
            })
            .collect()
    }
}

/// Szilard feedback: on record 1 the qubit is driven to `|↓⟩`, releasing `E`
/// if it was excited; on record 0 nothing happens.
pub fn szilard_protocol(space: &StateSpace) -> Result<FeedbackProtocol> {
    let idle = Channel::identity(2);
    let extract = Channel::from_map(&[DOWN, DOWN])?;
    FeedbackProtocol::bare("szilard", ProtocolKind::Szilard, space, [idle, extract])
}

/// Conditional π-flip on record 1. A wrong reading pumps `|↓⟩` up and costs `E`.
pub fn state_flip_protocol(space: &StateSpace) -> Result<FeedbackProtocol> {
    let idle = Channel::identity(2);
    let flip = Channel::from_map(&[UP, DOWN])?;
    FeedbackProtocol::bare("flip", ProtocolKind::StateFlip, space, [idle, flip])
}

/// Does nothing regardless of the record.
pub fn identity_protocol(space: &StateSpace) -> Result<FeedbackProtocol> {
    let n = space.len();
    FeedbackProtocol::bare(
        "identity",
        ProtocolKind::Identity,
        space,
        [Channel::identity(n), Channel::identity(n)],
    )
}

/// Qubit ⊗ phonon battery. On record 1 a red-sideband pulse exchanges
/// `|↑, n⟩ ↔ |↓, n+1⟩` with probability `sin²(A√(n+1)/2)`; pairs that would
/// leave the truncated space stay put.
pub fn ion_composite_protocol(
    model: &IonCompositeModel,
    ctx: &ThermalContext,
) -> Result<FeedbackProtocol> {
    let phonons = model.thermal_phonons()?;
    let system = ctx.two_level_space();
    let levels = model.n_max() + 1;
    let dim = 2 * levels;
    let index = |x: usize, n: usize| x * levels + n;

    let mut labels = Vec::with_capacity(dim);
    let mut energies = Vec::with_capacity(dim);
    let mut projection = Vec::with_capacity(dim);
    let mut ancilla = Vec::with_capacity(dim);
    for x in [DOWN, UP] {
        for (n, &weight) in phonons.iter().enumerate() {
            labels.push(format!("{}|{n}", system.label(x)));
            energies.push(system.energy(x) + n as f64 * ctx.energy_gap());
            projection.push(x);
            ancilla.push(weight);
        }
    }

    let mut entries = vec![0.0; dim * dim];
    for n in 0..levels {
        let up = index(UP, n);
        if n + 1 < levels {
            let p = sideband_transfer_prob(n + 1, model)?;
            entries[index(DOWN, n + 1) * dim + up] = p;
            entries[up * dim + up] = 1.0 - p;
        } else {
            entries[up * dim + up] = 1.0;
        }
        let down = index(DOWN, n);
        if n >= 1 {
            let p = sideband_transfer_prob(n, model)?;
            entries[index(UP, n - 1) * dim + down] = p;
            entries[down * dim + down] = 1.0 - p;
        } else {
            entries[down * dim + down] = 1.0;
        }
    }
    let pulse = Channel::from_entries(dim, entries)?;

    Ok(FeedbackProtocol {
        name: "ion".into(),
        kind: ProtocolKind::IonComposite(*model),
        system,
        space: StateSpace::new(labels, energies)?,
        projection,
        ancilla,
        channels: [Channel::identity(dim), pulse],
    })
}

/// Work released by the qubit on `x0 → xc`; negative means work was injected.
pub fn work_of_step(x0: usize, xc: usize, space: &StateSpace) -> f64 {
    space.energy(x0) - space.energy(xc)
}

/// Post-control statistics, on the qubit and on the full control space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlledDistributions {
    record: [f64; 2],
    conditional: [Option<Vec<f64>>; 2],
    composite_conditional: [Option<Vec<f64>>; 2],
    marginal: Vec<f64>,
    composite_marginal: Vec<f64>,
}

impl ControlledDistributions {
    /// `p(y)`.
    pub fn record(&self, y: Record) -> f64 {
        self.record[y.index()]
    }

    /// `q(· | y)` on the qubit; `None` if the record never occurs.
    pub fn conditional(&self, y: Record) -> Option<&[f64]> {
        self.conditional[y.index()].as_deref()
    }

    /// `q(x_c | y)`, zero for records that never occur.
    pub fn q(&self, xc: usize, y: Record) -> f64 {
        self.conditional(y).map_or(0.0, |q| q[xc])
    }

    /// `q(· | y)` on the full control space.
    pub fn composite_conditional(&self, y: Record) -> Option<&[f64]> {
        self.composite_conditional[y.index()].as_deref()
    }

    /// `p(x_c) = Σ_y p(y) q(x_c | y)`.
    pub fn marginal(&self) -> &[f64] {
        &self.marginal
    }

    pub fn composite_marginal(&self) -> &[f64] {
        &self.composite_marginal
    }

    /// Whether `(y, x_c)` can occur.
    pub fn supports(&self, y: Record, xc: usize) -> bool {
        self.q(xc, y) > 0.0
    }
}

pub fn apply_control(
    protocol: &FeedbackProtocol,
    table: &MeasurementOutcomeTable,
) -> Result<ControlledDistributions> {
    if table.prior().len() != protocol.system().len() {
        return Err(Error::DimensionMismatch(format!(
            "table over {} states, protocol system has {}",
            table.prior().len(),
            protocol.system().len()
        )));
    }
    let dim = protocol.space().len();
    let sys = protocol.system().len();
    let initial = protocol.initial_joint(table);

    let mut record = [0.0; 2];
    let mut conditional: [Option<Vec<f64>>; 2] = [None, None];
    let mut composite_conditional: [Option<Vec<f64>>; 2] = [None, None];
    for y in Record::ALL {
        let py = table.marginal_record(y);
        record[y.index()] = py;
        if py <= 0.0 {
            continue;
        }
        let channel = protocol.channel(y);
        let full: Vec<f64> = (0..dim)
            .map(|t| {
                compensated_sum((0..dim).map(|s| channel.prob(t, s) * initial[s][y.index()])) / py
            })
            .collect();
        let mut reduced = vec![0.0; sys];
        for (x, slot) in reduced.iter_mut().enumerate() {
            *slot = compensated_sum(
                (0..dim)
                    .filter(|&t| protocol.system_state(t) == x)
                    .map(|t| full[t]),
            );
        }
        conditional[y.index()] = Some(reduced);
        composite_conditional[y.index()] = Some(full);
    }

    let mix =
        |dists: &[Option<Vec<f64>>; 2], len: usize| -> Vec<f64> {
            (0..len)
                .map(|i| {
                    compensated_sum(Record::ALL.iter().filter_map(|y| {
                        dists[y.index()].as_ref().map(|q| record[y.index()] * q[i])
                    }))
                })
                .collect()
        };
    let marginal = mix(&conditional, sys);
    let composite_marginal = mix(&composite_conditional, dim);

    Ok(ControlledDistributions {
        record,
        conditional,
        composite_conditional,
        marginal,
        composite_marginal,
    })
}

/// Mean phonon number gained by the battery, `⟨n_c⟩ − ⟨n_0⟩`; `None` without a battery.
pub fn battery_gain(
    protocol: &FeedbackProtocol,
    table: &MeasurementOutcomeTable,
) -> Result<Option<f64>> {
    if protocol.phonon_number(0).is_none() {
        return Ok(None);
    }
    let cd = apply_control(protocol, table)?;
    let initial = protocol.initial_joint(table);
    let n = |s: usize| protocol.phonon_number(s).unwrap_or(0) as f64;
    let before = compensated_sum(
        initial
            .iter()
            .enumerate()
            .map(|(s, w)| (w[0] + w[1]) * n(s)),
    );
    let after = compensated_sum(
        cd.composite_marginal()
            .iter()
            .enumerate()
            .map(|(s, &p)| p * n(s)),
    );
    Ok(Some(after - before))
}
