//! Seeded trajectory sampling of the measure–control–thermalize cycle.
//!
//! Trajectory `i` draws from a ChaCha8 stream selected by `i` under the root
//! seed, so a batch depends only on `(seed, n, parameters)` and never on how
//! the work was split across threads.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::accounting::{entropy_productions, EntropyProductions};
use crate::error::{Error, Result};
use crate::measurement::{MeasurementOutcomeTable, Record};
use crate::protocols::{apply_control, ControlledDistributions, FeedbackProtocol};
use crate::sum::NeumaierSum;
use crate::thermo::Distribution;

/// Where per-trajectory entropy productions get their probabilities from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SigmaMode {
    /// Model distributions, as calibrated by tomography.
    #[default]
    Model,
    /// `p(y)`, `q(x_c|y)` and `p(x_c)` re-estimated from the batch itself.
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    /// Initial control-space state.
    pub x0: usize,
    pub x0_system: usize,
    pub y: Record,
    /// Control-space state after the feedback step.
    pub xc: usize,
    pub xc_system: usize,
    /// Qubit state after rethermalization.
    pub xt: usize,
    pub work: f64,
    pub heat: f64,
    pub sigma: EntropyProductions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryBatch {
    pub records: Vec<TrajectoryRecord>,
    pub seed: u64,
    pub protocol_id: String,
    pub beta: f64,
    pub epsilon: f64,
    pub sigma_mode: SigmaMode,
}

impl TrajectoryBatch {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Inverse-CDF sampler over a fixed support.
#[derive(Debug, Clone)]
struct Categorical {
    outcomes: Vec<usize>,
    cumulative: Vec<f64>,
}

impl Categorical {
    fn new(weights: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut outcomes = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = NeumaierSum::new();
        for (i, w) in weights {
            if w > 0.0 {
                acc += w;
                outcomes.push(i);
                cumulative.push(acc.total());
            }
        }
        Self {
            outcomes,
            cumulative,
        }
    }

    fn draw(&self, u: f64) -> usize {
        let total = *self
            .cumulative
            .last()
            .expect("categorical with empty support");
        let target = u * total;
        let k = self.cumulative.partition_point(|&c| c <= target);
        self.outcomes[k.min(self.outcomes.len() - 1)]
    }
}

struct Sampler<'a> {
    protocol: &'a FeedbackProtocol,
    prior: Categorical,
    ancilla: Vec<Categorical>,
    record: Vec<Categorical>,
    // transitions[y][source]
    transitions: [Vec<Categorical>; 2],
}

impl<'a> Sampler<'a> {
    fn new(protocol: &'a FeedbackProtocol, table: &MeasurementOutcomeTable) -> Self {
        let system_len = protocol.system().len();
        let space_len = protocol.space().len();
        let prior = Categorical::new(table.prior().probabilities().iter().copied().enumerate());
        // p(s | x) over control states sharing the qubit state x
        let uniform = crate::measurement::measure(table.prior(), 0.0).expect("valid prior");
        let initial = protocol.initial_joint(&uniform);
        let ancilla = (0..system_len)
            .map(|x| {
                Categorical::new(
                    (0..space_len)
                        .filter(|&s| protocol.system_state(s) == x)
                        .map(|s| {
                            let w = initial[s][0] + initial[s][1];
                            (
                                s,
                                if table.prior().prob(x) > 0.0 {
                                    w / table.prior().prob(x)
                                } else {
                                    0.0
                                },
                            )
                        }),
                )
            })
            .collect();
        let record = (0..system_len)
            .map(|x| {
                Categorical::new(
                    Record::ALL
                        .iter()
                        .map(|&y| (y.index(), table.conditional_record(y, x))),
                )
            })
            .collect();
        let transitions = Record::ALL.map(|y| {
            (0..space_len)
                .map(|s| Categorical::new(protocol.channel(y).targets(s)))
                .collect()
        });
        Self {
            protocol,
            prior,
            ancilla,
            record,
            transitions,
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> (usize, usize, Record, usize, usize, usize) {
        let x0_system = self.prior.draw(rng.random());
        let x0 = self.ancilla[x0_system].draw(rng.random());
        let y =
            Record::from_index(self.record[x0_system].draw(rng.random())).expect("binary record");
        let xc = self.transitions[y.index()][x0].draw(rng.random());
        let xc_system = self.protocol.system_state(xc);
        let xt = self.prior.draw(rng.random());
        (x0, x0_system, y, xc, xc_system, xt)
    }
}

fn trajectory_rng(root: &ChaCha8Rng, index: usize) -> ChaCha8Rng {
    let mut rng = root.clone();
    rng.set_stream(index as u64);
    rng.set_word_pos(0);
    rng
}

pub fn sample_trajectories(
    protocol: &FeedbackProtocol,
    table: &MeasurementOutcomeTable,
    n: usize,
    seed: u64,
) -> Result<TrajectoryBatch> {
    sample_trajectories_with(protocol, table, n, seed, SigmaMode::Model)
}

pub fn sample_trajectories_with(
    protocol: &FeedbackProtocol,
    table: &MeasurementOutcomeTable,
    n: usize,
    seed: u64,
    mode: SigmaMode,
) -> Result<TrajectoryBatch> {
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    let cd = apply_control(protocol, table)?;
    let sampler = Sampler::new(protocol, table);
    let root = ChaCha8Rng::seed_from_u64(seed);

    let draw = |i: usize| sampler.draw(&mut trajectory_rng(&root, i));
    #[cfg(feature = "parallel")]
    let draws: Vec<_> = {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(draw).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let draws: Vec<_> = (0..n).map(draw).collect();

    let system = protocol.system();
    let sigma_table = match mode {
        SigmaMode::Model => sigma_table(&cd, table.prior())?,
        SigmaMode::Empirical => {
            let empirical = empirical_controlled(&draws, system.len());
            empirical_sigma_table(&empirical, table.prior())?
        }
    };

    let records = draws
        .into_iter()
        .map(|(x0, x0_system, y, xc, xc_system, xt)| TrajectoryRecord {
            x0,
            x0_system,
            y,
            xc,
            xc_system,
            xt,
            work: system.energy(x0_system) - system.energy(xc_system),
            heat: system.energy(xt) - system.energy(xc_system),
            sigma: sigma_table[y.index()][xc_system].expect("sampled outcomes are realizable"),
        })
        .collect();

    Ok(TrajectoryBatch {
        records,
        seed,
        protocol_id: protocol.name().to_string(),
        beta: (table.prior().prob(0) / table.prior().prob(1)).ln()
            / (system.energy(1) - system.energy(0)),
        epsilon: table.epsilon(),
        sigma_mode: mode,
    })
}

type SigmaTable = [Vec<Option<EntropyProductions>>; 2];

fn sigma_table(cd: &ControlledDistributions, p_eq: &Distribution) -> Result<SigmaTable> {
    let states = p_eq.len();
    let mut out: SigmaTable = [vec![None; states], vec![None; states]];
    for y in Record::ALL {
        for (xc, slot) in out[y.index()].iter_mut().enumerate() {
            if cd.supports(y, xc) {
                *slot = Some(entropy_productions(y, xc, cd, p_eq)?);
            }
        }
    }
    Ok(out)
}

struct EmpiricalControlled {
    record: [f64; 2],
    conditional: [Vec<f64>; 2],
    marginal: Vec<f64>,
}

fn empirical_controlled(
    draws: &[(usize, usize, Record, usize, usize, usize)],
    states: usize,
) -> EmpiricalControlled {
    let mut counts = [vec![0usize; states], vec![0usize; states]];
    for &(_, _, y, _, xc_system, _) in draws {
        counts[y.index()][xc_system] += 1;
    }
    let n = draws.len() as f64;
    let per_record = counts.clone().map(|c| c.iter().sum::<usize>());
    let record = per_record.map(|c| c as f64 / n);
    let conditional = [0, 1].map(|y| {
        counts[y]
            .iter()
            .map(|&c| {
                if per_record[y] > 0 {
                    c as f64 / per_record[y] as f64
                } else {
                    0.0
                }
            })
            .collect()
    });
    let marginal = (0..states)
        .map(|x| (counts[0][x] + counts[1][x]) as f64 / n)
        .collect();
    EmpiricalControlled {
        record,
        conditional,
        marginal,
    }
}

fn empirical_sigma_table(e: &EmpiricalControlled, p_eq: &Distribution) -> Result<SigmaTable> {
    let states = p_eq.len();
    let mut out: SigmaTable = [vec![None; states], vec![None; states]];
    for y in Record::ALL {
        if e.record[y.index()] == 0.0 {
            continue;
        }
        for (xc, slot) in out[y.index()].iter_mut().enumerate() {
            let q = e.conditional[y.index()][xc];
            if q > 0.0 {
                let eq = p_eq.prob(xc);
                if eq <= 0.0 {
                    return Err(Error::AbsolutelyIrreversible { state: xc });
                }
                let p = e.marginal[xc];
                *slot = Some(EntropyProductions {
                    cond: (q / eq).ln(),
                    uncond: (p / eq).ln(),
                    info: (q / p).ln(),
                });
            }
        }
    }
    Ok(out)
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    /// A single sample carries no spread information; its stderr is reported as 0.
    pub fn is_single_sample(&self) -> bool {
        self.n == 1
    }

    /// `|mean − target| ≤ k·stderr`, plus a 1e-12 floor so constant
    /// observables are not failed by rounding in the mean.
    pub fn agrees_with(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr + 1e-12
    }

    pub fn relative_stderr(&self) -> f64 {
        self.stderr / self.mean.abs()
    }
}

pub fn estimate<F>(batch: &TrajectoryBatch, observable: F) -> Result<Estimate>
where
    F: Fn(&TrajectoryRecord) -> f64,
{
    let n = batch.len();
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    let values: Vec<f64> = batch.records.iter().map(&observable).collect();
    let mean = values.iter().copied().sum::<NeumaierSum>().total() / n as f64;
    if n == 1 {
        return Ok(Estimate {
            mean,
            stderr: 0.0,
            n,
        });
    }
    let ss = values
        .iter()
        .map(|v| (v - mean).powi(2))
        .sum::<NeumaierSum>()
        .total();
    let variance = ss / (n - 1) as f64;
    Ok(Estimate {
        mean,
        stderr: (variance / n as f64).sqrt(),
        n,
    })
}

/// Estimates of `⟨e^{−σ_{X|Y}}⟩`, `⟨e^{−σ_X}⟩` and `⟨e^{−σ_I}⟩`.
pub fn ft_estimate(batch: &TrajectoryBatch) -> Result<[Estimate; 3]> {
    Ok([
        estimate(batch, |r| (-r.sigma.cond).exp())?,
        estimate(batch, |r| (-r.sigma.uncond).exp())?,
        estimate(batch, |r| (-r.sigma.info).exp())?,
    ])
}
