//! State spaces, Boltzmann equilibria and information measures.
//!
//! Units throughout: `k_B = 1`, energies in units of the qubit gap `E`,
//! entropies in nats.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::MeasurementOutcomeTable;
use crate::sum::compensated_sum;

/// Index of the ground state `|↓⟩` in a two-level space.
pub const DOWN: usize = 0;
/// Index of the excited state `|↑⟩` in a two-level space.
pub const UP: usize = 1;

/// Tolerance on the total probability of a [`Distribution`].
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Entropies (nats) this close to zero are treated as zero when scaled by an infinite temperature.
pub const ENTROPY_ROUNDING: f64 = 1e-12;

/// A finite, labelled set of states with an energy attached to each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    labels: Vec<String>,
    energies: Vec<f64>,
}

impl StateSpace {
    pub fn new(labels: Vec<String>, energies: Vec<f64>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidStateSpace("no states".into()));
        }
        if labels.len() != energies.len() {
            return Err(Error::InvalidStateSpace(format!(
                "{} labels but {} energies",
                labels.len(),
                energies.len()
            )));
        }
        for (i, label) in labels.iter().enumerate() {
            if labels[..i].contains(label) {
                return Err(Error::InvalidStateSpace(format!(
                    "duplicate label {label:?}"
                )));
            }
        }
        if let Some(e) = energies.iter().find(|e| !e.is_finite()) {
            return Err(Error::InvalidStateSpace(format!("non-finite energy {e}")));
        }
        Ok(Self { labels, energies })
    }

    /// The qubit: `down` at energy 0 and `up` at energy `gap`.
    pub fn two_level(gap: f64) -> Self {
        Self {
            labels: vec!["down".into(), "up".into()],
            energies: vec![0.0, gap],
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn is_two_level(&self) -> bool {
        self.len() == 2
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, state: usize) -> &str {
        &self.labels[state]
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn energy(&self, state: usize) -> f64 {
        self.energies[state]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// The heat bath: inverse temperature and the qubit energy gap.
///
/// `beta == 0` is infinite temperature; [`ThermalContext::temperature`] then
/// returns `f64::INFINITY` rather than a large finite stand-in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalContext {
    beta: f64,
    energy_gap: f64,
}

impl ThermalContext {
    pub fn new(beta: f64) -> Result<Self> {
        Self::with_gap(beta, 1.0)
    }

    pub fn with_gap(beta: f64, energy_gap: f64) -> Result<Self> {
        if beta.is_nan() || beta < 0.0 {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: format!("inverse temperature must be >= 0, got {beta}"),
            });
        }
        if !(energy_gap.is_finite() && energy_gap > 0.0) {
            return Err(Error::InvalidParameter {
                name: "energy_gap",
                reason: format!("must be positive and finite, got {energy_gap}"),
            });
        }
        Ok(Self { beta, energy_gap })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn energy_gap(&self) -> f64 {
        self.energy_gap
    }

    pub fn temperature(&self) -> f64 {
        if self.beta == 0.0 {
            f64::INFINITY
        } else {
            1.0 / self.beta
        }
    }

    pub fn is_infinite_temperature(&self) -> bool {
        self.beta == 0.0
    }

    /// Converts an entropy (nats) to an energy, `T·s`.
    ///
    /// At infinite temperature, entropies within rounding of zero map to 0
    /// instead of `±∞`.
    pub fn energy_of_entropy(&self, nats: f64) -> f64 {
        if self.is_infinite_temperature() {
            if nats.abs() <= ENTROPY_ROUNDING {
                0.0
            } else {
                f64::INFINITY.copysign(nats)
            }
        } else {
            self.temperature() * nats
        }
    }

    pub fn two_level_space(&self) -> StateSpace {
        StateSpace::two_level(self.energy_gap)
    }
}

/// A probability vector aligned with some [`StateSpace`]. Exact zeros are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    probabilities: Vec<f64>,
}

impl Distribution {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::InvalidDistribution("empty".into()));
        }
        if let Some(p) = probabilities
            .iter()
            .find(|p| !(p.is_finite() && (0.0..=1.0).contains(*p)))
        {
            return Err(Error::InvalidDistribution(format!(
                "entry {p} outside [0, 1]"
            )));
        }
        let total = compensated_sum(probabilities.iter().copied());
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {total}"
            )));
        }
        Ok(Self { probabilities })
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidDistribution(
                "weights must be finite and >= 0".into(),
            ));
        }
        let total = compensated_sum(weights.iter().copied());
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn point_mass(len: usize, state: usize) -> Self {
        let mut probabilities = vec![0.0; len];
        probabilities[state] = 1.0;
        Self { probabilities }
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn prob(&self, state: usize) -> f64 {
        self.probabilities[state]
    }

    pub fn in_support(&self, state: usize) -> bool {
        self.probabilities[state] > 0.0
    }
}

/// Preparation pulse angle `θ_c = Ω₁τ₁` of the dephased 729-nm rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulsePrep {
    theta_c: f64,
}

impl PulsePrep {
    pub fn new(theta_c: f64) -> Result<Self> {
        if !(theta_c > 0.0 && theta_c <= PI) {
            return Err(Error::InvalidParameter {
                name: "theta_c",
                reason: format!("preparation angle must lie in (0, pi], got {theta_c}"),
            });
        }
        Ok(Self { theta_c })
    }

    pub fn theta_c(&self) -> f64 {
        self.theta_c
    }

    /// `cos θ_c`, evaluated as `sin(π/2 − θ_c)` so that `θ_c = π/2` gives exactly 0.
    pub fn cos(&self) -> f64 {
        (FRAC_PI_2 - self.theta_c).sin()
    }

    /// Ground-state population after dephasing, `(1 + cos θ_c) / 2`.
    pub fn ground_population(&self) -> f64 {
        0.5 * (1.0 + self.cos())
    }

    /// Thermal context for the prepared state. Angles beyond `π/2` give a
    /// population inversion (negative β), which is rejected.
    pub fn context(&self) -> Result<ThermalContext> {
        ThermalContext::new(beta_from_prep_angle(self))
    }
}

/// Effective inverse temperature `ln[(1 + cos θ_c) / (1 − cos θ_c)]`.
pub fn beta_from_prep_angle(prep: &PulsePrep) -> f64 {
    let c = prep.cos();
    // 2·atanh(c) is the same quantity with better accuracy near c = 0.
    2.0 * c.atanh()
}

/// Boltzmann distribution `p_i ∝ exp(−β E_i)`.
pub fn equilibrium_distribution(ctx: &ThermalContext, space: &StateSpace) -> Distribution {
    let e_min = space
        .energies()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let beta = ctx.beta();
    let weights: Vec<f64> = space
        .energies()
        .iter()
        .map(|&e| {
            let excess = e - e_min;
            if excess == 0.0 {
                1.0
            } else {
                (-beta * excess).exp()
            }
        })
        .collect();
    let total = compensated_sum(weights.iter().copied());
    Distribution {
        probabilities: weights.iter().map(|w| w / total).collect(),
    }
}

/// `−Σ p ln p` with `0 ln 0 = 0`.
pub fn shannon_entropy(d: &Distribution) -> f64 {
    -compensated_sum(
        d.probabilities()
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln()),
    )
}

/// `Σ p ln(p / q)`; fails when `p` has mass outside the support of `q`.
pub fn kl_divergence(p: &Distribution, q: &Distribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch(format!(
            "distributions of length {} and {}",
            p.len(),
            q.len()
        )));
    }
    let mut terms = Vec::with_capacity(p.len());
    for (state, (&pi, &qi)) in p.probabilities().iter().zip(q.probabilities()).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(Error::AbsolutelyIrreversible { state });
        }
        terms.push(pi * (pi / qi).ln());
    }
    // Rounding can leave a result a few ulp below zero.
    Ok(compensated_sum(terms).max(0.0))
}

/// Mutual information between the initial system state and the demon's record.
pub fn mutual_information(table: &MeasurementOutcomeTable) -> f64 {
    let mut terms = Vec::with_capacity(4);
    for x0 in 0..2 {
        for y in crate::measurement::Record::ALL {
            let joint = table.joint(x0, y);
            if joint > 0.0 {
                let product = table.marginal_state(x0) * table.marginal_record(y);
                terms.push(joint * (joint / product).ln());
            }
        }
    }
    compensated_sum(terms).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn two_level(beta: f64) -> Distribution {
        let ctx = ThermalContext::new(beta).unwrap();
        equilibrium_distribution(&ctx, &ctx.two_level_space())
    }

    #[test]
    fn infinite_temperature_is_uniform() {
        assert_eq!(two_level(0.0).probabilities(), &[0.5, 0.5]);
        assert!(ThermalContext::new(0.0)
            .unwrap()
            .temperature()
            .is_infinite());
    }

    #[test]
    fn ln3_gives_three_to_one() {
        let d = two_level(3f64.ln());
        assert_abs_diff_eq!(d.prob(DOWN), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(d.prob(UP), 0.25, epsilon = 1e-15);
        // closed forms 1/(1+e^{-β}) and 1/(1+e^{β})
        assert_abs_diff_eq!(
            d.prob(DOWN),
            1.0 / (1.0 + (-3f64.ln()).exp()),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(d.prob(UP), 1.0 / (1.0 + 3f64.ln().exp()), epsilon = 1e-15);
    }

    #[test]
    fn zero_temperature_is_ground_state() {
        assert_eq!(two_level(f64::INFINITY).probabilities(), &[1.0, 0.0]);
        assert_eq!(two_level(800.0).probabilities(), &[1.0, 0.0]);
    }

    #[test]
    fn negative_beta_rejected() {
        assert!(ThermalContext::new(-0.1).is_err());
        assert!(ThermalContext::new(f64::NAN).is_err());
    }

    #[test]
    fn prep_angle_examples() {
        let half = PulsePrep::new(FRAC_PI_2).unwrap();
        assert_eq!(beta_from_prep_angle(&half), 0.0);
        assert!(half.context().unwrap().temperature().is_infinite());

        let sixth = PulsePrep::new(PI / 6.0).unwrap();
        let c = 3f64.sqrt() / 2.0;
        let beta = ((1.0 + c) / (1.0 - c)).ln();
        assert_abs_diff_eq!(beta_from_prep_angle(&sixth), beta, epsilon = 1e-12);
        assert_abs_diff_eq!(1.0 / beta_from_prep_angle(&sixth), 0.3797, epsilon = 1e-4);

        let third = PulsePrep::new(PI / 3.0).unwrap();
        assert_abs_diff_eq!(third.ground_population(), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(beta_from_prep_angle(&third), 3f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn degenerate_prep_rejected() {
        assert!(PulsePrep::new(0.0).is_err());
        assert!(PulsePrep::new(-1.0).is_err());
        assert!(PulsePrep::new(3.5).is_err());
        // inversion: valid angle, but no thermal context
        assert!(PulsePrep::new(2.0).unwrap().context().is_err());
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(shannon_entropy(&Distribution::point_mass(2, 0)), 0.0);
        let fair = Distribution::new(vec![0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(shannon_entropy(&fair), 2f64.ln(), epsilon = 1e-15);
        let d = Distribution::new(vec![0.75, 0.25]).unwrap();
        let expected = -(0.75 * 0.75f64.ln() + 0.25 * 0.25f64.ln());
        assert_abs_diff_eq!(shannon_entropy(&d), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(shannon_entropy(&d), 0.5623, epsilon = 1e-4);
    }

    #[test]
    fn kl_examples() {
        let eq = Distribution::new(vec![0.75, 0.25]).unwrap();
        assert_eq!(kl_divergence(&eq, &eq).unwrap(), 0.0);
        let delta = Distribution::point_mass(2, DOWN);
        assert_abs_diff_eq!(
            kl_divergence(&delta, &eq).unwrap(),
            (1.0f64 / 0.75).ln(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(kl_divergence(&delta, &eq).unwrap(), 0.2877, epsilon = 1e-4);
        let controlled = Distribution::new(vec![0.95, 0.05]).unwrap();
        assert_abs_diff_eq!(
            kl_divergence(&controlled, &eq).unwrap(),
            0.1441,
            epsilon = 1e-4
        );
    }

    #[test]
    fn kl_support_violation_is_distinct_error() {
        let delta = Distribution::point_mass(2, UP);
        let ground = Distribution::point_mass(2, DOWN);
        assert_eq!(
            kl_divergence(&delta, &ground),
            Err(Error::AbsolutelyIrreversible { state: UP })
        );
    }

    #[test]
    fn state_space_validation() {
        assert!(StateSpace::new(vec![], vec![]).is_err());
        assert!(StateSpace::new(vec!["a".into(), "a".into()], vec![0.0, 1.0]).is_err());
        assert!(StateSpace::new(vec!["a".into()], vec![f64::NAN]).is_err());
        assert!(StateSpace::new(vec!["a".into()], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn distribution_validation() {
        assert!(Distribution::new(vec![0.5, 0.4]).is_err());
        assert!(Distribution::new(vec![1.5, -0.5]).is_err());
        assert!(Distribution::new(vec![]).is_err());
        assert!(Distribution::new(vec![1.0, 0.0]).is_ok());
    }

    fn distribution(len: usize) -> impl Strategy<Value = Distribution> {
        proptest::collection::vec(0.01f64..1.0, len)
            .prop_map(|w| Distribution::from_weights(&w).unwrap())
    }

    proptest! {
        #[test]
        fn equilibrium_is_normalized(beta in 0.0f64..=50.0, gap in 0.1f64..5.0) {
            let ctx = ThermalContext::with_gap(beta, gap).unwrap();
            let space = StateSpace::new(
                vec!["a".into(), "b".into(), "c".into()],
                vec![0.0, gap, 2.5 * gap],
            ).unwrap();
            let d = equilibrium_distribution(&ctx, &space);
            prop_assert!((compensated_sum(d.probabilities().iter().copied()) - 1.0).abs() <= 1e-12);
            let q = equilibrium_distribution(&ctx, &ctx.two_level_space());
            prop_assert!((q.prob(DOWN) + q.prob(UP) - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn prep_and_equilibrium_compose(theta in 1e-3f64..=FRAC_PI_2) {
            let prep = PulsePrep::new(theta).unwrap();
            let ctx = prep.context().unwrap();
            let d = equilibrium_distribution(&ctx, &ctx.two_level_space());
            prop_assert!((d.prob(DOWN) - (1.0 + theta.cos()) / 2.0).abs() <= 1e-12);
        }

        #[test]
        fn kl_is_nonnegative_and_vanishes_on_diagonal(p in distribution(4), q in distribution(4)) {
            let d = kl_divergence(&p, &q).unwrap();
            prop_assert!(d >= 0.0);
            prop_assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
            if p != q {
                let gap: f64 = p.probabilities().iter().zip(q.probabilities()).map(|(a, b)| (a - b).abs()).sum();
                if gap > 1e-6 {
                    prop_assert!(d > 0.0);
                }
            }
        }
    }
}
