//! The demon's noisy two-outcome measurement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::thermo::{Distribution, DOWN, UP};

/// The demon's measurement record. `Zero` reads `|↓⟩`, `One` reads `|↑⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Record {
    Zero,
    One,
}

impl Record {
    pub const ALL: [Record; 2] = [Record::Zero, Record::One];

    pub fn index(self) -> usize {
        match self {
            Record::Zero => 0,
            Record::One => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Record::Zero),
            1 => Some(Record::One),
            _ => None,
        }
    }

    /// The record an error-free measurement of `state` would produce.
    pub fn matching(state: usize) -> Self {
        if state == UP {
            Record::One
        } else {
            Record::Zero
        }
    }
}

/// Error calibration `ε = 1 − exp(−ζθ)` from the 854-nm pulse angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    zeta: f64,
    theta: f64,
}

impl ErrorModel {
    /// Decay parameter fitted to the depumping calibration.
    pub const MEASURED_ZETA: f64 = 1.94;

    pub fn new(zeta: f64, theta: f64) -> Result<Self> {
        if !(zeta.is_finite() && zeta > 0.0) {
            return Err(Error::InvalidParameter {
                name: "zeta",
                reason: format!("must be positive, got {zeta}"),
            });
        }
        if theta.is_nan() || theta < 0.0 {
            return Err(Error::InvalidParameter {
                name: "theta",
                reason: format!("pulse angle must be >= 0, got {theta}"),
            });
        }
        Ok(Self { zeta, theta })
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

pub fn error_from_pulse(model: &ErrorModel) -> f64 {
    -(-model.zeta * model.theta).exp_m1()
}

/// Per-state flip probabilities `p(y ≠ x₀ | x₀)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementError {
    pub down: f64,
    pub up: f64,
}

impl MeasurementError {
    pub fn symmetric(epsilon: f64) -> Result<Self> {
        Self::asymmetric(epsilon, epsilon)
    }

    pub fn asymmetric(down: f64, up: f64) -> Result<Self> {
        for e in [down, up] {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::InvalidParameter {
                    name: "epsilon",
                    reason: format!("error probability must lie in [0, 1], got {e}"),
                });
            }
        }
        Ok(Self { down, up })
    }

    pub fn for_state(&self, state: usize) -> f64 {
        if state == UP {
            self.up
        } else {
            self.down
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.down == self.up
    }
}

/// Joint statistics of the initial state `x₀` and the record `y`.
///
/// `joint[x0][y]` is stored; marginals and conditionals are derived on
/// request so they can never drift out of sync with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementOutcomeTable {
    prior: Distribution,
    error: MeasurementError,
    joint: [[f64; 2]; 2],
}

impl MeasurementOutcomeTable {
    pub fn prior(&self) -> &Distribution {
        &self.prior
    }

    pub fn error(&self) -> MeasurementError {
        self.error
    }

    /// The symmetric error; for an asymmetric model, the error on `|↑⟩`.
    pub fn epsilon(&self) -> f64 {
        self.error.up
    }

    pub fn joint(&self, x0: usize, y: Record) -> f64 {
        self.joint[x0][y.index()]
    }

    pub fn marginal_state(&self, x0: usize) -> f64 {
        self.prior.prob(x0)
    }

    pub fn marginal_record(&self, y: Record) -> f64 {
        self.joint[DOWN][y.index()] + self.joint[UP][y.index()]
    }

    /// `p(x₀ | y)`, or `None` when the record never occurs.
    pub fn conditional_state(&self, x0: usize, y: Record) -> Option<f64> {
        let py = self.marginal_record(y);
        (py > 0.0).then(|| self.joint(x0, y) / py)
    }

    /// `p(y | x₀)`.
    pub fn conditional_record(&self, y: Record, x0: usize) -> f64 {
        let e = self.error.for_state(x0);
        if y == Record::matching(x0) {
            1.0 - e
        } else {
            e
        }
    }
}

/// Noisy measurement of a two-level equilibrium state with symmetric error.
pub fn measure(p_eq: &Distribution, epsilon: f64) -> Result<MeasurementOutcomeTable> {
    measure_with(p_eq, MeasurementError::symmetric(epsilon)?)
}

pub fn measure_with(
    p_eq: &Distribution,
    error: MeasurementError,
) -> Result<MeasurementOutcomeTable> {
    if p_eq.len() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "measurement needs a two-level prior, got {} states",
            p_eq.len()
        )));
    }
    let mut joint = [[0.0; 2]; 2];
    for (x0, row) in joint.iter_mut().enumerate() {
        let e = error.for_state(x0);
        for y in Record::ALL {
            let likelihood = if y == Record::matching(x0) {
                1.0 - e
            } else {
                e
            };
            row[y.index()] = p_eq.prob(x0) * likelihood;
        }
    }
    Ok(MeasurementOutcomeTable {
        prior: p_eq.clone(),
        error,
        joint,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermo::mutual_information;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn prior(p_down: f64) -> Distribution {
        Distribution::new(vec![p_down, 1.0 - p_down]).unwrap()
    }

    #[test]
    fn pulse_error_examples() {
        assert_eq!(error_from_pulse(&ErrorModel::new(1.94, 0.0).unwrap()), 0.0);
        assert_eq!(error_from_pulse(&ErrorModel::new(1.94, 1e6).unwrap()), 1.0);
        let e = error_from_pulse(&ErrorModel::new(1.94, 0.357).unwrap());
        assert_abs_diff_eq!(e, 1.0 - (-1.94f64 * 0.357).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(e, 0.4997, epsilon = 1e-4);
    }

    #[test]
    fn error_model_validation() {
        assert!(ErrorModel::new(0.0, 1.0).is_err());
        assert!(ErrorModel::new(1.0, -1.0).is_err());
        assert!(MeasurementError::symmetric(1.5).is_err());
    }

    #[test]
    fn perfect_measurement() {
        let t = measure(&prior(0.75), 0.0).unwrap();
        assert_eq!(t.marginal_record(Record::One), 0.25);
        assert_eq!(t.conditional_state(UP, Record::One), Some(1.0));
    }

    #[test]
    fn noisy_measurement_brute_force() {
        // 4-cell table by hand: (↓,0)=0.6 (↓,1)=0.15 (↑,0)=0.05 (↑,1)=0.2
        let t = measure(&prior(0.75), 0.2).unwrap();
        assert_abs_diff_eq!(t.joint(DOWN, Record::Zero), 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(t.joint(DOWN, Record::One), 0.15, epsilon = 1e-15);
        assert_abs_diff_eq!(t.joint(UP, Record::Zero), 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(t.joint(UP, Record::One), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(t.marginal_record(Record::One), 0.35, epsilon = 1e-15);
        assert_abs_diff_eq!(
            t.conditional_state(UP, Record::One).unwrap(),
            4.0 / 7.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn always_wrong_measurement() {
        let t = measure(&prior(0.75), 1.0).unwrap();
        assert_eq!(t.marginal_record(Record::One), 0.75);
        assert_eq!(t.conditional_state(UP, Record::One), Some(0.0));
    }

    #[test]
    fn mutual_information_examples() {
        assert!(mutual_information(&measure(&prior(0.75), 0.5).unwrap()) < 1e-12);
        let h = -(0.75 * 0.75f64.ln() + 0.25 * 0.25f64.ln());
        assert_abs_diff_eq!(
            mutual_information(&measure(&prior(0.75), 0.0).unwrap()),
            h,
            epsilon = 1e-15
        );

        // brute force over the 4-cell table
        let joint: [[f64; 2]; 2] = [[0.6, 0.15], [0.05, 0.2]];
        let px = [0.75, 0.25];
        let py = [0.65, 0.35];
        let mut oracle = 0.0;
        for x in 0..2 {
            for y in 0..2 {
                oracle += joint[x][y] * (joint[x][y] / (px[x] * py[y])).ln();
            }
        }
        let mi = mutual_information(&measure(&prior(0.75), 0.2).unwrap());
        assert_abs_diff_eq!(mi, oracle, epsilon = 1e-14);
        assert!(mi > 0.0 && mi < h);
    }

    #[test]
    fn mutual_information_monotone_in_error() {
        for p in [0.5, 0.75, 0.933] {
            let mut last = f64::INFINITY;
            for i in 0..=50 {
                let eps = 0.01 * i as f64;
                let mi = mutual_information(&measure(&prior(p), eps).unwrap());
                assert!(mi <= last + 1e-15, "p={p} eps={eps}");
                last = mi;
            }
        }
    }

    #[test]
    fn asymmetric_errors_are_honoured() {
        let t = measure_with(
            &prior(0.75),
            MeasurementError::asymmetric(0.1, 0.3).unwrap(),
        )
        .unwrap();
        assert_abs_diff_eq!(
            t.conditional_record(Record::One, DOWN),
            0.1,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(t.conditional_record(Record::Zero, UP), 0.3, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn table_is_consistent(p_down in 0.0f64..=1.0, eps in 0.0f64..=1.0) {
            let t = measure(&prior(p_down), eps).unwrap();
            for x0 in [DOWN, UP] {
                let row = t.joint(x0, Record::Zero) + t.joint(x0, Record::One);
                prop_assert!((row - t.marginal_state(x0)).abs() <= 1e-12);
            }
            let total = t.marginal_record(Record::Zero) + t.marginal_record(Record::One);
            prop_assert!((total - 1.0).abs() <= 1e-12);
            for y in Record::ALL {
                for x0 in [DOWN, UP] {
                    if let Some(post) = t.conditional_state(x0, y) {
                        let lhs = post * t.marginal_record(y);
                        let rhs = t.conditional_record(y, x0) * t.marginal_state(x0);
                        prop_assert!((lhs - rhs).abs() <= 1e-12);
                    }
                }
            }
        }

        #[test]
        fn uninformative_measurement_carries_no_information(p_down in 0.0f64..=1.0) {
            prop_assert!(mutual_information(&measure(&prior(p_down), 0.5).unwrap()) < 1e-12);
        }

        #[test]
        fn pulse_error_is_monotone(zeta in 0.1f64..5.0, a in 0.0f64..3.0, b in 0.0f64..3.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let e_lo = error_from_pulse(&ErrorModel::new(zeta, lo).unwrap());
            let e_hi = error_from_pulse(&ErrorModel::new(zeta, hi).unwrap());
            prop_assert!(e_lo <= e_hi);
            prop_assert!((0.0..1.0).contains(&e_lo));
        }
    }
}
