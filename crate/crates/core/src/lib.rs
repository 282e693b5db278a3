//! Stochastic thermodynamics of a measured and feedback-controlled qubit.
//!
//! A demon measures a thermal two-level system with error `ε`, applies a
//! record-dependent control channel, and the system rethermalizes. The crate
//! computes the conditional, unconditional and informational entropy
//! productions of such cycles, their integral fluctuation theorems, the work
//! bounds they imply and the demon's efficacies, either exactly
//! ([`exact`]) or from seeded trajectory samples ([`montecarlo`]).

pub mod accounting;
pub mod error;
pub mod exact;
pub mod measurement;
pub mod montecarlo;
pub mod protocols;
pub mod sum;
pub mod thermo;

pub use accounting::{
    coarse_grained_check, efficacies, ensemble_report, entropy_productions,
    stochastic_entropy_changes, CoarseCheck, CoarseVariant, Efficacies, EntropyLedger, WorkReport,
};
pub use error::{Error, Result};
pub use exact::{
    enumerate_outcomes, exact_expectation, ft_exponential_average, Enumeration, FtResult,
    OutcomeAtom, SigmaKind,
};
pub use measurement::{error_from_pulse, measure, ErrorModel, MeasurementOutcomeTable, Record};
pub use montecarlo::{
    estimate, ft_estimate, sample_trajectories, Estimate, SigmaMode, TrajectoryBatch,
};
pub use protocols::{
    apply_control, ion_composite_protocol, sideband_transfer_prob, state_flip_protocol,
    szilard_protocol, work_of_step, ControlledDistributions, FeedbackProtocol, IonCompositeModel,
};
pub use thermo::{
    beta_from_prep_angle, equilibrium_distribution, kl_divergence, mutual_information,
    shannon_entropy, Distribution, PulsePrep, StateSpace, ThermalContext,
};
