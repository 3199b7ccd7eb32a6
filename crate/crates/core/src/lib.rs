//! Suspension of a near-identity symplectic map to the time-one section map
//! of a Hamiltonian flow on a space of one more degree of freedom.

pub mod error;
pub mod flow;
pub mod generator;
pub mod isotopy;
pub mod numerics;
pub mod pipeline;
pub mod suspension;

pub use error::{Error, Result};
pub use flow::{
    closed_form_flow, integrate, section_trajectory, time_one_section_map, yd_excursion,
    FlowOptions, SectionRecord, Trajectory,
};
pub use generator::{GeneratingPerturbation, GeneratorFamily, GeneratorField};
pub use isotopy::{map_from_generator, IsotopyFamily};
pub use pipeline::{ExperimentConfig, VerificationReport};
pub use suspension::{norm_gap_report, NormGrids, NormReport, PhasePoint, SuspendedHamiltonian};
