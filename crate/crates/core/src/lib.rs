//! Numerical construction of single-point blowup for
//! `u_t = Delta u + |u|^{p-1} u ln^alpha(u^2 + 2)` in similarity variables.
//!
//! The crate is organised around the pipeline
//! [`scaling`] (rate `psi`, coefficient `h`) -> [`terms`] (profile and the
//! terms of the perturbation equation) -> [`integrator`] (time marching) ->
//! [`spectral`] (Hermite decomposition, shrinking set) -> [`shooting`]
//! (parameter search) -> [`reconstruction`] (physical variables).

pub mod error;
pub mod grid;
pub mod integrator;
pub mod numerics;
pub mod params;
pub mod reconstruction;
pub mod scaling;
pub mod shooting;
pub mod spectral;
pub mod terms;

pub use error::{Error, Result};
pub use grid::{Geometry, Grid, GridState};
pub use integrator::{rhs_w, Dynamics, ExitInfo, ExitSign, Integrator, Observation, TrajectoryRecord};
pub use params::ProblemParams;
pub use scaling::{h_expansion, kappa_alpha, ln_psi1_expansion, tail_time_integral, ScalingMap};
pub use shooting::{
    initial_data, search, shoot, shoot_with_record, ExitReport, SearchOptions, SearchOutcome, ShotConfig, ShotSettings, ShotSetup,
};
pub use spectral::{cutoff_chi, Component, Decomposer, HermiteBasis, Membership, ModeDecomposition, ShrinkingSetSpec};
pub use terms::{Profile, TermContext, TermsAt};
