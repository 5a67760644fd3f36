//! Primary-drying simulation for arrays of vials in conventional,
//! microwave-assisted and hybrid freeze drying, with thermal radiation
//! exchanged among all vials and the chamber wall.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: single-vial two-stage model (heating, then sublimation).
//! - [`geometry`]: 2D cross-section scenes (vial circles, chamber, occluders).
//! - [`view_factors`]: closed-form and Monte Carlo view factors.
//! - [`radiation`]: diffuse-gray resistances and the radiosity network.
//! - [`sim`]: coupled multi-vial simulation on a shared clock.
//! - [`estimation`]: scalar parameter fits and hybrid resistance training.
//! - [`config`], [`export`], [`validation`]: scenario files, result bundles
//!   and the built-in reference checks.

pub mod config;
pub mod estimation;
pub mod export;
pub mod geometry;
pub mod model;
pub mod radiation;
pub mod sim;
pub mod units;
pub mod validation;
pub mod view_factors;

pub use geometry::{Chamber, Layout, Occluder, Point, Scene, VialLabel};
pub use model::{
    DryingMode, MaterialProperties, ModelError, NumericsConfig, ProcessSettings, Stage,
    VialGeometry, VialModel, VialResult, VialState,
};
pub use radiation::{RadiosityResult, SurfaceSet, SIGMA};
pub use sim::{Approach, Scenario, SimulationResult};
pub use view_factors::{McConfig, ViewFactorMatrix};

/// Seconds per hour.
pub const HOUR: f64 = 3600.0;
