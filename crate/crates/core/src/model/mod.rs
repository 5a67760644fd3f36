//! Single-vial primary-drying model.
//!
//! Two stages share one clock. During heating the frozen column conducts
//! heat from the shelf (Robin bottom, adiabatic top) with volumetric
//! microwave and radiation terms; it switches to sublimation when the top
//! node reaches `Tm`. During sublimation the front advances at a rate set by
//! the net heat reaching it, and the product temperature is uniform.

mod params;
mod vial;

pub use params::{
    power_densities, shelf_temperature, DryingMode, MaterialProperties, NumericsConfig,
    ProcessSettings, VialGeometry,
};
pub use vial::{trapezoid_mean, HeatingOutcome, RadiationLoad, Stage, VialModel, VialState};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("top surface never reached the sublimation temperature within {horizon} s")]
    NoSublimationReached { horizon: f64 },
    #[error("drying did not finish within {horizon} s")]
    DryingHorizonExceeded { horizon: f64 },
    #[error("non-positive heat input at the sublimation front ({flux} W/m² at t = {time} s)")]
    NegativeSublimationRate { time: f64, flux: f64 },
    #[error("stage mismatch: expected {expected:?}, found {found:?}")]
    WrongStage { expected: Stage, found: Stage },
}

/// Net radiation exchanged by one vial, as seen by the integrator.
///
/// Values are W leaving the vial (negative = absorbed) and use the vial's
/// full lateral area; the model spreads them over the product volume.
pub trait RadiationSource {
    /// Per-node exchange during heating, each evaluated at that node's
    /// temperature.
    fn node_loads(&self, t: f64, profile: &[f64], out: &mut [f64]) {
        for (o, &temp) in out.iter_mut().zip(profile) {
            *o = self.uniform_load(t, temp);
        }
    }

    /// Exchange for a vial at a single uniform temperature.
    fn uniform_load(&self, t: f64, temperature: f64) -> f64;
}

/// No radiation exchange.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoRadiation;

impl RadiationSource for NoRadiation {
    fn node_loads(&self, _t: f64, _profile: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn uniform_load(&self, _t: f64, _temperature: f64) -> f64 {
        0.0
    }
}

impl<F> RadiationSource for F
where
    F: Fn(f64, f64) -> f64,
{
    fn uniform_load(&self, t: f64, temperature: f64) -> f64 {
        self(t, temperature)
    }
}

/// One recorded sample of a vial trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub time: f64,
    pub top: f64,
    pub bottom: f64,
    pub front: f64,
    /// Height-averaged net radiation leaving the vial (W).
    pub q_rad: f64,
    /// Radiative energy absorbed so far (J).
    pub absorbed: f64,
}

/// Outcome of a complete single-vial run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VialResult {
    pub t_switch: f64,
    pub t_dry: f64,
    /// Radiative energy absorbed over the drying interval (J).
    pub absorbed_energy: f64,
    pub series: Vec<SeriesPoint>,
}

fn expect_stage(state: &VialState, expected: Stage) -> Result<(), ModelError> {
    if state.stage == expected {
        Ok(())
    } else {
        Err(ModelError::WrongStage {
            expected,
            found: state.stage,
        })
    }
}

/// Runs the heating stage until the top node reaches `Tm`.
///
/// On return the state is positioned at the switching time with a uniform
/// profile at `Tm`, ready for [`simulate_sublimation_stage`].
pub fn simulate_heating_stage(
    model: &VialModel,
    state: &mut VialState,
    source: &dyn RadiationSource,
) -> Result<f64, ModelError> {
    expect_stage(state, Stage::Heating)?;
    let mut loads = vec![0.0; model.nodes()];
    loop {
        if state.time >= model.numerics.max_time {
            return Err(ModelError::NoSublimationReached {
                horizon: model.numerics.max_time,
            });
        }
        source.node_loads(state.time, &state.profile, &mut loads);
        let t0 = state.time;
        let energy0 = state.absorbed_energy;
        if let HeatingOutcome::Switched(t_switch) =
            model.heating_step(state, RadiationLoad::PerNode(&loads))?
        {
            state.absorbed_energy = energy0 - trapezoid_mean(&loads) * (t_switch - t0);
            state.time = t_switch;
            model.begin_sublimation(state, t_switch);
            return Ok(t_switch);
        }
    }
}

/// Advances the sublimation front from the switching time to the bottom.
pub fn simulate_sublimation_stage(
    model: &VialModel,
    state: &mut VialState,
    source: &dyn RadiationSource,
) -> Result<f64, ModelError> {
    expect_stage(state, Stage::Sublimating)?;
    let dt = model.numerics.dt;
    loop {
        let t0 = state.time;
        if t0 >= model.numerics.max_time {
            return Err(ModelError::DryingHorizonExceeded {
                horizon: model.numerics.max_time,
            });
        }
        let q = source.uniform_load(t0, state.top());
        if let Some(t_dry) = model.sublimation_step(state, t0, t0 + dt, q, true)? {
            return Ok(t_dry);
        }
    }
}

/// Runs a vial from t = 0 to the end of primary drying on the fixed step
/// grid `k·dt`, the same grid used by the coupled multi-vial engine.
///
/// `series_every` records one sample per that many seconds (plus the
/// initial state and both events) when set.
pub fn simulate_single_vial(
    model: &VialModel,
    source: &dyn RadiationSource,
    series_every: Option<f64>,
) -> Result<VialResult, ModelError> {
    let mut state = model.initial_state();
    let mut loads = vec![0.0; model.nodes()];
    let mut series = Vec::new();
    let mut recorder = series_every.map(SeriesRecorder::new);
    if let Some(r) = recorder.as_mut() {
        r.push(&mut series, &state, 0.0);
    }
    while state.stage != Stage::Done {
        let t0 = state.time;
        let stage0 = state.stage;
        let load = match state.stage {
            Stage::Heating => {
                source.node_loads(t0, &state.profile, &mut loads);
                RadiationLoad::PerNode(&loads)
            }
            _ => RadiationLoad::Uniform(source.uniform_load(t0, state.top())),
        };
        let q_mean = load.mean();
        model.step(&mut state, load)?;
        if let Some(r) = recorder.as_mut() {
            r.maybe_push(&mut series, &state, q_mean, stage0 != state.stage);
        }
    }
    Ok(VialResult {
        t_switch: state.t_switch.expect("finished vial has a switch time"),
        t_dry: state.t_dry.expect("finished vial has a drying time"),
        absorbed_energy: state.absorbed_energy,
        series,
    })
}

/// Thins a trajectory to roughly one sample per interval.
#[derive(Debug, Clone)]
pub(crate) struct SeriesRecorder {
    every: f64,
    next: f64,
}

impl SeriesRecorder {
    pub(crate) fn new(every: f64) -> Self {
        Self { every, next: 0.0 }
    }

    pub(crate) fn push(&mut self, out: &mut Vec<SeriesPoint>, state: &VialState, q_rad: f64) {
        out.push(SeriesPoint {
            time: state.time,
            top: state.top(),
            bottom: state.bottom(),
            front: state.front,
            q_rad,
            absorbed: state.absorbed_energy,
        });
        self.next = state.time + self.every;
    }

    pub(crate) fn maybe_push(
        &mut self,
        out: &mut Vec<SeriesPoint>,
        state: &VialState,
        q_rad: f64,
        forced: bool,
    ) {
        if forced || state.time + 1e-9 >= self.next {
            self.push(out, state, q_rad);
        }
    }
}
