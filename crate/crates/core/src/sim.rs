//! Coupled multi-vial simulation.
//!
//! All vials advance on one clock with a shared step. With the network
//! approach every step evaluates the radiosity network once per spatial
//! node: heating vials contribute their node temperatures, sublimating and
//! finished vials their uniform temperature. The other approaches give each
//! vial its own radiation law, so vials run independently.

use std::path::PathBuf;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimation::HybridMap;
use crate::geometry::{classify_vials, GeometryError, Scene, VialLabel};
use crate::model::{
    simulate_single_vial, MaterialProperties, ModelError, NoRadiation, NumericsConfig,
    ProcessSettings, RadiationLoad, RadiationSource, SeriesPoint, SeriesRecorder, Stage,
    VialGeometry, VialModel, VialState,
};
use crate::radiation::{
    background_temperatures, hybrid_qrad, simplified_qrad, NetworkOperator, RadiationError,
    SurfaceSet,
};
use crate::view_factors::{
    analytical_matrix, complete_and_validate, monte_carlo_view_factors, McConfig,
    ViewFactorError, ViewFactorMatrix,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approach {
    /// Full radiosity network over every surface.
    Network,
    /// Each vial exchanges with the wall alone through its wall view factor.
    Simplified,
    /// Each vial exchanges with the wall through a fitted resistance.
    Hybrid,
    /// No radiation.
    None,
}

impl std::fmt::Display for Approach {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Approach::Network => "network",
            Approach::Simplified => "simplified",
            Approach::Hybrid => "hybrid",
            Approach::None => "none",
        })
    }
}

impl std::str::FromStr for Approach {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "network" => Ok(Approach::Network),
            "simplified" => Ok(Approach::Simplified),
            "hybrid" => Ok(Approach::Hybrid),
            "none" => Ok(Approach::None),
            other => Err(format!(
                "unknown approach '{other}' (expected network, simplified, hybrid or none)"
            )),
        }
    }
}

/// Where view factors come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViewFactorSource {
    /// Closed forms (one to three vials in a row).
    Analytical,
    /// Ray casting; `symmetrize` averages over the scene's symmetries.
    MonteCarlo { config: McConfig, symmetrize: bool },
    /// A matrix previously written with [`ViewFactorMatrix::write_csv`].
    File { path: PathBuf },
    /// An already completed matrix.
    #[serde(skip)]
    Matrix(ViewFactorMatrix),
}

impl Default for ViewFactorSource {
    fn default() -> Self {
        ViewFactorSource::MonteCarlo {
            config: McConfig::default(),
            symmetrize: true,
        }
    }
}

/// How finished vials take part in the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoneVialTemperature {
    /// Keep the product temperature reached at the end of drying.
    #[default]
    Final,
    /// Hold at the sublimation temperature.
    Sublimation,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("vial {vial}: {source}")]
    Model {
        vial: usize,
        #[source]
        source: ModelError,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    ViewFactors(#[from] ViewFactorError),
    #[error(transparent)]
    Radiation(#[from] RadiationError),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("no time series was retained for vial {vial}")]
    MissingTimeSeries { vial: usize },
}

impl SimError {
    fn model(vial: usize) -> impl Fn(ModelError) -> SimError {
        move |source| SimError::Model { vial, source }
    }
}

/// Everything needed for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub scene: Scene,
    pub material: MaterialProperties,
    pub settings: ProcessSettings,
    pub geometry: VialGeometry,
    pub numerics: NumericsConfig,
    pub approach: Approach,
    pub view_factors: ViewFactorSource,
    pub hybrid: Option<HybridMap>,
    pub done_vials: DoneVialTemperature,
    /// Keep one sample per this many seconds when set.
    pub series_every: Option<f64>,
}

impl Scenario {
    /// A scenario with default properties around `scene`.
    pub fn new(scene: Scene, settings: ProcessSettings, approach: Approach) -> Self {
        Self {
            scene,
            material: MaterialProperties::default(),
            settings,
            geometry: VialGeometry::default(),
            numerics: NumericsConfig::default(),
            approach,
            view_factors: ViewFactorSource::default(),
            hybrid: None,
            done_vials: DoneVialTemperature::default(),
            series_every: None,
        }
    }

    pub fn with_approach(&self, approach: Approach) -> Self {
        Self {
            approach,
            ..self.clone()
        }
    }

    pub fn with_wall_temperature(&self, t2: f64) -> Self {
        let mut out = self.clone();
        out.scene.chamber.wall_temperature = t2;
        out
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.material.validate().map_err(invalid)?;
        self.settings.validate().map_err(invalid)?;
        self.geometry.validate().map_err(invalid)?;
        self.numerics.validate().map_err(invalid)?;
        self.scene.chamber.validate()?;
        if self.approach == Approach::Hybrid {
            match &self.hybrid {
                Some(map) if map.r_rad.len() == self.scene.vial_count() => {}
                Some(map) => {
                    return Err(SimError::InvalidScenario(format!(
                        "hybrid map covers {} vials, scene has {}",
                        map.r_rad.len(),
                        self.scene.vial_count()
                    )))
                }
                None => {
                    return Err(SimError::InvalidScenario(
                        "hybrid approach needs a resistance map".into(),
                    ))
                }
            }
        }
        Ok(())
    }

    pub fn model(&self) -> Result<VialModel, SimError> {
        VialModel::new(self.material, self.settings, self.geometry, self.numerics).map_err(invalid)
    }

    /// Completed view factors for the scene from the configured source.
    pub fn resolve_view_factors(&self) -> Result<ViewFactorMatrix, SimError> {
        let matrix = match &self.view_factors {
            ViewFactorSource::Analytical => complete_and_validate(&analytical_matrix(&self.scene)?)?,
            ViewFactorSource::MonteCarlo { config, symmetrize } => {
                let raw = monte_carlo_view_factors(&self.scene, config)?;
                let raw = if *symmetrize {
                    raw.symmetrize(&self.scene.symmetry_permutations())
                } else {
                    raw
                };
                complete_and_validate(&raw)?
            }
            ViewFactorSource::File { path } => {
                let file = std::fs::File::open(path).map_err(ViewFactorError::from)?;
                let m = ViewFactorMatrix::read_csv(std::io::BufReader::new(file))?;
                m.validate()?;
                m
            }
            ViewFactorSource::Matrix(m) => m.clone(),
        };
        if matrix.ids != self.scene.surface_ids() {
            return Err(SimError::InvalidScenario(
                "view-factor roster does not match the scene".into(),
            ));
        }
        Ok(matrix)
    }

    /// Replaces the view-factor source with its completed matrix so repeated
    /// runs skip the ray casting.
    pub fn cache_view_factors(&mut self) -> Result<(), SimError> {
        if matches!(self.approach, Approach::Network | Approach::Simplified) {
            let m = self.resolve_view_factors()?;
            self.view_factors = ViewFactorSource::Matrix(m);
        }
        Ok(())
    }

    /// Seed used for ray casting, if any.
    pub fn seed(&self) -> Option<u64> {
        match &self.view_factors {
            ViewFactorSource::MonteCarlo { config, .. } => Some(config.seed),
            _ => None,
        }
    }
}

fn invalid(e: ModelError) -> SimError {
    SimError::InvalidScenario(e.to_string())
}

/// Result for one vial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VialOutcome {
    pub index: usize,
    pub row: usize,
    pub col: usize,
    pub x: f64,
    pub y: f64,
    pub label: VialLabel,
    pub t_switch: f64,
    pub t_dry: f64,
    /// Radiative energy absorbed over the drying interval (J).
    pub absorbed_energy: f64,
    pub series: Vec<SeriesPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub approach: Approach,
    pub vials: Vec<VialOutcome>,
    pub seed: Option<u64>,
    pub wall_clock_seconds: f64,
}

impl SimulationResult {
    pub fn drying_times(&self) -> Vec<f64> {
        self.vials.iter().map(|v| v.t_dry).collect()
    }

    /// Drying time of the first vial carrying `label`.
    pub fn first_with_label(&self, label: VialLabel) -> Option<&VialOutcome> {
        self.vials.iter().find(|v| v.label == label)
    }

    /// The vial at grid position (row, col).
    pub fn at(&self, row: usize, col: usize) -> Option<&VialOutcome> {
        self.vials.iter().find(|v| v.row == row && v.col == col)
    }
}

/// Radiative energy absorbed by `vial` over its drying interval, read
/// from the retained time series.
pub fn absorbed_radiative_energy(result: &SimulationResult, vial: usize) -> Result<f64, SimError> {
    result
        .vials
        .get(vial)
        .and_then(|v| v.series.last())
        .map(|p| p.absorbed)
        .ok_or(SimError::MissingTimeSeries { vial })
}

/// Runs a scenario to the end of primary drying for every vial.
pub fn simulate(scenario: &Scenario) -> Result<SimulationResult, SimError> {
    scenario.validate()?;
    let start = Instant::now();
    let model = scenario.model()?;
    let runs = match scenario.approach {
        Approach::Network => {
            let view = scenario.resolve_view_factors()?;
            run_network(scenario, &model, view)?
        }
        Approach::Simplified => {
            let view = scenario.resolve_view_factors()?;
            let w = view.wall();
            let chamber = scenario.scene.chamber;
            let eps = scenario.material.vial_emissivity;
            let area = scenario.scene.vial_area;
            run_independent(scenario, &model, |i| {
                let f = view.get(i, w);
                move |_t: f64, temp: f64| {
                    simplified_qrad(
                        temp,
                        chamber.wall_temperature,
                        eps,
                        area,
                        f,
                        chamber.wall_emissivity,
                        chamber.wall_area,
                    )
                }
            })?
        }
        Approach::Hybrid => {
            let map = scenario.hybrid.as_ref().expect("validated");
            let t2 = scenario.scene.chamber.wall_temperature;
            run_independent(scenario, &model, |i| {
                let r = map.r_rad[i];
                move |_t: f64, temp: f64| hybrid_qrad(temp, t2, r)
            })?
        }
        Approach::None => run_independent(scenario, &model, |_| NoRadiation)?,
    };
    let labels = classify_vials(&scenario.scene.layout).labels;
    let layout = &scenario.scene.layout;
    let vials = runs
        .into_iter()
        .enumerate()
        .map(|(i, run)| {
            let (row, col) = layout.position(i);
            VialOutcome {
                index: i,
                row,
                col,
                x: layout.centers[i].x,
                y: layout.centers[i].y,
                label: labels[i],
                t_switch: run.t_switch,
                t_dry: run.t_dry,
                absorbed_energy: run.absorbed_energy,
                series: run.series,
            }
        })
        .collect();
    Ok(SimulationResult {
        approach: scenario.approach,
        vials,
        seed: scenario.seed(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}

struct Run {
    t_switch: f64,
    t_dry: f64,
    absorbed_energy: f64,
    series: Vec<SeriesPoint>,
}

fn run_independent<S, F>(scenario: &Scenario, model: &VialModel, source: F) -> Result<Vec<Run>, SimError>
where
    S: RadiationSource,
    F: Fn(usize) -> S + Sync,
{
    (0..scenario.scene.vial_count())
        .into_par_iter()
        .map(|i| {
            let r = simulate_single_vial(model, &source(i), scenario.series_every)
                .map_err(SimError::model(i))?;
            Ok(Run {
                t_switch: r.t_switch,
                t_dry: r.t_dry,
                absorbed_energy: r.absorbed_energy,
                series: r.series,
            })
        })
        .collect()
}

fn run_network(scenario: &Scenario, model: &VialModel, view: ViewFactorMatrix) -> Result<Vec<Run>, SimError> {
    let scene = &scenario.scene;
    let set = SurfaceSet::from_scene(scene, view, scenario.material.vial_emissivity)?;
    let op = NetworkOperator::new(&set)?;
    let n = scene.vial_count();
    let k = scene.surface_count();
    let nodes = model.nodes();
    let hold = match scenario.done_vials {
        DoneVialTemperature::Final => None,
        DoneVialTemperature::Sublimation => Some(scenario.settings.t_sublimation),
    };

    let mut states: Vec<VialState> = (0..n).map(|_| model.initial_state()).collect();
    let mut series: Vec<Vec<SeriesPoint>> = vec![Vec::new(); n];
    let mut recorders: Vec<Option<SeriesRecorder>> =
        (0..n).map(|_| scenario.series_every.map(SeriesRecorder::new)).collect();
    for ((r, s), state) in recorders.iter_mut().zip(&mut series).zip(&states) {
        if let Some(r) = r {
            r.push(s, state, 0.0);
        }
    }

    // Samples × surfaces; background columns never change.
    let mut temps = DMatrix::zeros(nodes, k);
    let mut uniform = DVector::zeros(k);
    for (j, t) in background_temperatures(scene).into_iter().enumerate() {
        temps.column_mut(n + j).fill(t);
        uniform[n + j] = t;
    }
    let surface_temperature = |s: &VialState| match (s.stage, hold) {
        (Stage::Done, Some(t)) => t,
        _ => s.top(),
    };

    let mut remaining = n;
    while remaining > 0 {
        let heating = states.iter().any(|s| s.stage == Stage::Heating);
        let by_node;
        let scalar;
        if heating {
            for (i, s) in states.iter().enumerate() {
                let mut col = temps.column_mut(i);
                if s.stage == Stage::Heating {
                    col.copy_from_slice(&s.profile);
                } else {
                    col.fill(surface_temperature(s));
                }
            }
            by_node = Some(op.heat_rates_by_node(&temps));
            scalar = None;
        } else {
            for (i, s) in states.iter().enumerate() {
                uniform[i] = surface_temperature(s);
            }
            by_node = None;
            scalar = Some(op.heat_rates(uniform.as_slice()));
        }

        for (i, state) in states.iter_mut().enumerate() {
            if state.stage == Stage::Done {
                continue;
            }
            let stage0 = state.stage;
            let load = match (&by_node, &scalar) {
                (Some(q), _) => {
                    let loads = &q.as_slice()[i * nodes..(i + 1) * nodes];
                    if stage0 == Stage::Heating {
                        RadiationLoad::PerNode(loads)
                    } else {
                        RadiationLoad::Uniform(crate::model::trapezoid_mean(loads))
                    }
                }
                (None, Some(q)) => RadiationLoad::Uniform(q[i]),
                (None, None) => unreachable!(),
            };
            let q_mean = load.mean();
            model.step(state, load).map_err(SimError::model(i))?;
            if let Some(r) = recorders[i].as_mut() {
                r.maybe_push(&mut series[i], state, q_mean, stage0 != state.stage);
            }
            if state.stage == Stage::Done {
                remaining -= 1;
            }
        }
    }

    Ok(states
        .into_iter()
        .zip(series)
        .map(|(s, series)| Run {
            t_switch: s.t_switch.expect("finished"),
            t_dry: s.t_dry.expect("finished"),
            absorbed_energy: s.absorbed_energy,
            series,
        })
        .collect())
}

/// Per-vial drying times of the network and simplified approaches on
/// identical inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachComparison {
    pub network: Vec<f64>,
    pub simplified: Vec<f64>,
    /// (network − simplified) / network.
    pub relative: Vec<f64>,
}

pub fn compare_approaches(scenario: &Scenario) -> Result<ApproachComparison, SimError> {
    let mut base = scenario.clone();
    base.approach = Approach::Network;
    base.cache_view_factors()?;
    let network = simulate(&base)?.drying_times();
    let simplified = simulate(&base.with_approach(Approach::Simplified))?.drying_times();
    let relative = network
        .iter()
        .zip(&simplified)
        .map(|(n, s)| (n - s) / n)
        .collect();
    Ok(ApproachComparison {
        network,
        simplified,
        relative,
    })
}
