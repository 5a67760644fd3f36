//! Scenario files.
//!
//! A scenario is a TOML document with the sections `material`, `process`,
//! `vial`, `chamber`, `layout`, `occluders`, `radiation`, `numerics` and
//! `output`. Every section and every key is optional; omitted values take
//! the reference defaults. Unknown keys are rejected. Quantities are bare SI
//! numbers or strings with a unit, e.g. `gap = "0.5 cm"` or
//! `ramp_rate = "1 K/min"`. Relative paths resolve against the file's
//! directory.
//!
//! ```toml
//! [process]
//! mode = "HFD"
//!
//! [layout]
//! rows = 10
//! cols = 10
//! gap = "0.5 cm"
//!
//! [radiation]
//! approach = "network"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimation::{FitParameter, FitProblem, HybridMap, Observable};
use crate::geometry::{Arrangement, Chamber, Layout, Occluder, OccluderTemperature, Point, Scene};
use crate::model::{DryingMode, MaterialProperties, NumericsConfig, ProcessSettings, VialGeometry};
use crate::sim::{Approach, DoneVialTemperature, Scenario, ViewFactorSource};
use crate::units::{Dimension, Quantity, UnitError};
use crate::view_factors::McConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("{path}: {source}")]
    Unit {
        path: String,
        #[source]
        source: UnitError,
    },
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("cannot write scenario: {0}")]
    Serialize(String),
}

fn schema(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Schema {
        path: path.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<MaterialSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process: Option<ProcessSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vial: Option<VialSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chamber: Option<ChamberSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<LayoutSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub occluders: Vec<OccluderSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radiation: Option<RadiationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub numerics: Option<NumericsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_dried: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conductivity: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heat_capacity: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sublimation_enthalpy: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vial_emissivity: Option<Quantity>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<DryingMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_initial: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shelf_initial: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shelf_max: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp_rate: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_sublimation: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub microwave_power: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p1: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p2: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p3: Option<Quantity>,
}

/// Vial dimensions. Giving a diameter or height without an area or volume
/// derives them from a cylinder; with neither, the reference vial's
/// tabulated area and volume are kept.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VialSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diameter: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<Quantity>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChamberSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<Quantity>,
    /// Defaults to the six faces of a cube of the given side.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_area: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_emissivity: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_temperature: Option<Quantity>,
}

/// Vial array. Structured arrangements use `rows`, `cols` and `gap`;
/// `custom` takes explicit `centers` in metres.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrangement: Option<Arrangement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cols: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centers: Option<Vec<[f64; 2]>>,
}

/// An obstruction. `temperature` is a temperature or `"reradiating"`;
/// it defaults to the wall temperature. `height` defaults to the vial
/// height, `emissivity` to the wall emissivity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OccluderSection {
    /// Rectangle around the array, `margin` beyond the outermost vials
    /// (defaults to the layout gap).
    TrayFrame {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        margin: Option<Quantity>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        emissivity: Option<Quantity>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        temperature: Option<Quantity>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        height: Option<Quantity>,
    },
    /// Polyline through `vertices` (metres).
    Polyline {
        vertices: Vec<[f64; 2]>,
        #[serde(default)]
        closed: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        emissivity: Option<Quantity>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        temperature: Option<Quantity>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        height: Option<Quantity>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewFactorKind {
    MonteCarlo,
    Analytical,
    File,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiationSection {
    /// Defaults to `network` when the section is present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approach: Option<Approach>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view_factors: Option<ViewFactorKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_rays: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symmetrize: Option<bool>,
    /// Matrix CSV for `view_factors = "file"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view_factor_file: Option<PathBuf>,
    /// Resistance map CSV (with its `.json` sidecar) for the hybrid approach.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hybrid_map: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub done_vials: Option<DoneVialTemperature>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_event: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_time: Option<Quantity>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Sampling interval of the time-series file; no series without it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series_every: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
}

/// A parsed scenario with the settings that live outside [`Scenario`].
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    /// Output directory, already resolved against the file's directory.
    pub output_dir: Option<PathBuf>,
    /// Hybrid map path, already resolved.
    pub hybrid_map: Option<PathBuf>,
}

/// Reads, validates and converts a scenario file.
pub fn parse_scenario(path: &Path) -> Result<Scenario, ConfigError> {
    load_scenario(path).map(|l| l.scenario)
}

/// [`parse_scenario`] keeping the output and hybrid-map paths.
pub fn load_scenario(path: &Path) -> Result<LoadedScenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::File {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    ScenarioConfig::from_toml(&text)?.resolve(base)
}

struct Reader<'a> {
    section: &'a str,
}

impl Reader<'_> {
    fn path(&self, key: &str) -> String {
        format!("{}.{key}", self.section)
    }

    fn get(&self, key: &str, q: &Option<Quantity>, dim: Dimension, default: f64) -> Result<f64, ConfigError> {
        let v = match q {
            None => return Ok(default),
            Some(q) => q.to_si(dim).map_err(|source| ConfigError::Unit {
                path: self.path(key),
                source,
            })?,
        };
        if !v.is_finite() {
            return Err(schema(&self.path(key), "must be finite"));
        }
        Ok(v)
    }

    fn positive(&self, key: &str, q: &Option<Quantity>, dim: Dimension, default: f64) -> Result<f64, ConfigError> {
        let v = self.get(key, q, dim, default)?;
        if v <= 0.0 {
            return Err(schema(&self.path(key), format!("must be positive, got {v}")));
        }
        Ok(v)
    }

    fn non_negative(&self, key: &str, q: &Option<Quantity>, dim: Dimension, default: f64) -> Result<f64, ConfigError> {
        let v = self.get(key, q, dim, default)?;
        if v < 0.0 {
            return Err(schema(&self.path(key), format!("must not be negative, got {v}")));
        }
        Ok(v)
    }

    fn emissivity(&self, key: &str, q: &Option<Quantity>, default: f64) -> Result<f64, ConfigError> {
        let v = self.get(key, q, Dimension::Dimensionless, default)?;
        if !(v > 0.0 && v <= 1.0) {
            return Err(schema(&self.path(key), format!("must lie in (0, 1], got {v}")));
        }
        Ok(v)
    }
}

fn absolute(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        toml::to_string(self).map_err(|e| ConfigError::Serialize(e.to_string()))
    }

    /// Converts to SI, fills defaults and validates. Relative paths resolve
    /// against `base`.
    pub fn resolve(&self, base: &Path) -> Result<LoadedScenario, ConfigError> {
        let material = self.material()?;
        let settings = self.settings()?;
        let geometry = self.vial()?;
        let numerics = self.numerics()?;
        let chamber = self.chamber()?;
        let scene = self.scene(&geometry, chamber)?;

        let radiation = self.radiation.clone();
        let r = Reader { section: "radiation" };
        let approach = match &radiation {
            None => Approach::None,
            Some(s) => s.approach.unwrap_or(Approach::Network),
        };
        let rad = radiation.unwrap_or_default();
        let view_factors = match rad.view_factors.unwrap_or(ViewFactorKind::MonteCarlo) {
            ViewFactorKind::MonteCarlo => {
                let defaults = McConfig::default();
                let n_rays = rad.n_rays.unwrap_or(defaults.n_rays);
                if n_rays == 0 {
                    return Err(schema(&r.path("n_rays"), "must be positive"));
                }
                ViewFactorSource::MonteCarlo {
                    config: McConfig {
                        n_rays,
                        seed: rad.seed.unwrap_or(defaults.seed),
                    },
                    symmetrize: rad.symmetrize.unwrap_or(true),
                }
            }
            ViewFactorKind::Analytical => ViewFactorSource::Analytical,
            ViewFactorKind::File => match &rad.view_factor_file {
                Some(p) => ViewFactorSource::File {
                    path: absolute(base, p),
                },
                None => {
                    return Err(schema(
                        &r.path("view_factor_file"),
                        "required when view_factors = \"file\"",
                    ))
                }
            },
        };
        let hybrid_map = rad.hybrid_map.as_ref().map(|p| absolute(base, p));
        let hybrid = match (&hybrid_map, approach) {
            (Some(p), Approach::Hybrid) => Some(HybridMap::load(p).map_err(|e| {
                schema(&r.path("hybrid_map"), format!("{}: {e}", p.display()))
            })?),
            (None, Approach::Hybrid) => {
                return Err(schema(&r.path("hybrid_map"), "required by the hybrid approach"))
            }
            _ => None,
        };
        if let Some(map) = &hybrid {
            if map.r_rad.len() != scene.vial_count() {
                return Err(schema(
                    &r.path("hybrid_map"),
                    format!(
                        "map has {} vials, layout has {}",
                        map.r_rad.len(),
                        scene.vial_count()
                    ),
                ));
            }
        }

        let output = self.output.clone().unwrap_or_default();
        let o = Reader { section: "output" };
        let series_every = match &output.series_every {
            None => None,
            Some(q) => Some(o.positive("series_every", &Some(q.clone()), Dimension::Time, 0.0)?),
        };

        let scenario = Scenario {
            scene,
            material,
            settings,
            geometry,
            numerics,
            approach,
            view_factors,
            hybrid,
            done_vials: rad.done_vials.unwrap_or_default(),
            series_every,
        };
        scenario
            .validate()
            .map_err(|e| schema("scenario", e.to_string()))?;
        Ok(LoadedScenario {
            scenario,
            output_dir: output.directory.map(|p| absolute(base, &p)),
            hybrid_map,
        })
    }

    fn material(&self) -> Result<MaterialProperties, ConfigError> {
        let s = self.material.clone().unwrap_or_default();
        let d = MaterialProperties::default();
        let r = Reader { section: "material" };
        let m = MaterialProperties {
            rho: r.positive("rho", &s.rho, Dimension::Density, d.rho)?,
            rho_dried: r.positive("rho_dried", &s.rho_dried, Dimension::Density, d.rho_dried)?,
            conductivity: r.positive(
                "conductivity",
                &s.conductivity,
                Dimension::Conductivity,
                d.conductivity,
            )?,
            heat_capacity: r.positive(
                "heat_capacity",
                &s.heat_capacity,
                Dimension::HeatCapacity,
                d.heat_capacity,
            )?,
            sublimation_enthalpy: r.positive(
                "sublimation_enthalpy",
                &s.sublimation_enthalpy,
                Dimension::SpecificEnergy,
                d.sublimation_enthalpy,
            )?,
            vial_emissivity: r.emissivity("vial_emissivity", &s.vial_emissivity, d.vial_emissivity)?,
        };
        if m.rho_dried >= m.rho {
            return Err(schema(
                "material.rho_dried",
                format!("must be below material.rho ({} >= {})", m.rho_dried, m.rho),
            ));
        }
        Ok(m)
    }

    fn settings(&self) -> Result<ProcessSettings, ConfigError> {
        let s = self.process.clone().unwrap_or_default();
        let d = ProcessSettings::with_mode(s.mode.unwrap_or(DryingMode::Cfd));
        let r = Reader { section: "process" };
        let t = Dimension::Temperature;
        let p = ProcessSettings {
            h: r.non_negative("h", &s.h, Dimension::HeatTransferCoefficient, d.h)?,
            t_initial: r.positive("t_initial", &s.t_initial, t, d.t_initial)?,
            shelf_initial: r.positive("shelf_initial", &s.shelf_initial, t, d.shelf_initial)?,
            shelf_max: r.positive("shelf_max", &s.shelf_max, t, d.shelf_max)?,
            ramp_rate: r.non_negative("ramp_rate", &s.ramp_rate, Dimension::TemperatureRate, d.ramp_rate)?,
            t_sublimation: r.positive("t_sublimation", &s.t_sublimation, t, d.t_sublimation)?,
            microwave_power: r.non_negative(
                "microwave_power",
                &s.microwave_power,
                Dimension::Power,
                d.microwave_power,
            )?,
            p1: r.non_negative("p1", &s.p1, Dimension::Dimensionless, d.p1)?,
            p2: r.non_negative("p2", &s.p2, Dimension::Dimensionless, d.p2)?,
            p3: r.non_negative("p3", &s.p3, Dimension::Dimensionless, d.p3)?,
            mode: d.mode,
        };
        if p.shelf_max < p.shelf_initial {
            return Err(schema(
                "process.shelf_max",
                format!("must not be below process.shelf_initial ({} < {})", p.shelf_max, p.shelf_initial),
            ));
        }
        Ok(p)
    }

    fn vial(&self) -> Result<VialGeometry, ConfigError> {
        let s = self.vial.clone().unwrap_or_default();
        let d = VialGeometry::default();
        let r = Reader { section: "vial" };
        let diameter = r.positive("diameter", &s.diameter, Dimension::Length, d.diameter)?;
        let height = r.positive("height", &s.height, Dimension::Length, d.height)?;
        let base = if s.diameter.is_none() && s.height.is_none() {
            d
        } else {
            VialGeometry::cylinder(diameter, height)
        };
        Ok(VialGeometry {
            diameter,
            height,
            area: r.positive("area", &s.area, Dimension::Area, base.area)?,
            volume: r.positive("volume", &s.volume, Dimension::Volume, base.volume)?,
        })
    }

    fn numerics(&self) -> Result<NumericsConfig, ConfigError> {
        let s = self.numerics.clone().unwrap_or_default();
        let d = NumericsConfig::default();
        let r = Reader { section: "numerics" };
        let nodes = s.nodes.unwrap_or(d.nodes);
        if nodes < 3 {
            return Err(schema(&r.path("nodes"), format!("must be at least 3, got {nodes}")));
        }
        Ok(NumericsConfig {
            nodes,
            dt: r.positive("dt", &s.dt, Dimension::Time, d.dt)?,
            tol_event: r.positive("tol_event", &s.tol_event, Dimension::Dimensionless, d.tol_event)?,
            max_time: r.positive("max_time", &s.max_time, Dimension::Time, d.max_time)?,
        })
    }

    fn chamber(&self) -> Result<Chamber, ConfigError> {
        let s = self.chamber.clone().unwrap_or_default();
        let d = Chamber::default();
        let r = Reader { section: "chamber" };
        let side = r.positive("side", &s.side, Dimension::Length, d.side)?;
        let default_area = if s.side.is_some() { 6.0 * side * side } else { d.wall_area };
        Ok(Chamber {
            side,
            wall_area: r.positive("wall_area", &s.wall_area, Dimension::Area, default_area)?,
            wall_emissivity: r.emissivity("wall_emissivity", &s.wall_emissivity, d.wall_emissivity)?,
            wall_temperature: r.positive(
                "wall_temperature",
                &s.wall_temperature,
                Dimension::Temperature,
                d.wall_temperature,
            )?,
        })
    }

    fn scene(&self, geometry: &VialGeometry, chamber: Chamber) -> Result<Scene, ConfigError> {
        let s = self.layout.clone().unwrap_or_default();
        let r = Reader { section: "layout" };
        let arrangement = s.arrangement.unwrap_or(if s.centers.is_some() {
            Arrangement::Custom
        } else {
            Arrangement::Rectangular
        });
        let gap = r.non_negative("gap", &s.gap, Dimension::Length, 0.005)?;
        let rows = s.rows.unwrap_or(1);
        let cols = s.cols.unwrap_or(1);
        let geometry_error = |e: crate::geometry::GeometryError| schema("layout", e.to_string());
        let layout = match arrangement {
            Arrangement::Rectangular | Arrangement::Hexagonal if s.centers.is_some() => {
                return Err(schema(&r.path("centers"), "only allowed with arrangement = \"custom\""))
            }
            Arrangement::Rectangular => {
                Layout::rectangular(cols, rows, geometry.diameter, gap, chamber.side)
                    .map_err(geometry_error)?
            }
            Arrangement::Hexagonal => {
                Layout::hexagonal(rows, cols, geometry.diameter, gap, chamber.side)
                    .map_err(geometry_error)?
            }
            Arrangement::Custom => {
                if s.rows.is_some() || s.cols.is_some() || s.gap.is_some() {
                    return Err(schema(
                        &r.path("arrangement"),
                        "custom layouts take centers only, not rows, cols or gap",
                    ));
                }
                let centers = match s.centers {
                    Some(c) if !c.is_empty() => c,
                    _ => return Err(schema(&r.path("centers"), "custom layout needs centers")),
                };
                Layout::custom(
                    centers.iter().map(|&[x, y]| Point::new(x, y)).collect(),
                    geometry.diameter,
                )
            }
        };
        let mut scene = Scene::new(layout, chamber, geometry.area).map_err(geometry_error)?;
        for (k, occ) in self.occluders.iter().enumerate() {
            let occluder = occluder(k, occ, &scene, geometry, gap)?;
            scene = scene
                .add_occluder(occluder)
                .map_err(|e| schema(&format!("occluders[{k}]"), e.to_string()))?;
        }
        Ok(scene)
    }

    /// An explicit, SI-only description of `loaded`. Parsing the result
    /// (with any base directory) gives back the same scenario.
    pub fn from_scenario(loaded: &LoadedScenario) -> Result<Self, ConfigError> {
        let s = &loaded.scenario;
        let q = |v: f64| Some(Quantity::Number(v));
        let layout = &s.scene.layout;
        let layout = match layout.arrangement {
            Arrangement::Custom => LayoutSection {
                arrangement: Some(Arrangement::Custom),
                centers: Some(layout.centers.iter().map(|p| [p.x, p.y]).collect()),
                ..Default::default()
            },
            a => LayoutSection {
                arrangement: Some(a),
                rows: Some(layout.rows),
                cols: Some(layout.cols),
                gap: q(layout.gap),
                centers: None,
            },
        };
        let occluders = s
            .scene
            .occluders
            .iter()
            .map(|o| OccluderSection::Polyline {
                vertices: o.vertices.iter().map(|p| [p.x, p.y]).collect(),
                closed: o.closed,
                emissivity: q(o.emissivity),
                temperature: Some(match o.temperature {
                    OccluderTemperature::Fixed(t) => Quantity::Number(t),
                    OccluderTemperature::Reradiating => Quantity::Text(RERADIATING.into()),
                }),
                height: q(o.height),
            })
            .collect();
        let mut radiation = RadiationSection {
            approach: Some(s.approach),
            hybrid_map: loaded.hybrid_map.clone(),
            done_vials: Some(s.done_vials),
            ..Default::default()
        };
        match &s.view_factors {
            ViewFactorSource::Analytical => radiation.view_factors = Some(ViewFactorKind::Analytical),
            ViewFactorSource::MonteCarlo { config, symmetrize } => {
                radiation.view_factors = Some(ViewFactorKind::MonteCarlo);
                radiation.n_rays = Some(config.n_rays);
                radiation.seed = Some(config.seed);
                radiation.symmetrize = Some(*symmetrize);
            }
            ViewFactorSource::File { path } => {
                radiation.view_factors = Some(ViewFactorKind::File);
                radiation.view_factor_file = Some(path.clone());
            }
            ViewFactorSource::Matrix(_) => {
                return Err(ConfigError::Serialize(
                    "an in-memory view-factor matrix has no file form".into(),
                ))
            }
        }
        let m = &s.material;
        let p = &s.settings;
        Ok(Self {
            material: Some(MaterialSection {
                rho: q(m.rho),
                rho_dried: q(m.rho_dried),
                conductivity: q(m.conductivity),
                heat_capacity: q(m.heat_capacity),
                sublimation_enthalpy: q(m.sublimation_enthalpy),
                vial_emissivity: q(m.vial_emissivity),
            }),
            process: Some(ProcessSection {
                mode: Some(p.mode),
                h: q(p.h),
                t_initial: q(p.t_initial),
                shelf_initial: q(p.shelf_initial),
                shelf_max: q(p.shelf_max),
                ramp_rate: q(p.ramp_rate),
                t_sublimation: q(p.t_sublimation),
                microwave_power: q(p.microwave_power),
                p1: q(p.p1),
                p2: q(p.p2),
                p3: q(p.p3),
            }),
            vial: Some(VialSection {
                diameter: q(s.geometry.diameter),
                height: q(s.geometry.height),
                area: q(s.geometry.area),
                volume: q(s.geometry.volume),
            }),
            chamber: Some(ChamberSection {
                side: q(s.scene.chamber.side),
                wall_area: q(s.scene.chamber.wall_area),
                wall_emissivity: q(s.scene.chamber.wall_emissivity),
                wall_temperature: q(s.scene.chamber.wall_temperature),
            }),
            layout: Some(layout),
            occluders,
            radiation: Some(radiation),
            numerics: Some(NumericsSection {
                nodes: Some(s.numerics.nodes),
                dt: q(s.numerics.dt),
                tol_event: q(s.numerics.tol_event),
                max_time: q(s.numerics.max_time),
            }),
            output: Some(OutputSection {
                series_every: s.series_every.map(Quantity::Number),
                directory: loaded.output_dir.clone(),
            }),
        })
    }
}

const RERADIATING: &str = "reradiating";

fn occluder(
    k: usize,
    occ: &OccluderSection,
    scene: &Scene,
    geometry: &VialGeometry,
    gap: f64,
) -> Result<Occluder, ConfigError> {
    let section = format!("occluders[{k}]");
    let r = Reader { section: &section };
    let (emissivity, temperature, height) = match occ {
        OccluderSection::TrayFrame {
            emissivity,
            temperature,
            height,
            ..
        }
        | OccluderSection::Polyline {
            emissivity,
            temperature,
            height,
            ..
        } => (emissivity, temperature, height),
    };
    let chamber = &scene.chamber;
    let emissivity = r.emissivity("emissivity", emissivity, chamber.wall_emissivity)?;
    let height = r.positive("height", height, Dimension::Length, geometry.height)?;
    let temperature = match temperature {
        None => OccluderTemperature::Fixed(chamber.wall_temperature),
        Some(Quantity::Text(t)) if t.trim() == RERADIATING => OccluderTemperature::Reradiating,
        Some(q) => OccluderTemperature::Fixed(r.positive(
            "temperature",
            &Some(q.clone()),
            Dimension::Temperature,
            0.0,
        )?),
    };
    Ok(match occ {
        OccluderSection::TrayFrame { margin, .. } => {
            let margin = r.non_negative("margin", margin, Dimension::Length, gap)?;
            Occluder::tray_frame(&scene.layout, margin, emissivity, temperature, height)
        }
        OccluderSection::Polyline {
            vertices, closed, ..
        } => Occluder {
            vertices: vertices.iter().map(|&[x, y]| Point::new(x, y)).collect(),
            closed: *closed,
            emissivity,
            temperature,
            height,
        },
    })
}

/// A fit described by a problem file.
///
/// ```toml
/// kind = "scalar"
/// scenario = "case6.toml"
/// parameter = "h"
/// observable = "drying_time"
/// vial = 55
/// reference = "9.74 h"
/// ```
///
/// A `hybrid` problem trains resistances for every vial against the
/// `t_dry_hours` column of `reference_csv`, or against a network run of the
/// scenario when no file is given, and writes the map to `output`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FitProblemConfig {
    Scalar {
        scenario: PathBuf,
        parameter: FitParameter,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bounds: Option<[Quantity; 2]>,
        #[serde(default = "default_observable")]
        observable: ObservableKind,
        #[serde(default)]
        vial: usize,
        reference: Quantity,
    },
    Hybrid {
        scenario: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference_csv: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        immune_tolerance: Option<Quantity>,
        output: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    DryingTime,
    SwitchTime,
}

fn default_observable() -> ObservableKind {
    ObservableKind::DryingTime
}

/// A resolved fit problem.
#[derive(Debug, Clone, PartialEq)]
pub enum FitTask {
    Scalar(FitProblem),
    Hybrid {
        scenario: Scenario,
        /// Reference drying times (s); `None` means "run the network".
        reference: Option<Vec<f64>>,
        /// Largest tolerated miss for radiation-immune vials (s).
        immune_tolerance: f64,
        output: PathBuf,
    },
}

#[derive(Deserialize)]
struct ReferenceRow {
    t_dry_hours: f64,
}

/// Reads a fit problem and the scenario it points to.
pub fn load_fit_problem(path: &Path) -> Result<FitTask, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::File {
        path: path.to_path_buf(),
        source,
    })?;
    let problem: FitProblemConfig =
        toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let r = Reader { section: "problem" };
    match problem {
        FitProblemConfig::Scalar {
            scenario,
            parameter,
            bounds,
            observable,
            vial,
            reference,
        } => {
            let scenario = parse_scenario(&absolute(base, &scenario))?;
            if vial >= scenario.scene.vial_count() {
                return Err(schema(
                    "problem.vial",
                    format!("scenario has {} vials", scenario.scene.vial_count()),
                ));
            }
            let bounds = match bounds {
                None => parameter.default_bounds(&scenario),
                Some([lo, hi]) => {
                    let lo = r.get("bounds", &Some(lo), parameter.dimension(), 0.0)?;
                    let hi = r.get("bounds", &Some(hi), parameter.dimension(), 0.0)?;
                    if !(lo < hi) {
                        return Err(schema("problem.bounds", "lower bound must be below upper"));
                    }
                    (lo, hi)
                }
            };
            let observable = match observable {
                ObservableKind::DryingTime => Observable::DryingTime { vial },
                ObservableKind::SwitchTime => Observable::SwitchTime { vial },
            };
            Ok(FitTask::Scalar(FitProblem {
                parameter,
                bounds,
                observable,
                reference: r.positive("reference", &Some(reference), Dimension::Time, 0.0)?,
                scenario,
            }))
        }
        FitProblemConfig::Hybrid {
            scenario,
            reference_csv,
            immune_tolerance,
            output,
        } => {
            let scenario = parse_scenario(&absolute(base, &scenario))?;
            let reference = match reference_csv {
                None => None,
                Some(p) => {
                    let p = absolute(base, &p);
                    let file = std::fs::File::open(&p).map_err(|source| ConfigError::File {
                        path: p.clone(),
                        source,
                    })?;
                    let times = csv::Reader::from_reader(file)
                        .deserialize::<ReferenceRow>()
                        .map(|row| row.map(|row| row.t_dry_hours * crate::HOUR))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| schema("problem.reference_csv", e.to_string()))?;
                    if times.len() != scenario.scene.vial_count() {
                        return Err(schema(
                            "problem.reference_csv",
                            format!(
                                "{} rows for {} vials",
                                times.len(),
                                scenario.scene.vial_count()
                            ),
                        ));
                    }
                    Some(times)
                }
            };
            Ok(FitTask::Hybrid {
                scenario,
                reference,
                immune_tolerance: r.non_negative(
                    "immune_tolerance",
                    &immune_tolerance,
                    Dimension::Time,
                    0.01 * crate::HOUR,
                )?,
                output: absolute(base, &output),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(text: &str) -> Result<Scenario, ConfigError> {
        ScenarioConfig::from_toml(text)?
            .resolve(Path::new("."))
            .map(|l| l.scenario)
    }

    #[test]
    fn empty_file_is_the_reference_single_vial_without_radiation() {
        let s = resolve("").unwrap();
        assert_eq!(s.approach, Approach::None);
        assert_eq!(s.material, MaterialProperties::default());
        assert_eq!(s.settings, ProcessSettings::default());
        assert_eq!(s.geometry, VialGeometry::default());
        assert_eq!(s.scene.chamber, Chamber::default());
        assert_eq!(s.scene.vial_count(), 1);
        assert_eq!(s.series_every, None);
    }

    #[test]
    fn units_are_converted() {
        let s = resolve(
            r#"
            [process]
            ramp_rate = "2 K/min"
            microwave_power = "0.1 kW"
            t_sublimation = "-17 C"
            [layout]
            rows = 2
            cols = 3
            gap = "5 mm"
            [numerics]
            max_time = "100 h"
            "#,
        )
        .unwrap();
        assert!((s.settings.ramp_rate - 2.0 / 60.0).abs() < 1e-15);
        assert!((s.settings.microwave_power - 100.0).abs() < 1e-12);
        assert!((s.settings.t_sublimation - 256.15).abs() < 1e-12);
        assert_eq!(s.scene.layout.gap, 0.005);
        assert_eq!(s.scene.vial_count(), 6);
        assert_eq!(s.numerics.max_time, 360_000.0);
    }

    #[test]
    fn density_inversion_names_the_field() {
        let err = resolve("[material]\nrho = 500\nrho_dried = 600").unwrap_err();
        match err {
            ConfigError::Schema { path, .. } => assert_eq!(path, "material.rho_dried"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_and_wrong_units_are_rejected() {
        assert!(matches!(
            resolve("[material]\nrhoo = 1.0"),
            Err(ConfigError::Parse(_))
        ));
        assert!(matches!(resolve("bogus = 1"), Err(ConfigError::Parse(_))));
        match resolve("[layout]\ngap = \"1 K\"") {
            Err(ConfigError::Unit { path, .. }) => assert_eq!(path, "layout.gap"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            resolve("[[occluders]]\nkind = \"tray_frame\"\nwidth = 1"),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn radiation_section_defaults_to_network() {
        let s = resolve("[radiation]\nseed = 7").unwrap();
        assert_eq!(s.approach, Approach::Network);
        assert_eq!(s.seed(), Some(7));
    }

    #[test]
    fn hybrid_without_map_is_a_schema_error() {
        assert!(matches!(
            resolve("[radiation]\napproach = \"hybrid\""),
            Err(ConfigError::Schema { .. })
        ));
    }

    #[test]
    fn tray_frame_defaults_follow_wall_and_gap() {
        let s = resolve(
            r#"
            [layout]
            rows = 3
            cols = 3
            [[occluders]]
            kind = "tray_frame"
            "#,
        )
        .unwrap();
        let o = &s.scene.occluders[0];
        assert_eq!(o.temperature, OccluderTemperature::Fixed(293.15));
        assert_eq!(o.emissivity, 0.3);
        assert_eq!(o.height, 0.042);
        // Outermost vial surfaces sit at ±(0.015 + 0.005); frame one gap further.
        assert!((o.vertices[2].x - 0.025).abs() < 1e-12);
    }

    #[test]
    fn round_trip_through_explicit_form() {
        let text = r#"
            [process]
            mode = "HFD"
            [layout]
            arrangement = "hexagonal"
            rows = 3
            cols = 4
            gap = "0.2 cm"
            [[occluders]]
            kind = "tray_frame"
            temperature = "reradiating"
            [radiation]
            approach = "simplified"
            n_rays = 5000
            [output]
            series_every = "5 min"
        "#;
        let loaded = ScenarioConfig::from_toml(text).unwrap().resolve(Path::new(".")).unwrap();
        let explicit = ScenarioConfig::from_scenario(&loaded).unwrap().to_toml().unwrap();
        let again = ScenarioConfig::from_toml(&explicit)
            .unwrap()
            .resolve(Path::new("/elsewhere"))
            .unwrap();
        assert_eq!(again.scenario, loaded.scenario);
    }
}
