//! Scalar parameter fits against reference observables, per-vial training
//! of hybrid radiation resistances, and sequential fits of the microwave
//! power fractions.
//!
//! Every fit first samples the objective on a coarse grid, checks that it
//! is strictly monotone and changes sign, then refines the bracketing cell
//! by golden-section search on the squared residual.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{simulate_single_vial, DryingMode, ModelError, VialModel};
use crate::radiation::hybrid_qrad;
use crate::sim::{simulate, Approach, Scenario, SimError};
use crate::units::Dimension;

/// Largest hybrid resistance (1/m²); stands in for "no radiation".
pub const R_CAP: f64 = 1e7;
/// Smallest hybrid resistance searched (1/m²).
pub const R_MIN: f64 = 1.0;
/// Relative width at which a bracket counts as converged.
pub const REL_TOL: f64 = 1e-4;
/// Objective samples used for the monotonicity check.
pub const PRECHECK_POINTS: usize = 5;

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{parameter}: residual does not change sign over [{lo}, {hi}] ({r_lo:+.4e} .. {r_hi:+.4e})")]
    NoBracket {
        parameter: String,
        lo: f64,
        hi: f64,
        r_lo: f64,
        r_hi: f64,
    },
    #[error("{parameter}: objective is not strictly monotone over the bounds")]
    NotMonotone { parameter: String },
    #[error("vial {vial} is insensitive to radiation: even R = {R_CAP:e} misses the target by {residual:.4e} s")]
    RadiationImmune { vial: usize, residual: f64 },
    #[error("invalid fit: {0}")]
    Invalid(String),
    #[error("hybrid map: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Scenario quantity a fit may adjust.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitParameter {
    /// Shelf heat transfer coefficient (W/m²K).
    H,
    /// Chamber wall temperature (K).
    WallTemperature,
    /// Sublimation temperature (K).
    SublimationTemperature,
    P1,
    P2,
    P3,
}

impl FitParameter {
    pub fn name(self) -> &'static str {
        match self {
            FitParameter::H => "h",
            FitParameter::WallTemperature => "wall_temperature",
            FitParameter::SublimationTemperature => "sublimation_temperature",
            FitParameter::P1 => "p1",
            FitParameter::P2 => "p2",
            FitParameter::P3 => "p3",
        }
    }

    pub fn apply(self, scenario: &mut Scenario, value: f64) {
        let s = &mut scenario.settings;
        match self {
            FitParameter::H => s.h = value,
            FitParameter::WallTemperature => scenario.scene.chamber.wall_temperature = value,
            FitParameter::SublimationTemperature => s.t_sublimation = value,
            FitParameter::P1 => s.p1 = value,
            FitParameter::P2 => s.p2 = value,
            FitParameter::P3 => s.p3 = value,
        }
    }

    pub fn current(self, scenario: &Scenario) -> f64 {
        let s = &scenario.settings;
        match self {
            FitParameter::H => s.h,
            FitParameter::WallTemperature => scenario.scene.chamber.wall_temperature,
            FitParameter::SublimationTemperature => s.t_sublimation,
            FitParameter::P1 => s.p1,
            FitParameter::P2 => s.p2,
            FitParameter::P3 => s.p3,
        }
    }

    /// Unit family of the parameter's values.
    pub fn dimension(self) -> Dimension {
        match self {
            FitParameter::H => Dimension::HeatTransferCoefficient,
            FitParameter::WallTemperature | FitParameter::SublimationTemperature => {
                Dimension::Temperature
            }
            FitParameter::P1 | FitParameter::P2 | FitParameter::P3 => Dimension::Dimensionless,
        }
    }

    /// Search interval used when none is given.
    pub fn default_bounds(self, scenario: &Scenario) -> (f64, f64) {
        match self {
            FitParameter::H => (1.0, 200.0),
            FitParameter::WallTemperature => (scenario.settings.t_sublimation, 320.0),
            FitParameter::SublimationTemperature => (
                scenario.settings.t_initial,
                scenario.settings.shelf_max,
            ),
            FitParameter::P1 | FitParameter::P2 | FitParameter::P3 => (0.0, 0.05),
        }
    }
}

impl std::str::FromStr for FitParameter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        const ALL: [FitParameter; 6] = [
            FitParameter::H,
            FitParameter::WallTemperature,
            FitParameter::SublimationTemperature,
            FitParameter::P1,
            FitParameter::P2,
            FitParameter::P3,
        ];
        ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            format!(
                "unknown parameter '{s}' (expected one of {})",
                ALL.map(FitParameter::name).join(", ")
            )
        })
    }
}

/// Simulated quantity compared against the reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observable {
    /// End of primary drying of one vial (s).
    DryingTime { vial: usize },
    /// Switching time of one vial (s).
    SwitchTime { vial: usize },
}

impl Observable {
    fn never_reached(self, e: &ModelError) -> bool {
        match e {
            ModelError::NoSublimationReached { .. } => true,
            ModelError::DryingHorizonExceeded { .. } | ModelError::NegativeSublimationRate { .. } => {
                matches!(self, Observable::DryingTime { .. })
            }
            _ => false,
        }
    }

    fn vial(self) -> usize {
        match self {
            Observable::DryingTime { vial } | Observable::SwitchTime { vial } => vial,
        }
    }

    /// A run that never gets there (no switch, no heat at the front, or past
    /// the horizon) counts as taking the whole horizon, which keeps the
    /// residual ordered at bounds such as p1 = 0 in MFD.
    fn evaluate(self, scenario: &Scenario) -> Result<f64, SimError> {
        let result = match simulate(scenario) {
            Err(SimError::Model { source, .. }) if self.never_reached(&source) => {
                return Ok(scenario.numerics.max_time)
            }
            other => other?,
        };
        let v = result.vials.get(self.vial()).ok_or_else(|| {
            SimError::InvalidScenario(format!("no vial {} in scene", self.vial()))
        })?;
        Ok(match self {
            Observable::DryingTime { .. } => v.t_dry,
            Observable::SwitchTime { .. } => v.t_switch,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitProblem {
    pub parameter: FitParameter,
    pub bounds: (f64, f64),
    pub observable: Observable,
    /// Target value of the observable (s).
    pub reference: f64,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub value: f64,
    /// Observable minus reference at `value` (s).
    pub residual: f64,
    pub evaluations: usize,
}

/// Finds the root of a strictly monotone scalar function over `[lo, hi]`.
///
/// `f` returns the signed residual. The residual is sampled at
/// [`PRECHECK_POINTS`] points; the cell where it changes sign is refined by
/// golden-section search on `f²` until its width drops below
/// `tolerance(midpoint)`.
pub fn golden_section_root<F, T, E>(
    name: &str,
    mut f: F,
    lo: f64,
    hi: f64,
    tolerance: T,
) -> Result<FitResult, E>
where
    F: FnMut(f64) -> Result<f64, E>,
    T: Fn(f64) -> f64,
    E: From<EstimationError>,
{
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(EstimationError::Invalid(format!("{name}: bounds [{lo}, {hi}] are not ordered")).into());
    }
    let mut evaluations = 0;
    let n = PRECHECK_POINTS.max(2);
    let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let mut rs = Vec::with_capacity(n);
    for &x in &xs {
        rs.push(f(x)?);
        evaluations += 1;
    }
    let increasing = rs.windows(2).all(|w| w[1] > w[0]);
    let decreasing = rs.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) {
        return Err(EstimationError::NotMonotone { parameter: name.into() }.into());
    }
    if let Some(i) = rs.iter().position(|&r| r == 0.0) {
        return Ok(FitResult {
            value: xs[i],
            residual: 0.0,
            evaluations,
        });
    }
    let cell = match rs.windows(2).position(|w| w[0].signum() != w[1].signum()) {
        Some(c) => c,
        None => {
            return Err(EstimationError::NoBracket {
                parameter: name.into(),
                lo,
                hi,
                r_lo: rs[0],
                r_hi: rs[n - 1],
            }
            .into())
        }
    };

    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (xs[cell], xs[cell + 1]);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut rc = f(c)?;
    let mut rd = f(d)?;
    evaluations += 2;
    while (b - a) > tolerance(0.5 * (a + b)) {
        if rc * rc < rd * rd {
            b = d;
            d = c;
            rd = rc;
            c = b - INV_PHI * (b - a);
            rc = f(c)?;
        } else {
            a = c;
            c = d;
            rc = rd;
            d = a + INV_PHI * (b - a);
            rd = f(d)?;
        }
        evaluations += 1;
    }
    let (value, residual) = if rc * rc < rd * rd { (c, rc) } else { (d, rd) };
    Ok(FitResult {
        value,
        residual,
        evaluations,
    })
}

/// Fits one scenario parameter so the observable matches the reference.
pub fn fit_scalar(problem: &FitProblem) -> Result<FitResult, EstimationError> {
    if !problem.reference.is_finite() {
        return Err(EstimationError::Invalid("reference must be finite".into()));
    }
    let mut base = problem.scenario.clone();
    base.series_every = None;
    base.cache_view_factors()?;
    let (lo, hi) = problem.bounds;
    let floor = (hi - lo).abs() * 1e-6;
    golden_section_root(
        problem.parameter.name(),
        |x| {
            let mut s = base.clone();
            problem.parameter.apply(&mut s, x);
            Ok::<f64, EstimationError>(problem.observable.evaluate(&s)? - problem.reference)
        },
        lo,
        hi,
        |mid: f64| REL_TOL * mid.abs().max(floor),
    )
}

/// Per-vial hybrid resistances with their training provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridMap {
    /// R_rad for each vial in layout order (1/m²).
    pub r_rad: Vec<f64>,
    /// Wall temperature of the training data (K).
    pub wall_temperature: f64,
    /// Where the reference drying times came from.
    pub source: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct HybridRow {
    vial_id: usize,
    row: usize,
    col: usize,
    r_rad: f64,
}

impl HybridMap {
    /// Writes `vial_id,row,col,r_rad` rows for the given layout positions.
    pub fn write_csv<W: Write>(
        &self,
        out: W,
        positions: &[(usize, usize)],
    ) -> Result<(), EstimationError> {
        let mut w = csv::Writer::from_writer(out);
        for (i, (&r, &(row, col))) in self.r_rad.iter().zip(positions).enumerate() {
            w.serialize(HybridRow {
                vial_id: i,
                row,
                col,
                r_rad: r,
            })
            .map_err(|e| EstimationError::Format(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a map written by [`Self::write_csv`]; metadata comes from the
    /// caller (usually the sidecar file).
    pub fn read_csv<R: Read>(
        input: R,
        wall_temperature: f64,
        source: String,
    ) -> Result<Self, EstimationError> {
        let mut r = csv::Reader::from_reader(input);
        let mut r_rad = Vec::new();
        for (i, row) in r.deserialize::<HybridRow>().enumerate() {
            let row = row.map_err(|e| EstimationError::Format(e.to_string()))?;
            if row.vial_id != i {
                return Err(EstimationError::Format(format!(
                    "rows must be in vial order (row {i} has vial {})",
                    row.vial_id
                )));
            }
            if !(row.r_rad > 0.0 && row.r_rad <= R_CAP) {
                return Err(EstimationError::Format(format!(
                    "vial {i}: R_rad {} outside (0, {R_CAP:e}]",
                    row.r_rad
                )));
            }
            r_rad.push(row.r_rad);
        }
        Ok(Self {
            r_rad,
            wall_temperature,
            source,
        })
    }

    /// Writes the CSV at `path` and a `<path>.json` sidecar holding the
    /// wall temperature and source.
    pub fn save(&self, path: &Path, positions: &[(usize, usize)]) -> Result<(), EstimationError> {
        self.write_csv(std::fs::File::create(path)?, positions)?;
        let meta = HybridMeta {
            wall_temperature: self.wall_temperature,
            source: self.source.clone(),
        };
        let text = serde_json::to_string_pretty(&meta)
            .map_err(|e| EstimationError::Format(e.to_string()))?;
        std::fs::write(sidecar_path(path), text + "\n")?;
        Ok(())
    }

    /// Reads a map saved with [`Self::save`].
    pub fn load(path: &Path) -> Result<Self, EstimationError> {
        let text = std::fs::read_to_string(sidecar_path(path))?;
        let meta: HybridMeta =
            serde_json::from_str(&text).map_err(|e| EstimationError::Format(e.to_string()))?;
        Self::read_csv(std::fs::File::open(path)?, meta.wall_temperature, meta.source)
    }
}

#[derive(Serialize, Deserialize)]
struct HybridMeta {
    wall_temperature: f64,
    source: String,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Drying time of one vial under the hybrid law with resistance `r`.
pub fn hybrid_drying_time(model: &VialModel, wall_temperature: f64, r: f64) -> Result<f64, SimError> {
    let source = move |_t: f64, temp: f64| hybrid_qrad(temp, wall_temperature, r);
    simulate_single_vial(model, &source, None)
        .map(|res| res.t_dry)
        .map_err(|source| SimError::Model { vial: 0, source })
}

/// Fits R_rad for every vial independently so the hybrid drying time
/// matches `reference` (s, one per vial) at the scenario's wall
/// temperature.
///
/// A vial whose reference is at or above its no-radiation drying time gets
/// [`R_CAP`] when the gap is within `immune_tolerance` seconds and fails
/// with [`EstimationError::RadiationImmune`] otherwise.
pub fn train_hybrid(
    reference: &[f64],
    scenario: &Scenario,
    immune_tolerance: f64,
    source: &str,
) -> Result<HybridMap, EstimationError> {
    let n = scenario.scene.vial_count();
    if reference.len() != n {
        return Err(EstimationError::Invalid(format!(
            "{} reference times for {n} vials",
            reference.len()
        )));
    }
    let model = scenario.model()?;
    let t2 = scenario.scene.chamber.wall_temperature;
    let (lo, hi) = (R_MIN.log10(), R_CAP.log10());
    let r_rad = reference
        .par_iter()
        .enumerate()
        .map(|(vial, &target)| {
            let at_cap = hybrid_drying_time(&model, t2, R_CAP)? - target;
            if at_cap <= 0.0 {
                return if at_cap.abs() <= immune_tolerance {
                    Ok(R_CAP)
                } else {
                    Err(EstimationError::RadiationImmune {
                        vial,
                        residual: at_cap,
                    })
                };
            }
            let fit = golden_section_root(
                &format!("R_rad[{vial}]"),
                |log_r| {
                    hybrid_drying_time(&model, t2, 10f64.powf(log_r))
                        .map(|t| t - target)
                        .map_err(EstimationError::from)
                },
                lo,
                hi,
                // log10 width; about 1e-6 relative in R.
                |_| 4e-7,
            )?;
            Ok(10f64.powf(fit.value))
        })
        .collect::<Result<Vec<_>, EstimationError>>()?;
    Ok(HybridMap {
        r_rad,
        wall_temperature: t2,
        source: source.into(),
    })
}

/// Measurements that pin down the microwave fractions of one vial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicrowaveData {
    /// Observed switching time (s).
    pub switch_time: f64,
    /// Observed end of primary drying (s).
    pub drying_time: f64,
    /// (time s, product temperature K) samples from the sublimation stage.
    pub sublimation_temperatures: Vec<(f64, f64)>,
    /// Vial the data belong to.
    pub vial: usize,
}

/// Least-squares slope of `(x, y)` pairs.
pub fn linear_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x / n, b + y / n));
    let (sxy, sxx) = points.iter().fold((0.0, 0.0), |(sxy, sxx), &(x, y)| {
        (sxy + (x - mx) * (y - my), sxx + (x - mx) * (x - mx))
    });
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Fits (p1, p2, p3) one after another: p3 from the sublimation-stage
/// temperature slope, p1 from the switching time, p2 from the drying time.
pub fn fit_microwave_fractions(
    data: &MicrowaveData,
    scenario: &Scenario,
) -> Result<(f64, f64, f64), EstimationError> {
    if scenario.settings.effective_power() == 0.0 {
        return Ok((0.0, 0.0, 0.0));
    }
    if scenario.settings.mode == DryingMode::Cfd {
        return Ok((0.0, 0.0, 0.0));
    }
    let slope = linear_slope(&data.sublimation_temperatures).ok_or_else(|| {
        EstimationError::Invalid("need at least two distinct sublimation samples".into())
    })?;
    // Product temperature rises at p3·Q / (V ρ Cp).
    let p3 = (slope * scenario.material.volumetric_heat_capacity() * scenario.geometry.volume
        / scenario.settings.effective_power())
    .max(0.0);

    let mut s = scenario.clone();
    s.settings.p3 = p3;
    let bounds = FitParameter::P1.default_bounds(&s);
    let p1 = fit_scalar(&FitProblem {
        parameter: FitParameter::P1,
        bounds,
        observable: Observable::SwitchTime { vial: data.vial },
        reference: data.switch_time,
        scenario: s.clone(),
    })?
    .value;
    s.settings.p1 = p1;
    let p2 = fit_scalar(&FitProblem {
        parameter: FitParameter::P2,
        bounds,
        observable: Observable::DryingTime { vial: data.vial },
        reference: data.drying_time,
        scenario: s,
    })?
    .value;
    Ok((p1, p2, p3))
}

/// The approach a hybrid map is applied with, for callers assembling
/// scenarios by hand.
pub fn with_hybrid_map(scenario: &Scenario, map: HybridMap) -> Scenario {
    let mut s = scenario.with_approach(Approach::Hybrid);
    s.hybrid = Some(map);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_a_linear_root() {
        let fit = golden_section_root::<_, _, EstimationError>("x", |x| Ok(2.0 * x - 3.0), 0.0, 10.0, |_| 1e-6)
            .unwrap();
        assert!((fit.value - 1.5).abs() < 1e-5);
    }

    #[test]
    fn missing_sign_change_is_reported() {
        let err = golden_section_root::<_, _, EstimationError>("x", |x| Ok(x + 1.0), 0.0, 1.0, |_| 1e-6)
            .unwrap_err();
        assert!(matches!(err, EstimationError::NoBracket { .. }));
    }

    #[test]
    fn non_monotone_objective_is_rejected() {
        let err = golden_section_root::<_, _, EstimationError>("x", |x| Ok((x - 0.5).powi(2) - 0.01), 0.0, 1.0, |_| 1e-6)
            .unwrap_err();
        assert!(matches!(err, EstimationError::NotMonotone { .. }));
    }

    #[test]
    fn slope_of_a_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 - 0.5 * i as f64)).collect();
        assert!((linear_slope(&pts).unwrap() + 0.5).abs() < 1e-12);
        assert_eq!(linear_slope(&[(1.0, 1.0), (1.0, 2.0)]), None);
    }

    #[test]
    fn hybrid_map_csv_round_trip() {
        let map = HybridMap {
            r_rad: vec![1500.0, 2.5e4, R_CAP],
            wall_temperature: 293.15,
            source: "network".into(),
        };
        let mut buf = Vec::new();
        map.write_csv(&mut buf, &[(0, 0), (0, 1), (0, 2)]).unwrap();
        let back = HybridMap::read_csv(buf.as_slice(), 293.15, "network".into()).unwrap();
        assert_eq!(back, map);
    }
}
