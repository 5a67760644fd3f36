use serde::{Deserialize, Serialize};

use super::ModelError;

/// Thermophysical properties of the frozen product and the vial surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialProperties {
    /// Frozen density (kg/m³).
    pub rho: f64,
    /// Dried-layer density (kg/m³).
    pub rho_dried: f64,
    /// Thermal conductivity (W/m·K).
    pub conductivity: f64,
    /// Heat capacity (J/kg·K).
    pub heat_capacity: f64,
    /// Latent heat of sublimation (J/kg).
    pub sublimation_enthalpy: f64,
    /// Emissivity of the vial's lateral surface.
    pub vial_emissivity: f64,
}

impl Default for MaterialProperties {
    fn default() -> Self {
        Self {
            rho: 917.0,
            rho_dried: 63.0,
            conductivity: 2.30,
            heat_capacity: 1967.8,
            sublimation_enthalpy: 2.84e6,
            vial_emissivity: 0.8,
        }
    }
}

impl MaterialProperties {
    pub fn validate(&self) -> Result<(), ModelError> {
        positive("rho", self.rho)?;
        positive("rho_dried", self.rho_dried)?;
        positive("conductivity", self.conductivity)?;
        positive("heat_capacity", self.heat_capacity)?;
        positive("sublimation_enthalpy", self.sublimation_enthalpy)?;
        if self.rho <= self.rho_dried {
            return Err(ModelError::InvalidParameter(format!(
                "rho ({}) must exceed rho_dried ({})",
                self.rho, self.rho_dried
            )));
        }
        open_unit("vial_emissivity", self.vial_emissivity)
    }

    /// Volumetric heat capacity ρ·Cp (J/m³·K).
    pub fn volumetric_heat_capacity(&self) -> f64 {
        self.rho * self.heat_capacity
    }

    /// Energy needed to sublimate a unit volume of frozen product (J/m³).
    pub fn sublimation_energy_density(&self) -> f64 {
        (self.rho - self.rho_dried) * self.sublimation_enthalpy
    }
}

/// Freeze-drying mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DryingMode {
    /// Conventional: shelf conduction only.
    Cfd,
    /// Microwave-assisted: microwave only, no shelf conduction.
    Mfd,
    /// Hybrid: shelf conduction and microwave.
    Hfd,
}

impl std::fmt::Display for DryingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DryingMode::Cfd => "CFD",
            DryingMode::Mfd => "MFD",
            DryingMode::Hfd => "HFD",
        })
    }
}

impl std::str::FromStr for DryingMode {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "CFD" => Ok(DryingMode::Cfd),
            "MFD" => Ok(DryingMode::Mfd),
            "HFD" => Ok(DryingMode::Hfd),
            other => Err(ModelError::InvalidParameter(format!(
                "unknown drying mode '{other}'"
            ))),
        }
    }
}

/// Heating protocol and microwave settings.
///
/// The mode gates the heat sources: CFD ignores the microwave power and MFD
/// ignores the shelf coefficient. Use [`ProcessSettings::effective_h`] and
/// [`ProcessSettings::effective_power`] rather than the raw fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessSettings {
    /// Bottom heat-transfer coefficient (W/m²·K).
    pub h: f64,
    /// Initial product temperature (K).
    pub t_initial: f64,
    /// Initial shelf temperature (K).
    pub shelf_initial: f64,
    /// Maximum shelf temperature (K).
    pub shelf_max: f64,
    /// Shelf ramp rate (K/s).
    pub ramp_rate: f64,
    /// Sublimation temperature (K).
    pub t_sublimation: f64,
    /// Microwave output power (W).
    pub microwave_power: f64,
    /// Fraction of microwave power absorbed during heating.
    pub p1: f64,
    /// Fraction of microwave power driving sublimation.
    pub p2: f64,
    /// Fraction of microwave power heating the product during sublimation.
    pub p3: f64,
    pub mode: DryingMode,
}

impl Default for ProcessSettings {
    fn default() -> Self {
        Self::with_mode(DryingMode::Cfd)
    }
}

impl ProcessSettings {
    /// Reference operating point for the given mode.
    pub fn with_mode(mode: DryingMode) -> Self {
        Self {
            h: 65.0,
            t_initial: 236.85,
            shelf_initial: 236.85,
            shelf_max: 281.85,
            ramp_rate: 1.0 / 60.0,
            t_sublimation: 256.15,
            microwave_power: 85.0,
            p1: 3.73e-4,
            p2: 8.62e-3,
            p3: 2.5e-5,
            mode,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        non_negative("h", self.h)?;
        non_negative("microwave_power", self.microwave_power)?;
        non_negative("p1", self.p1)?;
        non_negative("p2", self.p2)?;
        non_negative("p3", self.p3)?;
        non_negative("ramp_rate", self.ramp_rate)?;
        positive("t_initial", self.t_initial)?;
        positive("shelf_initial", self.shelf_initial)?;
        positive("t_sublimation", self.t_sublimation)?;
        if self.shelf_max < self.shelf_initial {
            return Err(ModelError::InvalidParameter(format!(
                "shelf_max ({}) below shelf_initial ({})",
                self.shelf_max, self.shelf_initial
            )));
        }
        Ok(())
    }

    /// Shelf coefficient after applying the mode (zero for MFD).
    pub fn effective_h(&self) -> f64 {
        match self.mode {
            DryingMode::Mfd => 0.0,
            _ => self.h,
        }
    }

    /// Microwave power after applying the mode (zero for CFD).
    pub fn effective_power(&self) -> f64 {
        match self.mode {
            DryingMode::Cfd => 0.0,
            _ => self.microwave_power,
        }
    }

    /// Shelf temperature at time `t`: linear ramp capped at `shelf_max`.
    pub fn shelf_temperature(&self, t: f64) -> f64 {
        (self.ramp_rate * t + self.shelf_initial).min(self.shelf_max)
    }

    /// Exact integral of the shelf temperature over `[a, b]` (K·s).
    pub fn shelf_temperature_integral(&self, a: f64, b: f64) -> f64 {
        let ramp_end = if self.ramp_rate > 0.0 {
            (self.shelf_max - self.shelf_initial) / self.ramp_rate
        } else {
            f64::INFINITY
        };
        let ramp_part = |lo: f64, hi: f64| {
            (hi - lo) * (self.shelf_initial + 0.5 * self.ramp_rate * (lo + hi))
        };
        if b <= ramp_end {
            ramp_part(a, b)
        } else if a >= ramp_end {
            (b - a) * self.shelf_max
        } else {
            ramp_part(a, ramp_end) + (b - ramp_end) * self.shelf_max
        }
    }
}

/// Shelf temperature at time `t` (s) for the given settings (K).
pub fn shelf_temperature(t: f64, settings: &ProcessSettings) -> f64 {
    settings.shelf_temperature(t)
}

/// Volumetric microwave heat sources `(Hv1, Hv2, Hv3)` in W/m³.
pub fn power_densities(settings: &ProcessSettings, geom: &VialGeometry) -> (f64, f64, f64) {
    let qv = settings.effective_power() / geom.volume;
    (settings.p1 * qv, settings.p2 * qv, settings.p3 * qv)
}

/// Product column inside one vial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VialGeometry {
    /// Vial outer diameter (m).
    pub diameter: f64,
    /// Product height (m).
    pub height: f64,
    /// Lateral radiating area (m²).
    pub area: f64,
    /// Product volume (m³).
    pub volume: f64,
}

impl Default for VialGeometry {
    /// Reference vial with the tabulated (rounded) area and volume.
    fn default() -> Self {
        Self {
            diameter: 0.01,
            height: 0.042,
            area: 1.3e-3,
            volume: 3.3e-6,
        }
    }
}

impl VialGeometry {
    /// Cylinder with area π·d·L and volume π·d²·L/4.
    pub fn cylinder(diameter: f64, height: f64) -> Self {
        Self {
            diameter,
            height,
            area: std::f64::consts::PI * diameter * height,
            volume: 0.25 * std::f64::consts::PI * diameter * diameter * height,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        positive("diameter", self.diameter)?;
        positive("height", self.height)?;
        positive("area", self.area)?;
        positive("volume", self.volume)
    }
}

/// Discretisation controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericsConfig {
    /// Spatial nodes across the product height.
    pub nodes: usize,
    /// Time step (s).
    pub dt: f64,
    /// Event tolerance, relative to the event's scale (Tm for switching,
    /// L for drying completion).
    pub tol_event: f64,
    /// Give up after this much simulated time (s).
    pub max_time: f64,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            nodes: 101,
            dt: 1.0,
            tol_event: 1e-6,
            max_time: 500.0 * 3600.0,
        }
    }
}

impl NumericsConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.nodes < 3 {
            return Err(ModelError::InvalidParameter(format!(
                "nodes must be at least 3, got {}",
                self.nodes
            )));
        }
        positive("dt", self.dt)?;
        non_negative("tol_event", self.tol_event)?;
        positive("max_time", self.max_time)
    }
}

fn positive(name: &str, v: f64) -> Result<(), ModelError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

fn non_negative(name: &str, v: f64) -> Result<(), ModelError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter(format!(
            "{name} must be non-negative, got {v}"
        )))
    }
}

fn open_unit(name: &str, v: f64) -> Result<(), ModelError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter(format!(
            "{name} must lie in (0, 1), got {v}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn shelf_starts_at_initial_value() {
        let s = ProcessSettings::default();
        assert_eq!(shelf_temperature(0.0, &s), 236.85);
    }

    #[test]
    fn shelf_reaches_cap_after_45_minutes() {
        let s = ProcessSettings::default();
        assert_relative_eq!(shelf_temperature(45.0 * 60.0, &s), 281.85, epsilon = 1e-9);
        assert_eq!(shelf_temperature(1e9, &s), s.shelf_max);
    }

    #[test]
    fn shelf_integral_matches_quadrature_across_the_kink() {
        let s = ProcessSettings::default();
        let (a, b) = (2000.0, 3500.0);
        let n = 100_000;
        let h = (b - a) / n as f64;
        let mid: f64 = (0..n)
            .map(|i| s.shelf_temperature(a + (i as f64 + 0.5) * h) * h)
            .sum();
        assert_relative_eq!(s.shelf_temperature_integral(a, b), mid, max_relative = 1e-9);
    }

    #[test]
    fn cfd_has_no_microwave_heating() {
        let s = ProcessSettings::with_mode(DryingMode::Cfd);
        assert_eq!(power_densities(&s, &VialGeometry::default()), (0.0, 0.0, 0.0));
    }

    #[test]
    fn microwave_power_density() {
        let s = ProcessSettings::with_mode(DryingMode::Hfd);
        let g = VialGeometry::default();
        let (hv1, hv2, hv3) = power_densities(&s, &g);
        let qv = 85.0 / 3.3e-6;
        assert_relative_eq!(qv, 2.5758e7, max_relative = 1e-4);
        assert_relative_eq!(hv2, 2.22e5, max_relative = 2e-3);
        assert_relative_eq!(hv1, 3.73e-4 * qv);
        assert_relative_eq!(hv3, 2.5e-5 * qv);
    }

    #[test]
    fn mfd_disables_shelf() {
        let s = ProcessSettings::with_mode(DryingMode::Mfd);
        assert_eq!(s.effective_h(), 0.0);
        assert_eq!(s.effective_power(), 85.0);
    }

    #[test]
    fn rejects_inverted_densities() {
        let m = MaterialProperties {
            rho_dried: 1000.0,
            ..Default::default()
        };
        assert!(m.validate().is_err());
    }

    #[test]
    fn cylinder_matches_tabulated_reference() {
        let g = VialGeometry::cylinder(0.01, 0.042);
        assert_relative_eq!(g.area, 1.3e-3, max_relative = 0.02);
        assert_relative_eq!(g.volume, 3.3e-6, max_relative = 0.01);
    }
}
