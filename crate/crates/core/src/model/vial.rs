use serde::{Deserialize, Serialize};

use super::params::{power_densities, MaterialProperties, NumericsConfig, ProcessSettings, VialGeometry};
use super::ModelError;

/// Drying stage of a single vial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Heating,
    Sublimating,
    Done,
}

/// Evolving state of one vial.
///
/// `profile[0]` is the top of the product (x = 0), `profile[N-1]` the bottom
/// (x = L). Once sublimation starts the product is uniform and every entry
/// holds the same temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct VialState {
    pub stage: Stage,
    pub profile: Vec<f64>,
    /// Sublimation front position measured from the top (m).
    pub front: f64,
    /// Current time (s).
    pub time: f64,
    pub t_switch: Option<f64>,
    pub t_dry: Option<f64>,
    /// Radiative energy absorbed so far (J); positive means net gain.
    pub absorbed_energy: f64,
}

impl VialState {
    pub fn top(&self) -> f64 {
        self.profile[0]
    }

    pub fn bottom(&self) -> f64 {
        *self.profile.last().expect("profile has at least 3 nodes")
    }
}

/// Net radiation leaving a vial during one step, in W.
///
/// Heating vials see a node-resolved load (each node's value is the vial's
/// net exchange evaluated at that node's temperature); uniform vials see a
/// scalar.
#[derive(Debug, Clone, Copy)]
pub enum RadiationLoad<'a> {
    None,
    Uniform(f64),
    PerNode(&'a [f64]),
}

impl RadiationLoad<'_> {
    fn at(&self, i: usize) -> f64 {
        match self {
            RadiationLoad::None => 0.0,
            RadiationLoad::Uniform(q) => *q,
            RadiationLoad::PerNode(q) => q[i],
        }
    }

    /// Height average (trapezoidal over the uniform grid).
    pub fn mean(&self) -> f64 {
        match self {
            RadiationLoad::None => 0.0,
            RadiationLoad::Uniform(q) => *q,
            RadiationLoad::PerNode(q) => trapezoid_mean(q),
        }
    }
}

/// Trapezoidal mean of nodal values on a uniform grid.
pub fn trapezoid_mean(values: &[f64]) -> f64 {
    let n = values.len();
    match n {
        0 => 0.0,
        1 => values[0],
        _ => {
            let inner: f64 = values[1..n - 1].iter().sum();
            (inner + 0.5 * (values[0] + values[n - 1])) / (n - 1) as f64
        }
    }
}

/// What happened during a heating step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeatingOutcome {
    Continue,
    /// Top node reached Tm at this time within the step.
    Switched(f64),
}

/// Precomputed single-vial model: parameters, microwave sources and the
/// factored conduction operator.
#[derive(Debug, Clone)]
pub struct VialModel {
    pub material: MaterialProperties,
    pub settings: ProcessSettings,
    pub geometry: VialGeometry,
    pub numerics: NumericsConfig,
    hv: (f64, f64, f64),
    h: f64,
    // Factored tridiagonal operator of the implicit step.
    sub: Vec<f64>,
    super_prime: Vec<f64>,
    inv_denom: Vec<f64>,
    bottom_gain: f64,
}

impl VialModel {
    pub fn new(
        material: MaterialProperties,
        settings: ProcessSettings,
        geometry: VialGeometry,
        numerics: NumericsConfig,
    ) -> Result<Self, ModelError> {
        material.validate()?;
        settings.validate()?;
        geometry.validate()?;
        numerics.validate()?;

        let n = numerics.nodes;
        let dx = geometry.height / (n - 1) as f64;
        let lambda =
            material.conductivity * numerics.dt / (material.volumetric_heat_capacity() * dx * dx);
        let h = settings.effective_h();
        let biot = dx * h / material.conductivity;

        // Rows: top ghost node mirrors node 1; bottom ghost node carries the
        // Robin flux. Both eliminated at second order.
        let mut sub = vec![-lambda; n];
        let mut diag = vec![1.0 + 2.0 * lambda; n];
        let mut sup = vec![-lambda; n];
        sub[0] = 0.0;
        sup[0] = -2.0 * lambda;
        sub[n - 1] = -2.0 * lambda;
        sup[n - 1] = 0.0;
        diag[n - 1] += 2.0 * lambda * biot;

        let mut super_prime = vec![0.0; n];
        let mut inv_denom = vec![0.0; n];
        let mut prev = 0.0;
        for i in 0..n {
            let denom = diag[i] - sub[i] * prev;
            inv_denom[i] = 1.0 / denom;
            super_prime[i] = sup[i] * inv_denom[i];
            prev = super_prime[i];
        }

        Ok(Self {
            hv: power_densities(&settings, &geometry),
            h,
            material,
            settings,
            geometry,
            numerics,
            sub,
            super_prime,
            inv_denom,
            bottom_gain: 2.0 * lambda * biot,
        })
    }

    /// Microwave sources `(Hv1, Hv2, Hv3)` in W/m³.
    pub fn power_densities(&self) -> (f64, f64, f64) {
        self.hv
    }

    pub fn nodes(&self) -> usize {
        self.numerics.nodes
    }

    /// Uniform state at the initial product temperature, t = 0.
    pub fn initial_state(&self) -> VialState {
        VialState {
            stage: Stage::Heating,
            profile: vec![self.settings.t_initial; self.numerics.nodes],
            front: 0.0,
            time: 0.0,
            t_switch: None,
            t_dry: None,
            absorbed_energy: 0.0,
        }
    }

    /// Product temperature during sublimation: linear rise driven by Hv3,
    /// flat for CFD.
    pub fn sublimation_temperature(&self, t: f64, t_switch: f64) -> f64 {
        self.settings.t_sublimation
            + self.hv.2 / self.material.volumetric_heat_capacity() * (t - t_switch)
    }

    /// Interface heat input per unit cross-section (W/m²) averaged over
    /// `[a, b]`, with `q_rad` (W, net leaving) held fixed.
    fn front_flux(&self, a: f64, b: f64, t_switch: f64, q_rad: f64) -> f64 {
        let span = b - a;
        let shelf = if self.h > 0.0 {
            let tb_mean = if span > 0.0 {
                self.settings.shelf_temperature_integral(a, b) / span
            } else {
                self.settings.shelf_temperature(a)
            };
            let tp_mean = self.sublimation_temperature(0.5 * (a + b), t_switch);
            self.h * (tb_mean - tp_mean)
        } else {
            0.0
        };
        let l = self.geometry.height;
        shelf + self.hv.1 * l - q_rad * l / self.geometry.volume
    }

    /// One implicit conduction step of the configured `dt`.
    ///
    /// Leaves the state at the end of the step; on a switch the profile is
    /// the post-step one and the caller decides how to use the remainder.
    pub fn heating_step(
        &self,
        state: &mut VialState,
        load: RadiationLoad<'_>,
    ) -> Result<HeatingOutcome, ModelError> {
        debug_assert_eq!(state.stage, Stage::Heating);
        let dt = self.numerics.dt;
        let n = self.numerics.nodes;
        let t0 = state.time;
        let t1 = t0 + dt;
        let rho_cp = self.material.volumetric_heat_capacity();
        let v = self.geometry.volume;
        let scale = dt / rho_cp;
        let top_before = state.profile[0];

        // Forward sweep over the right-hand side.
        let mut rhs: Vec<f64> = (0..n)
            .map(|i| state.profile[i] + scale * (self.hv.0 - load.at(i) / v))
            .collect();
        rhs[n - 1] += self.bottom_gain * self.settings.shelf_temperature(t1);
        let mut prev = 0.0;
        for i in 0..n {
            rhs[i] = (rhs[i] - self.sub[i] * prev) * self.inv_denom[i];
            prev = rhs[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.super_prime[i] * rhs[i + 1];
        }
        state.profile.copy_from_slice(&rhs);
        state.absorbed_energy -= load.mean() * dt;
        state.time = t1;

        let tm = self.settings.t_sublimation;
        let top_after = state.profile[0];
        let threshold = tm * (1.0 - self.numerics.tol_event);
        if top_after >= threshold {
            let rise = top_after - top_before;
            let theta = if rise > 0.0 {
                ((tm - top_before) / rise).clamp(0.0, 1.0)
            } else {
                1.0
            };
            Ok(HeatingOutcome::Switched(t0 + theta * dt))
        } else {
            Ok(HeatingOutcome::Continue)
        }
    }

    /// Puts a heating vial into the sublimation stage at `t_switch`.
    ///
    /// Radiation energy absorbed after `t_switch` within the step that
    /// detected the switch stays attributed to the vial; both stages absorb.
    pub fn begin_sublimation(&self, state: &mut VialState, t_switch: f64) {
        state.stage = Stage::Sublimating;
        state.t_switch = Some(t_switch);
        state.front = 0.0;
        let t = self.sublimation_temperature(state.time, t_switch);
        state.profile.iter_mut().for_each(|x| *x = t);
    }

    /// Advances the sublimation front over `[a, b]`, where `a` may lie inside
    /// the current step (right after a switch). Returns the drying time if
    /// the front reaches the bottom.
    pub fn sublimation_step(
        &self,
        state: &mut VialState,
        a: f64,
        b: f64,
        q_rad: f64,
        account_energy: bool,
    ) -> Result<Option<f64>, ModelError> {
        debug_assert_eq!(state.stage, Stage::Sublimating);
        let t_switch = state.t_switch.expect("sublimating vial has a switch time");
        let span = b - a;
        if span <= 0.0 {
            return Ok(None);
        }
        let flux = self.front_flux(a, b, t_switch, q_rad);
        if flux <= 0.0 {
            return Err(ModelError::NegativeSublimationRate { time: a, flux });
        }
        let rate = flux / self.material.sublimation_energy_density();
        let l = self.geometry.height;
        let advance = rate * span;
        let remaining = l - state.front;
        let temp_end;
        let done = if advance >= remaining * (1.0 - self.numerics.tol_event) {
            let t_dry = a + span * (remaining / advance).min(1.0);
            if account_energy {
                state.absorbed_energy -= q_rad * (t_dry - a);
            }
            state.front = l;
            state.stage = Stage::Done;
            state.t_dry = Some(t_dry);
            temp_end = self.sublimation_temperature(t_dry, t_switch);
            Some(t_dry)
        } else {
            if account_energy {
                state.absorbed_energy -= q_rad * span;
            }
            state.front += advance;
            temp_end = self.sublimation_temperature(b, t_switch);
            None
        };
        state.profile.iter_mut().for_each(|x| *x = temp_end);
        state.time = b;
        Ok(done)
    }

    /// One synchronous step of length `dt` for whatever stage the vial is in,
    /// handling an in-step switch by continuing with sublimation for the rest
    /// of the step.
    pub fn step(&self, state: &mut VialState, load: RadiationLoad<'_>) -> Result<(), ModelError> {
        let dt = self.numerics.dt;
        match state.stage {
            Stage::Done => {
                state.time += dt;
                Ok(())
            }
            Stage::Heating => {
                let t0 = state.time;
                if t0 >= self.numerics.max_time {
                    return Err(ModelError::NoSublimationReached {
                        horizon: self.numerics.max_time,
                    });
                }
                let q_mean = load.mean();
                // Energy for the heating part only; the remainder is booked by
                // the sublimation step below.
                match self.heating_step(state, load)? {
                    HeatingOutcome::Continue => Ok(()),
                    HeatingOutcome::Switched(t_switch) => {
                        let t1 = state.time;
                        state.absorbed_energy += q_mean * (t1 - t_switch);
                        self.begin_sublimation(state, t_switch);
                        self.sublimation_step(state, t_switch, t1, q_mean, true)?;
                        Ok(())
                    }
                }
            }
            Stage::Sublimating => {
                let t0 = state.time;
                if t0 >= self.numerics.max_time {
                    return Err(ModelError::DryingHorizonExceeded {
                        horizon: self.numerics.max_time,
                    });
                }
                self.sublimation_step(state, t0, t0 + dt, load.mean(), true)?;
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DryingMode;

    fn model(mode: DryingMode) -> VialModel {
        VialModel::new(
            MaterialProperties::default(),
            ProcessSettings::with_mode(mode),
            VialGeometry::default(),
            NumericsConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn trapezoid_mean_of_linear_profile_is_midpoint() {
        let v: Vec<f64> = (0..11).map(|i| i as f64).collect();
        assert!((trapezoid_mean(&v) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn bottom_heated_profile_is_monotone() {
        let m = model(DryingMode::Cfd);
        let mut s = m.initial_state();
        for _ in 0..3000 {
            if m.heating_step(&mut s, RadiationLoad::None).unwrap() != HeatingOutcome::Continue {
                break;
            }
            for w in s.profile.windows(2) {
                assert!(w[1] >= w[0] - 1e-12, "T must not decrease toward the bottom");
            }
        }
    }

    #[test]
    fn cfd_sublimation_temperature_is_flat() {
        let m = model(DryingMode::Cfd);
        assert_eq!(m.sublimation_temperature(1e5, 10.0), 256.15);
    }

    #[test]
    fn negative_flux_is_an_error() {
        let m = model(DryingMode::Cfd);
        let mut s = m.initial_state();
        m.begin_sublimation(&mut s, 0.0);
        // A strongly emitting vial with a cold shelf.
        let err = m.sublimation_step(&mut s, 0.0, 1.0, 10.0, true).unwrap_err();
        assert!(matches!(err, ModelError::NegativeSublimationRate { .. }));
    }
}
