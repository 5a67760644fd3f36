//! Diffuse-gray radiation exchange.
//!
//! Three levels of detail: closed-form two-surface resistances, a per-vial
//! resistance to the wall (simplified and hybrid approaches) and the full
//! radiosity network over every surface of a scene.
//!
//! Heat rates are W leaving the surface; a vial colder than its
//! surroundings gets a negative value.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::geometry::{OccluderTemperature, Scene};
use crate::view_factors::ViewFactorMatrix;

/// Stefan–Boltzmann constant (W/m²K⁴).
pub const SIGMA: f64 = 5.67e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadiationError {
    #[error("invalid radiation input: {0}")]
    Invalid(String),
    #[error("radiosity system is singular: {0}")]
    SingularSystem(String),
}

/// Emissive power σT⁴.
pub fn emissive_power(t: f64) -> f64 {
    let t2 = t * t;
    SIGMA * t2 * t2
}

/// Surface resistance (1−ε)/(εA); zero for a black surface.
pub fn surface_resistance(emissivity: f64, area: f64) -> f64 {
    if emissivity >= 1.0 {
        0.0
    } else {
        (1.0 - emissivity) / (emissivity * area)
    }
}

/// Series resistance between two gray surfaces: surface, space, surface.
pub fn two_surface_resistance(eps1: f64, a1: f64, f12: f64, eps2: f64, a2: f64) -> f64 {
    surface_resistance(eps1, a1) + 1.0 / (a1 * f12) + surface_resistance(eps2, a2)
}

/// Net exchange from surface 1 to surface 2 of a two-surface enclosure.
pub fn two_surface_qrad(t1: f64, t2: f64, eps1: f64, a1: f64, f12: f64, eps2: f64, a2: f64) -> f64 {
    if f12 <= 0.0 {
        return 0.0;
    }
    (emissive_power(t1) - emissive_power(t2)) / two_surface_resistance(eps1, a1, f12, eps2, a2)
}

/// Simplified per-vial exchange: the vial treated as a two-surface
/// enclosure with the wall through its own wall view factor, ignoring
/// exchange with neighbours.
pub fn simplified_qrad(
    t_vial: f64,
    t_wall: f64,
    eps_vial: f64,
    vial_area: f64,
    f_wall: f64,
    eps_wall: f64,
    wall_area: f64,
) -> f64 {
    two_surface_qrad(t_vial, t_wall, eps_vial, vial_area, f_wall, eps_wall, wall_area)
}

/// Hybrid per-vial exchange through a single trained resistance (1/m²).
pub fn hybrid_qrad(t_vial: f64, t_wall: f64, r_rad: f64) -> f64 {
    (emissive_power(t_vial) - emissive_power(t_wall)) / r_rad
}

/// Radiative properties of every surface in a completed view-factor roster.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSet {
    pub view: ViewFactorMatrix,
    pub emissivity: Vec<f64>,
    /// Surfaces with no net exchange whose temperature floats.
    pub reradiating: Vec<bool>,
}

impl SurfaceSet {
    pub fn new(
        view: ViewFactorMatrix,
        emissivity: Vec<f64>,
        reradiating: Vec<bool>,
    ) -> Result<Self, RadiationError> {
        let k = view.len();
        if emissivity.len() != k || reradiating.len() != k {
            return Err(RadiationError::Invalid(format!(
                "{k} surfaces but {} emissivities and {} reradiating flags",
                emissivity.len(),
                reradiating.len()
            )));
        }
        for (i, &e) in emissivity.iter().enumerate() {
            if !(e > 0.0 && e <= 1.0) && !reradiating[i] {
                return Err(RadiationError::Invalid(format!(
                    "emissivity of {} must lie in (0, 1], got {e}",
                    view.ids[i]
                )));
            }
        }
        Ok(Self {
            view,
            emissivity,
            reradiating,
        })
    }

    /// Properties taken from a scene: vials at `vial_emissivity`, occluder
    /// faces and the wall at their own values.
    pub fn from_scene(
        scene: &Scene,
        view: ViewFactorMatrix,
        vial_emissivity: f64,
    ) -> Result<Self, RadiationError> {
        let mut eps = vec![vial_emissivity; scene.vial_count()];
        let mut rerad = vec![false; scene.vial_count()];
        for occ in &scene.occluders {
            let floats = matches!(occ.temperature, OccluderTemperature::Reradiating);
            eps.extend([occ.emissivity; 2]);
            rerad.extend([floats; 2]);
        }
        eps.push(scene.chamber.wall_emissivity);
        rerad.push(false);
        if view.len() != eps.len() {
            return Err(RadiationError::Invalid(format!(
                "view-factor roster has {} surfaces, scene has {}",
                view.len(),
                eps.len()
            )));
        }
        Self::new(view, eps, rerad)
    }

    pub fn len(&self) -> usize {
        self.view.len()
    }

    pub fn is_empty(&self) -> bool {
        self.view.is_empty()
    }

    /// Radiosity system `M J = D E_b`.
    fn system(&self) -> (DMatrix<f64>, DVector<f64>) {
        let k = self.len();
        let f = &self.view.f;
        let mut m = DMatrix::zeros(k, k);
        let mut d = DVector::zeros(k);
        for i in 0..k {
            // Weight on the irradiation G_i = Σ F_ij J_j.
            let reflect = if self.reradiating[i] {
                1.0
            } else {
                1.0 - self.emissivity[i]
            };
            for j in 0..k {
                m[(i, j)] = -reflect * f[(i, j)];
            }
            m[(i, i)] += 1.0;
            d[i] = 1.0 - reflect;
        }
        (m, d)
    }

    fn check_dominance(m: &DMatrix<f64>) -> Result<(), RadiationError> {
        let mut strict = false;
        for i in 0..m.nrows() {
            let diag = m[(i, i)].abs();
            let off: f64 = (0..m.ncols()).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum();
            if diag + 1e-12 < off {
                return Err(RadiationError::SingularSystem(format!(
                    "row {i} is not diagonally dominant ({diag} < {off})"
                )));
            }
            strict |= diag > off + 1e-12;
        }
        if !strict {
            return Err(RadiationError::SingularSystem(
                "no surface emits: every row is only weakly dominant".into(),
            ));
        }
        Ok(())
    }
}

/// Radiosities and net heat rates of every surface.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiosityResult {
    pub radiosity: Vec<f64>,
    /// Net W leaving each surface.
    pub q: Vec<f64>,
    /// Temperatures with reradiating surfaces replaced by their floating
    /// equilibrium value.
    pub temperatures: Vec<f64>,
}

/// Solves the radiosity network directly for one temperature vector.
///
/// Temperatures of reradiating surfaces are ignored.
pub fn solve_radiosity_network(
    set: &SurfaceSet,
    temperatures: &[f64],
) -> Result<RadiosityResult, RadiationError> {
    let k = set.len();
    if temperatures.len() != k {
        return Err(RadiationError::Invalid(format!(
            "{k} surfaces but {} temperatures",
            temperatures.len()
        )));
    }
    let (m, d) = set.system();
    SurfaceSet::check_dominance(&m)?;
    let rhs = DVector::from_iterator(
        k,
        temperatures
            .iter()
            .zip(d.iter())
            .map(|(&t, &w)| if w == 0.0 { 0.0 } else { w * emissive_power(t) }),
    );
    let j = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| RadiationError::SingularSystem("LU factorisation failed".into()))?;
    let irradiation = &set.view.f * &j;
    let q = (0..k)
        .map(|i| {
            if set.reradiating[i] {
                0.0
            } else {
                set.view.areas[i] * (j[i] - irradiation[i])
            }
        })
        .collect();
    let temperatures = (0..k)
        .map(|i| {
            if set.reradiating[i] {
                (j[i] / SIGMA).powf(0.25)
            } else {
                temperatures[i]
            }
        })
        .collect();
    Ok(RadiosityResult {
        radiosity: j.iter().copied().collect(),
        q,
        temperatures,
    })
}

/// The network reduced to a fixed linear map from emissive powers to net
/// heat rates, `Q = G E_b`. Built once per scene; each evaluation is then a
/// matrix product instead of a solve.
#[derive(Debug, Clone)]
pub struct NetworkOperator {
    g: DMatrix<f64>,
    g_t: DMatrix<f64>,
}

impl NetworkOperator {
    pub fn new(set: &SurfaceSet) -> Result<Self, RadiationError> {
        let k = set.len();
        let (m, d) = set.system();
        SurfaceSet::check_dominance(&m)?;
        let lu = m.lu();
        let rhs = DMatrix::from_diagonal(&d);
        let inv_d = lu
            .solve(&rhs)
            .ok_or_else(|| RadiationError::SingularSystem("LU factorisation failed".into()))?;
        let mut exchange = DMatrix::identity(k, k) - &set.view.f;
        for i in 0..k {
            let scale = if set.reradiating[i] { 0.0 } else { set.view.areas[i] };
            exchange.row_mut(i).scale_mut(scale);
        }
        let g = exchange * inv_d;
        let g_t = g.transpose();
        Ok(Self { g, g_t })
    }

    pub fn len(&self) -> usize {
        self.g.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.g.nrows() == 0
    }

    /// Entry `G[i][j]` (W per W/m² of emissive power).
    pub fn coefficient(&self, i: usize, j: usize) -> f64 {
        self.g[(i, j)]
    }

    /// Net heat rates for one temperature vector.
    pub fn heat_rates(&self, temperatures: &[f64]) -> Vec<f64> {
        let eb = DVector::from_iterator(self.len(), temperatures.iter().map(|&t| emissive_power(t)));
        (&self.g * eb).iter().copied().collect()
    }

    /// Net heat rates for many temperature vectors at once: column `n` of
    /// `temperatures` (surfaces × samples) maps to column `n` of the result.
    pub fn heat_rates_batch(&self, temperatures: &DMatrix<f64>) -> DMatrix<f64> {
        &self.g * temperatures.map(emissive_power)
    }

    /// Same as [`Self::heat_rates_batch`] with samples as rows: row `n` of
    /// `temperatures` (samples × surfaces) maps to row `n` of the result, so
    /// each surface's values are contiguous in the column-major output.
    pub fn heat_rates_by_node(&self, temperatures: &DMatrix<f64>) -> DMatrix<f64> {
        temperatures.map(emissive_power) * &self.g_t
    }
}

/// Temperatures of the non-vial surfaces of a scene in roster order
/// (reradiating faces get a placeholder; it is never used).
pub fn background_temperatures(scene: &Scene) -> Vec<f64> {
    let mut out = Vec::with_capacity(scene.surface_count() - scene.vial_count());
    for occ in &scene.occluders {
        let t = match occ.temperature {
            OccluderTemperature::Fixed(t) => t,
            OccluderTemperature::Reradiating => scene.chamber.wall_temperature,
        };
        out.extend([t; 2]);
    }
    out.push(scene.chamber.wall_temperature);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn matrix(areas: &[f64], f: &[&[f64]]) -> ViewFactorMatrix {
        let k = areas.len();
        let ids = (0..k).map(|i| format!("s{i}")).collect();
        let f = DMatrix::from_fn(k, k, |i, j| f[i][j]);
        ViewFactorMatrix::new(ids, areas.to_vec(), f)
    }

    /// Vial of area a1 fully enclosed by a wall of area a2.
    fn enclosure(a1: f64, a2: f64, f12: f64) -> ViewFactorMatrix {
        let f21 = a1 * f12 / a2;
        matrix(&[a1, a2], &[&[1.0 - f12, f12], &[f21, 1.0 - f21]])
    }

    #[test]
    fn resistances() {
        assert_eq!(surface_resistance(1.0, 2.0), 0.0);
        assert_relative_eq!(surface_resistance(0.8, 1.3e-3), 0.25 / 1.3e-3, max_relative = 1e-12);
        let r = two_surface_resistance(0.8, 1.3e-3, 1.0, 0.3, 0.54);
        assert_relative_eq!(r, 1.25 / 1.3e-3 + 0.7 / (0.3 * 0.54), max_relative = 1e-12);
    }

    #[test]
    fn network_reduces_to_two_surface_formula() {
        for (f12, t1, t2) in [(1.0, 250.0, 293.15), (0.8893, 256.15, 300.0), (0.4, 310.0, 240.0)] {
            let set = SurfaceSet::new(enclosure(1.3e-3, 0.54, f12), vec![0.8, 0.3], vec![false; 2])
                .unwrap();
            let net = solve_radiosity_network(&set, &[t1, t2]).unwrap();
            let closed = two_surface_qrad(t1, t2, 0.8, 1.3e-3, f12, 0.3, 0.54);
            assert_relative_eq!(net.q[0], closed, max_relative = 1e-12);
            assert_relative_eq!(net.q[1], -closed, max_relative = 1e-12);
            let op = NetworkOperator::new(&set).unwrap();
            assert_relative_eq!(op.heat_rates(&[t1, t2])[0], closed, max_relative = 1e-12);
        }
    }

    #[test]
    fn black_surfaces() {
        let set = SurfaceSet::new(enclosure(0.01, 1.0, 1.0), vec![1.0, 1.0], vec![false; 2]).unwrap();
        let q = solve_radiosity_network(&set, &[300.0, 200.0]).unwrap().q;
        assert_relative_eq!(q[0], 0.01 * (emissive_power(300.0) - emissive_power(200.0)), max_relative = 1e-12);
    }

    fn three_surfaces() -> ViewFactorMatrix {
        // Two small strips facing each other inside a large wall.
        let a = [0.02, 0.03, 1.0];
        let f01 = 0.3;
        let f10 = a[0] * f01 / a[1];
        let f02 = 1.0 - f01;
        let f12 = 1.0 - f10;
        let f20 = a[0] * f02 / a[2];
        let f21 = a[1] * f12 / a[2];
        matrix(&a, &[&[0.0, f01, f02], &[f10, 0.0, f12], &[f20, f21, 1.0 - f20 - f21]])
    }

    #[test]
    fn equilibrium_and_conservation() {
        let set = SurfaceSet::new(three_surfaces(), vec![0.8, 0.5, 0.3], vec![false; 3]).unwrap();
        let q = solve_radiosity_network(&set, &[280.0; 3]).unwrap().q;
        assert!(q.iter().all(|v| v.abs() < 1e-12));
        let q = solve_radiosity_network(&set, &[250.0, 270.0, 293.15]).unwrap().q;
        assert!(q.iter().sum::<f64>().abs() < 1e-12);
        assert!(q[0] < 0.0 && q[2] > 0.0);
    }

    #[test]
    fn reradiating_surface_floats_between_neighbours() {
        let set = SurfaceSet::new(three_surfaces(), vec![0.8, 0.5, 0.3], vec![false, true, false])
            .unwrap();
        let r = solve_radiosity_network(&set, &[250.0, 0.0, 293.15]).unwrap();
        assert_eq!(r.q[1], 0.0);
        assert!(r.temperatures[1] > 250.0 && r.temperatures[1] < 293.15);
        assert!((r.q[0] + r.q[2]).abs() < 1e-12);
    }

    #[test]
    fn colder_vial_absorbs_more() {
        let set = SurfaceSet::new(three_surfaces(), vec![0.8, 0.5, 0.3], vec![false; 3]).unwrap();
        let op = NetworkOperator::new(&set).unwrap();
        let mut last = f64::INFINITY;
        for t in [220.0, 240.0, 260.0, 280.0] {
            let q = op.heat_rates(&[t, 260.0, 293.15])[0];
            assert!(q > last || last.is_infinite());
            last = q;
        }
    }

    #[test]
    fn batch_matches_single_evaluations() {
        let set = SurfaceSet::new(three_surfaces(), vec![0.8, 0.5, 0.3], vec![false; 3]).unwrap();
        let op = NetworkOperator::new(&set).unwrap();
        let temps = DMatrix::from_row_slice(3, 2, &[250.0, 260.0, 255.0, 265.0, 293.15, 293.15]);
        let batch = op.heat_rates_batch(&temps);
        for n in 0..2 {
            let single = op.heat_rates(&[temps[(0, n)], temps[(1, n)], temps[(2, n)]]);
            for i in 0..3 {
                assert_relative_eq!(batch[(i, n)], single[i], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn all_reradiating_is_singular() {
        let set = SurfaceSet::new(enclosure(1.0, 1.0, 1.0), vec![0.5, 0.5], vec![true; 2]).unwrap();
        assert!(matches!(
            solve_radiosity_network(&set, &[300.0, 300.0]),
            Err(RadiationError::SingularSystem(_))
        ));
    }
}
