//! Fixtures shared by the benchmarks.

use lyorad::validation::reference_array;
use lyorad::{Approach, DryingMode, Scenario, SurfaceSet};

/// Reference 10×10 array with 0.5 cm gaps.
pub fn array_10x10(mode: DryingMode, approach: Approach) -> Scenario {
    reference_array(mode, 10, 0.005, approach).expect("reference array")
}

/// Radiative surfaces of the 10×10 array with view factors resolved.
pub fn surfaces_10x10() -> SurfaceSet {
    let s = array_10x10(DryingMode::Cfd, Approach::Network);
    let view = s.resolve_view_factors().expect("view factors");
    SurfaceSet::from_scene(&s.scene, view, s.material.vial_emissivity).expect("surfaces")
}
