//! Every scenario under `configs/` loads, survives the explicit round trip,
//! and the `defaults.*` files spell out the built-in reference values.

use std::path::{Path, PathBuf};

use lyorad::config::{load_fit_problem, load_scenario, FitTask, ScenarioConfig};
use lyorad::{
    Approach, Chamber, DryingMode, MaterialProperties, NumericsConfig, ProcessSettings, VialGeometry,
};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn tomls(dir: &Path) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    out.sort();
    out
}

#[test]
fn scenarios_load_and_round_trip() {
    let files = tomls(&configs());
    assert!(files.len() >= 15, "only {} scenario files", files.len());
    for path in files {
        let loaded = load_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let explicit = ScenarioConfig::from_scenario(&loaded).unwrap().to_toml().unwrap();
        let again = ScenarioConfig::from_toml(&explicit)
            .unwrap()
            .resolve(path.parent().unwrap())
            .unwrap();
        assert_eq!(again.scenario, loaded.scenario, "{}", path.display());
    }
}

#[test]
fn defaults_files_match_the_reference_values() {
    for (file, mode) in [
        ("defaults.cfd.toml", DryingMode::Cfd),
        ("defaults.mfd.toml", DryingMode::Mfd),
        ("defaults.hfd.toml", DryingMode::Hfd),
    ] {
        let s = load_scenario(&configs().join(file)).unwrap().scenario;
        assert_eq!(s.material, MaterialProperties::default(), "{file}");
        assert_eq!(s.settings, ProcessSettings::with_mode(mode), "{file}");
        assert_eq!(s.geometry, VialGeometry::default(), "{file}");
        assert_eq!(s.scene.chamber, Chamber::default(), "{file}");
        assert_eq!(s.numerics, NumericsConfig::default(), "{file}");
        assert_eq!(s.scene.vial_count(), 1, "{file}");
        assert_eq!(s.approach, Approach::None, "{file}");
    }
}

#[test]
fn fit_problems_resolve() {
    for path in tomls(&configs().join("problems")) {
        let task = load_fit_problem(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        match task {
            FitTask::Scalar(p) => assert!(p.bounds.0 < p.bounds.1),
            FitTask::Hybrid { scenario, .. } => assert_eq!(scenario.scene.vial_count(), 100),
        }
    }
}

#[test]
fn shipped_hybrid_map_covers_the_array() {
    let s = load_scenario(&configs().join("cfd_10x10_hybrid.toml")).unwrap().scenario;
    let map = s.hybrid.expect("map loaded");
    assert_eq!(map.r_rad.len(), 100);
    assert!(map.r_rad.iter().all(|&r| r > 0.0));
    assert_eq!(map.wall_temperature, 293.15);
}
