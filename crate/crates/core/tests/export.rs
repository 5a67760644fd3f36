use lyorad::export::{export_results, SERIES_FILE};
use lyorad::sim::simulate;
use lyorad::validation::reference_array;
use lyorad::{Approach, DryingMode};

const HEADER: &str = "vial_id,row,col,x_m,y_m,label,t_m_hours,t_dry_hours,radiative_energy_J";

#[test]
fn summary_has_one_row_per_vial_and_is_reproducible() {
    let s = reference_array(DryingMode::Hfd, 10, 0.005, Approach::Simplified).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = export_results(&simulate(&s).unwrap(), &a, None).unwrap();
    let second = export_results(&simulate(&s).unwrap(), &b, None).unwrap();

    let text = std::fs::read_to_string(&first.summary).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(HEADER));
    assert_eq!(lines.count(), 100);
    assert_eq!(text, std::fs::read_to_string(&second.summary).unwrap());
    assert!(first.series.is_none());
    assert!(!a.join(SERIES_FILE).exists());

    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&first.metadata).unwrap()).unwrap();
    assert_eq!(meta["vials"], 100);
    assert_eq!(meta["approach"], "simplified");
}

#[test]
fn series_written_only_when_sampled() {
    let mut s = reference_array(DryingMode::Mfd, 1, 0.005, Approach::None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    s.series_every = Some(600.0);
    let with = export_results(&simulate(&s).unwrap(), dir.path(), None).unwrap();
    let series = std::fs::read_to_string(with.series.unwrap()).unwrap();
    assert!(series.starts_with("vial_id,time_s,"));
    assert!(series.lines().count() > 10);

    s.series_every = None;
    let without = export_results(&simulate(&s).unwrap(), dir.path(), None).unwrap();
    assert!(without.series.is_none());
    assert!(!dir.path().join(SERIES_FILE).exists(), "stale series left behind");
}
