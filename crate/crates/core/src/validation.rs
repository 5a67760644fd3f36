//! Built-in reference checks.
//!
//! Each criterion rebuilds its scenario from scratch, runs it and compares
//! the outcome with a reference value at a fixed tolerance. Failures are
//! entries in the report, not errors. The scenario builders are public so
//! the same setups can be reused from configs, benches and tests.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::estimation::{fit_scalar, train_hybrid, with_hybrid_map, FitParameter, FitProblem, Observable};
use crate::geometry::{Chamber, Layout, Occluder, OccluderTemperature, Scene};
use crate::model::{
    simulate_single_vial, DryingMode, MaterialProperties, NoRadiation, NumericsConfig,
    ProcessSettings, VialGeometry, VialModel,
};
use crate::radiation::{solve_radiosity_network, two_surface_qrad, NetworkOperator, SurfaceSet};
use crate::sim::{simulate, Approach, Scenario, SimError, SimulationResult};
use crate::view_factors::{
    analytical_matrix, complete_and_validate, middle_of_three_wall_view, monte_carlo_view_factors,
    two_vial_wall_view, McConfig,
};
use crate::HOUR;

/// One compared quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub computed: String,
    pub tolerance: String,
    pub passed: bool,
}

impl Check {
    fn within(name: impl Into<String>, expected: f64, computed: f64, tol: f64, unit: &str) -> Self {
        Self {
            name: name.into(),
            expected: format!("{expected}{unit}"),
            computed: format!("{computed:.4}{unit}"),
            tolerance: format!("±{tol}{unit}"),
            passed: (computed - expected).abs() <= tol,
        }
    }

    fn relative(name: impl Into<String>, expected: f64, computed: f64, rel: f64) -> Self {
        Self {
            name: name.into(),
            expected: trimmed(expected),
            computed: trimmed(computed),
            tolerance: format!("±{}%", rel * 100.0),
            passed: ((computed - expected) / expected).abs() <= rel,
        }
    }

    fn range(name: impl Into<String>, lo: f64, hi: f64, computed: f64, unit: &str) -> Self {
        Self {
            name: name.into(),
            expected: format!("[{lo}, {hi}]{unit}"),
            computed: format!("{computed:.4}{unit}"),
            tolerance: "range".into(),
            passed: computed >= lo && computed <= hi,
        }
    }

    fn at_most(name: impl Into<String>, computed: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            expected: "0".into(),
            computed: format!("{computed:.3e}"),
            tolerance: format!("<= {limit:e}"),
            passed: computed <= limit,
        }
    }

    fn at_least(name: impl Into<String>, computed: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            expected: format!(">= {limit}"),
            computed: format!("{computed:.4}"),
            tolerance: "bound".into(),
            passed: computed >= limit,
        }
    }

    fn holds(name: impl Into<String>, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            expected: "true".into(),
            computed: detail,
            tolerance: "exact".into(),
            passed,
        }
    }
}

/// Six decimals without trailing zeros.
fn trimmed(v: f64) -> String {
    let s = format!("{v:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub name: &'static str,
    pub checks: Vec<Check>,
    /// Extra figures printed alongside the checks.
    pub notes: Vec<String>,
    /// Set when the criterion could not be evaluated at all.
    pub error: Option<String>,
    pub seconds: f64,
}

impl CriterionReport {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub criteria: Vec<CriterionReport>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(CriterionReport::passed)
    }

    /// One line per criterion followed by its checks.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.criteria {
            let status = if c.passed() { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "[{status}] {:>2} {} ({:.1} s)", c.id, c.name, c.seconds);
            if let Some(e) = &c.error {
                let _ = writeln!(out, "       error: {e}");
            }
            for k in &c.checks {
                let _ = writeln!(
                    out,
                    "       {} {:<44} expected {:<16} computed {:<16} tol {}",
                    if k.passed { "ok  " } else { "FAIL" },
                    k.name,
                    k.expected,
                    k.computed,
                    k.tolerance
                );
            }
            for n in &c.notes {
                let _ = writeln!(out, "       note: {n}");
            }
        }
        out
    }
}

pub const CRITERIA: [(u8, &str); 13] = [
    (1, "analytical view factors"),
    (2, "monte carlo view factors"),
    (3, "no-radiation baselines"),
    (4, "cfd 10x10 network"),
    (5, "simplified vs network"),
    (6, "case 5"),
    (7, "case 6"),
    (8, "layout study"),
    (9, "radiative energy"),
    (10, "wall temperature"),
    (11, "tray occluder"),
    (12, "hybrid training"),
    (13, "properties"),
];

/// Reference array: `n`×`n` rectangular layout with the default vial and
/// chamber, default Monte Carlo view factors.
pub fn reference_array(mode: DryingMode, n: usize, gap: f64, approach: Approach) -> Result<Scenario, SimError> {
    let geometry = VialGeometry::default();
    let chamber = Chamber::default();
    let layout = Layout::rectangular(n, n, geometry.diameter, gap, chamber.side)?;
    let scene = Scene::new(layout, chamber, geometry.area)?;
    Ok(Scenario::new(scene, ProcessSettings::with_mode(mode), approach))
}

/// The reference HFD 10×10 array inside a closed tray frame one gap beyond
/// the outermost vials, at the wall temperature.
pub fn tray_scenario() -> Result<Scenario, SimError> {
    let mut s = reference_array(DryingMode::Hfd, 10, 0.005, Approach::Network)?;
    let chamber = s.scene.chamber;
    let frame = Occluder::tray_frame(
        &s.scene.layout,
        s.scene.layout.gap,
        chamber.wall_emissivity,
        OccluderTemperature::Fixed(chamber.wall_temperature),
        s.geometry.height,
    );
    s.scene = s.scene.add_occluder(frame)?;
    Ok(s)
}

/// Low-load CFD run: 10×10 close-packed vials of 1.425 cm, 0.8 cm fill.
pub fn case5_scenario(approach: Approach) -> Result<Scenario, SimError> {
    let geometry = VialGeometry {
        diameter: 0.01425,
        height: 0.008,
        area: 3.58e-4,
        volume: 1.28e-6,
    };
    let settings = ProcessSettings {
        h: 18.1,
        t_initial: 230.75,
        shelf_initial: 230.75,
        shelf_max: 268.15,
        t_sublimation: 242.70,
        ramp_rate: 0.208 / 60.0,
        ..ProcessSettings::with_mode(DryingMode::Cfd)
    };
    let chamber = Chamber::default();
    let layout = Layout::rectangular(10, 10, geometry.diameter, 0.0, chamber.side)?;
    let scene = Scene::new(layout, chamber, geometry.area)?;
    let mut s = Scenario::new(scene, settings, approach);
    s.geometry = geometry;
    s.material = MaterialProperties {
        rho_dried: 252.0,
        ..MaterialProperties::default()
    };
    Ok(s)
}

/// CFD run with 1.4 cm vials filled to 1.6 cm, 10×10 close packed.
pub fn case6_scenario(h: f64, approach: Approach) -> Result<Scenario, SimError> {
    let geometry = VialGeometry {
        diameter: 0.014,
        height: 0.016,
        area: 7.04e-4,
        volume: 2.46e-6,
    };
    let settings = ProcessSettings {
        h,
        t_initial: 260.0,
        shelf_initial: 260.0,
        shelf_max: 310.0,
        t_sublimation: 263.15,
        ..ProcessSettings::with_mode(DryingMode::Cfd)
    };
    let chamber = Chamber::default();
    let layout = Layout::rectangular(10, 10, geometry.diameter, 0.0, chamber.side)?;
    let scene = Scene::new(layout, chamber, geometry.area)?;
    let mut s = Scenario::new(scene, settings, approach);
    s.geometry = geometry;
    Ok(s)
}

fn hours(s: f64) -> f64 {
    s / HOUR
}

fn outcome(r: &SimulationResult, row: usize, col: usize) -> Result<&crate::sim::VialOutcome, String> {
    r.at(row, col).ok_or_else(|| format!("no vial at ({row}, {col})"))
}

/// A network run with its view factors already resolved.
struct Shared {
    scenario: Scenario,
    result: SimulationResult,
}

fn shared_network(mode: DryingMode) -> Result<Shared, String> {
    let mut scenario = reference_array(mode, 10, 0.005, Approach::Network).map_err(|e| e.to_string())?;
    scenario.cache_view_factors().map_err(|e| e.to_string())?;
    let result = simulate(&scenario).map_err(|e| e.to_string())?;
    Ok(Shared { scenario, result })
}

struct Context {
    cfd: Option<Result<Shared, String>>,
    hfd: Option<Result<Shared, String>>,
}

impl Context {
    fn cfd(&self) -> Result<&Shared, String> {
        self.cfd.as_ref().expect("prepared").as_ref().map_err(Clone::clone)
    }

    fn hfd(&self) -> Result<&Shared, String> {
        self.hfd.as_ref().expect("prepared").as_ref().map_err(Clone::clone)
    }
}

/// Whether a filter selects a criterion: empty, its number, or a
/// case-insensitive substring of its name.
pub fn selects(filter: Option<&str>, id: u8, name: &str) -> bool {
    match filter.map(str::trim) {
        None | Some("") => true,
        Some(f) => f == id.to_string() || name.contains(&f.to_ascii_lowercase()),
    }
}

/// Runs every criterion selected by `filter`. Independent criteria run in
/// parallel after the two shared 10×10 network runs.
pub fn run_validation_suite(filter: Option<&str>) -> ValidationReport {
    let selected: Vec<(u8, &'static str)> = CRITERIA
        .iter()
        .copied()
        .filter(|(id, name)| selects(filter, *id, name))
        .collect();
    let needs = |ids: &[u8]| selected.iter().any(|(id, _)| ids.contains(id));
    let ctx = Context {
        cfd: needs(&[4, 5, 9, 12, 13]).then(|| shared_network(DryingMode::Cfd)),
        hfd: needs(&[8, 9, 10, 11]).then(|| shared_network(DryingMode::Hfd)),
    };
    let criteria = selected
        .par_iter()
        .map(|&(id, name)| run_criterion(id, name, &ctx))
        .collect();
    ValidationReport { criteria }
}

fn run_criterion(id: u8, name: &'static str, ctx: &Context) -> CriterionReport {
    let start = std::time::Instant::now();
    let mut notes = Vec::new();
    let outcome = match id {
        1 => analytical_view_factors(),
        2 => monte_carlo_accuracy(),
        3 => baselines(),
        4 => cfd_network(ctx),
        5 => simplified_discrepancy(ctx),
        6 => case5(),
        7 => case6(&mut notes),
        8 => layout_study(ctx),
        9 => radiative_energy(ctx),
        10 => wall_temperature(ctx, &mut notes),
        11 => tray(ctx),
        12 => hybrid(ctx),
        13 => properties(ctx, &mut notes),
        _ => Err(format!("unknown criterion {id}")),
    };
    let (checks, error) = match outcome {
        Ok(c) => (c, None),
        Err(e) => (Vec::new(), Some(e)),
    };
    CriterionReport {
        id,
        name,
        checks,
        notes,
        error,
        seconds: start.elapsed().as_secs_f64(),
    }
}

type Checks = Result<Vec<Check>, String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

const GAP: f64 = 0.005;
const DIAMETER: f64 = 0.01;

fn row_scene(n: usize) -> Result<Scene, String> {
    let chamber = Chamber::default();
    let layout = Layout::rectangular(n, 1, DIAMETER, GAP, chamber.side).map_err(err)?;
    Scene::new(layout, chamber, VialGeometry::default().area).map_err(err)
}

fn analytical_view_factors() -> Checks {
    let two = complete_and_validate(&analytical_matrix(&row_scene(2)?).map_err(err)?).map_err(err)?;
    let three = complete_and_validate(&analytical_matrix(&row_scene(3)?).map_err(err)?).map_err(err)?;
    Ok(vec![
        Check::within("two vials, F(vial, wall)", 0.8893, two.get(0, two.wall()), 5e-5, ""),
        Check::within("three vials, middle F(vial, wall)", 0.7786, three.get(1, three.wall()), 5e-5, ""),
    ])
}

fn monte_carlo_accuracy() -> Checks {
    let exact_two = two_vial_wall_view(GAP, DIAMETER);
    let exact_three = middle_of_three_wall_view(GAP, DIAMETER);
    let mut checks = Vec::new();
    for seed in [McConfig::default().seed, 20_240_917] {
        let cfg = McConfig {
            n_rays: 100_000,
            seed,
        };
        let two = monte_carlo_view_factors(&row_scene(2)?, &cfg).map_err(err)?;
        let three = monte_carlo_view_factors(&row_scene(3)?, &cfg).map_err(err)?;
        checks.push(Check::relative(
            format!("two vials, seed {seed}"),
            exact_two,
            two.get(0, two.wall()),
            0.005,
        ));
        checks.push(Check::relative(
            format!("three vials middle, seed {seed}"),
            exact_three,
            three.get(1, three.wall()),
            0.005,
        ));
    }
    Ok(checks)
}

fn single_vial_time(mode: DryingMode) -> Result<f64, String> {
    let model = VialModel::new(
        MaterialProperties::default(),
        ProcessSettings::with_mode(mode),
        VialGeometry::default(),
        NumericsConfig::default(),
    )
    .map_err(err)?;
    Ok(simulate_single_vial(&model, &NoRadiation, None).map_err(err)?.t_dry)
}

fn baselines() -> Checks {
    let expected = [(DryingMode::Cfd, 17.7), (DryingMode::Mfd, 4.0), (DryingMode::Hfd, 3.2)];
    expected
        .iter()
        .map(|&(mode, want)| {
            Ok(Check::within(
                format!("{mode} drying time"),
                want,
                hours(single_vial_time(mode)?),
                0.1,
                " h",
            ))
        })
        .collect()
}

fn cfd_network(ctx: &Context) -> Checks {
    let r = &ctx.cfd()?.result;
    Ok(vec![
        Check::within("corner drying time", 9.6, hours(outcome(r, 0, 0)?.t_dry), 0.2, " h"),
        Check::within("edge drying time", 11.5, hours(outcome(r, 0, 5)?.t_dry), 0.3, " h"),
    ])
}

fn simplified_discrepancy(ctx: &Context) -> Checks {
    let shared = ctx.cfd()?;
    let simplified = simulate(&shared.scenario.with_approach(Approach::Simplified)).map_err(err)?;
    let mut checks = Vec::new();
    for (label, row, col) in [("corner", 0, 0), ("edge", 0, 5)] {
        let net = outcome(&shared.result, row, col)?.t_dry;
        let simp = outcome(&simplified, row, col)?.t_dry;
        checks.push(Check::range(
            format!("{label} relative discrepancy"),
            4.0,
            8.0,
            100.0 * (net - simp) / net,
            " %",
        ));
        checks.push(Check::within(
            format!("{label} discrepancy"),
            0.7,
            hours(net - simp),
            0.2,
            " h",
        ));
    }
    Ok(checks)
}

fn case5() -> Checks {
    let none = simulate(&case5_scenario(Approach::None).map_err(err)?).map_err(err)?;
    let mut rad = case5_scenario(Approach::Simplified).map_err(err)?;
    rad.cache_view_factors().map_err(err)?;
    let default_wall = simulate(&rad).map_err(err)?;
    let fitted_wall = simulate(&rad.with_wall_temperature(288.80)).map_err(err)?;
    Ok(vec![
        Check::within("no radiation", 11.1, hours(outcome(&none, 0, 0)?.t_dry), 0.2, " h"),
        Check::within("corner, wall 293.15 K", 7.4, hours(outcome(&default_wall, 0, 0)?.t_dry), 0.2, " h"),
        Check::within("corner, wall 288.80 K", 7.7, hours(outcome(&fitted_wall, 0, 0)?.t_dry), 0.2, " h"),
    ])
}

fn case6(notes: &mut Vec<String>) -> Checks {
    let base = case6_scenario(24.8, Approach::None).map_err(err)?;
    let fit = fit_scalar(&FitProblem {
        parameter: FitParameter::H,
        bounds: FitParameter::H.default_bounds(&base),
        observable: Observable::DryingTime { vial: 55 },
        reference: 9.74 * HOUR,
        scenario: base,
    })
    .map_err(err)?;
    notes.push(format!("fitted h = {:.3} W/m2K", fit.value));
    let net = simulate(&case6_scenario(fit.value, Approach::Network).map_err(err)?).map_err(err)?;
    Ok(vec![
        Check::within("edge drying time", 8.47, hours(outcome(&net, 0, 5)?.t_dry), 0.15, " h"),
        Check::within("corner drying time", 7.61, hours(outcome(&net, 0, 0)?.t_dry), 0.15, " h"),
    ])
}

fn layout_study(ctx: &Context) -> Checks {
    let table: [(usize, f64, Option<f64>); 6] = [
        (1, 2.34, None),
        (2, 2.48, None),
        (5, 2.54, Some(2.68)),
        (8, 2.56, Some(2.73)),
        (10, 2.56, Some(2.74)),
        (15, 2.59, Some(2.76)),
    ];
    let results: Vec<Result<(usize, f64, Option<f64>), String>> = table
        .par_iter()
        .map(|&(n, _, edge)| {
            let r = if n == 10 {
                ctx.hfd()?.result.clone()
            } else {
                let s = reference_array(DryingMode::Hfd, n, GAP, Approach::Network).map_err(err)?;
                simulate(&s).map_err(err)?
            };
            let corner = outcome(&r, 0, 0)?.t_dry;
            let edge = match edge {
                Some(_) => Some(outcome(&r, 0, n / 2)?.t_dry),
                None => None,
            };
            Ok((n, corner, edge))
        })
        .collect();
    let mut checks = Vec::new();
    for (res, &(n, corner_ref, edge_ref)) in results.into_iter().zip(&table) {
        let (_, corner, edge) = res?;
        checks.push(Check::within(format!("{n}x{n} corner"), corner_ref, hours(corner), 0.05, " h"));
        if let (Some(e), Some(r)) = (edge, edge_ref) {
            checks.push(Check::within(format!("{n}x{n} edge"), r, hours(e), 0.05, " h"));
        }
    }
    Ok(checks)
}

fn radiative_energy(ctx: &Context) -> Checks {
    let cfd = &ctx.cfd()?.result;
    let hfd = &ctx.hfd()?.result;
    Ok(vec![
        Check::relative("CFD corner (J)", 3975.0, outcome(cfd, 0, 0)?.absorbed_energy, 0.10),
        Check::relative("CFD edge (J)", 3014.0, outcome(cfd, 0, 5)?.absorbed_energy, 0.10),
        Check::relative("CFD center (J)", 184.0, outcome(cfd, 5, 5)?.absorbed_energy, 0.10),
        Check::relative("HFD corner (J)", 1073.0, outcome(hfd, 0, 0)?.absorbed_energy, 0.10),
    ])
}

/// Wall temperatures of the sweep, from the sublimation temperature up.
pub const WALL_SWEEP: [f64; 5] = [256.15, 263.15, 273.15, 283.15, 293.15];

fn wall_temperature(ctx: &Context, notes: &mut Vec<String>) -> Checks {
    let shared = ctx.hfd()?;
    let runs: Vec<Result<(f64, f64), String>> = WALL_SWEEP
        .par_iter()
        .map(|&t2| {
            let r = if t2 == shared.scenario.scene.chamber.wall_temperature {
                shared.result.clone()
            } else {
                simulate(&shared.scenario.with_wall_temperature(t2)).map_err(err)?
            };
            Ok((outcome(&r, 0, 0)?.t_dry, outcome(&r, 0, 5)?.t_dry))
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let none = single_vial_time(DryingMode::Hfd)?;
    let (corner_hot, edge_hot) = runs[runs.len() - 1];
    let (corner_cold, edge_cold) = runs[0];
    notes.push(format!(
        "reduction against the wall at the sublimation temperature: corner {:.3} h, edge {:.3} h",
        hours(corner_cold - corner_hot),
        hours(edge_cold - edge_hot)
    ));
    let decreasing = |pick: fn(&(f64, f64)) -> f64| runs.windows(2).all(|w| pick(&w[1]) < pick(&w[0]));
    let listing = |pick: fn(&(f64, f64)) -> f64| {
        runs.iter()
            .map(|r| format!("{:.3}", hours(pick(r))))
            .collect::<Vec<_>>()
            .join(" > ")
    };
    Ok(vec![
        Check::within("corner reduction vs no radiation", 0.61, hours(none - corner_hot), 0.05, " h"),
        Check::within("edge reduction vs no radiation", 0.43, hours(none - edge_hot), 0.05, " h"),
        Check::holds("corner strictly decreasing in T2", decreasing(|r| r.0), listing(|r| r.0)),
        Check::holds("edge strictly decreasing in T2", decreasing(|r| r.1), listing(|r| r.1)),
        Check::within("no-radiation reference", 3.17, hours(none), 0.05, " h"),
    ])
}

fn tray(ctx: &Context) -> Checks {
    let open = &ctx.hfd()?.result;
    let framed = simulate(&tray_scenario().map_err(err)?).map_err(err)?;
    Ok(vec![
        Check::within("corner without tray", 2.56, hours(outcome(open, 0, 0)?.t_dry), 0.05, " h"),
        Check::within("edge without tray", 2.74, hours(outcome(open, 0, 5)?.t_dry), 0.05, " h"),
        Check::within("corner with tray", 2.80, hours(outcome(&framed, 0, 0)?.t_dry), 0.05, " h"),
        Check::within("edge with tray", 2.92, hours(outcome(&framed, 0, 5)?.t_dry), 0.05, " h"),
    ])
}

/// Wall temperatures the hybrid map is tested at after training at 293.15 K.
pub const HYBRID_TEST_WALLS: [f64; 4] = [273.15, 278.15, 283.15, 288.15];

fn hybrid(ctx: &Context) -> Checks {
    let shared = ctx.cfd()?;
    let truth = shared.result.drying_times();
    let map = train_hybrid(&truth, &shared.scenario, 0.01 * HOUR, "network").map_err(err)?;
    let hybrid = with_hybrid_map(&shared.scenario, map);
    HYBRID_TEST_WALLS
        .par_iter()
        .map(|&t2| {
            let net = simulate(&shared.scenario.with_wall_temperature(t2)).map_err(err)?;
            let hyb = simulate(&hybrid.with_wall_temperature(t2)).map_err(err)?;
            let worst = net
                .drying_times()
                .iter()
                .zip(hyb.drying_times())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            Ok(Check {
                name: format!("worst vial error at {t2} K"),
                expected: "0 h".into(),
                computed: format!("{:.4} h", hours(worst)),
                tolerance: "< 0.01 h".into(),
                passed: hours(worst) < 0.01,
            })
        })
        .collect()
}

fn properties(ctx: &Context, notes: &mut Vec<String>) -> Checks {
    let shared = ctx.cfd()?;
    let scenario = &shared.scenario;
    let mut checks = Vec::new();

    let view = scenario.resolve_view_factors().map_err(err)?;
    let tray = tray_scenario().map_err(err)?.resolve_view_factors().map_err(err)?;
    checks.push(Check::at_most(
        "view-factor summation",
        view.max_row_error().max(tray.max_row_error()),
        1e-9,
    ));
    checks.push(Check::at_most(
        "view-factor reciprocity",
        view.max_reciprocity_error().max(tray.max_reciprocity_error()),
        1e-9,
    ));

    let set = SurfaceSet::from_scene(&scenario.scene, view, scenario.material.vial_emissivity).map_err(err)?;
    let temps: Vec<f64> = (0..set.len())
        .map(|i| if i == set.len() - 1 { 293.15 } else { 240.0 + (i * 7 % 31) as f64 })
        .collect();
    let q = solve_radiosity_network(&set, &temps).map_err(err)?.q;
    let scale: f64 = q.iter().map(|v| v.abs()).sum();
    checks.push(Check::at_most(
        "radiosity conservation |sum Q| / sum |Q|",
        q.iter().sum::<f64>().abs() / scale,
        1e-9,
    ));

    let op = NetworkOperator::new(&set).map_err(err)?;
    let flat = op.heat_rates(&vec![270.0; set.len()]);
    let reference = crate::radiation::emissive_power(270.0) * set.view.areas.iter().sum::<f64>();
    checks.push(Check::at_most(
        "equal temperatures, max |Q| / (E_b sum A)",
        flat.iter().map(|v| v.abs()).fold(0.0, f64::max) / reference,
        1e-12,
    ));

    let single = reference_array(DryingMode::Cfd, 1, GAP, Approach::Network).map_err(err)?;
    let single_view = complete_and_validate(&analytical_matrix(&single.scene).map_err(err)?).map_err(err)?;
    let single_set = SurfaceSet::from_scene(&single.scene, single_view, 0.8).map_err(err)?;
    let chamber = single.scene.chamber;
    let mut worst: f64 = 0.0;
    for t1 in [230.0, 256.15, 300.0] {
        let q = solve_radiosity_network(&single_set, &[t1, chamber.wall_temperature]).map_err(err)?.q[0];
        let closed = two_surface_qrad(
            t1,
            chamber.wall_temperature,
            0.8,
            single.scene.vial_area,
            1.0,
            chamber.wall_emissivity,
            chamber.wall_area,
        );
        worst = worst.max(((q - closed) / closed).abs());
    }
    checks.push(Check::at_most("network vs two-surface closed form (relative)", worst, 1e-10));

    let t = shared.result.drying_times();
    let mut asym: f64 = 0.0;
    for perm in scenario.scene.symmetry_permutations() {
        for i in 0..t.len() {
            asym = asym.max((t[i] - t[perm[i]]).abs() / t[i]);
        }
    }
    checks.push(Check::at_most("drying-time map symmetry (relative)", asym, 1e-9));

    let simplified = simulate(&scenario.with_approach(Approach::Simplified)).map_err(err)?.drying_times();
    let violations: Vec<usize> = (0..t.len()).filter(|&i| simplified[i] > t[i]).collect();
    if let Some(&i) = violations.first() {
        notes.push(format!(
            "simplified exceeds network for {} vials, e.g. vial {i}: {:.4} h vs {:.4} h",
            violations.len(),
            hours(simplified[i]),
            hours(t[i])
        ));
    }
    checks.push(Check::holds(
        "simplified <= network, every vial",
        violations.is_empty(),
        format!("{} of {} vials violate", violations.len(), t.len()),
    ));

    let two = row_scene(2)?;
    let exact = two_vial_wall_view(GAP, DIAMETER);
    let seeds = 30;
    let n_rays = 10_000;
    let estimates: Vec<f64> = (0..seeds)
        .into_par_iter()
        .map(|s| {
            let cfg = McConfig {
                n_rays,
                seed: 1000 + s as u64,
            };
            monte_carlo_view_factors(&two, &cfg).map(|m| m.get(0, m.wall()))
        })
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let mean = estimates.iter().sum::<f64>() / seeds as f64;
    let sigma = (exact * (1.0 - exact) / (n_rays * seeds) as f64).sqrt();
    checks.push(Check {
        name: format!("MC mean over {seeds} seeds"),
        expected: format!("{exact:.5}"),
        computed: format!("{mean:.5}"),
        tolerance: format!("±{:.5} (3 sigma)", 3.0 * sigma),
        passed: (mean - exact).abs() <= 3.0 * sigma,
    });

    let refine = |nodes: usize, dt: f64| -> Result<(f64, f64), String> {
        let model = VialModel::new(
            MaterialProperties::default(),
            ProcessSettings::default(),
            VialGeometry::default(),
            NumericsConfig {
                nodes,
                dt,
                ..NumericsConfig::default()
            },
        )
        .map_err(err)?;
        let r = simulate_single_vial(&model, &NoRadiation, None).map_err(err)?;
        Ok((r.t_switch, r.t_dry))
    };
    let grids = [(101, 1.0), (201, 0.5), (401, 0.25)]
        .par_iter()
        .map(|&(n, dt)| refine(n, dt))
        .collect::<Result<Vec<_>, _>>()?;
    let order = |pick: fn(&(f64, f64)) -> f64| {
        let d1 = (pick(&grids[0]) - pick(&grids[1])).abs();
        let d2 = (pick(&grids[1]) - pick(&grids[2])).abs();
        (d1 / d2).log2()
    };
    checks.push(Check::at_least("observed order, switching time", order(|g| g.0), 0.9));
    checks.push(Check::at_least("observed order, drying time", order(|g| g.1), 0.9));
    let doubled = refine(201, 1.0)?;
    checks.push(Check::at_most(
        "drying time change when doubling nodes (relative)",
        ((doubled.1 - grids[0].1) / grids[0].1).abs(),
        0.005,
    ));
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_matching() {
        assert!(selects(None, 3, "no-radiation baselines"));
        assert!(selects(Some("3"), 3, "no-radiation baselines"));
        assert!(selects(Some("Baselines"), 3, "no-radiation baselines"));
        assert!(!selects(Some("13"), 3, "no-radiation baselines"));
    }

    #[test]
    fn cheap_criteria_pass() {
        let report = run_validation_suite(Some("view factors"));
        assert_eq!(report.criteria.len(), 2);
        assert!(report.passed(), "{}", report.render());
    }
}
