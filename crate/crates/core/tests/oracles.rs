//! Cross-checks against independently written reference computations.

use std::path::PathBuf;

use proptest::prelude::*;

use lyorad::config::load_scenario;
use lyorad::estimation::{fit_microwave_fractions, fit_scalar, FitParameter, FitProblem, MicrowaveData, Observable};
use lyorad::radiation::solve_radiosity_network;
use lyorad::sim::simulate;
use lyorad::validation::reference_array;
use lyorad::view_factors::{analytical_matrix, complete_and_validate};
use lyorad::{Approach, Chamber, DryingMode, Layout, Scenario, Scene, SurfaceSet, VialGeometry, SIGMA};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn single(mode: DryingMode) -> Scenario {
    reference_array(mode, 1, 0.005, Approach::None).unwrap()
}

/// Cell-centred finite volumes with Crank-Nicolson in time. Returns the time
/// at which the extrapolated top-surface temperature reaches Tm.
fn crank_nicolson_switch_time(s: &Scenario, cells: usize, dt: f64) -> f64 {
    let m = &s.material;
    let p = &s.settings;
    let l = s.geometry.height;
    let dx = l / cells as f64;
    let rho_cp = m.rho * m.heat_capacity;
    let k = m.conductivity;
    let h = if p.mode == DryingMode::Mfd { 0.0 } else { p.h };
    let power = if p.mode == DryingMode::Cfd { 0.0 } else { p.microwave_power };
    let source = p.p1 * power / s.geometry.volume / rho_cp;
    let shelf = |t: f64| (p.shelf_initial + p.ramp_rate * t).min(p.shelf_max);

    // dT/dt = A T + b(t); cell 0 is at the top (insulated), the last cell
    // exchanges with the shelf through half a cell and the contact film.
    let a = k / (rho_cp * dx * dx);
    let g = 1.0 / (rho_cp * dx * (1.0 / h.max(1e-300) + 0.5 * dx / k));
    let g = if h == 0.0 { 0.0 } else { g };
    let n = cells;
    let apply = |t: &[f64], out: &mut [f64]| {
        for i in 0..n {
            let up = if i > 0 { t[i - 1] - t[i] } else { 0.0 };
            let down = if i + 1 < n { t[i + 1] - t[i] } else { 0.0 };
            out[i] = a * (up + down);
        }
        out[n - 1] -= g * t[n - 1];
    };
    let top = |t: &[f64]| (9.0 * t[0] - t[1]) / 8.0;

    let mut temp = vec![p.t_initial; n];
    let mut time = 0.0;
    let mut at = vec![0.0; n];
    loop {
        apply(&temp, &mut at);
        let mut rhs: Vec<f64> = (0..n).map(|i| temp[i] + 0.5 * dt * at[i] + dt * source).collect();
        rhs[n - 1] += 0.5 * dt * g * (shelf(time) + shelf(time + dt));
        // (I - dt/2 A) T' = rhs, tridiagonal.
        let diag = |i: usize| {
            let links = (i > 0) as usize + (i + 1 < n) as usize;
            1.0 + 0.5 * dt * (a * links as f64 + if i == n - 1 { g } else { 0.0 })
        };
        let off = -0.5 * dt * a;
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        c[0] = off / diag(0);
        d[0] = rhs[0] / diag(0);
        for i in 1..n {
            let den = diag(i) - off * c[i - 1];
            c[i] = off / den;
            d[i] = (rhs[i] - off * d[i - 1]) / den;
        }
        let mut next = vec![0.0; n];
        next[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            next[i] = d[i] - c[i] * next[i + 1];
        }
        let (before, after) = (top(&temp), top(&next));
        if after >= p.t_sublimation {
            return time + dt * (p.t_sublimation - before) / (after - before);
        }
        temp = next;
        time += dt;
        assert!(time < 100.0 * 3600.0, "reference solve never reached Tm");
    }
}

#[test]
fn heating_stage_matches_crank_nicolson() {
    for mode in [DryingMode::Cfd, DryingMode::Mfd, DryingMode::Hfd] {
        let s = single(mode);
        let model = simulate(&s).unwrap().vials[0].t_switch;
        let reference = crank_nicolson_switch_time(&s, 400, 0.25);
        let rel = (model - reference).abs() / reference;
        assert!(rel < 2e-3, "{mode:?}: model {model} s, reference {reference} s");
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

#[test]
fn cfd_sublimation_consumes_exactly_the_latent_heat() {
    // The shelf ramp ends during sublimation here, so the kink is crossed.
    let s = single(DryingMode::Cfd);
    let v = &simulate(&s).unwrap().vials[0];
    let p = &s.settings;
    let shelf = |t: f64| (p.shelf_initial + p.ramp_rate * t).min(p.shelf_max);
    let heat = simpson(|t| p.h * (shelf(t) - p.t_sublimation), v.t_switch, v.t_dry, 200_000);
    let needed = s.geometry.height * (s.material.rho - s.material.rho_dried) * s.material.sublimation_enthalpy;
    assert!((heat - needed).abs() / needed < 1e-5, "{heat} vs {needed}");
}

#[test]
fn mfd_sublimation_time_is_closed_form() {
    let s = single(DryingMode::Mfd);
    let v = &simulate(&s).unwrap().vials[0];
    let hv2 = s.settings.p2 * s.settings.microwave_power / s.geometry.volume;
    let expected = (s.material.rho - s.material.rho_dried) * s.material.sublimation_enthalpy / hv2;
    let got = v.t_dry - v.t_switch;
    assert!((got - expected).abs() / expected < 1e-6, "{got} vs {expected}");
}

#[test]
fn lone_vial_simplified_equals_network() {
    let s = reference_array(DryingMode::Hfd, 1, 0.005, Approach::Network).unwrap();
    let net = simulate(&s).unwrap().vials[0].t_dry;
    let simp = simulate(&s.with_approach(Approach::Simplified)).unwrap().vials[0].t_dry;
    let none = simulate(&s.with_approach(Approach::None)).unwrap().vials[0].t_dry;
    assert!((net - simp).abs() / net < 1e-9, "{net} vs {simp}");
    assert!(net < none);
}

fn three_in_a_row() -> lyorad::ViewFactorMatrix {
    let g = VialGeometry::default();
    let chamber = Chamber::default();
    let layout = Layout::rectangular(1, 3, g.diameter, 0.005, chamber.side).unwrap();
    let scene = Scene::new(layout, chamber, g.area).unwrap();
    complete_and_validate(&analytical_matrix(&scene).unwrap()).unwrap()
}

/// Jacobi iteration on J = εE_b + (1-ε)FJ, then Q from the surface
/// resistance.
fn radiosity_by_iteration(view: &lyorad::ViewFactorMatrix, eps: &[f64], temps: &[f64]) -> Vec<f64> {
    let k = eps.len();
    let eb: Vec<f64> = temps.iter().map(|t| SIGMA * t.powi(4)).collect();
    let mut j = eb.clone();
    for _ in 0..20_000 {
        let next: Vec<f64> = (0..k)
            .map(|i| eps[i] * eb[i] + (1.0 - eps[i]) * (0..k).map(|m| view.get(i, m) * j[m]).sum::<f64>())
            .collect();
        let change = next.iter().zip(&j).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        j = next;
        if change < 1e-13 * eb.iter().cloned().fold(0.0, f64::max) {
            break;
        }
    }
    (0..k)
        .map(|i| view.areas[i] * eps[i] / (1.0 - eps[i]) * (eb[i] - j[i]))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn direct_solve_matches_iteration(
        eps in prop::collection::vec(0.1f64..0.95, 4),
        temps in prop::collection::vec(220.0f64..320.0, 4),
    ) {
        let view = three_in_a_row();
        let set = SurfaceSet::new(view.clone(), eps.clone(), vec![false; 4]).unwrap();
        let direct = solve_radiosity_network(&set, &temps).unwrap().q;
        let iterated = radiosity_by_iteration(&view, &eps, &temps);
        let scale = iterated.iter().map(|q| q.abs()).fold(1e-6, f64::max);
        for (a, b) in direct.iter().zip(&iterated) {
            prop_assert!((a - b).abs() <= 1e-8 * scale, "{direct:?} vs {iterated:?}");
        }
    }
}

#[test]
fn runs_are_deterministic_and_thread_count_independent() {
    let s = reference_array(DryingMode::Hfd, 4, 0.005, Approach::Network).unwrap();
    let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    let one = pool(1).install(|| simulate(&s).unwrap());
    let four = pool(4).install(|| simulate(&s).unwrap());
    let again = simulate(&s).unwrap();
    assert_eq!(one.vials, four.vials);
    assert_eq!(one.vials, again.vials);
}

#[test]
fn shelf_coefficient_round_trips_through_the_fit() {
    let mut truth = single(DryingMode::Cfd);
    truth.settings.h = 31.5;
    let target = simulate(&truth).unwrap().vials[0].t_dry;
    let fit = fit_scalar(&FitProblem {
        parameter: FitParameter::H,
        bounds: (1.0, 200.0),
        observable: Observable::DryingTime { vial: 0 },
        reference: target,
        scenario: single(DryingMode::Cfd),
    })
    .unwrap();
    assert!((fit.value - 31.5).abs() / 31.5 < 1e-4, "{}", fit.value);
}

#[test]
fn microwave_fractions_round_trip() {
    let mut truth = load_scenario(&configs().join("case4.toml")).unwrap().scenario;
    truth.series_every = Some(60.0);
    let run = simulate(&truth).unwrap();
    let v = &run.vials[0];
    let data = MicrowaveData {
        switch_time: v.t_switch,
        drying_time: v.t_dry,
        sublimation_temperatures: v
            .series
            .iter()
            .filter(|p| p.time > v.t_switch + 60.0 && p.time < v.t_dry)
            .map(|p| (p.time, p.top))
            .collect(),
        vial: 0,
    };
    let mut start = truth.clone();
    (start.settings.p1, start.settings.p2, start.settings.p3) = (1e-3, 1e-3, 0.0);
    let (p1, p2, p3) = fit_microwave_fractions(&data, &start).unwrap();
    for (got, want) in [(p1, 3.0e-4), (p2, 5.9e-3), (p3, 2.5e-5)] {
        assert!((got - want).abs() / want < 0.01, "{got} vs {want}");
    }
}
