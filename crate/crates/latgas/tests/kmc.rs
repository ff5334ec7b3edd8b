use latgas::equilibrium::{sample_configuration, ChemicalPotential};
use latgas::kmc::{SimState, Simulator, StepOutcome};
use latgas::{Configuration, Event, Preset, Torus, VelocityModel};
use std::collections::BTreeMap;

const ZERO: ChemicalPotential = ChemicalPotential([0.0; 3]);

fn model(p: Preset) -> VelocityModel {
    VelocityModel::preset(p, 1.0).unwrap()
}

fn lone(t: Torus) -> Configuration {
    let mut c = Configuration::empty(t, 4);
    c.set(t.site(1, 2), 0, true);
    c
}

#[test]
fn full_lattice_is_absorbing() {
    let m = model(Preset::Cube);
    let mut sim = Simulator::new(&m, SimState::new(Configuration::full(Torus::new(4).unwrap(), 4), 1, 0));
    let out = sim.step();
    assert_eq!(out, StepOutcome::Absorbed);
    assert_eq!(out.dt(), f64::INFINITY);
    assert_eq!(sim.state.events, 0);
}

#[test]
fn lone_particle_holding_time() {
    let m = model(Preset::Axes);
    let mut sim = Simulator::new(&m, SimState::new(lone(Torus::new(4).unwrap()), 5, 0));
    let n = 100_000;
    let total: f64 = (0..n).map(|_| sim.step().dt()).sum();
    let mean = total / n as f64;
    // Exp(4): sd = mean = 0.25
    let se = 0.25 / (n as f64).sqrt();
    assert!((mean - 0.25).abs() < 3.0 * se, "{mean}");
}

#[test]
fn lone_particle_jump_directions() {
    let m = model(Preset::Axes);
    let mut sim = Simulator::new(&m, SimState::new(lone(Torus::new(4).unwrap()), 6, 0));
    let n = 100_000;
    let mut counts = [0f64; 4];
    for _ in 0..n {
        match sim.step() {
            StepOutcome::Event { event: Event::Exchange { dir, vel, .. }, .. } => {
                assert_eq!(vel, 0);
                counts[dir] += 1.0;
            }
            other => panic!("{other:?}"),
        }
    }
    let p = [1.5 / 4.0, 0.5 / 4.0, 0.25, 0.25];
    let chi2: f64 = counts.iter().zip(p).map(|(o, p)| (o - n as f64 * p).powi(2) / (n as f64 * p)).sum();
    // chi-square, 3 degrees of freedom, upper 1e-3 quantile
    assert!(chi2 < 16.266, "chi2 = {chi2}, counts {counts:?}");
}

#[test]
fn evolve_to_start_time() {
    let m = model(Preset::Cube);
    let t = Torus::new(6).unwrap();
    let c = sample_configuration(&m, &ZERO, t, 2);
    let mut sim = Simulator::new(&m, SimState::new(c.clone(), 2, 0));
    let mut seen = Vec::new();
    sim.evolve(0.0, &[0.0], |s, cfg| seen.push((s, cfg.clone())));
    assert_eq!(seen, vec![(0.0, c)]);
    assert_eq!(sim.state.events, 0);
    assert_eq!(sim.time(), 0.0);
}

#[test]
fn observers_fire_once_with_conserved_quantities() {
    for p in [Preset::Axes, Preset::Cube] {
        let m = model(p);
        let t = Torus::new(8).unwrap();
        let c = sample_configuration(&m, &ZERO, t, 3);
        let before = m.conserved_quantities(&c);
        let mut sim = Simulator::new(&m, SimState::new(c, 3, 1));
        let times: Vec<f64> = (0..=40).map(|k| k as f64 * 0.5).collect();
        let mut seen = Vec::new();
        sim.evolve(20.0, &times, |s, cfg| {
            assert_eq!(m.conserved_quantities(cfg), before);
            seen.push(s);
        });
        assert_eq!(seen, times);
        assert!(sim.state.events > 1000);
        assert_eq!(sim.time(), 20.0);
    }
}

/// Per replica: time-averaged density per site, and the nearest-neighbour spin correlator at the last time.
fn stationarity_sample(m: &VelocityModel, replica: u64) -> (f64, f64, f64) {
    let t = Torus::new(16).unwrap();
    let c = sample_configuration(m, &ZERO, t, 100 + replica);
    let mut sim = Simulator::new(m, SimState::new(c, 7, replica));
    let times: Vec<f64> = (0..=100).map(|k| k as f64).collect();
    let mut density = 0.0;
    let mut at10 = 0.0;
    let mut corr = 0.0;
    sim.evolve(100.0, &times, |s, cfg| {
        let rho = cfg.count() as f64 / t.sites() as f64;
        density += rho / times.len() as f64;
        if s == 10.0 {
            at10 = rho;
            let mut acc = 0.0;
            for x in 0..t.sites() {
                for v in 0..4 {
                    let a = if cfg.get(x, v) { 1.0 } else { -1.0 };
                    let b = if cfg.get(t.neighbor(x, 0), v) { 1.0 } else { -1.0 };
                    acc += a * b;
                }
            }
            corr = acc / (4 * t.sites()) as f64;
        }
    });
    (density, at10, corr)
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn product_measure_is_stationary() {
    let m = model(Preset::Cube);
    let samples: Vec<_> = (0..32).map(|r| stationarity_sample(&m, r)).collect();
    let density: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let at10: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let corr: Vec<f64> = samples.iter().map(|s| s.2).collect();
    let (d, se) = mean_se(&density);
    assert!((d - 2.0).abs() < 4.0 * se, "time-averaged density {d} ± {se}");
    let (d, se) = mean_se(&at10);
    assert!((d - 2.0).abs() < 4.0 * se, "density at t=10: {d} ± {se}");
    let (c, se) = mean_se(&corr);
    assert!(c.abs() < 4.0 * se, "nn correlator {c} ± {se}");
}

#[test]
fn transition_frequencies_match_rates() {
    // two particles on the smallest torus; each step is classified by (kind, rate)
    let m = model(Preset::Axes);
    let t = Torus::new(4).unwrap();
    let mut c = Configuration::empty(t, 4);
    c.set(0, 0, true);
    c.set(t.neighbor(0, 0), 1, true);
    let mut sim = Simulator::new(&m, SimState::new(c, 8, 0));
    let key = |e: &Event, rate: f64| -> (u8, u64) {
        (matches!(e, Event::Collision { .. }) as u8, rate.to_bits())
    };
    let mut observed: BTreeMap<(u8, u64), f64> = BTreeMap::new();
    let mut expected: BTreeMap<(u8, u64), (f64, f64)> = BTreeMap::new();
    for _ in 0..1_000_000 {
        let events = m.enumerate_events(sim.config());
        let total: f64 = events.iter().map(|e| e.rate).sum();
        let mut mass: BTreeMap<(u8, u64), f64> = BTreeMap::new();
        for e in &events {
            *mass.entry(key(&e.event, e.rate)).or_default() += e.rate / total;
        }
        for (k, p) in mass {
            let slot = expected.entry(k).or_default();
            slot.0 += p;
            slot.1 += p * (1.0 - p);
        }
        let StepOutcome::Event { event, .. } = sim.step() else { panic!("absorbed") };
        *observed.entry(key(&event, m.event_rate(&event))).or_default() += 1.0;
    }
    assert!(expected.keys().any(|k| k.0 == 1), "no collisions were ever enabled");
    for (k, (mean, var)) in &expected {
        let o = observed.get(k).copied().unwrap_or(0.0);
        assert!((o - mean).abs() < 4.0 * var.sqrt(), "{k:?}: observed {o}, expected {mean} ± {}", var.sqrt());
    }
}

#[test]
fn identical_seeds_identical_events() {
    let m = model(Preset::Cube);
    let t = Torus::new(6).unwrap();
    let run = |replica: u64| {
        let c = sample_configuration(&m, &ZERO, t, 4);
        let mut sim = Simulator::new(&m, SimState::new(c, 4, replica));
        (0..2000).map(|_| sim.step()).collect::<Vec<_>>()
    };
    assert_eq!(run(0), run(0));
    assert_ne!(run(0), run(1));
}

#[test]
fn verify_mode_agrees_with_rebuild() {
    for p in [Preset::Axes, Preset::Cube] {
        let m = model(p);
        let t = Torus::new(5).unwrap();
        let mut sim = Simulator::new(&m, SimState::new(sample_configuration(&m, &ZERO, t, 9), 9, 0));
        sim.verify = true;
        for _ in 0..3000 {
            sim.step();
            let mut brute: Vec<Event> = m.enumerate_events(sim.config()).into_iter().map(|e| e.event).collect();
            let mut listed = sim.enabled_events();
            brute.sort_by_key(|e| format!("{e:?}"));
            listed.sort_by_key(|e| format!("{e:?}"));
            assert_eq!(brute, listed);
        }
    }
}
