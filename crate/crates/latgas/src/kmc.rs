//! Exact continuous-time simulation with an incrementally maintained event catalog.

use crate::model::{Configuration, Event, VelocityModel, DIRS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// RNG stream for a replica; `purpose` separates initial sampling (0) from dynamics (1).
pub fn stream(seed: u64, replica: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica * 2 + purpose);
    rng
}

#[derive(Clone, Debug)]
pub struct SimState {
    pub config: Configuration,
    pub time: f64,
    pub seed: u64,
    pub replica: u64,
    pub events: u64,
    rng: ChaCha8Rng,
}

impl SimState {
    pub fn new(config: Configuration, seed: u64, replica: u64) -> Self {
        SimState { config, time: 0.0, seed, replica, events: 0, rng: stream(seed, replica, 1) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepOutcome {
    Event { event: Event, dt: f64 },
    /// Total rate zero: dt = +inf.
    Absorbed,
}

impl StepOutcome {
    pub fn dt(&self) -> f64 {
        match self {
            StepOutcome::Event { dt, .. } => *dt,
            StepOutcome::Absorbed => f64::INFINITY,
        }
    }
}

const ABSENT: u32 = u32::MAX;

/// Enabled events grouped by (static) rate; selection is class by weight, then member uniformly.
#[derive(Clone, Debug)]
struct Catalog {
    class_of: Vec<u16>,
    rates: Vec<f64>,
    members: Vec<Vec<u32>>,
    pos: Vec<u32>,
}

pub struct Simulator<'m> {
    model: &'m VelocityModel,
    pub state: SimState,
    catalog: Catalog,
    nq: usize,
    n_exchange: usize,
    /// Rebuild and compare the catalog after every event.
    pub verify: bool,
    /// current[j][a]: net transport of I_a across bonds in direction e_j since the start.
    current: [[i64; 3]; 2],
}

impl<'m> Simulator<'m> {
    pub fn new(model: &'m VelocityModel, state: SimState) -> Self {
        let sites = state.config.torus().sites();
        let nv = model.nv();
        let nq = model.collisions().len();
        let n_exchange = sites * 4 * nv;
        let mut rates: Vec<f64> = Vec::new();
        let mut class_of = Vec::with_capacity(n_exchange + sites * nq);
        let class = |r: f64, rates: &mut Vec<f64>| -> u16 {
            match rates.iter().position(|&x| x == r) {
                Some(i) => i as u16,
                None => {
                    rates.push(r);
                    (rates.len() - 1) as u16
                }
            }
        };
        for id in 0..n_exchange + sites * nq {
            let ev = decode(id, n_exchange, nv, nq);
            let c = class(model.event_rate(&ev), &mut rates);
            class_of.push(c);
        }
        let members = vec![Vec::new(); rates.len()];
        let catalog = Catalog { class_of, rates, pos: vec![ABSENT; n_exchange + sites * nq], members };
        let mut sim = Simulator { model, state, catalog, nq, n_exchange, verify: false, current: [[0; 3]; 2] };
        sim.rebuild();
        sim
    }

    pub fn model(&self) -> &VelocityModel {
        self.model
    }

    pub fn config(&self) -> &Configuration {
        &self.state.config
    }

    pub fn time(&self) -> f64 {
        self.state.time
    }

    pub fn integrated_current(&self) -> [[i64; 3]; 2] {
        self.current
    }

    fn encode(&self, ev: &Event) -> usize {
        let nv = self.model.nv();
        match *ev {
            Event::Exchange { site, dir, vel } => (site * 4 + dir) * nv + vel,
            Event::Collision { site, q } => self.n_exchange + site * self.nq + q,
        }
    }

    fn rebuild(&mut self) {
        for m in &mut self.catalog.members {
            m.clear();
        }
        self.catalog.pos.iter_mut().for_each(|p| *p = ABSENT);
        for id in 0..self.catalog.pos.len() {
            self.refresh(id);
        }
    }

    fn refresh(&mut self, id: usize) {
        let ev = decode(id, self.n_exchange, self.model.nv(), self.nq);
        let on = self.catalog.rates[self.catalog.class_of[id] as usize] > 0.0 && self.model.is_enabled(&self.state.config, &ev);
        let c = self.catalog.class_of[id] as usize;
        let p = self.catalog.pos[id];
        if on && p == ABSENT {
            self.catalog.pos[id] = self.catalog.members[c].len() as u32;
            self.catalog.members[c].push(id as u32);
        } else if !on && p != ABSENT {
            let m = &mut self.catalog.members[c];
            let last = *m.last().unwrap();
            m.swap_remove(p as usize);
            if last as usize != id {
                self.catalog.pos[last as usize] = p;
            }
            self.catalog.pos[id] = ABSENT;
        }
    }

    /// Exchanges out of and into (site, vel), and collisions at site.
    fn touch(&mut self, site: usize, vel: usize) {
        let torus = self.state.config.torus();
        for dir in 0..4 {
            let out = self.encode(&Event::Exchange { site, dir, vel });
            self.refresh(out);
            let from = torus.neighbor(site, dir ^ 1);
            let inc = self.encode(&Event::Exchange { site: from, dir, vel });
            self.refresh(inc);
        }
        for q in 0..self.nq {
            let id = self.encode(&Event::Collision { site, q });
            self.refresh(id);
        }
    }

    pub fn total_rate(&self) -> f64 {
        self.catalog.rates.iter().zip(&self.catalog.members).map(|(r, m)| r * m.len() as f64).sum()
    }

    /// Sorted ids of enabled events, for comparisons with the brute-force enumeration.
    pub fn enabled_events(&self) -> Vec<Event> {
        let mut ids: Vec<u32> = self.catalog.members.iter().flatten().cloned().collect();
        ids.sort_unstable();
        ids.into_iter().map(|id| decode(id as usize, self.n_exchange, self.model.nv(), self.nq)).collect()
    }

    fn select(&mut self, total: f64) -> Event {
        let mut x = self.state.rng.gen::<f64>() * total;
        let mut chosen = None;
        let mut last_nonempty = 0;
        for (c, (r, m)) in self.catalog.rates.iter().zip(&self.catalog.members).enumerate() {
            if m.is_empty() || *r == 0.0 {
                continue;
            }
            last_nonempty = c;
            let w = r * m.len() as f64;
            if x < w {
                chosen = Some(c);
                break;
            }
            x -= w;
        }
        let c = chosen.unwrap_or(last_nonempty);
        let m = &self.catalog.members[c];
        let k = self.state.rng.gen_range(0..m.len());
        decode(m[k] as usize, self.n_exchange, self.model.nv(), self.nq)
    }

    fn record_current(&mut self, ev: &Event) {
        if let Event::Exchange { dir, vel, .. } = *ev {
            let j = dir / 2;
            let s = if dir % 2 == 0 { 1 } else { -1 };
            for a in 0..3 {
                self.current[j][a] += s * self.model.conserved_field(a, vel) as i64;
            }
        }
    }

    /// One Gillespie step: dt ~ Exp(R), event with probability rate / R.
    pub fn step(&mut self) -> StepOutcome {
        let total = self.total_rate();
        if total <= 0.0 {
            return StepOutcome::Absorbed;
        }
        let u: f64 = self.state.rng.gen();
        let dt = -(-u).ln_1p() / total;
        let event = self.select(total);
        self.fire(&event);
        self.state.time += dt;
        StepOutcome::Event { event, dt }
    }

    fn fire(&mut self, event: &Event) {
        let changed = self.model.apply_unchecked(&mut self.state.config, event);
        self.state.events += 1;
        self.record_current(event);
        let n = if matches!(event, Event::Exchange { .. }) { 2 } else { 4 };
        for &(s, v) in &changed[..n] {
            self.touch(s, v);
        }
        if self.verify {
            let before = self.enabled_events();
            self.rebuild();
            assert_eq!(before, self.enabled_events(), "incremental catalog diverged from full rebuild");
        }
    }

    /// Runs to `horizon`, calling `observe(t, config)` once for every t in `times` with
    /// start <= t <= horizon (times must be sorted). Configurations are right-continuous.
    pub fn evolve(&mut self, horizon: f64, times: &[f64], mut observe: impl FnMut(f64, &Configuration)) {
        assert!(horizon >= self.state.time, "horizon before current time");
        debug_assert!(times.windows(2).all(|w| w[0] <= w[1]));
        let mut k = times.partition_point(|&t| t < self.state.time);
        loop {
            let total = self.total_rate();
            let dt = if total > 0.0 { -(-self.state.rng.gen::<f64>()).ln_1p() / total } else { f64::INFINITY };
            let t_next = self.state.time + dt;
            while k < times.len() && times[k] < t_next && times[k] <= horizon {
                observe(times[k], &self.state.config);
                k += 1;
            }
            if t_next > horizon {
                // memorylessness: the pending clock is discarded
                self.state.time = horizon;
                break;
            }
            let event = self.select(total);
            self.fire(&event);
            self.state.time = t_next;
        }
    }
}

fn decode(id: usize, n_exchange: usize, nv: usize, nq: usize) -> Event {
    if id < n_exchange {
        let vel = id % nv;
        let rest = id / nv;
        Event::Exchange { site: rest / 4, dir: rest % 4, vel }
    } else {
        let r = id - n_exchange;
        Event::Collision { site: r / nq, q: r % nq }
    }
}

/// Displacement of an exchange event.
pub fn displacement(ev: &Event) -> [i32; 2] {
    match *ev {
        Event::Exchange { dir, .. } => DIRS[dir],
        Event::Collision { .. } => [0, 0],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Preset, Torus};

    #[test]
    fn incremental_matches_enumeration() {
        let m = VelocityModel::preset(Preset::Axes, 1.0).unwrap();
        let t = Torus::new(4).unwrap();
        let mut rng = stream(3, 0, 0);
        let mut c = Configuration::empty(t, 4);
        for s in 0..t.sites() {
            for v in 0..4 {
                c.set(s, v, rng.gen_bool(0.5));
            }
        }
        let mut sim = Simulator::new(&m, SimState::new(c, 3, 0));
        sim.verify = true;
        for _ in 0..2000 {
            sim.step();
            let mut brute: Vec<Event> = m.enumerate_events(sim.config()).into_iter().map(|e| e.event).collect();
            brute.sort_by_key(|e| sim.encode(e));
            assert_eq!(brute, sim.enabled_events());
        }
    }

    #[test]
    fn absorbed_when_full() {
        let m = VelocityModel::preset(Preset::Cube, 1.0).unwrap();
        let t = Torus::new(4).unwrap();
        let mut sim = Simulator::new(&m, SimState::new(Configuration::full(t, 4), 1, 0));
        assert_eq!(sim.step(), StepOutcome::Absorbed);
        assert_eq!(sim.step().dt(), f64::INFINITY);
    }
}
