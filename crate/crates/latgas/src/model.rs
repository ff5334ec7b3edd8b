//! State space, rates and event application.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

pub type Vel = [i32; 2];

/// Unit lattice directions: +e1, -e1, +e2, -e2.
pub const DIRS: [[i32; 2]; 4] = [[1, 0], [-1, 0], [0, 1], [0, -1]];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Axes,
    Cube,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Axes => "axes",
            Preset::Cube => "cube",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "axes" => Ok(Preset::Axes),
            "cube" => Ok(Preset::Cube),
            other => Err(Error::Parse(format!("unknown preset {other:?}"))),
        }
    }
}

pub fn dot(a: [i32; 2], b: [i32; 2]) -> i32 {
    a[0] * b[0] + a[1] * b[1]
}

/// p(e, v) = gamma + (e.v)/2.
pub fn jump_rate(e: [i32; 2], v: Vel, gamma: f64) -> Result<f64> {
    if e[0].abs() + e[1].abs() != 1 {
        return Err(Error::InvalidModel(format!("{e:?} is not a unit lattice vector")));
    }
    let p = gamma + 0.5 * dot(e, v) as f64;
    if p < 0.0 || !p.is_finite() {
        return Err(Error::InvalidGamma(format!(
            "rate p({e:?},{v:?}) = {p} is negative: exchange rates must satisfy gamma >= max |e.v|/2"
        )));
    }
    Ok(p)
}

#[derive(Clone, Debug, PartialEq)]
pub struct VelocityModel {
    velocities: Vec<Vel>,
    /// Quadruples (v, w, v', w') as velocity indices.
    collisions: Vec<[usize; 4]>,
    gamma: f64,
    preset: Option<Preset>,
    /// rates[dir][vel]
    rates: Vec<Vec<f64>>,
}

impl VelocityModel {
    pub fn new(velocities: Vec<Vel>, collisions: Vec<[usize; 4]>, gamma: f64) -> Result<Self> {
        if velocities.is_empty() || velocities.len() > 16 {
            return Err(Error::InvalidModel("need between 1 and 16 velocities".into()));
        }
        for i in 0..velocities.len() {
            for j in 0..i {
                if velocities[i] == velocities[j] {
                    return Err(Error::InvalidModel(format!("repeated velocity {:?}", velocities[i])));
                }
            }
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidGamma(format!("gamma = {gamma} must be a nonnegative real")));
        }
        let nv = velocities.len();
        for q in &collisions {
            if q.iter().any(|&k| k >= nv) {
                return Err(Error::InvalidModel(format!("collision {q:?} references unknown velocity")));
            }
            let [v, w, vp, wp] = q.map(|k| velocities[k]);
            if v[0] + w[0] != vp[0] + wp[0] || v[1] + w[1] != vp[1] + wp[1] {
                return Err(Error::InvalidModel(format!("collision {q:?} does not conserve momentum")));
            }
            if v == w || vp == wp {
                return Err(Error::InvalidModel(format!("collision {q:?} needs distinct velocities")));
            }
        }
        for q in &collisions {
            let [v, w, vp, wp] = *q;
            for s in [[v, w, wp, vp], [vp, wp, v, w], [vp, wp, w, v]] {
                if !collisions.contains(&s) {
                    return Err(Error::InvalidModel(format!(
                        "collision set not closed under symmetries: {q:?} present, {s:?} missing"
                    )));
                }
            }
        }
        let mut rates = vec![vec![0.0; nv]; 4];
        for (d, e) in DIRS.iter().enumerate() {
            for (k, v) in velocities.iter().enumerate() {
                rates[d][k] = jump_rate(*e, *v, gamma)?;
            }
        }
        Ok(VelocityModel { velocities, collisions, gamma, preset: None, rates })
    }

    pub fn preset(preset: Preset, gamma: f64) -> Result<Self> {
        let velocities: Vec<Vel> = match preset {
            Preset::Axes => vec![[1, 0], [-1, 0], [0, 1], [0, -1]],
            Preset::Cube => vec![[1, 1], [1, -1], [-1, 1], [-1, -1]],
        };
        let collisions = symmetric_quadruples(&velocities);
        let mut m = Self::new(velocities, collisions, gamma)?;
        m.preset = Some(preset);
        Ok(m)
    }

    pub fn preset_kind(&self) -> Option<Preset> {
        self.preset
    }
    pub fn velocities(&self) -> &[Vel] {
        &self.velocities
    }
    pub fn velocity(&self, k: usize) -> Vel {
        self.velocities[k]
    }
    pub fn nv(&self) -> usize {
        self.velocities.len()
    }
    pub fn collisions(&self) -> &[[usize; 4]] {
        &self.collisions
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn rate(&self, dir: usize, vel: usize) -> f64 {
        self.rates[dir][vel]
    }
    pub fn index_of(&self, v: Vel) -> Option<usize> {
        self.velocities.iter().position(|&u| u == v)
    }

    /// Conserved field I_a(v): I_0 = 1, I_a = v.e_a.
    pub fn conserved_field(&self, a: usize, vel: usize) -> i32 {
        match a {
            0 => 1,
            1 | 2 => self.velocities[vel][a - 1],
            _ => panic!("conserved field index {a} out of range"),
        }
    }

    /// Same model with exchange rates p*(e,v) = p(-e,v), i.e. velocities reversed in the drift.
    pub fn reversed(&self) -> VelocityModel {
        let mut m = self.clone();
        for d in 0..4 {
            m.rates[d] = self.rates[d ^ 1].clone();
        }
        m
    }

    pub fn max_total_rate(&self, torus: &Torus) -> f64 {
        let pmax = self.rates.iter().flatten().cloned().fold(0.0, f64::max);
        let sites = torus.sites() as f64;
        sites * self.nv() as f64 * 4.0 * pmax + sites * self.collisions.len() as f64
    }
}

/// All ordered (v, w, v', w') with v + w = v' + w' = 0 and {v', w'} != {v, w}.
fn symmetric_quadruples(vs: &[Vel]) -> Vec<[usize; 4]> {
    let n = vs.len();
    let mut out = Vec::new();
    for v in 0..n {
        for w in 0..n {
            if vs[v][0] + vs[w][0] != 0 || vs[v][1] + vs[w][1] != 0 || v == w {
                continue;
            }
            for vp in 0..n {
                for wp in 0..n {
                    if vs[vp][0] + vs[wp][0] != 0 || vs[vp][1] + vs[wp][1] != 0 || vp == wp {
                        continue;
                    }
                    if (vp == v && wp == w) || (vp == w && wp == v) {
                        continue;
                    }
                    out.push([v, w, vp, wp]);
                }
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Torus {
    side: usize,
}

impl Torus {
    pub fn new(side: usize) -> Result<Self> {
        if side < 4 {
            return Err(Error::TorusTooSmall(side));
        }
        if side > 4096 {
            return Err(Error::Domain(format!("torus side {side} too large")));
        }
        Ok(Torus { side })
    }
    pub fn side(&self) -> usize {
        self.side
    }
    pub fn sites(&self) -> usize {
        self.side * self.side
    }
    /// Row-major site index of (x, y), coordinates taken mod L.
    pub fn site(&self, x: i64, y: i64) -> usize {
        let l = self.side as i64;
        (y.rem_euclid(l) * l + x.rem_euclid(l)) as usize
    }
    pub fn coords(&self, site: usize) -> (usize, usize) {
        (site % self.side, site / self.side)
    }
    pub fn shift(&self, site: usize, d: [i32; 2]) -> usize {
        let (x, y) = self.coords(site);
        self.site(x as i64 + d[0] as i64, y as i64 + d[1] as i64)
    }
    pub fn neighbor(&self, site: usize, dir: usize) -> usize {
        self.shift(site, DIRS[dir])
    }
    /// site - other, as a site index (translation that maps other to the origin applied to site).
    pub fn sub(&self, site: usize, other: usize) -> usize {
        let (x, y) = self.coords(site);
        let (a, b) = self.coords(other);
        self.site(x as i64 - a as i64, y as i64 - b as i64)
    }
    pub fn add(&self, site: usize, other: usize) -> usize {
        let (x, y) = self.coords(site);
        let (a, b) = self.coords(other);
        self.site(x as i64 + a as i64, y as i64 + b as i64)
    }
}

/// Occupancy bits, one bit plane per velocity.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    torus: Torus,
    nv: usize,
    words: usize,
    bits: Vec<u64>,
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Configuration(L={}, nv={}, {})", self.torus.side, self.nv, self.to_bitstring())
    }
}

impl Configuration {
    pub fn empty(torus: Torus, nv: usize) -> Self {
        let words = torus.sites().div_ceil(64);
        Configuration { torus, nv, words, bits: vec![0; words * nv] }
    }

    pub fn full(torus: Torus, nv: usize) -> Self {
        let mut c = Self::empty(torus, nv);
        for s in 0..torus.sites() {
            for v in 0..nv {
                c.set(s, v, true);
            }
        }
        c
    }

    pub fn torus(&self) -> Torus {
        self.torus
    }
    pub fn nv(&self) -> usize {
        self.nv
    }

    #[inline]
    pub fn get(&self, site: usize, vel: usize) -> bool {
        let w = vel * self.words + (site >> 6);
        (self.bits[w] >> (site & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, site: usize, vel: usize, val: bool) {
        let w = vel * self.words + (site >> 6);
        let m = 1u64 << (site & 63);
        if val {
            self.bits[w] |= m;
        } else {
            self.bits[w] &= !m;
        }
    }

    #[inline]
    pub fn flip(&mut self, site: usize, vel: usize) {
        let w = vel * self.words + (site >> 6);
        self.bits[w] ^= 1u64 << (site & 63);
    }

    /// Occupation pattern of one site as a bit mask over velocities.
    pub fn site_mask(&self, site: usize) -> u32 {
        let mut m = 0;
        for v in 0..self.nv {
            if self.get(site, v) {
                m |= 1 << v;
            }
        }
        m
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn to_bitstring(&self) -> String {
        let mut s = String::with_capacity(self.torus.sites() * self.nv);
        for site in 0..self.torus.sites() {
            for v in 0..self.nv {
                s.push(if self.get(site, v) { '1' } else { '0' });
            }
        }
        s
    }

    pub fn from_bitstring(torus: Torus, nv: usize, s: &str) -> Result<Self> {
        let s = s.trim();
        if s.len() != torus.sites() * nv {
            return Err(Error::Parse(format!(
                "bitstring has {} characters, expected {}",
                s.len(),
                torus.sites() * nv
            )));
        }
        let mut c = Self::empty(torus, nv);
        for (i, ch) in s.chars().enumerate() {
            match ch {
                '0' => {}
                '1' => c.set(i / nv, i % nv, true),
                _ => return Err(Error::Parse(format!("invalid character {ch:?} in bitstring"))),
            }
        }
        Ok(c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Event {
    Exchange { site: usize, dir: usize, vel: usize },
    Collision { site: usize, q: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatedEvent {
    pub event: Event,
    pub rate: f64,
}

impl VelocityModel {
    pub fn event_rate(&self, event: &Event) -> f64 {
        match *event {
            Event::Exchange { dir, vel, .. } => self.rates[dir][vel],
            Event::Collision { .. } => 1.0,
        }
    }

    pub fn is_enabled(&self, config: &Configuration, event: &Event) -> bool {
        match *event {
            Event::Exchange { site, dir, vel } => {
                let t = config.torus().neighbor(site, dir);
                self.rates[dir][vel] > 0.0 && config.get(site, vel) && !config.get(t, vel)
            }
            Event::Collision { site, q } => {
                let [v, w, vp, wp] = self.collisions[q];
                config.get(site, v) && config.get(site, w) && !config.get(site, vp) && !config.get(site, wp)
            }
        }
    }

    pub fn enumerate_events(&self, config: &Configuration) -> Vec<RatedEvent> {
        let torus = config.torus();
        let mut out = Vec::new();
        for site in 0..torus.sites() {
            for vel in 0..self.nv() {
                if !config.get(site, vel) {
                    continue;
                }
                for dir in 0..4 {
                    let ev = Event::Exchange { site, dir, vel };
                    if self.is_enabled(config, &ev) {
                        out.push(RatedEvent { event: ev, rate: self.rates[dir][vel] });
                    }
                }
            }
            for q in 0..self.collisions.len() {
                let ev = Event::Collision { site, q };
                if self.is_enabled(config, &ev) {
                    out.push(RatedEvent { event: ev, rate: 1.0 });
                }
            }
        }
        out
    }

    /// Applies an enabled event in place; the slots whose bits changed are returned.
    pub fn apply_event(&self, config: &mut Configuration, event: &Event) -> Result<[(usize, usize); 4]> {
        if !self.is_enabled(config, event) {
            return Err(Error::DisabledEvent(format!("{event:?}")));
        }
        Ok(self.apply_unchecked(config, event))
    }

    pub(crate) fn apply_unchecked(&self, config: &mut Configuration, event: &Event) -> [(usize, usize); 4] {
        match *event {
            Event::Exchange { site, dir, vel } => {
                let t = config.torus().neighbor(site, dir);
                config.flip(site, vel);
                config.flip(t, vel);
                [(site, vel), (t, vel), (site, vel), (t, vel)]
            }
            Event::Collision { site, q } => {
                let [v, w, vp, wp] = self.collisions[q];
                for k in [v, w, vp, wp] {
                    config.flip(site, k);
                }
                [(site, v), (site, w), (site, vp), (site, wp)]
            }
        }
    }

    pub fn applied(&self, config: &Configuration, event: &Event) -> Result<Configuration> {
        let mut c = config.clone();
        self.apply_event(&mut c, event)?;
        Ok(c)
    }

    /// (mass, momentum).
    pub fn conserved_quantities(&self, config: &Configuration) -> (i64, [i64; 2]) {
        let mut mass = 0i64;
        let mut mom = [0i64; 2];
        for site in 0..config.torus().sites() {
            for vel in 0..self.nv() {
                if config.get(site, vel) {
                    mass += 1;
                    mom[0] += self.velocities[vel][0] as i64;
                    mom[1] += self.velocities[vel][1] as i64;
                }
            }
        }
        (mass, mom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_from_formula() {
        assert_eq!(jump_rate([1, 0], [1, 0], 1.0).unwrap(), 1.5);
        assert_eq!(jump_rate([-1, 0], [1, 0], 1.0).unwrap(), 0.5);
        assert_eq!(jump_rate([0, 1], [1, 0], 1.0).unwrap(), 1.0);
        assert!(matches!(jump_rate([-1, 0], [1, 0], 0.2), Err(Error::InvalidGamma(_))));
    }

    #[test]
    fn preset_collision_sets() {
        for p in [Preset::Axes, Preset::Cube] {
            let m = VelocityModel::preset(p, 1.0).unwrap();
            assert_eq!(m.collisions().len(), 8);
        }
        assert!(VelocityModel::preset(Preset::Cube, 0.1).is_err());
        assert!(VelocityModel::preset(Preset::Cube, 0.5).is_ok());
    }

    #[test]
    fn bitstring_layout() {
        let t = Torus::new(4).unwrap();
        let mut c = Configuration::empty(t, 4);
        c.set(t.site(1, 0), 2, true);
        let s = c.to_bitstring();
        assert_eq!(s.find('1'), Some(4 + 2));
        assert_eq!(Configuration::from_bitstring(t, 4, &s).unwrap(), c);
    }
}
