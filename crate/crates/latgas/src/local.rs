//! Local functions stored as truth tables over a finite set of (site, velocity) slots,
//! with exact action of the generators.

use crate::model::{Configuration, Torus, VelocityModel};
use crate::scalar::Scalar;
use std::collections::BTreeSet;

/// Encodes a slot (site, vel) as `site * nv + vel`.
#[inline]
pub fn slot(site: usize, vel: usize, nv: usize) -> u32 {
    (site * nv + vel) as u32
}

#[inline]
pub fn slot_site(p: u32, nv: usize) -> usize {
    p as usize / nv
}

#[inline]
pub fn slot_vel(p: u32, nv: usize) -> usize {
    p as usize % nv
}

/// f(eta) as a table indexed by the occupation bits of `vars` (bit i = eta(vars[i])).
#[derive(Clone, Debug, PartialEq)]
pub struct LocalFunction<T> {
    vars: Vec<u32>,
    table: Vec<T>,
}

const MAX_VARS: usize = 22;

impl<T: Scalar> LocalFunction<T> {
    pub fn new(vars: Vec<u32>, table: Vec<T>) -> Self {
        assert!(vars.windows(2).all(|w| w[0] < w[1]), "variables must be sorted and distinct");
        assert!(vars.len() <= MAX_VARS, "too many variables");
        assert_eq!(table.len(), 1usize << vars.len());
        LocalFunction { vars, table }
    }

    pub fn constant(c: T) -> Self {
        LocalFunction { vars: vec![], table: vec![c] }
    }

    pub fn from_fn(mut vars: Vec<u32>, f: impl Fn(&dyn Fn(u32) -> bool) -> T) -> Self {
        vars.sort_unstable();
        vars.dedup();
        let n = vars.len();
        assert!(n <= MAX_VARS);
        let mut table = Vec::with_capacity(1 << n);
        for mask in 0..(1usize << n) {
            let vs = &vars;
            let get = move |p: u32| -> bool {
                let i = vs.binary_search(&p).expect("variable outside declared support");
                (mask >> i) & 1 == 1
            };
            table.push(f(&get));
        }
        LocalFunction { vars, table }
    }

    pub fn vars(&self) -> &[u32] {
        &self.vars
    }
    pub fn table(&self) -> &[T] {
        &self.table
    }

    pub fn eval(&self, config: &Configuration) -> T {
        let nv = config.nv();
        let mut mask = 0usize;
        for (i, &p) in self.vars.iter().enumerate() {
            if config.get(slot_site(p, nv), slot_vel(p, nv)) {
                mask |= 1 << i;
            }
        }
        self.table[mask].clone()
    }

    /// Re-express on a superset of variables.
    pub fn extend(&self, vars: &[u32]) -> Self {
        if vars == self.vars.as_slice() {
            return self.clone();
        }
        let pos: Vec<usize> = self
            .vars
            .iter()
            .map(|p| vars.binary_search(p).expect("extend target must contain the support"))
            .collect();
        let n = vars.len();
        assert!(n <= MAX_VARS);
        let mut table = Vec::with_capacity(1 << n);
        for mask in 0..(1usize << n) {
            let mut m = 0usize;
            for (i, &j) in pos.iter().enumerate() {
                if (mask >> j) & 1 == 1 {
                    m |= 1 << i;
                }
            }
            table.push(self.table[m].clone());
        }
        LocalFunction { vars: vars.to_vec(), table }
    }

    fn union_vars(&self, other: &Self) -> Vec<u32> {
        let s: BTreeSet<u32> = self.vars.iter().chain(other.vars.iter()).cloned().collect();
        s.into_iter().collect()
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(&T, &T) -> T) -> Self {
        let vars = self.union_vars(other);
        let a = self.extend(&vars);
        let b = other.extend(&vars);
        let table = a.table.iter().zip(b.table.iter()).map(|(x, y)| f(x, y)).collect();
        LocalFunction { vars, table }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a.clone() + b.clone())
    }
    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a.clone() - b.clone())
    }
    pub fn mul(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a.clone() * b.clone())
    }
    pub fn scale(&self, c: &T) -> Self {
        LocalFunction { vars: self.vars.clone(), table: self.table.iter().map(|x| x.clone() * c.clone()).collect() }
    }

    /// Expectation under the uniform product measure (lambda = 0).
    pub fn mean(&self) -> T {
        let mut s = T::zero();
        for x in &self.table {
            s = s + x.clone();
        }
        s / T::from_int(self.table.len() as i64)
    }

    /// E[f g] under the uniform product measure.
    pub fn inner(&self, other: &Self) -> T {
        self.mul(other).mean()
    }

    /// Covariance under the uniform product measure.
    pub fn cov(&self, other: &Self) -> T {
        self.inner(other) - self.mean() * other.mean()
    }

    pub fn max_abs(&self) -> f64 {
        self.table.iter().map(|x| x.to_f64().abs()).fold(0.0, f64::max)
    }

    /// (tau_z f)(eta) = f(eta(z + .)): the support moves by +z.
    pub fn translate(&self, torus: &Torus, nv: usize, z: usize) -> Self {
        let moved: Vec<u32> = self
            .vars
            .iter()
            .map(|&p| slot(torus.add(slot_site(p, nv), z), slot_vel(p, nv), nv))
            .collect();
        let mut order: Vec<usize> = (0..moved.len()).collect();
        order.sort_by_key(|&i| moved[i]);
        let vars: Vec<u32> = order.iter().map(|&i| moved[i]).collect();
        assert!(vars.windows(2).all(|w| w[0] < w[1]), "support wraps onto itself");
        // new bit k corresponds to old variable order[k]
        let n = vars.len();
        let mut table = vec![T::zero(); 1 << n];
        for (mask, slot_val) in table.iter_mut().enumerate() {
            let mut m = 0usize;
            for (k, &i) in order.iter().enumerate() {
                if (mask >> k) & 1 == 1 {
                    m |= 1 << i;
                }
            }
            *slot_val = self.table[m].clone();
        }
        LocalFunction { vars, table }
    }

    /// Sum over x of Cov(tau_x f, g) on the torus: the torus version of <<f, g>>.
    pub fn torus_pairing(&self, other: &Self, torus: &Torus, nv: usize) -> T {
        let mut s = T::zero();
        let other_sites: BTreeSet<usize> = other.vars.iter().map(|&p| slot_site(p, nv)).collect();
        let my_sites: BTreeSet<usize> = self.vars.iter().map(|&p| slot_site(p, nv)).collect();
        // only translates whose support meets the other's support contribute
        let mut shifts = BTreeSet::new();
        for &a in &other_sites {
            for &b in &my_sites {
                shifts.insert(torus.sub(a, b));
            }
        }
        for z in shifts {
            s = s + self.translate(torus, nv, z).cov(other);
        }
        s
    }
}

/// Slots paired with the bit index used by a truth table, plus a lookup.
struct Support {
    vars: Vec<u32>,
}

impl Support {
    fn new(set: BTreeSet<u32>) -> Self {
        Support { vars: set.into_iter().collect() }
    }
    fn idx(&self, p: u32) -> usize {
        self.vars.binary_search(&p).expect("slot outside extended support")
    }
}

/// Exchange part of the generator applied to f, exactly. The result lives on the
/// support of f together with the same-velocity neighbors of every slot in it.
pub fn exchange_generator<T: Scalar>(model: &VelocityModel, torus: &Torus, f: &LocalFunction<T>) -> LocalFunction<T> {
    let nv = model.nv();
    let mut ext: BTreeSet<u32> = f.vars.iter().cloned().collect();
    let mut bonds = BTreeSet::new();
    for &p in &f.vars {
        let (s, v) = (slot_site(p, nv), slot_vel(p, nv));
        for dir in 0..4 {
            let t = torus.neighbor(s, dir);
            ext.insert(slot(t, v, nv));
            bonds.insert((s, dir, v));
            // bond from the neighbor into s
            bonds.insert((t, dir ^ 1, v));
        }
    }
    let sup = Support::new(ext);
    let fe = f.extend(&sup.vars);
    let bonds: Vec<(usize, usize, T)> = bonds
        .into_iter()
        .filter(|&(_, dir, v)| model.rate(dir, v) > 0.0)
        .map(|(s, dir, v)| {
            let a = sup.idx(slot(s, v, nv));
            let b = sup.idx(slot(torus.neighbor(s, dir), v, nv));
            (a, b, T::from_f64(model.rate(dir, v)))
        })
        .collect();
    let n = sup.vars.len();
    let table = (0..(1usize << n))
        .map(|mask| {
            let mut acc = T::zero();
            for (a, b, r) in &bonds {
                if (mask >> a) & 1 == 1 && (mask >> b) & 1 == 0 {
                    let m2 = mask ^ (1 << a) ^ (1 << b);
                    acc = acc + r.clone() * (fe.table[m2].clone() - fe.table[mask].clone());
                }
            }
            acc
        })
        .collect();
    LocalFunction { vars: sup.vars, table }
}

fn site_closure(vars: &[u32], nv: usize) -> (BTreeSet<usize>, Support) {
    let sites: BTreeSet<usize> = vars.iter().map(|&p| slot_site(p, nv)).collect();
    let mut ext: BTreeSet<u32> = vars.iter().cloned().collect();
    for &s in &sites {
        for v in 0..nv {
            ext.insert(slot(s, v, nv));
        }
    }
    (sites, Support::new(ext))
}

/// Collision part of the generator applied to f, exactly.
pub fn collision_generator<T: Scalar>(model: &VelocityModel, f: &LocalFunction<T>) -> LocalFunction<T> {
    let nv = model.nv();
    let (sites, sup) = site_closure(&f.vars, nv);
    let fe = f.extend(&sup.vars);
    let mut moves = Vec::new();
    for &s in &sites {
        for q in model.collisions() {
            let idx = q.map(|k| sup.idx(slot(s, k, nv)));
            moves.push(idx);
        }
    }
    let n = sup.vars.len();
    let table = (0..(1usize << n))
        .map(|mask| {
            let mut acc = T::zero();
            for [v, w, vp, wp] in &moves {
                let on = |i: &usize| (mask >> i) & 1 == 1;
                if on(v) && on(w) && !on(vp) && !on(wp) {
                    let m2 = mask ^ (1 << v) ^ (1 << w) ^ (1 << vp) ^ (1 << wp);
                    acc = acc + (fe.table[m2].clone() - fe.table[mask].clone());
                }
            }
            acc
        })
        .collect();
    LocalFunction { vars: sup.vars, table }
}

/// The degree-preserving part of the collision generator:
/// L1 f = - sum_x sum_q <f, phi_{x,q,1}>_x phi_{x,q,1}, phi = xi(v') + xi(w') - xi(v) - xi(w).
pub fn collision_generator_l1<T: Scalar>(model: &VelocityModel, f: &LocalFunction<T>) -> LocalFunction<T> {
    let nv = model.nv();
    let (sites, sup) = site_closure(&f.vars, nv);
    let fe = f.extend(&sup.vars);
    let n = sup.vars.len();
    let half = T::from_f64(0.5);
    let xi = |mask: usize, i: usize| -> T {
        if (mask >> i) & 1 == 1 {
            half.clone()
        } else {
            -half.clone()
        }
    };
    let mut out = vec![T::zero(); 1 << n];
    for &s in &sites {
        let site_bits: Vec<usize> = (0..nv).map(|v| sup.idx(slot(s, v, nv))).collect();
        let site_mask: usize = site_bits.iter().map(|&i| 1usize << i).sum();
        let local_states: Vec<usize> = (0..(1usize << nv))
            .map(|z| site_bits.iter().enumerate().filter(|(k, _)| (z >> k) & 1 == 1).map(|(_, &i)| 1 << i).sum())
            .collect();
        let norm = T::from_int(1 << nv);
        for q in model.collisions() {
            let [v, w, vp, wp] = q.map(|k| site_bits[k]);
            let phi = |mask: usize| xi(mask, vp) + xi(mask, wp) - xi(mask, v) - xi(mask, w);
            for rest in 0..(1usize << n) {
                if rest & site_mask != 0 {
                    continue;
                }
                let mut ip = T::zero();
                for &z in &local_states {
                    let m = rest | z;
                    ip = ip + fe.table[m].clone() * phi(m);
                }
                let ip = ip / norm.clone();
                for &z in &local_states {
                    let m = rest | z;
                    out[m] = out[m].clone() - ip.clone() * phi(m);
                }
            }
        }
    }
    LocalFunction { vars: sup.vars, table: out }
}

pub fn full_generator<T: Scalar>(model: &VelocityModel, torus: &Torus, f: &LocalFunction<T>) -> LocalFunction<T> {
    exchange_generator(model, torus, f).add(&collision_generator(model, f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Preset;
    use crate::scalar::Rational;

    #[test]
    fn lone_particle_generator() {
        let m = VelocityModel::preset(Preset::Axes, 1.0).unwrap();
        let t = Torus::new(4).unwrap();
        let p = slot(t.site(1, 1), 0, 4);
        let f = LocalFunction::<Rational>::from_fn(vec![p], |g| Rational::from_int(g(p) as i64));
        let lf = exchange_generator(&m, &t, &f);
        // occupied, all neighbors empty: rate of leaving = 4 gamma
        let mut mask = 0;
        let vars = lf.vars().to_vec();
        mask |= 1 << vars.binary_search(&p).unwrap();
        assert_eq!(lf.table()[mask], Rational::from_int(-4));
    }

    #[test]
    fn translation_round_trip() {
        let t = Torus::new(4).unwrap();
        let a = slot(t.site(3, 0), 1, 4);
        let b = slot(t.site(0, 0), 2, 4);
        let f = LocalFunction::<f64>::from_fn(vec![a, b], |g| g(a) as i32 as f64 + 2.0 * g(b) as i32 as f64);
        let g = f.translate(&t, 4, t.site(1, 0)).translate(&t, 4, t.site(3, 0));
        assert_eq!(g, f);
    }
}
