//! Fourier coefficients of local functions in the basis Psi_A = prod xi.

use super::ops::{DualOp, Space, Stencil};
use super::sets::{canonical, is_set, multiplicity_factor, Geometry, Pts};
use crate::error::{Error, Result};
use crate::local::LocalFunction;
use crate::model::VelocityModel;
use crate::scalar::Scalar;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flavor {
    Absolute,
    /// Keys are canonical class representatives; values are F(C) = sum_z f(A + z).
    Class,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SetFunction<T> {
    pub geo: Geometry,
    pub flavor: Flavor,
    pub space: Space,
    pub entries: BTreeMap<Pts, T>,
}

/// Symmetric tuple functions share the representation, keyed by sorted multisets.
pub type SymmetricTupleFunction<T> = SetFunction<T>;

fn quarter_pow<T: Scalar>(n: usize) -> T {
    let mut w = T::one();
    let q = T::from_f64(0.25);
    for _ in 0..n {
        w = w * q.clone();
    }
    w
}

impl<T: Scalar> SetFunction<T> {
    pub fn new(geo: Geometry, flavor: Flavor, space: Space) -> Self {
        SetFunction { geo, flavor, space, entries: BTreeMap::new() }
    }

    pub fn insert(&mut self, key: Pts, val: T) {
        assert!(key.windows(2).all(|w| w[0] <= w[1]), "keys must be sorted");
        if self.space == Space::Sets {
            assert!(is_set(&key), "hard-core keys must be sets");
        }
        let key = match self.flavor {
            Flavor::Absolute => key,
            Flavor::Class => canonical(&self.geo, &key).0,
        };
        let e = self.entries.entry(key).or_insert_with(T::zero);
        *e = e.clone() + val;
    }

    pub fn get(&self, key: &[u32]) -> T {
        match self.flavor {
            Flavor::Absolute => self.entries.get(key).cloned().unwrap_or_else(T::zero),
            Flavor::Class => {
                let (c, _) = canonical(&self.geo, key);
                self.entries.get(&c).cloned().unwrap_or_else(T::zero)
            }
        }
    }

    pub fn prune(&mut self) {
        self.entries.retain(|_, v| !v.is_negligible(0.0));
    }

    pub fn degrees(&self) -> BTreeSet<usize> {
        self.entries.iter().filter(|(_, v)| !v.is_negligible(0.0)).map(|(k, _)| k.len()).collect()
    }

    pub fn degree_part(&self, n: usize) -> Self {
        let mut out = Self::new(self.geo, self.flavor, self.space);
        for (k, v) in &self.entries {
            if k.len() == n {
                out.entries.insert(k.clone(), v.clone());
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.values().map(|v| v.to_f64().abs()).fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.flavor, self.space), (other.flavor, other.space));
        let mut out = self.clone();
        for (k, v) in &other.entries {
            let e = out.entries.entry(k.clone()).or_insert_with(T::zero);
            *e = e.clone() - v.clone();
        }
        out.prune();
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.flavor, self.space), (other.flavor, other.space));
        let mut out = self.clone();
        for (k, v) in &other.entries {
            let e = out.entries.entry(k.clone()).or_insert_with(T::zero);
            *e = e.clone() + v.clone();
        }
        out.prune();
        out
    }

    pub fn scale(&self, c: &T) -> Self {
        let mut out = self.clone();
        for v in out.entries.values_mut() {
            *v = v.clone() * c.clone();
        }
        out
    }

    /// Translation-class flavor: F(C) = sum_z f(A_C + z) = stab(C) * sum_{B in C} f(B).
    pub fn to_classes(&self) -> Self {
        if self.flavor == Flavor::Class {
            return self.clone();
        }
        let mut out = Self::new(self.geo, Flavor::Class, self.space);
        for (k, v) in &self.entries {
            let (c, stab) = canonical(&self.geo, k);
            let e = out.entries.entry(c).or_insert_with(T::zero);
            *e = e.clone() + v.clone() * T::from_int(stab as i64);
        }
        out.prune();
        out
    }

    /// The embedding of a hard-core set function as a symmetric tuple function
    /// (zero off distinct tuples, so the keys carry over unchanged).
    pub fn embed_tuples(&self) -> Self {
        let mut out = self.clone();
        out.space = Space::Tuples;
        out
    }

    /// Weight of a key in the (un-translated) inner product: 4^{-n} / prod m!.
    fn weight(&self, key: &[u32]) -> T {
        quarter_pow::<T>(key.len()) / T::from_f64(multiplicity_factor(key))
    }

    /// sum_A 4^{-|A|} f(A) g(A) (divided by prod m! on tuples); equals <f, g>_{mu_0} by Parseval.
    pub fn parseval_inner(&self, other: &Self) -> T {
        assert_eq!(self.flavor, Flavor::Absolute);
        assert_eq!(other.flavor, Flavor::Absolute);
        let mut s = T::zero();
        for (k, v) in &self.entries {
            if let Some(w) = other.entries.get(k) {
                s = s + self.weight(k) * v.clone() * w.clone();
            }
        }
        s
    }

    /// <<f, g>> = sum_x <tau_x f, g>, computed on translation classes.
    pub fn dual_inner_product(&self, other: &Self) -> T {
        let a = self.to_classes();
        let b = other.to_classes();
        let mut s = T::zero();
        for (k, v) in &a.entries {
            if k.is_empty() {
                continue;
            }
            if let Some(w) = b.entries.get(k) {
                let (_, stab) = canonical(&self.geo, k);
                s = s + a.weight(k) * v.clone() * w.clone() / T::from_int(stab as i64);
            }
        }
        s
    }

    /// Apply a dual operator. `hardcore = false` embeds into the tuple space first.
    pub fn apply_dual(&self, model: &VelocityModel, op: DualOp, hardcore: bool) -> Result<Self> {
        let src = if hardcore {
            if self.space != Space::Sets {
                return Err(Error::Unsupported("hard-core operators need a set function".into()));
            }
            if op == DualOp::Qn {
                return Err(Error::Unsupported("Qn is only defined on the hard-core-removed space".into()));
            }
            self.clone()
        } else {
            self.embed_tuples()
        };
        let st = Stencil::new(self.geo, model);
        let space = src.space;
        let mut cand: Vec<Pts> = Vec::new();
        for k in src.entries.keys() {
            st.neighborhood(k, space, &mut cand);
        }
        let cand: BTreeSet<Pts> = match src.flavor {
            Flavor::Absolute => cand.into_iter().collect(),
            Flavor::Class => cand.into_iter().map(|c| canonical(&self.geo, &c).0).collect(),
        };
        let mut out = Self::new(self.geo, src.flavor, space);
        for a in cand {
            let mut acc = T::zero();
            st.row(op, space, &a, &mut |b, c| {
                let v = src.get(b);
                if !v.is_negligible(0.0) {
                    acc = acc.clone() + T::from_f64(c) * v;
                }
            });
            if !acc.is_negligible(0.0) {
                out.entries.insert(a, acc);
            }
        }
        Ok(out)
    }
}

/// Fourier transform of a truth table: f = sum_A f(A) Psi_A, with f(A) = 4^{|A|} E[f Psi_A].
pub fn transform<T: Scalar>(f: &LocalFunction<T>, geo: Geometry) -> SetFunction<T> {
    let vars = f.vars();
    let n = vars.len();
    let mut t: Vec<T> = f.table().to_vec();
    let half = T::from_f64(0.5);
    for i in 0..n {
        let bit = 1usize << i;
        for m in 0..(1usize << n) {
            if m & bit == 0 {
                let (f0, f1) = (t[m].clone(), t[m | bit].clone());
                t[m] = (f0.clone() + f1.clone()) * half.clone();
                t[m | bit] = f1 - f0;
            }
        }
    }
    let mut out = SetFunction::new(geo, Flavor::Absolute, Space::Sets);
    for (m, v) in t.into_iter().enumerate() {
        if v.is_negligible(0.0) {
            continue;
        }
        let key: Pts = (0..n).filter(|i| (m >> i) & 1 == 1).map(|i| vars[i]).collect();
        out.entries.insert(key, v);
    }
    out
}

/// Reconstruct the truth table on the union of the supports of the keys.
pub fn inverse_transform<T: Scalar>(g: &SetFunction<T>) -> LocalFunction<T> {
    assert_eq!(g.flavor, Flavor::Absolute);
    assert_eq!(g.space, Space::Sets);
    let vars: Vec<u32> = g.entries.keys().flat_map(|k| k.iter().cloned()).collect::<BTreeSet<u32>>().into_iter().collect();
    let n = vars.len();
    let mut t = vec![T::zero(); 1 << n];
    for (k, v) in &g.entries {
        let m: usize = k.iter().map(|p| 1usize << vars.binary_search(p).unwrap()).sum();
        t[m] = v.clone();
    }
    let half = T::from_f64(0.5);
    for i in 0..n {
        let bit = 1usize << i;
        for m in 0..(1usize << n) {
            if m & bit == 0 {
                let (a, b) = (t[m].clone(), t[m | bit].clone());
                t[m] = a.clone() - b.clone() * half.clone();
                t[m | bit] = a + b * half.clone();
            }
        }
    }
    LocalFunction::new(vars, t)
}
