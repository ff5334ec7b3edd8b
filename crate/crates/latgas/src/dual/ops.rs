//! Row stencils of the dual operators: (O f)(A) = sum_B O[A][B] f(B).
//!
//! `Space::Sets` are the hard-core operators on finite sets; `Space::Tuples` the
//! hard-core-removed operators on symmetric tuple functions, keyed by sorted multisets.

use super::sets::{canonical, inserted, is_set, multiplicity_factor, removed, replaced, Geometry, Pts};
use crate::model::{dot, VelocityModel, DIRS};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DualOp {
    S,
    Jplus,
    Jminus,
    Lc1,
    /// Collision part without the lonely-site indicator (tuple space only).
    Qn,
}

impl std::str::FromStr for DualOp {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "S" => Ok(DualOp::S),
            "Jplus" => Ok(DualOp::Jplus),
            "Jminus" => Ok(DualOp::Jminus),
            "Lc1" => Ok(DualOp::Lc1),
            "Qn" => Ok(DualOp::Qn),
            other => Err(crate::Error::Parse(format!("unknown dual operator tag {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Space {
    Sets,
    Tuples,
}

pub struct Stencil<'a> {
    pub geo: Geometry,
    pub model: &'a VelocityModel,
    /// i_q(u) per collision and velocity: +1 incoming, -1 outgoing, 0 otherwise.
    iq: Vec<Vec<i32>>,
}

impl<'a> Stencil<'a> {
    pub fn new(geo: Geometry, model: &'a VelocityModel) -> Self {
        assert_eq!(geo.nv, model.nv());
        let iq = model
            .collisions()
            .iter()
            .map(|&[v, w, vp, wp]| {
                let mut row = vec![0; model.nv()];
                row[v] += 1;
                row[w] += 1;
                row[vp] -= 1;
                row[wp] -= 1;
                row
            })
            .collect();
        Stencil { geo, model, iq }
    }

    /// e_k . v for the positive axis direction k.
    #[inline]
    fn drift(&self, k: usize, vel: usize) -> i32 {
        dot(DIRS[2 * k], self.model.velocity(vel))
    }

    pub fn row(&self, op: DualOp, space: Space, a: &[u32], emit: &mut impl FnMut(&[u32], f64)) {
        match (op, space) {
            (DualOp::S, Space::Sets) => self.s_sets(a, emit),
            (DualOp::S, Space::Tuples) => self.s_tuples(a, emit),
            (DualOp::Jplus, _) => self.jplus(space, a, emit),
            (DualOp::Jminus, Space::Sets) => self.jminus_sets(a, emit),
            (DualOp::Jminus, Space::Tuples) => self.jminus_tuples(a, emit),
            (DualOp::Lc1, _) => self.collision(a, true, emit),
            (DualOp::Qn, Space::Tuples) => self.collision(a, false, emit),
            (DualOp::Qn, Space::Sets) => panic!("Qn acts on the hard-core-removed space only"),
        }
    }

    fn s_sets(&self, a: &[u32], emit: &mut impl FnMut(&[u32], f64)) {
        let g = self.model.gamma();
        let mut diag = 0.0;
        for (i, &p) in a.iter().enumerate() {
            for dir in 0..4 {
                let q = self.geo.step(p, dir);
                if a.binary_search(&q).is_err() {
                    emit(&replaced(a, i, q), g);
                    diag -= g;
                }
            }
        }
        if diag != 0.0 {
            emit(a, diag);
        }
    }

    fn s_tuples(&self, a: &[u32], emit: &mut impl FnMut(&[u32], f64)) {
        let g = self.model.gamma();
        for (i, &p) in a.iter().enumerate() {
            for dir in 0..4 {
                emit(&replaced(a, i, self.geo.step(p, dir)), g);
            }
        }
        if !a.is_empty() {
            emit(a, -4.0 * g * a.len() as f64);
        }
    }

    /// Pairs (i, j) with x_j + e_k = x_i and equal velocities: +c f(A minus i) - c f(A minus j).
    fn jplus(&self, space: Space, a: &[u32], emit: &mut impl FnMut(&[u32], f64)) {
        let _ = space;
        for (j, &pj) in a.iter().enumerate() {
            let vel = self.geo.vel(pj);
            for k in 0..2 {
                let c = self.drift(k, vel);
                if c == 0 {
                    continue;
                }
                let target = self.geo.step(pj, 2 * k);
                for (i, &pi) in a.iter().enumerate() {
                    if i != j && pi == target {
                        emit(&removed(a, i), c as f64);
                        emit(&removed(a, j), -c as f64);
                    }
                }
            }
        }
    }

    /// Hard-core J-: (1/4) sum over bonds with both ends outside A of (e_k.v){f(A+y) - f(A+x)},
    /// collapsed to the points adjacent to A.
    fn jminus_sets(&self, a: &[u32], emit: &mut impl FnMut(&[u32], f64)) {
        let mut cand: Pts = Pts::new();
        for &p in a {
            for dir in 0..4 {
                let z = self.geo.step(p, dir);
                if a.binary_search(&z).is_err() && !cand.contains(&z) {
                    cand.push(z);
                }
            }
        }
        cand.sort_unstable();
        for &z in &cand {
            let vel = self.geo.vel(z);
            let mut c = 0i32;
            for k in 0..2 {
                let d = self.drift(k, vel);
                if d == 0 {
                    continue;
                }
                let fwd = self.geo.step(z, 2 * k);
                let back = self.geo.step(z, 2 * k + 1);
                // z plays the role of x + e_k (needs x = z - e_k outside A) or of x (needs z + e_k outside A)
                let x_out = a.binary_search(&back).is_err();
                let y_out = a.binary_search(&fwd).is_err();
                c += d * (x_out as i32 - y_out as i32);
            }
            if c != 0 {
                emit(&inserted(a, z), 0.25 * c as f64);
            }
        }
    }

    /// Tuple-space J- defined as -J+^* in the weighted inner product with weights 4^{-n}/prod m!.
    fn jminus_tuples(&self, a: &[u32], emit: &mut impl FnMut(&[u32], f64)) {
        let mut cand: Vec<u32> = Vec::new();
        for &p in a {
            for dir in 0..4 {
                cand.push(self.geo.step(p, dir));
            }
        }
        cand.sort_unstable();
        cand.dedup();
        let wa = multiplicity_factor(a);
        for z in cand {
            let omega = inserted(a, z);
            let mut coef = 0.0;
            self.jplus(Space::Tuples, &omega, &mut |t, c| {
                if t == a {
                    coef += c;
                }
            });
            if coef != 0.0 {
                // w(omega)/w(a) = (1/4) prod m!(a) / prod m!(omega)
                let ratio = 0.25 * wa / multiplicity_factor(&omega);
                emit(&omega, -ratio * coef);
            }
        }
    }

    /// Lc1 (lonely = true) or Qn (lonely = false).
    fn collision(&self, a: &[u32], lonely: bool, emit: &mut impl FnMut(&[u32], f64)) {
        let nv = self.geo.nv;
        for (j, &p) in a.iter().enumerate() {
            let site = self.geo.site(p);
            if lonely && a.iter().enumerate().any(|(k, &x)| k != j && self.geo.site(x) == site) {
                continue;
            }
            let u = self.geo.vel(p);
            let mut coef = vec![0.0; nv];
            for (qi, q) in self.model.collisions().iter().enumerate() {
                let s = self.iq[qi][u];
                if s == 0 {
                    continue;
                }
                let [v, w, vp, wp] = *q;
                let sf = 0.25 * s as f64;
                coef[vp] += sf;
                coef[wp] += sf;
                coef[v] -= sf;
                coef[w] -= sf;
            }
            for (vel, &c) in coef.iter().enumerate() {
                if c != 0.0 {
                    emit(&replaced(a, j, self.geo.with_vel(p, vel)), c);
                }
            }
        }
    }

    /// Every set or multiset B for which O[A][B] can be nonzero for some A related to it,
    /// used to find the output support when applying an operator to a finitely supported function.
    pub fn neighborhood(&self, b: &[u32], space: Space, out: &mut Vec<Pts>) {
        out.push(b.into());
        let nv = self.geo.nv;
        for (i, &p) in b.iter().enumerate() {
            out.push(removed(b, i));
            for dir in 0..4 {
                let q = self.geo.step(p, dir);
                let ok = space == Space::Tuples || b.binary_search(&q).is_err();
                if ok {
                    out.push(replaced(b, i, q));
                    out.push(inserted(b, q));
                }
            }
            for vel in 0..nv {
                let q = self.geo.with_vel(p, vel);
                if vel != self.geo.vel(p) && (space == Space::Tuples || b.binary_search(&q).is_err()) {
                    out.push(replaced(b, i, q));
                }
            }
        }
        if space == Space::Sets {
            out.retain(|x| is_set(x));
        }
    }

    pub fn canonical(&self, a: &[u32]) -> (Pts, u32) {
        canonical(&self.geo, a)
    }
}
