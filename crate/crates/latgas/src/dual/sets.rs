//! Finite point sets (and multisets) of torus x V, and their translation classes.

use crate::local::{slot, slot_site, slot_vel};
use crate::model::{Torus, DIRS};
use smallvec::SmallVec;

pub type Pts = SmallVec<[u32; 8]>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Geometry {
    pub torus: Torus,
    pub nv: usize,
}

impl Geometry {
    pub fn new(torus: Torus, nv: usize) -> Self {
        assert!(torus.sites() * nv < u16::MAX as usize, "torus too large for the dual representation");
        Geometry { torus, nv }
    }
    #[inline]
    pub fn site(&self, p: u32) -> usize {
        slot_site(p, self.nv)
    }
    #[inline]
    pub fn vel(&self, p: u32) -> usize {
        slot_vel(p, self.nv)
    }
    #[inline]
    pub fn point(&self, site: usize, vel: usize) -> u32 {
        slot(site, vel, self.nv)
    }
    #[inline]
    pub fn step(&self, p: u32, dir: usize) -> u32 {
        self.point(self.torus.neighbor(self.site(p), dir), self.vel(p))
    }
    #[inline]
    pub fn with_vel(&self, p: u32, vel: usize) -> u32 {
        self.point(self.site(p), vel)
    }
    pub fn points(&self) -> usize {
        self.torus.sites() * self.nv
    }
    /// Displacement e.v for a positive axis direction k (0 = e1, 1 = e2) is handled by callers;
    /// this returns the direction index of +e_k.
    pub fn plus(k: usize) -> usize {
        2 * k
    }
    pub fn dirs() -> &'static [[i32; 2]; 4] {
        &DIRS
    }
}

pub fn sorted(mut p: Pts) -> Pts {
    p.sort_unstable();
    p
}

pub fn is_set(p: &[u32]) -> bool {
    p.windows(2).all(|w| w[0] < w[1])
}

/// Replace element `i` of a sorted list and restore order.
pub fn replaced(p: &[u32], i: usize, new: u32) -> Pts {
    let mut q: Pts = p.into();
    q[i] = new;
    sorted(q)
}

pub fn removed(p: &[u32], i: usize) -> Pts {
    let mut q: Pts = p.into();
    q.remove(i);
    q
}

pub fn inserted(p: &[u32], new: u32) -> Pts {
    let mut q: Pts = p.into();
    let pos = q.partition_point(|&x| x <= new);
    q.insert(pos, new);
    q
}

/// Product of factorials of multiplicities.
pub fn multiplicity_factor(p: &[u32]) -> f64 {
    let mut f = 1.0;
    let mut run = 1.0;
    for i in 1..p.len() {
        if p[i] == p[i - 1] {
            run += 1.0;
            f *= run;
        } else {
            run = 1.0;
        }
    }
    f
}

/// Lexicographically least translate with some point at the origin, and the number
/// of anchor sites achieving it (the size of the stabilizer).
pub fn canonical(geo: &Geometry, p: &[u32]) -> (Pts, u32) {
    if p.is_empty() {
        return (Pts::new(), geo.torus.sites() as u32);
    }
    let mut best: Option<Pts> = None;
    let mut count = 0u32;
    let mut last_anchor = usize::MAX;
    for &a in p {
        let anchor = geo.site(a);
        if anchor == last_anchor {
            continue;
        }
        last_anchor = anchor;
        let mut q: Pts = p
            .iter()
            .map(|&x| geo.point(geo.torus.sub(geo.site(x), anchor), geo.vel(x)))
            .collect();
        q.sort_unstable();
        match &best {
            None => {
                best = Some(q);
                count = 1;
            }
            Some(b) => match q.as_slice().cmp(b.as_slice()) {
                std::cmp::Ordering::Less => {
                    best = Some(q);
                    count = 1;
                }
                std::cmp::Ordering::Equal => count += 1,
                std::cmp::Ordering::Greater => {}
            },
        }
    }
    // anchors are visited once per distinct site only if equal sites are adjacent, which holds for sorted input
    (best.unwrap(), count)
}

/// Packs up to four points into a u64 preserving lexicographic order.
pub fn pack(p: &[u32]) -> u64 {
    assert!(p.len() <= 4);
    let mut k = 0u64;
    for &x in p {
        k = (k << 16) | x as u64;
    }
    k
}

pub fn unpack(key: u64, n: usize) -> Pts {
    let mut p = Pts::new();
    for i in (0..n).rev() {
        p.push(((key >> (16 * i)) & 0xffff) as u32);
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_is_translation_invariant() {
        let geo = Geometry::new(Torus::new(5).unwrap(), 4);
        let t = geo.torus;
        let a: Pts = sorted([geo.point(t.site(2, 3), 1), geo.point(t.site(3, 3), 1), geo.point(t.site(2, 4), 0)].into_iter().collect());
        let (c, s) = canonical(&geo, &a);
        assert_eq!(s, 1);
        for z in 0..t.sites() {
            let b: Pts = sorted(a.iter().map(|&x| geo.point(t.add(geo.site(x), z), geo.vel(x))).collect());
            assert_eq!(canonical(&geo, &b).0, c);
        }
        assert_eq!(geo.site(c[0]), 0);
    }

    #[test]
    fn stabilizer_of_periodic_set() {
        let geo = Geometry::new(Torus::new(4).unwrap(), 4);
        let t = geo.torus;
        let a: Pts = sorted((0..4).map(|x| geo.point(t.site(x, 0), 0)).collect());
        assert_eq!(canonical(&geo, &a).1, 4);
    }

    #[test]
    fn pack_order() {
        let a = [1u32, 5, 9];
        let b = [1u32, 6, 2];
        assert!(pack(&a) < pack(&b));
        assert_eq!(unpack(pack(&a), 3).as_slice(), &a);
        assert_eq!(multiplicity_factor(&[1, 1, 2, 2, 2]), 12.0);
    }
}
