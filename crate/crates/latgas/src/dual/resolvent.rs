//! Truncated resolvent of the degree hierarchy, restricted to translation classes.
//!
//! Class functions carry the weight w(C) = 4^{-n} / (prod m! * stab(C)), and all
//! sector operators are conjugated by W^{1/2} so that they become symmetric matrices.

use super::ops::{DualOp, Space, Stencil};
use super::setfn::{Flavor, SetFunction};
use super::sets::{canonical, multiplicity_factor, pack, unpack, Geometry, Pts};
use crate::error::{Error, Result};
use crate::linalg::{cg, minres, Csr, SolveInfo};
use crate::model::VelocityModel;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Collision {
    Lc1,
    Qn,
}

impl std::str::FromStr for Collision {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lc1" => Ok(Collision::Lc1),
            "qn" => Ok(Collision::Qn),
            _ => Err(Error::Parse(format!("unknown collision operator {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    /// Block system with alternating signs, solved by MINRES.
    Monolithic,
    /// Schur complements from the top degree down, each level by CG.
    Nested,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ResolventOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub strategy: Strategy,
}

impl Default for ResolventOptions {
    fn default() -> Self {
        ResolventOptions { tol: 1e-11, max_iter: 10_000, strategy: Strategy::Monolithic }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResolventResult {
    pub value: f64,
    pub lambda: f64,
    pub n: usize,
    pub hardcore: bool,
    pub collision: Collision,
    pub strategy: Strategy,
    pub sector_sizes: Vec<usize>,
    pub nnz: usize,
    pub iterations: usize,
    pub residual: f64,
}

struct Sector {
    keys: Vec<u64>,
    weight: Vec<f64>,
}

impl Sector {
    fn index(&self, key: &[u32]) -> Option<usize> {
        self.keys.binary_search(&pack(key)).ok()
    }
}

/// Assembled sectors of degree 2..=n; reusable across lambda.
pub struct Hierarchy {
    pub geo: Geometry,
    pub space: Space,
    pub collision: Collision,
    pub n: usize,
    sectors: Vec<Sector>,
    /// Scaled -S - C on each sector (positive semidefinite).
    diag_ops: Vec<Csr>,
    /// Scaled J+ from sector k to k+1 (rows in k+1).
    raise: Vec<Csr>,
    raise_t: Vec<Csr>,
}

fn enumerate_sector(geo: &Geometry, n: usize, space: Space) -> Vec<u64> {
    let np = geo.points() as u32;
    let nv = geo.nv as u32;
    let strict = space == Space::Sets;
    let starts: Vec<(u32, u32)> = (0..nv).flat_map(|a| (if strict { a + 1 } else { a }..np).map(move |b| (a, b))).collect();
    let mut keys: Vec<u64> = starts
        .par_iter()
        .flat_map_iter(|&(a, b)| {
            let mut out = Vec::new();
            let mut cur: Pts = Pts::new();
            cur.push(a);
            cur.push(b);
            fill(geo, n, strict, np, &mut cur, &mut out);
            out.into_iter()
        })
        .collect();
    keys.par_sort_unstable();
    keys
}

fn fill(geo: &Geometry, n: usize, strict: bool, np: u32, cur: &mut Pts, out: &mut Vec<u64>) {
    if cur.len() == n {
        let (c, _) = canonical(geo, cur);
        if c.as_slice() == cur.as_slice() {
            out.push(pack(cur));
        }
        return;
    }
    let last = *cur.last().unwrap();
    for p in (if strict { last + 1 } else { last })..np {
        cur.push(p);
        fill(geo, n, strict, np, cur, out);
        cur.pop();
    }
}

fn class_weight(geo: &Geometry, key: &[u32]) -> f64 {
    let (_, stab) = canonical(geo, key);
    0.25f64.powi(key.len() as i32) / (multiplicity_factor(key) * stab as f64)
}

impl Hierarchy {
    pub fn build(model: &VelocityModel, geo: Geometry, n: usize, hardcore: bool, collision: Collision) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("truncation degree must be >= 2, got {n}")));
        }
        if n > 4 {
            return Err(Error::Unsupported(format!("truncation degree {n} > 4")));
        }
        if hardcore && collision == Collision::Qn {
            return Err(Error::Unsupported("Qn is only defined on the hard-core-removed space".into()));
        }
        let space = if hardcore { Space::Sets } else { Space::Tuples };
        let cop = match collision {
            Collision::Lc1 => DualOp::Lc1,
            Collision::Qn => DualOp::Qn,
        };
        let st = Stencil::new(geo, model);
        let sectors: Vec<Sector> = (2..=n)
            .map(|k| {
                let keys = enumerate_sector(&geo, k, space);
                let weight = keys.par_iter().map(|&key| class_weight(&geo, &unpack(key, k))).collect();
                Sector { keys, weight }
            })
            .collect();
        let mut diag_ops = Vec::new();
        let mut raise = Vec::new();
        for (si, sec) in sectors.iter().enumerate() {
            let k = si + 2;
            let rows: Vec<Vec<(u32, f64)>> = sec
                .keys
                .par_iter()
                .enumerate()
                .map(|(r, &key)| {
                    let a = unpack(key, k);
                    let mut row = Vec::with_capacity(48);
                    let sw = sec.weight[r].sqrt();
                    for op in [DualOp::S, cop] {
                        st.row(op, space, &a, &mut |b, c| {
                            let (cb, _) = canonical(&geo, b);
                            let col = sec.index(&cb).expect("class closed under degree-preserving ops");
                            row.push((col as u32, -c * sw / sec.weight[col].sqrt()));
                        });
                    }
                    row
                })
                .collect();
            diag_ops.push(Csr::from_rows(sec.keys.len(), rows));
            if si > 0 {
                let lower = &sectors[si - 1];
                let rows: Vec<Vec<(u32, f64)>> = sec
                    .keys
                    .par_iter()
                    .enumerate()
                    .map(|(r, &key)| {
                        let a = unpack(key, k);
                        let mut row = Vec::new();
                        let sw = sec.weight[r].sqrt();
                        st.row(DualOp::Jplus, space, &a, &mut |b, c| {
                            let (cb, _) = canonical(&geo, b);
                            let col = lower.index(&cb).expect("lower class exists");
                            row.push((col as u32, c * sw / lower.weight[col].sqrt()));
                        });
                        row
                    })
                    .collect();
                raise.push(Csr::from_rows(lower.keys.len(), rows));
            }
        }
        let raise_t = raise.iter().map(|m| m.transpose()).collect();
        Ok(Hierarchy { geo, space, collision, n, sectors, diag_ops, raise, raise_t })
    }

    pub fn sector_sizes(&self) -> Vec<usize> {
        self.sectors.iter().map(|s| s.keys.len()).collect()
    }

    pub fn nnz(&self) -> usize {
        self.diag_ops.iter().chain(&self.raise).map(|m| m.nnz()).sum()
    }

    /// Largest relative asymmetry of the scaled sector operators (should be rounding level).
    pub fn asymmetry(&self) -> f64 {
        self.diag_ops.iter().map(|m| m.asymmetry()).fold(0.0, f64::max)
    }

    /// Scaled degree-2 right-hand side from a class or absolute set function.
    fn rhs(&self, sigma: &SetFunction<f64>) -> Result<Vec<f64>> {
        let classes = sigma.to_classes();
        let sec = &self.sectors[0];
        let mut b = vec![0.0; sec.keys.len()];
        for (k, &v) in &classes.entries {
            if v == 0.0 {
                continue;
            }
            if k.len() != 2 {
                return Err(Error::Domain(format!("right-hand side must have pure degree 2, found degree {}", k.len())));
            }
            let i = sec.index(k).ok_or_else(|| Error::Domain("right-hand side key outside the degree-2 sector".into()))?;
            b[i] = v * sec.weight[i].sqrt();
        }
        Ok(b)
    }

    pub fn value(&self, sigma: &SetFunction<f64>, lambda: f64, opts: &ResolventOptions) -> Result<ResolventResult> {
        if !(lambda > 0.0) {
            return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
        }
        let b = self.rhs(sigma)?;
        let (y, info) = match opts.strategy {
            Strategy::Monolithic => self.solve_monolithic(&b, lambda, opts)?,
            Strategy::Nested => self.solve_nested(&b, lambda, opts)?,
        };
        let value = b.iter().zip(&y).map(|(p, q)| p * q).sum();
        Ok(ResolventResult {
            value,
            lambda,
            n: self.n,
            hardcore: self.space == Space::Sets,
            collision: self.collision,
            strategy: opts.strategy,
            sector_sizes: self.sector_sizes(),
            nnz: self.nnz(),
            iterations: info.iterations,
            residual: info.residual,
        })
    }

    fn offsets(&self) -> Vec<usize> {
        let mut off = vec![0];
        for s in &self.sectors {
            off.push(off.last().unwrap() + s.keys.len());
        }
        off
    }

    fn solve_monolithic(&self, b2: &[f64], lambda: f64, opts: &ResolventOptions) -> Result<(Vec<f64>, SolveInfo)> {
        let off = self.offsets();
        let total = *off.last().unwrap();
        let ns = self.sectors.len();
        // Jacobi scaling by (lambda + diag H)^{-1/2}
        let mut pinv = vec![0.0; total];
        for s in 0..ns {
            for (i, d) in self.diag_ops[s].diag().into_iter().enumerate() {
                pinv[off[s] + i] = 1.0 / (lambda + d).sqrt();
            }
        }
        let apply = |x: &[f64], out: &mut [f64]| {
            let mut xs = vec![0.0; total];
            for i in 0..total {
                xs[i] = x[i] * pinv[i];
            }
            for s in 0..ns {
                let (lo, hi) = (off[s], off[s + 1]);
                let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
                let o = &mut out[lo..hi];
                self.diag_ops[s].gemv(1.0, &xs[lo..hi], 0.0, o);
                for (oi, xi) in o.iter_mut().zip(&xs[lo..hi]) {
                    *oi += lambda * xi;
                }
                if s + 1 < ns {
                    self.raise_t[s].gemv(1.0, &xs[off[s + 1]..off[s + 2]], 1.0, o);
                }
                if s > 0 {
                    self.raise[s - 1].gemv(-1.0, &xs[off[s - 1]..off[s]], 1.0, o);
                }
                for (oi, pi) in o.iter_mut().zip(&pinv[lo..hi]) {
                    *oi *= sign * pi;
                }
            }
        };
        let mut rhs = vec![0.0; total];
        for i in 0..b2.len() {
            rhs[i] = b2[i] * pinv[i];
        }
        let (z, info) = minres(&apply, &rhs, opts.tol, opts.max_iter)?;
        let y = (0..b2.len()).map(|i| z[i] * pinv[i]).collect();
        Ok((y, info))
    }

    /// Applies R_s = (M_s + J_s^T R_{s+1} J_s)^{-1} by CG, recursively.
    fn apply_r(&self, s: usize, r: &[f64], lambda: f64, opts: &ResolventOptions, iters: &mut usize) -> Result<Vec<f64>> {
        let ns = self.sectors.len();
        let tol = opts.tol * 0.1f64.powi((s as i32) + 0);
        let err: std::cell::RefCell<Option<Error>> = std::cell::RefCell::new(None);
        let inner_iters = std::cell::Cell::new(0usize);
        let op = |x: &[f64], out: &mut [f64]| {
            self.diag_ops[s].gemv(1.0, x, 0.0, out);
            for (o, xi) in out.iter_mut().zip(x) {
                *o += lambda * xi;
            }
            if s + 1 < ns {
                let jx = self.raise[s].matvec(x);
                let mut it = 0;
                match self.apply_r(s + 1, &jx, lambda, opts, &mut it) {
                    Ok(rj) => self.raise_t[s].gemv(1.0, &rj, 1.0, out),
                    Err(e) => *err.borrow_mut() = Some(e),
                }
                inner_iters.set(inner_iters.get() + it);
            }
        };
        let (x, info) = cg(&op, r, tol, opts.max_iter)?;
        if let Some(e) = err.into_inner() {
            return Err(e);
        }
        *iters += info.iterations + inner_iters.get();
        Ok(x)
    }

    fn solve_nested(&self, b2: &[f64], lambda: f64, opts: &ResolventOptions) -> Result<(Vec<f64>, SolveInfo)> {
        let mut iters = 0;
        let y = self.apply_r(0, b2, lambda, opts, &mut iters)?;
        Ok((y, SolveInfo { iterations: iters, residual: f64::NAN }))
    }
}

/// <<sigma, T_n sigma>> on the torus of `sigma.geo`.
pub fn truncated_resolvent(
    model: &VelocityModel,
    sigma: &SetFunction<f64>,
    lambda: f64,
    n: usize,
    hardcore: bool,
    collision: Collision,
    opts: &ResolventOptions,
) -> Result<ResolventResult> {
    let h = Hierarchy::build(model, sigma.geo, n, hardcore, collision)?;
    h.value(sigma, lambda, opts)
}

/// Class-flavored set function of sigma on a given geometry.
pub fn sigma_classes(sigma: &crate::equilibrium::SigmaObservable, model: &VelocityModel, geo: Geometry) -> SetFunction<f64> {
    let f = sigma.local::<f64>(model, &geo.torus);
    let mut t = super::setfn::transform(&f, geo).to_classes();
    t.prune();
    debug_assert_eq!(t.flavor, Flavor::Class);
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{sigma_observable, ObservableSpec};
    use crate::model::{Preset, Torus};

    fn setup(p: Preset, l: usize) -> (VelocityModel, Geometry, SetFunction<f64>) {
        let m = VelocityModel::preset(p, 1.0).unwrap();
        let geo = Geometry::new(Torus::new(l).unwrap(), m.nv());
        let s = sigma_observable(&ObservableSpec::default(), &m).unwrap();
        let sig = sigma_classes(&s, &m, geo);
        (m, geo, sig)
    }

    #[test]
    fn sector_operators_symmetric() {
        let (m, geo, _) = setup(Preset::Axes, 4);
        for (hc, c) in [(true, Collision::Lc1), (false, Collision::Lc1), (false, Collision::Qn)] {
            let h = Hierarchy::build(&m, geo, 3, hc, c).unwrap();
            assert!(h.asymmetry() < 1e-12, "{hc} {c:?}");
        }
    }

    #[test]
    fn nested_matches_monolithic() {
        let (m, geo, sig) = setup(Preset::Cube, 4);
        let h = Hierarchy::build(&m, geo, 3, true, Collision::Lc1).unwrap();
        let mono = h.value(&sig, 0.5, &ResolventOptions::default()).unwrap();
        let nest = h.value(&sig, 0.5, &ResolventOptions { strategy: Strategy::Nested, ..Default::default() }).unwrap();
        assert!((mono.value - nest.value).abs() < 1e-9 * mono.value, "{} {}", mono.value, nest.value);
    }

    #[test]
    fn hardcore_with_qn_rejected() {
        let (m, geo, sig) = setup(Preset::Axes, 4);
        let _ = geo;
        assert!(matches!(
            truncated_resolvent(&m, &sig, 1.0, 2, true, Collision::Qn, &ResolventOptions::default()),
            Err(Error::Unsupported(_))
        ));
    }
}
