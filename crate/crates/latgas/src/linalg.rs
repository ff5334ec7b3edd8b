//! Sparse matrices and Krylov solvers.

use crate::error::{Error, Result};
use rayon::prelude::*;

#[derive(Clone, Debug, Default)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl Csr {
    /// Rows given as (column, value) lists; duplicate columns are summed and zeros dropped.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(u32, f64)>>) -> Self {
        let nrows = rows.len();
        let mut indptr = Vec::with_capacity(nrows + 1);
        indptr.push(0);
        let total: usize = rows.iter().map(|r| r.len()).sum();
        let mut indices = Vec::with_capacity(total);
        let mut values = Vec::with_capacity(total);
        for mut r in rows {
            r.sort_unstable_by_key(|e| e.0);
            let mut i = 0;
            while i < r.len() {
                let c = r[i].0;
                let mut v = 0.0;
                while i < r.len() && r[i].0 == c {
                    v += r[i].1;
                    i += 1;
                }
                if v != 0.0 {
                    assert!((c as usize) < ncols);
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Csr { nrows, ncols, indptr, indices, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        self.indices[a..b].iter().zip(&self.values[a..b]).map(|(&c, &v)| (c as usize, v))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).filter(|&(c, _)| c == j).map(|(_, v)| v).sum()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.get(i, i)).collect()
    }

    /// y = alpha * A x + beta * y.
    pub fn gemv(&self, alpha: f64, x: &[f64], beta: f64, y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        let body = |(i, yi): (usize, &mut f64)| {
            let (a, b) = (self.indptr[i], self.indptr[i + 1]);
            let mut s = 0.0;
            for k in a..b {
                s += self.values[k] * x[self.indices[k] as usize];
            }
            *yi = alpha * s + if beta == 0.0 { 0.0 } else { beta * *yi };
        };
        if self.nnz() > 50_000 {
            y.par_iter_mut().enumerate().with_min_len(1024).for_each(body);
        } else {
            y.iter_mut().enumerate().for_each(body);
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.gemv(1.0, x, 0.0, &mut y);
        y
    }

    pub fn transpose(&self) -> Csr {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c as usize + 1] += 1;
        }
        for i in 0..self.ncols {
            counts[i + 1] += counts[i];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0u32; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            for (c, v) in self.row(i) {
                let k = next[c];
                next[c] += 1;
                indices[k] = i as u32;
                values[k] = v;
            }
        }
        Csr { nrows: self.ncols, ncols: self.nrows, indptr, indices, values }
    }

    /// max |A_ij - A_ji| over stored entries, relative to max |A_ij|.
    pub fn asymmetry(&self) -> f64 {
        assert_eq!(self.nrows, self.ncols);
        let t = self.transpose();
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..self.nrows {
            for (c, v) in self.row(i) {
                scale = scale.max(v.abs());
                worst = worst.max((v - t.get(i, c)).abs());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    if a.len() > 100_000 {
        a.par_chunks(8192).zip(b.par_chunks(8192)).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>()).sum()
    } else {
        a.iter().zip(b).map(|(p, q)| p * q).sum()
    }
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// y += alpha x
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    if x.len() > 100_000 {
        y.par_chunks_mut(8192).zip(x.par_chunks(8192)).for_each(|(yc, xc)| {
            for (a, b) in yc.iter_mut().zip(xc) {
                *a += alpha * b;
            }
        });
    } else {
        for (a, b) in y.iter_mut().zip(x) {
            *a += alpha * b;
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveInfo {
    pub iterations: usize,
    pub residual: f64,
}

/// Conjugate gradients for a symmetric positive definite operator.
pub fn cg(apply: &dyn Fn(&[f64], &mut [f64]), b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveInfo)> {
    let n = b.len();
    let bn = norm(b);
    let mut x = vec![0.0; n];
    if bn == 0.0 {
        return Ok((x, SolveInfo::default()));
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Solver { msg: "operator not positive definite in CG".into(), residual: rr.sqrt() / bn });
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= tol * bn {
            // confirm with the true residual
            apply(&x, &mut ap);
            let res: f64 = b.iter().zip(&ap).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt() / bn;
            if res <= 10.0 * tol {
                return Ok((x, SolveInfo { iterations: it, residual: res }));
            }
            r = b.iter().zip(&ap).map(|(a, c)| a - c).collect();
            p = r.clone();
            rr = dot(&r, &r);
            continue;
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }
    Err(Error::Solver { msg: format!("CG did not converge in {max_iter} iterations"), residual: rr.sqrt() / bn })
}

fn minres_once(apply: &dyn Fn(&[f64], &mut [f64]), b: &[f64], tol: f64, max_iter: usize) -> (Vec<f64>, usize) {
    let n = b.len();
    let mut x = vec![0.0; n];
    let beta1 = norm(b);
    if beta1 == 0.0 {
        return (x, 0);
    }
    let mut r1 = b.to_vec();
    let mut r2 = b.to_vec();
    let mut y = b.to_vec();
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut itn = 0;
    while itn < max_iter {
        itn += 1;
        let s = 1.0 / beta;
        for (vi, yi) in v.iter_mut().zip(&y) {
            *vi = s * yi;
        }
        apply(&v, &mut y);
        if itn >= 2 {
            axpy(-beta / oldb, &r1, &mut y);
        }
        let alfa = dot(&v, &y);
        axpy(-alfa / beta, &r2, &mut y);
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        oldb = beta;
        beta = norm(&r2);
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        let denom = 1.0 / gamma;
        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        // now w1 = old w2, w2 = old w
        let body = |(((wi, vi), a), b): (((&mut f64, &f64), &f64), &f64)| {
            *wi = (vi - oldeps * a - delta * b) * denom;
        };
        w.iter_mut().zip(&v).zip(&w1).zip(&w2).for_each(body);
        axpy(phi, &w, &mut x);
        if phibar <= tol * beta1 || beta == 0.0 {
            break;
        }
    }
    (x, itn)
}

/// MINRES for a symmetric (possibly indefinite) operator, with iterative refinement on
/// the true residual.
pub fn minres(apply: &dyn Fn(&[f64], &mut [f64]), b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveInfo)> {
    let n = b.len();
    let bn = norm(b);
    if bn == 0.0 {
        return Ok((vec![0.0; n], SolveInfo::default()));
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut total = 0;
    let mut ax = vec![0.0; n];
    let mut res = 1.0;
    for _ in 0..4 {
        let (dx, it) = minres_once(apply, &r, tol * bn / norm(&r).max(f64::MIN_POSITIVE), max_iter - total.min(max_iter));
        total += it;
        axpy(1.0, &dx, &mut x);
        apply(&x, &mut ax);
        for i in 0..n {
            r[i] = b[i] - ax[i];
        }
        res = norm(&r) / bn;
        if res <= tol || total >= max_iter {
            break;
        }
    }
    if res <= tol * 10.0 {
        Ok((x, SolveInfo { iterations: total, residual: res }))
    } else {
        Err(Error::Solver { msg: format!("MINRES stalled after {total} iterations"), residual: res })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize, shift: f64) -> Csr {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i as u32, 2.0 + shift)];
                if i > 0 {
                    r.push((i as u32 - 1, -1.0));
                }
                if i + 1 < n {
                    r.push((i as u32 + 1, -1.0));
                }
                r
            })
            .collect();
        Csr::from_rows(n, rows)
    }

    #[test]
    fn cg_and_minres_agree() {
        let a = laplace_1d(200, 0.1);
        let b: Vec<f64> = (0..200).map(|i| ((i * 7) % 13) as f64 - 6.0).collect();
        let op = |x: &[f64], y: &mut [f64]| a.gemv(1.0, x, 0.0, y);
        let (x1, _) = cg(&op, &b, 1e-12, 10_000).unwrap();
        let (x2, _) = minres(&op, &b, 1e-12, 10_000).unwrap();
        let d: f64 = x1.iter().zip(&x2).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(d < 1e-8, "{d}");
    }

    #[test]
    fn minres_indefinite() {
        // diag(1, -2, 3, ...) plus a symmetric coupling
        let n = 50;
        let rows = (0..n)
            .map(|i| {
                let d = if i % 2 == 0 { 1.0 + i as f64 } else { -1.0 - i as f64 };
                let mut r = vec![(i as u32, d)];
                if i + 1 < n {
                    r.push((i as u32 + 1, 0.5));
                }
                if i > 0 {
                    r.push((i as u32 - 1, 0.5));
                }
                r
            })
            .collect();
        let a = Csr::from_rows(n, rows);
        let b = vec![1.0; n];
        let op = |x: &[f64], y: &mut [f64]| a.gemv(1.0, x, 0.0, y);
        let (x, info) = minres(&op, &b, 1e-12, 1000).unwrap();
        let ax = a.matvec(&x);
        assert!(ax.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-9));
        assert!(info.residual < 1e-11);
    }

    #[test]
    fn transpose_round_trip() {
        let a = Csr::from_rows(3, vec![vec![(2, 1.0)], vec![(0, 2.0), (1, 3.0)]]);
        let t = a.transpose();
        assert_eq!(t.get(2, 0), 1.0);
        assert_eq!(t.get(0, 1), 2.0);
        let tt = t.transpose();
        assert_eq!(tt.indices, a.indices);
    }
}
