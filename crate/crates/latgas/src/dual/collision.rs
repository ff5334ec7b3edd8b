//! Single-site collision operators on {0,1}^V.

use super::ops::{DualOp, Space, Stencil};
use super::sets::Geometry;
use crate::model::{Torus, VelocityModel};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

#[derive(Clone, Debug)]
pub struct CollisionSpectrum {
    /// Degree-one block of Lc1 at a single site: -(1/4) sum_q c_q c_q^T.
    pub q_mat: DMatrix<f64>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Columns are orthonormal eigenvectors, in the order of `eigenvalues`.
    pub diagonalizer: DMatrix<f64>,
    pub kernel_dim: usize,
    /// Orthogonal projector onto ker Q.
    pub kernel_projector: DMatrix<f64>,
    /// max |Q I_a| over the three conserved fields.
    pub conserved_residual: f64,
    /// max |Q - Q'| where Q' is read off the Lc1 stencil on singletons.
    pub stencil_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct QuadrupleDiagnostics {
    pub q: [usize; 4],
    /// Spectrum of L_q on the 2^|V| single-site functions, ascending.
    pub eigenvalues: Vec<f64>,
    /// |L_q psi + 4 psi|_inf with psi = phi_1 + 4 phi~_3.
    pub psi_residual: f64,
    /// |L_q - (-4 psi psi^T / psi^T psi)|_inf.
    pub rank_one_residual: f64,
    /// max over degree-2 monomials in H_q of |L_q m|_inf.
    pub degree2_residual: f64,
    pub degree4_residual: f64,
    /// Smallest eigenvalue of -2 L_{q,1} - 2 L_{q,3} + L_q (nonnegative when the comparison holds).
    pub comparison_min_eig: f64,
}

const TOL: f64 = 1e-12;

/// Single-site L_q summed over the symmetry orbit of q, as a matrix acting on truth tables.
fn lq_matrix(model: &VelocityModel, q: [usize; 4]) -> DMatrix<f64> {
    let nv = model.nv();
    let n = 1usize << nv;
    let [v, w, vp, wp] = q;
    let orbit = [q, [v, w, wp, vp], [vp, wp, v, w], [vp, wp, w, v]];
    let mut m = DMatrix::zeros(n, n);
    for s in 0..n {
        for &[a, b, c, d] in &orbit {
            let on = |i: usize| (s >> i) & 1 == 1;
            if on(a) && on(b) && !on(c) && !on(d) {
                let t = s ^ (1 << a) ^ (1 << b) ^ (1 << c) ^ (1 << d);
                m[(s, t)] += 1.0;
                m[(s, s)] -= 1.0;
            }
        }
    }
    m
}

fn xi(s: usize, u: usize) -> f64 {
    if (s >> u) & 1 == 1 {
        0.5
    } else {
        -0.5
    }
}

fn table(nv: usize, f: impl Fn(usize) -> f64) -> DVector<f64> {
    DVector::from_iterator(1 << nv, (0..1usize << nv).map(f))
}

fn rank_one(phi: &DVector<f64>) -> DMatrix<f64> {
    phi * phi.transpose() * (-4.0 / phi.dot(phi))
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, b| a.max(b.abs()))
}

fn quadruple(model: &VelocityModel, q: [usize; 4]) -> QuadrupleDiagnostics {
    let nv = model.nv();
    let [v, w, vp, wp] = q;
    let l = lq_matrix(model, q);
    let phi1 = table(nv, |s| xi(s, vp) + xi(s, wp) - xi(s, v) - xi(s, w));
    let phi3t = table(nv, |s| {
        xi(s, v) * xi(s, w) * xi(s, vp) + xi(s, v) * xi(s, w) * xi(s, wp)
            - xi(s, vp) * xi(s, wp) * xi(s, v)
            - xi(s, vp) * xi(s, wp) * xi(s, w)
    });
    let phi3 = &phi3t * 4.0;
    let psi = &phi1 + &phi3;
    let psi_residual = (&l * &psi + &psi * 4.0).amax();
    let rank_one_residual = inf_norm(&(&l - rank_one(&psi)));
    let h = [v, w, vp, wp];
    let mut degree2_residual: f64 = 0.0;
    for i in 0..4 {
        for j in (i + 1)..4 {
            let m = table(nv, |s| xi(s, h[i]) * xi(s, h[j]));
            degree2_residual = degree2_residual.max((&l * m).amax());
        }
    }
    let m4 = table(nv, |s| h.iter().map(|&u| xi(s, u)).product());
    let degree4_residual = (&l * m4).amax();
    // all operators are symmetric in L2(m_0), which is the uniform measure: plain matrices suffice
    let cmp = rank_one(&phi1) * -2.0 - rank_one(&phi3) * 2.0 + &l;
    let cmp = (&cmp + cmp.transpose()) * 0.5;
    let comparison_min_eig = cmp.symmetric_eigenvalues().min();
    let mut eigenvalues: Vec<f64> = ((&l + l.transpose()) * 0.5).symmetric_eigenvalues().iter().cloned().collect();
    eigenvalues.sort_by(|a, b| a.partial_cmp(b).unwrap());
    QuadrupleDiagnostics { q, eigenvalues, psi_residual, rank_one_residual, degree2_residual, degree4_residual, comparison_min_eig }
}

impl CollisionSpectrum {
    pub fn from_model(model: &VelocityModel) -> Self {
        let nv = model.nv();
        let mut q_mat: DMatrix<f64> = DMatrix::zeros(nv, nv);
        for &[v, w, vp, wp] in model.collisions() {
            let mut c: DVector<f64> = DVector::zeros(nv);
            c[v] += 1.0;
            c[w] += 1.0;
            c[vp] -= 1.0;
            c[wp] -= 1.0;
            q_mat -= &c * c.transpose() * 0.25;
        }
        let eig: SymmetricEigen<f64, nalgebra::Dyn> = SymmetricEigen::new(q_mat.clone());
        let mut order: Vec<usize> = (0..nv).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let diagonalizer = DMatrix::from_fn(nv, nv, |r, c| eig.eigenvectors[(r, order[c])]);
        let scale = eigenvalues.iter().fold(1.0f64, |a, b| a.max(b.abs()));
        let kernel: Vec<usize> = (0..nv).filter(|&k| eigenvalues[k].abs() <= 1e-10 * scale).collect();
        let mut kernel_projector = DMatrix::zeros(nv, nv);
        for &k in &kernel {
            let o = diagonalizer.column(k);
            kernel_projector += o * o.transpose();
        }
        let mut conserved_residual: f64 = 0.0;
        for a in 0..3 {
            let ia = DVector::from_iterator(nv, (0..nv).map(|u| model.conserved_field(a, u) as f64));
            conserved_residual = conserved_residual.max((&q_mat * ia).amax());
        }
        let geo = Geometry::new(Torus::new(4).expect("side 4 is valid"), nv);
        let st = Stencil::new(geo, model);
        let mut from_stencil = DMatrix::zeros(nv, nv);
        for u in 0..nv {
            st.row(DualOp::Lc1, Space::Sets, &[geo.point(0, u)], &mut |b, c| {
                assert_eq!(b.len(), 1);
                assert_eq!(geo.site(b[0]), 0);
                from_stencil[(u, geo.vel(b[0]))] += c;
            });
        }
        let stencil_residual = inf_norm(&(&q_mat - from_stencil));
        CollisionSpectrum {
            q_mat,
            eigenvalues,
            diagonalizer,
            kernel_dim: kernel.len(),
            kernel_projector,
            conserved_residual,
            stencil_residual,
        }
    }

    /// True when all structural properties hold to `TOL`.
    pub fn is_consistent(&self) -> bool {
        let nv = self.q_mat.nrows();
        let d = self.diagonalizer.transpose() * &self.q_mat * &self.diagonalizer;
        let off = (0..nv).flat_map(|i| (0..nv).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| d[(i, j)].abs()).fold(0.0, f64::max);
        self.eigenvalues.iter().all(|&e| e <= TOL) && self.conserved_residual <= TOL && self.stencil_residual <= TOL && off <= 1e-10
    }
}

/// Q matrix, its diagonalization, and per-quadruple diagnostics of L_q.
pub fn single_site_collision_spectrum(model: &VelocityModel) -> (CollisionSpectrum, Vec<QuadrupleDiagnostics>) {
    let diags = model.collisions().iter().map(|&q| quadruple(model, q)).collect();
    (CollisionSpectrum::from_model(model), diags)
}

impl QuadrupleDiagnostics {
    /// Unique nonzero eigenvalue -4 and the remaining single-site identities, to 1e-12.
    pub fn passes(&self) -> bool {
        let nonzero: Vec<f64> = self.eigenvalues.iter().cloned().filter(|e| e.abs() > TOL).collect();
        nonzero.len() == 1
            && (nonzero[0] + 4.0).abs() <= TOL
            && self.psi_residual <= TOL
            && self.rank_one_residual <= TOL
            && self.degree2_residual <= TOL
            && self.degree4_residual <= TOL
            && self.comparison_min_eig >= -TOL
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Preset;

    #[test]
    fn both_presets() {
        for p in [Preset::Axes, Preset::Cube] {
            let m = VelocityModel::preset(p, 1.0).unwrap();
            let (spec, diags) = single_site_collision_spectrum(&m);
            assert!(spec.is_consistent(), "{p:?}");
            assert_eq!(spec.kernel_dim, 3, "{p:?}");
            assert!((spec.eigenvalues[0] + 8.0).abs() < 1e-12);
            for d in &diags {
                assert!(d.passes(), "{p:?} {d:?}");
            }
        }
    }
}
