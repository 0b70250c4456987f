//! Bilinear singular integral forms by midpoint quadrature on the mesh.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{cell_coords, MeshFunction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Kernel {
    Zero,
    /// `((x-y)_1 + (x-z)_1) / (|x-y|^2 + |x-z|^2)^{(2n+1)/2}`.
    Riesz,
    /// `e^{-|x|^2-|y|^2-|z|^2} / (|x-y| + |x-z|)^{2n}`.
    GaussianDamped,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|t| t * t).sum::<f64>().sqrt()
}

impl Kernel {
    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Zero => "zero",
            Kernel::Riesz => "riesz",
            Kernel::GaussianDamped => "gaussian-damped",
        }
    }

    /// Translation-invariant factor in terms of `a = x - y`, `b = x - z`.
    fn core(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as i32;
        match self {
            Kernel::Zero => 0.0,
            Kernel::Riesz => {
                let r2 = a.iter().chain(b).map(|t| t * t).sum::<f64>();
                (a[0] + b[0]) / r2.powf(n as f64 + 0.5)
            }
            Kernel::GaussianDamped => (norm(a) + norm(b)).powi(-2 * n),
        }
    }

    fn damping(&self, x: &[f64]) -> f64 {
        match self {
            Kernel::GaussianDamped => (-x.iter().map(|t| t * t).sum::<f64>()).exp(),
            _ => 1.0,
        }
    }

    /// `K(x, y, z)`; infinite on the diagonal.
    pub fn eval(&self, x: &[f64], y: &[f64], z: &[f64]) -> f64 {
        let a: Vec<f64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
        let b: Vec<f64> = x.iter().zip(z).map(|(p, q)| p - q).collect();
        if norm(&a) + norm(&b) == 0.0 {
            return if *self == Kernel::Zero { 0.0 } else { f64::INFINITY };
        }
        self.damping(x) * self.damping(y) * self.damping(z) * self.core(&a, &b)
    }
}

/// `T(f1, f2)(x) = sum_{|x-y|+|x-z| > eps} K(x, y, z) f1(y) f2(z) h^{2n}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelOperator {
    pub kernel: Kernel,
    pub epsilon: f64,
}

pub const MAX_KERNEL_WORK: f64 = 1.1e9;

impl KernelOperator {
    pub fn apply(&self, f1: &MeshFunction, f2: &MeshFunction) -> Result<MeshFunction> {
        f1.check_same(f2)?;
        let grid = f1.grid();
        let n = grid.n();
        let h = grid.cell_side();
        if !(self.epsilon >= h * (n as f64).sqrt()) {
            return Err(Error::resolution(format!(
                "truncation {} is below the cell diameter {}",
                self.epsilon,
                h * (n as f64).sqrt()
            )));
        }
        if self.kernel == Kernel::Zero {
            return Ok(MeshFunction::zeros(grid));
        }
        let cells = grid.num_cells();
        if (cells as f64).powi(3) > MAX_KERNEL_WORK {
            return Err(Error::resolution(format!("{cells} cells is too many for direct quadrature")));
        }
        let w = grid.width() as i64;
        let span = (2 * w - 1) as usize;
        let diffs = span.pow(n as u32);
        let diff_vec = |i: usize| -> Vec<f64> {
            let mut v = vec![0.0; n];
            let mut r = i;
            for t in v.iter_mut() {
                *t = ((r % span) as i64 - (w - 1)) as f64 * h;
                r /= span;
            }
            v
        };
        let vecs: Vec<Vec<f64>> = (0..diffs).map(diff_vec).collect();
        let norms: Vec<f64> = vecs.iter().map(|v| norm(v)).collect();
        let table: Vec<f64> = (0..diffs * diffs)
            .into_par_iter()
            .map(|i| {
                let (ia, ib) = (i / diffs, i % diffs);
                if norms[ia] + norms[ib] <= self.epsilon {
                    0.0
                } else {
                    self.kernel.core(&vecs[ia], &vecs[ib])
                }
            })
            .collect();
        let centers: Vec<[f64; 2]> = (0..cells).map(|i| f1.cell_center(i)).collect();
        let damp: Vec<f64> = centers.iter().map(|c| self.kernel.damping(&c[..n])).collect();
        let g1: Vec<f64> = f1.values().iter().zip(&damp).map(|(v, d)| v * d).collect();
        let g2: Vec<f64> = f2.values().iter().zip(&damp).map(|(v, d)| v * d).collect();
        let coords: Vec<[i64; 2]> = (0..cells).map(|i| cell_coords(grid, i)).collect();
        let diff_index = |x: [i64; 2], y: [i64; 2]| -> usize {
            let mut idx = 0usize;
            for d in (0..n).rev() {
                idx = idx * span + (x[d] - y[d] + w - 1) as usize;
            }
            idx
        };
        let supp1: Vec<usize> = (0..cells).filter(|&i| g1[i] != 0.0).collect();
        let supp2: Vec<usize> = (0..cells).filter(|&i| g2[i] != 0.0).collect();
        let weight = h.powi(2 * n as i32);
        let values: Vec<f64> = (0..cells)
            .into_par_iter()
            .map(|ix| {
                let x = coords[ix];
                let mut s = 0.0;
                for &iy in &supp1 {
                    let row = &table[diff_index(x, coords[iy]) * diffs..][..diffs];
                    let mut inner = 0.0;
                    for &iz in &supp2 {
                        inner += row[diff_index(x, coords[iz])] * g2[iz];
                    }
                    s += g1[iy] * inner;
                }
                damp[ix] * s * weight
            })
            .collect();
        MeshFunction::from_values(grid, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(grid: &crate::GridSpec, seed: u64) -> MeshFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        MeshFunction::from_values(grid, (0..grid.num_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn oracle(op: &KernelOperator, f1: &MeshFunction, f2: &MeshFunction) -> MeshFunction {
        let g = f1.grid();
        let n = g.n();
        let h = g.cell_side();
        let c: Vec<Vec<f64>> = (0..g.num_cells()).map(|i| f1.cell_center(i)[..n].to_vec()).collect();
        let vals = (0..g.num_cells())
            .map(|x| {
                let mut s = 0.0;
                for y in 0..g.num_cells() {
                    for z in 0..g.num_cells() {
                        let dxy: Vec<f64> = (0..n).map(|d| c[x][d] - c[y][d]).collect();
                        let dxz: Vec<f64> = (0..n).map(|d| c[x][d] - c[z][d]).collect();
                        if norm(&dxy) + norm(&dxz) > op.epsilon {
                            s += op.kernel.eval(&c[x], &c[y], &c[z]) * f1.values()[y] * f2.values()[z];
                        }
                    }
                }
                s * h.powi(2 * n as i32)
            })
            .collect();
        MeshFunction::from_values(g, vals).unwrap()
    }

    #[test]
    fn matches_pointwise_oracle() {
        for (n, l, m) in [(1, 2, 2), (2, 1, 1)] {
            let g = make_grid(n, l, m, None).unwrap();
            let (f1, f2) = (random(&g, 1), random(&g, 2));
            for kernel in [Kernel::Riesz, Kernel::GaussianDamped] {
                let op = KernelOperator { kernel, epsilon: 0.75 };
                let got = op.apply(&f1, &f2).unwrap();
                let want = oracle(&op, &f1, &f2);
                let scale = want.max_abs().max(1.0);
                assert!(got.max_abs_diff(&want) < 1e-12 * scale, "{kernel:?} n={n}");
            }
        }
    }

    #[test]
    fn riesz_form_is_antisymmetric() {
        let g = make_grid(1, 3, 2, None).unwrap();
        let op = KernelOperator { kernel: Kernel::Riesz, epsilon: 0.2 };
        // reflection x -> -x maps the centred cells onto themselves
        let f = random(&g, 3);
        let reflect = |f: &MeshFunction| {
            let mut v = f.values().to_vec();
            v.reverse();
            MeshFunction::from_values(&g, v).unwrap()
        };
        let t = op.apply(&f, &f).unwrap();
        let tr = op.apply(&reflect(&f), &reflect(&f)).unwrap();
        assert!(t.add(&reflect(&tr)).unwrap().max_abs() < 1e-10 * t.max_abs());
    }

    #[test]
    fn rejects_sub_cell_truncation() {
        let g = make_grid(1, 2, 2, None).unwrap();
        let f = random(&g, 4);
        let op = KernelOperator { kernel: Kernel::Riesz, epsilon: 0.1 };
        assert!(matches!(op.apply(&f, &f), Err(Error::Resolution(_))));
    }
}
