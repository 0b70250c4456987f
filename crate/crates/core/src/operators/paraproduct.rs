//! Dyadic paraproducts and their symbol sequences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::haar::{expand, for_each_child, num_patterns, reconstruct, HaarCoeffs, Pyramid};
use crate::lorentz::lp_norm;
use crate::mesh::MeshFunction;
use crate::MeasureSpec;

/// A sequence `b = {b_Q^eta}` indexed by the cubes of one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffSequence {
    coeffs: HaarCoeffs,
}

fn volume(level: i32, n: usize) -> f64 {
    2f64.powi(-level * n as i32)
}

impl CoeffSequence {
    pub fn zeros(grid: &GridSpec) -> Self {
        CoeffSequence { coeffs: HaarCoeffs::zeros(grid) }
    }

    pub fn from_coeffs(coeffs: HaarCoeffs) -> Self {
        CoeffSequence { coeffs }
    }

    /// Haar coefficients of a function, read as a sequence.
    pub fn from_function(f: &MeshFunction) -> Self {
        CoeffSequence { coeffs: expand(f).coeffs }
    }

    pub fn grid(&self) -> &GridSpec {
        self.coeffs.grid()
    }

    pub fn coeffs(&self) -> &HaarCoeffs {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut HaarCoeffs {
        &mut self.coeffs
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        for k in self.grid().coarsest_level()..self.grid().fine_level() {
            out.coeffs.level_mut(k).iter_mut().for_each(|v| *v *= c);
        }
        out
    }

    /// `b_{[0, 2^k)} = |[0, 2^k)|^{1/2}` for every level of a standard grid.
    pub fn tower(grid: &GridSpec) -> Result<Self> {
        if !grid.is_standard() {
            return Err(Error::config("the tower sequence lives on the standard grid"));
        }
        let mut b = CoeffSequence::zeros(grid);
        for k in grid.coarsest_level()..grid.fine_level() {
            let cube = grid.cube(k, [0, 0])?;
            b.coeffs.set_cube(&cube, 1, volume(k, grid.n()).sqrt())?;
        }
        Ok(b)
    }

    /// Uniform random coefficients on `D(n0)`, scaled to unit BMO norm.
    pub fn random_window(grid: &GridSpec, n0: i32, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = CoeffSequence::zeros(grid);
        for cube in grid.window_family(n0)? {
            if cube.level >= grid.fine_level() {
                continue;
            }
            for eta in 1..=num_patterns(grid.n()) as u8 {
                b.coeffs.set_cube(&cube, eta, rng.gen_range(-1.0..=1.0))?;
            }
        }
        let norm = b.bmo_norm();
        Ok(if norm > 0.0 { b.scale(1.0 / norm) } else { b })
    }

    fn energies(&self, skip: impl Fn(i32, usize) -> bool) -> Vec<Vec<f64>> {
        let grid = self.grid();
        let p = num_patterns(grid.n());
        let mut out: Vec<Vec<f64>> = Vec::new();
        let mut below = vec![0.0; grid.level_geom(grid.fine_level()).num_cubes(grid.n())];
        for k in (grid.coarsest_level()..grid.fine_level()).rev() {
            let level = self.coeffs.level(k);
            let mut s: Vec<f64> = (0..level.len() / p)
                .map(|q| if skip(k, q) { 0.0 } else { level[q * p..(q + 1) * p].iter().map(|v| v * v).sum() })
                .collect();
            for_each_child(grid, k, |q, _, c| s[q] += below[c]);
            below = s.clone();
            out.push(s);
        }
        out.reverse();
        out
    }

    fn sup_density(&self, sums: &[Vec<f64>]) -> f64 {
        let grid = self.grid();
        sums.iter()
            .zip(grid.coarsest_level()..)
            .map(|(s, k)| s.iter().fold(0.0f64, |a, v| a.max(v / volume(k, grid.n()))))
            .fold(0.0, f64::max)
    }

    /// `sup_Q (|Q|^{-1} sum_{I in D(Q)} |b_I|^2)^{1/2}`.
    pub fn bmo_norm(&self) -> f64 {
        self.sup_density(&self.energies(|_, _| false)).sqrt()
    }

    /// `sup_Q |Q|^{-1} sum_{I in D(Q), I not in D(N)} |b_I|^2`.
    pub fn cmo_tail(&self, big_n: i32) -> Result<f64> {
        let grid = self.grid().clone();
        if big_n < 0 || big_n > grid.fine_level().min(grid.window_exp()) {
            return Err(Error::config(format!("N = {big_n} outside the representable range")));
        }
        let sums = self.energies(|k, q| grid.in_window_family(&grid.cube_local(k, grid.unlinear_local(k, q)), big_n));
        Ok(self.sup_density(&sums))
    }

    /// Carleson embedding check: returns `(lhs, rhs)` with
    /// `lhs = (sum |b_Q|^2 |<f>_Q|^p)^{1/p}` and `rhs = ||b||_BMO^{2/p} p' ||f||_p`.
    pub fn carleson_sides(&self, f: &MeshFunction, p: f64) -> Result<(f64, f64)> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::Domain(format!("Carleson check needs 1 < p < inf, got {p}")));
        }
        let f = f.regrid(self.grid())?;
        let grid = self.grid();
        let pyr = Pyramid::new(&f);
        let np = num_patterns(grid.n());
        let mut lhs = 0.0;
        for k in grid.coarsest_level()..grid.fine_level() {
            let level = self.coeffs.level(k);
            for (q, avg) in pyr.averages(k).into_iter().enumerate() {
                let a: f64 = level[q * np..(q + 1) * np].iter().map(|v| v * v).sum();
                lhs += a * avg.abs().powf(p);
            }
        }
        let a = self.bmo_norm().powi(2);
        let pp = p / (p - 1.0);
        let rhs = a.powf(1.0 / p) * pp * lp_norm(&f, p, &MeasureSpec::Lebesgue)?;
        Ok((lhs.powf(1.0 / p), rhs))
    }
}

/// `Pi_b`, `Pi_b^{*1}` or `Pi_b^{*2}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParaproductKind {
    Pi,
    Adjoint1,
    Adjoint2,
}

/// Sum over levels of per-cube constants, evaluated on the cells.
fn push_down(grid: &GridSpec, per_level: Vec<Vec<f64>>) -> Result<MeshFunction> {
    let mut acc = per_level[0].clone();
    for (i, k) in (grid.coarsest_level()..grid.fine_level()).enumerate() {
        let mut next = per_level.get(i + 1).cloned().unwrap_or_else(|| vec![0.0; grid.num_cells()]);
        for_each_child(grid, k, |q, _, c| next[c] += acc[q]);
        acc = next;
    }
    MeshFunction::from_values(grid, acc)
}

pub fn apply_paraproduct(
    b: &CoeffSequence,
    kind: ParaproductKind,
    f1: &MeshFunction,
    f2: &MeshFunction,
) -> Result<MeshFunction> {
    let grid = b.grid();
    let f1 = f1.regrid(grid)?;
    let f2 = f2.regrid(grid)?;
    let np = num_patterns(grid.n());
    let n = grid.n();
    match kind {
        ParaproductKind::Pi => {
            let p1 = Pyramid::new(&f1);
            let p2 = Pyramid::new(&f2);
            let mut out = HaarCoeffs::zeros(grid);
            for k in grid.coarsest_level()..grid.fine_level() {
                let (a1, a2) = (p1.averages(k), p2.averages(k));
                let bl = b.coeffs.level(k);
                for (i, v) in out.level_mut(k).iter_mut().enumerate() {
                    *v = bl[i] * a1[i / np] * a2[i / np];
                }
            }
            reconstruct(&out, None)
        }
        ParaproductKind::Adjoint1 | ParaproductKind::Adjoint2 => {
            let (osc, avg) = if kind == ParaproductKind::Adjoint1 { (&f1, &f2) } else { (&f2, &f1) };
            let h = expand(osc).coeffs;
            let pa = Pyramid::new(avg);
            let per_level = (grid.coarsest_level()..grid.fine_level())
                .map(|k| {
                    let bl = b.coeffs.level(k);
                    let hl = h.level(k);
                    let inv = 1.0 / volume(k, n);
                    pa.averages(k)
                        .into_iter()
                        .enumerate()
                        .map(|(q, a)| {
                            let s: f64 = (q * np..(q + 1) * np).map(|i| bl[i] * hl[i]).sum();
                            s * a * inv
                        })
                        .collect()
                })
                .collect();
            push_down(grid, per_level)
        }
    }
}
