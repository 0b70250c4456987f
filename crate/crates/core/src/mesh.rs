//! Piecewise-constant functions on the finest cells of a grid window.

use serde::Serialize;

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::grid::{DyadicCube, GridSpec};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeshFunction {
    #[serde(skip)]
    grid: GridSpec,
    values: Vec<f64>,
}

impl MeshFunction {
    pub fn zeros(grid: &GridSpec) -> Self {
        MeshFunction { grid: grid.clone(), values: vec![0.0; grid.num_cells()] }
    }

    pub fn constant(grid: &GridSpec, c: f64) -> Self {
        MeshFunction { grid: grid.clone(), values: vec![c; grid.num_cells()] }
    }

    pub fn from_values(grid: &GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_cells() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                grid.num_cells(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("mesh values must be finite".into()));
        }
        Ok(MeshFunction { grid: grid.clone(), values })
    }

    /// Sample `f` at cell centres.
    pub fn from_fn(grid: &GridSpec, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.num_cells()).map(|i| f(cell_center(grid, i))).collect();
        MeshFunction { grid: grid.clone(), values }
    }

    /// `1_Q` for a cube of any grid sharing this mesh, clipped to the window.
    pub fn cube_indicator(grid: &GridSpec, cube: &DyadicCube) -> Self {
        let mut f = MeshFunction::zeros(grid);
        f.fill_cube(cube, 1.0);
        f
    }

    /// Indicator of the box `[lo, hi)` (cells whose centre lies inside).
    pub fn box_indicator(grid: &GridSpec, lo: [f64; 2], hi: [f64; 2]) -> Self {
        let n = grid.n();
        MeshFunction::from_fn(grid, |x| {
            let inside = (0..n).all(|d| lo[d] <= x[d] && x[d] < hi[d]);
            inside as u8 as f64
        })
    }

    pub fn fill_cube(&mut self, cube: &DyadicCube, v: f64) {
        let (lo, hi) = self.grid.cell_span(cube);
        let w = self.grid.width() as i64;
        let clamp = |x: i64| x.clamp(0, w) as usize;
        if self.grid.n() == 1 {
            for c in clamp(lo[0])..clamp(hi[0]) {
                self.values[c] = v;
            }
        } else {
            let wu = w as usize;
            for c1 in clamp(lo[1])..clamp(hi[1]) {
                for c0 in clamp(lo[0])..clamp(hi[0]) {
                    self.values[c1 * wu + c0] = v;
                }
            }
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same values on another grid with the same cells.
    pub fn regrid(&self, grid: &GridSpec) -> Result<Self> {
        self.grid.check_mesh(grid)?;
        Ok(MeshFunction { grid: grid.clone(), values: self.values.clone() })
    }

    pub fn check_same(&self, other: &MeshFunction) -> Result<()> {
        self.grid.check_mesh(&other.grid)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        MeshFunction { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &MeshFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(MeshFunction { grid: self.grid.clone(), values })
    }

    pub fn add(&self, other: &MeshFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &MeshFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &MeshFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &MeshFunction) -> Result<()> {
        self.check_same(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// `<f, g> = integral of f g`.
    pub fn inner(&self, other: &MeshFunction) -> Result<f64> {
        self.check_same(other)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &MeshFunction) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Cells with nonzero value.
    pub fn support(&self) -> Vec<usize> {
        self.values.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i).collect()
    }

    pub fn cell_center(&self, i: usize) -> [f64; 2] {
        cell_center(&self.grid, i)
    }
}

/// Cell coordinates (dimension 0 fastest).
pub fn cell_coords(grid: &GridSpec, i: usize) -> [i64; 2] {
    let w = grid.width();
    if grid.n() == 1 {
        [i as i64, 0]
    } else {
        [(i % w) as i64, (i / w) as i64]
    }
}

pub fn cell_index(grid: &GridSpec, c: [i64; 2]) -> Option<usize> {
    let w = grid.width() as i64;
    if (0..grid.n()).any(|d| c[d] < 0 || c[d] >= w) {
        return None;
    }
    Some(if grid.n() == 1 { c[0] as usize } else { (c[1] * w + c[0]) as usize })
}

pub fn cell_center(grid: &GridSpec, i: usize) -> [f64; 2] {
    let c = cell_coords(grid, i);
    let h = grid.cell_side();
    let origin = 2f64.powi(grid.window_exp());
    let mut x = [0.0; 2];
    for d in 0..grid.n() {
        x[d] = -origin + (c[d] as f64 + 0.5) * h;
    }
    x
}

/// Exact lower corner of a cell.
pub fn cell_corner(grid: &GridSpec, i: usize) -> [Dyadic; 2] {
    let c = cell_coords(grid, i);
    let mut x = [Dyadic::ZERO; 2];
    for d in 0..grid.n() {
        x[d] = grid.cell_coord(c[d]);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn indicator_and_integral() {
        let g = make_grid(1, 3, 2, None).unwrap();
        let q = g.cube(0, [0, 0]).unwrap();
        let f = MeshFunction::cube_indicator(&g, &q);
        assert_eq!(f.integral(), 1.0);
        let b = MeshFunction::box_indicator(&g, [0.0, 0.0], [1.0, 0.0]);
        assert_eq!(f, b);
        assert_eq!(f.support().len(), 8);
    }

    #[test]
    fn two_dim_layout() {
        let g = make_grid(2, 1, 1, None).unwrap();
        assert_eq!(g.num_cells(), 64);
        let x = cell_center(&g, 9);
        assert_eq!(x, [-2.0 + 0.75, -2.0 + 0.75]);
        assert_eq!(cell_index(&g, cell_coords(&g, 37)), Some(37));
        let q = g.cube(0, [0, -1]).unwrap();
        let f = MeshFunction::cube_indicator(&g, &q);
        assert_eq!(f.integral(), 1.0);
    }

    #[test]
    fn rejects_bad_values() {
        let g = make_grid(1, 1, 1, None).unwrap();
        assert!(MeshFunction::from_values(&g, vec![0.0; 3]).is_err());
        assert!(MeshFunction::from_values(&g, vec![f64::NAN; 8]).is_err());
    }
}
