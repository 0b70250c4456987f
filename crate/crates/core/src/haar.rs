//! Haar functions, expansion and reconstruction, martingale differences,
//! conditional expectations, square functions and the projections `P_N`.
//!
//! Averages always use the full measure of a cube, with `f` extended by zero
//! outside the window; this keeps the telescoping identities exact for
//! clipped cubes of shifted grids.

use crate::error::{Error, Result};
use crate::grid::{DyadicCube, GridSpec};
use crate::mesh::{cell_coords, MeshFunction};

/// Number of cancellative sign patterns, `2^n - 1`.
pub fn num_patterns(n: usize) -> usize {
    (1 << n) - 1
}

/// Sign of the child `c` (bit `d` set = upper half in dimension `d`) for pattern `eta`.
pub fn child_sign(eta: u8, c: usize) -> f64 {
    if (eta as usize & c).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `|Q|^{-1/2}` for a cube of the given level.
pub fn inv_sqrt_volume(level: i32, n: usize) -> f64 {
    let e = level * n as i32;
    if e % 2 == 0 {
        2f64.powi(e / 2)
    } else {
        2f64.powi(e / 2) * if e > 0 { std::f64::consts::SQRT_2 } else { std::f64::consts::FRAC_1_SQRT_2 }
    }
}

/// Child lookup table of one level: for each dimension and local index, the two
/// children (absent when outside the window).
pub(crate) struct ChildTable {
    pub per_dim: [Vec<[Option<usize>; 2]>; 2],
}

pub(crate) fn child_table(grid: &GridSpec, level: i32) -> ChildTable {
    let g = grid.level_geom(level);
    let mut per_dim = [Vec::new(), Vec::new()];
    for (d, table) in per_dim.iter_mut().enumerate().take(grid.n()) {
        *table = (0..g.count[d])
            .map(|j| [grid.child_local(level, d, j, 0), grid.child_local(level, d, j, 1)])
            .collect();
    }
    ChildTable { per_dim }
}

/// Visit every (parent, child-pattern, child) triple of a level.
pub(crate) fn for_each_child(grid: &GridSpec, level: i32, mut f: impl FnMut(usize, usize, usize)) {
    let n = grid.n();
    let t = child_table(grid, level);
    let g = grid.level_geom(level);
    let gc = grid.level_geom(level + 1);
    if n == 1 {
        for (j, kids) in t.per_dim[0].iter().enumerate() {
            for (c, kid) in kids.iter().enumerate() {
                if let Some(k) = kid {
                    f(j, c, *k);
                }
            }
        }
    } else {
        for j1 in 0..g.count[1] {
            for j0 in 0..g.count[0] {
                let parent = j1 * g.count[0] + j0;
                for c in 0..4 {
                    let (a, b) = (t.per_dim[0][j0][c & 1], t.per_dim[1][j1][c >> 1]);
                    if let (Some(a), Some(b)) = (a, b) {
                        f(parent, c, b * gc.count[0] + a);
                    }
                }
            }
        }
    }
}

/// Cell sums of `f` over every cube of every level.
#[derive(Clone, Debug)]
pub struct Pyramid {
    grid: GridSpec,
    sums: Vec<Vec<f64>>,
}

impl Pyramid {
    pub fn new(f: &MeshFunction) -> Self {
        let grid = f.grid().clone();
        let nlev = grid.levels().len();
        let mut sums = vec![Vec::new(); nlev];
        sums[nlev - 1] = f.values().to_vec();
        for k in (grid.coarsest_level()..grid.fine_level()).rev() {
            let idx = (k + grid.window_exp()) as usize;
            let mut s = vec![0.0; grid.level_geom(k).num_cubes(grid.n())];
            let child = &sums[idx + 1];
            for_each_child(&grid, k, |p, _, c| s[p] += child[c]);
            sums[idx] = s;
        }
        Pyramid { grid, sums }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Sums of cell values per cube of `level`.
    pub fn sums(&self, level: i32) -> &[f64] {
        &self.sums[(level + self.grid.window_exp()) as usize]
    }

    /// `<f>_Q` with the full measure of `Q`.
    pub fn average(&self, level: i32, local: usize) -> f64 {
        self.sums(level)[local] / cells_in_cube(&self.grid, level)
    }

    pub fn averages(&self, level: i32) -> Vec<f64> {
        let c = cells_in_cube(&self.grid, level);
        self.sums(level).iter().map(|s| s / c).collect()
    }

    /// `<f>_Q` for a cube of this grid.
    pub fn cube_average(&self, cube: &DyadicCube) -> Result<f64> {
        let j = self
            .grid
            .local_of(cube)
            .ok_or_else(|| Error::GridMismatch("cube does not belong to this grid".into()))?;
        Ok(self.average(cube.level, self.grid.linear_local(cube.level, j)))
    }
}

pub(crate) fn cells_in_cube(grid: &GridSpec, level: i32) -> f64 {
    (grid.level_geom(level).side as f64).powi(grid.n() as i32)
}

/// Haar coefficients `<f, h_I^eta>`, stored densely per level for levels `-M..L-1`.
#[derive(Clone, Debug, PartialEq)]
pub struct HaarCoeffs {
    grid: GridSpec,
    data: Vec<Vec<f64>>,
}

impl HaarCoeffs {
    pub fn zeros(grid: &GridSpec) -> Self {
        let p = num_patterns(grid.n());
        let data = (grid.coarsest_level()..grid.fine_level())
            .map(|k| vec![0.0; grid.level_geom(k).num_cubes(grid.n()) * p])
            .collect();
        HaarCoeffs { grid: grid.clone(), data }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn slot(&self, level: i32, local: usize, eta: u8) -> (usize, usize) {
        let p = num_patterns(self.grid.n());
        ((level + self.grid.window_exp()) as usize, local * p + eta as usize - 1)
    }

    pub fn has_level(&self, level: i32) -> bool {
        level >= self.grid.coarsest_level() && level < self.grid.fine_level()
    }

    pub fn get(&self, level: i32, local: usize, eta: u8) -> f64 {
        let (a, b) = self.slot(level, local, eta);
        self.data[a][b]
    }

    pub fn set(&mut self, level: i32, local: usize, eta: u8, v: f64) {
        let (a, b) = self.slot(level, local, eta);
        self.data[a][b] = v;
    }

    pub fn add(&mut self, level: i32, local: usize, eta: u8, v: f64) {
        let (a, b) = self.slot(level, local, eta);
        self.data[a][b] += v;
    }

    /// Coefficient of a cube, zero when the cube is absent.
    pub fn get_cube(&self, cube: &DyadicCube, eta: u8) -> f64 {
        if !self.has_level(cube.level) || eta == 0 || eta as usize > num_patterns(self.grid.n()) {
            return 0.0;
        }
        match self.grid.local_of(cube) {
            Some(j) => self.get(cube.level, self.grid.linear_local(cube.level, j), eta),
            None => 0.0,
        }
    }

    pub fn set_cube(&mut self, cube: &DyadicCube, eta: u8, v: f64) -> Result<()> {
        if !self.has_level(cube.level) {
            return Err(Error::resolution(format!("no Haar functions at level {}", cube.level)));
        }
        let j = self
            .grid
            .local_of(cube)
            .ok_or_else(|| Error::GridMismatch("cube does not belong to this grid".into()))?;
        self.set(cube.level, self.grid.linear_local(cube.level, j), eta, v);
        Ok(())
    }

    /// Coefficients of one level, cube-major then pattern.
    pub fn level(&self, level: i32) -> &[f64] {
        &self.data[(level + self.grid.window_exp()) as usize]
    }

    pub fn level_mut(&mut self, level: i32) -> &mut [f64] {
        let i = (level + self.grid.window_exp()) as usize;
        &mut self.data[i]
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().flatten().map(|c| c * c).sum()
    }

    /// Nonzero entries as `(cube, eta, value)`.
    pub fn nonzero(&self) -> Vec<(DyadicCube, u8, f64)> {
        let p = num_patterns(self.grid.n());
        let mut out = Vec::new();
        for k in self.grid.coarsest_level()..self.grid.fine_level() {
            for (i, &v) in self.level(k).iter().enumerate() {
                if v != 0.0 {
                    let cube = self.grid.cube_local(k, self.grid.unlinear_local(k, i / p));
                    out.push((cube, (i % p + 1) as u8, v));
                }
            }
        }
        out
    }

    /// Zero every coefficient of a cube in `D(N)` (what remains is `P_N^perp`).
    pub fn remove_window_family(&mut self, big_n: i32) -> Result<()> {
        let p = num_patterns(self.grid.n());
        for (k, ranges) in self.grid.window_family_ranges(big_n)? {
            if !self.has_level(k) {
                continue;
            }
            let count0 = self.grid.level_geom(k).count[0];
            let data = self.level_mut(k);
            for j1 in ranges[1].clone() {
                for j0 in ranges[0].clone() {
                    let base = (j1 * count0 + j0) * p;
                    data[base..base + p].iter_mut().for_each(|c| *c = 0.0);
                }
            }
        }
        Ok(())
    }
}

/// Averages on the coarsest level, the part of `f` not carried by Haar coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanData {
    grid: GridSpec,
    pub averages: Vec<f64>,
}

impl MeanData {
    pub fn zeros(grid: &GridSpec) -> Self {
        let k = grid.coarsest_level();
        MeanData { grid: grid.clone(), averages: vec![0.0; grid.level_geom(k).num_cubes(grid.n())] }
    }

    /// `||E_{-M} f||_2^2` over the full coarsest cubes.
    pub fn energy(&self) -> f64 {
        let vol = 2f64.powi(self.grid.window_exp() * self.grid.n() as i32);
        self.averages.iter().map(|a| a * a * vol).sum()
    }

    pub fn to_mesh(&self) -> MeshFunction {
        let k = self.grid.coarsest_level();
        let mut vals = vec![self.averages.clone()];
        for level in k..self.grid.fine_level() {
            let prev = vals.last().unwrap();
            let mut next = vec![0.0; self.grid.level_geom(level + 1).num_cubes(self.grid.n())];
            for_each_child(&self.grid, level, |p, _, c| next[c] = prev[p]);
            vals.push(next);
        }
        MeshFunction::from_values(&self.grid, vals.pop().unwrap()).expect("finite averages")
    }
}

#[derive(Clone, Debug)]
pub struct Expansion {
    pub coeffs: HaarCoeffs,
    pub mean: MeanData,
}

pub fn expand(f: &MeshFunction) -> Expansion {
    let pyr = Pyramid::new(f);
    let grid = f.grid().clone();
    let mut coeffs = HaarCoeffs::zeros(&grid);
    let p = num_patterns(grid.n());
    let n = grid.n() as i32;
    for k in grid.coarsest_level()..grid.fine_level() {
        // <f, h_Q^eta> = |Q|^{-1/2} vol * sum_children sign * S(child)
        let factor = inv_sqrt_volume(k, grid.n()) * 2f64.powi(-grid.fine_level() * n);
        let child = pyr.sums(k + 1);
        let out = coeffs.level_mut(k);
        for_each_child(&grid, k, |q, c, ci| {
            for eta in 1..=p {
                out[q * p + eta - 1] += child_sign(eta as u8, c) * child[ci];
            }
        });
        out.iter_mut().for_each(|v| *v *= factor);
    }
    let mean = MeanData { grid: grid.clone(), averages: pyr.averages(grid.coarsest_level()) };
    Expansion { coeffs, mean }
}

/// Inverse of [`expand`]; without mean data the coarsest averages are taken as zero.
pub fn reconstruct(coeffs: &HaarCoeffs, mean: Option<&MeanData>) -> Result<MeshFunction> {
    let grid = coeffs.grid().clone();
    if let Some(m) = mean {
        if m.grid != grid {
            return Err(Error::GridMismatch("mean data from another grid".into()));
        }
    }
    let p = num_patterns(grid.n());
    let mut cur = match mean {
        Some(m) => m.averages.clone(),
        None => MeanData::zeros(&grid).averages,
    };
    for k in grid.coarsest_level()..grid.fine_level() {
        let scale = inv_sqrt_volume(k, grid.n());
        let level = coeffs.level(k);
        let mut next = vec![0.0; grid.level_geom(k + 1).num_cubes(grid.n())];
        for_each_child(&grid, k, |q, c, ci| {
            let mut v = 0.0;
            for eta in 1..=p {
                v += child_sign(eta as u8, c) * level[q * p + eta - 1];
            }
            next[ci] = cur[q] + scale * v;
        });
        cur = next;
    }
    MeshFunction::from_values(&grid, cur)
}

/// `h_I^eta` as a mesh function; `eta = 0` gives `|I|^{-1/2} 1_I`.
pub fn haar_eval(grid: &GridSpec, cube: &DyadicCube, eta: u8) -> Result<MeshFunction> {
    if cube.n != grid.n() {
        return Err(Error::GridMismatch("cube dimension differs from grid".into()));
    }
    if eta as usize > num_patterns(grid.n()) {
        return Err(Error::config(format!("sign pattern {eta} invalid in dimension {}", grid.n())));
    }
    let min_level = if eta == 0 { grid.fine_level() } else { grid.fine_level() - 1 };
    if cube.level > min_level {
        return Err(Error::resolution(format!(
            "cube of level {} cannot carry a Haar function with pattern {eta} at L = {}",
            cube.level,
            grid.fine_level()
        )));
    }
    let amp = inv_sqrt_volume(cube.level, grid.n());
    let (lo, hi) = grid.cell_span(cube);
    let half = (hi[0] - lo[0]) / 2;
    let mut f = MeshFunction::zeros(grid);
    let n = grid.n();
    for (i, v) in f.values_mut().iter_mut().enumerate() {
        let c = cell_coords(grid, i);
        if (0..n).all(|d| lo[d] <= c[d] && c[d] < hi[d]) {
            let mut child = 0usize;
            for d in 0..n {
                if c[d] - lo[d] >= half {
                    child |= 1 << d;
                }
            }
            *v = amp * if eta == 0 { 1.0 } else { child_sign(eta, child) };
        }
    }
    Ok(f)
}

/// Cell-wise values of `<f>_Q` for the level-`k` cube containing each cell.
fn cellwise_averages(pyr: &Pyramid, level: i32) -> Vec<f64> {
    let grid = pyr.grid();
    let mut cur = pyr.averages(level);
    for k in level..grid.fine_level() {
        let mut next = vec![0.0; grid.level_geom(k + 1).num_cubes(grid.n())];
        for_each_child(grid, k, |p, _, c| next[c] = cur[p]);
        cur = next;
    }
    cur
}

/// `E_{2^{-k}} f = sum over level-k cubes of <f>_Q 1_Q`.
pub fn expectation(f: &MeshFunction, level: i32) -> Result<MeshFunction> {
    check_level(f.grid(), level, f.grid().fine_level())?;
    MeshFunction::from_values(f.grid(), cellwise_averages(&Pyramid::new(f), level))
}

/// `sum over level-k cubes of Delta_Q f = E_{k+1} f - E_k f`.
pub fn martingale_difference(f: &MeshFunction, level: i32) -> Result<MeshFunction> {
    check_level(f.grid(), level, f.grid().fine_level() - 1)?;
    let pyr = Pyramid::new(f);
    Ok(level_difference(&pyr, level, f.grid()))
}

fn level_difference(pyr: &Pyramid, level: i32, grid: &GridSpec) -> MeshFunction {
    let fine = cellwise_averages(pyr, level + 1);
    let coarse = cellwise_averages(pyr, level);
    let v = fine.iter().zip(&coarse).map(|(a, b)| a - b).collect();
    MeshFunction::from_values(grid, v).expect("finite")
}

fn check_level(grid: &GridSpec, level: i32, max: i32) -> Result<()> {
    if level < grid.coarsest_level() || level > max {
        return Err(Error::resolution(format!(
            "level {level} outside [{}, {max}]",
            grid.coarsest_level()
        )));
    }
    Ok(())
}

/// `Delta_Q^k f`: martingale differences of the `k`-th generation descendants of `Q`.
pub fn martingale_block(f: &MeshFunction, cube: &DyadicCube, k: i32) -> Result<MeshFunction> {
    let grid = f.grid();
    if k < 0 {
        return Err(Error::config("generation k must be nonnegative"));
    }
    if cube.level + k + 1 > grid.fine_level() {
        return Err(Error::resolution(format!(
            "level {} + {k} + 1 exceeds L = {}",
            cube.level,
            grid.fine_level()
        )));
    }
    if grid.local_of(cube).is_none() {
        return Err(Error::GridMismatch("cube does not belong to the function's grid".into()));
    }
    let pyr = Pyramid::new(f);
    let lev = cube.level + k;
    let (lo, hi) = grid.cell_span(cube);
    let mut out = MeshFunction::zeros(grid);
    let n = grid.n();
    let gc = grid.level_geom(lev);
    let gf = grid.level_geom(lev + 1);
    let coarse = pyr.averages(lev);
    let fine = pyr.averages(lev + 1);
    for (i, v) in out.values_mut().iter_mut().enumerate() {
        let c = cell_coords(grid, i);
        if !(0..n).all(|d| lo[d] <= c[d] && c[d] < hi[d]) {
            continue;
        }
        let mut jc = [0usize; 2];
        let mut jf = [0usize; 2];
        for d in 0..n {
            jc[d] = ((c[d] - gc.start0[d]) / gc.side) as usize;
            jf[d] = ((c[d] - gf.start0[d]) / gf.side) as usize;
        }
        *v = fine[grid.linear_local(lev + 1, jf)] - coarse[grid.linear_local(lev, jc)];
    }
    Ok(out)
}

/// `S^k f = (sum_Q |Delta_Q^k f|^2)^{1/2}` over the cubes of the grid.
pub fn square_function(f: &MeshFunction, k: i32) -> Result<MeshFunction> {
    let grid = f.grid();
    let top = grid.fine_level() - 1;
    if k < 0 || grid.coarsest_level() + k > top {
        return Err(Error::resolution(format!("generation {k} exceeds the level range")));
    }
    let pyr = Pyramid::new(f);
    let mut acc = vec![0.0; grid.num_cells()];
    for j in (grid.coarsest_level() + k)..=top {
        let d = level_difference(&pyr, j, grid);
        for (a, v) in acc.iter_mut().zip(d.values()) {
            *a += v * v;
        }
    }
    MeshFunction::from_values(grid, acc.into_iter().map(f64::sqrt).collect())
}

/// `(P_N f, P_N^perp f)` with `P_N f = sum over Q in D(N) of Delta_Q f`.
pub fn project(f: &MeshFunction, big_n: i32) -> Result<(MeshFunction, MeshFunction)> {
    let grid = f.grid();
    check_projection_range(grid, big_n)?;
    let pyr = Pyramid::new(f);
    let base = grid.coarsest_level();
    let mut acc: Vec<Vec<f64>> =
        grid.levels().map(|k| vec![0.0; grid.level_geom(k).num_cubes(grid.n())]).collect();
    for (k, ranges) in grid.window_family_ranges(big_n)? {
        if k >= grid.fine_level() {
            continue;
        }
        let parent = pyr.averages(k);
        let child = pyr.averages(k + 1);
        let count0 = grid.level_geom(k).count[0];
        let mut member = vec![false; parent.len()];
        for j1 in ranges[1].clone() {
            for j0 in ranges[0].clone() {
                member[j1 * count0 + j0] = true;
            }
        }
        let target = &mut acc[(k + 1 - base) as usize];
        for_each_child(grid, k, |p, _, c| {
            if member[p] {
                target[c] += child[c] - parent[p];
            }
        });
    }
    for k in base..grid.fine_level() {
        let (upper, lower) = acc.split_at_mut((k + 1 - base) as usize);
        let parent = &upper[(k - base) as usize];
        let child = &mut lower[0];
        for_each_child(grid, k, |p, _, c| child[c] += parent[p]);
    }
    let p = MeshFunction::from_values(grid, acc.pop().unwrap())?;
    let perp = f.sub(&p)?;
    Ok((p, perp))
}

pub(crate) fn check_projection_range(grid: &GridSpec, big_n: i32) -> Result<()> {
    let top = grid.fine_level().min(grid.window_exp()) - 1;
    if big_n < 0 || big_n > top {
        return Err(Error::config(format!("N = {big_n} outside [0, min(L, M) - 1] = [0, {top}]")));
    }
    Ok(())
}
