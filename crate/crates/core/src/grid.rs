//! Dyadic grids on the window `[-2^M, 2^M)^n`, optionally randomly shifted.
//!
//! All geometry is kept in integer cell units (cells have side `2^{-L}`) and
//! exposed through [`Dyadic`] values, so no floating point enters here.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};

/// Per-level cube layout in cell units.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LevelGeom {
    pub level: i32,
    /// Side length in cells.
    pub side: i64,
    /// Shift of the level's lattice, `0 <= offset < side`.
    pub offset: [i64; 2],
    /// Cell coordinate of the first (possibly clipped) cube.
    pub start0: [i64; 2],
    pub count: [usize; 2],
}

impl LevelGeom {
    pub fn num_cubes(&self, n: usize) -> usize {
        self.count[..n].iter().product()
    }

    pub fn start(&self, d: usize, j: usize) -> i64 {
        self.start0[d] + j as i64 * self.side
    }
}

#[derive(Clone, Debug)]
pub struct GridSpec {
    n: usize,
    l: i32,
    m: i32,
    seed: Option<u64>,
    omega: Vec<[u8; 2]>,
    geom: Vec<LevelGeom>,
}

impl PartialEq for GridSpec {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.l == other.l && self.m == other.m && self.omega == other.omega
    }
}

/// Build a grid. `seed = None` gives the standard grid.
pub fn make_grid(n: usize, l: i32, m: i32, seed: Option<u64>) -> Result<GridSpec> {
    if !(1..=2).contains(&n) {
        return Err(Error::config(format!("dimension {n} not supported (1 or 2)")));
    }
    if l < 0 || m < 1 || l + m > 30 {
        return Err(Error::config(format!(
            "levels out of range: need L >= 0, M >= 1, L + M <= 30 (got L={l}, M={m})"
        )));
    }
    let nlev = (l + m) as usize;
    let mut omega = vec![[0u8; 2]; nlev];
    if let Some(s) = seed {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        for w in omega.iter_mut() {
            for slot in w.iter_mut().take(n) {
                *slot = rng.gen_range(0..2u8);
            }
        }
    }
    Ok(GridSpec::from_parts(n, l, m, seed, omega))
}

impl GridSpec {
    fn from_parts(n: usize, l: i32, m: i32, seed: Option<u64>, omega: Vec<[u8; 2]>) -> Self {
        let w = 1i64 << (l + m + 1);
        let mut geom = Vec::with_capacity((l + m + 1) as usize);
        for k in -m..=l {
            let side = 1i64 << (l - k);
            let mut offset = [0i64; 2];
            for (d, o) in offset.iter_mut().enumerate().take(n) {
                for j in (k + 1)..=l {
                    let bit = omega[(j + m - 1) as usize][d] as i64;
                    *o += bit << (l - j);
                }
            }
            let mut start0 = [0i64; 2];
            let mut count = [1usize; 2];
            for d in 0..n {
                if offset[d] > 0 {
                    start0[d] = offset[d] - side;
                    count[d] = (w / side) as usize + 1;
                } else {
                    count[d] = (w / side) as usize;
                }
            }
            geom.push(LevelGeom { level: k, side, offset, start0, count });
        }
        GridSpec { n, l, m, seed, omega, geom }
    }

    /// Same grid geometry with explicit shift bits; bits outside `(-M, L]` are ignored.
    pub fn with_omega(n: usize, l: i32, m: i32, omega: &[[u8; 2]]) -> Result<Self> {
        let base = make_grid(n, l, m, None)?;
        if omega.len() != base.omega.len() {
            return Err(Error::config("shift vector length must be L + M"));
        }
        Ok(GridSpec::from_parts(n, l, m, None, omega.to_vec()))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn fine_level(&self) -> i32 {
        self.l
    }

    pub fn window_exp(&self) -> i32 {
        self.m
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Shift bits of level `j`, zero outside the represented band.
    pub fn omega(&self, j: i32) -> [u8; 2] {
        if j <= -self.m || j > self.l {
            [0, 0]
        } else {
            self.omega[(j + self.m - 1) as usize]
        }
    }

    pub fn is_standard(&self) -> bool {
        self.omega.iter().all(|w| w == &[0, 0])
    }

    /// Cells per side of the window.
    pub fn width(&self) -> usize {
        1usize << (self.l + self.m + 1)
    }

    pub fn num_cells(&self) -> usize {
        self.width().pow(self.n as u32)
    }

    pub fn cell_side(&self) -> f64 {
        2f64.powi(-self.l)
    }

    pub fn cell_volume(&self) -> f64 {
        2f64.powi(-self.l * self.n as i32)
    }

    pub fn coarsest_level(&self) -> i32 {
        -self.m
    }

    pub fn level_geom(&self, k: i32) -> &LevelGeom {
        &self.geom[(k + self.m) as usize]
    }

    pub fn levels(&self) -> Range<i32> {
        -self.m..self.l + 1
    }

    /// Whether two grids share cells (dimension, finest level, window).
    pub fn same_mesh(&self, other: &GridSpec) -> bool {
        self.n == other.n && self.l == other.l && self.m == other.m
    }

    pub fn check_mesh(&self, other: &GridSpec) -> Result<()> {
        if self.same_mesh(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "(n={}, L={}, M={}) vs (n={}, L={}, M={})",
                self.n, self.l, self.m, other.n, other.l, other.m
            )))
        }
    }

    /// Physical coordinate of a cell-unit position.
    pub fn cell_coord(&self, c: i64) -> Dyadic {
        Dyadic::from_int(c).scale_pow2(-self.l) - Dyadic::pow2(self.m)
    }

    /// Cell-unit position of a physical dyadic coordinate, if aligned.
    pub fn coord_cell(&self, x: Dyadic) -> Option<i64> {
        let c = (x + Dyadic::pow2(self.m)).scale_pow2(self.l);
        (c.exponent() == 0).then(|| c.numerator() as i64)
    }

    pub fn cube_local(&self, level: i32, j: [usize; 2]) -> DyadicCube {
        let g = self.level_geom(level);
        let mut index = [0i64; 2];
        let mut corner = [Dyadic::ZERO; 2];
        let mut clipped = false;
        let w = self.width() as i64;
        for d in 0..self.n {
            let start = g.start(d, j[d]);
            let shifted = (g.offset[d] > 0) as i64;
            let base = if level >= -self.m { 1i64 << (self.m + level) } else { 0 };
            index[d] = j[d] as i64 - shifted - base;
            corner[d] = self.cell_coord(start);
            if start < 0 || start + g.side > w {
                clipped = true;
            }
        }
        DyadicCube { n: self.n, level, index, corner, clipped }
    }

    /// Cube by level and integer index `m` (corner `2^{-k} m + offset`).
    pub fn cube(&self, level: i32, index: [i64; 2]) -> Result<DyadicCube> {
        if level < -self.m || level > self.l {
            return Err(Error::resolution(format!("level {level} outside [{}, {}]", -self.m, self.l)));
        }
        let j = self
            .local_from_index(level, index)
            .ok_or_else(|| Error::config(format!("cube {index:?} at level {level} misses the window")))?;
        Ok(self.cube_local(level, j))
    }

    fn local_from_index(&self, level: i32, index: [i64; 2]) -> Option<[usize; 2]> {
        let g = self.level_geom(level);
        let mut j = [0usize; 2];
        for d in 0..self.n {
            let shifted = (g.offset[d] > 0) as i64;
            let local = index[d] + shifted + (1i64 << (self.m + level));
            if local < 0 || local >= g.count[d] as i64 {
                return None;
            }
            j[d] = local as usize;
        }
        Some(j)
    }

    /// Local (array) index of a cube of this grid.
    pub fn local_of(&self, cube: &DyadicCube) -> Option<[usize; 2]> {
        if cube.n != self.n || cube.level < -self.m || cube.level > self.l {
            return None;
        }
        let j = self.local_from_index(cube.level, cube.index)?;
        (self.cube_local(cube.level, j) == *cube).then_some(j)
    }

    pub fn linear_local(&self, level: i32, j: [usize; 2]) -> usize {
        let g = self.level_geom(level);
        if self.n == 1 {
            j[0]
        } else {
            j[1] * g.count[0] + j[0]
        }
    }

    pub fn unlinear_local(&self, level: i32, idx: usize) -> [usize; 2] {
        let g = self.level_geom(level);
        if self.n == 1 {
            [idx, 0]
        } else {
            [idx % g.count[0], idx / g.count[0]]
        }
    }

    pub fn cubes_at_level(&self, level: i32) -> Vec<DyadicCube> {
        let g = self.level_geom(level);
        (0..g.num_cubes(self.n))
            .map(|i| self.cube_local(level, self.unlinear_local(level, i)))
            .collect()
    }

    /// Unclipped cell-unit extent `[lo, hi)` of a cube.
    pub fn cell_span(&self, cube: &DyadicCube) -> ([i64; 2], [i64; 2]) {
        let side = 1i64 << (self.l - cube.level);
        let mut lo = [0i64; 2];
        let mut hi = [0i64; 2];
        for d in 0..self.n {
            lo[d] = self.coord_cell(cube.corner[d]).expect("cube corners are cell aligned");
            hi[d] = lo[d] + side;
        }
        (lo, hi)
    }

    /// Cube of the given level containing a cell.
    pub fn cube_containing_cell(&self, level: i32, cell: [i64; 2]) -> DyadicCube {
        let g = self.level_geom(level);
        let mut j = [0usize; 2];
        for d in 0..self.n {
            j[d] = (cell[d] - g.start0[d]).div_euclid(g.side) as usize;
        }
        self.cube_local(level, j)
    }

    /// Local index of the child cube in dimension `d`, `None` when it misses the window.
    pub fn child_local(&self, level: i32, d: usize, j: usize, c: usize) -> Option<usize> {
        let g = self.level_geom(level);
        let h = self.level_geom(level + 1);
        let start = g.start(d, j) + c as i64 * h.side;
        let idx = (start - h.start0[d]) / h.side;
        (idx >= 0 && (idx as usize) < h.count[d]).then_some(idx as usize)
    }

    /// Per-level local index ranges of the window family `D(N)`.
    pub fn window_family_ranges(&self, big_n: i32) -> Result<Vec<(i32, [Range<usize>; 2])>> {
        if big_n < 0 || big_n > self.l.min(self.m) {
            return Err(Error::config(format!(
                "N = {big_n} outside [0, min(L, M)] = [0, {}]",
                self.l.min(self.m)
            )));
        }
        // Work in half-cells so that [-2^{N-1}, 2^{N-1}) is integral for N = 0.
        let w2 = 2 * (self.width() as i64);
        let centre = w2 / 2;
        let half = 1i64 << (big_n + self.l);
        let (blo, bhi) = (centre - half, centre + half);
        let reach = big_n as i64 * (1i64 << (big_n + self.l + 1));
        let mut out = Vec::new();
        for k in (-big_n).max(-self.m)..=big_n.min(self.l) {
            let g = self.level_geom(k);
            let mut ranges = [0..1, 0..1];
            for (d, range) in ranges.iter_mut().enumerate().take(self.n) {
                let s2 = 2 * g.side;
                // cube [a, a + s2) with gap to [blo, bhi) at most `reach`
                let mut first = None;
                let mut last = 0usize;
                for j in 0..g.count[d] {
                    let start = g.start(d, j);
                    if start < 0 || start + g.side > w2 / 2 {
                        continue;
                    }
                    let a = 2 * start;
                    let gap = (blo - (a + s2)).max(a - bhi).max(0);
                    if gap <= reach {
                        first.get_or_insert(j);
                        last = j;
                    }
                }
                *range = match first {
                    Some(f) => f..last + 1,
                    None => 0..0,
                };
            }
            out.push((k, ranges));
        }
        Ok(out)
    }

    /// Exact enumeration of `D(N) = {I : 2^{-N} <= l(I) <= 2^N, rd(I, 2^N II) <= N}`,
    /// restricted to cubes lying inside the window.
    pub fn window_family(&self, big_n: i32) -> Result<Vec<DyadicCube>> {
        let mut out = Vec::new();
        for (k, ranges) in self.window_family_ranges(big_n)? {
            for j1 in ranges[1].clone() {
                for j0 in ranges[0].clone() {
                    out.push(self.cube_local(k, [j0, j1]));
                }
            }
        }
        Ok(out)
    }

    /// Membership test for `D(N)` by the definition.
    pub fn in_window_family(&self, cube: &DyadicCube, big_n: i32) -> bool {
        if cube.clipped {
            return false;
        }
        let side = cube.side();
        if side < Dyadic::pow2(-big_n) || side > Dyadic::pow2(big_n) {
            return false;
        }
        let b = centered_cube(self.n, big_n);
        relative_distance(cube, &b) <= Dyadic::from_int(big_n as i64)
    }

    /// Badness scan over the coarser cubes of this grid lying inside the window.
    pub fn is_good(&self, cube: &DyadicCube, r: i32, delta: f64) -> GoodnessReport {
        let n = self.n as f64;
        let gamma = delta / (2.0 * (2.0 * n + delta));
        let mut truncated = false;
        let mut checked = 0;
        let corner = self.cell_span(cube).0;
        let k = cube.level;
        let mut level = k - r;
        while level >= -self.m {
            let g = self.level_geom(level);
            let anc = self.cube_containing_cell(level, corner);
            let anc_j = self.local_of(&anc).expect("ancestor belongs to grid");
            if anc.clipped {
                truncated = true;
            }
            // cubes farther than `reach` positions are beyond the threshold
            let t = 2.0 * 2f64.powf(-gamma * (k - level) as f64);
            let reach = t.ceil() as i64 + 1;
            let mut lo = [0usize; 2];
            let mut hi = [1usize; 2];
            for d in 0..self.n {
                lo[d] = (anc_j[d] as i64 - reach).max(0) as usize;
                hi[d] = ((anc_j[d] as i64 + reach + 1) as usize).min(g.count[d]);
            }
            checked += 1;
            for j1 in lo[1]..hi[1] {
                for j0 in lo[0]..hi[0] {
                    let big = self.cube_local(level, [j0, j1]);
                    if big.clipped {
                        continue;
                    }
                    let d = cube.boundary_distance(&big);
                    if d.is_zero() || below_threshold(d, k, level, gamma) {
                        return GoodnessReport { good: false, truncated, levels_checked: checked };
                    }
                }
            }
            level -= 1;
        }
        GoodnessReport { good: true, truncated, levels_checked: checked }
    }
}

/// `d <= 2 l(I)^gamma l(I')^{1-gamma}` with `l(I) = 2^{-k}`, `l(I') = 2^{-k'}`.
pub(crate) fn below_threshold(d: Dyadic, k: i32, kp: i32, gamma: f64) -> bool {
    let log_d = (d.numerator() as f64).log2() - d.exponent() as f64;
    let log_t = 1.0 - gamma * k as f64 - (1.0 - gamma) * kp as f64;
    log_d <= log_t
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GoodnessReport {
    pub good: bool,
    /// The scan skipped ancestors cut by the window edge.
    pub truncated: bool,
    pub levels_checked: usize,
}

/// `2^N II` with `II = [-1/2, 1/2)^n`, as a free-standing cube.
pub fn centered_cube(n: usize, big_n: i32) -> DyadicCube {
    let c = -Dyadic::pow2(big_n - 1);
    DyadicCube { n, level: -big_n, index: [0; 2], corner: [c, c], clipped: false }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DyadicCube {
    pub n: usize,
    pub level: i32,
    pub index: [i64; 2],
    pub corner: [Dyadic; 2],
    /// Part of the cube lies outside the owning grid's window.
    pub clipped: bool,
}

impl DyadicCube {
    pub fn side(&self) -> Dyadic {
        Dyadic::pow2(-self.level)
    }

    pub fn side_f64(&self) -> f64 {
        2f64.powi(-self.level)
    }

    pub fn volume_f64(&self) -> f64 {
        2f64.powi(-self.level * self.n as i32)
    }

    pub fn upper(&self, d: usize) -> Dyadic {
        self.corner[d] + self.side()
    }

    pub fn center(&self) -> [Dyadic; 2] {
        let h = self.side().scale_pow2(-1);
        let mut c = [Dyadic::ZERO; 2];
        for d in 0..self.n {
            c[d] = self.corner[d] + h;
        }
        c
    }

    pub fn center_f64(&self) -> [f64; 2] {
        let c = self.center();
        [c[0].to_f64(), c[1].to_f64()]
    }

    pub fn contains(&self, other: &DyadicCube) -> bool {
        (0..self.n).all(|d| self.corner[d] <= other.corner[d] && other.upper(d) <= self.upper(d))
    }

    pub fn intersects(&self, other: &DyadicCube) -> bool {
        (0..self.n).all(|d| self.corner[d] < other.upper(d) && other.corner[d] < self.upper(d))
    }

    /// `l^inf` distance between the cubes as sets.
    pub fn distance(&self, other: &DyadicCube) -> Dyadic {
        let mut best = Dyadic::ZERO;
        for d in 0..self.n {
            let gap = (other.corner[d] - self.upper(d)).max(self.corner[d] - other.upper(d));
            best = best.max(gap);
        }
        best
    }

    /// `d(self, boundary of outer)`.
    pub fn boundary_distance(&self, outer: &DyadicCube) -> Dyadic {
        if outer.contains(self) {
            let mut best: Option<Dyadic> = None;
            for d in 0..self.n {
                let g = (self.corner[d] - outer.corner[d]).min(outer.upper(d) - self.upper(d));
                best = Some(best.map_or(g, |b| b.min(g)));
            }
            best.unwrap_or(Dyadic::ZERO)
        } else {
            self.distance(outer)
        }
    }
}

/// `rd(I, J) = d(I, J) / max(l(I), l(J))`, exact.
pub fn relative_distance(a: &DyadicCube, b: &DyadicCube) -> Dyadic {
    let big = a.side().max(b.side());
    a.distance(b).div_pow2(big).expect("side lengths are powers of two")
}

#[derive(Serialize, Deserialize)]
struct GridConfig {
    n: usize,
    #[serde(rename = "L")]
    l: i32,
    #[serde(rename = "M")]
    m: i32,
    seed: Option<u64>,
}

impl Serialize for GridSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GridConfig { n: self.n, l: self.l, m: self.m, seed: self.seed }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for GridSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let c = GridConfig::deserialize(d)?;
        make_grid(c.n, c.l, c.m, c.seed).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval(grid: &GridSpec, lo: i64, level: i32) -> DyadicCube {
        let idx = lo >> (-level).max(0);
        grid.cube(level, [idx, 0]).unwrap()
    }

    #[test]
    fn standard_grid_layout() {
        let g = make_grid(1, 3, 2, None).unwrap();
        assert_eq!(g.width(), 64);
        assert_eq!(g.cell_side(), 0.125);
        let c = g.cube(0, [0, 0]).unwrap();
        assert_eq!(c.corner[0], Dyadic::ZERO);
        assert!(!c.clipped);
        assert_eq!(g.cubes_at_level(-2).len(), 2);
    }

    #[test]
    fn seeded_grids_repeat() {
        let a = make_grid(1, 3, 2, Some(7)).unwrap();
        let b = make_grid(1, 3, 2, Some(7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cubes_at_level(0), b.cubes_at_level(0));
    }

    #[test]
    fn offsets_match_direct_summation() {
        let g = make_grid(1, 8, 4, Some(1)).unwrap();
        for k in g.levels() {
            let mut off = Dyadic::ZERO;
            for j in (k + 1)..=8 {
                if g.omega(j)[0] == 1 {
                    off = off + Dyadic::pow2(-j);
                }
            }
            for cube in g.cubes_at_level(k) {
                let std = Dyadic::from_int(cube.index[0]).scale_pow2(-k);
                assert_eq!(cube.corner[0] - std, off, "level {k}");
            }
        }
    }

    #[test]
    fn children_partition_parent() {
        let g = make_grid(2, 3, 1, Some(5)).unwrap();
        for k in -1..3 {
            for q in g.cubes_at_level(k) {
                let kids: Vec<_> = g.cubes_at_level(k + 1).into_iter().filter(|c| q.contains(c)).collect();
                let outside = g
                    .cubes_at_level(k + 1)
                    .into_iter()
                    .filter(|c| q.intersects(c) && !q.contains(c))
                    .count();
                assert_eq!(outside, 0);
                assert!(kids.len() <= 4);
                if !q.clipped {
                    assert_eq!(kids.len(), 4);
                }
            }
        }
    }

    #[test]
    fn shifts_below_level_do_not_matter() {
        let base = make_grid(1, 5, 2, Some(11)).unwrap();
        let mut omega: Vec<[u8; 2]> = (-1..=5).map(|j| base.omega(j)).collect();
        // flip the shift bit of level -1: only level -2 cubes may move
        omega[0][0] ^= 1;
        let other = GridSpec::with_omega(1, 5, 2, &omega).unwrap();
        for k in -1..=5 {
            assert_eq!(base.cubes_at_level(k), other.cubes_at_level(k));
        }
        assert_ne!(base.cubes_at_level(-2), other.cubes_at_level(-2));
    }

    #[test]
    fn relative_distance_examples() {
        let g = make_grid(1, 2, 3, None).unwrap();
        let i = interval(&g, 0, 0);
        let j = interval(&g, 3, 0);
        assert_eq!(relative_distance(&i, &i), Dyadic::ZERO);
        assert_eq!(relative_distance(&i, &j), Dyadic::from_int(2));
        assert_eq!(relative_distance(&j, &i), Dyadic::from_int(2));
        assert_eq!(relative_distance(&i, &interval(&g, 1, 0)), Dyadic::ZERO);
    }

    #[test]
    fn relative_distance_brute_force() {
        let g = make_grid(1, 2, 2, None).unwrap();
        let cubes: Vec<_> = g.levels().flat_map(|k| g.cubes_at_level(k)).collect();
        for a in &cubes {
            for b in &cubes {
                // all endpoint pairs
                let pts = |c: &DyadicCube| [c.corner[0], c.upper(0)];
                let overlap = a.corner[0] <= b.upper(0) && b.corner[0] <= a.upper(0);
                let mut d = Dyadic::from_int(1 << 20);
                if overlap {
                    d = Dyadic::ZERO;
                } else {
                    for x in pts(a) {
                        for y in pts(b) {
                            d = d.min((x - y).abs());
                        }
                    }
                }
                let big = a.side().max(b.side());
                assert_eq!(relative_distance(a, b), d.div_pow2(big).unwrap());
            }
        }
    }

    fn oracle_family_count(grid: &GridSpec, big_n: i32) -> usize {
        let mut count = 0;
        for k in grid.levels() {
            for c in grid.cubes_at_level(k) {
                if c.clipped {
                    continue;
                }
                let side = c.side_f64();
                if side < 2f64.powi(-big_n) || side > 2f64.powi(big_n) {
                    continue;
                }
                let lo = c.corner[0].to_f64();
                let hi = lo + side;
                let (blo, bhi) = (-(2f64.powi(big_n - 1)), 2f64.powi(big_n - 1));
                let gap = (blo - hi).max(lo - bhi).max(0.0);
                if gap / side.max(2f64.powi(big_n)) <= big_n as f64 {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn window_family_matches_oracle() {
        let g = make_grid(1, 4, 7, None).unwrap();
        for big_n in 0..=4 {
            let fam = g.window_family(big_n).unwrap();
            assert_eq!(fam.len(), oracle_family_count(&g, big_n), "N = {big_n}");
            assert!(fam.iter().all(|c| g.in_window_family(c, big_n)));
            assert!(fam.len() as u64 <= 1u64 << (3 * big_n + 2));
        }
        let f0 = g.window_family(0).unwrap();
        let f1 = g.window_family(1).unwrap();
        assert!(f0.iter().all(|c| f1.contains(c)));
        assert!(g.window_family(5).is_err());
    }

    #[test]
    fn window_family_two_dims_bound() {
        let g = make_grid(2, 2, 6, Some(2)).unwrap();
        for big_n in 0..=2 {
            let fam: std::collections::HashSet<_> = g.window_family(big_n).unwrap().into_iter().collect();
            assert!(fam.len() as u64 <= 1u64 << (6 * big_n + 3));
            for k in -2..=2 {
                for c in g.cubes_at_level(k) {
                    assert_eq!(fam.contains(&c), g.in_window_family(&c, big_n));
                }
            }
        }
    }

    fn oracle_good(grid: &GridSpec, cube: &DyadicCube, r: i32, delta: f64) -> bool {
        let gamma = delta / (2.0 * (2.0 * grid.n() as f64 + delta));
        for k in grid.coarsest_level()..=cube.level - r {
            for big in grid.cubes_at_level(k) {
                if big.clipped {
                    continue;
                }
                let d = cube.boundary_distance(&big).to_f64();
                let t = 2.0 * cube.side_f64().powf(gamma) * big.side_f64().powf(1.0 - gamma);
                if d <= t {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn goodness_matches_oracle() {
        let g = make_grid(1, 6, 3, Some(3)).unwrap();
        let mut goods = 0;
        for k in g.levels() {
            for c in g.cubes_at_level(k).into_iter().filter(|c| !c.clipped) {
                let rep = g.is_good(&c, 2, 1.0);
                assert_eq!(rep.good, oracle_good(&g, &c, 2, 1.0), "{c:?}");
                goods += rep.good as usize;
            }
        }
        assert!(goods > 0);
    }

    #[test]
    fn goodness_examples() {
        let g = make_grid(1, 8, 3, None).unwrap();
        // touches the boundary of [0, 1)
        let edge = g.cube(3, [0, 0]).unwrap();
        assert!(!g.is_good(&edge, 2, 1.0).good);
        // no represented ancestor 2^r times larger
        let coarse = g.cube(-2, [0, 0]).unwrap();
        assert!(g.is_good(&coarse, 2, 1.0).good);
        // [1, 1 + 2^-12) sits in the middle of [0, 2); the threshold there is about 0.89
        let wide = make_grid(1, 12, 1, None).unwrap();
        let inner = wide.cube(12, [4096, 0]).unwrap();
        let rep = wide.is_good(&inner, 13, 1.0);
        assert!(rep.good);
        assert_eq!(rep.levels_checked, 1);
        assert!(!wide.is_good(&inner, 2, 1.0).good);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(matches!(make_grid(3, 2, 2, None), Err(Error::Config(_))));
        assert!(make_grid(1, 20, 11, None).is_err());
        assert!(make_grid(1, 2, 0, None).is_err());
    }

    #[test]
    fn json_round_trip() {
        let g = make_grid(2, 4, 3, Some(9)).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(s, r#"{"n":2,"L":4,"M":3,"seed":9}"#);
        let back: GridSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
        let std: GridSpec = serde_json::from_str(r#"{"n":1,"L":3,"M":2,"seed":null}"#).unwrap();
        assert!(std.is_standard());
    }
}
