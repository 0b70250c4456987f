//! Bilinear dyadic shifts `S^{i,j,k}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DyadicCube, GridSpec};
use crate::haar::{child_sign, expand, inv_sqrt_volume, num_patterns, reconstruct, HaarCoeffs, Pyramid};
use crate::mesh::MeshFunction;

/// Which of `(h_I, h_J)`, `(h_I, h^0_J)`, `(h^0_I, h_J)` the shift pairs with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    HH,
    HH0,
    H0H,
}

impl Flavor {
    fn cancellative(self) -> [bool; 2] {
        match self {
            Flavor::HH => [true, true],
            Flavor::HH0 => [true, false],
            Flavor::H0H => [false, true],
        }
    }
}

/// The envelope `F(Q)` in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Envelope {
    Zero,
    Constant { value: f64 },
    /// `2^{-beta rho(Q)}` with `rho(Q)` the least `N` such that `Q` lies in `D(N)`.
    Decaying { beta: f64 },
    /// One on `D(n0)`, zero elsewhere.
    Window { n0: i32 },
}

/// Least `N` with `Q` in `D(N)`.
pub fn family_index(grid: &GridSpec, cube: &DyadicCube) -> Option<i32> {
    (0..=48).find(|&n| grid.in_window_family(cube, n))
}

impl Envelope {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Envelope::Constant { value } if !(0.0..=1.0).contains(&value) => {
                Err(Error::config(format!("envelope value {value} outside [0, 1]")))
            }
            Envelope::Decaying { beta } if !(beta >= 0.0) => Err(Error::config("decay rate must be nonnegative")),
            Envelope::Window { n0 } if n0 < 0 => Err(Error::config("window index must be nonnegative")),
            _ => Ok(()),
        }
    }

    pub fn value(&self, grid: &GridSpec, cube: &DyadicCube) -> f64 {
        match *self {
            Envelope::Zero => 0.0,
            Envelope::Constant { value } => value,
            Envelope::Decaying { beta } => family_index(grid, cube).map_or(0.0, |n| 2f64.powf(-beta * n as f64)),
            Envelope::Window { n0 } => grid.in_window_family(cube, n0) as u8 as f64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShiftEntry {
    pub i: usize,
    pub eta_i: u8,
    pub j: usize,
    pub eta_j: u8,
    pub k: usize,
    pub eta_k: u8,
    pub a: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShiftBlock {
    pub level: i32,
    pub q: usize,
    pub f: f64,
    pub entries: Vec<ShiftEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShiftTensor {
    pub grid: GridSpec,
    pub depth: [i32; 3],
    pub flavor: Flavor,
    pub envelope: Envelope,
    pub seed: u64,
    pub blocks: Vec<ShiftBlock>,
}

pub const MAX_SHIFT_ENTRIES: usize = 1 << 23;

/// Linear local indices of the generation-`depth` descendants of an unclipped cube.
pub fn descendants(grid: &GridSpec, level: i32, q: usize, depth: i32) -> Vec<usize> {
    let j = grid.unlinear_local(level, q);
    let mut per_dim: [Vec<usize>; 2] = [vec![j[0]], vec![j[1]]];
    for d in 0..grid.n() {
        for t in 0..depth {
            per_dim[d] = per_dim[d]
                .iter()
                .flat_map(|&x| (0..2).filter_map(move |c| grid.child_local(level + t, d, x, c)))
                .collect();
        }
    }
    let lev = level + depth;
    let mut out = Vec::new();
    for &j1 in &per_dim[1] {
        for &j0 in &per_dim[0] {
            out.push(grid.linear_local(lev, [j0, j1]));
        }
    }
    out
}

/// `F(Q) |I|^{1/2} |J|^{1/2} |K|^{1/2} / |Q|^2`.
pub fn coefficient_bound(n: usize, level: i32, depth: [i32; 3], f: f64) -> f64 {
    let q4 = inv_sqrt_volume(level, n).powi(4);
    let s: f64 = depth.iter().map(|&d| 1.0 / inv_sqrt_volume(level + d, n)).product();
    f * s * q4
}

/// Build a shift with coefficients `F(Q) |I|^{1/2}|J|^{1/2}|K|^{1/2}/|Q|^2 u`, `u` drawn by `draw`.
pub fn make_shift_with(
    grid: &GridSpec,
    depth: [i32; 3],
    flavor: Flavor,
    envelope: Envelope,
    seed: u64,
    mut draw: impl FnMut(&mut ChaCha8Rng) -> f64,
) -> Result<ShiftTensor> {
    envelope.validate()?;
    if depth.iter().any(|&d| d < 0) {
        return Err(Error::config("shift depths must be nonnegative"));
    }
    let canc = flavor.cancellative();
    let need = [
        depth[0] + canc[0] as i32,
        depth[1] + canc[1] as i32,
        depth[2] + 1,
    ];
    let top = grid.fine_level() - need.iter().max().unwrap();
    if top < grid.coarsest_level() {
        return Err(Error::resolution(format!(
            "depths {depth:?} need more than the {} levels of the grid",
            grid.levels().len()
        )));
    }
    let n = grid.n();
    let per_q = 1usize << (n as i32 * (depth[0] + depth[1] + depth[2])) as u32;
    let p = num_patterns(n) as u8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blocks = Vec::new();
    let mut total = 0usize;
    for level in grid.coarsest_level()..=top {
        let count = grid.level_geom(level).num_cubes(n);
        for q in 0..count {
            let cube = grid.cube_local(level, grid.unlinear_local(level, q));
            if cube.clipped {
                continue;
            }
            let f = envelope.value(grid, &cube);
            if f == 0.0 {
                continue;
            }
            total += per_q;
            if total > MAX_SHIFT_ENTRIES {
                return Err(Error::resolution("shift has too many coefficients for this grid"));
            }
            let bound = coefficient_bound(n, level, depth, f);
            let is = descendants(grid, level, q, depth[0]);
            let js = descendants(grid, level, q, depth[1]);
            let ks = descendants(grid, level, q, depth[2]);
            let mut entries = Vec::with_capacity(per_q);
            for &i in &is {
                for &j in &js {
                    for &k in &ks {
                        let mut pattern = |c: bool| if !c { 0 } else if p == 1 { 1 } else { rng.gen_range(1..=p) };
                        let eta_i = pattern(canc[0]);
                        let eta_j = pattern(canc[1]);
                        let eta_k = pattern(true);
                        let u = draw(&mut rng).clamp(-1.0, 1.0);
                        entries.push(ShiftEntry { i, eta_i, j, eta_j, k, eta_k, a: bound * u });
                    }
                }
            }
            blocks.push(ShiftBlock { level, q, f, entries });
        }
    }
    Ok(ShiftTensor { grid: grid.clone(), depth, flavor, envelope, seed, blocks })
}

pub fn make_shift(grid: &GridSpec, depth: [i32; 3], flavor: Flavor, envelope: Envelope, seed: u64) -> Result<ShiftTensor> {
    make_shift_with(grid, depth, flavor, envelope, seed, |rng| rng.gen_range(-1.0..=1.0))
}

/// Haar-type coefficients `<f, h_I^eta>` including `eta = 0`.
pub(crate) struct CoeffView {
    pub haar: HaarCoeffs,
    pub pyr: Pyramid,
}

impl CoeffView {
    pub fn new(f: &MeshFunction) -> Self {
        CoeffView { haar: expand(f).coeffs, pyr: Pyramid::new(f) }
    }

    pub fn get(&self, level: i32, local: usize, eta: u8) -> f64 {
        if eta == 0 {
            let g = self.pyr.grid();
            self.pyr.sums(level)[local] * g.cell_volume() * inv_sqrt_volume(level, g.n())
        } else {
            self.haar.get(level, local, eta)
        }
    }
}

impl ShiftTensor {
    pub fn num_entries(&self) -> usize {
        self.blocks.iter().map(|b| b.entries.len()).sum()
    }

    /// Every stored coefficient obeys the envelope bound.
    pub fn bound_violations(&self) -> usize {
        let n = self.grid.n();
        self.blocks
            .iter()
            .map(|b| {
                let bound = coefficient_bound(n, b.level, self.depth, b.f);
                b.entries.iter().filter(|e| e.a.abs() > bound || b.f > 1.0).count()
            })
            .sum()
    }

    pub fn apply(&self, f1: &MeshFunction, f2: &MeshFunction) -> Result<MeshFunction> {
        let f1 = f1.regrid(&self.grid)?;
        let f2 = f2.regrid(&self.grid)?;
        let c1 = CoeffView::new(&f1);
        let c2 = CoeffView::new(&f2);
        let mut out = HaarCoeffs::zeros(&self.grid);
        let [di, dj, dk] = self.depth;
        for b in &self.blocks {
            for e in &b.entries {
                let v = e.a * c1.get(b.level + di, e.i, e.eta_i) * c2.get(b.level + dj, e.j, e.eta_j);
                out.add(b.level + dk, e.k, e.eta_k, v);
            }
        }
        reconstruct(&out, None)
    }

    /// Pointwise check of `|A_Q(f1, f2)| <= F(Q) <|f1|>_Q <|f2|>_Q 1_Q` for every block.
    pub fn block_bound_check(&self, f1: &MeshFunction, f2: &MeshFunction) -> Result<BlockCheck> {
        let grid = &self.grid;
        let f1 = f1.regrid(grid)?;
        let f2 = f2.regrid(grid)?;
        let c1 = CoeffView::new(&f1);
        let c2 = CoeffView::new(&f2);
        let a1 = Pyramid::new(&f1.abs());
        let a2 = Pyramid::new(&f2.abs());
        let n = grid.n();
        let [di, dj, dk] = self.depth;
        let mut check = BlockCheck { blocks: 0, cells: 0, violations: 0, max_ratio: 0.0 };
        for b in &self.blocks {
            let q = grid.cube_local(b.level, grid.unlinear_local(b.level, b.q));
            let (lo, hi) = grid.cell_span(&q);
            let side = (hi[0] - lo[0]) as usize;
            let mut vals = vec![0.0; side.pow(n as u32)];
            for e in &b.entries {
                let coef = e.a * c1.get(b.level + di, e.i, e.eta_i) * c2.get(b.level + dj, e.j, e.eta_j);
                if coef == 0.0 {
                    continue;
                }
                let lk = b.level + dk;
                let kc = grid.cube_local(lk, grid.unlinear_local(lk, e.k));
                let (klo, khi) = grid.cell_span(&kc);
                let amp = coef * inv_sqrt_volume(lk, n);
                let ks = khi[0] - klo[0];
                let range = |d: usize| if d < n { klo[d]..khi[d] } else { 0..1 };
                for y in range(1) {
                    for x in range(0) {
                        let mut child = ((x - klo[0]) >= ks / 2) as usize;
                        if n == 2 {
                            child |= (((y - klo[1]) >= ks / 2) as usize) << 1;
                        }
                        let idx = if n == 1 {
                            (x - lo[0]) as usize
                        } else {
                            (y - lo[1]) as usize * side + (x - lo[0]) as usize
                        };
                        vals[idx] += amp * child_sign(e.eta_k, child);
                    }
                }
            }
            let bound = b.f * a1.average(b.level, b.q) * a2.average(b.level, b.q);
            check.blocks += 1;
            for v in vals {
                check.cells += 1;
                if v.abs() > bound * (1.0 + 1e-12) + 1e-300 {
                    check.violations += 1;
                }
                if bound > 0.0 {
                    check.max_ratio = check.max_ratio.max(v.abs() / bound);
                }
            }
        }
        Ok(check)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BlockCheck {
    pub blocks: usize,
    pub cells: usize,
    pub violations: usize,
    pub max_ratio: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::haar::haar_eval;

    fn random(grid: &GridSpec, seed: u64) -> MeshFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        MeshFunction::from_values(grid, (0..grid.num_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn zero_envelope_is_zero_operator() {
        let g = make_grid(1, 3, 2, None).unwrap();
        let s = make_shift(&g, [0, 1, 1], Flavor::HH, Envelope::Zero, 1).unwrap();
        assert_eq!(s.num_entries(), 0);
        assert_eq!(s.apply(&random(&g, 1), &random(&g, 2)).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn unit_draw_attains_the_bound() {
        let g = make_grid(1, 2, 1, None).unwrap();
        let s = make_shift_with(&g, [0, 0, 0], Flavor::HH, Envelope::Constant { value: 1.0 }, 0, |_| 1.0).unwrap();
        assert!(!s.blocks.is_empty());
        for b in &s.blocks {
            let vol = 2f64.powi(-b.level);
            for e in &b.entries {
                assert!((e.a - vol.powf(-0.5)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn seeded_construction_is_deterministic() {
        let g = make_grid(2, 2, 1, Some(4)).unwrap();
        let a = make_shift(&g, [1, 0, 1], Flavor::HH0, Envelope::Constant { value: 0.5 }, 9).unwrap();
        let b = make_shift(&g, [1, 0, 1], Flavor::HH0, Envelope::Constant { value: 0.5 }, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.bound_violations(), 0);
    }

    #[test]
    fn rejects_bad_parameters() {
        let g = make_grid(1, 2, 1, None).unwrap();
        assert!(matches!(make_shift(&g, [2, 2, 3], Flavor::HH, Envelope::Zero, 0), Err(Error::Resolution(_))));
        assert!(make_shift(&g, [0, 0, 0], Flavor::HH, Envelope::Constant { value: 2.0 }, 0).is_err());
    }

    #[test]
    fn single_entry_matches_direct_formula() {
        let g = make_grid(1, 3, 1, None).unwrap();
        let mut s = make_shift(&g, [1, 0, 1], Flavor::HH0, Envelope::Constant { value: 1.0 }, 3).unwrap();
        s.blocks.truncate(1);
        s.blocks[0].entries.truncate(1);
        let b = s.blocks[0].clone();
        let e = b.entries[0];
        let f1 = random(&g, 5);
        let f2 = random(&g, 6);
        let cube = |lev: i32, i: usize| g.cube_local(lev, g.unlinear_local(lev, i));
        let hi = haar_eval(&g, &cube(b.level + 1, e.i), e.eta_i).unwrap();
        let hj = haar_eval(&g, &cube(b.level, e.j), 0).unwrap();
        let hk = haar_eval(&g, &cube(b.level + 1, e.k), e.eta_k).unwrap();
        let want = hk.scale(e.a * f1.inner(&hi).unwrap() * f2.inner(&hj).unwrap());
        let got = s.apply(&f1, &f2).unwrap();
        assert!(got.max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn matches_triple_loop_oracle_and_block_bound() {
        for (n, l, m) in [(1, 3, 2), (2, 2, 1)] {
            let g = make_grid(n, l, m, Some(11)).unwrap();
            let s = make_shift(&g, [1, 1, 0], Flavor::H0H, Envelope::Decaying { beta: 0.5 }, 12).unwrap();
            let f1 = random(&g, 21);
            let f2 = random(&g, 22);
            let mut want = MeshFunction::zeros(&g);
            let cube = |lev: i32, i: usize| g.cube_local(lev, g.unlinear_local(lev, i));
            for b in &s.blocks {
                for e in &b.entries {
                    let hi = haar_eval(&g, &cube(b.level + 1, e.i), e.eta_i).unwrap();
                    let hj = haar_eval(&g, &cube(b.level + 1, e.j), e.eta_j).unwrap();
                    let hk = haar_eval(&g, &cube(b.level, e.k), e.eta_k).unwrap();
                    let c = e.a * f1.inner(&hi).unwrap() * f2.inner(&hj).unwrap();
                    want.axpy(c, &hk).unwrap();
                }
            }
            let got = s.apply(&f1, &f2).unwrap();
            assert!(got.max_abs_diff(&want) < 1e-10);
            let chk = s.block_bound_check(&f1, &f2).unwrap();
            assert_eq!(chk.violations, 0);
            assert!(chk.blocks > 0);
        }
    }
}
