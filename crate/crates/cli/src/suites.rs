//! Self-check and counterexample suites. Each returns named checks with the
//! measured value and the bound it is held to.

use std::collections::BTreeMap;

use dyadlab_core::diagnostics::{kernel_envelope, weak_compactness_value};
use dyadlab_core::grid::centered_cube;
use dyadlab_core::haar::{expectation, martingale_block, num_patterns};
use dyadlab_core::lorentz::{
    averaged_modulus, ball_restrict, lp_norm, power_function, tail_restrict, translate, weak_norm, PowerSampling,
    PowerSupport,
};
use dyadlab_core::operators::{Kernel, KernelOperator};
use dyadlab_core::{
    expand, haar_eval, make_grid, project, reconstruct, relative_distance, BilinearOperator, Dyadic, GridSpec,
    MeasureSpec, MeshFunction, Result,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "==")]
    Eq,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub relation: Relation,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    pub fn le(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Check { name: name.into(), measured, relation: Relation::Le, bound, pass: measured <= bound }
    }

    pub fn ge(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Check { name: name.into(), measured, relation: Relation::Ge, bound, pass: measured >= bound }
    }

    pub fn eq(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Check { name: name.into(), measured, relation: Relation::Eq, bound, pass: measured == bound }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
    pub tables: BTreeMap<String, Table>,
}

impl SuiteReport {
    fn new(suite: &str) -> Self {
        SuiteReport { suite: suite.into(), checks: Vec::new(), tables: BTreeMap::new() }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

fn random_function(grid: &GridSpec, rng: &mut ChaCha8Rng) -> Result<MeshFunction> {
    MeshFunction::from_values(grid, (0..grid.num_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

/// Haar functions of unclipped cubes; clipped ones are cut by the window edge.
fn all_haar(grid: &GridSpec) -> Vec<(dyadlab_core::DyadicCube, u8)> {
    let p = num_patterns(grid.n()) as u8;
    let mut out = Vec::new();
    for k in grid.coarsest_level()..grid.fine_level() {
        for cube in grid.cubes_at_level(k).into_iter().filter(|c| !c.clipped) {
            for eta in 1..=p {
                out.push((cube, eta));
            }
        }
    }
    out
}

pub const MAX_GRAM: usize = 2048;

/// Haar round trip, Parseval, orthonormality, the E/D identity and nesting.
pub fn selfcheck(grid: &GridSpec, samples: usize, seed: u64) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("selfcheck");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs: Vec<MeshFunction> = (0..samples).map(|_| random_function(grid, &mut rng)).collect::<Result<_>>()?;
    let (mut trip, mut parseval, mut ed): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for (i, f) in fs.iter().enumerate() {
        let e = expand(f);
        trip = trip.max(reconstruct(&e.coeffs, Some(&e.mean))?.max_abs_diff(f));
        let l2 = f.inner(f)?;
        parseval = parseval.max((e.coeffs.energy() + e.mean.energy() - l2).abs() / l2);
        if i < 10 {
            for k in grid.coarsest_level()..grid.fine_level() {
                let lhs = expectation(f, k + 1)?.sub(&expectation(f, k)?)?;
                let mut rhs = MeshFunction::zeros(grid);
                for cube in grid.cubes_at_level(k) {
                    rhs.axpy(1.0, &martingale_block(f, &cube, 0)?)?;
                }
                ed = ed.max(lhs.max_abs_diff(&rhs));
            }
        }
    }
    rep.checks.push(Check::le("haar round trip", trip, 1e-12));
    rep.checks.push(Check::le("parseval (relative)", parseval, 1e-10));
    let basis = all_haar(grid);
    let used = basis.len().min(MAX_GRAM);
    let hs: Vec<MeshFunction> =
        basis[..used].iter().map(|(c, eta)| haar_eval(grid, c, *eta)).collect::<Result<_>>()?;
    let gram = (0..used)
        .into_par_iter()
        .map(|i| {
            let mut worst: f64 = 0.0;
            for j in i..used {
                let g = hs[i].inner(&hs[j])?;
                worst = worst.max((g - if i == j { 1.0 } else { 0.0 }).abs());
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    rep.checks.push(Check::le(format!("orthonormality ({used} Haar functions)"), gram, 1e-12));
    rep.checks.push(Check::le("E/D identity", ed, 1e-12));
    let mut nesting: f64 = 0.0;
    for k in grid.coarsest_level()..grid.fine_level() {
        for cube in grid.cubes_at_level(k) {
            let parent = MeshFunction::cube_indicator(grid, &cube);
            let mut kids = MeshFunction::zeros(grid);
            for child in grid.cubes_at_level(k + 1).iter().filter(|c| cube.contains(c)) {
                kids.axpy(1.0, &MeshFunction::cube_indicator(grid, child))?;
            }
            nesting = nesting.max(kids.max_abs_diff(&parent));
        }
    }
    rep.checks.push(Check::eq("children partition parents", nesting, 0.0));
    Ok(rep)
}

/// `P_N^perp T(h_I0, h_I0) = 2^{-N} 1_{[0, 2^N)}` and its `L^{1/2, inf}` norm `2^N`.
pub fn repro_rank_one(grid: &GridSpec) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("rank-one");
    let i0 = grid.cube(0, [0, 0])?;
    let t = BilinearOperator::rank_one(grid, &i0)?;
    let h = haar_eval(grid, &i0, 1)?;
    let out = t.apply(&h, &h)?;
    rep.checks.push(Check::eq("T(h, h) - 1_I0", out.max_abs_diff(&MeshFunction::cube_indicator(grid, &i0)), 0.0));
    let mut table = Table::new(&["N", "weak_norm", "expected"]);
    for big_n in 1..grid.fine_level().min(grid.window_exp()) {
        let perp = project(&out, big_n)?.1;
        let c = 2f64.powi(-big_n);
        let want = MeshFunction::box_indicator(grid, [0.0, 0.0], [1.0 / c, 1.0 / c]).scale(c);
        rep.checks.push(Check::eq(format!("P_{big_n}^perp T(h, h) - 2^-N 1_[0,2^N)"), perp.max_abs_diff(&want), 0.0));
        let v = weak_norm(&perp, 0.5);
        rep.checks.push(Check::eq(format!("weak norm at N = {big_n}"), v, 2f64.powi(big_n)));
        table.rows.push(vec![big_n as f64, v, 2f64.powi(big_n)]);
    }
    rep.tables.insert("curve".into(), table);
    Ok(rep)
}

pub const LORENTZ_GRID: (i32, i32) = (12, 6);

/// `x^{-1/2} 1_{x > 0}` sampled at the cell infimum, so every jump of the
/// distribution function sits on `s d(s)^{1/2} = 1`.
pub fn lorentz_example(grid: &GridSpec) -> MeshFunction {
    power_function(grid, 0.5, PowerSupport::Positive, PowerSampling::CellInfimum)
}

/// The `L^{2, inf}` example fails every Kolmogorov-Riesz condition.
pub fn repro_lorentz_tail() -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("lorentz-tail");
    let grid = make_grid(1, LORENTZ_GRID.0, LORENTZ_GRID.1, None)?;
    let f = lorentz_example(&grid);
    let norm = weak_norm(&f, 2.0);
    rep.checks.push(Check::le("|norm - 1|", (norm - 1.0).abs(), 0.03));
    let mut tails = Table::new(&["A", "weak_norm"]);
    for a in [1.0, 2.0, 4.0] {
        let v = weak_norm(&tail_restrict(&f, a), 2.0);
        rep.checks.push(Check::le(format!("|tail norm - 1| at A = {a}"), (v - 1.0).abs(), 0.03));
        tails.rows.push(vec![a, v]);
    }
    let h = grid.cell_side();
    let steps = (0.25 / h) as usize;
    let trans: Vec<f64> = (1..=steps)
        .into_par_iter()
        .map(|j| Ok(weak_norm(&translate(&f, [j as f64 * h, 0.0])?.sub(&f)?, 2.0)))
        .collect::<Result<_>>()?;
    let worst = trans.iter().cloned().fold(f64::INFINITY, f64::min);
    rep.checks.push(Check::ge(format!("min translation norm over {steps} lattice shifts"), worst, 0.9));
    let mut tt = Table::new(&["h", "weak_norm"]);
    for (j, v) in trans.iter().enumerate().filter(|(j, _)| (j + 1).is_power_of_two()) {
        tt.rows.push(vec![(j + 1) as f64 * h, *v]);
    }
    let a = 0.5;
    let mut st = Table::new(&["r", "weak_norm"]);
    for r in [2f64.powi(-6), 2f64.powi(-8), 2f64.powi(-10)] {
        let v = weak_norm(&averaged_modulus(&f, r, a)?, 2.0);
        rep.checks.push(Check::ge(format!("averaged modulus at r = {r}"), v, 0.9 * 4f64.powf(-1.0 / a)));
        st.rows.push(vec![r, v]);
    }
    rep.tables.insert("tail".into(), tails);
    rep.tables.insert("translation".into(), tt);
    rep.tables.insert("averaged-modulus".into(), st);
    Ok(rep)
}

fn harmonic(k: usize) -> f64 {
    (1..=k).map(|j| 1.0 / j as f64).sum()
}

/// `L^{2, inf}` norm does not shrink with the support; `L^2` does.
pub fn repro_acn() -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("acn");
    let grid = make_grid(1, LORENTZ_GRID.0, LORENTZ_GRID.1, None)?;
    let f = lorentz_example(&grid);
    let norm = weak_norm(&f, 2.0);
    let h = grid.cell_side();
    let mut table = Table::new(&["r", "weak_ratio", "l2_norm"]);
    let (mut worst_ratio, mut worst_l2): (f64, f64) = (f64::INFINITY, 0.0);
    let mut l2s = Vec::new();
    for j in 0..=LORENTZ_GRID.0 {
        let r = 2f64.powi(-j);
        let g = ball_restrict(&f, r);
        let ratio = weak_norm(&g, 2.0) / norm;
        let l2 = lp_norm(&g, 2.0, &MeasureSpec::Lebesgue)?;
        // cells [(i-1)h, ih) carry (ih)^{-1/2}, so ||g||_2^2 is a harmonic number
        let want = harmonic((r / h).round() as usize).sqrt();
        worst_ratio = worst_ratio.min(ratio);
        worst_l2 = worst_l2.max((l2 - want).abs() / want);
        l2s.push(l2);
        table.rows.push(vec![r, ratio, l2]);
    }
    rep.checks.push(Check::ge("min weak-norm ratio over shrinking balls", worst_ratio, 0.95));
    rep.checks.push(Check::le("L^2 norm vs harmonic oracle (relative)", worst_l2, 1e-12));
    let increases = l2s.windows(2).filter(|w| w[1] > w[0]).count();
    rep.checks.push(Check::eq("L^2 norm increases as the ball shrinks", increases as f64, 0.0));
    rep.checks.push(Check::le("L^2 ratio at the mesh limit", l2s.last().unwrap() / l2s[0], 0.5));
    rep.tables.insert("shrinking-balls".into(), table);
    Ok(rep)
}

pub const RIESZ_GRID: (i32, i32) = (4, 3);

/// Weak compactness values of the Riesz form and the rank-one operator, and
/// kernel envelopes.
pub fn repro_riesz_wcp(seed: u64) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("riesz-wcp");
    let grid = make_grid(1, RIESZ_GRID.0, RIESZ_GRID.1, None)?;
    let riesz = BilinearOperator::Kernel(KernelOperator { kernel: Kernel::Riesz, epsilon: 2.0 * grid.cell_side() });
    let cubes: Vec<_> = (-1..=1).flat_map(|k| grid.cubes_at_level(k)).filter(|c| !c.clipped).collect();
    let vals: Vec<f64> =
        cubes.par_iter().map(|c| weak_compactness_value(&riesz, &grid, c)).collect::<Result<_>>()?;
    let worst = vals.iter().cloned().fold(0.0, f64::max);
    rep.checks.push(Check::le(format!("max Riesz |F(Q)| over {} cubes", cubes.len()), worst, 0.05));
    let i0 = grid.cube(0, [0, 0])?;
    let rank = BilinearOperator::rank_one(&grid, &i0)?;
    let mut above: f64 = 0.0;
    let mut count = 0;
    for k in grid.coarsest_level()..=0 {
        for c in grid.cubes_at_level(k).iter().filter(|c| c.contains(&i0)) {
            above = above.max(weak_compactness_value(&rank, &grid, c)?);
            count += 1;
        }
    }
    rep.checks.push(Check::eq(format!("max rank-one F(Q) over {count} cubes containing I0"), above, 0.0));
    let gauss = kernel_envelope(Kernel::GaussianDamped, 1, 64, seed)?;
    let riesz_env = kernel_envelope(Kernel::Riesz, 1, 64, seed)?;
    rep.checks.push(Check::le("Gaussian-damped far-field envelope", *gauss.far.envelope.last().unwrap(), 1e-3));
    let riesz_min = riesz_env.far.values.iter().chain(&riesz_env.large.values).cloned().fold(f64::INFINITY, f64::min);
    rep.checks.push(Check::ge("Riesz envelope minimum (large and far)", riesz_min, 0.1));
    let mut table = Table::new(&["t", "gaussian_damped", "riesz"]);
    for ((t, a), b) in gauss.far.abscissa.iter().zip(&gauss.far.values).zip(&riesz_env.far.values) {
        table.rows.push(vec![*t, *a, *b]);
    }
    rep.tables.insert("far-field".into(), table);
    Ok(rep)
}

pub const CARD_GRID: (i32, i32) = (4, 8);

/// `#D(N)` against an exhaustive scan and the bound `2^{3nN + n + 1}`.
pub fn repro_card_dn() -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("card-DN");
    let grid = make_grid(1, CARD_GRID.0, CARD_GRID.1, None)?;
    let mut table = Table::new(&["N", "count", "oracle", "bound"]);
    for big_n in 1..=4 {
        let count = grid.window_family(big_n)?.len();
        let anchor = centered_cube(1, big_n);
        let bound_rd = Dyadic::from_int(big_n as i64);
        let mut oracle = 0usize;
        for k in grid.levels() {
            for c in grid.cubes_at_level(k) {
                let side = c.side_f64();
                if !c.clipped
                    && side >= 2f64.powi(-big_n)
                    && side <= 2f64.powi(big_n)
                    && relative_distance(&c, &anchor) <= bound_rd
                {
                    oracle += 1;
                }
            }
        }
        let bound = 2f64.powi(3 * big_n + 2);
        rep.checks.push(Check::eq(format!("#D({big_n}) - oracle"), count as f64 - oracle as f64, 0.0));
        rep.checks.push(Check::le(format!("#D({big_n})"), count as f64, bound));
        table.rows.push(vec![big_n as f64, count as f64, oracle as f64, bound]);
    }
    rep.tables.insert("counts".into(), table);
    Ok(rep)
}
