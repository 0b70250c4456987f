//! Muckenhoupt constants, multilinear maximal and sharp maximal functions.
//!
//! Suprema run over the grid's own unclipped cubes together with the shifted
//! families `2^{-k}([0,1)^n + m + (-1)^k alpha)`, `alpha in {0, 1/3}^n`, that fit
//! inside the window. Cube geometry is integral in thirds of a cell, so averages
//! over shifted cubes are exact for mesh data.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::lorentz::{pow_exact, power_function, PowerSampling, PowerSupport};
use crate::mesh::MeshFunction;

/// Growth per window doubling above which a constant is classified divergent.
pub const GROWTH_THRESHOLD: f64 = 1.25;

#[derive(Clone, Debug, PartialEq)]
pub struct Weight {
    w: MeshFunction,
    integral: f64,
    integral_inv: f64,
}

impl Weight {
    pub fn new(w: MeshFunction) -> Result<Self> {
        if w.values().iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Domain("weight values must lie in (0, inf)".into()));
        }
        let vol = w.grid().cell_volume();
        let integral = w.values().iter().sum::<f64>() * vol;
        let integral_inv = w.values().iter().map(|v| 1.0 / v).sum::<f64>() * vol;
        Ok(Weight { w, integral, integral_inv })
    }

    pub fn one(grid: &GridSpec) -> Self {
        Weight::new(MeshFunction::constant(grid, 1.0)).expect("constant weight")
    }

    /// `|x|^alpha`, cell-averaged in 1D (midpoint where the average diverges).
    pub fn power(grid: &GridSpec, alpha: f64) -> Self {
        let f = power_function(grid, -alpha, PowerSupport::Full, PowerSampling::CellAverage);
        Weight::new(f).expect("power weights are positive")
    }

    pub fn mesh(&self) -> &MeshFunction {
        &self.w
    }

    pub fn grid(&self) -> &GridSpec {
        self.w.grid()
    }

    pub fn values(&self) -> &[f64] {
        self.w.values()
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    pub fn integral_inv(&self) -> f64 {
        self.integral_inv
    }

    pub fn powf(&self, e: f64) -> Weight {
        Weight::new(self.w.map(|v| pow_exact(v, e))).expect("powers of weights stay positive")
    }

    pub fn product(ws: &[Weight]) -> Result<Weight> {
        let mut acc = ws.first().ok_or_else(|| Error::config("empty weight vector"))?.w.clone();
        for w in &ws[1..] {
            acc = acc.mul(&w.w)?;
        }
        Weight::new(acc)
    }

    /// The same weight seen on the centred sub-window `[-2^m, 2^m)^n`.
    pub fn crop(&self, m: i32) -> Result<Weight> {
        let f = crop_mesh(&self.w, m)?;
        Weight::new(f)
    }
}

/// Restrict a mesh function to the centred window of exponent `m`.
pub fn crop_mesh(f: &MeshFunction, m: i32) -> Result<MeshFunction> {
    let g = f.grid();
    if m < 1 || m > g.window_exp() {
        return Err(Error::config(format!("cannot crop window 2^{} to 2^{m}", g.window_exp())));
    }
    let omega: Vec<[u8; 2]> = (-m + 1..=g.fine_level()).map(|j| g.omega(j)).collect();
    let sub = GridSpec::with_omega(g.n(), g.fine_level(), m, &omega)?;
    let w = g.width();
    let ws = sub.width();
    let off = (w - ws) / 2;
    let src = f.values();
    let vals = if g.n() == 1 {
        src[off..off + ws].to_vec()
    } else {
        let mut v = Vec::with_capacity(ws * ws);
        for r in 0..ws {
            let row = (r + off) * w + off;
            v.extend_from_slice(&src[row..row + ws]);
        }
        v
    };
    MeshFunction::from_values(&sub, vals)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Family {
    /// The grid's own unclipped cubes.
    Grid,
    /// Third-shifted family; entry `d` is 1 when `alpha_d = 1/3`.
    Shifted([u8; 2]),
}

/// Grid cubes plus all `{0, 1/3}^n` families (the unshifted one only once for standard grids).
pub fn default_families(grid: &GridSpec) -> Vec<Family> {
    let mut out = Vec::new();
    if !grid.is_standard() {
        out.push(Family::Grid);
    }
    for a in 0..(1u8 << grid.n()) {
        out.push(Family::Shifted([a & 1, (a >> 1) & 1]));
    }
    out
}

/// A cube in third-cell units measured from the window corner.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FamilyCube {
    pub level: i32,
    pub lo: [i64; 2],
    pub side: i64,
}

impl FamilyCube {
    pub fn lower_f64(&self, grid: &GridSpec, d: usize) -> f64 {
        -2f64.powi(grid.window_exp()) + self.lo[d] as f64 / 3.0 * grid.cell_side()
    }

    pub fn side_f64(&self, grid: &GridSpec) -> f64 {
        self.side as f64 / 3.0 * grid.cell_side()
    }

    /// Cells overlapping the cube along one axis, with overlap in thirds.
    fn overlaps(&self, d: usize) -> impl Iterator<Item = (usize, i64)> {
        let lo = self.lo[d];
        let hi = lo + self.side;
        (lo.div_euclid(3)..=(hi - 1).div_euclid(3)).map(move |c| {
            let ov = hi.min(3 * c + 3) - lo.max(3 * c);
            (c as usize, ov)
        })
    }

    /// Cells whose centre lies in the cube.
    pub fn member_cells(&self, grid: &GridSpec) -> Vec<usize> {
        let w = grid.width();
        let axis = |d: usize| -> Vec<usize> {
            let lo = 2 * self.lo[d];
            let hi = lo + 2 * self.side;
            self.overlaps(d)
                .map(|(c, _)| c)
                .filter(|&c| {
                    let x = 6 * c as i64 + 3;
                    lo <= x && x < hi
                })
                .collect()
        };
        let a0 = axis(0);
        if grid.n() == 1 {
            a0
        } else {
            let a1 = axis(1);
            a1.iter().flat_map(|&c1| a0.iter().map(move |&c0| c1 * w + c0)).collect()
        }
    }
}

pub fn family_cubes(grid: &GridSpec, family: Family) -> Vec<FamilyCube> {
    let n = grid.n();
    let total = 3 * grid.width() as i64;
    let mut out = Vec::new();
    for k in grid.levels() {
        let s = 1i64 << (grid.fine_level() - k);
        let side = 3 * s;
        let mut starts: [Vec<i64>; 2] = [Vec::new(), Vec::new()];
        for (d, st) in starts.iter_mut().enumerate().take(n) {
            match family {
                Family::Grid => {
                    let g = grid.level_geom(k);
                    for j in 0..g.count[d] {
                        let a = g.start(d, j);
                        if a >= 0 && a + s <= grid.width() as i64 {
                            st.push(3 * a);
                        }
                    }
                }
                Family::Shifted(alpha) => {
                    let sigma = if k.rem_euclid(2) == 0 { 1 } else { -1 };
                    let base = (3 * (1i64 << (grid.fine_level() + grid.window_exp()))
                        + sigma * s * alpha[d] as i64)
                        .rem_euclid(side);
                    let mut u = base;
                    while u + side <= total {
                        st.push(u);
                        u += side;
                    }
                }
            }
        }
        if n == 1 {
            out.extend(starts[0].iter().map(|&a| FamilyCube { level: k, lo: [a, 0], side }));
        } else {
            for &b in &starts[1] {
                for &a in &starts[0] {
                    out.push(FamilyCube { level: k, lo: [a, b], side });
                }
            }
        }
    }
    out
}

pub fn all_cubes(grid: &GridSpec, families: &[Family]) -> Vec<FamilyCube> {
    let mut out: Vec<FamilyCube> = Vec::new();
    for &f in families {
        out.extend(family_cubes(grid, f));
    }
    out.sort_by_key(|c| (c.level, c.lo));
    out.dedup();
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stat {
    Mean,
    Min,
    Max,
}

/// Per-cube reductions of several mesh functions in one pass.
fn cube_stats(grid: &GridSpec, cube: &FamilyCube, channels: &[(&[f64], Stat)], out: &mut [f64]) {
    for (o, (_, s)) in out.iter_mut().zip(channels) {
        *o = match s {
            Stat::Mean => 0.0,
            Stat::Min => f64::INFINITY,
            Stat::Max => f64::NEG_INFINITY,
        };
    }
    let mut visit = |i: usize, ov: f64| {
        for (o, (v, s)) in out.iter_mut().zip(channels) {
            match s {
                Stat::Mean => *o += ov * v[i],
                Stat::Min => *o = o.min(v[i]),
                Stat::Max => *o = o.max(v[i]),
            }
        }
    };
    if grid.n() == 1 {
        for (c, ov) in cube.overlaps(0) {
            visit(c, ov as f64);
        }
    } else {
        let w = grid.width();
        let o0: Vec<(usize, i64)> = cube.overlaps(0).collect();
        for (c1, ov1) in cube.overlaps(1) {
            for &(c0, ov0) in &o0 {
                visit(c1 * w + c0, (ov0 * ov1) as f64);
            }
        }
    }
    let vol = (cube.side as f64).powi(grid.n() as i32);
    for (o, (_, s)) in out.iter_mut().zip(channels) {
        if *s == Stat::Mean {
            *o /= vol;
        }
    }
}

/// `sup_Q combine(stats_Q)` over the given families.
pub fn cube_sup(
    grid: &GridSpec,
    families: &[Family],
    channels: &[(&[f64], Stat)],
    combine: impl Fn(&[f64]) -> f64 + Sync,
) -> f64 {
    let cubes = all_cubes(grid, families);
    cubes
        .par_iter()
        .map_init(
            || vec![0.0; channels.len()],
            |buf, c| {
                cube_stats(grid, c, channels, buf);
                combine(buf)
            },
        )
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

/// Pointwise `sup_{Q contains x} combine(stats_Q)` at every cell centre.
pub fn cube_sup_pointwise(
    grid: &GridSpec,
    families: &[Family],
    channels: &[(&[f64], Stat)],
    combine: impl Fn(&[f64]) -> f64 + Sync,
) -> Vec<f64> {
    let cubes = all_cubes(grid, families);
    let vals: Vec<f64> = cubes
        .par_iter()
        .map_init(
            || vec![0.0; channels.len()],
            |buf, c| {
                cube_stats(grid, c, channels, buf);
                combine(buf)
            },
        )
        .collect();
    let mut out = vec![f64::NEG_INFINITY; grid.num_cells()];
    for (c, v) in cubes.iter().zip(vals) {
        for i in c.member_cells(grid) {
            if v > out[i] {
                out[i] = v;
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Finite,
    Divergent,
    /// Window too small for three nested windows.
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApReport {
    /// Constant on the full window (`None` when infinite).
    pub constant: Option<f64>,
    pub window_exp: i32,
    /// `(window exponent, constant)` for `M-2, M-1, M` when available.
    pub history: Vec<(i32, f64)>,
    /// `(c_M / c_{M-2})^{1/2}`.
    pub growth: Option<f64>,
    pub classification: Classification,
}

impl ApReport {
    pub fn is_finite(&self) -> bool {
        self.classification == Classification::Finite
    }
}

fn classify_history(history: &[(i32, f64)]) -> (Option<f64>, Classification) {
    if history.iter().any(|(_, c)| !c.is_finite()) {
        return (None, Classification::Divergent);
    }
    if history.len() < 3 {
        return (None, Classification::Undetermined);
    }
    let g = (history[2].1 / history[0].1).sqrt();
    let class = if g < GROWTH_THRESHOLD { Classification::Finite } else { Classification::Divergent };
    (Some(g), class)
}

/// Evaluate `constant` on the weights cropped to `M-2, M-1, M` and classify by growth.
pub fn windowed_report(ws: &[Weight], constant: impl Fn(&[Weight]) -> Result<f64>) -> Result<ApReport> {
    let grid = ws.first().ok_or_else(|| Error::config("empty weight vector"))?.grid().clone();
    for w in ws {
        grid.check_mesh(w.grid())?;
    }
    let m = grid.window_exp();
    let mut history = Vec::new();
    for mm in (m - 2).max(1)..=m {
        let c = if mm == m {
            constant(ws)?
        } else {
            let cropped = ws.iter().map(|w| w.crop(mm)).collect::<Result<Vec<_>>>()?;
            constant(&cropped)?
        };
        history.push((mm, c));
    }
    let (growth, classification) = classify_history(&history);
    let last = history.last().map(|h| h.1).unwrap_or(f64::NAN);
    Ok(ApReport {
        constant: last.is_finite().then_some(last),
        window_exp: m,
        history,
        growth,
        classification,
    })
}

fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

/// `[w]_{A_p}` on the window's cube families, `1 <= p < inf`.
pub fn ap_value(w: &Weight, p: f64, families: &[Family]) -> Result<f64> {
    if !(p >= 1.0) || p.is_infinite() {
        return Err(Error::Unsupported(format!(
            "single-weight A_p needs 1 <= p < inf (got {p}); use the A_inf probe"
        )));
    }
    let grid = w.grid();
    let v = w.values();
    if p == 1.0 {
        return Ok(cube_sup(grid, families, &[(v, Stat::Mean), (v, Stat::Min)], |s| s[0] / s[1]));
    }
    let e = 1.0 - conjugate(p);
    let dual: Vec<f64> = v.iter().map(|&x| pow_exact(x, e)).collect();
    Ok(cube_sup(grid, families, &[(v, Stat::Mean), (&dual, Stat::Mean)], |s| s[0] * pow_exact(s[1], p - 1.0)))
}

pub fn ap_constant(w: &Weight, p: f64) -> Result<ApReport> {
    windowed_report(std::slice::from_ref(w), |ws| ap_value(&ws[0], p, &default_families(ws[0].grid())))
}

fn multilinear_exponent(ps: &[f64]) -> Result<f64> {
    if ps.is_empty() || ps.iter().any(|&p| !(p >= 1.0)) {
        return Err(Error::config("multilinear exponents must lie in [1, inf]"));
    }
    let inv: f64 = ps.iter().map(|p| 1.0 / p).sum();
    Ok(if inv == 0.0 { f64::INFINITY } else { 1.0 / inv })
}

/// `[w]_{A_{p}}` with the endpoint conventions `p_i = 1` (ess-inf) and `p = inf` (ess-sup).
pub fn multilinear_ap_value(ws: &[Weight], ps: &[f64], families: &[Family]) -> Result<f64> {
    if ws.len() != ps.len() {
        return Err(Error::config("one exponent per weight"));
    }
    let p = multilinear_exponent(ps)?;
    let w = Weight::product(ws)?;
    let grid = w.grid().clone();
    let mut data: Vec<(Vec<f64>, Stat)> = Vec::new();
    if p.is_infinite() {
        data.push((w.values().to_vec(), Stat::Max));
    } else {
        data.push((w.values().iter().map(|&x| pow_exact(x, p)).collect(), Stat::Mean));
    }
    let mut exps = Vec::new();
    for (wi, &pi) in ws.iter().zip(ps) {
        if pi == 1.0 {
            data.push((wi.values().to_vec(), Stat::Min));
            exps.push(-1.0);
        } else {
            let q = conjugate(pi);
            data.push((wi.values().iter().map(|&x| pow_exact(x, -q)).collect(), Stat::Mean));
            exps.push(1.0 / q);
        }
    }
    let channels: Vec<(&[f64], Stat)> = data.iter().map(|(v, s)| (v.as_slice(), *s)).collect();
    Ok(cube_sup(&grid, families, &channels, |s| {
        let mut c = if p.is_infinite() { s[0] } else { pow_exact(s[0], 1.0 / p) };
        for (x, &e) in s[1..].iter().zip(&exps) {
            c *= pow_exact(*x, e);
        }
        c
    }))
}

pub fn multilinear_ap_constant(ws: &[Weight], ps: &[f64]) -> Result<ApReport> {
    let ps = ps.to_vec();
    windowed_report(ws, |w| multilinear_ap_value(w, &ps, &default_families(w[0].grid())))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Constituent {
    pub label: String,
    /// Power applied to the raw constant so that it scales like the multilinear one.
    pub normalization: f64,
    pub report: ApReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FactorizationReport {
    pub multilinear: ApReport,
    pub constituents: Vec<Constituent>,
    pub constituents_finite: bool,
    pub agreement: bool,
}

/// Constituent conditions `w^p in A_{mp}`, `w_i^{-p_i'} in A_{mp_i'}` with the
/// endpoint readings `w_i^{1/m} in A_1` (`p_i = 1`) and `w^{-1/m} in A_1` (`p = inf`).
pub fn factorization_check(ws: &[Weight], ps: &[f64]) -> Result<FactorizationReport> {
    let multilinear = multilinear_ap_constant(ws, ps)?;
    let p = multilinear_exponent(ps)?;
    let m = ws.len() as f64;
    let mut constituents = Vec::new();
    let normalized = |f: Box<dyn Fn(&[Weight]) -> Result<Weight> + Sync>, q: f64, norm: f64| {
        windowed_report(ws, move |w| {
            let v = f(w)?;
            Ok(pow_exact(ap_value(&v, q, &default_families(v.grid()))?, norm))
        })
    };
    if p.is_infinite() {
        let report = normalized(Box::new(move |w| Ok(Weight::product(w)?.powf(-1.0 / m))), 1.0, m)?;
        constituents.push(Constituent { label: "w^{-1/m} in A_1".into(), normalization: m, report });
    } else {
        let report = normalized(Box::new(move |w| Ok(Weight::product(w)?.powf(p))), m * p, 1.0 / p)?;
        constituents.push(Constituent { label: "w^p in A_{mp}".into(), normalization: 1.0 / p, report });
    }
    for (i, &pi) in ps.iter().enumerate() {
        if pi == 1.0 {
            let report = normalized(Box::new(move |w| Ok(w[i].powf(1.0 / m))), 1.0, m)?;
            constituents.push(Constituent { label: format!("w_{}^{{1/m}} in A_1", i + 1), normalization: m, report });
        } else {
            let q = conjugate(pi);
            let report = normalized(Box::new(move |w| Ok(w[i].powf(-q))), m * q, 1.0 / q)?;
            constituents.push(Constituent {
                label: format!("w_{}^{{-p'}} in A_{{mp'}}", i + 1),
                normalization: 1.0 / q,
                report,
            });
        }
    }
    let constituents_finite = constituents.iter().all(|c| c.report.is_finite());
    let agreement = constituents_finite == multilinear.is_finite();
    Ok(FactorizationReport { multilinear, constituents, constituents_finite, agreement })
}

/// `M(f)(x) = sup_{Q contains x} prod avg_Q |f_i|` over the default families.
pub fn multilinear_maximal(fs: &[&MeshFunction]) -> Result<MeshFunction> {
    let first = fs.first().ok_or_else(|| Error::config("no functions"))?;
    for f in &fs[1..] {
        first.check_same(f)?;
    }
    let grid = first.grid();
    let abs: Vec<Vec<f64>> = fs.iter().map(|f| f.values().iter().map(|v| v.abs()).collect()).collect();
    let channels: Vec<(&[f64], Stat)> = abs.iter().map(|v| (v.as_slice(), Stat::Mean)).collect();
    let vals = cube_sup_pointwise(grid, &default_families(grid), &channels, |s| s.iter().product());
    MeshFunction::from_values(grid, vals)
}

pub fn bilinear_maximal(f1: &MeshFunction, f2: &MeshFunction) -> Result<MeshFunction> {
    multilinear_maximal(&[f1, f2])
}

/// `inf_c (sum_j mu_j |v_j - c|^lambda)` by scanning `c` over the values.
fn best_constant(pairs: &mut [(f64, f64)], lambda: f64) -> f64 {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    if lambda == 1.0 {
        // weighted median
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let mut acc = 0.0;
        let mut med = pairs[0].0;
        for &(v, m) in pairs.iter() {
            acc += m;
            if acc >= total / 2.0 {
                med = v;
                break;
            }
        }
        return pairs.iter().map(|&(v, m)| m * (v - med).abs()).sum();
    }
    let mut best = f64::INFINITY;
    let mut last = f64::NAN;
    for &(c, _) in pairs.iter() {
        if c == last {
            continue;
        }
        last = c;
        let s: f64 = pairs.iter().map(|&(v, m)| m * pow_exact((v - c).abs(), lambda)).sum();
        best = best.min(s);
    }
    best
}

fn cube_pairs(grid: &GridSpec, cube: &FamilyCube, v: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    if grid.n() == 1 {
        for (c, ov) in cube.overlaps(0) {
            out.push((v[c], ov as f64));
        }
    } else {
        let w = grid.width();
        let o0: Vec<(usize, i64)> = cube.overlaps(0).collect();
        for (c1, ov1) in cube.overlaps(1) {
            for &(c0, ov0) in &o0 {
                out.push((v[c1 * w + c0], (ov0 * ov1) as f64));
            }
        }
    }
    out
}

/// `M^#_lambda f(x) = sup_{Q contains x} inf_c (avg_Q |f - c|^lambda)^{1/lambda}`, `0 < lambda <= 1`.
pub fn sharp_maximal(f: &MeshFunction, lambda: f64) -> Result<MeshFunction> {
    if !(lambda > 0.0) {
        return Err(Error::config("lambda must be positive"));
    }
    if lambda > 1.0 {
        return Err(Error::Unsupported(format!("sharp maximal function needs lambda <= 1 (got {lambda})")));
    }
    let grid = f.grid();
    let cubes = all_cubes(grid, &default_families(grid));
    let vals: Vec<f64> = cubes
        .par_iter()
        .map(|c| {
            let mut pairs = cube_pairs(grid, c, f.values());
            let vol = (c.side as f64).powi(grid.n() as i32);
            pow_exact(best_constant(&mut pairs, lambda) / vol, 1.0 / lambda)
        })
        .collect();
    let mut out = vec![0.0; grid.num_cells()];
    for (c, v) in cubes.iter().zip(vals) {
        for i in c.member_cells(grid) {
            out[i] = f64::max(out[i], v);
        }
    }
    MeshFunction::from_values(grid, out)
}

/// `||(M^#_lambda f) w||_inf`.
pub fn bmo_weighted_norm(f: &MeshFunction, lambda: f64, w: Option<&Weight>) -> Result<f64> {
    let s = sharp_maximal(f, lambda)?;
    Ok(match w {
        None => s.max_abs(),
        Some(w) => s.mul(w.mesh())?.max_abs(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Interpolation {
    #[serde(skip)]
    pub u: Vec<Weight>,
    pub r: Vec<f64>,
    pub report: ApReport,
}

/// Solve `w_i = u_i^{1-theta} v_i^theta` and `1/p_i = (1-theta)/r_i + theta/s_i`, then report `[u]_{A_r}`.
pub fn interpolate_weights(ws: &[Weight], vs: &[Weight], ps: &[f64], ss: &[f64], theta: f64) -> Result<Interpolation> {
    if !(0.0 < theta && theta < 1.0) {
        return Err(Error::config("theta must lie in (0, 1)"));
    }
    if ws.len() != vs.len() || ws.len() != ps.len() || ws.len() != ss.len() {
        return Err(Error::config("weight and exponent vectors must have equal length"));
    }
    let mut r = Vec::new();
    for (&p, &s) in ps.iter().zip(ss) {
        let inv = (1.0 / p - theta / s) / (1.0 - theta);
        if !(0.0..1.0).contains(&inv) {
            return Err(Error::config(format!("no r in (1, inf] solves 1/{p} = (1-t)/r + t/{s} at t={theta}")));
        }
        r.push(if inv == 0.0 { f64::INFINITY } else { 1.0 / inv });
    }
    let u = ws
        .iter()
        .zip(vs)
        .map(|(w, v)| {
            let vals = w.mesh().zip_with(v.mesh(), |a, b| (a * b.powf(-theta)).powf(1.0 / (1.0 - theta)))?;
            Weight::new(vals)
        })
        .collect::<Result<Vec<_>>>()?;
    let report = multilinear_ap_constant(&u, &r)?;
    Ok(Interpolation { u, r, report })
}

pub const AINF_LATTICE: [f64; 8] = [1.0, 1.25, 1.5, 2.0, 3.0, 4.0, 8.0, 16.0];
pub const RH_LATTICE: [f64; 8] = [1.01, 1.05, 1.1, 1.25, 1.5, 2.0, 3.0, 4.0];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AinfProbe {
    /// Smallest lattice exponent classified finite.
    pub min_p: Option<f64>,
    pub reports: Vec<(f64, ApReport)>,
    pub heuristic: bool,
}

/// Membership in the union of the `A_p` classes, tested on a fixed exponent lattice.
pub fn ainf_probe(w: &Weight) -> Result<AinfProbe> {
    let mut reports = Vec::new();
    let mut min_p = None;
    for &p in &AINF_LATTICE {
        let r = ap_constant(w, p)?;
        if min_p.is_none() && r.is_finite() {
            min_p = Some(p);
        }
        reports.push((p, r));
    }
    Ok(AinfProbe { min_p, reports, heuristic: true })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReverseHolder {
    /// Largest lattice exponent whose constant `sup (avg w^r)^{1/r} / avg w` is classified finite.
    pub best_r: Option<f64>,
    pub reports: Vec<(f64, ApReport)>,
}

pub fn reverse_holder_search(w: &Weight) -> Result<ReverseHolder> {
    let mut reports = Vec::new();
    let mut best_r = None;
    for &r in &RH_LATTICE {
        let rep = windowed_report(std::slice::from_ref(w), |ws| {
            let v = ws[0].values();
            let pr: Vec<f64> = v.iter().map(|&x| pow_exact(x, r)).collect();
            Ok(cube_sup(ws[0].grid(), &default_families(ws[0].grid()), &[(&pr, Stat::Mean), (v, Stat::Mean)], |s| {
                pow_exact(s[0], 1.0 / r) / s[1]
            }))
        })?;
        if rep.is_finite() {
            best_r = Some(r);
        }
        reports.push((r, rep));
    }
    Ok(ReverseHolder { best_r, reports })
}
