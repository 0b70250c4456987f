//! Numerical probes for compactness: operator-norm lower bounds, projection
//! tails, Kolmogorov-Riesz profiles, weak compactness, kernel envelopes and
//! the `T(1, 1)` coefficient probe.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DyadicCube, GridSpec};
use crate::haar::{haar_eval, num_patterns};
use crate::lorentz::{
    averaged_modulus, deserialize_exponent, lp_norm, serialize_exponent, tail_restrict, translate, weak_norm,
    MeasureSpec,
};
use crate::mesh::MeshFunction;
use crate::operators::{BilinearOperator, CoeffSequence, Kernel};
use crate::weights::Weight;

/// `L^{p1} x L^{p2} -> L^p` or `L^{p, inf}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exponents {
    #[serde(serialize_with = "serialize_exponent", deserialize_with = "deserialize_exponent")]
    pub p1: f64,
    #[serde(serialize_with = "serialize_exponent", deserialize_with = "deserialize_exponent")]
    pub p2: f64,
    pub p: f64,
    #[serde(default)]
    pub weak: bool,
}

impl Exponents {
    pub fn new(p1: f64, p2: f64, p: f64, weak: bool) -> Result<Self> {
        let e = Exponents { p1, p2, p, weak };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p1 >= 1.0 && self.p2 >= 1.0 && self.p > 0.0 && self.p.is_finite()) {
            return Err(Error::config(format!("exponents {self:?} out of range")));
        }
        if (1.0 / self.p - 1.0 / self.p1 - 1.0 / self.p2).abs() > 1e-12 {
            return Err(Error::config(format!("1/p must equal 1/p1 + 1/p2 ({self:?})")));
        }
        Ok(())
    }

    pub fn input_exponent(&self, slot: usize) -> f64 {
        if slot == 0 {
            self.p1
        } else {
            self.p2
        }
    }

    pub fn output_norm(&self, f: &MeshFunction) -> Result<f64> {
        if self.weak {
            Ok(weak_norm(f, self.p))
        } else {
            lp_norm(f, self.p, &MeasureSpec::Lebesgue)
        }
    }

    /// `L^1 x L^1 -> L^{1/2, inf}`.
    pub fn is_endpoint(&self) -> bool {
        self.p1 == 1.0 && self.p2 == 1.0
    }
}

/// `(w1, w2)` and `w = w1 w2`.
#[derive(Clone, Debug)]
pub struct WeightPair {
    pub w1: Weight,
    pub w2: Weight,
    pub w: Weight,
}

impl WeightPair {
    pub fn new(w1: Weight, w2: Weight) -> Result<Self> {
        let w = Weight::product(&[w1.clone(), w2.clone()])?;
        Ok(WeightPair { w1, w2, w })
    }

    fn input(&self, slot: usize) -> &Weight {
        if slot == 0 {
            &self.w1
        } else {
            &self.w2
        }
    }
}

fn weighted(f: &MeshFunction, w: Option<&Weight>) -> Result<MeshFunction> {
    match w {
        Some(w) => f.mul(&w.mesh().regrid(f.grid())?),
        None => Ok(f.clone()),
    }
}

#[derive(Clone, Debug)]
pub struct Probe {
    pub label: String,
    pub f1: MeshFunction,
    pub f2: MeshFunction,
}

/// Normalized input pairs, `||f_i w_i||_{L^{p_i}} = 1`.
#[derive(Clone, Debug)]
pub struct ProbeSet {
    pub exponents: Exponents,
    pub probes: Vec<Probe>,
}

#[derive(Clone, Copy, Debug)]
enum ProbeKind {
    Atom { cube: DyadicCube, pair: usize },
    Indicator(DyadicCube),
    Window,
    Random,
}

const ATOM_PAIRS: [[bool; 2]; 4] = [[true, false], [true, true], [false, false], [false, true]];
pub const RANDOM_PROBES: usize = 32;

/// Levels ordered outward from the unit scale.
fn level_order(lo: i32, hi: i32) -> Vec<i32> {
    let mut out = Vec::new();
    for d in 0..=(hi - lo).max(0) + lo.abs() + hi.abs() {
        for k in [d, -d] {
            if k >= lo && k <= hi && !out.contains(&k) {
                out.push(k);
            }
        }
    }
    out
}

fn nearest_cubes(grid: &GridSpec, level: i32, count: usize) -> Vec<DyadicCube> {
    let mut cubes = grid.cubes_at_level(level);
    let key = |c: &DyadicCube| {
        let x = c.center_f64();
        let dist = x[..c.n].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let neg = x[..c.n].iter().sum::<f64>() < 0.0;
        (dist, neg)
    };
    cubes.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
    cubes.truncate(count);
    cubes
}

impl ProbeSet {
    /// Haar atom pairs up to level `min(L, 6) - 1`, dyadic indicator pairs and
    /// seeded random pairs, interleaved, first `count` of the stream.
    pub fn standard(
        grid: &GridSpec,
        exponents: &Exponents,
        weights: Option<&WeightPair>,
        count: usize,
        seed: u64,
    ) -> Result<Self> {
        exponents.validate()?;
        let top = grid.fine_level().min(6) - 1;
        let mut atoms = Vec::new();
        for rank in 0..2 {
            for pair in 0..ATOM_PAIRS.len() {
                for level in level_order(grid.coarsest_level(), top) {
                    if let Some(cube) = nearest_cubes(grid, level, 2).get(rank) {
                        atoms.push(ProbeKind::Atom { cube: *cube, pair });
                    }
                }
            }
        }
        let mut indicators = vec![ProbeKind::Window];
        for rank in 0..2 {
            for level in level_order(grid.coarsest_level(), grid.fine_level() - 1) {
                if let Some(cube) = nearest_cubes(grid, level, 2).get(rank) {
                    indicators.push(ProbeKind::Indicator(*cube));
                }
            }
        }
        let mut kinds = Vec::with_capacity(count);
        let (mut ia, mut ii, mut ir) = (0, 0, 0);
        while kinds.len() < count {
            let before = kinds.len();
            if ia < atoms.len() {
                kinds.push(atoms[ia]);
                ia += 1;
            }
            if kinds.len() < count && ii < indicators.len() {
                kinds.push(indicators[ii]);
                ii += 1;
            }
            if kinds.len() < count && (ir < RANDOM_PROBES || kinds.len() == before) {
                kinds.push(ProbeKind::Random);
                ir += 1;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eta = num_patterns(grid.n()) as u8;
        let mut probes = Vec::with_capacity(count);
        for (i, kind) in kinds.into_iter().enumerate() {
            let (label, f1, f2) = match kind {
                ProbeKind::Atom { cube, pair } => {
                    let h = |c: bool| haar_eval(grid, &cube, if c { eta } else { 0 });
                    let [c1, c2] = ATOM_PAIRS[pair];
                    (format!("atom{}{}:{}:{:?}", c1 as u8, c2 as u8, cube.level, &cube.index[..cube.n]), h(c1)?, h(c2)?)
                }
                ProbeKind::Indicator(cube) => {
                    let f = MeshFunction::cube_indicator(grid, &cube);
                    (format!("indicator:{}:{:?}", cube.level, &cube.index[..cube.n]), f.clone(), f)
                }
                ProbeKind::Window => {
                    let f = MeshFunction::constant(grid, 1.0);
                    ("window".to_string(), f.clone(), f)
                }
                ProbeKind::Random => {
                    let mut draw = || {
                        MeshFunction::from_values(grid, (0..grid.num_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    };
                    (format!("random:{i}"), draw()?, draw()?)
                }
            };
            let f1 = normalize(&f1, exponents, weights, 0)?;
            let f2 = normalize(&f2, exponents, weights, 1)?;
            probes.push(Probe { label, f1, f2 });
        }
        Ok(ProbeSet { exponents: *exponents, probes })
    }
}

fn normalize(f: &MeshFunction, e: &Exponents, weights: Option<&WeightPair>, slot: usize) -> Result<MeshFunction> {
    let fw = weighted(f, weights.map(|w| w.input(slot)))?;
    let norm = lp_norm(&fw, e.input_exponent(slot), &MeasureSpec::Lebesgue)?;
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::Domain("probe with zero or infinite norm".into()));
    }
    Ok(f.scale(1.0 / norm))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OpnormEstimate {
    pub value: f64,
    pub best: String,
    pub evaluations: usize,
}

fn output_value(
    t: &BilinearOperator,
    f1: &MeshFunction,
    f2: &MeshFunction,
    e: &Exponents,
    weights: Option<&WeightPair>,
) -> Result<f64> {
    let out = weighted(&t.apply(f1, f2)?, weights.map(|w| &w.w))?;
    e.output_norm(&out)
}

/// Every fourth evaluation perturbs the best pair so far along a random Haar
/// direction; the rest walk the probe stream.
fn search(
    t: &BilinearOperator,
    probes: &ProbeSet,
    weights: Option<&WeightPair>,
    budget: usize,
    seed: u64,
) -> Result<OpnormEstimate> {
    let e = &probes.exponents;
    let base: Vec<f64> = probes
        .probes
        .par_iter()
        .map(|p| output_value(t, &p.f1, &p.f2, e, weights))
        .collect::<Result<_>>()?;
    let grid = probes.probes[0].f1.grid().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut next = 0;
    let mut best: Option<(f64, MeshFunction, MeshFunction, String)> = None;
    for step in 0..budget {
        let refine = step % 4 == 3 && best.is_some();
        if refine {
            let (bv, b1, b2, label) = best.as_ref().unwrap();
            let slot = rng.gen_range(0..2);
            let level = rng.gen_range(grid.coarsest_level()..grid.fine_level());
            let cubes = grid.level_geom(level).num_cubes(grid.n());
            let cube = grid.cube_local(level, grid.unlinear_local(level, rng.gen_range(0..cubes)));
            let eta = rng.gen_range(0..=num_patterns(grid.n()) as u8);
            let sign = if rng.gen_bool(0.5) { 0.5 } else { -0.5 };
            let dir = normalize(&haar_eval(&grid, &cube, eta)?, e, weights, slot)?;
            let src = if slot == 0 { b1 } else { b2 };
            let mut g = src.clone();
            g.axpy(sign, &dir)?;
            let Ok(g) = normalize(&g, e, weights, slot) else { continue };
            let (c1, c2) = if slot == 0 { (g, b2.clone()) } else { (b1.clone(), g) };
            let v = output_value(t, &c1, &c2, e, weights)?;
            if v > *bv {
                let label = format!("{}+refined", label.trim_end_matches("+refined"));
                best = Some((v, c1, c2, label));
            }
        } else if next < base.len() {
            let p = &probes.probes[next];
            if best.as_ref().is_none_or(|b| base[next] > b.0) {
                best = Some((base[next], p.f1.clone(), p.f2.clone(), p.label.clone()));
            }
            next += 1;
        }
    }
    let (value, _, _, best) = best.unwrap_or((0.0, MeshFunction::zeros(&grid), MeshFunction::zeros(&grid), String::new()));
    Ok(OpnormEstimate { value, best, evaluations: budget })
}

fn base_count(budget: usize) -> usize {
    budget - budget / 4
}

/// Lower bound for `||T||` from the probe stream plus greedy refinement.
pub fn opnorm_lower(
    t: &BilinearOperator,
    grid: &GridSpec,
    exponents: &Exponents,
    weights: Option<&WeightPair>,
    budget: usize,
    seed: u64,
) -> Result<OpnormEstimate> {
    if budget == 0 {
        return Err(Error::config("probe budget must be at least 1"));
    }
    let probes = ProbeSet::standard(grid, exponents, weights, base_count(budget), seed)?;
    search(t, &probes, weights, budget, seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decay {
    Decaying,
    Flat,
}

/// Running max from the right: the least nonincreasing majorant.
pub fn monotone_envelope(values: &[f64]) -> Vec<f64> {
    let mut out = values.to_vec();
    for i in (0..out.len().saturating_sub(1)).rev() {
        out[i] = out[i].max(out[i + 1]);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayCurve {
    pub label: String,
    pub abscissa: Vec<f64>,
    pub values: Vec<f64>,
    pub envelope: Vec<f64>,
    pub budget: usize,
    pub seed: u64,
}

impl DecayCurve {
    pub fn new(label: impl Into<String>, abscissa: Vec<f64>, values: Vec<f64>, budget: usize, seed: u64) -> Self {
        let envelope = monotone_envelope(&values);
        DecayCurve { label: label.into(), abscissa, values, envelope, budget, seed }
    }

    /// Decaying when the envelope falls to at most `threshold` times its start.
    pub fn classify(&self, threshold: f64) -> Decay {
        match (self.envelope.first(), self.envelope.last()) {
            (Some(&first), Some(&last)) if first > 0.0 && last > threshold * first => Decay::Flat,
            _ => Decay::Decaying,
        }
    }
}

/// `N -> ||P_N^perp T||` lower bounds on a shared probe stream.
pub fn projection_tail_curve(
    t: &BilinearOperator,
    grid: &GridSpec,
    ns: &[i32],
    exponents: &Exponents,
    weights: Option<&WeightPair>,
    budget: usize,
    seed: u64,
) -> Result<DecayCurve> {
    if budget == 0 {
        return Err(Error::config("probe budget must be at least 1"));
    }
    let probes = ProbeSet::standard(grid, exponents, weights, base_count(budget), seed)?;
    let mut values = Vec::with_capacity(ns.len());
    for &n in ns {
        let proj = BilinearOperator::projected(n, t.clone());
        values.push(search(&proj, &probes, weights, budget, seed)?.value);
    }
    Ok(DecayCurve::new("projection-tail", ns.iter().map(|&n| n as f64).collect(), values, budget, seed))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KrProfile {
    pub bound: f64,
    pub tail: DecayCurve,
    pub translation: DecayCurve,
    pub averaged: DecayCurve,
}

/// Kolmogorov-Riesz quantities of the image of the probe set.
pub fn kr_profile(
    t: &BilinearOperator,
    probes: &ProbeSet,
    weights: Option<&WeightPair>,
    tails: &[f64],
    shifts: &[f64],
    radii: &[f64],
    a: f64,
) -> Result<KrProfile> {
    let e = &probes.exponents;
    let outs: Vec<MeshFunction> = probes
        .probes
        .par_iter()
        .map(|p| weighted(&t.apply(&p.f1, &p.f2)?, weights.map(|w| &w.w)))
        .collect::<Result<_>>()?;
    let sup = |f: &(dyn Fn(&MeshFunction) -> Result<MeshFunction> + Sync)| -> Result<f64> {
        let vals: Vec<f64> = outs.par_iter().map(|o| e.output_norm(&f(o)?)).collect::<Result<_>>()?;
        Ok(vals.into_iter().fold(0.0, f64::max))
    };
    let bound = sup(&|o| Ok(o.clone()))?;
    let mut tail = Vec::new();
    for &r in tails {
        tail.push(sup(&|o| Ok(tail_restrict(o, r)))?);
    }
    let mut trans = Vec::new();
    for &h in shifts {
        trans.push(sup(&|o| translate(o, [h, 0.0])?.sub(o))?);
    }
    let mut avg = Vec::new();
    for &r in radii {
        avg.push(sup(&|o| averaged_modulus(o, r, a))?);
    }
    let budget = probes.probes.len();
    Ok(KrProfile {
        bound,
        tail: DecayCurve::new("tail", tails.to_vec(), tail, budget, 0),
        translation: DecayCurve::new("translation", shifts.to_vec(), trans, budget, 0),
        averaged: DecayCurve::new("averaged-modulus", radii.to_vec(), avg, budget, 0),
    })
}

/// `|<T(1_Q, 1_Q), 1_Q>| / |Q|`.
pub fn weak_compactness_value(t: &BilinearOperator, grid: &GridSpec, cube: &DyadicCube) -> Result<f64> {
    let ind = MeshFunction::cube_indicator(grid, cube);
    Ok(t.apply(&ind, &ind)?.inner(&ind)?.abs() / cube.volume_f64())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CubeValue {
    pub level: i32,
    pub index: Vec<i64>,
    pub center: Vec<f64>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakCompactness {
    /// Sup over cubes near the origin, by side length as it shrinks.
    pub small: DecayCurve,
    /// Same, as the side grows.
    pub large: DecayCurve,
    /// Unit cubes by distance band `[2^j, 2^{j+1})` of the centre.
    pub far: DecayCurve,
    pub samples: Vec<CubeValue>,
}

pub fn weak_compactness_curve(t: &BilinearOperator, grid: &GridSpec, per_level: usize) -> Result<WeakCompactness> {
    if per_level == 0 {
        return Err(Error::config("need at least one cube per level"));
    }
    let eval = |cubes: &[DyadicCube]| -> Result<Vec<CubeValue>> {
        cubes
            .par_iter()
            .map(|c| {
                Ok(CubeValue {
                    level: c.level,
                    index: c.index[..c.n].to_vec(),
                    center: c.center_f64()[..c.n].to_vec(),
                    value: weak_compactness_value(t, grid, c)?,
                })
            })
            .collect()
    };
    let mut samples = Vec::new();
    let mut sweep = |levels: Vec<i32>| -> Result<(Vec<f64>, Vec<f64>)> {
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for k in levels {
            let cubes: Vec<DyadicCube> =
                nearest_cubes(grid, k, per_level).into_iter().filter(|c| !c.clipped).collect();
            let vals = eval(&cubes)?;
            xs.push(2f64.powi(-k));
            ys.push(vals.iter().map(|v| v.value).fold(0.0, f64::max));
            samples.extend(vals);
        }
        Ok((xs, ys))
    };
    let (sx, sy) = sweep((0..grid.fine_level()).collect())?;
    let (lx, ly) = sweep((grid.coarsest_level()..=0).rev().collect())?;
    let unit = if grid.fine_level() >= 0 { nearest_cubes(grid, 0, usize::MAX) } else { Vec::new() };
    let (mut fx, mut fy) = (Vec::new(), Vec::new());
    for j in 0..grid.window_exp() {
        let (lo, hi) = (2f64.powi(j), 2f64.powi(j + 1));
        let band: Vec<DyadicCube> = unit
            .iter()
            .filter(|c| {
                let x = c.center_f64();
                let d = x[..c.n].iter().fold(0.0f64, |m, v| m.max(v.abs()));
                !c.clipped && d >= lo && d < hi
            })
            .take(per_level)
            .copied()
            .collect();
        if band.is_empty() {
            continue;
        }
        let vals = eval(&band)?;
        fx.push(lo);
        fy.push(vals.iter().map(|v| v.value).fold(0.0, f64::max));
        samples.extend(vals);
    }
    Ok(WeakCompactness {
        small: DecayCurve::new("small-cubes", sx, sy, per_level, 0),
        large: DecayCurve::new("large-cubes", lx, ly, per_level, 0),
        far: DecayCurve::new("far-cubes", fx, fy, per_level, 0),
        samples,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelEnvelope {
    pub kernel: String,
    /// `sup G` as `s = |x-y| + |x-z|` shrinks.
    pub small: DecayCurve,
    /// `sup G` as `s` grows.
    pub large: DecayCurve,
    /// `sup G` at `s = 1` as `|x+y| + |x+z|` grows.
    pub far: DecayCurve,
}

pub const ENVELOPE_POINTS: i32 = 11;

fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        if r > 1e-3 && r <= 1.0 {
            return v.into_iter().map(|t| t / r).collect();
        }
    }
}

/// Sampled `sup G`, `G = |K(x, y, z)| (|x-y| + |x-z|)^{2n}`, over shells.
pub fn kernel_envelope(kernel: Kernel, n: usize, samples: usize, seed: u64) -> Result<KernelEnvelope> {
    if !(1..=2).contains(&n) || samples == 0 {
        return Err(Error::config("kernel envelope needs n in {1, 2} and at least one sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shell = |s: f64, far: Option<f64>| -> Result<f64> {
        let mut best: f64 = 0.0;
        for _ in 0..samples {
            let split: f64 = rng.gen_range(0.0..=1.0);
            let u: Vec<f64> = unit_vector(&mut rng, n).into_iter().map(|t| t * s * split).collect();
            let v: Vec<f64> = unit_vector(&mut rng, n).into_iter().map(|t| t * s * (1.0 - split)).collect();
            let x: Vec<f64> = match far {
                Some(t) => unit_vector(&mut rng, n).into_iter().map(|e| e * t / 4.0).collect(),
                None => (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            };
            let y: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a - b).collect();
            let z: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a - b).collect();
            let k = kernel.eval(&x, &y, &z);
            if !k.is_finite() {
                return Err(Error::Domain(format!("kernel is not finite at x={x:?}, y={y:?}, z={z:?}")));
            }
            best = best.max(k.abs() * s.powi(2 * n as i32));
        }
        Ok(best)
    };
    let small_s: Vec<f64> = (0..ENVELOPE_POINTS).map(|j| 2f64.powi(-j)).collect();
    let large_s: Vec<f64> = (0..ENVELOPE_POINTS).map(|j| 2f64.powi(j)).collect();
    let far_t: Vec<f64> = (1..=ENVELOPE_POINTS).map(|j| 2f64.powi(j)).collect();
    let small = small_s.iter().map(|&s| shell(s, None)).collect::<Result<Vec<_>>>()?;
    let large = large_s.iter().map(|&s| shell(s, None)).collect::<Result<Vec<_>>>()?;
    let far = far_t.iter().map(|&t| shell(1.0, Some(t))).collect::<Result<Vec<_>>>()?;
    Ok(KernelEnvelope {
        kernel: kernel.name().to_string(),
        small: DecayCurve::new("small-s", small_s, small, samples, seed),
        large: DecayCurve::new("large-s", large_s, large, samples, seed),
        far: DecayCurve::new("far-field", far_t, far, samples, seed),
    })
}

/// Smooth bump, 1 on the unit ball and 0 outside the ball of radius 2.
pub fn bump(x: &[f64]) -> f64 {
    let r = x.iter().map(|t| t * t).sum::<f64>().sqrt();
    let e = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    let s = 2.0 - r;
    if s >= 1.0 {
        1.0
    } else if s <= 0.0 {
        0.0
    } else {
        e(s) / (e(s) + e(1.0 - s))
    }
}

/// `Phi(x / 2^k)` on the mesh.
pub fn cutoff(grid: &GridSpec, k: i32) -> MeshFunction {
    let scale = 2f64.powi(-k);
    let n = grid.n();
    MeshFunction::from_fn(grid, |x| bump(&x[..n].iter().map(|t| t * scale).collect::<Vec<_>>()))
}

#[derive(Clone, Debug)]
pub struct T11Probe {
    pub k: i32,
    /// `beta_I = <T(Phi_k, Phi_k), h_I>` on each grid.
    pub betas: Vec<CoeffSequence>,
    pub bmo: f64,
    /// `||beta_k - beta_{k-1}||_BMO / ||beta_k||_BMO`, max over grids.
    pub change: Option<f64>,
    /// CMO tail of `beta`, max over grids.
    pub tail: DecayCurve,
}

fn member_grids(t: &BilinearOperator, grid: &GridSpec) -> Vec<GridSpec> {
    match t {
        BilinearOperator::MonteCarlo { members, .. } => {
            members.iter().map(|m| m.grid().cloned().unwrap_or_else(|| grid.clone())).collect()
        }
        _ => vec![t.grid().cloned().unwrap_or_else(|| grid.clone())],
    }
}

pub fn t11_probe(t: &BilinearOperator, grid: &GridSpec, k: Option<i32>) -> Result<T11Probe> {
    let k = k.unwrap_or(grid.window_exp() - 1);
    if k >= grid.window_exp() {
        return Err(Error::resolution(format!(
            "cutoff scale 2^{k} does not fit the window [-2^{m}, 2^{m})",
            m = grid.window_exp()
        )));
    }
    let grids = member_grids(t, grid);
    let betas_at = |k: i32| -> Result<Vec<CoeffSequence>> {
        let phi = cutoff(grid, k);
        let out = t.apply(&phi, &phi)?;
        grids.iter().map(|g| Ok(CoeffSequence::from_function(&out.regrid(g)?))).collect()
    };
    let betas = betas_at(k)?;
    let bmo = betas.iter().map(|b| b.bmo_norm()).fold(0.0, f64::max);
    let change = if k >= grid.coarsest_level() && k > -grid.fine_level() {
        let prev = betas_at(k - 1)?;
        let mut worst: f64 = 0.0;
        for (a, b) in betas.iter().zip(&prev) {
            let mut d = a.clone();
            for lev in a.grid().coarsest_level()..a.grid().fine_level() {
                for (x, y) in d.coeffs_mut().level_mut(lev).iter_mut().zip(b.coeffs().level(lev)) {
                    *x -= y;
                }
            }
            let base = a.bmo_norm();
            worst = worst.max(if base > 0.0 { d.bmo_norm() / base } else { d.bmo_norm() });
        }
        Some(worst)
    } else {
        None
    };
    let top = grid.fine_level().min(grid.window_exp());
    let ns: Vec<i32> = (0..=top).collect();
    let mut tail = Vec::new();
    for &n in &ns {
        let mut v: f64 = 0.0;
        for b in &betas {
            v = v.max(b.cmo_tail(n)?);
        }
        tail.push(v);
    }
    Ok(T11Probe {
        k,
        betas,
        bmo,
        change,
        tail: DecayCurve::new("t11-cmo-tail", ns.iter().map(|&n| n as f64).collect(), tail, grids.len(), 0),
    })
}

fn default_budget() -> usize {
    64
}

fn default_threshold() -> f64 {
    0.1
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KrConfig {
    pub tails: Vec<f64>,
    pub shifts: Vec<f64>,
    pub radii: Vec<f64>,
    #[serde(default = "default_a")]
    pub a: f64,
}

fn default_a() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    pub exponents: Exponents,
    /// Projection indices; defaults to `0..min(L, M)`.
    #[serde(default)]
    pub ns: Option<Vec<i32>>,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_true")]
    pub projection_tail: bool,
    #[serde(default)]
    pub kr: Option<KrConfig>,
    /// Cubes per level for the weak compactness sweep.
    #[serde(default)]
    pub weak_compactness: Option<usize>,
    /// Samples per shell for the kernel envelope (kernel operators only).
    #[serde(default)]
    pub kernel_envelope: Option<usize>,
    /// Cutoff scale for the `T(1, 1)` probe; `null` skips it.
    #[serde(default)]
    pub t11: Option<i32>,
}

impl ReportConfig {
    pub fn new(exponents: Exponents) -> Self {
        ReportConfig {
            exponents,
            ns: None,
            budget: default_budget(),
            seed: 0,
            threshold: default_threshold(),
            projection_tail: true,
            kr: None,
            weak_compactness: None,
            kernel_envelope: None,
            t11: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Classified<T> {
    pub classification: Decay,
    #[serde(flatten)]
    pub data: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct T11Summary {
    pub k: i32,
    pub grids: usize,
    pub bmo: f64,
    pub change: Option<f64>,
    pub tail: DecayCurve,
    pub classification: Decay,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompactnessReport {
    pub operator: serde_json::Value,
    pub exponents: Exponents,
    pub threshold: f64,
    pub projection_tail: Option<Classified<DecayCurve>>,
    pub kr: Option<KrProfile>,
    pub kr_classification: Option<[Decay; 3]>,
    pub weak_compactness: Option<WeakCompactness>,
    pub weak_compactness_classification: Option<[Decay; 3]>,
    pub kernel_envelope: Option<KernelEnvelope>,
    pub t11: Option<T11Summary>,
    /// A flat endpoint projection tail does not show non-compactness.
    pub endpoint_ambiguous: bool,
    pub notes: Vec<String>,
}

pub fn compactness_report(
    t: &BilinearOperator,
    grid: &GridSpec,
    weights: Option<&WeightPair>,
    cfg: &ReportConfig,
) -> Result<CompactnessReport> {
    cfg.exponents.validate()?;
    if !(cfg.threshold > 0.0 && cfg.threshold < 1.0) {
        return Err(Error::config("classification threshold must lie in (0, 1)"));
    }
    let mut notes = Vec::new();
    let top = grid.fine_level().min(grid.window_exp()) - 1;
    let ns = cfg.ns.clone().unwrap_or_else(|| (0..=top).collect());
    let projection_tail = if cfg.projection_tail {
        let curve = projection_tail_curve(t, grid, &ns, &cfg.exponents, weights, cfg.budget, cfg.seed)?;
        Some(Classified { classification: curve.classify(cfg.threshold), data: curve })
    } else {
        None
    };
    let kr = match &cfg.kr {
        Some(k) => {
            let probes = ProbeSet::standard(grid, &cfg.exponents, weights, base_count(cfg.budget).max(1), cfg.seed)?;
            Some(kr_profile(t, &probes, weights, &k.tails, &k.shifts, &k.radii, k.a)?)
        }
        None => None,
    };
    let kr_classification =
        kr.as_ref().map(|k| [&k.tail, &k.translation, &k.averaged].map(|c| c.classify(cfg.threshold)));
    let weak = match cfg.weak_compactness {
        Some(per) => Some(weak_compactness_curve(t, grid, per)?),
        None => None,
    };
    let weak_compactness_classification =
        weak.as_ref().map(|w| [&w.small, &w.large, &w.far].map(|c| c.classify(cfg.threshold)));
    let kernel_envelope = match (cfg.kernel_envelope, t) {
        (Some(samples), BilinearOperator::Kernel(k)) => Some(kernel_envelope(k.kernel, grid.n(), samples, cfg.seed)?),
        (Some(_), _) => {
            notes.push("kernel envelope skipped: the operator is not a kernel operator".into());
            None
        }
        (None, _) => None,
    };
    let t11 = match cfg.t11 {
        Some(k) => {
            let p = t11_probe(t, grid, Some(k))?;
            if p.betas.len() > 1 {
                notes.push(format!("CMO tail is the max over {} sampled grids", p.betas.len()));
            }
            let classification = p.tail.classify(cfg.threshold);
            Some(T11Summary { k: p.k, grids: p.betas.len(), bmo: p.bmo, change: p.change, tail: p.tail, classification })
        }
        None => None,
    };
    let endpoint_ambiguous = cfg.exponents.is_endpoint()
        && projection_tail.as_ref().is_some_and(|c| c.classification == Decay::Flat);
    if endpoint_ambiguous {
        notes.push("flat projection tail at the L^1 x L^1 endpoint: compactness is not decided by this curve".into());
    }
    Ok(CompactnessReport {
        operator: t.describe(),
        exponents: cfg.exponents,
        threshold: cfg.threshold,
        projection_tail,
        kr,
        kr_classification,
        weak_compactness: weak,
        weak_compactness_classification,
        kernel_envelope,
        t11,
        endpoint_ambiguous,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::operators::{make_shift, Envelope, Flavor, ParaproductKind};

    fn l4l4l2() -> Exponents {
        Exponents::new(4.0, 4.0, 2.0, false).unwrap()
    }

    #[test]
    fn exponent_validation_and_serde() {
        assert!(Exponents::new(2.0, 2.0, 2.0, false).is_err());
        let e: Exponents = serde_json::from_str(r#"{"p1": "inf", "p2": 2, "p": 2}"#).unwrap();
        assert!(e.p1.is_infinite());
        assert!(serde_json::from_str::<Exponents>(r#"{"p1": 2, "p2": 2, "p": 1, "q": 3}"#).is_err());
        assert_eq!(serde_json::to_value(e).unwrap()["p1"], "inf");
    }

    #[test]
    fn probes_are_normalized() {
        let g = make_grid(1, 3, 3, Some(1)).unwrap();
        let e = Exponents::new(1.0, 4.0, 0.8, false).unwrap();
        let ws = WeightPair::new(Weight::power(&g, 0.3), Weight::power(&g, -0.2)).unwrap();
        let set = ProbeSet::standard(&g, &e, Some(&ws), 80, 3).unwrap();
        assert_eq!(set.probes.len(), 80);
        for p in &set.probes {
            let n1 = lp_norm(&p.f1.mul(ws.w1.mesh()).unwrap(), 1.0, &MeasureSpec::Lebesgue).unwrap();
            let n2 = lp_norm(&p.f2.mul(ws.w2.mesh()).unwrap(), 4.0, &MeasureSpec::Lebesgue).unwrap();
            assert!((n1 - 1.0).abs() < 1e-10 && (n2 - 1.0).abs() < 1e-10, "{}", p.label);
        }
    }

    #[test]
    fn zero_operator_estimates() {
        let g = make_grid(1, 2, 2, None).unwrap();
        let est = opnorm_lower(&BilinearOperator::Zero, &g, &l4l4l2(), None, 8, 0).unwrap();
        assert_eq!(est.value, 0.0);
        let c = projection_tail_curve(&BilinearOperator::Zero, &g, &[0, 1], &l4l4l2(), None, 8, 0).unwrap();
        assert!(c.values.iter().all(|&v| v == 0.0));
        assert_eq!(c.classify(0.1), Decay::Decaying);
    }

    #[test]
    fn rank_one_closed_form() {
        // ||T|| = ||h||_{p1'} ||h||_{p2'} |I0|^{1/p}, attained at (h, h) when p1 = p2
        let g = make_grid(1, 4, 3, None).unwrap();
        let i0 = g.cube(1, [0, 0]).unwrap();
        let t = BilinearOperator::rank_one(&g, &i0).unwrap();
        let vol = i0.volume_f64();
        let hnorm = |q: f64| vol.powf(-0.5) * vol.powf(1.0 / q);
        for (p1, p2) in [(4.0, 4.0), (2.0, 2.0), (2.0, 6.0)] {
            let p = 1.0 / (1.0 / p1 + 1.0 / p2);
            let e = Exponents::new(p1, p2, p, false).unwrap();
            let exact = hnorm(p1 / (p1 - 1.0)) * hnorm(p2 / (p2 - 1.0)) * vol.powf(1.0 / p);
            let est = opnorm_lower(&t, &g, &e, None, 48, 1).unwrap();
            assert!(est.value <= exact * (1.0 + 1e-12), "{p1},{p2}: {} > {exact}", est.value);
            if p1 == p2 {
                assert!((est.value - exact).abs() < 1e-12 * exact, "{p1}: {} vs {exact}", est.value);
            }
        }
    }

    #[test]
    fn estimate_is_monotone_in_budget() {
        let g = make_grid(1, 3, 2, Some(2)).unwrap();
        let s = make_shift(&g, [1, 0, 1], Flavor::HH0, Envelope::Constant { value: 1.0 }, 4).unwrap();
        let t = BilinearOperator::Shift(s);
        let mut last = 0.0;
        for b in [1, 2, 4, 8, 16, 32, 64] {
            let v = opnorm_lower(&t, &g, &l4l4l2(), None, b, 9).unwrap().value;
            assert!(v >= last, "budget {b}: {v} < {last}");
            last = v;
        }
        let again = opnorm_lower(&t, &g, &l4l4l2(), None, 64, 9).unwrap();
        assert_eq!(again.value, last);
    }

    #[test]
    fn lower_bound_respects_holder_oracle() {
        // the unit symbol at full band is the pointwise product, of norm exactly 1
        use crate::operators::{PseudodiffOperator, Symbol};
        let g = make_grid(1, 3, 2, None).unwrap();
        let t = BilinearOperator::Pseudodiff(PseudodiffOperator { symbol: Symbol::Unit, cutoff: 0.5 / g.cell_side() });
        for e in [l4l4l2(), Exponents::new(2.0, 2.0, 1.0, false).unwrap(), Exponents::new(1.5, 3.0, 1.0, false).unwrap()] {
            let v = opnorm_lower(&t, &g, &e, None, 64, 4).unwrap().value;
            assert!(v <= 1.0 + 1e-10 && v > 0.5, "{e:?}: {v}");
        }
    }

    #[test]
    fn envelope_is_idempotent() {
        let v = [0.3, 0.5, 0.1, 0.2, 0.0];
        let e = monotone_envelope(&v);
        assert_eq!(e, vec![0.5, 0.5, 0.2, 0.2, 0.0]);
        assert_eq!(monotone_envelope(&e), e);
    }

    #[test]
    fn compact_paraproduct_tail_vanishes() {
        let g = make_grid(1, 4, 4, None).unwrap();
        let b = CoeffSequence::random_window(&g, 1, 2).unwrap();
        let t = BilinearOperator::Paraproduct { b, kind: ParaproductKind::Pi };
        let c = projection_tail_curve(&t, &g, &[0, 1, 2, 3], &l4l4l2(), None, 24, 1).unwrap();
        assert!(c.values[0] > 0.0);
        assert_eq!(&c.values[1..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn rank_one_weak_compactness_values() {
        let g = make_grid(1, 4, 3, None).unwrap();
        let i0 = g.cube(0, [0, 0]).unwrap();
        let t = BilinearOperator::rank_one(&g, &i0).unwrap();
        let h = haar_eval(&g, &i0, 1).unwrap();
        let wc = weak_compactness_curve(&t, &g, 4).unwrap();
        for s in &wc.samples {
            let cube = g.cube(s.level, [s.index[0], 0]).unwrap();
            let ind = MeshFunction::cube_indicator(&g, &cube);
            let overlap = ind.mul(&MeshFunction::cube_indicator(&g, &i0)).unwrap().integral();
            let want = ind.inner(&h).unwrap().powi(2) * overlap / cube.volume_f64();
            assert!((s.value - want).abs() < 1e-14, "{s:?}");
            if cube.contains(&i0) || overlap == 0.0 {
                assert!(s.value < 1e-14);
            }
        }
        assert!(wc.large.values.iter().all(|&v| v < 1e-14));
    }

    #[test]
    fn kernel_envelopes() {
        let z = kernel_envelope(Kernel::Zero, 1, 8, 0).unwrap();
        assert!(z.small.values.iter().chain(&z.large.values).chain(&z.far.values).all(|&v| v == 0.0));
        let r = kernel_envelope(Kernel::Riesz, 1, 64, 1).unwrap();
        assert!(r.large.values.iter().chain(&r.far.values).all(|&v| v >= 0.1));
        let gd = kernel_envelope(Kernel::GaussianDamped, 1, 64, 1).unwrap();
        assert!(*gd.far.envelope.last().unwrap() < 1e-3);
        assert!(*gd.large.envelope.last().unwrap() < 1e-3);
    }

    #[test]
    fn t11_oracles() {
        let g = make_grid(1, 3, 4, None).unwrap();
        let z = t11_probe(&BilinearOperator::Zero, &g, None).unwrap();
        assert_eq!(z.bmo, 0.0);
        assert!(t11_probe(&BilinearOperator::Zero, &g, Some(4)).is_err());
        // b supported inside the unit ball, where Phi_k = 1
        let mut b = CoeffSequence::zeros(&g);
        for (lev, idx, v) in [(0, -1, 0.7), (1, 1, -0.4), (2, 0, 0.25)] {
            b.coeffs_mut().set_cube(&g.cube(lev, [idx, 0]).unwrap(), 1, v).unwrap();
        }
        let t = BilinearOperator::Paraproduct { b: b.clone(), kind: ParaproductKind::Pi };
        let p = t11_probe(&t, &g, None).unwrap();
        for lev in g.coarsest_level()..g.fine_level() {
            for (x, y) in p.betas[0].coeffs().level(lev).iter().zip(b.coeffs().level(lev)) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        // rank-one: beta_I = <Phi, h_{I0}>^2 <1_{I0}, h_I>
        let i0 = g.cube(2, [7, 0]).unwrap();
        let t = BilinearOperator::rank_one(&g, &i0).unwrap();
        let p = t11_probe(&t, &g, Some(0)).unwrap();
        let phi = cutoff(&g, 0);
        let c = phi.inner(&haar_eval(&g, &i0, 1).unwrap()).unwrap().powi(2);
        assert!(c > 0.0);
        let want = CoeffSequence::from_function(&MeshFunction::cube_indicator(&g, &i0).scale(c));
        for lev in g.coarsest_level()..g.fine_level() {
            for (x, y) in p.betas[0].coeffs().level(lev).iter().zip(want.coeffs().level(lev)) {
                assert!((x - y).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn report_is_deterministic_and_flags_the_endpoint() {
        let g = make_grid(1, 6, 6, None).unwrap();
        let i0 = g.cube(0, [0, 0]).unwrap();
        let t = BilinearOperator::rank_one(&g, &i0).unwrap();
        let mut cfg = ReportConfig::new(Exponents::new(1.0, 1.0, 0.5, true).unwrap());
        cfg.budget = 16;
        cfg.weak_compactness = Some(2);
        let a = compactness_report(&t, &g, None, &cfg).unwrap();
        let b = compactness_report(&t, &g, None, &cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let curve = &a.projection_tail.as_ref().unwrap().data;
        assert_eq!(a.projection_tail.as_ref().unwrap().classification, Decay::Flat);
        assert!(a.endpoint_ambiguous);
        assert!(curve.values[1] >= 2.0);
    }
}
