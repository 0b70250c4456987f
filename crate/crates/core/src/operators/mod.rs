//! Bilinear operators: dyadic shifts, paraproducts, the rank-one example,
//! kernel quadrature, pseudodifferential operators, commutators and
//! composites.

pub mod kernel;
pub mod paraproduct;
pub mod pseudodiff;
pub mod shift;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::grid::{DyadicCube, GridSpec};
use crate::haar::{haar_eval, project};
use crate::mesh::MeshFunction;

pub use kernel::{Kernel, KernelOperator};
pub use paraproduct::{apply_paraproduct, CoeffSequence, ParaproductKind};
pub use pseudodiff::{PseudodiffOperator, Symbol, SymbolClass};
pub use shift::{make_shift, make_shift_with, Envelope, Flavor, ShiftTensor};

/// `T(f1, f2) = <f1, h_{I0}^eta> <f2, h_{I0}^eta> 1_{I0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct RankOne {
    pub cube: DyadicCube,
    pub eta: u8,
    h: MeshFunction,
    indicator: MeshFunction,
}

impl RankOne {
    pub fn new(grid: &GridSpec, cube: &DyadicCube) -> Result<Self> {
        if cube.level >= grid.fine_level() || grid.local_of(cube).is_none() {
            return Err(Error::resolution("the cube needs children on this grid"));
        }
        let eta = 1;
        Ok(RankOne {
            cube: *cube,
            eta,
            h: haar_eval(grid, cube, eta)?,
            indicator: MeshFunction::cube_indicator(grid, cube),
        })
    }

    pub fn haar(&self) -> &MeshFunction {
        &self.h
    }

    pub fn apply(&self, f1: &MeshFunction, f2: &MeshFunction) -> Result<MeshFunction> {
        let c = f1.inner(&self.h)? * f2.inner(&self.h)?;
        self.indicator.regrid(f1.grid()).map(|m| m.scale(c))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BilinearOperator {
    Zero,
    Shift(ShiftTensor),
    Paraproduct { b: CoeffSequence, kind: ParaproductKind },
    RankOne(RankOne),
    Kernel(KernelOperator),
    Pseudodiff(PseudodiffOperator),
    /// `b T(f1, f2) - T(b f1, f2)` for slot 1, `b T(f1, f2) - T(f1, b f2)` for slot 2.
    Commutator { b: MeshFunction, inner: Box<BilinearOperator>, slot: u8 },
    /// `P_N^perp T`, projected on the grid of `inner` when it has one.
    Projected { n: i32, inner: Box<BilinearOperator> },
    /// Average of the same construction over seeded grids.
    MonteCarlo { seeds: Vec<Option<u64>>, members: Vec<BilinearOperator> },
    Sum(Vec<(f64, BilinearOperator)>),
}

impl BilinearOperator {
    pub fn kind(&self) -> &'static str {
        match self {
            BilinearOperator::Zero => "zero",
            BilinearOperator::Shift(_) => "shift",
            BilinearOperator::Paraproduct { .. } => "paraproduct",
            BilinearOperator::RankOne(_) => "rank-one",
            BilinearOperator::Kernel(_) => "kernel",
            BilinearOperator::Pseudodiff(_) => "pseudodiff",
            BilinearOperator::Commutator { .. } => "commutator",
            BilinearOperator::Projected { .. } => "projected",
            BilinearOperator::MonteCarlo { .. } => "montecarlo-average",
            BilinearOperator::Sum(_) => "sum",
        }
    }

    pub fn rank_one(grid: &GridSpec, cube: &DyadicCube) -> Result<Self> {
        Ok(BilinearOperator::RankOne(RankOne::new(grid, cube)?))
    }

    pub fn commutator(b: MeshFunction, inner: BilinearOperator, slot: u8) -> Result<Self> {
        if slot != 1 && slot != 2 {
            return Err(Error::config(format!("commutator slot must be 1 or 2, got {slot}")));
        }
        if b.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("commutator symbol must be finite".into()));
        }
        Ok(BilinearOperator::Commutator { b, inner: Box::new(inner), slot })
    }

    pub fn projected(n: i32, inner: BilinearOperator) -> Self {
        BilinearOperator::Projected { n, inner: Box::new(inner) }
    }

    /// The grid the operator is built on, if it depends on one.
    pub fn grid(&self) -> Option<&GridSpec> {
        match self {
            BilinearOperator::Shift(s) => Some(&s.grid),
            BilinearOperator::Paraproduct { b, .. } => Some(b.grid()),
            BilinearOperator::RankOne(r) => Some(r.h.grid()),
            BilinearOperator::Commutator { inner, .. } | BilinearOperator::Projected { inner, .. } => inner.grid(),
            _ => None,
        }
    }

    pub fn apply(&self, f1: &MeshFunction, f2: &MeshFunction) -> Result<MeshFunction> {
        f1.check_same(f2)?;
        let out = match self {
            BilinearOperator::Zero => MeshFunction::zeros(f1.grid()),
            BilinearOperator::Shift(s) => s.apply(f1, f2)?,
            BilinearOperator::Paraproduct { b, kind } => apply_paraproduct(b, *kind, f1, f2)?,
            BilinearOperator::RankOne(r) => r.apply(f1, f2)?,
            BilinearOperator::Kernel(k) => k.apply(f1, f2)?,
            BilinearOperator::Pseudodiff(p) => p.apply(f1, f2)?,
            BilinearOperator::Commutator { b, inner, slot } => {
                let b = b.regrid(f1.grid())?;
                let t = inner.apply(f1, f2)?.mul(&b)?;
                let u = if *slot == 1 { inner.apply(&f1.mul(&b)?, f2)? } else { inner.apply(f1, &f2.mul(&b)?)? };
                t.sub(&u)?
            }
            BilinearOperator::Projected { n, inner } => {
                // the range of Pi_b is spanned by the h_I it charges
                if let BilinearOperator::Paraproduct { b, kind: ParaproductKind::Pi } = inner.as_ref() {
                    crate::haar::check_projection_range(b.grid(), *n)?;
                    let mut tail = b.clone();
                    tail.coeffs_mut().remove_window_family(*n)?;
                    return apply_paraproduct(&tail, ParaproductKind::Pi, &f1.regrid(b.grid())?, &f2.regrid(b.grid())?)?
                        .regrid(f1.grid());
                }
                let out = inner.apply(f1, f2)?;
                let grid = inner.grid().cloned().unwrap_or_else(|| f1.grid().clone());
                project(&out.regrid(&grid)?, *n)?.1
            }
            BilinearOperator::MonteCarlo { members, .. } => {
                if members.is_empty() {
                    return Err(Error::config("Monte Carlo average over no grids"));
                }
                let mut acc = MeshFunction::zeros(f1.grid());
                for op in members {
                    acc.axpy(1.0 / members.len() as f64, &op.apply(f1, f2)?.regrid(f1.grid())?)?;
                }
                acc
            }
            BilinearOperator::Sum(terms) => {
                let mut acc = MeshFunction::zeros(f1.grid());
                for (c, op) in terms {
                    acc.axpy(*c, &op.apply(f1, f2)?.regrid(f1.grid())?)?;
                }
                acc
            }
        };
        out.regrid(f1.grid())
    }

    /// JSON summary of the operator's parameters.
    pub fn describe(&self) -> Value {
        match self {
            BilinearOperator::Zero => json!({ "kind": "zero" }),
            BilinearOperator::Shift(s) => json!({
                "kind": "shift",
                "depth": s.depth,
                "flavor": s.flavor,
                "envelope": s.envelope,
                "seed": s.seed,
                "entries": s.num_entries(),
            }),
            BilinearOperator::Paraproduct { b, kind } => json!({
                "kind": "paraproduct",
                "variant": kind,
                "bmo": b.bmo_norm(),
                "nonzero": b.coeffs().nonzero().len(),
            }),
            BilinearOperator::RankOne(r) => json!({
                "kind": "rank-one",
                "level": r.cube.level,
                "index": &r.cube.index[..r.cube.n],
            }),
            BilinearOperator::Kernel(k) => json!({ "kind": "kernel", "kernel": k.kernel.name(), "epsilon": k.epsilon }),
            BilinearOperator::Pseudodiff(p) => json!({
                "kind": "pseudodiff",
                "symbol": p.symbol,
                "class": p.symbol.class(),
                "cutoff": p.cutoff,
            }),
            BilinearOperator::Commutator { inner, slot, .. } => {
                json!({ "kind": "commutator", "slot": slot, "inner": inner.describe() })
            }
            BilinearOperator::Projected { n, inner } => json!({ "kind": "projected", "n": n, "inner": inner.describe() }),
            BilinearOperator::MonteCarlo { seeds, members } => json!({
                "kind": "montecarlo-average",
                "seeds": seeds,
                "member": members.first().map(|m| m.describe()),
            }),
            BilinearOperator::Sum(terms) => json!({
                "kind": "sum",
                "terms": terms.iter().map(|(c, op)| json!({ "coef": c, "op": op.describe() })).collect::<Vec<_>>(),
            }),
        }
    }
}

/// Truncated dyadic representation on a list of grids.
#[derive(Clone, Debug)]
pub struct Representation {
    pub operator: BilinearOperator,
    pub kmax: i32,
    /// `sum_{k > kmax} 2 (k + 1) 2^{-k delta / 2}`: weight of the omitted shift terms.
    pub tail_weight: f64,
}

#[derive(Clone, Debug)]
pub struct RepresentationSpec {
    pub delta: f64,
    pub envelope: Envelope,
    pub kmax: Option<i32>,
    pub seed: u64,
    /// Paraproduct symbols as functions, expanded on each grid.
    pub b: [Option<MeshFunction>; 3],
}

pub fn dyadic_representation(grids: &[GridSpec], spec: &RepresentationSpec) -> Result<Representation> {
    if grids.is_empty() {
        return Err(Error::config("representation needs at least one grid"));
    }
    if !(spec.delta > 0.0) {
        return Err(Error::config("delta must be positive"));
    }
    let g0 = &grids[0];
    let kmax = spec.kmax.unwrap_or(g0.fine_level().min(g0.window_exp()) - 1);
    let mut members = Vec::new();
    for (gi, grid) in grids.iter().enumerate() {
        let mut terms = Vec::new();
        for k in 0..=kmax {
            let w = 2f64.powf(-k as f64 * spec.delta / 2.0);
            for i in 0..=k {
                for depth in [[i, i, k], [i, i + 1, k]] {
                    let seed = spec.seed ^ ((gi as u64) << 48) ^ ((k as u64) << 24) ^ ((i as u64) << 8) ^ depth[1] as u64;
                    let s = make_shift(grid, depth, Flavor::HH, spec.envelope, seed)?;
                    terms.push((w, BilinearOperator::Shift(s)));
                }
            }
        }
        let kinds = [ParaproductKind::Pi, ParaproductKind::Adjoint1, ParaproductKind::Adjoint2];
        for (b, kind) in spec.b.iter().zip(kinds) {
            if let Some(b) = b {
                let b = CoeffSequence::from_function(&b.regrid(grid)?);
                terms.push((1.0, BilinearOperator::Paraproduct { b, kind }));
            }
        }
        members.push(BilinearOperator::Sum(terms));
    }
    let tail_weight = (kmax + 1..kmax + 400)
        .map(|k| 2.0 * (k + 1) as f64 * 2f64.powf(-k as f64 * spec.delta / 2.0))
        .sum();
    let seeds = grids.iter().map(|g| g.seed()).collect();
    Ok(Representation { operator: BilinearOperator::MonteCarlo { seeds, members }, kmax, tail_weight })
}
