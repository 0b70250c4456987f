//! Registry of named grids, functions, weights and operators for JSON configs.

use serde::{Deserialize, Serialize};

use crate::diagnostics::cutoff;
use crate::error::{Error, Result};
use crate::grid::{make_grid, GridSpec};
use crate::haar::haar_eval;
use crate::io::read_mesh;
use crate::lorentz::{power_function, PowerSampling, PowerSupport};
use crate::mesh::MeshFunction;
use crate::operators::{
    dyadic_representation, make_shift, BilinearOperator, CoeffSequence, Envelope, Flavor, Kernel, KernelOperator,
    ParaproductKind, PseudodiffOperator, RepresentationSpec, Symbol,
};
use crate::weights::Weight;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "one")]
    pub n: usize,
    pub l: i32,
    pub m: i32,
    /// Random shift seed; absent for the standard grid.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn one() -> usize {
    1
}

impl GridConfig {
    pub fn build(&self) -> Result<GridSpec> {
        make_grid(self.n, self.l, self.m, self.seed)
    }
}

fn default_support() -> PowerSupport {
    PowerSupport::Full
}

fn default_sampling() -> PowerSampling {
    PowerSampling::Midpoint
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionSpec {
    Zero,
    Constant {
        value: f64,
    },
    /// `1_Q` for the cube of the given level and index.
    Indicator {
        level: i32,
        index: [i64; 2],
    },
    Box {
        lo: [f64; 2],
        hi: [f64; 2],
    },
    Haar {
        level: i32,
        index: [i64; 2],
        eta: u8,
    },
    /// `|x|^{-beta}`.
    Power {
        beta: f64,
        #[serde(default = "default_support")]
        support: PowerSupport,
        #[serde(default = "default_sampling")]
        sampling: PowerSampling,
    },
    /// Independent uniform values in `[-1, 1]`.
    Random {
        seed: u64,
    },
    Gaussian {
        center: [f64; 2],
        width: f64,
    },
    /// Smooth cutoff `Phi(x / 2^k)`.
    Bump {
        k: i32,
    },
    /// Raw mesh file with its JSON sidecar.
    File {
        path: String,
    },
}

impl FunctionSpec {
    pub fn build(&self, grid: &GridSpec) -> Result<MeshFunction> {
        use rand::{Rng, SeedableRng};
        let n = grid.n();
        Ok(match self {
            FunctionSpec::Zero => MeshFunction::zeros(grid),
            FunctionSpec::Constant { value } => MeshFunction::constant(grid, *value),
            FunctionSpec::Indicator { level, index } => MeshFunction::cube_indicator(grid, &grid.cube(*level, *index)?),
            FunctionSpec::Box { lo, hi } => MeshFunction::box_indicator(grid, *lo, *hi),
            FunctionSpec::Haar { level, index, eta } => haar_eval(grid, &grid.cube(*level, *index)?, *eta)?,
            FunctionSpec::Power { beta, support, sampling } => power_function(grid, *beta, *support, *sampling),
            FunctionSpec::Random { seed } => {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(*seed);
                MeshFunction::from_values(grid, (0..grid.num_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect())?
            }
            FunctionSpec::Gaussian { center, width } => {
                if !(*width > 0.0) {
                    return Err(Error::config("gaussian width must be positive"));
                }
                MeshFunction::from_fn(grid, |x| {
                    (-(0..n).map(|d| (x[d] - center[d]).powi(2)).sum::<f64>() / (width * width)).exp()
                })
            }
            FunctionSpec::Bump { k } => cutoff(grid, *k),
            FunctionSpec::File { path } => read_mesh(path)?.regrid(grid)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightSpec {
    One,
    /// `|x|^alpha`.
    Power { alpha: f64 },
    Function { function: FunctionSpec },
}

impl WeightSpec {
    pub fn build(&self, grid: &GridSpec) -> Result<Weight> {
        match self {
            WeightSpec::One => Ok(Weight::one(grid)),
            WeightSpec::Power { alpha } => Ok(Weight::power(grid, *alpha)),
            WeightSpec::Function { function } => Weight::new(function.build(grid)?),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CoeffSpec {
    /// `b_I = |I|^{1/2}` on the cubes `[0, 2^k)`.
    Tower,
    /// Random coefficients on `D(n0)`, BMO norm one.
    RandomWindow { n0: i32, seed: u64 },
    /// Haar coefficients of a function.
    Function { function: FunctionSpec },
}

impl CoeffSpec {
    pub fn build(&self, grid: &GridSpec) -> Result<CoeffSequence> {
        match self {
            CoeffSpec::Tower => CoeffSequence::tower(grid),
            CoeffSpec::RandomWindow { n0, seed } => CoeffSequence::random_window(grid, *n0, *seed),
            CoeffSpec::Function { function } => Ok(CoeffSequence::from_function(&function.build(grid)?)),
        }
    }
}

fn pi() -> ParaproductKind {
    ParaproductKind::Pi
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SumTerm {
    pub coef: f64,
    pub op: OperatorSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OperatorSpec {
    Zero,
    /// `T(f1, f2) = <f1, h_I0> <f2, h_I0> 1_I0`.
    RankOne {
        level: i32,
        index: [i64; 2],
    },
    Shift {
        depth: [i32; 3],
        flavor: Flavor,
        envelope: Envelope,
        seed: u64,
    },
    Paraproduct {
        b: CoeffSpec,
        #[serde(default = "pi")]
        kind: ParaproductKind,
    },
    /// Truncated kernel form; `epsilon` defaults to two cell diameters.
    Kernel {
        kernel: Kernel,
        #[serde(default)]
        epsilon: Option<f64>,
    },
    /// Frequency cutoff defaults to the Nyquist frequency.
    Pseudodiff {
        symbol: Symbol,
        #[serde(default)]
        cutoff: Option<f64>,
    },
    Commutator {
        b: FunctionSpec,
        inner: Box<OperatorSpec>,
        slot: u8,
    },
    Projected {
        n: i32,
        inner: Box<OperatorSpec>,
    },
    /// Shift representation averaged over grids with the listed seeds.
    Representation {
        delta: f64,
        envelope: Envelope,
        #[serde(default)]
        kmax: Option<i32>,
        seed: u64,
        grids: Vec<Option<u64>>,
    },
    Sum {
        terms: Vec<SumTerm>,
    },
}

impl OperatorSpec {
    pub fn build(&self, grid: &GridSpec) -> Result<BilinearOperator> {
        Ok(match self {
            OperatorSpec::Zero => BilinearOperator::Zero,
            OperatorSpec::RankOne { level, index } => BilinearOperator::rank_one(grid, &grid.cube(*level, *index)?)?,
            OperatorSpec::Shift { depth, flavor, envelope, seed } => {
                BilinearOperator::Shift(make_shift(grid, *depth, *flavor, *envelope, *seed)?)
            }
            OperatorSpec::Paraproduct { b, kind } => BilinearOperator::Paraproduct { b: b.build(grid)?, kind: *kind },
            OperatorSpec::Kernel { kernel, epsilon } => {
                let epsilon = epsilon.unwrap_or(2.0 * grid.cell_side() * (grid.n() as f64).sqrt());
                BilinearOperator::Kernel(KernelOperator { kernel: *kernel, epsilon })
            }
            OperatorSpec::Pseudodiff { symbol, cutoff } => {
                let cutoff = cutoff.unwrap_or(0.5 / grid.cell_side());
                BilinearOperator::Pseudodiff(PseudodiffOperator { symbol: *symbol, cutoff })
            }
            OperatorSpec::Commutator { b, inner, slot } => {
                BilinearOperator::commutator(b.build(grid)?, inner.build(grid)?, *slot)?
            }
            OperatorSpec::Projected { n, inner } => BilinearOperator::projected(*n, inner.build(grid)?),
            OperatorSpec::Representation { delta, envelope, kmax, seed, grids } => {
                let grids: Vec<GridSpec> = grids
                    .iter()
                    .map(|s| make_grid(grid.n(), grid.fine_level(), grid.window_exp(), *s))
                    .collect::<Result<_>>()?;
                let spec = RepresentationSpec { delta: *delta, envelope: *envelope, kmax: *kmax, seed: *seed, b: [None, None, None] };
                dyadic_representation(&grids, &spec)?.operator
            }
            OperatorSpec::Sum { terms } => BilinearOperator::Sum(
                terms.iter().map(|t| Ok((t.coef, t.op.build(grid)?))).collect::<Result<_>>()?,
            ),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<GridConfig>(r#"{"l": 2, "m": 2, "k": 1}"#).is_err());
        assert!(serde_json::from_str::<FunctionSpec>(r#"{"name": "constant", "value": 1, "x": 0}"#).is_err());
        assert!(serde_json::from_str::<OperatorSpec>(r#"{"name": "nope"}"#).is_err());
    }

    #[test]
    fn registry_round_trip() {
        let g = GridConfig { n: 1, l: 3, m: 3, seed: None }.build().unwrap();
        let specs = [
            r#"{"name": "rank-one", "level": 0, "index": [0, 0]}"#,
            r#"{"name": "paraproduct", "b": {"name": "tower"}}"#,
            r#"{"name": "shift", "depth": [1, 0, 0], "flavor": "hh", "envelope": {"kind": "decaying", "beta": 1}, "seed": 3}"#,
            r#"{"name": "kernel", "kernel": {"kind": "riesz"}}"#,
            r#"{"name": "pseudodiff", "symbol": {"kind": "gaussian"}}"#,
            r#"{"name": "commutator", "b": {"name": "random", "seed": 1}, "inner": {"name": "zero"}, "slot": 2}"#,
            r#"{"name": "projected", "n": 1, "inner": {"name": "rank-one", "level": 0, "index": [0, 0]}}"#,
            r#"{"name": "representation", "delta": 1, "envelope": {"kind": "constant", "value": 1}, "seed": 2, "grids": [null, 5]}"#,
            r#"{"name": "sum", "terms": [{"coef": 2, "op": {"name": "zero"}}]}"#,
        ];
        let f = FunctionSpec::Random { seed: 4 }.build(&g).unwrap();
        for s in specs {
            let spec: OperatorSpec = serde_json::from_str(s).unwrap();
            let again: OperatorSpec = serde_json::from_value(serde_json::to_value(&spec).unwrap()).unwrap();
            assert_eq!(spec, again);
            let op = spec.build(&g).unwrap();
            assert_eq!(op.apply(&f, &f).unwrap().grid(), &g, "{s}");
        }
    }

    #[test]
    fn function_registry() {
        let g = GridConfig { n: 1, l: 2, m: 2, seed: None }.build().unwrap();
        let ind: FunctionSpec = serde_json::from_str(r#"{"name": "indicator", "level": 0, "index": [0, 0]}"#).unwrap();
        assert_eq!(ind.build(&g).unwrap().integral(), 1.0);
        let p: FunctionSpec = serde_json::from_str(r#"{"name": "power", "beta": 0.5, "support": "positive", "sampling": "cell-infimum"}"#).unwrap();
        assert!(p.build(&g).unwrap().values()[0] == 0.0);
        let w: WeightSpec = serde_json::from_str(r#"{"name": "power", "alpha": 0.5}"#).unwrap();
        assert!(w.build(&g).unwrap().values().iter().all(|&v| v > 0.0));
    }
}
