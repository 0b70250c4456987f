//! Fixtures shared by the criterion benches.

use dyadlab_core::{make_grid, GridSpec, MeshFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn grid(n: usize, l: i32, m: i32) -> GridSpec {
    make_grid(n, l, m, None).expect("bench grid")
}

/// Uniform values in `[-1, 1)`.
pub fn random(grid: &GridSpec, seed: u64) -> MeshFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    MeshFunction::from_values(grid, (0..grid.num_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("bench function")
}
