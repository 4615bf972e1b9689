//! Seeded random instances for property suites (shared by the unit tests,
//! the integration tests and the `proptest` CLI subcommand).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::htucker::{DimensionTree, HTensor};
use crate::linalg::qr;
use crate::tensor::{DenseTensor, Matrix};

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(r: &mut TestRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()
}

pub fn random_dense(r: &mut TestRng, dims: &[usize]) -> DenseTensor {
    let len = dims.iter().product();
    DenseTensor::from_vec(dims, random_vec(r, len)).expect("valid dims")
}

pub fn random_matrix(r: &mut TestRng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, random_vec(r, rows * cols))
}

/// `n x k` matrix with orthonormal columns.
pub fn random_orthonormal(r: &mut TestRng, n: usize, k: usize) -> Matrix {
    let (q, _) = qr(&random_matrix(r, n, k));
    q
}

/// Random HT tensor with the requested rank at every non-root node, clipped
/// to what the tree admits.
pub fn random_htensor(r: &mut TestRng, dims: &[usize], rank: usize) -> HTensor {
    let tree = DimensionTree::balanced(dims.len()).expect("d >= 2");
    random_htensor_on(r, &tree, dims, rank)
}

pub fn random_htensor_on(r: &mut TestRng, tree: &DimensionTree, dims: &[usize], rank: usize) -> HTensor {
    let ranks = tree.admissible_ranks(dims, rank);
    HTensor::from_fn_parts(tree.clone(), dims, &ranks, |rows, cols| random_matrix(r, rows, cols))
        .expect("admissible ranks")
}

/// Dense tensor of exact HT rank `rank` plus noise of Frobenius size `noise`.
pub fn low_rank_plus_noise(r: &mut TestRng, dims: &[usize], rank: usize, noise: f64) -> DenseTensor {
    let h = random_htensor(r, dims, rank);
    let base = h.to_dense().expect("small");
    let base = base.scale(1.0 / base.norm());
    let e = random_dense(r, dims);
    let e = e.scale(noise / e.norm());
    DenseTensor::linear_combine(1.0, &base, 1.0, &e).expect("same dims")
}
