//! Small deterministic instances with known answers.

use nalgebra::DMatrix;

use crate::models::{edge_matrix, Family, MixtureBlockParams};
use crate::tensor_core::Tensor3;

/// 20 nodes, 20 layers: ten complete graphs (type 0) followed by ten copies
/// of two disjoint 10-cliques (type 1). Self-loops are present.
pub fn clique_instance() -> (Tensor3, MixtureBlockParams) {
    let d = 20;
    let halves: Vec<usize> = (0..d).map(|j| usize::from(j >= d / 2)).collect();
    let params = MixtureBlockParams::new(
        Family::Bernoulli,
        (0..20).map(|i| usize::from(i >= 10)).collect(),
        [DMatrix::from_element(2, 2, 1.0), DMatrix::identity(2, 2)],
        [halves.clone(), halves],
    )
    .expect("valid fixture");
    let edges = params.edge_matrices().expect("valid fixture");
    let slices: Vec<DMatrix<f64>> = params.z_star.iter().map(|&z| edges[z].matrix().clone()).collect();
    (Tensor3::from_slices(&slices).expect("square slices"), params)
}

/// Edge matrices of a type built from `b` and `sigma`, for tests.
pub fn edge_probability(b: &DMatrix<f64>, sigma: &[usize]) -> DMatrix<f64> {
    edge_matrix(b, sigma).expect("valid block matrix").matrix().clone()
}
