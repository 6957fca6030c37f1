//! Shared fixtures for the criterion benchmarks.

use gfwt::{
    build_propagators, eig_decompose, gaussian_point_cloud_graph, swiss_roll, BankParams, FilterBank, FourierApprox,
    FourierOptions, FractionalOperator, Graph, PropagatorPair, Sparsify,
};

pub struct Fixture {
    pub op: FractionalOperator,
    pub bank: FilterBank,
    pub series: FourierApprox,
    pub propagators: PropagatorPair,
    pub signal: Vec<f64>,
}

pub fn knn_roll(n: usize) -> Graph {
    let cloud = swiss_roll(n, 7).expect("point cloud");
    gaussian_point_cloud_graph(&cloud.points, 0.3, Sparsify::Knn(10)).expect("graph")
}

/// Swiss roll kNN graph with `n` vertices, J = 5 bank, order `m` series.
pub fn fixture(n: usize, theta: f64, m: usize) -> Fixture {
    let g = knn_roll(n);
    let op = eig_decompose(&g.laplacian()).and_then(|d| d.fractional(theta)).expect("operator");
    let bank = FilterBank::new(&BankParams::default(), op.r_max_bound()).expect("bank");
    let series = FourierApprox::new(&bank, &FourierOptions::with_order(m)).expect("series");
    let propagators = build_propagators(&op, series.period()).expect("propagators");
    let signal = (0..n).map(|i| ((i * 7919) % 211) as f64 / 105.0 - 1.0).collect();
    Fixture { op, bank, series, propagators, signal }
}
