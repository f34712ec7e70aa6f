//! Shared fixtures for the criterion benches: one mid-sized market game and
//! one contraction-certified quadratic game, sized like the experiment
//! configurations so kernel timings transfer.

use nalgebra::DMatrix;
use vsnash::analysis::default_start;
use vsnash::cournot::{gen_linear_cournot, gen_quadratic_cournot};
use vsnash::game::GameSpec;
use vsnash::graph::{build_graph, Topology, WeightedGraph};
use vsnash::StrategyProfile;

pub fn linear_market() -> (GameSpec, StrategyProfile) {
    let (game, _) = gen_linear_cournot(20, 10, 1).expect("benchmark instance generates");
    let start = default_start(&game);
    (game, start)
}

pub fn quadratic_market() -> (GameSpec, StrategyProfile) {
    let (game, _) = gen_quadratic_cournot(5, 3, 20.0, 1).expect("benchmark instance generates");
    let start = default_start(&game);
    (game, start)
}

pub fn star_graph(n: usize) -> WeightedGraph {
    build_graph(Topology::Star, n, 0).expect("star graph builds")
}

/// Per-player estimate matrix seeded off the start point, one row per player.
pub fn estimate_matrix(x: &StrategyProfile) -> DMatrix<f64> {
    let n = x.n_players();
    let d = x.dim(0);
    DMatrix::from_fn(n, d, |i, j| x.block(i)[j] + (i as f64) * 0.01)
}
