//! Build a row similarity graph from feature vectors: exponentiated Pearson
//! correlations, thinned to each vertex's k strongest neighbours.

use bmc::graph::{connected_components, exp_pearson_graph, knn_sparsify, weights_from_features};
use bmc::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> bmc::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // two groups of profiles with opposite trends plus noise
    let features = Matrix::from_fn(12, 8, |i, j| {
        let trend = if i < 6 { j as f64 } else { -(j as f64) };
        trend + rng.random_range(-0.5..0.5)
    });

    let dense = exp_pearson_graph(&features)?;
    println!("dense graph: {} edges, w(0,1) = {:.3}, w(0,11) = {:.3}", dense.n_edges(), dense.weight(0, 1), dense.weight(0, 11));

    for k in [1, 3, 5] {
        let g = knn_sparsify(&dense, k)?;
        let parts = connected_components(&g);
        println!("k = {k}: {} edges, {} components", g.n_edges(), parts.component_count());
    }

    let g = weights_from_features(&features, 3)?;
    println!("labels with k = 3: {:?}", connected_components(&g).labels());
    Ok(())
}
