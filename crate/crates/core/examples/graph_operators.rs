//! The two graph views the network uses: Chebyshev filtering on a fixed
//! connectivity graph, and k-nearest-neighbour graphs rebuilt from features.

use ndarray::{array, Array2};
use sozgraph::hfgcn::{chebyshev_basis, knn_pairs, scaled_laplacian};

fn main() -> sozgraph::Result<()> {
    // path graph 0 - 1 - 2 - 3 - 4
    let mut a = Array2::zeros((5, 5));
    for i in 0..4 {
        a[[i, i + 1]] = 1.0;
        a[[i + 1, i]] = 1.0;
    }
    let lap = scaled_laplacian(&a, false)?;
    println!("largest eigenvalue {:.4} (converged {})", lap.lambda_max, lap.converged);

    // an impulse on node 0 spreads one hop per polynomial order
    let impulse = Array2::from_shape_fn((5, 1), |(i, _)| f64::from(i == 0));
    for (order, t) in chebyshev_basis(&lap.l_tilde, &impulse, 4).iter().enumerate() {
        let cells: Vec<String> = t.column(0).iter().map(|v| format!("{v:+.3}")).collect();
        println!("T{order} x = [{}]", cells.join(", "));
    }

    let features = array![[0.0, 0.0], [0.1, 0.0], [0.0, 0.2], [5.0, 5.0], [5.1, 4.9]];
    for (i, nbrs) in knn_pairs(&features, 2)?.iter().enumerate() {
        println!("node {i}: nearest {nbrs:?}");
    }
    Ok(())
}
