//! Held-out error over a coarse penalty grid, next to the BIC choice.

use bmc::selection::{cross_validate, grid_search, Criterion, GridObjective, GridSpec};
use bmc::simulate::{feasible_realization, CheckerboardSpec};
use bmc::solver::{Method, SolverConfig};
use bmc::PenaltyParams;

fn main() -> bmc::Result<()> {
    let spec = CheckerboardSpec { row_blocks: vec![12, 12], col_blocks: vec![10, 10], missing: 0.2, ..CheckerboardSpec::default() };
    let (_, prob, _) = feasible_realization(&spec, 0)?;
    let solver = SolverConfig::with_method(Method::Spectral);

    for g in [1e-4, 1e-2, 1.0] {
        let cv = cross_validate(&prob, PenaltyParams::uniform(g)?, 5, 4, &solver)?;
        println!("gamma = {g:<6} held-out mse {:.4}  folds {:?}", cv.mean_mse, cv.fold_mse.iter().map(|m| format!("{m:.3}")).collect::<Vec<_>>());
    }

    let grid = GridSpec::square(6);
    let by_cv = grid_search(&prob, GridObjective::CrossValidation { folds: 5, seed: 4 }, &grid, &solver)?;
    let by_bic = grid_search(&prob, GridObjective::Exact(Criterion::Bic), &grid, &solver)?;
    println!("cv picks  {:?} with {} solves", by_cv.gamma, by_cv.solves);
    println!("bic picks {:?} with {} solves", by_bic.gamma, by_bic.solves);
    Ok(())
}
