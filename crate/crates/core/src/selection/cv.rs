use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::completion::{check_mask, complete, BmcProblem};
use crate::error::{Error, Result};
use crate::solver::SolverConfig;
use crate::system::{Mask, PenaltyParams};

const MAX_SHUFFLES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub mean_mse: f64,
    pub fold_mse: Vec<f64>,
    /// Shuffles drawn before every training mask passed the check.
    pub attempts: usize,
}

/// Random `folds`-way split of the observed entries: shuffle, then deal
/// round-robin. Returns held-out linear indices per fold.
pub fn split_folds(mask: &Mask, folds: usize, seed: u64, attempt: usize) -> Vec<Vec<usize>> {
    let mut observed = mask.observed_indices();
    let mut rng = crate::rng::indexed_stream(seed, "cv-folds", attempt as u64);
    observed.shuffle(&mut rng);
    let mut out = vec![Vec::new(); folds];
    for (pos, k) in observed.into_iter().enumerate() {
        out[pos % folds].push(k);
    }
    for f in &mut out {
        f.sort_unstable();
    }
    out
}

/// Mean held-out squared error over `folds` folds. A split whose training
/// mask leaves some patch unobserved is redrawn, up to 20 times.
pub fn cross_validate(
    p: &BmcProblem,
    gamma: PenaltyParams,
    folds: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<CvResult> {
    let n_obs = p.mask().observed_count();
    if folds < 2 || folds > n_obs {
        return Err(Error::InvalidArgument(format!(
            "cross-validation needs 2 <= folds <= |observed| = {n_obs}, got {folds}"
        )));
    }
    for attempt in 0..MAX_SHUFFLES {
        let split = split_folds(p.mask(), folds, seed, attempt);
        let masks: Vec<Mask> = split
            .iter()
            .map(|held| {
                let mut m = p.mask().clone();
                for &k in held {
                    m.set(k % p.n_rows(), k / p.n_rows(), false);
                }
                m
            })
            .collect();
        if !masks.iter().all(|m| check_mask(m, p.row_partition(), p.col_partition()).holds) {
            continue;
        }
        let x = p.data().values().as_slice();
        let mut fold_mse = Vec::with_capacity(folds);
        for (held, mask) in split.iter().zip(masks) {
            let fit = complete(&p.with_mask(mask)?, gamma, cfg)?;
            let z = fit.estimate.as_slice();
            let sse: f64 = held.iter().map(|&k| (z[k] - x[k]).powi(2)).sum();
            fold_mse.push(sse / held.len() as f64);
        }
        let mean_mse = fold_mse.iter().sum::<f64>() / folds as f64;
        return Ok(CvResult { mean_mse, fold_mse, attempts: attempt + 1 });
    }
    Err(Error::FoldInfeasible { folds, attempts: MAX_SHUFFLES })
}
