//! Choose both penalties by quasi-Newton descent on the BIC surface and
//! print the path the search took.

use bmc::completion::complete;
use bmc::selection::{ims, ImsConfig, Mode};
use bmc::simulate::{feasible_realization, CheckerboardSpec};
use bmc::solver::{Method, SolverConfig};
use bmc::PenaltyParams;

fn main() -> bmc::Result<()> {
    let spec = CheckerboardSpec { missing: 0.3, ..CheckerboardSpec::default() };
    let (truth, prob, _) = feasible_realization(&spec, 0)?;
    let solver = SolverConfig::with_method(Method::Spectral);

    for mode in [Mode::Exact, Mode::Hutchinson] {
        let cfg = ImsConfig { probes: 5, seed: 9, ..ImsConfig::default() };
        let (gamma, trace) = ims(&prob, PenaltyParams::uniform(1.0)?, mode, &cfg, &solver)?;
        println!("{mode:?}: {:?} after {} iterates and {} solves", trace.status, trace.iterations(), trace.solves);
        for it in &trace.iterates {
            println!("  gamma = ({:.3e}, {:.3e})  bic = {:.3}  |grad| = {:.2e}", it.gamma.gamma_r, it.gamma.gamma_c, it.objective, it.grad_inf_norm);
        }
        let z = complete(&prob, gamma, &solver)?.estimate;
        let missing = prob.mask().missing_indices();
        let mse = missing.iter().map(|&k| (z.as_slice()[k] - truth.as_slice()[k]).powi(2)).sum::<f64>() / missing.len() as f64;
        println!("  missing-entry MSE against the truth: {mse:.4}");
    }
    Ok(())
}
