//! Degrees of freedom of the smoother, exactly and by Rademacher probes.

use bmc::selection::{degrees_of_freedom_exact, hutchinson_trace, sample_count_for, ProbeSet};
use bmc::simulate::{feasible_realization, CheckerboardSpec};
use bmc::solver::{factorize, SolverConfig};
use bmc::PenaltyParams;

fn main() -> bmc::Result<()> {
    let spec = CheckerboardSpec { row_blocks: vec![8, 8], col_blocks: vec![6, 6], missing: 0.3, ..CheckerboardSpec::default() };
    let (_, prob, _) = feasible_realization(&spec, 0)?;
    let op = prob.operator(PenaltyParams::new(0.5, 2.0)?)?;
    let exact = degrees_of_freedom_exact(&op)?;
    let f = factorize(&op, &SolverConfig::default())?;
    println!("exact tr(S^-1) = {exact:.4}");
    for n in [5, 50, 500] {
        let est = hutchinson_trace(&f, &ProbeSet::rademacher(n, op.dim(), 11))?;
        println!("{n:>4} probes: {est:.4} ({:+.2}%)", 100.0 * (est - exact) / exact);
    }
    for (eps, delta) in [(0.5, 0.1), (0.1, 0.1), (0.05, 0.01)] {
        println!("relative error {eps} with probability {}: {} probes", 1.0 - delta, sample_count_for(eps, delta)?);
    }
    Ok(())
}
