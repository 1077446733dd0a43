//! Solve one system with every backend and compare answers and effort.

use std::time::Instant;

use bmc::simulate::{feasible_realization, CheckerboardSpec};
use bmc::solver::{factorize, FillOrdering, Method, SolverConfig};
use bmc::PenaltyParams;

fn main() -> bmc::Result<()> {
    let (_, prob, _) = feasible_realization(&CheckerboardSpec::default(), 0)?;
    let op = prob.operator(PenaltyParams::new(0.1, 0.1)?)?;
    let b = prob.data().projected();
    let configs = [
        ("direct, amd", SolverConfig::with_method(Method::Direct)),
        ("direct, natural", SolverConfig { ordering: FillOrdering::Natural, ..SolverConfig::with_method(Method::Direct) }),
        ("pcg, incomplete cholesky", SolverConfig::with_method(Method::Pcg)),
        ("cg, no preconditioner", SolverConfig { precondition: false, ..SolverConfig::with_method(Method::Pcg) }),
        ("spectral", SolverConfig::with_method(Method::Spectral)),
    ];
    let mut reference: Option<Vec<f64>> = None;
    for (name, cfg) in configs {
        let start = Instant::now();
        let f = factorize(&op, &cfg)?;
        let (z, report) = f.solve(&b)?;
        let secs = start.elapsed().as_secs_f64();
        let diff = reference.as_ref().map_or(0.0, |r| {
            let num: f64 = z.iter().zip(r).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            num / r.iter().map(|v| v * v).sum::<f64>().sqrt()
        });
        println!(
            "{name:<26} {secs:>7.3}s  iterations {:>4}  residual {:.1e}  factor nnz {:>8}  vs first {diff:.1e}",
            report.iterations,
            report.relative_residual,
            f.factor_nnz().map_or("-".to_string(), |n| n.to_string()),
        );
        reference.get_or_insert(z);
    }
    Ok(())
}
