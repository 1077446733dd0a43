//! A small replicate study on the 50 x 50 checkerboard, written out as the
//! per-replicate CSV and the JSON summary.
//!
//! Pass a directory to keep the files; otherwise they go to a temporary one.

use bmc::io;
use bmc::simulate::{run_comparison, summarize, CheckerboardSpec, ComparisonConfig, MethodSpec};

fn main() -> bmc::Result<()> {
    let out = std::env::args().nth(1).map(std::path::PathBuf::from).unwrap_or_else(std::env::temp_dir);
    let spec = CheckerboardSpec { missing: 0.3, ..CheckerboardSpec::default() };
    let cfg = ComparisonConfig {
        methods: vec![MethodSpec::ImsExact, MethodSpec::ImsHutchinson { probes: 5 }, MethodSpec::GridBic { points: 8 }],
        replicates: 3,
        ..ComparisonConfig::default()
    };
    let results = run_comparison(&spec, &cfg)?;
    for s in summarize(&results) {
        println!(
            "{:<18} mse missing {:.4} (sd {:.4})  solves {:>6.1}  seconds {:.3}",
            s.method, s.mean_mse_missing, s.sd_mse_missing, s.mean_solves, s.mean_wall_seconds
        );
    }
    let csv = out.join("bmc_results.csv");
    io::write_string(&csv, &io::format_results_csv(&results)?)?;
    println!("wrote {}", csv.display());
    Ok(())
}
