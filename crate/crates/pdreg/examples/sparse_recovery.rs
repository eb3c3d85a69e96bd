//! The sparse recovery benchmark: every solver variant with oracle early
//! stopping on one desk-scale instance, reported like the method
//! comparison table.

use pdreg::harness::{run_sparse_benchmark, Method, SparseBenchConfig};

fn main() {
    let cfg = SparseBenchConfig {
        seed: 1,
        noise_amp: 0.05,
        methods: Method::all_sparse(),
        ..SparseBenchConfig::default()
    };
    println!(
        "instance: {} x {} Gaussian, {} nonzeros, entrywise noise at 5% of ||b||",
        cfg.rows, cfg.cols, cfg.sparsity
    );
    let summaries = run_sparse_benchmark(&cfg).unwrap();
    println!("{:<6} {:>9} {:>10} {:>14}", "method", "time [s]", "stop iter", "recon error");
    for s in &summaries {
        println!(
            "{:<6} {:>9.3} {:>10} {:>14.4}",
            s.method.name(),
            s.time_s,
            s.stop_iter,
            s.recon_error
        );
    }
}
