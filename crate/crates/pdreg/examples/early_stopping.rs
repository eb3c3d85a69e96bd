//! Iterative regularization in one picture: on a noisy instance the
//! reconstruction error falls, bottoms out, and rises again as the iterates
//! head for the noisy solution. Early stopping picks the bottom; the
//! a-priori c/delta rule lands nearby without seeing the ground truth.

use pdreg::harness::{gen_sparse_instance, method_config, Method};
use pdreg::solvers::{run, StopRule};

fn main() {
    let inst = gen_sparse_instance(2, 400, 600, 60, 0.05).unwrap();
    let prob = inst.prob;
    let mut cfg = method_config(Method::Pd, &prob.a, 1.9).unwrap();
    cfg.max_iters = 400;
    let rec = run(&prob, &cfg, &StopRule::MaxIter { iters: 400 }, 2, None).unwrap();

    let oracle = rec
        .rows
        .iter()
        .min_by(|a, b| a.recon_error.partial_cmp(&b.recon_error).unwrap())
        .unwrap();
    println!("{:>5} {:>14} {:>14}", "iter", "recon error", "feasibility");
    for &k in &[1usize, 2, 5, 8, 11, 15, 20, 40, 80, 160, 400] {
        let row = &rec.rows[k - 1];
        let mark = if row.iter == oracle.iter { "  <- oracle minimum" } else { "" };
        println!("{:>5} {:>14.4} {:>14.4}{mark}", row.iter, row.recon_error, row.feasibility);
    }

    let c = (oracle.iter as f64 + 0.75) * prob.delta;
    let ruled = run(&prob, &cfg, &StopRule::COverDelta { c }, 2, None).unwrap();
    let at = ruled.rows.last().unwrap();
    println!(
        "c/delta rule with c = {c:.2}: stops at iteration {} with error {:.4} \
         (oracle: {} with {:.4})",
        ruled.stop.iter, at.recon_error, oracle.iter, oracle.recon_error
    );
}
