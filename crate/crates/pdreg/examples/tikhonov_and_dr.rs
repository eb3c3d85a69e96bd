//! The two classical baselines next to iterative regularization: a warm-
//! restarted Tikhonov path over a 30-point penalty grid, and early-stopped
//! Douglas-Rachford on the noisy feasibility set.

use pdreg::harness::{gen_sparse_instance, method_config, Method};
use pdreg::solvers::{douglas_rachford, fb_tikhonov_path, run, StopRule};

fn main() {
    let inst = gen_sparse_instance(5, 120, 200, 20, 0.05).unwrap();
    let prob = inst.prob;

    let path = fb_tikhonov_path(&prob, 300, 1e-3).unwrap();
    let best = path.best.unwrap();
    println!(
        "tikhonov: 30 penalties from {:.3e} down to {:.3e}, {} inner iterations total",
        path.entries.first().unwrap().lambda,
        path.entries.last().unwrap().lambda,
        path.total_inner_iters
    );
    println!(
        "  best entry: lambda = {:.3e}, recon error {:.4}",
        path.entries[best].lambda, path.entries[best].recon_error
    );

    let dr = douglas_rachford(&prob, 200, 50, None).unwrap();
    let dr_best = dr
        .rows
        .iter()
        .min_by(|a, b| a.recon_error.partial_cmp(&b.recon_error).unwrap())
        .unwrap();
    println!(
        "douglas-rachford: oracle stop at iteration {} with recon error {:.4}",
        dr_best.iter, dr_best.recon_error
    );

    let cfg = method_config(Method::Pdal, &prob.a, 1.9).unwrap();
    let rec = run(&prob, &cfg, &StopRule::OracleReconMin { patience: 200 }, 5, None).unwrap();
    println!(
        "adaptive primal-dual: oracle stop at iteration {} with recon error {:.4}",
        rec.stop.iter, rec.stop.value
    );
}
