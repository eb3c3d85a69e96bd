//! Data-reuse activation operators on a noisy linear system: serial and
//! parallel row projections, Landweber steps, and dual slab projections,
//! with their quasi-nonexpansivity error constants.

use pdreg::harness::gen_sparse_instance;
use pdreg::linops::op_norm_est;
use pdreg::proxops::{apply_activator, error_constant, Activator};
use pdreg::rng;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn main() {
    let inst = gen_sparse_instance(11, 60, 90, 9, 0.05).unwrap();
    let prob = &inst.prob;
    let gt = prob.ground_truth.as_ref().unwrap();
    let a_norm = op_norm_est(&prob.a, 1e-12, 2000, 0x5eed).value;

    let activators = [
        ("identity", Activator::Identity),
        ("serial rows", Activator::serial_all(&prob.a)),
        ("parallel rows", Activator::parallel_frobenius(&prob.a).unwrap()),
        ("landweber 1.9/||A||^2", Activator::Landweber { step: 1.9 / (a_norm * a_norm) }),
        ("adaptive landweber", Activator::AdaptiveLandweber { cap: 1e6, a_norm }),
    ];

    let mut r = rng::stream(11, rng::STREAM_MISC);
    let mut g = vec![0.0; prob.a.in_dim()];
    rng::fill_standard_normal(&mut r, &mut g);
    let x: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a + 0.5 * b).collect();
    let before: Vec<f64> = x.iter().zip(gt).map(|(a, b)| a - b).collect();

    println!("distance to the exact solution before activation: {:.6}", norm(&before));
    println!("{:<22} {:>12} {:>14}", "activator", "after", "e_T (euclid)");
    for (name, t) in &activators {
        let tx = apply_activator(t, &x, &prob.a, &prob.b_delta).unwrap();
        let after: Vec<f64> = tx.iter().zip(gt).map(|(a, b)| a - b).collect();
        let e = error_constant(t, &prob.a).unwrap();
        println!("{name:<22} {:>12.6} {e:>14.4}", norm(&after));
    }
    println!("(quasi-nonexpansivity: ||Tx - x*||^2 <= ||x - x*||^2 + e_T delta^2 in the step metric)");

    let slabs = Activator::dual_slabs_all(&prob.a);
    let mut u = vec![0.0; prob.a.out_dim()];
    rng::fill_standard_normal(&mut r, &mut u);
    for e in u.iter_mut() {
        *e *= 3.0;
    }
    let before = prob
        .a
        .apply_adjoint(&u)
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let pu = apply_activator(&slabs, &u, &prob.a, &prob.b_delta).unwrap();
    let after = prob
        .a
        .apply_adjoint(&pu)
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    println!("dual slabs: ||A* u||_inf {before:.4} -> {after:.4} (serial pass toward the dual box)");
}
