//! Estimate operator norms and check the primal-dual step condition for
//! the two experiment operators: a dense Gaussian sensing matrix and the
//! stacked blur/gradient operator used for total variation.

use pdreg::harness::gen_sparse_instance;
use pdreg::linops::{check_step_condition, op_norm_est, pock_chambolle_diagonals, LinearMap};
use pdreg::solvers::{resolve_preconditioner, Preconditioner};

fn main() {
    let inst = gen_sparse_instance(7, 120, 200, 20, 0.05).unwrap();
    let tv = LinearMap::TvBlock { side: 32, radius: 2 };

    for (name, a) in [("gaussian 120x200", &inst.prob.a), ("tv block 32x32 r=2", &tv)] {
        let est = op_norm_est(a, 1e-12, 2000, 0x5eed);
        println!("{name}: ||A|| ~ {:.6} (converged: {})", est.value, est.converged);

        let (sigma, gamma, _) =
            resolve_preconditioner(a, &Preconditioner::ScaledIdentity { factor: 0.99 }).unwrap();
        let check = check_step_condition(&sigma, &gamma, a, 1e-12, 2000, 0x5eed).unwrap();
        println!(
            "  scaled identity: step {:.6}, alpha = {:.6}",
            sigma.uniform_value().unwrap(),
            check.alpha
        );

        let (ps, pg) = pock_chambolle_diagonals(a).unwrap();
        let check = check_step_condition(&ps, &pg, a, 1e-12, 2000, 0x5eed).unwrap();
        println!("  pock-chambolle:  alpha = {:.6} (nonnegative by construction)", check.alpha);
    }
}
