//! Trace the N=600 internal-crack cascade.
use invfrac::activeset::{solve_equilibrium, EquilibriumState, SolverOptions};
use invfrac::assembly::ScaledProblem;
use invfrac::constitutive::ConstitutiveModel;
use invfrac::mesh_hermite::{HermiteField, Mesh};

fn main() {
    let lam = 1.6_f64;
    let p = ScaledProblem::new(0.1, lam, ConstitutiveModel::quadratic_well(), Mesh::unit(600));
    // value continuity at both faces needs the crack width to be exactly
    // (1 - 1/lam) when the good slopes are (lam - 1)
    let a = ((1.0 / lam) / 2.0 * 600.0).round() / 600.0;
    let b = a + ((1.0 - 1.0 / lam) * 600.0).round() / 600.0;
    let field = HermiteField::interpolate(p.mesh, |s| {
        if s < a {
            ((lam - 1.0) * s, lam - 1.0)
        } else if s < b {
            ((lam - 1.0) * a - (s - a), -1.0)
        } else {
            ((lam - 1.0) * (s - 1.0), lam - 1.0)
        }
    });
    let active = (0..p.mesh.n_nodes())
        .filter(|&k| {
            let s = p.mesh.node_s(k);
            s >= a - 1e-12 && s <= b + 1e-12
        })
        .collect();
    let guess = EquilibriumState {
        lambda: p.lambda,
        branch: 1,
        field,
        mu: vec![0.0; p.mesh.n_nodes()],
        active,
        converged: false,
        residual_norm: f64::INFINITY,
    };
    let opts = SolverOptions { tol_rel: 0.0, max_activeset: 500, trace: true, ..SolverOptions::default() };
    match solve_equilibrium(&p, &guess, &opts) {
        Ok(st) => println!("CONVERGED: active {} nodes [{:?}..{:?}], norm {:.3e}", st.active.len(), st.active.first(), st.active.last(), st.residual_norm),
        Err(e) => println!("FAILED: {e}"),
    }
}
