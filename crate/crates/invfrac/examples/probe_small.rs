//! Scratch probe: two end cracks at n = 64, λ = 1.6 with trace.

use invfrac::activeset::{solve_equilibrium, EquilibriumState, SolverOptions};
use invfrac::assembly::ScaledProblem;
use invfrac::constitutive::ConstitutiveModel;
use invfrac::mesh_hermite::{HermiteField, Mesh};

fn main() {
    let lam = 1.6;
    let p = ScaledProblem::new(0.1, lam, ConstitutiveModel::quadratic_well(), Mesh::unit(64));
    let w = 1.0 / lam;
    let a = (1.0 - w) / 2.0;
    let b = a + w;
    let field = HermiteField::interpolate(p.mesh, |s| {
        if s < a {
            (-s, -1.0)
        } else if s < b {
            (-a + (lam - 1.0) * (s - a), lam - 1.0)
        } else {
            (1.0 - s, -1.0)
        }
    });
    let active: Vec<usize> = (0..p.mesh.n_nodes())
        .filter(|&k| {
            let s = p.mesh.node_s(k);
            s <= a + 1e-12 || s >= b - 1e-12
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
    let opts = SolverOptions { trace: true, ..SolverOptions::default() };
    match solve_equilibrium(&p, &guess, &opts) {
        Ok(st) => println!("OK: {} active, residual {:.3e}", st.active.len(), st.residual_norm),
        Err(e) => println!("FAILED: {e}"),
    }
}
