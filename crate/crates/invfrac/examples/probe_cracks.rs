//! Temporary probe: measure broken-run material drift, multiplier
//! profiles, and driving-force estimates on hand-built broken states.

use invfrac::activeset::{solve_equilibrium, EquilibriumState, SolverOptions};
use invfrac::assembly::{self, ScaledProblem};
use invfrac::constitutive::ConstitutiveModel;
use invfrac::mesh_hermite::{HermiteField, Mesh};

fn problem(lambda: f64, n: usize) -> ScaledProblem {
    ScaledProblem::new(0.1, lambda, ConstitutiveModel::quadratic_well(), Mesh::unit(n))
}

fn solve_opts() -> SolverOptions {
    SolverOptions { tol_rel: 0.0, max_activeset: 500, ..SolverOptions::default() }
}

fn solve_from(p: &ScaledProblem, field: HermiteField, active: Vec<usize>) -> EquilibriumState {
    let mut guess = EquilibriumState {
        lambda: p.lambda,
        branch: 1,
        field,
        mu: vec![0.0; p.mesh.n_nodes()],
        active,
        converged: false,
        residual_norm: f64::INFINITY,
    };
    for round in 0..12 {
        match solve_equilibrium(p, &guess, &solve_opts()) {
            Ok(st) => {
                if round > 0 {
                    println!("!! converged after {round} strip round(s)");
                }
                return st;
            }
            Err(invfrac::activeset::SolveError::NonConvergence { residual_norm, best, .. }) => {
                let neg: Vec<(usize, f64)> = best
                    .active
                    .iter()
                    .map(|&k| (k, best.mu[k]))
                    .filter(|&(_, m)| m < -1e-12)
                    .collect();
                let viol: Vec<(usize, f64)> = (0..p.mesh.n_nodes())
                    .map(|k| (k, best.field.deriv(k) + 1.0))
                    .filter(|&(_, v)| v < -1e-10)
                    .collect();
                let lo = best.active.first().copied().unwrap_or(0);
                let hi = best.active.last().copied().unwrap_or(0);
                println!(
                    "!! round {round}: NonConvergence best residual {residual_norm:.3e}, active {} nodes [{lo}..{hi}], neg mu {:?}, violations {:?}",
                    best.active.len(),
                    neg,
                    viol
                );
                if neg.is_empty() || !viol.is_empty() {
                    println!("!! cannot strip further, reporting best iterate");
                    return *best;
                }
                let drop: std::collections::HashSet<usize> = neg.iter().map(|&(k, _)| k).collect();
                let stripped: Vec<usize> =
                    best.active.iter().copied().filter(|k| !drop.contains(k)).collect();
                guess = *best;
                guess.active = stripped;
            }
            Err(e) => panic!("probe solve failed: {e}"),
        }
    }
    panic!("strip retries exhausted");
}

fn end_crack(p: &ScaledProblem, s0: f64) -> EquilibriumState {
    let du_good = (1.0 - s0) / s0;
    let field = HermiteField::interpolate(p.mesh, |s| {
        if s < s0 {
            (du_good * s, du_good)
        } else {
            ((1.0 - s0) - (s - s0), -1.0)
        }
    });
    let active = (0..p.mesh.n_nodes()).filter(|&k| p.mesh.node_s(k) >= s0 - 1e-12).collect();
    solve_from(p, field, active)
}

fn report(tag: &str, p: &ScaledProblem, st: &EquilibriumState) {
    let mesh = &st.field.mesh;
    let n = mesh.n_nodes();
    println!("=== {tag} (lambda={}, n_elems={}) ===", p.lambda, mesh.n_elems);
    println!("residual_norm = {:.3e}, active count {}", st.residual_norm, st.active.len());
    // runs
    let broken: Vec<bool> = (0..n).map(|k| st.field.deriv(k) + 1.0 <= 1e-8).collect();
    let mut runs = vec![];
    let mut k = 0;
    while k < n {
        if broken[k] {
            let s = k;
            while k + 1 < n && broken[k + 1] {
                k += 1;
            }
            runs.push((s, k));
        }
        k += 1;
    }
    println!("runs: {runs:?}");
    for &(i0, i1) in &runs {
        let drift = (mesh.node_s(i1) + st.field.value(i1)) - (mesh.node_s(i0) + st.field.value(i0));
        println!("run [{i0},{i1}]  x(i1)-x(i0) = {drift:+.6e}");
    }
    for &(i0, i1) in &runs {
        println!("run [{i0},{i1}]  x at nodes:");
        for k in i0..=i1 {
            let x = mesh.node_s(k) + st.field.value(k);
            let mu = st.mu[k];
            // mid-element H to the right of node k (if inside run)
            let hmid = if k < i1 {
                let ev = st.field.eval_in_elem(k, 0.5);
                p.inverse_strain(ev.du)
            } else {
                f64::NAN
            };
            if k - i0 < 6 || i1 - k < 6 {
                println!(
                    "  k={k:3}  x={x:+.12e}  mu={mu:+.6e}  H(mid right)={hmid:+.6e}"
                );
            } else if k - i0 == 6 {
                println!("  ...");
            }
        }
    }
    // good-region H extremes
    let mut hmin: f64 = f64::INFINITY;
    let mut hmax: f64 = f64::NEG_INFINITY;
    for e in 0..mesh.n_elems {
        if broken[e] && broken[e + 1] {
            continue;
        }
        for q in [0.2, 0.5, 0.8] {
            let h = p.inverse_strain(st.field.eval_in_elem(e, q).du);
            hmin = hmin.min(h);
            hmax = hmax.max(h);
        }
    }
    println!("good-ish H range: [{hmin:.6}, {hmax:.6}]");
    let e = assembly::energy(p, &st.field).unwrap();
    println!("energy = {e:.9}");
    // first integral estimate over deep good elements
    let lam3 = p.lambda.powi(3);
    let eps2 = p.epsilon * p.epsilon;
    let mut sum = 0.0;
    let mut cnt = 0;
    for e in 0..mesh.n_elems {
        let near = (e.saturating_sub(1)..=(e + 2).min(n - 1)).any(|k| broken[k]);
        if near {
            continue;
        }
        let d3 = st.field.third_derivative(e) / lam3;
        for q in [0.069431844202973712, 0.33000947820757187, 0.66999052179242813, 0.93056815579702623] {
            let ev = st.field.eval_in_elem(e, q);
            let h = p.inverse_strain(ev.du);
            let sstar = p.model.eval_inverse_extended(h).stress;
            sum += sstar - eps2 * d3;
            cnt += 1;
        }
    }
    let c1 = if cnt > 0 { sum / cnt as f64 } else { f64::NAN };
    println!("C1(mean over {cnt} pts) = {c1:+.6e}   gamma - C1 = {:+.6e}", 1.0 - c1);
    // nodal-mu driving forces via the topology pipeline
    match invfrac::cracks::crack_topology(st, 1e-8) {
        Ok(topo) => {
            for f in &topo.faces {
                println!(
                    "face node {:3} {:?}: x_face={:+.12e}  phi1(nodal mu)={:+.9e}",
                    f.node, f.orientation, f.x_face, f.phi
                );
            }
            println!("material crack set: {:?}", topo.material_crack_set);
        }
        Err(e) => println!("topology error: {e}"),
    }
    // per-element third derivative near each face + jump estimates
    for &(i0, i1) in &runs {
        if i0 > 0 {
            let l = st.field.third_derivative(i0 - 1) / lam3;
            let r = st.field.third_derivative(i0) / lam3;
            println!(
                "face node {i0} (GoodLeft):  h''' left={l:+.4e} right={r:+.4e}  phi2=-eps2*jump={:+.6e}",
                -eps2 * (r - l)
            );
        }
        if i1 + 1 < n {
            let l = st.field.third_derivative(i1 - 1) / lam3;
            let r = st.field.third_derivative(i1) / lam3;
            println!(
                "face node {i1} (GoodRight): h''' left={l:+.4e} right={r:+.4e}  phi2=-eps2*jump={:+.6e}",
                -eps2 * (r - l)
            );
        }
    }
    println!();
}

fn main() {
    // A: end crack, face pinned 1.5 elements wide of relaxed width
    let p = problem(1.6, 60);
    let st = end_crack(&p, 0.64);
    report("A: end crack s0=0.64 (width 0.65, relaxed 0.625)", &p, &st);

    // B: end crack at the relaxed width
    let st = end_crack(&p, 0.625);
    report("B: end crack s0=0.625 (face at relaxed width)", &p, &st);

    // C: flat-good-flat (two end cracks)
    let p64 = problem(1.6, 64);
    let lam = p64.lambda;
    let w = 1.0 / lam;
    let a = (1.0 - w) / 2.0;
    let b = a + w;
    let field = HermiteField::interpolate(p64.mesh, |s| {
        if s < a {
            (-s, -1.0)
        } else if s < b {
            (-a + (lam - 1.0) * (s - a), lam - 1.0)
        } else {
            (1.0 - s, -1.0)
        }
    });
    let active = (0..p64.mesh.n_nodes())
        .filter(|&k| {
            let s = p64.mesh.node_s(k);
            s <= a + 1e-12 || s >= b - 1e-12
        })
        .collect();
    let st = solve_from(&p64, field, active);
    report("C: two end cracks (flat-good-flat), n=64", &p64, &st);

    // D: internal crack (good-flat-good)
    let a = w / 2.0;
    let b = 1.0 - w / 2.0;
    let field = HermiteField::interpolate(p64.mesh, |s| {
        if s < a {
            ((lam - 1.0) * s, lam - 1.0)
        } else if s < b {
            ((lam - 1.0) * a - (s - a), -1.0)
        } else {
            ((lam - 1.0) * (s - 1.0), lam - 1.0)
        }
    });
    let active = (0..p64.mesh.n_nodes())
        .filter(|&k| {
            let s = p64.mesh.node_s(k);
            s >= a - 1e-12 && s <= b + 1e-12
        })
        .collect();
    let st = solve_from(&p64, field, active);
    report("D: internal crack (good-flat-good), n=64", &p64, &st);

    // E: same as D at finer mesh to see tail scaling
    let p128 = problem(1.6, 128);
    let field = HermiteField::interpolate(p128.mesh, |s| {
        if s < a {
            ((lam - 1.0) * s, lam - 1.0)
        } else if s < b {
            ((lam - 1.0) * a - (s - a), -1.0)
        } else {
            ((lam - 1.0) * (s - 1.0), lam - 1.0)
        }
    });
    let active = (0..p128.mesh.n_nodes())
        .filter(|&k| {
            let s = p128.mesh.node_s(k);
            s >= a - 1e-12 && s <= b + 1e-12
        })
        .collect();
    let st = solve_from(&p128, field, active);
    report("E: internal crack, n=128", &p128, &st);

    // F/G: internal crack at the production resolution, two stretches
    // (kinks on nodes so the guess interpolates cleanly)
    for lam in [1.6, 1.9] {
        let p600 = problem(lam, 600);
        let w = 1.0 / lam;
        let a = (w / 2.0 * 600.0).round() / 600.0;
        let b = 1.0 - a;
        let field = HermiteField::interpolate(p600.mesh, |s| {
            if s < a {
                ((lam - 1.0) * s, lam - 1.0)
            } else if s < b {
                ((lam - 1.0) * a - (s - a), -1.0)
            } else {
                ((lam - 1.0) * (s - 1.0), lam - 1.0)
            }
        });
        let active = (0..p600.mesh.n_nodes())
            .filter(|&k| {
                let s = p600.mesh.node_s(k);
                s >= a - 1e-12 && s <= b + 1e-12
            })
            .collect();
        let t0 = std::time::Instant::now();
        let st = solve_from(&p600, field, active);
        let dt = t0.elapsed();
        report(&format!("internal crack, n=600, lambda={lam} (solve {dt:?})"), &p600, &st);
    }

    // H: end crack at production resolution (kink on a node)
    let p600 = problem(1.9, 600);
    let s0 = (600.0_f64 / 1.9).round() / 600.0;
    let st = end_crack(&p600, s0);
    report("H: end crack n=600, lambda=1.9", &p600, &st);
}
