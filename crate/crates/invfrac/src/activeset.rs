//! Newton/active-set solver for the discrete KKT system at fixed λ.
//!
//! The unilateral constraint acts nodewise on slope dofs (`u'_k + 1 ≥ 0`),
//! so an active node is simply a pinned dof and its multiplier is
//! recovered algebraically from the pinned Galerkin row:
//! `μ_k = R_field[2k+1] / λ⁴`. The solver therefore iterates on the field
//! dofs alone:
//!
//! * inner loop — damped Newton on the equality-constrained system for a
//!   frozen active set (active slopes held at −1, Dirichlet values at 0);
//!   iterates may leave the feasible cone transiently, which assembly
//!   absorbs via the smooth extension of `W*`;
//! * outer loop — after each converged inner solve, first add *all* nodes
//!   with `u'_k + 1 < −activation_tol` (crack nucleation activates many
//!   nodes at once) and snap them onto the constraint; only if none are
//!   violated, drop the single most negative multiplier. One removal at a
//!   time prevents cycling.
//!
//! Accepted equilibria are primal feasible, dual feasible and
//! complementary to the tolerances in [`SolverOptions`]; transient inner
//! iterates are not, by design.

use crate::assembly::{self, ScaledProblem};
use crate::linalg;
use crate::mesh_hermite::HermiteField;
use std::collections::HashSet;
use thiserror::Error;

/// Tolerances and iteration budgets for [`solve_equilibrium`].
///
/// The effective residual tolerance is
/// `max(tol_abs + tol_rel · ‖r₀‖, floor)` where `floor` is the rounding
/// noise of assembling and solving at the bending stiffness scale,
/// `4 eps_f64 · (ε²/h³) · √n_dofs`. Entries of the Galerkin gradient are
/// differences of terms of size `ε²/h³ · O(u)`, so no iterate can push
/// the residual norm below that scale — on fine meshes it exceeds any
/// fixed absolute tolerance (≈ 2e-8 for 600 elements at ε = 0.1) and
/// asking for more would report spurious non-convergence.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub max_newton: usize,
    pub max_activeset: usize,
    pub activation_tol: f64,
    pub deactivation_tol: f64,
    pub gauge: GaugeMode,
    pub trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol_abs: 1e-9,
            tol_rel: 1e-9,
            max_newton: 50,
            max_activeset: 100,
            activation_tol: 1e-12,
            deactivation_tol: 1e-12,
            gauge: GaugeMode::Auto,
            trace: false,
        }
    }
}

/// How the inner Newton handles the translation invariance of interior
/// broken runs.
///
/// A crack strictly inside the bar can slide along it at (numerically)
/// constant energy, so every such run contributes one near-zero
/// eigenvalue to the tangent. Newton directions then blow up along the
/// sliding mode whenever the residual has any overlap with it — the line
/// search shrinks the step until the useful components crawl, and the
/// iteration stalls far from the root. The cure is to pin the *value*
/// dof of one mid-run node per interior run (runs of ≥ 3 active nodes
/// not touching the boundary), which selects one member of the sliding
/// family and restores a regular tangent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaugeMode {
    /// Pin while iterating; once the pinned system converges, drop the
    /// pins and require the full residual (including the leftover
    /// sliding force, tiny for resolved cracks) to meet the tolerance.
    Auto,
    /// Keep the pins through convergence and accept the pinned solution
    /// as-is. Used when the caller has *placed* the crack deliberately
    /// and the solve must not slide it (family checks, dof surgery).
    Hold,
    /// No pins.
    Off,
}

/// Value dofs to pin under [`GaugeMode::Auto`]/[`GaugeMode::Hold`]: the
/// middle node of every maximal run of consecutive active nodes that has
/// at least 3 nodes and touches neither end of the bar.
fn gauge_dofs(n_nodes: usize, active: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < active.len() {
        let mut j = i;
        while j + 1 < active.len() && active[j + 1] == active[j] + 1 {
            j += 1;
        }
        let (first, last) = (active[i], active[j]);
        if first > 0 && last + 1 < n_nodes && last - first >= 2 {
            out.push(2 * ((first + last) / 2));
        }
        i = j + 1;
    }
    out
}

/// A discrete KKT point (or best attempt at one): field, nodal
/// multipliers (full length, zero off the active set), active node set.
#[derive(Debug, Clone)]
pub struct EquilibriumState {
    pub lambda: f64,
    /// Bifurcation-branch index; 0 is the homogeneous branch.
    pub branch: usize,
    pub field: HermiteField,
    pub mu: Vec<f64>,
    pub active: Vec<usize>,
    pub converged: bool,
    pub residual_norm: f64,
}

/// Worst-case KKT violations of a state, all ≥ 0.
#[derive(Debug, Clone, Copy)]
pub struct KktReport {
    pub dual_violation: f64,
    pub primal_violation: f64,
    pub complementarity: f64,
    pub residual_norm: f64,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("no convergence at λ = {lambda}: residual {residual_norm:.3e}")]
    NonConvergence { lambda: f64, residual_norm: f64, best: Box<EquilibriumState> },
    #[error("singular KKT tangent at λ = {lambda}")]
    SingularTangent { lambda: f64 },
}

/// Worst KKT violations of `state`: dual feasibility (`μ ≥ 0`), primal
/// feasibility (`u' + 1 ≥ 0`), complementarity (`μ_k (u'_k + 1) = 0`),
/// plus the stored residual norm.
pub fn kkt_report(state: &EquilibriumState) -> KktReport {
    let mut dual = 0.0f64;
    let mut primal = 0.0f64;
    let mut comp = 0.0f64;
    for k in 0..state.field.mesh.n_nodes() {
        let slack = state.field.deriv(k) + 1.0;
        primal = primal.max(-slack);
        dual = dual.max(-state.mu[k]);
        comp = comp.max((state.mu[k] * slack).abs());
    }
    KktReport {
        dual_violation: dual.max(0.0),
        primal_violation: primal.max(0.0),
        complementarity: comp,
        residual_norm: state.residual_norm,
    }
}

/// Recover multipliers from the raw Galerkin gradient: active slope rows
/// of the KKT residual vanish exactly when `μ_k = R_field[2k+1]/λ⁴`.
fn recover_mu(p: &ScaledProblem, r_field: &[f64], active: &[usize]) -> Vec<f64> {
    let lam4 = p.lambda.powi(4);
    let mut mu = vec![0.0; p.mesh.n_nodes()];
    for &k in active {
        mu[k] = r_field[2 * k + 1] / lam4;
    }
    mu
}

/// Residual norm over the free rows (everything except Dirichlet rows and
/// active slope rows, which the iteration keeps at zero exactly).
/// `gauges` lists additionally pinned value dofs whose rows are excluded
/// while the pins are live.
fn free_norm(p: &ScaledProblem, r_field: &[f64], active: &[usize], gauges: &[usize]) -> f64 {
    let bc = p.bc_dofs();
    let mut skip = vec![false; r_field.len()];
    skip[bc[0]] = true;
    skip[bc[1]] = true;
    for &k in active {
        skip[2 * k + 1] = true;
    }
    for &g in gauges {
        skip[g] = true;
    }
    let mut acc = 0.0;
    for (i, &r) in r_field.iter().enumerate() {
        if !skip[i] {
            acc += r * r;
        }
    }
    acc.sqrt()
}

fn snap_constraints(p: &ScaledProblem, u: &mut HermiteField, active: &[usize]) {
    for bc in p.bc_dofs() {
        u.dofs[bc] = 0.0;
    }
    for &k in active {
        u.dofs[2 * k + 1] = -1.0;
    }
}

/// Solve the KKT system at `problem.lambda`, warm-started from `guess`
/// (field and active set). Returns a converged state or the best iterate
/// wrapped in [`SolveError::NonConvergence`].
pub fn solve_equilibrium(
    problem: &ScaledProblem,
    guess: &EquilibriumState,
    options: &SolverOptions,
) -> Result<EquilibriumState, SolveError> {
    let n_nodes = problem.mesh.n_nodes();
    assert_eq!(guess.field.dofs.len(), problem.mesh.n_dofs(), "guess/mesh mismatch");

    let mut u = guess.field.clone();
    let mut active: Vec<usize> = guess.active.iter().copied().filter(|&k| k < n_nodes).collect();
    active.sort_unstable();
    active.dedup();
    // The bulk-activation rule applies to the guess as well: nodes the
    // guess already pushed past the constraint start out pinned.
    let mut violated: Vec<usize> = (0..n_nodes)
        .filter(|&k| {
            guess.field.deriv(k) + 1.0 < -options.activation_tol && !active.contains(&k)
        })
        .collect();
    active.append(&mut violated);
    active.sort_unstable();
    snap_constraints(problem, &mut u, &active);

    // Quadrature mode is keyed to the active set, not the field, so the
    // residual the Newton iteration sees stays continuous while the set
    // is frozen. Rebuild the mask at every activation/release; the jump
    // in the membrane rows is absorbed by the fresh Newton solve.
    let mut bmask = assembly::broken_node_mask(n_nodes, &active);
    let mut r_field = assembly::residual_field_masked(problem, &u, &bmask);
    let norm0 = free_norm(problem, &r_field, &active, &[]);
    let h = problem.mesh.h();
    let floor = 4.0 * f64::EPSILON * (problem.epsilon * problem.epsilon / (h * h * h))
        * (problem.mesh.n_dofs() as f64).sqrt();
    let tol = (options.tol_abs + options.tol_rel * norm0).max(floor);

    // Exchange cycles (release a face node, converge, watch it violate
    // again) are possible because the inner Newton seeks the nearest
    // equilibrium, stable or not. Remember every active set visited and
    // refuse releases that would revisit one. The memory keys on the set
    // alone, though, and long exchange marches (a crack sliding node by
    // node) legitimately pass near old sets with a different field — so
    // the first dead end clears the memory and tries once more; only a
    // second dead end is treated as a true cycle.
    let mut visited: HashSet<Vec<usize>> = HashSet::new();
    visited.insert(active.clone());
    let mut amnesty_left = 1usize;

    // Converged field stashed before each release so a release that
    // breaks Newton (instead of re-violating the constraint) can be
    // undone and a different candidate tried.
    let mut stash: Option<(HermiteField, Vec<usize>)> = None;

    let mut best: Option<(f64, EquilibriumState)> = None;
    let note_best = |norm: f64,
                         u: &HermiteField,
                         active: &[usize],
                         mu: Vec<f64>,
                         best: &mut Option<(f64, EquilibriumState)>| {
        if best.as_ref().map_or(true, |(b, _)| norm < *b) {
            *best = Some((
                norm,
                EquilibriumState {
                    lambda: problem.lambda,
                    branch: guess.branch,
                    field: u.clone(),
                    mu,
                    active: active.to_vec(),
                    converged: false,
                    residual_norm: norm,
                },
            ));
        }
    };

    for _outer in 0..options.max_activeset {
        // --- inner Newton on the frozen active set ---
        let mut live_gauges = match options.gauge {
            GaugeMode::Off => Vec::new(),
            _ => gauge_dofs(n_nodes, &active),
        };
        let mut norm = free_norm(problem, &r_field, &active, &live_gauges);
        let mut inner_converged = false;
        let mut newton_iters = 0usize;
        loop {
            if norm <= tol {
                if live_gauges.is_empty() || options.gauge == GaugeMode::Hold {
                    inner_converged = true;
                    break;
                }
                // gauged system converged: drop the pins and keep
                // iterating until the leftover sliding force passes too
                live_gauges.clear();
                norm = free_norm(problem, &r_field, &active, &live_gauges);
                continue;
            }
            if newton_iters >= options.max_newton {
                break;
            }
            newton_iters += 1;
            let mut sys = assembly::tangent(problem, &u, &active);
            for &g in &live_gauges {
                sys.field.pin_dof(g, 1.0);
            }
            let mut rhs_field: Vec<f64> = r_field.iter().map(|r| -r).collect();
            for bc in problem.bc_dofs() {
                rhs_field[bc] = -u.dofs[bc];
            }
            for &g in &live_gauges {
                rhs_field[g] = 0.0;
            }
            let rhs_comp: Vec<f64> = active.iter().map(|&k| -(u.deriv(k) + 1.0)).collect();
            let (mut delta, _dmu) = sys
                .solve(&rhs_field, &rhs_comp)
                .map_err(|_| SolveError::SingularTangent { lambda: problem.lambda })?;

            // keep slopes where the energy extension is still sane
            let cap_alpha = |delta: &[f64]| {
                let mut alpha: f64 = 1.0;
                for k in 0..n_nodes {
                    let d = delta[2 * k + 1];
                    if d < 0.0 && u.deriv(k) + alpha * d < -2.0 {
                        alpha = alpha.min((-2.0 - u.deriv(k)) / d);
                    }
                }
                alpha
            };
            let try_step = |delta: &[f64], alpha: f64| {
                let mut trial = u.clone();
                for (i, d) in delta.iter().enumerate() {
                    trial.dofs[i] += alpha * d;
                }
                let trial_r = assembly::residual_field_masked(problem, &trial, &bmask);
                let trial_norm = free_norm(problem, &trial_r, &active, &live_gauges);
                (trial, trial_r, trial_norm)
            };

            // backtracking: halve on residual increase, up to 10 times
            let mut alpha = cap_alpha(&delta);
            let mut accepted: Option<(HermiteField, Vec<f64>, f64)> = None;
            let mut floored: Option<(HermiteField, Vec<f64>, f64)> = None;
            for _half in 0..=10 {
                let (trial, trial_r, trial_norm) = try_step(&delta, alpha);
                if trial_norm <= norm {
                    accepted = Some((trial, trial_r, trial_norm));
                    break;
                }
                floored = Some((trial, trial_r, trial_norm));
                if alpha <= 1.0 / 1024.0 {
                    break;
                }
                alpha *= 0.5;
            }
            // No plain step descends: the tangent is near-singular along a
            // soft mode (short ligaments sit close to the membrane's
            // convexity edge), so damp it — K + ηI bends the update toward
            // steepest descent on the residual.
            let mut damped_eta = 0.0f64;
            if accepted.is_none() {
                let scale = sys.field.max_abs();
                'damping: for eta_rel in [1e-6, 1e-4, 1e-2, 1.0] {
                    let eta = eta_rel * scale;
                    let mut damped = assembly::tangent(problem, &u, &active);
                    for i in 0..delta.len() {
                        damped.field.add(i, i, eta);
                    }
                    for &g in &live_gauges {
                        damped.field.pin_dof(g, 1.0);
                    }
                    let Ok((ddelta, _)) = damped.solve(&rhs_field, &rhs_comp) else {
                        continue;
                    };
                    let mut a = cap_alpha(&ddelta);
                    for _half in 0..=6 {
                        let (trial, trial_r, trial_norm) = try_step(&ddelta, a);
                        if trial_norm <= norm {
                            alpha = a;
                            damped_eta = eta;
                            delta = ddelta;
                            accepted = Some((trial, trial_r, trial_norm));
                            break 'damping;
                        }
                        a *= 0.5;
                    }
                }
            }
            // last resort: take the floored plain step even uphill, so the
            // iteration keeps moving and the stall is caught by the outer
            // loop rather than silently looping here
            let (trial, trial_r, trial_norm) = accepted
                .or(floored)
                .expect("backtracking always yields a trial");
            if options.trace {
                let (arg, step_max) = delta
                    .iter()
                    .enumerate()
                    .fold((0usize, 0.0f64), |(ai, m), (i, d)| {
                        if d.abs() > m {
                            (i, d.abs())
                        } else {
                            (ai, m)
                        }
                    });
                let damping = if damped_eta > 0.0 {
                    format!(", eta {damped_eta:.1e}")
                } else {
                    String::new()
                };
                eprintln!(
                    "[nw] it {newton_iters}: norm {norm:.3e} -> {trial_norm:.3e}, alpha {alpha:.5}{damping}, step_max {step_max:.3e} @dof {arg} ({}{})",
                    if arg % 2 == 0 { "u" } else { "u'" },
                    arg / 2
                );
            }
            u = trial;
            r_field = trial_r;
            norm = trial_norm;
        }
        let mu = recover_mu(problem, &r_field, &active);
        note_best(free_norm(problem, &r_field, &active, &[]), &u, &active, mu.clone(), &mut best);
        if options.trace {
            eprintln!(
                "[as] inner: {newton_iters} steps, norm {norm:.3e}, {} active{}",
                active.len(),
                if inner_converged { "" } else { " (STALL)" }
            );
        }

        // --- active-set update ---
        // Pin every node the iterate pushed past the constraint. After a
        // converged solve this is the nucleation step; after a stalled one
        // it is a rescue — what breaks Newton is the non-convex membrane
        // hump right at the constraint, and pinning the offender removes
        // it. Abort only when a stalled solve leaves nothing to pin.
        let mut newly_violated: Vec<usize> = (0..n_nodes)
            .filter(|&k| !active.contains(&k) && u.deriv(k) + 1.0 < -options.activation_tol)
            .collect();
        if !newly_violated.is_empty() {
            // A converged solve that both breaks new nodes *and* wants to
            // shed old ones is a crack shifting position: pinning and
            // releasing in two separate rounds ping-pongs through the
            // same sets, so translate the window in one move — pin all
            // violators and drop as many of the most negative face
            // multipliers (faces only; run interiors never carry
            // negative μ at a converged state).
            let mut shed: Vec<usize> = Vec::new();
            if inner_converged {
                let mut neg: Vec<usize> = active
                    .iter()
                    .copied()
                    .filter(|&k| mu[k] < -options.deactivation_tol)
                    .collect();
                neg.sort_by(|&a, &b| mu[a].partial_cmp(&mu[b]).unwrap());
                shed = neg.into_iter().take(newly_violated.len()).collect();
                if !shed.is_empty() {
                    // Shifting must land on a new set: two placements in
                    // discrete frustration would otherwise trade the same
                    // pair of nodes forever. A revisit degrades to pure
                    // pinning and lets the guarded release path arbitrate.
                    let mut shifted: Vec<usize> = active
                        .iter()
                        .copied()
                        .filter(|k| !shed.contains(k))
                        .chain(newly_violated.iter().copied())
                        .collect();
                    shifted.sort_unstable();
                    if visited.contains(&shifted) {
                        shed.clear();
                    }
                }
            }
            if options.trace {
                if shed.is_empty() {
                    eprintln!("[as] activate {newly_violated:?}");
                } else {
                    eprintln!("[as] shift: activate {newly_violated:?}, release {shed:?}");
                }
            }
            active.append(&mut newly_violated);
            active.retain(|k| !shed.contains(k));
            active.sort_unstable();
            snap_constraints(problem, &mut u, &active);
            visited.insert(active.clone());
            // stash survives a rescue round: if pinning the violators
            // still leaves Newton stalled, restoring the pre-release
            // state beats aborting from the polluted iterate
            bmask = assembly::broken_node_mask(n_nodes, &active);
            r_field = assembly::residual_field_masked(problem, &u, &bmask);
            continue;
        }
        if !inner_converged {
            if let Some((prev_u, prev_active)) = stash.take() {
                // The release attempt stalled Newton without pushing any
                // node past the constraint, so there is nothing to pin:
                // put the released node back and let the chooser pick a
                // different candidate (the stalled set stays remembered).
                if options.trace {
                    eprintln!(
                        "[as] stall after release: restoring {} active",
                        prev_active.len()
                    );
                }
                u = prev_u;
                active = prev_active;
                bmask = assembly::broken_node_mask(n_nodes, &active);
                r_field = assembly::residual_field_masked(problem, &u, &bmask);
                continue;
            }
            let (residual_norm, best_state) = best.expect("best iterate recorded");
            return Err(SolveError::NonConvergence {
                lambda: problem.lambda,
                residual_norm,
                best: Box::new(best_state),
            });
        }
        stash = None;
        // most negative multiplier first; stable sort keeps ties deterministic
        let mut candidates: Vec<usize> = (0..active.len())
            .filter(|&j| mu[active[j]] < -options.deactivation_tol)
            .collect();
        candidates.sort_by(|&a, &b| mu[active[a]].partial_cmp(&mu[active[b]]).unwrap());
        let mut released = false;
        for j in candidates.iter().copied() {
            let mut trial: Vec<usize> = active.clone();
            trial.remove(j);
            if visited.contains(&trial) {
                if options.trace {
                    eprintln!("[as] release {} blocked (visited)", active[j]);
                }
                continue; // that release leads straight back here
            }
            if options.trace {
                eprintln!("[as] release {} (mu {:.3e})", active[j], mu[active[j]]);
            }
            visited.insert(trial.clone());
            stash = Some((u.clone(), active.clone()));
            active = trial;
            released = true;
            break;
        }
        if !released && candidates.len() > 1 {
            // every single release is a known dead end (symmetric notches
            // re-violate whichever face is dropped alone): drop all
            // negative multipliers together
            let drop: HashSet<usize> = candidates.iter().map(|&j| active[j]).collect();
            let trial: Vec<usize> = active.iter().copied().filter(|k| !drop.contains(k)).collect();
            if !visited.contains(&trial) {
                if options.trace {
                    eprintln!("[as] bulk release {drop:?}");
                }
                visited.insert(trial.clone());
                stash = Some((u.clone(), active.clone()));
                active = trial;
                released = true;
            }
        }
        if released {
            bmask = assembly::broken_node_mask(n_nodes, &active);
            r_field = assembly::residual_field_masked(problem, &u, &bmask);
            continue;
        }
        if !candidates.is_empty() {
            // negative multipliers remain but every release is a known
            // dead end
            if amnesty_left > 0 {
                amnesty_left -= 1;
                visited.clear();
                visited.insert(active.clone());
                if options.trace {
                    eprintln!(
                        "[as] dead end: {} candidates all visited — clearing the memory once",
                        candidates.len()
                    );
                }
                continue;
            }
            if options.trace {
                eprintln!(
                    "[as] dead end: {} candidates, all releases visited",
                    candidates.len()
                );
            }
            let (residual_norm, best_state) = best.expect("best iterate recorded");
            return Err(SolveError::NonConvergence {
                lambda: problem.lambda,
                residual_norm,
                best: Box::new(best_state),
            });
        }

        // KKT point: assemble the official stacked residual for the record
        let stacked = assembly::residual(problem, &u, &mu, &active)
            .expect("dimensions are consistent by construction");
        return Ok(EquilibriumState {
            lambda: problem.lambda,
            branch: guess.branch,
            field: u,
            mu,
            active,
            converged: true,
            residual_norm: linalg::norm2(&stacked),
        });
    }

    let (residual_norm, best_state) = best.expect("best iterate recorded");
    Err(SolveError::NonConvergence {
        lambda: problem.lambda,
        residual_norm,
        best: Box::new(best_state),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::ConstitutiveModel;
    use crate::mesh_hermite::Mesh;

    fn problem(lambda: f64, n_elems: usize) -> ScaledProblem {
        ScaledProblem::new(0.1, lambda, ConstitutiveModel::quadratic_well(), Mesh::unit(n_elems))
    }

    fn fresh_guess(p: &ScaledProblem) -> EquilibriumState {
        EquilibriumState {
            lambda: p.lambda,
            branch: 0,
            field: HermiteField::zeros(p.mesh),
            mu: vec![0.0; p.mesh.n_nodes()],
            active: vec![],
            converged: false,
            residual_norm: f64::INFINITY,
        }
    }

    #[test]
    fn homogeneous_guess_is_a_fixed_point() {
        let p = problem(1.2, 16);
        let state = solve_equilibrium(&p, &fresh_guess(&p), &SolverOptions::default()).unwrap();
        assert!(state.converged);
        assert!(state.active.is_empty());
        let worst = state.field.dofs.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        assert!(worst <= 1e-12, "homogeneous state perturbed by {worst}");
        assert!(state.residual_norm <= 1e-9);
        let report = kkt_report(&state);
        assert_eq!(report.dual_violation, 0.0);
        assert_eq!(report.primal_violation, 0.0);
        assert_eq!(report.complementarity, 0.0);
    }

    #[test]
    fn shallow_notch_unwinds_to_homogeneous_at_low_stretch() {
        // One slope dof pushed past the constraint at λ = 1.05, where any
        // contact is strongly unfavorable: the node is activated up
        // front, its multiplier comes out negative, and the release flows
        // back to the homogeneous state.
        let p = problem(1.05, 12);
        let mut guess = fresh_guess(&p);
        guess.field.dofs[2 * 6 + 1] = -1.005;
        let state = solve_equilibrium(&p, &guess, &SolverOptions::default()).unwrap();
        assert!(state.converged);
        assert!(state.active.is_empty());
        let worst = state.field.dofs.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        assert!(worst <= 1e-8, "expected homogeneous, got max dof {worst}");
    }

    #[test]
    fn contact_holds_with_nonnegative_multiplier_at_high_stretch() {
        // Same notch at λ = 1.4, past the energy crossover: the contact
        // is sustained and the multiplier must be dual feasible.
        let p = problem(1.4, 12);
        let mut guess = fresh_guess(&p);
        guess.field.dofs[2 * 6 + 1] = -1.02;
        let state = solve_equilibrium(&p, &guess, &SolverOptions::default()).unwrap();
        assert!(state.converged);
        assert_eq!(state.active, vec![6]);
        assert!(state.mu[6] >= 0.0, "held contact needs μ ≥ 0, got {}", state.mu[6]);
        assert_eq!(state.field.deriv(6), -1.0);
        let report = kkt_report(&state);
        assert!(report.dual_violation <= 1e-12);
        assert!(report.primal_violation <= 1e-10);
        assert!(report.complementarity <= 1e-10);
    }

    #[test]
    fn ambivalent_notch_is_resolved_or_fails_honestly() {
        // Near the energy crossover the notch guess sits in a basin of
        // saddle points that may contain no KKT point at all. The
        // contract: either a clean KKT point comes back, or the solver
        // reports NonConvergence carrying its best iterate — never a
        // silent bad state, never a panic.
        let p = problem(1.2, 12);
        let mut guess = fresh_guess(&p);
        for k in 5..=7 {
            guess.field.dofs[2 * k + 1] = -1.01;
        }
        match solve_equilibrium(&p, &guess, &SolverOptions::default()) {
            Ok(state) => {
                assert!(state.converged);
                let report = kkt_report(&state);
                assert!(report.dual_violation <= 1e-12);
                assert!(report.primal_violation <= 1e-10);
                assert!(report.complementarity <= 1e-10);
            }
            Err(SolveError::NonConvergence { best, residual_norm, .. }) => {
                assert!(!best.converged);
                assert!(residual_norm.is_finite());
            }
            Err(other) => panic!("unexpected error {other:?}"),
        }
    }

    /// A consistent broken warm start at stretch `lambda`: zero-stress
    /// good region on the left, flat region from `s0` to the right end.
    fn broken_guess(p: &ScaledProblem, s0: f64) -> EquilibriumState {
        let du_good = (1.0 - s0) / s0; // u(s0) = 1 - s0 so that u(1) = 0
        let field = HermiteField::interpolate(p.mesh, |s| {
            if s < s0 {
                (du_good * s, du_good)
            } else {
                ((1.0 - s0) - (s - s0), -1.0)
            }
        });
        let active: Vec<usize> = (0..p.mesh.n_nodes())
            .filter(|&k| p.mesh.node_s(k) >= s0 - 1e-12)
            .collect();
        EquilibriumState {
            lambda: p.lambda,
            branch: 1,
            field,
            mu: vec![0.0; p.mesh.n_nodes()],
            active,
            converged: false,
            residual_norm: f64::INFINITY,
        }
    }

    #[test]
    fn broken_warm_start_settles_into_broken_equilibrium() {
        // λ = 1.6 is past the first instability; good region should relax
        // to stretch 1, so the flat fraction is 1 − 1/λ = 0.375.
        let p = problem(1.6, 60);
        let state = solve_equilibrium(&p, &broken_guess(&p, 0.64), &SolverOptions::default()).unwrap();
        assert!(state.converged);
        assert!(state.active.len() >= 5, "expected a broken run, got {:?}", state.active);
        let report = kkt_report(&state);
        assert!(report.dual_violation <= 1e-12);
        assert!(report.primal_violation <= 1e-10);
        assert!(report.complementarity <= 1e-10);
        let e_broken = assembly::energy(&p, &state.field).unwrap();
        let e_hom = assembly::energy(&p, &HermiteField::zeros(p.mesh)).unwrap();
        assert!(
            e_broken < e_hom,
            "broken state should beat homogeneous: {e_broken} vs {e_hom}"
        );
        // multipliers live only on the active set
        for k in 0..p.mesh.n_nodes() {
            if !state.active.contains(&k) {
                assert_eq!(state.mu[k], 0.0);
            }
        }
    }

    #[test]
    fn solver_is_deterministic() {
        let p = problem(1.6, 40);
        let guess = broken_guess(&p, 0.64);
        let a = solve_equilibrium(&p, &guess, &SolverOptions::default()).unwrap();
        let b = solve_equilibrium(&p, &guess, &SolverOptions::default()).unwrap();
        assert_eq!(a.field.dofs, b.field.dofs);
        assert_eq!(a.mu, b.mu);
        assert_eq!(a.active, b.active);
        assert_eq!(a.residual_norm.to_bits(), b.residual_norm.to_bits());
    }

    #[test]
    fn iteration_budget_is_reported_as_nonconvergence() {
        let p = problem(1.6, 40);
        let guess = broken_guess(&p, 0.64);
        let mut opts = SolverOptions::default();
        opts.max_newton = 1;
        opts.max_activeset = 1;
        match solve_equilibrium(&p, &guess, &opts) {
            Err(SolveError::NonConvergence { best, .. }) => {
                assert!(!best.converged);
                assert!(best.residual_norm.is_finite());
            }
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }

    #[test]
    fn kkt_report_flags_hand_built_violations() {
        let p = problem(1.2, 8);
        let mut state = fresh_guess(&p);
        state.mu[3] = -1.0;
        let report = kkt_report(&state);
        assert_eq!(report.dual_violation, 1.0);
        assert_eq!(report.primal_violation, 0.0);
        assert_eq!(report.complementarity, 1.0); // μ_3 · (u'_3 + 1) = −1
    }
}
