//! Crack topology, face driving forces, irreversibility, and translation
//! families.
//!
//! A node is *broken* when its slope dof sits on the constraint
//! (`u'_k + 1 ≤ tol`). Maximal runs of broken nodes form broken
//! intervals; their endpoints away from the domain boundary are crack
//! faces. Because the deformation `x = s + u(s)` is constant along a
//! broken run, each run collapses to a single *material* crack point —
//! an internal crack's two faces are the same material discontinuity.
//!
//! The driving force on a face is the jump of the multiplier density
//! across it: zero on the good side, the constraint-reaction density
//! that keeps `h' = 0` on the broken side. Because run-interior elements
//! integrate their membrane nodally, the recovered multiplier of a node
//! inside a run is exactly its lumped share of that density:
//! `μ_k = w_k · φ / λ` with lumped width `w_k` (half an element per
//! adjacent run-interior element). [`driving_force`] inverts this over
//! the clean nodes of the face's run — strictly interior ones, plus run
//! ends resting on the domain boundary — and signs the result by
//! orientation. A second, independent estimate comes from the
//! curvature-gradient jump `φ = −ε²⟦h‴⟧` at the face, taken one-sided
//! from the flanking elements; the two agree under mesh refinement.

use crate::activeset::{solve_equilibrium, EquilibriumState, GaugeMode, SolveError, SolverOptions};
use crate::assembly::{run_interior, ScaledProblem};
use thiserror::Error;

pub use crate::assembly::BROKEN_SLOPE_TOL;

#[derive(Debug, Error)]
pub enum CrackError {
    #[error("degenerate crack face: broken run is the single node {node} (s = {s})")]
    DegenerateFace { node: usize, s: f64 },
    #[error("good interval {region_index} is not bounded by crack faces on both sides")]
    NotFloating { region_index: usize },
    #[error("translation θ = {theta} moves a face outside the admissible window ({lo}, {hi})")]
    WindowExceeded { theta: f64, lo: f64, hi: f64 },
    #[error("translated state failed to re-equilibrate")]
    TranslationPolish(#[source] Box<SolveError>),
}

/// Which side of a crack face carries the good (unbroken) material.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Orientation {
    GoodLeft,
    GoodRight,
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct CrackFace {
    /// Node index the face snaps to.
    pub node: usize,
    /// Computational coordinate of the face.
    pub s_face: f64,
    /// Deformed coordinate λ·s.
    pub y_face: f64,
    /// Material coordinate x = s + u(s).
    pub x_face: f64,
    pub orientation: Orientation,
    /// Driving force φ = ⟦multiplier density⟧ across the face.
    pub phi: f64,
}

/// Broken/good partition of the computational domain with faces and the
/// deduplicated material crack set.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CrackTopology {
    /// Maximal broken intervals [a, b] in s.
    pub broken_intervals: Vec<(f64, f64)>,
    /// Complementary good intervals in s.
    pub good_intervals: Vec<(f64, f64)>,
    /// Broken runs as inclusive node-index ranges, parallel to
    /// `broken_intervals`.
    pub broken_runs: Vec<(usize, usize)>,
    pub faces: Vec<CrackFace>,
    /// One material point per broken run.
    pub material_crack_set: Vec<f64>,
}

impl CrackTopology {
    /// Indices (into `good_intervals`) of regions bounded by crack faces
    /// on both sides — the regions free to translate.
    pub fn floating_good_intervals(&self) -> Vec<usize> {
        let n_runs = self.broken_runs.len();
        let mut out = Vec::new();
        if n_runs < 2 {
            return out;
        }
        // good intervals interleave the runs in order; every gap between
        // two consecutive runs is floating, and a leading boundary-touching
        // region (present when the first run starts past s_min) shifts the
        // numbering by one
        let lead = if self.broken_runs[0].0 > 0 { 1 } else { 0 };
        for gap in 0..(n_runs - 1) {
            out.push(lead + gap);
        }
        out
    }

    pub fn is_broken(&self) -> bool {
        !self.broken_runs.is_empty()
    }
}

/// Maximal runs of broken nodes (slope criterion), as inclusive node
/// ranges. Errors on single-node runs.
fn broken_node_runs(
    state: &EquilibriumState,
    tol_h: f64,
) -> Result<Vec<(usize, usize)>, CrackError> {
    let mesh = &state.field.mesh;
    let n_nodes = mesh.n_nodes();
    let mut runs = Vec::new();
    let mut k = 0;
    while k < n_nodes {
        if state.field.deriv(k) + 1.0 <= tol_h {
            let start = k;
            while k + 1 < n_nodes && state.field.deriv(k + 1) + 1.0 <= tol_h {
                k += 1;
            }
            if start == k {
                return Err(CrackError::DegenerateFace { node: start, s: mesh.node_s(start) });
            }
            runs.push((start, k));
        }
        k += 1;
    }
    Ok(runs)
}

/// Extract the broken/good partition of `state` and compute face data.
/// Nodes with `u'_k + 1 ≤ tol_h` are broken; maximal runs become broken
/// intervals. Errors on single-node runs (degenerate faces).
pub fn crack_topology(state: &EquilibriumState, tol_h: f64) -> Result<CrackTopology, CrackError> {
    let mesh = &state.field.mesh;
    let n_nodes = mesh.n_nodes();
    let runs = broken_node_runs(state, tol_h)?;

    let mut broken_intervals = Vec::new();
    let mut good_intervals = Vec::new();
    let mut faces = Vec::new();
    let mut material_crack_set = Vec::new();
    let mut cursor = 0usize;
    for &(i0, i1) in &runs {
        if i0 > cursor {
            good_intervals.push((mesh.node_s(cursor), mesh.node_s(i0)));
        }
        broken_intervals.push((mesh.node_s(i0), mesh.node_s(i1)));
        cursor = i1;
        // anchor the material point at a boundary node when the run
        // touches the domain end — there x = s + u is pinned exactly by
        // the boundary condition, free of the O(h²) bookkeeping drift
        // that bending-shear transmission induces along the run
        let anchor = if i0 == 0 {
            0
        } else if i1 + 1 == n_nodes {
            i1
        } else {
            i0
        };
        material_crack_set.push(mesh.node_s(anchor) + state.field.value(anchor));
        if i0 > 0 {
            faces.push(face_at(state, i0, Orientation::GoodLeft));
        }
        if i1 + 1 < n_nodes {
            faces.push(face_at(state, i1, Orientation::GoodRight));
        }
    }
    if cursor + 1 < n_nodes || runs.is_empty() {
        good_intervals.push((mesh.node_s(cursor), mesh.s_max));
    }

    let mut topo = CrackTopology {
        broken_intervals,
        good_intervals,
        broken_runs: runs,
        faces,
        material_crack_set,
    };
    let phis: Vec<f64> = topo.faces.iter().map(|f| driving_force(state, f)).collect();
    for (f, phi) in topo.faces.iter_mut().zip(phis) {
        f.phi = phi;
    }
    Ok(topo)
}

fn face_at(state: &EquilibriumState, node: usize, orientation: Orientation) -> CrackFace {
    let s = state.field.mesh.node_s(node);
    CrackFace {
        node,
        s_face: s,
        y_face: state.lambda * s,
        x_face: s + state.field.value(node),
        orientation,
        phi: 0.0,
    }
}

/// Driving force φ on `face`: the multiplier-density jump across it,
/// read from the state's recovered multipliers. Nodes whose adjacent
/// elements are all run-interior carry clean lumped reactions
/// `μ_k = w_k·φ_broken/λ`; the density is `λ·Σμ_k / Σw_k` over those
/// nodes of the face's run (falling back to the whole run when it has
/// no clean interior). The sign is positive when the good material lies
/// on the left — face motion toward the good side consumes material.
pub fn driving_force(state: &EquilibriumState, face: &CrackFace) -> f64 {
    let mesh = &state.field.mesh;
    let n_nodes = mesh.n_nodes();
    let h = mesh.h();
    let runs = broken_node_runs(state, BROKEN_SLOPE_TOL).unwrap_or_default();
    let Some(&(i0, i1)) = runs.iter().find(|&&(a, b)| a <= face.node && face.node <= b) else {
        return 0.0;
    };
    // strictly interior nodes see only nodal-membrane elements; a run
    // end resting on the domain boundary qualifies too (its single
    // neighbor element is run-interior)
    let mut candidates: Vec<usize> = ((i0 + 1)..i1).collect();
    if i0 == 0 {
        candidates.push(0);
    }
    if i1 + 1 == n_nodes {
        candidates.push(i1);
    }
    if candidates.is_empty() {
        candidates = (i0..=i1).collect();
    }
    let mut mu_sum = 0.0;
    let mut w_sum = 0.0;
    for &k in &candidates {
        let mut n_adj = 0usize;
        if k > 0 && run_interior(&state.field, k - 1) {
            n_adj += 1;
        }
        if k < mesh.n_elems && run_interior(&state.field, k) {
            n_adj += 1;
        }
        mu_sum += state.mu[k];
        w_sum += 0.5 * h * n_adj as f64;
    }
    if w_sum <= 0.0 {
        return 0.0;
    }
    let density = state.lambda * mu_sum / w_sum;
    match face.orientation {
        Orientation::GoodLeft => density,
        Orientation::GoodRight => -density,
    }
}

/// Independent driving-force estimate from the curvature-gradient jump
/// `φ = −ε²⟦h‴⟧`, with `h‴ = u‴/λ³` taken one-sided from the elements
/// flanking the face node.
pub fn driving_force_jump_estimate(
    problem: &ScaledProblem,
    state: &EquilibriumState,
    face: &CrackFace,
) -> f64 {
    let mesh = &state.field.mesh;
    let lam3 = problem.lambda.powi(3);
    let eps2 = problem.epsilon * problem.epsilon;
    let left =
        if face.node == 0 { 0.0 } else { state.field.third_derivative(face.node - 1) / lam3 };
    let right = if face.node >= mesh.n_elems {
        0.0
    } else {
        state.field.third_derivative(face.node) / lam3
    };
    -eps2 * (right - left)
}

/// Dissipation rate of a hypothetical face motion with material crack
/// velocity `v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dissipation {
    pub rate: f64,
    pub admissible: bool,
}

pub fn dissipation_rate(phi: f64, v: f64) -> Dissipation {
    let rate = phi * v;
    Dissipation { rate, admissible: rate >= 0.0 }
}

/// Irreversibility between consecutive samples on a branch: every
/// material crack point of `prev` must persist in `next` within `tol_x`.
pub fn check_irreversibility(prev: &CrackTopology, next: &CrackTopology, tol_x: f64) -> bool {
    prev.material_crack_set
        .iter()
        .all(|&x| next.material_crack_set.iter().any(|&y| (x - y).abs() <= tol_x))
}

/// Translate the floating good region `region_index` (an index into
/// `good_intervals`) by the integer number of elements nearest to
/// `theta`.
///
/// The dof surgery shifts the region's pattern node-by-node (values
/// offset by the shift so the material map is preserved) and extends or
/// retracts the flanking flat runs along their constant material lines.
/// That reproduces the translated equilibrium exactly except at the two
/// junction nodes, where the old face value's tiny deviation from the
/// ideal line turns into a one-element kink whose bending residual is
/// amplified by ε²/h³. A short fixed-active-set Newton polish removes
/// it; the polish cannot change the crack pattern because releases are
/// disabled and the guess is feasible.
pub fn translate_family(
    problem: &ScaledProblem,
    state: &EquilibriumState,
    region_index: usize,
    theta: f64,
) -> Result<EquilibriumState, CrackError> {
    let mesh = state.field.mesh;
    let n_nodes = mesh.n_nodes();
    let h = mesh.h();
    let runs = broken_node_runs(state, BROKEN_SLOPE_TOL)?;

    // good intervals as node ranges, in the same order crack_topology
    // reports them
    let mut bounds: Vec<(usize, usize)> = Vec::new();
    let mut cursor = 0usize;
    for &(i0, i1) in &runs {
        if i0 > cursor {
            bounds.push((cursor, i0));
        }
        cursor = i1;
    }
    if cursor + 1 < n_nodes || runs.is_empty() {
        bounds.push((cursor, n_nodes - 1));
    }
    let &(gl, gr) = bounds.get(region_index).ok_or(CrackError::NotFloating { region_index })?;
    let left_run = runs
        .iter()
        .copied()
        .find(|&(_, i1)| i1 == gl)
        .ok_or(CrackError::NotFloating { region_index })?;
    let right_run = runs
        .iter()
        .copied()
        .find(|&(i0, _)| i0 == gr)
        .ok_or(CrackError::NotFloating { region_index })?;

    let shift = (theta / h).round() as i64;
    // each face must keep at least one broken element beyond it
    let lo = (left_run.0 as i64 + 1 - gl as i64) as f64 * h;
    let hi = (right_run.1 as i64 - 1 - gr as i64) as f64 * h;
    if gl as i64 + shift < left_run.0 as i64 + 1 || gr as i64 + shift > right_run.1 as i64 - 1 {
        return Err(CrackError::WindowExceeded { theta, lo, hi });
    }
    if shift == 0 {
        return Ok(state.clone());
    }
    let (new_gl, new_gr) = ((gl as i64 + shift) as usize, (gr as i64 + shift) as usize);

    let x_left = mesh.node_s(left_run.0) + state.field.value(left_run.0);
    let x_right = mesh.node_s(right_run.1) + state.field.value(right_run.1);
    let delta = shift as f64 * h;
    let mut dofs = state.field.dofs.clone();
    for k in left_run.0..new_gl {
        dofs[2 * k] = x_left - mesh.node_s(k);
        dofs[2 * k + 1] = -1.0;
    }
    for k in new_gl..=new_gr {
        let src = (k as i64 - shift) as usize;
        dofs[2 * k] = state.field.dofs[2 * src] - delta;
        dofs[2 * k + 1] = state.field.dofs[2 * src + 1];
    }
    for k in (new_gr + 1)..=right_run.1 {
        dofs[2 * k] = x_right - mesh.node_s(k);
        dofs[2 * k + 1] = -1.0;
    }

    let field = crate::mesh_hermite::HermiteField::from_dofs(mesh, dofs)
        .expect("dof count unchanged by translation");
    let active: Vec<usize> =
        (0..n_nodes).filter(|&k| field.deriv(k) + 1.0 <= BROKEN_SLOPE_TOL).collect();
    let guess = EquilibriumState {
        lambda: state.lambda,
        branch: state.branch,
        field,
        mu: vec![0.0; n_nodes],
        active,
        converged: false,
        residual_norm: f64::INFINITY,
    };
    let polish = SolverOptions {
        tol_abs: 1e-11,
        tol_rel: 1e-13,
        max_newton: 25,
        max_activeset: 3,
        activation_tol: 1e-12,
        deactivation_tol: f64::INFINITY,
        // the whole point of the surgery is the crack's placement — hold
        // the sliding gauge so the polish cannot drift it
        gauge: GaugeMode::Hold,
        ..SolverOptions::default()
    };
    let mut polished = solve_equilibrium(problem, &guess, &polish)
        .map_err(|e| CrackError::TranslationPolish(Box::new(e)))?;
    polished.converged = state.converged;
    Ok(polished)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly;
    use crate::constitutive::ConstitutiveModel;
    use crate::mesh_hermite::{HermiteField, Mesh};

    fn problem(lambda: f64, n_elems: usize) -> ScaledProblem {
        ScaledProblem::new(0.1, lambda, ConstitutiveModel::quadratic_well(), Mesh::unit(n_elems))
    }

    fn solve_from(p: &ScaledProblem, field: HermiteField, active: Vec<usize>) -> EquilibriumState {
        let guess = EquilibriumState {
            lambda: p.lambda,
            branch: 1,
            field,
            mu: vec![0.0; p.mesh.n_nodes()],
            active,
            converged: false,
            residual_norm: f64::INFINITY,
        };
        solve_equilibrium(p, &guess, &SolverOptions::default()).expect("test state converges")
    }

    /// Right-end crack: good region [0, s0], flat [s0, 1].
    fn end_crack_state(p: &ScaledProblem, s0: f64) -> EquilibriumState {
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

    /// Two end cracks with a floating good region between them — the
    /// flat–good–flat shape that appears on the second branch.
    fn two_end_cracks_state(p: &ScaledProblem) -> EquilibriumState {
        let lam = p.lambda;
        let w = 1.0 / lam; // good width at inverse strain 1
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
        let active = (0..p.mesh.n_nodes())
            .filter(|&k| {
                let s = p.mesh.node_s(k);
                s <= a + 1e-12 || s >= b - 1e-12
            })
            .collect();
        solve_from(p, field, active)
    }

    #[test]
    fn homogeneous_state_has_empty_topology() {
        let p = problem(1.4, 24);
        let state = EquilibriumState {
            lambda: p.lambda,
            branch: 0,
            field: HermiteField::zeros(p.mesh),
            mu: vec![0.0; p.mesh.n_nodes()],
            active: vec![],
            converged: true,
            residual_norm: 0.0,
        };
        let topo = crack_topology(&state, BROKEN_SLOPE_TOL).unwrap();
        assert!(topo.broken_intervals.is_empty());
        assert!(topo.faces.is_empty());
        assert!(topo.material_crack_set.is_empty());
        assert_eq!(topo.good_intervals, vec![(0.0, 1.0)]);
        assert!(!topo.is_broken());
        assert!(topo.floating_good_intervals().is_empty());
    }

    #[test]
    fn single_broken_node_is_a_degenerate_face() {
        let p = problem(1.4, 24);
        let mut field = HermiteField::zeros(p.mesh);
        field.dofs[2 * 10 + 1] = -1.0;
        let state = EquilibriumState {
            lambda: p.lambda,
            branch: 0,
            field,
            mu: vec![0.0; p.mesh.n_nodes()],
            active: vec![10],
            converged: true,
            residual_norm: 0.0,
        };
        match crack_topology(&state, BROKEN_SLOPE_TOL) {
            Err(CrackError::DegenerateFace { node: 10, .. }) => {}
            other => panic!("expected DegenerateFace, got {other:?}"),
        }
    }

    #[test]
    fn end_crack_topology_and_positive_driving_force() {
        let p = problem(1.6, 60);
        let state = end_crack_state(&p, 0.64);
        let topo = crack_topology(&state, BROKEN_SLOPE_TOL).unwrap();
        assert_eq!(topo.broken_intervals.len(), 1);
        let (_, b) = topo.broken_intervals[0];
        assert_eq!(b, 1.0, "broken interval should abut s = 1");
        assert_eq!(topo.material_crack_set.len(), 1);
        assert!(
            (topo.material_crack_set[0] - 1.0).abs() <= 1e-7,
            "end crack sits at x = 1, got {}",
            topo.material_crack_set[0]
        );
        assert_eq!(topo.faces.len(), 1);
        let face = &topo.faces[0];
        assert_eq!(face.orientation, Orientation::GoodLeft);
        assert!(face.phi > 0.0, "good-left face must pull positive, got {}", face.phi);
        let phi2 = driving_force_jump_estimate(&p, &state, face);
        assert!(phi2 > 0.0, "jump estimate sign mismatch: {phi2}");
        // both estimates approximate the relaxed-state value γ = 1
        assert!((face.phi - 1.0).abs() < 0.2, "primary estimate far from γ: {}", face.phi);
        // no floating regions: the single good interval touches s = 0
        assert!(topo.floating_good_intervals().is_empty());
    }

    /// Internal crack in the middle: good [0,a] and [b,1], flat [a,b].
    fn internal_crack_state(p: &ScaledProblem) -> EquilibriumState {
        let lam = p.lambda;
        let w = 1.0 / lam;
        let a = w / 2.0;
        let b = 1.0 - w / 2.0;
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
        solve_from(p, field, active)
    }

    #[test]
    fn internal_crack_faces_share_one_material_point() {
        let p = problem(1.6, 64);
        let state = internal_crack_state(&p);
        let topo = crack_topology(&state, BROKEN_SLOPE_TOL).unwrap();
        assert_eq!(topo.broken_intervals.len(), 1);
        assert_eq!(topo.faces.len(), 2);
        assert_eq!(topo.material_crack_set.len(), 1);
        let left = &topo.faces[0];
        let right = &topo.faces[1];
        assert_eq!(left.orientation, Orientation::GoodLeft);
        assert_eq!(right.orientation, Orientation::GoodRight);
        // The faces coincide in material coordinates only up to
        // discretization: the flat segment's free values pick up the
        // layer tails, so the gap is set by how well the mesh resolves
        // them — and must shrink fast under refinement.
        let gap = (left.x_face - right.x_face).abs();
        assert!(gap <= 2e-5, "face material gap too wide: {} vs {}", left.x_face, right.x_face);
        assert!(left.phi > 0.0, "left face φ should be positive, got {}", left.phi);
        assert!(right.phi < 0.0, "right face φ should be negative, got {}", right.phi);
        assert_eq!(left.phi, -right.phi);

        let p_fine = problem(1.6, 128);
        let fine = internal_crack_state(&p_fine);
        let topo_fine = crack_topology(&fine, BROKEN_SLOPE_TOL).unwrap();
        let gap_fine = (topo_fine.faces[0].x_face - topo_fine.faces[1].x_face).abs();
        assert!(
            gap_fine <= (gap / 4.0).max(1e-10),
            "face gap should shrink under refinement: {gap} -> {gap_fine}"
        );
    }

    #[test]
    fn dissipation_rate_signs() {
        assert_eq!(dissipation_rate(2.0, 0.0), Dissipation { rate: 0.0, admissible: true });
        assert_eq!(dissipation_rate(2.0, -0.1), Dissipation { rate: -0.2, admissible: false });
        let d = dissipation_rate(-1.0, -0.1);
        assert!((d.rate - 0.1).abs() < 1e-15);
        assert!(d.admissible);
    }

    #[test]
    fn irreversibility_containment() {
        let topo = |xs: &[f64]| CrackTopology {
            broken_intervals: vec![],
            good_intervals: vec![(0.0, 1.0)],
            broken_runs: vec![],
            faces: vec![],
            material_crack_set: xs.to_vec(),
        };
        let tol = 1e-3;
        assert!(check_irreversibility(&topo(&[]), &topo(&[0.5]), tol));
        assert!(check_irreversibility(&topo(&[0.5]), &topo(&[0.5, 1.0]), tol));
        assert!(!check_irreversibility(&topo(&[0.5]), &topo(&[0.4]), tol));
    }

    #[test]
    fn translation_family_preserves_energy_and_equilibrium() {
        let p = problem(1.6, 64);
        let parked = two_end_cracks_state(&p);
        let h = p.mesh.h();
        // The cold solve is free to park the floating region against one
        // end of its range (the family is energy-neutral), which leaves
        // no room to shift that way. Recenter the window first — with
        // the function under test, which is fair game: the identity and
        // window checks live in their own test.
        let topo0 = crack_topology(&parked, BROKEN_SLOPE_TOL).unwrap();
        let region0 = topo0.floating_good_intervals()[0];
        let lo_e = topo0.broken_runs[0].0 as i64 + 1 - topo0.broken_runs[0].1 as i64;
        let hi_e = topo0.broken_runs[1].1 as i64 - 1 - topo0.broken_runs[1].0 as i64;
        let recenter = (lo_e + hi_e) / 2;
        let state = if recenter == 0 {
            parked
        } else {
            translate_family(&p, &parked, region0, recenter as f64 * h).unwrap()
        };
        let topo = crack_topology(&state, BROKEN_SLOPE_TOL).unwrap();
        let floating = topo.floating_good_intervals();
        assert_eq!(floating.len(), 1, "middle region should float: {:?}", topo.good_intervals);
        let region = floating[0];
        assert_eq!(topo.material_crack_set.len(), 2);
        assert!((topo.material_crack_set[0] - 0.0).abs() <= 1e-7);
        assert!((topo.material_crack_set[1] - 1.0).abs() <= 1e-7);
        let face_orients: Vec<Orientation> = topo.faces.iter().map(|f| f.orientation).collect();
        assert_eq!(face_orients, vec![Orientation::GoodRight, Orientation::GoodLeft]);

        let e0 = assembly::energy(&p, &state.field).unwrap();
        for shift_elems in [3i64, -2] {
            let theta = shift_elems as f64 * h;
            let moved = translate_family(&p, &state, region, theta).unwrap();
            let e1 = assembly::energy(&p, &moved.field).unwrap();
            assert!(
                (e1 - e0).abs() <= 1e-9,
                "translation by {shift_elems} elements changed energy by {}",
                (e1 - e0).abs()
            );
            assert!(
                moved.residual_norm <= 1e-8,
                "translated state residual {}",
                moved.residual_norm
            );
            // the face really moved by the requested number of elements
            let t = crack_topology(&moved, BROKEN_SLOPE_TOL).unwrap();
            assert_eq!(t.material_crack_set.len(), 2);
            assert_eq!(
                t.broken_runs[0].1 as i64,
                topo.broken_runs[0].1 as i64 + shift_elems,
                "left face node should shift by {shift_elems}"
            );
        }
    }

    #[test]
    fn translation_identity_and_window() {
        let p = problem(1.6, 64);
        let state = two_end_cracks_state(&p);
        let topo = crack_topology(&state, BROKEN_SLOPE_TOL).unwrap();
        let region = topo.floating_good_intervals()[0];

        let same = translate_family(&p, &state, region, 0.0).unwrap();
        assert_eq!(same.field.dofs, state.field.dofs);

        match translate_family(&p, &state, region, 0.9) {
            Err(CrackError::WindowExceeded { .. }) => {}
            other => panic!("expected WindowExceeded, got {other:?}"),
        }
        // a region index past the partition is rejected
        match translate_family(&p, &state, 7, 0.05) {
            Err(CrackError::NotFloating { region_index: 7 }) => {}
            other => panic!("expected NotFloating, got {other:?}"),
        }
    }
}
