//! Galerkin assembly for the scaled problem.
//!
//! The bar occupies `y ∈ [0, λ]` in the deformed configuration; with
//! `s = y/λ` and `u(s) = h(λs) − s` the inverse deformation `h` becomes a
//! field `u` on the fixed domain `[0,1]` with `u(0) = u(1) = 0`, inverse
//! strain `H = h' = (1 + u')/λ`, and total energy
//!
//! ```text
//! E[λ, u] = ∫₀¹ ε²/(2λ³) (u'')² + λ W*((1 + u')/λ) ds .
//! ```
//!
//! Everything downstream works with the λ³-scaled gradient ("residual")
//!
//! ```text
//! R_i = ∫ ε² u'' φ_i'' + λ³ S*((1+u')/λ) φ_i' ds − λ⁴ μ_k [i = slope dof of active node k]
//! ```
//!
//! whose linearization has the field block
//! `K_ij = ∫ ε² φ_i''φ_j'' + λ² M*((1+u')/λ) φ_i'φ_j' ds`. The second
//! variation of the energy itself is `K/λ³`.
//!
//! Unilateral constraints `u'_k + 1 ≥ 0` act on single slope dofs, so the
//! KKT system's constraint gradients are unit vectors: the bordered
//! symmetric solve reduces exactly to pinning those dofs and recovering
//! each multiplier from the pinned row afterwards. [`KktSystem::solve`]
//! implements that elimination; [`KktSystem::to_dense`] materializes the
//! textbook bordered matrix for tests and small-scale inspection.
//!
//! ## Membrane quadrature in broken runs
//!
//! The constraint lives on nodal slopes, so between the nodes of a broken
//! run the cubic can dip to `H < 0` where `W*` is only defined by
//! extension. Gauss-sampling the extension there hands the run a strictly
//! energy-lowering "material manufacturing" mode: a uniform per-element
//! value deficit `ε₁` earns membrane energy `−γ ε₁` against a bending
//! cost `≈ 12 ε² ε₁²/(λ³h³)`, so every broken run acquires a spurious
//! optimal dip `ε₁* = γλ³h³/(12ε²)` that leaks material into the good
//! region and ruins material-point bookkeeping. Elements whose *both*
//! end slopes sit on the constraint therefore evaluate the membrane term
//! from the nodal strains alone (trapezoid rule) — the membrane then
//! cannot see intra-element dips, runs stay exactly material-constant,
//! and the recovered multipliers of run-interior nodes become the
//! strictly positive density `μ_k = h γ/λ` the continuum theory expects.
//! All other elements keep full Gauss quadrature, so smooth states are
//! untouched.

use crate::constitutive::ConstitutiveModel;
use crate::linalg::{BandMatrix, LinalgError};
use crate::mesh_hermite::{shape_eval, HermiteField, Mesh, QuadratureRule, ShapeEval};
use thiserror::Error;

/// States may drift this far below the constraint before assembly calls
/// them infeasible.
pub const FEASIBILITY_TOL: f64 = 1e-10;

/// Largest inverse-strain dip tolerated *between* nodes when evaluating
/// the energy of a nodally feasible state. The Hermite cubic next to a
/// crack face undershoots by `O(h²·H″)` — about 3·10⁻⁴ at 60 elements —
/// while genuinely infeasible fields overshoot this guard by orders of
/// magnitude.
pub const QUAD_DIP_GUARD: f64 = 1e-2;

/// Half bandwidth of every assembled operator (cubic Hermite coupling).
pub const BANDWIDTH: usize = 3;

/// One-sided tolerance deciding that a nodal slope sits *on* the
/// constraint `u' + 1 = 0` for crack *reporting*. Converged active
/// slopes are snapped exactly, so anything within 1e-8 is a broken node
/// for topology purposes.
pub const BROKEN_SLOPE_TOL: f64 = 1e-8;

/// An element is run-interior when both of its end slopes rest *exactly*
/// on the constraint: it lies strictly inside a broken run (or spans a
/// whole two-node run). Such elements evaluate the membrane term
/// nodally; see the module docs for why Gauss sampling must not look
/// inside them.
///
/// Exact equality is deliberate, not a missing tolerance. The active-set
/// solver snaps every active slope to `-1.0` bitwise, so pinned pairs
/// always qualify; a *free* slope, by contrast, may wander arbitrarily
/// close to `-1` during Newton iterations, and any tolerance band would
/// let it flip the element's quadrature mode mid-solve — an O(λ³γ)
/// discontinuity in the value-row residuals that stalls convergence.
///
/// This field-based predicate is the right one for *converged* (or
/// hand-built) states. Inside the solver the mode must instead follow
/// the current active set — a just-released slope still reads `-1.0`
/// bitwise until Newton moves it, and its element has to switch to Gauss
/// quadrature at the release, not mid-iteration. Assembly entry points
/// that participate in the solve therefore take the active set and build
/// their mask with [`broken_node_mask`].
pub fn run_interior(u: &HermiteField, e: usize) -> bool {
    u.deriv(e) == -1.0 && u.deriv(e + 1) == -1.0
}

/// Node mask (`true` = slope constrained) from an explicit active set.
pub fn broken_node_mask(n_nodes: usize, active: &[usize]) -> Vec<bool> {
    let mut mask = vec![false; n_nodes];
    for &k in active {
        if k < n_nodes {
            mask[k] = true;
        }
    }
    mask
}

fn broken_node_mask_from_field(u: &HermiteField) -> Vec<bool> {
    (0..u.mesh.n_nodes()).map(|k| u.deriv(k) == -1.0).collect()
}

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("inverse strain H = {h:.3e} below -1e-10 at s = {s:.6}: outside the feasible cone")]
    ConstraintViolated { s: f64, h: f64 },
    #[error("dimension mismatch: {what} has length {got}, expected {want}")]
    DimensionMismatch { what: &'static str, got: usize, want: usize },
}

/// The fixed-domain problem data: regularization length ε, stretch λ,
/// constitutive law and mesh.
#[derive(Debug, Clone, Copy)]
pub struct ScaledProblem {
    pub epsilon: f64,
    pub lambda: f64,
    pub model: ConstitutiveModel,
    pub mesh: Mesh,
}

impl ScaledProblem {
    pub fn new(epsilon: f64, lambda: f64, model: ConstitutiveModel, mesh: Mesh) -> Self {
        assert!(epsilon > 0.0, "epsilon must be positive, got {epsilon}");
        assert!(lambda > 0.0, "lambda must be positive, got {lambda}");
        ScaledProblem { epsilon, lambda, model, mesh }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        ScaledProblem::new(self.epsilon, lambda, self.model, self.mesh)
    }

    /// Inverse strain from a slope value.
    #[inline]
    pub fn inverse_strain(&self, du: f64) -> f64 {
        (1.0 + du) / self.lambda
    }

    /// Dof indices of the Dirichlet rows u(s_min) = u(s_max) = 0.
    pub fn bc_dofs(&self) -> [usize; 2] {
        [0, 2 * self.mesh.n_elems]
    }
}

fn check_mesh(p: &ScaledProblem, u: &HermiteField) -> Result<(), AssemblyError> {
    if u.dofs.len() != p.mesh.n_dofs() {
        return Err(AssemblyError::DimensionMismatch {
            what: "dof vector",
            got: u.dofs.len(),
            want: p.mesh.n_dofs(),
        });
    }
    Ok(())
}

fn quadrature_shapes(mesh: &Mesh) -> (QuadratureRule, Vec<ShapeEval>) {
    let rule = QuadratureRule::gauss4();
    let shapes = rule.points.iter().map(|&xi| shape_eval(xi, mesh.h())).collect();
    (rule, shapes)
}

/// Total energy `E[λ, u]` of a feasible state. Feasibility is what the
/// discretization constrains: nodal slopes `u'_k + 1 ≥ −FEASIBILITY_TOL`.
/// Between nodes the cubic may undershoot the constraint by `O(h²·H″)`
/// next to a crack face — those quadrature points are evaluated with the
/// smooth extension of `W*`, consistent with the landscape the solver
/// equilibrates. Dips beyond `QUAD_DIP_GUARD` cannot come from a
/// feasible equilibrium and are rejected. Run-interior elements take
/// their membrane energy from the nodal strains (both pinned at H = 0),
/// so the guard does not apply inside broken runs.
pub fn energy(p: &ScaledProblem, u: &HermiteField) -> Result<f64, AssemblyError> {
    check_mesh(p, u)?;
    for k in 0..p.mesh.n_nodes() {
        let hh = p.inverse_strain(u.deriv(k));
        if u.deriv(k) + 1.0 < -FEASIBILITY_TOL {
            return Err(AssemblyError::ConstraintViolated { s: p.mesh.node_s(k), h: hh });
        }
    }
    let (rule, shapes) = quadrature_shapes(&p.mesh);
    let h = p.mesh.h();
    let eps2 = p.epsilon * p.epsilon;
    let lam3 = p.lambda * p.lambda * p.lambda;
    let broken = broken_node_mask_from_field(u);
    let mut total = 0.0;
    for e in 0..p.mesh.n_elems {
        let d = u.elem_dofs(e);
        let nodal_membrane = broken[e] && broken[e + 1];
        if nodal_membrane {
            // both nodal strains are pinned at H = 0, so this is zero for
            // the standard well; kept general for other laws
            let wl = p.model.eval_inverse_extended(p.inverse_strain(u.deriv(e)));
            let wr = p.model.eval_inverse_extended(p.inverse_strain(u.deriv(e + 1)));
            total += p.lambda * 0.5 * h * (wl.energy + wr.energy);
        }
        for (q, sh) in shapes.iter().enumerate() {
            let mut du = 0.0;
            let mut d2u = 0.0;
            for i in 0..4 {
                du += sh.d1[i] * d[i];
                d2u += sh.d2[i] * d[i];
            }
            total += rule.weights[q] * h * 0.5 * eps2 / lam3 * d2u * d2u;
            if nodal_membrane {
                continue;
            }
            let hh = p.inverse_strain(du);
            if hh < -QUAD_DIP_GUARD {
                let s = p.mesh.node_s(e) + rule.points[q] * h;
                return Err(AssemblyError::ConstraintViolated { s, h: hh });
            }
            let w = p.model.eval_inverse_extended(hh);
            total += rule.weights[q] * h * p.lambda * w.energy;
        }
    }
    Ok(total)
}

/// Raw Galerkin gradient `λ³ ∂E/∂U` against every basis function — no
/// boundary handling, no multiplier terms. This is what multiplier
/// recovery and finite-difference checks want. Run-interior elements
/// (per the field predicate [`run_interior`]) contribute their membrane
/// forces nodally: `λ³ (h/2) S*(H_node)` lands on the two slope dofs
/// (the nodal strain depends on nothing else), so the recovered
/// multipliers along a broken run are per-node lumped constraint
/// reactions.
pub fn residual_field(p: &ScaledProblem, u: &HermiteField) -> Vec<f64> {
    residual_field_masked(p, u, &broken_node_mask_from_field(u))
}

/// [`residual_field`] with the quadrature mode keyed to an explicit
/// broken-node mask instead of the field's own slopes. The solver passes
/// its active set here so the mode stays fixed throughout an inner
/// Newton solve and flips only at release/activation events.
pub fn residual_field_masked(p: &ScaledProblem, u: &HermiteField, broken: &[bool]) -> Vec<f64> {
    let (rule, shapes) = quadrature_shapes(&p.mesh);
    let h = p.mesh.h();
    let eps2 = p.epsilon * p.epsilon;
    let lam3 = p.lambda * p.lambda * p.lambda;
    let mut r = vec![0.0; p.mesh.n_dofs()];
    for e in 0..p.mesh.n_elems {
        let d = u.elem_dofs(e);
        let base = 2 * e;
        let nodal_membrane = broken[e] && broken[e + 1];
        if nodal_membrane {
            let sl = p.model.eval_inverse_extended(p.inverse_strain(u.deriv(e))).stress;
            let sr = p.model.eval_inverse_extended(p.inverse_strain(u.deriv(e + 1))).stress;
            r[base + 1] += lam3 * 0.5 * h * sl;
            r[base + 3] += lam3 * 0.5 * h * sr;
        }
        for (q, sh) in shapes.iter().enumerate() {
            let mut du = 0.0;
            let mut d2u = 0.0;
            for i in 0..4 {
                du += sh.d1[i] * d[i];
                d2u += sh.d2[i] * d[i];
            }
            let sstar = if nodal_membrane {
                0.0
            } else {
                p.model.eval_inverse_extended(p.inverse_strain(du)).stress
            };
            let wq = rule.weights[q] * h;
            for i in 0..4 {
                r[base + i] += wq * (eps2 * d2u * sh.d2[i] + lam3 * sstar * sh.d1[i]);
            }
        }
    }
    r
}

/// Stacked KKT residual: Galerkin rows with the Dirichlet rows replaced
/// by `u(0)` and `u(1)`, multiplier forces `λ⁴ μ_k` subtracted from the
/// slope rows of active nodes, and one complementarity row `u'_k + 1`
/// appended per active node (in active-set order). Quadrature mode is
/// keyed to `active`, same as [`tangent`].
pub fn residual(
    p: &ScaledProblem,
    u: &HermiteField,
    mu: &[f64],
    active: &[usize],
) -> Result<Vec<f64>, AssemblyError> {
    check_mesh(p, u)?;
    if mu.len() != p.mesh.n_nodes() {
        return Err(AssemblyError::DimensionMismatch {
            what: "multiplier vector",
            got: mu.len(),
            want: p.mesh.n_nodes(),
        });
    }
    let lam4 = p.lambda.powi(4);
    let mask = broken_node_mask(p.mesh.n_nodes(), active);
    let mut r = residual_field_masked(p, u, &mask);
    for &k in active {
        if k >= p.mesh.n_nodes() {
            return Err(AssemblyError::DimensionMismatch {
                what: "active node index",
                got: k,
                want: p.mesh.n_nodes(),
            });
        }
        r[2 * k + 1] -= lam4 * mu[k];
    }
    for bc in p.bc_dofs() {
        r[bc] = u.dofs[bc];
    }
    r.reserve(active.len());
    for &k in active {
        r.push(u.deriv(k) + 1.0);
    }
    Ok(r)
}

/// Field block + active-set bookkeeping of the KKT tangent.
///
/// `field` is the pure Galerkin matrix (no boundary rows pinned); the
/// solve and the dense view impose the Dirichlet elimination themselves.
/// The multiplier coupling carries the factor `−λ⁴`, and the dense view
/// scales the constraint rows identically so the full matrix is
/// symmetric.
#[derive(Debug, Clone)]
pub struct KktSystem {
    pub field: BandMatrix,
    pub active: Vec<usize>,
    pub lambda: f64,
    bc_dofs: [usize; 2],
}

impl KktSystem {
    pub fn n_field_dofs(&self) -> usize {
        self.field.n()
    }

    pub fn dim(&self) -> usize {
        self.field.n() + self.active.len()
    }

    /// Dense symmetric bordered matrix: field block with Dirichlet rows
    /// pinned, bordered by `−λ⁴` unit couplings for each active node.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.n_field_dofs();
        let dim = self.dim();
        let mut pinned = self.field.clone();
        for bc in self.bc_dofs {
            pinned.pin_dof(bc, 1.0);
        }
        let mut m = nalgebra::DMatrix::zeros(dim, dim);
        m.view_mut((0, 0), (n, n)).copy_from(&pinned.to_dense());
        let lam4 = self.lambda.powi(4);
        for (j, &k) in self.active.iter().enumerate() {
            m[(2 * k + 1, n + j)] = -lam4;
            m[(n + j, 2 * k + 1)] = -lam4;
        }
        m
    }

    /// Solve the bordered system by elimination. `rhs_field` is the
    /// negated field residual (its Dirichlet rows are read as prescribed
    /// value increments), `rhs_comp[j]` the prescribed slope increment of
    /// the j-th active node (negated complementarity residual). Returns
    /// the field increment and the multiplier increments.
    ///
    /// Constraint gradients are unit vectors, so eliminating the
    /// constrained dofs and back-computing `δμ_k` from the uncondensed
    /// slope row is algebraically exact — no Schur complement needed.
    pub fn solve(&self, rhs_field: &[f64], rhs_comp: &[f64]) -> Result<(Vec<f64>, Vec<f64>), LinalgError> {
        let n = self.n_field_dofs();
        assert_eq!(rhs_field.len(), n, "field rhs length");
        assert_eq!(rhs_comp.len(), self.active.len(), "constraint rhs length");

        // prescribed increments: Dirichlet rows and active slope dofs
        let mut prescribed: Vec<(usize, f64)> = Vec::with_capacity(2 + self.active.len());
        for bc in self.bc_dofs {
            prescribed.push((bc, rhs_field[bc]));
        }
        for (j, &k) in self.active.iter().enumerate() {
            prescribed.push((2 * k + 1, rhs_comp[j]));
        }

        let mut pinned = self.field.clone();
        let mut rhs = rhs_field.to_vec();
        for &(dof, val) in &prescribed {
            // move the known column to the right-hand side, then pin
            if val != 0.0 {
                let lo = dof.saturating_sub(BANDWIDTH);
                let hi = (dof + BANDWIDTH).min(n - 1);
                for i in lo..=hi {
                    if i != dof {
                        rhs[i] -= pinned.get(i, dof) * val;
                    }
                }
            }
        }
        for &(dof, val) in &prescribed {
            pinned.pin_dof(dof, 1.0);
            rhs[dof] = val;
        }
        let delta_u = pinned.lu()?.solve(&rhs)?;

        // recover multiplier increments from the uncondensed slope rows:
        // K δu − λ⁴ δμ = f  ⇒  δμ = (K δu − f) / λ⁴
        let lam4 = self.lambda.powi(4);
        let kdu = self.field.matvec(&delta_u);
        let delta_mu: Vec<f64> = self
            .active
            .iter()
            .map(|&k| (kdu[2 * k + 1] - rhs_field[2 * k + 1]) / lam4)
            .collect();
        Ok((delta_u, delta_mu))
    }
}

/// KKT tangent at `(u, active)`: field block
/// `∫ ε² φ''ψ'' + λ² M*((1+u')/λ) φ'ψ' ds` plus constraint bookkeeping.
/// Quadrature mode is keyed to `active`, matching the residual the
/// solver's Newton iteration drives to zero.
pub fn tangent(p: &ScaledProblem, u: &HermiteField, active: &[usize]) -> KktSystem {
    let mask = broken_node_mask(p.mesh.n_nodes(), active);
    let field = assemble_field_band(p, u, 1.0, &mask);
    KktSystem { field, active: active.to_vec(), lambda: p.lambda, bc_dofs: p.bc_dofs() }
}

/// Full second-variation matrix `G` (no constraint rows, no boundary
/// elimination): `Vᵀ G V ≈ (1/λ³) ∫ ε²(v'')² + λ² M*((1+u')/λ)(v')² ds`
/// for the Hermite coefficients `V` of a variation `v`.
pub fn second_variation_matrix(p: &ScaledProblem, u: &HermiteField) -> BandMatrix {
    let lam3 = p.lambda * p.lambda * p.lambda;
    assemble_field_band(p, u, 1.0 / lam3, &broken_node_mask_from_field(u))
}

fn assemble_field_band(p: &ScaledProblem, u: &HermiteField, scale: f64, broken: &[bool]) -> BandMatrix {
    assert_eq!(u.dofs.len(), p.mesh.n_dofs(), "field/mesh mismatch");
    let (rule, shapes) = quadrature_shapes(&p.mesh);
    let h = p.mesh.h();
    let eps2 = p.epsilon * p.epsilon;
    let lam2 = p.lambda * p.lambda;
    let mut band = BandMatrix::new(p.mesh.n_dofs(), BANDWIDTH, BANDWIDTH);
    let mut local = [[0.0f64; 4]; 4];
    for e in 0..p.mesh.n_elems {
        let d = u.elem_dofs(e);
        for row in local.iter_mut() {
            row.fill(0.0);
        }
        let nodal_membrane = broken[e] && broken[e + 1];
        if nodal_membrane {
            // Nodal membrane: d(λ³(h/2)S*(H_node))/d(slope dof) sits on the
            // matching slope diagonal and couples to nothing else.
            let ml = p.model.eval_inverse_extended(p.inverse_strain(u.deriv(e))).modulus;
            let mr = p.model.eval_inverse_extended(p.inverse_strain(u.deriv(e + 1))).modulus;
            local[1][1] += lam2 * 0.5 * h * ml * scale;
            local[3][3] += lam2 * 0.5 * h * mr * scale;
        }
        for (q, sh) in shapes.iter().enumerate() {
            let mut du = 0.0;
            for i in 0..4 {
                du += sh.d1[i] * d[i];
            }
            let modulus = if nodal_membrane {
                0.0
            } else {
                p.model.eval_inverse_extended(p.inverse_strain(du)).modulus
            };
            let wq = rule.weights[q] * h * scale;
            for i in 0..4 {
                for j in 0..4 {
                    local[i][j] += wq * (eps2 * sh.d2[i] * sh.d2[j] + lam2 * modulus * sh.d1[i] * sh.d1[j]);
                }
            }
        }
        let base = 2 * e;
        for i in 0..4 {
            for j in 0..4 {
                band.add(base + i, base + j, local[i][j]);
            }
        }
    }
    band
}
