//! Constitutive laws: the forward stored energy `W(F)` of the stretch
//! `F`, its inverse-variable counterpart `W*(H) = H W(1/H)` of the
//! inverse stretch `H = 1/F`, and their derivatives
//! `S = dW/dF`, `S* = dW*/dH`, `M* = d²W*/dH²`.
//!
//! Every law here asymptotes to a finite energy `gamma` as `F → ∞`
//! (equivalently `S*(0) = gamma`), which is what makes fracture — fully
//! opened material, `H = 0` — energetically affordable.
//!
//! Two laws are provided:
//!
//! * [`ConstitutiveModel::quadratic_well`] — `W(F) = (1 − 1/F)²`, whose
//!   inverse form is the double-welled cubic `W*(H) = H(1−H)²` with
//!   `gamma = 1`.
//! * [`ConstitutiveModel::lennard_jones`] — the two-exponent family
//!   `W(F) = A F⁻ᵐ − B F⁻ⁿ + C` with `m > n ≥ 1` and `nB = mA` so the
//!   well sits at `F = 1`; `C = B − A` normalizes `W(1) = 0` and equals
//!   `gamma`.
//!
//! The solver's Newton iterates may transiently visit `H < 0` where `W*`
//! has no physical meaning; [`ConstitutiveModel::eval_inverse_extended`]
//! continues `W*` below zero with a modulus-relaxation layer (continuous
//! modulus at the junction, constant stress at depth) so that assembly
//! never sees a domain error while the active-set logic restores
//! feasibility.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Depth of the layer below `H = 0` over which the extension's modulus
/// relaxes from `M*(0)` to zero (see
/// [`ConstitutiveModel::eval_inverse_extended`]). Converged states keep
/// their intra-element undershoots well inside this layer (`O(h²·H″)`,
/// a few 10⁻⁴ at practical resolutions), while the persistent dips of
/// very coarse meshes land beyond it, on the flat part.
pub const MODULUS_RELAX_DEPTH: f64 = 1e-2;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("stretch must be positive, got F = {f}")]
    NonPositiveStretch { f: f64 },
    #[error("inverse stretch must be nonnegative, got H = {h}")]
    NegativeInverseStretch { h: f64 },
    #[error("invalid Lennard-Jones parameters: {reason}")]
    InvalidParameters { reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModelKind {
    /// `W(F) = (1 − 1/F)²`, `W*(H) = H(1−H)²`.
    QuadraticWell,
    /// `W(F) = a F⁻ᵐ − b F⁻ⁿ + c`; exponents may be non-integer.
    LennardJones { a: f64, b: f64, c: f64, m: f64, n: f64 },
}

/// A validated constitutive law together with its surface-energy
/// constant `gamma = lim_{F→∞} W(F) = S*(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstitutiveModel {
    kind: ModelKind,
    gamma: f64,
}

/// Forward energy and stress at a stretch `F`.
#[derive(Debug, Clone, Copy)]
pub struct ForwardEval {
    pub energy: f64,
    pub stress: f64,
}

/// Inverse energy, stress and modulus at an inverse stretch `H`.
#[derive(Debug, Clone, Copy)]
pub struct InverseEval {
    pub energy: f64,
    pub stress: f64,
    pub modulus: f64,
}

impl ConstitutiveModel {
    pub fn quadratic_well() -> Self {
        ConstitutiveModel { kind: ModelKind::QuadraticWell, gamma: 1.0 }
    }

    /// Build a Lennard-Jones-type law from `(a, b, m, n)`. The well
    /// condition `n·b = m·a` (zero stress at `F = 1`) is required, the
    /// offset `c = b − a` is solved for so that `W(1) = 0`, and the
    /// hypotheses `a > 0`, `m > n ≥ 1` guarantee a strict single well
    /// with positive asymptote `gamma = c`.
    pub fn lennard_jones(a: f64, b: f64, m: f64, n: f64) -> Result<Self, ModelError> {
        if !(a > 0.0) {
            return Err(ModelError::InvalidParameters { reason: format!("need a > 0, got a = {a}") });
        }
        if !(n >= 1.0) {
            return Err(ModelError::InvalidParameters { reason: format!("need n >= 1, got n = {n}") });
        }
        if !(m > n) {
            return Err(ModelError::InvalidParameters {
                reason: format!("need m > n, got m = {m}, n = {n}"),
            });
        }
        let well = n * b - m * a;
        if well.abs() > 1e-12 * (n * b).abs().max(m * a) {
            return Err(ModelError::InvalidParameters {
                reason: format!("well condition n*b = m*a violated: n*b = {}, m*a = {}", n * b, m * a),
            });
        }
        let c = b - a;
        if !(c > 0.0) {
            return Err(ModelError::InvalidParameters {
                reason: format!("asymptote c = b - a must be positive, got {c}"),
            });
        }
        Ok(ConstitutiveModel { kind: ModelKind::LennardJones { a, b, c, m, n }, gamma: c })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// Surface-energy constant: the `F → ∞` asymptote of `W`, equal to
    /// `S*(0)`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `M*(0)`, the inverse modulus at full opening; the junction
    /// curvature the extension below `H = 0` starts from.
    pub fn modulus_at_zero(&self) -> f64 {
        match self.kind {
            ModelKind::QuadraticWell => -4.0,
            ModelKind::LennardJones { a, b, m, n, .. } => {
                // M*(H) = a m(m+1) H^(m-1) − b n(n+1) H^(n-1); at H = 0 only
                // an exponent-1 term survives.
                let mut m0 = 0.0;
                if (m - 1.0).abs() < 1e-14 {
                    m0 += a * m * (m + 1.0);
                }
                if (n - 1.0).abs() < 1e-14 {
                    m0 -= b * n * (n + 1.0);
                }
                m0
            }
        }
    }

    /// Forward energy `W(F)` and stress `S(F) = dW/dF`.
    pub fn eval_forward(&self, f: f64) -> Result<ForwardEval, ModelError> {
        if !(f > 0.0) {
            return Err(ModelError::NonPositiveStretch { f });
        }
        Ok(match self.kind {
            ModelKind::QuadraticWell => {
                let e = 1.0 - 1.0 / f;
                ForwardEval { energy: e * e, stress: 2.0 * e / (f * f) }
            }
            ModelKind::LennardJones { a, b, c, m, n } => ForwardEval {
                energy: a * f.powf(-m) - b * f.powf(-n) + c,
                stress: -m * a * f.powf(-m - 1.0) + n * b * f.powf(-n - 1.0),
            },
        })
    }

    /// Inverse energy `W*(H)`, stress `S*(H) = dW*/dH`, and modulus
    /// `M*(H) = d²W*/dH²`, by the closed-form polynomials (no detour
    /// through `W(1/H)`, which is ill-defined at `H = 0`).
    pub fn eval_inverse(&self, h: f64) -> Result<InverseEval, ModelError> {
        if h < 0.0 {
            return Err(ModelError::NegativeInverseStretch { h });
        }
        Ok(self.inverse_closed_form(h))
    }

    /// `eval_inverse` continued below `H = 0`. Assembly evaluates through
    /// this so that transiently infeasible Newton iterates (`u' < −1`
    /// before the active set catches up) never error out.
    ///
    /// The continuation keeps the modulus *continuous everywhere*: it
    /// starts from `M*(0)` at the junction and relaxes linearly to zero
    /// over the depth [`MODULUS_RELAX_DEPTH`], after which the stress is
    /// constant (a plain ramp). Both halves of that design matter.
    /// Crack faces live exactly at `H = 0` with quadrature points
    /// straddling the junction, and a modulus jump there (e.g. a ramp
    /// grafted directly onto the well, `M* = 0` against `M*(0) = −4`)
    /// makes the tangent flip whenever an iterate crosses — Newton then
    /// bounces at the kink instead of converging through it. But carrying
    /// the full negative junction curvature to all depths is just as bad:
    /// states that keep quadrature points a few percent below zero (a
    /// coarse-mesh notch, say) then see enough spurious concavity to
    /// drive the tangent near-singular, and the line search dies on
    /// exploding steps. Relaxing the modulus within a thin layer is
    /// smooth where iterates chatter and inert where they settle.
    pub fn eval_inverse_extended(&self, h: f64) -> InverseEval {
        if h >= 0.0 {
            return self.inverse_closed_form(h);
        }
        let m0 = self.modulus_at_zero();
        if m0 >= 0.0 {
            // Convex (or flat) junction: the Taylor extension is already
            // well-behaved at every depth.
            return InverseEval {
                energy: h * (self.gamma + 0.5 * m0 * h),
                stress: self.gamma + m0 * h,
                modulus: m0,
            };
        }
        let d = MODULUS_RELAX_DEPTH;
        if h > -d {
            // M = m0(1 + H/d), integrated twice from the junction values.
            InverseEval {
                energy: self.gamma * h + m0 * h * h * (0.5 + h / (6.0 * d)),
                stress: self.gamma + m0 * h * (1.0 + 0.5 * h / d),
                modulus: m0 * (1.0 + h / d),
            }
        } else {
            // Below the layer: constant stress, zero modulus.
            let s_deep = self.gamma - 0.5 * m0 * d;
            let w_at_d = -self.gamma * d + m0 * d * d / 3.0;
            InverseEval { energy: w_at_d + s_deep * (h + d), stress: s_deep, modulus: 0.0 }
        }
    }

    fn inverse_closed_form(&self, h: f64) -> InverseEval {
        match self.kind {
            ModelKind::QuadraticWell => {
                let e = 1.0 - h;
                InverseEval {
                    energy: h * e * e,
                    stress: e * (1.0 - 3.0 * h),
                    modulus: 6.0 * h - 4.0,
                }
            }
            ModelKind::LennardJones { a, b, c, m, n } => {
                // W*(H) = a H^(m+1) − b H^(n+1) + c H
                let energy = a * powh(h, m + 1.0) - b * powh(h, n + 1.0) + c * h;
                let stress = a * (m + 1.0) * powh(h, m) - b * (n + 1.0) * powh(h, n) + c;
                let modulus = a * m * (m + 1.0) * powh(h, m - 1.0) - b * n * (n + 1.0) * powh(h, n - 1.0);
                InverseEval { energy, stress, modulus }
            }
        }
    }

    /// Max relative mismatch of the defining identity
    /// `W*(H) = H · W(1/H)` over the given samples (all must be > 0).
    pub fn duality_check(&self, h_samples: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for &h in h_samples {
            assert!(h > 0.0, "duality check needs H > 0, got {h}");
            let wstar = self.inverse_closed_form(h).energy;
            let through_forward = h * self.eval_forward(1.0 / h).expect("1/H > 0").energy;
            let err = (wstar - through_forward).abs() / (1.0 + wstar.abs());
            worst = worst.max(err);
        }
        worst
    }
}

/// `H^p` with the convention `0^0 = 1`, `0^p = 0` for `p > 0`; keeps the
/// closed forms finite at `H = 0` where the analytic limits exist.
fn powh(h: f64, p: f64) -> f64 {
    if h == 0.0 {
        if p == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        h.powf(p)
    }
}
