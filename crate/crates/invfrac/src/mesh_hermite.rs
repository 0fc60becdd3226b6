//! Uniform 1D mesh with a piecewise-cubic Hermite basis (C¹, hence
//! H²-conforming — the energy carries second derivatives) and Gauss
//! quadrature on the reference element [0,1].
//!
//! Each node carries two dofs: the value `u_k` and the physical
//! derivative `u'_k`, stored interleaved as `[u_0, u'_0, u_1, u'_1, …]`.
//! Derivative dofs are unscaled physical slopes; the shape functions
//! absorb the element length. That convention puts the unilateral
//! constraint `u'_k + 1 ≥ 0` directly on dof number `2k + 1`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("coordinate {s} outside mesh domain [{lo}, {hi}]")]
    OutOfDomain { s: f64, lo: f64, hi: f64 },
    #[error("dof vector has length {got}, mesh needs {want}")]
    DofMismatch { got: usize, want: usize },
}

/// Uniform mesh of `n_elems` elements on `[s_min, s_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub n_elems: usize,
    pub s_min: f64,
    pub s_max: f64,
}

impl Mesh {
    pub fn new(n_elems: usize, s_min: f64, s_max: f64) -> Self {
        assert!(n_elems >= 2, "need at least 2 elements, got {n_elems}");
        assert!(s_max > s_min, "empty domain [{s_min}, {s_max}]");
        Mesh { n_elems, s_min, s_max }
    }

    /// Unit interval mesh, the scaled computational domain.
    pub fn unit(n_elems: usize) -> Self {
        Mesh::new(n_elems, 0.0, 1.0)
    }

    #[inline]
    pub fn h(&self) -> f64 {
        (self.s_max - self.s_min) / self.n_elems as f64
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.n_elems + 1
    }

    #[inline]
    pub fn n_dofs(&self) -> usize {
        2 * self.n_nodes()
    }

    #[inline]
    pub fn node_s(&self, k: usize) -> f64 {
        self.s_min + self.h() * k as f64
    }

    /// Element index and local coordinate for `s`; the right endpoint
    /// belongs to the last element.
    pub fn locate(&self, s: f64) -> Result<(usize, f64), MeshError> {
        let tol = 1e-12 * (self.s_max - self.s_min);
        if s < self.s_min - tol || s > self.s_max + tol {
            return Err(MeshError::OutOfDomain { s, lo: self.s_min, hi: self.s_max });
        }
        let h = self.h();
        let raw = ((s - self.s_min) / h).floor();
        let e = (raw.max(0.0) as usize).min(self.n_elems - 1);
        let xi = ((s - self.node_s(e)) / h).clamp(0.0, 1.0);
        Ok((e, xi))
    }
}

/// Cubic Hermite shape functions and derivatives at one reference point,
/// ordered (value-left, slope-left, value-right, slope-right).
/// Derivatives are with respect to the global coordinate.
#[derive(Debug, Clone, Copy)]
pub struct ShapeEval {
    pub value: [f64; 4],
    pub d1: [f64; 4],
    pub d2: [f64; 4],
}

pub fn shape_eval(xi: f64, elem_len: f64) -> ShapeEval {
    debug_assert!((-1e-12..=1.0 + 1e-12).contains(&xi), "xi = {xi} outside [0,1]");
    let h = elem_len;
    let x2 = xi * xi;
    let x3 = x2 * xi;
    ShapeEval {
        value: [
            1.0 - 3.0 * x2 + 2.0 * x3,
            h * (xi - 2.0 * x2 + x3),
            3.0 * x2 - 2.0 * x3,
            h * (x3 - x2),
        ],
        d1: [
            (6.0 * x2 - 6.0 * xi) / h,
            1.0 - 4.0 * xi + 3.0 * x2,
            (6.0 * xi - 6.0 * x2) / h,
            3.0 * x2 - 2.0 * xi,
        ],
        d2: [
            (12.0 * xi - 6.0) / (h * h),
            (6.0 * xi - 4.0) / h,
            (6.0 - 12.0 * xi) / (h * h),
            (6.0 * xi - 2.0) / h,
        ],
    }
}

/// Third derivative of the four shapes (constant on the element).
pub fn shape_d3(elem_len: f64) -> [f64; 4] {
    let h = elem_len;
    [12.0 / (h * h * h), 6.0 / (h * h), -12.0 / (h * h * h), 6.0 / (h * h)]
}

/// Gauss rule on the reference element [0,1]; weights sum to 1.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// 4-point Gauss-Legendre rule, exact through degree 7. Enough for
    /// the bending term (degree 2 integrand) exactly and for the
    /// nonlinear membrane term to well below solver tolerances.
    pub fn gauss4() -> Self {
        const A: f64 = 0.861_136_311_594_052_6;
        const B: f64 = 0.339_981_043_584_856_3;
        const WA: f64 = 0.347_854_845_137_453_8;
        const WB: f64 = 0.652_145_154_862_546_1;
        QuadratureRule {
            points: vec![0.5 * (1.0 - A), 0.5 * (1.0 - B), 0.5 * (1.0 + B), 0.5 * (1.0 + A)],
            weights: vec![0.5 * WA, 0.5 * WB, 0.5 * WB, 0.5 * WA],
        }
    }
}

/// Field value and first two derivatives at a point.
#[derive(Debug, Clone, Copy)]
pub struct FieldEval {
    pub u: f64,
    pub du: f64,
    pub d2u: f64,
}

/// Piecewise-cubic Hermite field over a [`Mesh`].
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteField {
    pub mesh: Mesh,
    pub dofs: Vec<f64>,
}

impl HermiteField {
    pub fn zeros(mesh: Mesh) -> Self {
        HermiteField { dofs: vec![0.0; mesh.n_dofs()], mesh }
    }

    pub fn from_dofs(mesh: Mesh, dofs: Vec<f64>) -> Result<Self, MeshError> {
        if dofs.len() != mesh.n_dofs() {
            return Err(MeshError::DofMismatch { got: dofs.len(), want: mesh.n_dofs() });
        }
        Ok(HermiteField { mesh, dofs })
    }

    /// Nodal interpolant of `(value, slope) = f(s)`.
    pub fn interpolate(mesh: Mesh, f: impl Fn(f64) -> (f64, f64)) -> Self {
        let mut dofs = vec![0.0; mesh.n_dofs()];
        for k in 0..mesh.n_nodes() {
            let (v, d) = f(mesh.node_s(k));
            dofs[2 * k] = v;
            dofs[2 * k + 1] = d;
        }
        HermiteField { mesh, dofs }
    }

    #[inline]
    pub fn value(&self, node: usize) -> f64 {
        self.dofs[2 * node]
    }

    #[inline]
    pub fn deriv(&self, node: usize) -> f64 {
        self.dofs[2 * node + 1]
    }

    /// The four dofs of element `e`: (u_e, u'_e, u_{e+1}, u'_{e+1}).
    #[inline]
    pub fn elem_dofs(&self, e: usize) -> [f64; 4] {
        [self.dofs[2 * e], self.dofs[2 * e + 1], self.dofs[2 * e + 2], self.dofs[2 * e + 3]]
    }

    /// Evaluate inside element `e` at reference coordinate `xi`.
    pub fn eval_in_elem(&self, e: usize, xi: f64) -> FieldEval {
        let sh = shape_eval(xi, self.mesh.h());
        let d = self.elem_dofs(e);
        let mut out = FieldEval { u: 0.0, du: 0.0, d2u: 0.0 };
        for i in 0..4 {
            out.u += sh.value[i] * d[i];
            out.du += sh.d1[i] * d[i];
            out.d2u += sh.d2[i] * d[i];
        }
        out
    }

    pub fn eval(&self, s: f64) -> Result<FieldEval, MeshError> {
        let (e, xi) = self.mesh.locate(s)?;
        Ok(self.eval_in_elem(e, xi))
    }

    /// Third derivative on element `e` (cubics have constant u''' per
    /// element; it jumps at nodes).
    pub fn third_derivative(&self, e: usize) -> f64 {
        let d3 = shape_d3(self.mesh.h());
        let d = self.elem_dofs(e);
        d3[0] * d[0] + d3[1] * d[1] + d3[2] * d[2] + d3[3] * d[3]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn shape_interpolation_at_endpoints() {
        for h in [1.0, 0.25] {
            let s0 = shape_eval(0.0, h);
            assert_eq!(s0.value, [1.0, 0.0, 0.0, 0.0]);
            assert_eq!(s0.d1, [0.0, 1.0, 0.0, 0.0]);
            let s1 = shape_eval(1.0, h);
            assert_eq!(s1.value, [0.0, 0.0, 1.0, 0.0]);
            assert_eq!(s1.d1, [0.0, 0.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn shapes_partition_unity() {
        for i in 0..=20 {
            let xi = i as f64 / 20.0;
            let sh = shape_eval(xi, 0.37);
            assert_relative_eq!(sh.value[0] + sh.value[2], 1.0, max_relative = 1e-14);
            assert!((sh.d1[0] + sh.d1[2]).abs() < 1e-12);
            assert!((sh.d2[0] + sh.d2[2]).abs() < 1e-11);
        }
    }

    #[test]
    fn quadrature_weights_and_exactness() {
        let q = QuadratureRule::gauss4();
        let wsum: f64 = q.weights.iter().sum();
        assert_relative_eq!(wsum, 1.0, max_relative = 1e-15);
        // exact through degree 7: ∫₀¹ x^k dx = 1/(k+1)
        for k in 0..=7u32 {
            let got: f64 = q
                .points
                .iter()
                .zip(&q.weights)
                .map(|(&x, &w)| w * x.powi(k as i32))
                .sum();
            assert_relative_eq!(got, 1.0 / (k as f64 + 1.0), max_relative = 1e-13);
        }
    }

    #[test]
    fn zero_field_evaluates_to_zero() {
        let f = HermiteField::zeros(Mesh::unit(5));
        for s in [0.0, 0.3, 0.77, 1.0] {
            let e = f.eval(s).unwrap();
            assert_eq!((e.u, e.du, e.d2u), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn quadratic_is_reproduced_exactly() {
        // cubics reproduce s(1-s) on any mesh
        let mesh = Mesh::new(7, 0.0, 1.0);
        let f = HermiteField::interpolate(mesh, |s| (s * (1.0 - s), 1.0 - 2.0 * s));
        for i in 0..=40 {
            let s = i as f64 / 40.0;
            let e = f.eval(s).unwrap();
            assert!((e.u - s * (1.0 - s)).abs() < 1e-14);
            assert!((e.du - (1.0 - 2.0 * s)).abs() < 1e-13);
            assert!((e.d2u + 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cubic_second_derivative_matches_analytic() {
        let mesh = Mesh::new(4, 0.0, 1.0);
        let f = HermiteField::interpolate(mesh, |s| (s * s * s, 3.0 * s * s));
        assert!((f.eval(0.5).unwrap().d2u - 3.0).abs() < 1e-12);
    }

    #[test]
    fn global_cubic_reproduction() {
        let mesh = Mesh::new(9, 0.0, 1.0);
        let u = |s: f64| 2.0 * s * s * s - s * s + 0.5 * s - 1.0;
        let du = |s: f64| 6.0 * s * s - 2.0 * s + 0.5;
        let d2u = |s: f64| 12.0 * s - 2.0;
        let f = HermiteField::interpolate(mesh, |s| (u(s), du(s)));
        for i in 0..=50 {
            let s = i as f64 / 50.0;
            let e = f.eval(s).unwrap();
            assert!((e.u - u(s)).abs() <= 1e-12);
            assert!((e.du - du(s)).abs() <= 1e-12);
            assert!((e.d2u - d2u(s)).abs() <= 1e-10);
        }
        for e in 0..9 {
            assert_relative_eq!(f.third_derivative(e), 12.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn interpolation_is_fourth_order() {
        // max nodal-midpoint error for sin(pi s) should shrink ~16x per
        // mesh doubling
        let err = |n: usize| -> f64 {
            let mesh = Mesh::unit(n);
            let pi = std::f64::consts::PI;
            let f = HermiteField::interpolate(mesh, |s| ((pi * s).sin(), pi * (pi * s).cos()));
            let mut worst = 0.0f64;
            for i in 0..=(8 * n) {
                let s = i as f64 / (8 * n) as f64;
                worst = worst.max((f.eval(s).unwrap().u - (pi * s).sin()).abs());
            }
            worst
        };
        let (e1, e2) = (err(8), err(16));
        let ratio = e1 / e2;
        assert!((14.0..=18.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn out_of_domain_is_an_error() {
        let f = HermiteField::zeros(Mesh::unit(4));
        assert!(matches!(f.eval(1.5), Err(MeshError::OutOfDomain { .. })));
        assert!(matches!(f.eval(-0.1), Err(MeshError::OutOfDomain { .. })));
    }

    #[test]
    fn dof_length_is_checked() {
        let mesh = Mesh::unit(4);
        assert!(HermiteField::from_dofs(mesh, vec![0.0; 9]).is_err());
        assert!(HermiteField::from_dofs(mesh, vec![0.0; 10]).is_ok());
    }

    #[test]
    fn locate_handles_node_points() {
        let mesh = Mesh::unit(4);
        let (e, xi) = mesh.locate(0.5).unwrap();
        assert_eq!(e, 2);
        assert_eq!(xi, 0.0);
        let (e, xi) = mesh.locate(1.0).unwrap();
        assert_eq!(e, 3);
        assert_eq!(xi, 1.0);
    }
}
