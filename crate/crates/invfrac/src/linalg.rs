//! Banded linear algebra kernels.
//!
//! Cubic Hermite elements couple a node only to its two neighbours, so
//! every operator assembled in this crate is banded with half bandwidth 3.
//! Traces factor thousands of tangent systems, which makes dense
//! factorizations wasteful; the kernels here keep everything O(n):
//!
//! * [`BandMatrix`] — LAPACK-style column-major band storage with spare
//!   rows for pivoting fill,
//! * [`BandLu`] — banded LU with partial pivoting, for Newton steps and
//!   inverse iteration,
//! * [`BandMatrix::count_eigs_below`] — unpivoted LDLᵀ sweep counting
//!   pivot signs (Sylvester inertia), driving the bisection used for
//!   eigenvalue counts and spectral extremes,
//! * [`BandMatrix::inverse_iteration`] — shifted inverse iteration for a
//!   single eigenpair near a target.
//!
//! Dense eigendecompositions (full spectra for reports) go through
//! `nalgebra` instead; see the `stability` module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("singular matrix: no usable pivot in column {column}")]
    Singular { column: usize },
    #[error("dimension mismatch: matrix is {n}x{n} but vector has length {len}")]
    DimensionMismatch { n: usize, len: usize },
    #[error("inverse iteration did not converge within {iters} iterations")]
    IterationLimit { iters: usize },
}

/// Symmetric-or-not square band matrix, `kl` subdiagonals and `ku`
/// superdiagonals, stored column-major with `kl` extra rows so LU
/// pivoting can fill in place (leading dimension `2*kl + ku + 1`).
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        assert!(n > 0, "empty matrix");
        let ldab = 2 * kl + ku + 1;
        BandMatrix { n, kl, ku, ldab, data: vec![0.0; ldab * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kl(&self) -> usize {
        self.kl
    }

    pub fn ku(&self) -> usize {
        self.ku
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(self.in_band(i, j));
        j * self.ldab + (self.kl + self.ku + i) - j
    }

    #[inline]
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i + self.ku >= j && j + self.kl >= i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.idx(i, j)]
        } else {
            0.0
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// Zero out row `i` and column `i` (within the band) and put `diag` on
    /// the diagonal. Used to pin constrained dofs in tangent systems.
    pub fn pin_dof(&mut self, i: usize, diag: f64) {
        let lo = i.saturating_sub(self.ku.max(self.kl));
        let hi = (i + self.ku.max(self.kl)).min(self.n - 1);
        for j in lo..=hi {
            if self.in_band(i, j) {
                self.set(i, j, 0.0);
            }
            if self.in_band(j, i) {
                self.set(j, i, 0.0);
            }
        }
        self.set(i, i, diag);
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for i in lo..=hi {
                y[i] += self.data[self.idx(i, j)] * xj;
            }
        }
        y
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for i in lo..=hi {
                m[(i, j)] = self.data[self.idx(i, j)];
            }
        }
        m
    }

    /// Largest absolute entry; a cheap scale for tolerances.
    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for i in lo..=hi {
                m = m.max(self.data[self.idx(i, j)].abs());
            }
        }
        m
    }

    /// LU factorization with partial pivoting (row interchanges stay
    /// within the band thanks to the spare `kl` storage rows).
    pub fn lu(&self) -> Result<BandLu, LinalgError> {
        let n = self.n;
        let kl = self.kl;
        let ku = self.ku;
        let ldab = self.ldab;
        let kv = kl + ku; // superdiagonals in the factored form
        let mut a = self.data.clone();
        let mut ipiv = vec![0usize; n];

        let at = |a: &Vec<f64>, i: usize, j: usize| a[j * ldab + kv + i - j];
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            // pivot search in column j, rows j..=j+km
            let mut p = 0usize;
            let mut pmax = at(&a, j, j).abs();
            for q in 1..=km {
                let v = at(&a, j + q, j).abs();
                if v > pmax {
                    pmax = v;
                    p = q;
                }
            }
            ipiv[j] = j + p;
            if pmax <= f64::MIN_POSITIVE || !pmax.is_finite() {
                return Err(LinalgError::Singular { column: j });
            }
            let ju = (j + kv).min(n - 1);
            if p > 0 {
                for c in j..=ju {
                    let i1 = c * ldab + kv + j - c;
                    let i2 = c * ldab + kv + (j + p) - c;
                    a.swap(i1, i2);
                }
            }
            let piv = at(&a, j, j);
            for q in 1..=km {
                let k = j * ldab + kv + (j + q) - j;
                a[k] /= piv;
            }
            for c in (j + 1)..=ju {
                let ujc = at(&a, j, c);
                if ujc != 0.0 {
                    for q in 1..=km {
                        let k = c * ldab + kv + (j + q) - c;
                        a[k] -= at(&a, j + q, j) * ujc;
                    }
                }
            }
        }
        Ok(BandLu { n, kl, ku, ldab, data: a, ipiv })
    }

    /// Number of eigenvalues strictly below `sigma`, by counting negative
    /// pivots of the unpivoted LDLᵀ factorization of `A - sigma*I`
    /// (Sylvester's law of inertia). Assumes the matrix is symmetric; only
    /// the lower triangle is read. Pivots smaller in magnitude than a tiny
    /// nudge are treated as negative, the usual bisection-safe convention.
    pub fn count_eigs_below(&self, sigma: f64) -> usize {
        let n = self.n;
        let bw = self.kl;
        debug_assert_eq!(self.kl, self.ku, "inertia counting expects symmetric storage");
        let pivmin = f64::MIN_POSITIVE * (1.0 + self.max_abs());
        // l[q][j] holds L(j+q+1, j) for q in 0..bw (sliding window)
        let mut l = vec![vec![0.0f64; n]; bw];
        let mut d = vec![0.0f64; n];
        let mut count = 0usize;
        for j in 0..n {
            let lo = j.saturating_sub(bw);
            let mut dj = self.get(j, j) - sigma;
            for k in lo..j {
                let ljk = l[j - k - 1][k];
                dj -= ljk * ljk * d[k];
            }
            if dj.abs() < pivmin {
                dj = -pivmin;
            }
            if dj < 0.0 {
                count += 1;
            }
            d[j] = dj;
            let hi = (j + bw).min(n - 1);
            for i in (j + 1)..=hi {
                let mut v = self.get(i, j);
                let klo = i.saturating_sub(bw);
                for k in klo..j {
                    v -= l[i - k - 1][k] * l[j - k - 1][k] * d[k];
                }
                l[i - j - 1][j] = v / dj;
            }
        }
        count
    }

    /// Smallest and largest eigenvalue of a symmetric band matrix by
    /// Sturm-count bisection inside the Gershgorin interval.
    pub fn extreme_eigenvalues(&self) -> (f64, f64) {
        let (mut glo, mut ghi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..self.n {
            let mut r = 0.0;
            let lo = i.saturating_sub(self.ku);
            let hi = (i + self.kl).min(self.n - 1);
            for j in lo..=hi {
                if j != i {
                    r += self.get(i, j).abs();
                }
            }
            let d = self.get(i, i);
            glo = glo.min(d - r);
            ghi = ghi.max(d + r);
        }
        let span = (ghi - glo).max(1e-300);
        let lmin = self.bisect_eig(glo - 1e-3 * span, ghi + 1e-3 * span, 1);
        let lmax = self.bisect_eig(glo - 1e-3 * span, ghi + 1e-3 * span, self.n);
        (lmin, lmax)
    }

    /// Smallest sigma with `count_eigs_below(sigma) >= want`, to near
    /// round-off; this is the `want`-th smallest eigenvalue.
    fn bisect_eig(&self, mut lo: f64, mut hi: f64, want: usize) -> f64 {
        for _ in 0..110 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_eigs_below(mid) >= want {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// One eigenpair of a symmetric band matrix near `sigma`, by inverse
    /// iteration with a banded LU of `A - sigma*I`. Returns the Rayleigh
    /// quotient and the normalized vector.
    pub fn inverse_iteration(
        &self,
        sigma: f64,
        max_iter: usize,
        tol: f64,
    ) -> Result<(f64, Vec<f64>), LinalgError> {
        let scale = self.max_abs().max(1.0);
        let mut shift = sigma;
        let lu = loop {
            let mut shifted = self.clone();
            for i in 0..self.n {
                shifted.add(i, i, -shift);
            }
            match shifted.lu() {
                Ok(f) => break f,
                Err(_) => {
                    // sigma hit an eigenvalue to round-off; nudge and refactor
                    shift += 1e-11 * scale;
                }
            }
        };
        // deterministic start vector with all band frequencies present
        let mut x: Vec<f64> = (0..self.n)
            .map(|i| (0.7 + (i as f64) * 0.37).sin() + 0.01)
            .collect();
        normalize(&mut x);
        for _ in 0..max_iter {
            let mut y = x.clone();
            lu.solve_in_place(&mut y)?;
            normalize(&mut y);
            let ay = self.matvec(&y);
            let rq = dot(&y, &ay);
            let mut res = 0.0f64;
            for i in 0..self.n {
                res = res.max((ay[i] - rq * y[i]).abs());
            }
            x = y;
            if res <= tol * scale {
                return Ok((rq, x));
            }
        }
        // Inverse iteration stagnates only when sigma sits between two
        // eigenvalues at comparable distance; the Rayleigh quotient is
        // still the best available estimate, so report failure with it.
        Err(LinalgError::IterationLimit { iters: max_iter })
    }
}

/// Banded LU factors with partial pivoting.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    data: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<(), LinalgError> {
        let n = self.n;
        if b.len() != n {
            return Err(LinalgError::DimensionMismatch { n, len: b.len() });
        }
        let kv = self.kl + self.ku;
        let at = |i: usize, j: usize| self.data[j * self.ldab + kv + i - j];
        // forward: apply P and L
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = self.kl.min(n - 1 - j);
            let bj = b[j];
            if bj != 0.0 {
                for q in 1..=km {
                    b[j + q] -= at(j + q, j) * bj;
                }
            }
        }
        // backward: U x = y, U has bandwidth kv
        for j in (0..n).rev() {
            b[j] /= at(j, j);
            let bj = b[j];
            if bj != 0.0 {
                let lo = j.saturating_sub(kv);
                for i in lo..j {
                    b[i] -= at(i, j) * bj;
                }
            }
        }
        Ok(())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn normalize(v: &mut [f64]) {
    let n = norm2(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_band(n: usize, kl: usize, ku: usize, rng: &mut impl Rng, symmetric: bool) -> BandMatrix {
        let mut m = BandMatrix::new(n, kl, ku);
        for j in 0..n {
            for i in j.saturating_sub(ku)..=(j + kl).min(n - 1) {
                if symmetric && i < j {
                    continue;
                }
                let v: f64 = rng.gen_range(-1.0..1.0);
                m.set(i, j, v);
                if symmetric && m.in_band(j, i) {
                    m.set(j, i, v);
                }
            }
        }
        m
    }

    #[test]
    fn gets_and_sets_respect_band() {
        let mut m = BandMatrix::new(5, 1, 2);
        m.set(0, 2, 7.0);
        m.set(3, 2, -1.5);
        assert_eq!(m.get(0, 2), 7.0);
        assert_eq!(m.get(3, 2), -1.5);
        assert_eq!(m.get(4, 0), 0.0); // outside band
        assert!(!m.in_band(0, 3));
    }

    #[test]
    fn matvec_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_band(17, 3, 3, &mut rng, false);
        let x: Vec<f64> = (0..17).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = m.matvec(&x);
        let yd = m.to_dense() * nalgebra::DVector::from_column_slice(&x);
        for i in 0..17 {
            assert!((y[i] - yd[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn banded_lu_solves_against_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [1usize, 2, 5, 23, 64] {
            let kl = 3.min(n - 1);
            let ku = 3.min(n - 1);
            let mut m = random_band(n, kl, ku, &mut rng, false);
            for i in 0..n {
                m.add(i, i, 5.0); // keep it comfortably nonsingular
            }
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = m.lu().unwrap().solve(&b).unwrap();
            let xd = m
                .to_dense()
                .lu()
                .solve(&nalgebra::DVector::from_column_slice(&b))
                .unwrap();
            for i in 0..n {
                assert!((x[i] - xd[i]).abs() < 1e-11, "n={n} i={i}");
            }
        }
    }

    #[test]
    fn lu_pivots_where_unpivoted_would_die() {
        // leading diagonal entry zero: partial pivoting must swap
        let mut m = BandMatrix::new(3, 1, 1);
        m.set(0, 0, 0.0);
        m.set(0, 1, 1.0);
        m.set(1, 0, 2.0);
        m.set(1, 1, 1.0);
        m.set(1, 2, 1.0);
        m.set(2, 1, 4.0);
        m.set(2, 2, 1.0);
        let b = vec![1.0, 2.0, 3.0];
        let x = m.lu().unwrap().solve(&b).unwrap();
        let r = m.matvec(&x);
        for i in 0..3 {
            assert!((r[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut m = BandMatrix::new(2, 1, 1);
        m.set(0, 0, 1.0);
        m.set(0, 1, 2.0);
        m.set(1, 0, 0.5);
        m.set(1, 1, 1.0); // row 1 = 0.5 * row 0
        match m.lu() {
            Err(LinalgError::Singular { column }) => assert_eq!(column, 1),
            other => panic!("expected singular, got {other:?}"),
        }
    }

    #[test]
    fn inertia_counts_match_dense_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [4usize, 11, 40] {
            let bw = 3.min(n - 1);
            let m = random_band(n, bw, bw, &mut rng, true);
            let eigs = m.to_dense().symmetric_eigen().eigenvalues;
            let mut sorted: Vec<f64> = eigs.iter().copied().collect();
            sorted.sort_by(f64::total_cmp);
            for sigma in [-2.0, -0.5, 0.0, 0.3, 1.7] {
                let want = sorted.iter().filter(|&&e| e < sigma).count();
                assert_eq!(m.count_eigs_below(sigma), want, "n={n} sigma={sigma}");
            }
        }
    }

    #[test]
    fn extreme_eigenvalues_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_band(30, 2, 2, &mut rng, true);
        let eigs = m.to_dense().symmetric_eigen().eigenvalues;
        let lo = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (bl, bh) = m.extreme_eigenvalues();
        assert!((bl - lo).abs() < 1e-9 * (1.0 + lo.abs()));
        assert!((bh - hi).abs() < 1e-9 * (1.0 + hi.abs()));
    }

    #[test]
    fn inverse_iteration_finds_near_singular_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_band(25, 3, 3, &mut rng, true);
        let eigs = m.to_dense().symmetric_eigen().eigenvalues;
        let mut sorted: Vec<f64> = eigs.iter().copied().collect();
        sorted.sort_by(f64::total_cmp);
        let target = sorted[7];
        let (rq, v) = m
            .inverse_iteration(target + 1e-7, 200, 1e-12)
            .expect("inverse iteration");
        assert!((rq - target).abs() < 1e-8 * (1.0 + target.abs()));
        let av = m.matvec(&v);
        for i in 0..25 {
            assert!((av[i] - rq * v[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn pin_dof_clears_row_and_column() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut m = random_band(9, 3, 3, &mut rng, true);
        m.pin_dof(4, 1.0);
        for j in 0..9 {
            let want = if j == 4 { 1.0 } else { 0.0 };
            assert_eq!(m.get(4, j), if j == 4 { want } else { 0.0 });
            assert_eq!(m.get(j, 4), if j == 4 { want } else { 0.0 });
        }
    }
}
