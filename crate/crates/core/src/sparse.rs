//! Compressed sparse row matrices and Jacobi-preconditioned Krylov solvers.
//!
//! Assembly and solves are strictly sequential with a fixed reduction order,
//! so repeated runs produce bit-identical results. Solvers take the operator
//! as a closure; the rank-one corrected Neumann operator reuses them without
//! materializing the correction.

use crate::error::{Error, Result};
use crate::tol;

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl CsrMatrix {
    /// Builds an `n` by `n` matrix from unordered triplets, summing duplicates.
    /// Triplets are bucketed by row and sorted by column, so the result does
    /// not depend on input order beyond floating point addition order within
    /// one entry, which is fixed by the stable sort.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n + 1];
        for &(i, _, _) in triplets {
            counts[i + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut slot = counts.clone();
        let mut entries = vec![(0usize, 0.0f64); triplets.len()];
        for &(i, j, v) in triplets {
            entries[slot[i]] = (j, v);
            slot[i] += 1;
        }
        let mut row_ptr = vec![0usize; n + 1];
        let mut col = Vec::with_capacity(triplets.len());
        let mut val = Vec::with_capacity(triplets.len());
        for i in 0..n {
            let row = &mut entries[counts[i]..counts[i + 1]];
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let j = row[k].0;
                let mut s = 0.0;
                while k < row.len() && row[k].0 == j {
                    s += row[k].1;
                    k += 1;
                }
                col.push(j);
                val.push(s);
            }
            row_ptr[i + 1] = col.len();
        }
        CsrMatrix { n, row_ptr, col, val }
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.val[k] * x[self.col[k]];
            }
            y[i] = acc;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        match self.col[lo..hi].binary_search(&j) {
            Ok(k) => self.val[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                worst = worst.max((self.val[k] - self.get(self.col[k], i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                d[i][self.col[k]] = self.val[k];
            }
        }
        d
    }

    /// Zeroes row and column `i`, puts one on the diagonal, and moves the
    /// column's coupling into `rhs` so the constrained value `g` is honored.
    pub fn constrain(&mut self, constrained: &[bool], g: &[f64], rhs: &mut [f64]) {
        for i in 0..self.n {
            if constrained[i] {
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    self.val[k] = if self.col[k] == i { 1.0 } else { 0.0 };
                }
                rhs[i] = g[i];
            } else {
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    let j = self.col[k];
                    if constrained[j] {
                        rhs[i] -= self.val[k] * g[j];
                        self.val[k] = 0.0;
                    }
                }
            }
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct KrylovOutcome {
    pub iterations: usize,
    /// Final residual relative to the stopping scale.
    pub residual: f64,
}

fn stop_threshold(bnorm: f64, r0norm: f64, rtol: f64) -> f64 {
    if bnorm > 0.0 {
        rtol * bnorm
    } else {
        // Homogeneous system: drive the residual of the initial guess down
        // by the same relative factor.
        rtol * r0norm
    }
}

/// Conjugate gradients with Jacobi preconditioning for symmetric positive
/// definite operators.
pub fn cg(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    x0: Option<&[f64]>,
    rtol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, KrylovOutcome)> {
    let n = b.len();
    let inv_d: Vec<f64> = diag
        .iter()
        .map(|&d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut x = x0.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
    let mut r = vec![0.0; n];
    apply(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let bnorm = norm2(b);
    let tol_abs = stop_threshold(bnorm, norm2(&r), rtol);
    let scale = if bnorm > 0.0 { bnorm } else { norm2(&r).max(f64::MIN_POSITIVE) };
    if norm2(&r) <= tol_abs {
        let res = norm2(&r) / scale;
        return Ok((x, KrylovOutcome { iterations: 0, residual: res }));
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_d).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::SolverStall {
                solver: "cg",
                iterations: it,
                residual: norm2(&r) / scale,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rnorm = norm2(&r);
        if rnorm <= tol_abs {
            return Ok((x, KrylovOutcome { iterations: it, residual: rnorm / scale }));
        }
        for i in 0..n {
            z[i] = r[i] * inv_d[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolverStall {
        solver: "cg",
        iterations: max_iter,
        residual: norm2(&r) / scale,
    })
}

/// BiCGStab with Jacobi preconditioning for nonsymmetric operators.
pub fn bicgstab(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    x0: Option<&[f64]>,
    rtol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, KrylovOutcome)> {
    let n = b.len();
    let inv_d: Vec<f64> = diag
        .iter()
        .map(|&d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut x = x0.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
    let mut r = vec![0.0; n];
    apply(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let bnorm = norm2(b);
    let tol_abs = stop_threshold(bnorm, norm2(&r), rtol);
    let scale = if bnorm > 0.0 { bnorm } else { norm2(&r).max(f64::MIN_POSITIVE) };
    let r_hat = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let (mut phat, mut shat, mut t) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    if norm2(&r) <= tol_abs {
        let res = norm2(&r) / scale;
        return Ok((x, KrylovOutcome { iterations: 0, residual: res }));
    }
    for it in 1..=max_iter {
        let rho_next = dot(&r_hat, &r);
        if rho_next.abs() < f64::MIN_POSITIVE || !rho_next.is_finite() {
            return Err(Error::SolverStall {
                solver: "bicgstab",
                iterations: it,
                residual: norm2(&r) / scale,
            });
        }
        let beta = (rho_next / rho) * (alpha / omega);
        rho = rho_next;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        for i in 0..n {
            phat[i] = p[i] * inv_d[i];
        }
        apply(&phat, &mut v);
        alpha = rho / dot(&r_hat, &v);
        if !alpha.is_finite() {
            return Err(Error::SolverStall {
                solver: "bicgstab",
                iterations: it,
                residual: norm2(&r) / scale,
            });
        }
        let s: Vec<f64> = (0..n).map(|i| r[i] - alpha * v[i]).collect();
        if norm2(&s) <= tol_abs {
            for i in 0..n {
                x[i] += alpha * phat[i];
            }
            return Ok((x, KrylovOutcome { iterations: it, residual: norm2(&s) / scale }));
        }
        for i in 0..n {
            shat[i] = s[i] * inv_d[i];
        }
        apply(&shat, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        if omega == 0.0 || !omega.is_finite() {
            return Err(Error::SolverStall {
                solver: "bicgstab",
                iterations: it,
                residual: norm2(&s) / scale,
            });
        }
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        let rnorm = norm2(&r);
        if rnorm <= tol_abs {
            return Ok((x, KrylovOutcome { iterations: it, residual: rnorm / scale }));
        }
    }
    Err(Error::SolverStall {
        solver: "bicgstab",
        iterations: max_iter,
        residual: norm2(&r) / scale,
    })
}

/// Solves `m x = b` with CG using the matrix's own diagonal.
pub fn solve_spd(m: &CsrMatrix, b: &[f64], x0: Option<&[f64]>) -> Result<(Vec<f64>, KrylovOutcome)> {
    cg(
        |x, y| m.matvec_into(x, y),
        &m.diag(),
        b,
        x0,
        tol::KRYLOV_RTOL,
        tol::krylov_max_iter(m.n),
    )
}

/// Solves `m x = b` with BiCGStab using the matrix's own diagonal.
pub fn solve_general(
    m: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
) -> Result<(Vec<f64>, KrylovOutcome)> {
    bicgstab(
        |x, y| m.matvec_into(x, y),
        &m.diag(),
        b,
        x0,
        tol::KRYLOV_RTOL,
        tol::krylov_max_iter(m.n),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(seed: u64) -> impl FnMut() -> f64 {
        let mut s = seed;
        move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        }
    }

    /// Gaussian elimination with partial pivoting, the dense oracle.
    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
        let mut rhs = b.to_vec();
        for k in 0..n {
            let piv = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
            m.swap(k, piv);
            rhs.swap(k, piv);
            for i in k + 1..n {
                let f = m[i][k] / m[k][k];
                for j in k..n {
                    m[i][j] -= f * m[k][j];
                }
                rhs[i] -= f * rhs[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = rhs[i];
            for j in i + 1..n {
                s -= m[i][j] * x[j];
            }
            x[i] = s / m[i][i];
        }
        x
    }

    fn random_spd(n: usize, seed: u64) -> CsrMatrix {
        let mut r = lcg(seed);
        let mut trip = Vec::new();
        for i in 0..n {
            for j in i + 1..n.min(i + 4) {
                let v = r();
                trip.push((i, j, v));
                trip.push((j, i, v));
            }
            trip.push((i, i, 6.0 + r().abs()));
        }
        CsrMatrix::from_triplets(n, &trip)
    }

    #[test]
    fn triplets_merge_duplicates_in_sorted_rows() {
        let m = CsrMatrix::from_triplets(3, &[(0, 2, 1.0), (0, 0, 2.0), (0, 2, 0.5), (2, 1, -1.0)]);
        assert_eq!(m.get(0, 2), 1.5);
        assert_eq!(m.get(0, 0), 2.0);
        assert_eq!(m.get(2, 1), -1.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert!(m.col[m.row_ptr[0]..m.row_ptr[1]].windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn cg_matches_dense_oracle() {
        let m = random_spd(40, 1);
        let mut r = lcg(2);
        let b: Vec<f64> = (0..40).map(|_| r()).collect();
        let (x, out) = solve_spd(&m, &b, None).unwrap();
        let oracle = dense_solve(&m.to_dense(), &b);
        for (xi, oi) in x.iter().zip(&oracle) {
            assert!((xi - oi).abs() < 1e-8, "cg {xi} vs dense {oi}");
        }
        assert!(out.residual <= tol::KRYLOV_RTOL);
    }

    #[test]
    fn bicgstab_matches_dense_oracle_on_nonsymmetric_system() {
        let mut r = lcg(3);
        let n = 35;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 8.0 + r().abs()));
            if i + 1 < n {
                trip.push((i, i + 1, r()));
                trip.push((i + 1, i, 2.0 * r()));
            }
        }
        let m = CsrMatrix::from_triplets(n, &trip);
        let b: Vec<f64> = (0..n).map(|_| r()).collect();
        let (x, _) = solve_general(&m, &b, None).unwrap();
        let oracle = dense_solve(&m.to_dense(), &b);
        for (xi, oi) in x.iter().zip(&oracle) {
            assert!((xi - oi).abs() < 1e-7, "bicgstab {xi} vs dense {oi}");
        }
    }

    #[test]
    fn zero_rhs_returns_zero_from_zero_guess() {
        let m = random_spd(10, 4);
        let (x, out) = solve_spd(&m, &vec![0.0; 10], None).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn zero_rhs_with_random_guess_converges_to_zero() {
        let m = random_spd(25, 5);
        let mut r = lcg(6);
        let x0: Vec<f64> = (0..25).map(|_| r()).collect();
        let (x, _) = solve_spd(&m, &vec![0.0; 25], Some(&x0)).unwrap();
        let size = norm2(&x) / norm2(&x0);
        assert!(size < 1e-9, "relative leftover {size}");
    }

    #[test]
    fn iteration_cap_produces_stall_error() {
        let m = random_spd(30, 7);
        let b = vec![1.0; 30];
        let err = cg(|x, y| m.matvec_into(x, y), &m.diag(), &b, None, 1e-30, 2).unwrap_err();
        assert!(matches!(err, Error::SolverStall { solver: "cg", .. }));
    }

    #[test]
    fn constrain_pins_values_and_keeps_symmetry() {
        let m0 = random_spd(12, 8);
        let mut m = m0.clone();
        let mut rhs = vec![1.0; 12];
        let mut mask = vec![false; 12];
        mask[0] = true;
        mask[5] = true;
        let mut g = vec![0.0; 12];
        g[0] = 2.0;
        g[5] = -1.0;
        m.constrain(&mask, &g, &mut rhs);
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(rhs[0], 2.0);
        assert_eq!(m.get(3, 5), 0.0);
        assert!(m.max_abs_asymmetry() < 1e-15, "elimination must keep symmetry");
        let (x, _) = solve_spd(&m, &rhs, None).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-9 && (x[5] + 1.0).abs() < 1e-9);
    }
}
