//! The implicit Airy system `(I + dt D+^2 D-) u = w`.
//!
//! Row `j` of the matrix carries the stencil
//! `-mu3 u_{j-1} + (1 + 3 mu3) u_j - 3 mu3 u_{j+1} + mu3 u_{j+2}` with
//! `mu3 = dt / dx^3`. On the truncated line the band is cut at the window
//! edges. In periodic mode the four entries that wrap around the corners form a
//! rank-3 update of the truncated band, which is handled with the
//! Sherman-Morrison-Woodbury formula so that every solve stays O(n).

use crate::error::{KdvError, Result};
use crate::grid_ops::Boundary;

/// Band offsets relative to the diagonal.
pub const BAND_OFFSETS: [isize; 4] = [-1, 0, 1, 2];

/// `I + dt D+^2 D-` in banded form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandedOperator {
    n: usize,
    mu3: f64,
    boundary: Boundary,
}

impl BandedOperator {
    pub fn assemble(dx: f64, dt: f64, n: usize, boundary: Boundary) -> Result<Self> {
        if !(dx.is_finite() && dx > 0.0) {
            return Err(KdvError::InvalidSpacing(dx));
        }
        if !(dt.is_finite() && dt >= 0.0) {
            return Err(KdvError::InvalidTimeStep(dt));
        }
        if n < 4 {
            return Err(KdvError::DimensionTooSmall(n));
        }
        Ok(Self {
            n,
            mu3: dt / (dx * dx * dx),
            boundary,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `dt / dx^3`.
    pub fn mu3(&self) -> f64 {
        self.mu3
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Coefficients for [`BAND_OFFSETS`], in the same order.
    pub fn band_coefficients(&self) -> [f64; 4] {
        let m = self.mu3;
        [-m, 1.0 + 3.0 * m, -3.0 * m, m]
    }

    /// Dense matrix entry, including periodic wrap entries.
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        let coeffs = self.band_coefficients();
        BAND_OFFSETS
            .iter()
            .zip(coeffs)
            .filter(|(&o, _)| self.column(row, o) == Some(col))
            .map(|(_, c)| c)
            .sum()
    }

    fn column(&self, row: usize, offset: isize) -> Option<usize> {
        let c = row as isize + offset;
        let n = self.n as isize;
        match self.boundary {
            Boundary::TruncatedLine => (0..n).contains(&c).then_some(c as usize),
            Boundary::Periodic => Some(c.rem_euclid(n) as usize),
        }
    }

    /// Entries that fall outside the band and wrap around the corners, as
    /// `(row, col, value)`. Empty on the truncated line.
    pub fn wrap_entries(&self) -> Vec<(usize, usize, f64)> {
        if self.boundary == Boundary::TruncatedLine {
            return Vec::new();
        }
        let n = self.n as isize;
        let coeffs = self.band_coefficients();
        let mut out = Vec::new();
        for row in 0..self.n {
            for (&o, &c) in BAND_OFFSETS.iter().zip(&coeffs) {
                let col = row as isize + o;
                if !(0..n).contains(&col) {
                    out.push((row, col.rem_euclid(n) as usize, c));
                }
            }
        }
        out
    }

    /// Matrix-vector product `M v`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n {
            return Err(KdvError::LengthMismatch {
                expected: self.n,
                actual: v.len(),
            });
        }
        let coeffs = self.band_coefficients();
        Ok((0..self.n)
            .map(|row| {
                BAND_OFFSETS
                    .iter()
                    .zip(&coeffs)
                    .filter_map(|(&o, &c)| self.column(row, o).map(|col| c * v[col]))
                    .sum()
            })
            .collect())
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|r| (0..self.n).map(|c| self.entry(r, c)).collect())
            .collect()
    }
}

/// Pivoted LU factors of the truncated band (lower bandwidth 1, upper bandwidth 3 after fill).
#[derive(Debug, Clone)]
struct BandLu {
    /// Row `k` of U, columns `k..k+4`.
    upper: Vec<[f64; 4]>,
    /// Multiplier eliminating column `k` from row `k + 1`.
    lower: Vec<f64>,
    /// Whether rows `k` and `k + 1` were exchanged at step `k`.
    swapped: Vec<bool>,
    /// `1 / upper[k][0]`.
    inv_pivot: Vec<f64>,
}

impl BandLu {
    fn factor(op: &BandedOperator) -> Result<Self> {
        let n = op.n;
        let [sub, diag, sup1, sup2] = op.band_coefficients();
        let tol = f64::EPSILON * (1.0 + 8.0 * op.mu3);
        // Row j of the truncated band restricted to columns (j-1)..(j+3).
        let row_from = |j: usize| -> [f64; 4] {
            let mut r = [sub, diag, sup1, sup2];
            for (m, v) in r.iter_mut().enumerate() {
                if j + m > n {
                    *v = 0.0;
                }
            }
            r
        };

        let mut upper = Vec::with_capacity(n);
        let mut lower = Vec::with_capacity(n.saturating_sub(1));
        let mut swapped = Vec::with_capacity(n.saturating_sub(1));

        // Row 0 has no sub-diagonal entry.
        let first = row_from(0);
        let mut cur = [first[1], first[2], first[3], 0.0];
        for k in 0..n {
            if k + 1 == n {
                if cur[0].abs() <= tol {
                    return Err(KdvError::SingularPivot { row: k });
                }
                upper.push([cur[0], 0.0, 0.0, 0.0]);
                break;
            }
            let mut next = row_from(k + 1);
            let swap = next[0].abs() > cur[0].abs();
            if swap {
                std::mem::swap(&mut cur, &mut next);
            }
            let pivot = cur[0];
            if pivot.abs() <= tol {
                return Err(KdvError::SingularPivot { row: k });
            }
            let l = next[0] / pivot;
            for m in 1..4 {
                next[m] -= l * cur[m];
            }
            upper.push(cur);
            lower.push(l);
            swapped.push(swap);
            cur = [next[1], next[2], next[3], 0.0];
        }
        let inv_pivot = upper.iter().map(|r| 1.0 / r[0]).collect();
        Ok(Self {
            upper,
            lower,
            swapped,
            inv_pivot,
        })
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        let n = b.len();
        let mut carry = b[0];
        for k in 0..n - 1 {
            // carry holds the current (possibly exchanged) row k
            let mut below = b[k + 1];
            if self.swapped[k] {
                std::mem::swap(&mut carry, &mut below);
            }
            b[k] = carry;
            carry = below - self.lower[k] * carry;
        }
        b[n - 1] = carry;

        // the last three rows have fewer than three entries right of the pivot
        let tail = n.saturating_sub(3);
        for k in (tail..n).rev() {
            let u = &self.upper[k];
            let mut s = b[k];
            for m in 1..n - k {
                s -= u[m] * b[k + m];
            }
            b[k] = s * self.inv_pivot[k];
        }
        let (mut x1, mut x2, mut x3) = (
            b.get(tail).copied().unwrap_or(0.0),
            b.get(tail + 1).copied().unwrap_or(0.0),
            b.get(tail + 2).copied().unwrap_or(0.0),
        );
        for k in (0..tail).rev() {
            let u = &self.upper[k];
            let x0 = (b[k] - u[1] * x1 - u[2] * x2 - u[3] * x3) * self.inv_pivot[k];
            b[k] = x0;
            (x1, x2, x3) = (x0, x1, x2);
        }
    }
}

/// Woodbury data for the periodic corners: `M = A + sum_a e_{r_a} v_a^T`.
#[derive(Debug, Clone)]
struct WrapCorrection {
    /// Sparse rows `v_a` as `(col, value)` pairs.
    rows: Vec<Vec<(usize, f64)>>,
    /// `z_a = A^{-1} e_{r_a}`.
    z: Vec<Vec<f64>>,
    /// LU of the capacitance matrix `I + V^T A^{-1} U`, with row permutation.
    cap_lu: [[f64; 3]; 3],
    cap_perm: [usize; 3],
    rank: usize,
}

impl WrapCorrection {
    fn build(op: &BandedOperator, band: &BandLu) -> Result<Self> {
        let n = op.n;
        let mut row_ids: Vec<usize> = Vec::new();
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
        for (r, c, v) in op.wrap_entries() {
            match row_ids.iter().position(|&x| x == r) {
                Some(i) => rows[i].push((c, v)),
                None => {
                    row_ids.push(r);
                    rows.push(vec![(c, v)]);
                }
            }
        }
        let rank = rows.len();
        debug_assert!(rank <= 3);
        let z: Vec<Vec<f64>> = row_ids
            .iter()
            .map(|&r| {
                let mut e = vec![0.0; n];
                e[r] = 1.0;
                band.solve_in_place(&mut e);
                e
            })
            .collect();

        let mut cap = [[0.0; 3]; 3];
        for (a, cap_row) in cap.iter_mut().enumerate() {
            cap_row[a] = 1.0;
            if a >= rank {
                continue;
            }
            for (b, zb) in z.iter().enumerate() {
                cap_row[b] += rows[a].iter().map(|&(c, v)| v * zb[c]).sum::<f64>();
            }
        }
        let (cap_lu, cap_perm) = lu3(cap)?;
        Ok(Self {
            rows,
            z,
            cap_lu,
            cap_perm,
            rank,
        })
    }

    fn correct(&self, y: &mut [f64]) {
        let mut s = [0.0; 3];
        for (a, row) in self.rows.iter().enumerate() {
            s[a] = row.iter().map(|&(c, v)| v * y[c]).sum();
        }
        let q = solve3(&self.cap_lu, &self.cap_perm, s);
        for (zb, qb) in self.z.iter().zip(q) {
            for (yi, zi) in y.iter_mut().zip(zb) {
                *yi -= qb * zi;
            }
        }
    }
}

fn lu3(mut a: [[f64; 3]; 3]) -> Result<([[f64; 3]; 3], [usize; 3])> {
    let mut perm = [0, 1, 2];
    for k in 0..3 {
        let p = (k..3)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap_or(k);
        if a[p][k].abs() <= f64::EPSILON {
            return Err(KdvError::SingularPivot { row: k });
        }
        a.swap(k, p);
        perm.swap(k, p);
        for i in k + 1..3 {
            let l = a[i][k] / a[k][k];
            a[i][k] = l;
            for j in k + 1..3 {
                a[i][j] -= l * a[k][j];
            }
        }
    }
    Ok((a, perm))
}

fn solve3(lu: &[[f64; 3]; 3], perm: &[usize; 3], b: [f64; 3]) -> [f64; 3] {
    let mut x = [b[perm[0]], b[perm[1]], b[perm[2]]];
    for i in 1..3 {
        for j in 0..i {
            x[i] -= lu[i][j] * x[j];
        }
    }
    for i in (0..3).rev() {
        for j in i + 1..3 {
            x[i] -= lu[i][j] * x[j];
        }
        x[i] /= lu[i][i];
    }
    x
}

/// Reusable factorization of a [`BandedOperator`].
///
/// Immutable once built; `solve` allocates its own output, so one factorization
/// can serve concurrent solves.
#[derive(Debug, Clone)]
pub struct Factorization {
    op: BandedOperator,
    band: BandLu,
    wrap: Option<WrapCorrection>,
}

pub fn factor(op: &BandedOperator) -> Result<Factorization> {
    let band = BandLu::factor(op)?;
    let wrap = match op.boundary {
        Boundary::Periodic => Some(WrapCorrection::build(op, &band)?),
        Boundary::TruncatedLine => None,
    };
    Ok(Factorization {
        op: *op,
        band,
        wrap,
    })
}

impl Factorization {
    pub fn operator(&self) -> &BandedOperator {
        &self.op
    }

    /// Rank of the periodic corner correction (0 on the truncated line).
    pub fn wrap_rank(&self) -> usize {
        self.wrap.as_ref().map_or(0, |w| w.rank)
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    /// Overwrites `b` with `M^{-1} b`.
    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<()> {
        if b.len() != self.op.n {
            return Err(KdvError::LengthMismatch {
                expected: self.op.n,
                actual: b.len(),
            });
        }
        match &self.wrap {
            None => self.band.solve_in_place(b),
            Some(w) => {
                let total: f64 = b.iter().sum();
                self.band.solve_in_place(b);
                w.correct(b);
                // Every column of the periodic operator sums to one, so the
                // constant vector is an eigenvector with eigenvalue 1 and the
                // exact solution keeps the sum of the right-hand side. Removing
                // the rounding error along that mode keeps the solve conservative.
                let shift = (b.iter().sum::<f64>() - total) / b.len() as f64;
                for v in b.iter_mut() {
                    *v -= shift;
                }
            }
        }
        Ok(())
    }
}

/// Convenience wrapper: factor and solve once.
pub fn solve(f: &Factorization, rhs: &[f64]) -> Result<Vec<f64>> {
    f.solve(rhs)
}


#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn random_op(rng: &mut ChaCha8Rng, n: usize, boundary: Boundary) -> BandedOperator {
        let dx: f64 = rng.gen_range(0.01..1.0);
        let dt = rng.gen_range(0.0..1.0) * dx.powf(1.5);
        BandedOperator::assemble(dx, dt, n, boundary).unwrap()
    }

    #[test]
    fn zero_step_is_identity() {
        for b in [Boundary::TruncatedLine, Boundary::Periodic] {
            let op = BandedOperator::assemble(0.1, 0.0, 10, b).unwrap();
            let d = op.to_dense();
            for (i, row) in d.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    assert_eq!(v, if i == j { 1.0 } else { 0.0 });
                }
            }
            let rhs: Vec<f64> = (0..10).map(|i| i as f64 - 3.5).collect();
            assert_eq!(factor(&op).unwrap().solve(&rhs).unwrap(), rhs);
        }
    }

    #[test]
    fn unit_stencil_coefficients() {
        let op = BandedOperator::assemble(1.0, 1.0, 6, Boundary::TruncatedLine).unwrap();
        assert_eq!(op.entry(2, 1), -1.0);
        assert_eq!(op.entry(2, 2), 4.0);
        assert_eq!(op.entry(2, 3), -3.0);
        assert_eq!(op.entry(2, 4), 1.0);
        assert_eq!(op.entry(2, 5), 0.0);
        assert_eq!(op.entry(5, 0), 0.0);
        assert!(op.wrap_entries().is_empty());
    }

    #[test]
    fn periodic_wrap_entries() {
        let op = BandedOperator::assemble(1.0, 1.0, 8, Boundary::Periodic).unwrap();
        let mut wraps = op.wrap_entries();
        wraps.sort_by_key(|w| (w.0, w.1));
        // Enumerated by index arithmetic: row + offset outside 0..8 wraps modulo 8.
        assert_eq!(
            wraps,
            vec![(0, 7, -1.0), (6, 0, 1.0), (7, 0, -3.0), (7, 1, 1.0)]
        );
        let rows: std::collections::BTreeSet<_> = wraps.iter().map(|w| w.0).collect();
        assert!(rows.len() <= 3);
        assert_eq!(factor(&op).unwrap().wrap_rank(), 3);
        assert_eq!(op.entry(7, 0), -3.0);
        assert_eq!(op.entry(7, 1), 1.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert_eq!(
            BandedOperator::assemble(1.0, 1.0, 3, Boundary::Periodic),
            Err(KdvError::DimensionTooSmall(3))
        );
        assert!(BandedOperator::assemble(1.0, -1.0, 8, Boundary::Periodic).is_err());
        let op = BandedOperator::assemble(1.0, 1.0, 8, Boundary::Periodic).unwrap();
        let f = factor(&op).unwrap();
        assert_eq!(
            f.solve(&[1.0; 7]),
            Err(KdvError::LengthMismatch { expected: 8, actual: 7 })
        );
    }

    #[test]
    fn small_systems_match_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for trial in 0..100 {
            let boundary = if trial % 2 == 0 { Boundary::TruncatedLine } else { Boundary::Periodic };
            let n = rng.gen_range(4..=64);
            let op = random_op(&mut rng, n, boundary);
            let rhs = random_vec(&mut rng, n);
            let x = factor(&op).unwrap().solve(&rhs).unwrap();
            let oracle = dense::solve(op.to_dense(), rhs.clone());
            for (a, b) in x.iter().zip(&oracle) {
                assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn eight_point_systems_match_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for boundary in [Boundary::TruncatedLine, Boundary::Periodic] {
            for _ in 0..10 {
                let op = BandedOperator::assemble(
                    rng.gen_range(0.05..2.0),
                    rng.gen_range(0.0..5.0),
                    8,
                    boundary,
                )
                .unwrap();
                let rhs = random_vec(&mut rng, 8);
                let x = factor(&op).unwrap().solve(&rhs).unwrap();
                let oracle = dense::solve(op.to_dense(), rhs);
                for (a, b) in x.iter().zip(&oracle) {
                    assert!((a - b).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn residuals_over_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for trial in 0..100 {
            let boundary = if trial % 2 == 0 { Boundary::TruncatedLine } else { Boundary::Periodic };
            let n = rng.gen_range(4..=512);
            let op = random_op(&mut rng, n, boundary);
            let rhs = random_vec(&mut rng, n);
            let x = factor(&op).unwrap().solve(&rhs).unwrap();
            let r: Vec<f64> = op.apply(&x).unwrap().iter().zip(&rhs).map(|(a, b)| a - b).collect();
            assert!(norm(&r) <= 1e-10 * norm(&rhs));
        }
    }

    #[test]
    fn constants_are_fixed_by_periodic_operator() {
        let op = BandedOperator::assemble(0.01, 0.3, 100, Boundary::Periodic).unwrap();
        let x = factor(&op).unwrap().solve(&[2.0; 100]).unwrap();
        assert!(x.iter().all(|&v| (v - 2.0).abs() < 1e-9));
    }

    #[test]
    fn large_mu_is_stable() {
        // dt / dx^3 = 1e5, above the largest value any preset reaches
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for boundary in [Boundary::TruncatedLine, Boundary::Periodic] {
            let op = BandedOperator::assemble(1e-3, 1e-4, 2000, boundary).unwrap();
            let rhs = random_vec(&mut rng, 2000);
            let x = factor(&op).unwrap().solve(&rhs).unwrap();
            let r: Vec<f64> = op.apply(&x).unwrap().iter().zip(&rhs).map(|(a, b)| a - b).collect();
            assert!(norm(&r) <= 1e-10 * norm(&rhs), "{}", norm(&r));
        }
    }

    #[test]
    fn periodic_solve_preserves_the_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let op = BandedOperator::assemble(1e-3, 1e-4, 2000, Boundary::Periodic).unwrap();
        let f = factor(&op).unwrap();
        let mut x = random_vec(&mut rng, 2000);
        let total: f64 = x.iter().sum();
        let scale: f64 = x.iter().map(|v| v.abs()).sum();
        for _ in 0..200 {
            f.solve_in_place(&mut x).unwrap();
        }
        let drift = (x.iter().sum::<f64>() - total).abs();
        assert!(drift <= 1e-12 * scale, "{drift}");
    }

    proptest! {
        #[test]
        fn coercive_and_contractive_inverse(
            seed in any::<u64>(),
            n in 4usize..200,
            periodic in any::<bool>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let boundary = if periodic { Boundary::Periodic } else { Boundary::TruncatedLine };
            let op = random_op(&mut rng, n, boundary);
            let v = random_vec(&mut rng, n);
            let mv = op.apply(&v).unwrap();
            let vmv: f64 = v.iter().zip(&mv).map(|(a, b)| a * b).sum();
            let vv: f64 = v.iter().map(|a| a * a).sum();
            prop_assert!(vmv >= vv * (1.0 - 1e-10));

            let f = factor(&op).unwrap();
            let x = f.solve(&v).unwrap();
            prop_assert!(norm(&x) <= norm(&v) * (1.0 + 1e-10));

            // solve(M, M v) recovers v
            let back = f.solve(&mv).unwrap();
            let err: f64 = back.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            prop_assert!(err <= 1e-9 * norm(&v));
        }
    }
}
