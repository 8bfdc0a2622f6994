//! Dense symmetric positive-definite routines on row-major square matrices.

use crate::error::{Error, Result};

pub const JITTER_START: f64 = 1e-10;
pub const JITTER_MAX: f64 = 1e-4;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Square {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Square {
    pub fn zeros(n: usize) -> Self {
        Square {
            n,
            data: vec![0.0; n * n],
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn mean_diagonal(&self) -> f64 {
        (0..self.n).map(|i| self.at(i, i)).sum::<f64>() / self.n.max(1) as f64
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Lower Cholesky factor, zero above the diagonal. `None` if a pivot is not
/// strictly positive.
pub fn cholesky(a: &Square) -> Option<Square> {
    let n = a.n;
    let mut l = Square::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let s = a.at(i, j) - dot(&l.data[i * n..i * n + j], &l.data[j * n..j * n + j]);
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l.data[i * n + i] = s.sqrt();
            } else {
                l.data[i * n + j] = s / l.data[j * n + j];
            }
        }
    }
    Some(l)
}

/// Factor with escalating diagonal jitter: none, then `JITTER_START`, ×10 up
/// to `JITTER_MAX`, each relative to the mean diagonal. Returns the factor
/// and the absolute jitter added.
pub fn cholesky_jittered(a: &Square) -> Result<(Square, f64)> {
    if let Some(l) = cholesky(a) {
        return Ok((l, 0.0));
    }
    let scale = a.mean_diagonal().abs().max(f64::MIN_POSITIVE);
    let mut rel = JITTER_START;
    while rel <= JITTER_MAX * (1.0 + 1e-9) {
        let jitter = rel * scale;
        let mut b = a.clone();
        for i in 0..a.n {
            b.data[i * a.n + i] += jitter;
        }
        if let Some(l) = cholesky(&b) {
            log::debug!("cholesky needed relative jitter {rel:e}");
            return Ok((l, jitter));
        }
        rel *= 10.0;
    }
    Err(Error::NumericalBreakdown(format!(
        "{0}x{0} matrix not positive definite after jitter {JITTER_MAX:e}",
        a.n
    )))
}

/// Solves `L x = b`.
pub fn forward_solve(l: &Square, b: &[f64]) -> Vec<f64> {
    let n = l.n;
    let mut x = vec![0.0; n];
    for i in 0..n {
        x[i] = (b[i] - dot(&l.data[i * n..i * n + i], &x[..i])) / l.data[i * n + i];
    }
    x
}

/// Solves `Lᵀ x = b`.
pub fn backward_solve(l: &Square, b: &[f64]) -> Vec<f64> {
    let n = l.n;
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        x[i] /= l.data[i * n + i];
        let xi = x[i];
        let row = &l.data[i * n..i * n + i];
        for (xk, lk) in x[..i].iter_mut().zip(row) {
            *xk -= lk * xi;
        }
    }
    x
}

/// `A⁻¹ b` from the factor of `A`.
pub fn cholesky_solve(l: &Square, b: &[f64]) -> Vec<f64> {
    backward_solve(l, &forward_solve(l, b))
}

/// `A⁻¹` from the factor of `A`.
pub fn cholesky_inverse(l: &Square) -> Square {
    let n = l.n;
    // u row j = column j of L⁻¹, nonzero from index j on
    let mut u = Square::zeros(n);
    for j in 0..n {
        let row = &mut u.data[j * n..(j + 1) * n];
        for i in j..n {
            let s = if i == j { 1.0 } else { 0.0 } - dot(&l.data[i * n + j..i * n + i], &row[j..i]);
            row[i] = s / l.data[i * n + i];
        }
    }
    let mut inv = Square::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let v = dot(&u.data[i * n + i..(i + 1) * n], &u.data[j * n + i..(j + 1) * n]);
            inv.data[i * n + j] = v;
            inv.data[j * n + i] = v;
        }
    }
    inv
}

pub fn log_det_from_cholesky(l: &Square) -> f64 {
    2.0 * (0..l.n).map(|i| l.at(i, i).ln()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_spd(n: usize, seed: u64) -> Square {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut a = Square::zeros(n);
        for i in 0..n {
            for j in 0..n {
                a.data[i * n + j] = (0..n).map(|k| b[i * n + k] * b[j * n + k]).sum::<f64>() + if i == j { 0.5 } else { 0.0 };
            }
        }
        a
    }

    fn matmul(a: &Square, b: &Square) -> Square {
        let n = a.n;
        let mut c = Square::zeros(n);
        for i in 0..n {
            for j in 0..n {
                c.data[i * n + j] = (0..n).map(|k| a.at(i, k) * b.at(k, j)).sum();
            }
        }
        c
    }

    #[test]
    fn factor_reconstructs() {
        let a = random_spd(12, 3);
        let l = cholesky(&a).unwrap();
        let n = a.n;
        for i in 0..n {
            for j in 0..n {
                let v: f64 = (0..n).map(|k| l.at(i, k) * l.at(j, k)).sum();
                assert!((v - a.at(i, j)).abs() <= 1e-12 * a.at(i, i).max(1.0));
                if j > i {
                    assert_eq!(l.at(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn inverse_and_solve() {
        let a = random_spd(9, 4);
        let l = cholesky(&a).unwrap();
        let inv = cholesky_inverse(&l);
        let id = matmul(&a, &inv);
        for i in 0..9 {
            for j in 0..9 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((id.at(i, j) - want).abs() < 1e-9);
            }
        }
        let b: Vec<f64> = (0..9).map(|i| i as f64 - 3.0).collect();
        let x = cholesky_solve(&l, &b);
        for i in 0..9 {
            let r: f64 = (0..9).map(|k| a.at(i, k) * x[k]).sum();
            assert!((r - b[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn log_det_of_diagonal() {
        let mut a = Square::zeros(3);
        for (i, v) in [2.0, 3.0, 5.0].into_iter().enumerate() {
            a.data[i * 3 + i] = v;
        }
        let l = cholesky(&a).unwrap();
        assert!((log_det_from_cholesky(&l) - 30f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn jitter_rescues_semidefinite() {
        // rank one
        let n = 5;
        let mut a = Square::zeros(n);
        for i in 0..n {
            for j in 0..n {
                a.data[i * n + j] = 1.0;
            }
        }
        assert!(cholesky(&a).is_none());
        let (_, jitter) = cholesky_jittered(&a).unwrap();
        assert!(jitter > 0.0 && jitter <= JITTER_MAX);
        let mut neg = Square::zeros(2);
        neg.data = vec![1.0, 0.0, 0.0, -1.0];
        assert!(matches!(cholesky_jittered(&neg), Err(Error::NumericalBreakdown(_))));
    }
}
