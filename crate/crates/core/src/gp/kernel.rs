use serde::{Deserialize, Serialize};

use super::linalg::{cholesky_inverse, cholesky_jittered, cholesky_solve, dot, log_det_from_cholesky, Square};
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `(ϑ_f, ϑ_l, ϑ_n)`: signal amplitude, length scale and noise variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub theta_f: f64,
    pub theta_l: f64,
    pub theta_n: f64,
}

impl Hyperparameters {
    pub fn new(theta_f: f64, theta_l: f64, theta_n: f64) -> Result<Self> {
        let h = Hyperparameters {
            theta_f,
            theta_l,
            theta_n,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if self.as_array().iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidOptions(format!("hyperparameters must be positive: {self:?}")))
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.theta_f, self.theta_l, self.theta_n]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Hyperparameters {
            theta_f: a[0],
            theta_l: a[1],
            theta_n: a[2],
        }
    }

    /// Prior variance of a noisy observation.
    pub fn prior_variance(&self) -> f64 {
        self.theta_f * self.theta_f + self.theta_n
    }

    #[inline]
    pub(crate) fn covariance(&self, sq_dist: f64) -> f64 {
        self.theta_f * self.theta_f * (-sq_dist / (2.0 * self.theta_l * self.theta_l)).exp()
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn kernel_se(x: &[f64], x2: &[f64], theta: &Hyperparameters, same_index: bool) -> Result<f64> {
    if x.len() != x2.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: x2.len(),
        });
    }
    let noise = if same_index { theta.theta_n } else { 0.0 };
    Ok(theta.covariance(squared_distance(x, x2)) + noise)
}

/// Row-major `n × d` input matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Inputs {
    pub n: usize,
    pub d: usize,
    pub data: Vec<f64>,
}

impl Inputs {
    pub fn new(data: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 || data.len() % d != 0 || data.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: data.len(),
            });
        }
        Ok(Inputs {
            n: data.len() / d,
            d,
            data,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bad.len(),
            });
        }
        Inputs::new(rows.concat(), d)
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn select(&self, idx: &[usize]) -> Inputs {
        Inputs {
            n: idx.len(),
            d: self.d,
            data: idx.iter().flat_map(|&i| self.row(i).iter().copied()).collect(),
        }
    }
}

/// Pairwise squared distances; symmetric with a zero diagonal.
pub fn distance_matrix(x: &Inputs) -> Square {
    let n = x.n;
    let mut m = Square::zeros(n);
    for i in 0..n {
        for j in 0..i {
            let v = squared_distance(x.row(i), x.row(j));
            m.data[i * n + j] = v;
            m.data[j * n + i] = v;
        }
    }
    m
}

fn gram_from_distances(dist: &Square, theta: &Hyperparameters) -> Square {
    let n = dist.n;
    let mut k = Square::zeros(n);
    for i in 0..n {
        for j in 0..i {
            let v = theta.covariance(dist.at(i, j));
            k.data[i * n + j] = v;
            k.data[j * n + i] = v;
        }
        k.data[i * n + i] = theta.prior_variance();
    }
    k
}

pub fn gram_matrix(x: &Inputs, theta: &Hyperparameters) -> Square {
    gram_from_distances(&distance_matrix(x), theta)
}

/// Factorized noisy Gram matrix of a training set.
#[derive(Debug, Clone)]
pub struct Posterior {
    pub chol: Square,
    pub alpha: Vec<f64>,
    pub jitter: f64,
    pub nlml: f64,
}

pub(crate) fn posterior_from_distances(dist: &Square, y: &[f64], theta: &Hyperparameters) -> Result<Posterior> {
    if y.len() != dist.n {
        return Err(Error::DimensionMismatch {
            expected: dist.n,
            got: y.len(),
        });
    }
    let k = gram_from_distances(dist, theta);
    let (chol, jitter) = cholesky_jittered(&k)?;
    let alpha = cholesky_solve(&chol, y);
    let nlml = 0.5 * dot(y, &alpha) + 0.5 * log_det_from_cholesky(&chol) + 0.5 * y.len() as f64 * LN_2PI;
    if !nlml.is_finite() {
        return Err(Error::NumericalBreakdown(format!("non-finite marginal likelihood at {theta:?}")));
    }
    Ok(Posterior {
        chol,
        alpha,
        jitter,
        nlml,
    })
}

pub fn nlml(x: &Inputs, y: &[f64], theta: &Hyperparameters) -> Result<f64> {
    Ok(posterior_from_distances(&distance_matrix(x), y, theta)?.nlml)
}

/// Gradient with respect to `(ln ϑ_f, ln ϑ_l, ln ϑ_n)`, via
/// `½ tr((K⁻¹ − ααᵀ) ∂K)`.
pub(crate) fn log_gradient(dist: &Square, theta: &Hyperparameters, post: &Posterior) -> [f64; 3] {
    let n = dist.n;
    let inv = cholesky_inverse(&post.chol);
    let a = &post.alpha;
    let l2 = theta.theta_l * theta.theta_l;
    let (mut gf, mut gl, mut gn) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let inv_row = inv.row(i);
        let d_row = dist.row(i);
        for j in 0..i {
            let w = inv_row[j] - a[i] * a[j];
            let s = theta.covariance(d_row[j]);
            gf += 2.0 * w * 2.0 * s;
            gl += 2.0 * w * s * d_row[j] / l2;
        }
        let w = inv_row[i] - a[i] * a[i];
        gf += w * 2.0 * theta.theta_f * theta.theta_f;
        gn += w * theta.theta_n;
    }
    [0.5 * gf, 0.5 * gl, 0.5 * gn]
}

/// Gradient with respect to `(ϑ_f, ϑ_l, ϑ_n)`.
pub fn nlml_gradient(x: &Inputs, y: &[f64], theta: &Hyperparameters) -> Result<[f64; 3]> {
    let dist = distance_matrix(x);
    let post = posterior_from_distances(&dist, y, theta)?;
    let g = log_gradient(&dist, theta, &post);
    let t = theta.as_array();
    Ok([g[0] / t[0], g[1] / t[1], g[2] / t[2]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    pub(crate) fn random_inputs(n: usize, d: usize, seed: u64) -> Inputs {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Inputs::new((0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect(), d).unwrap()
    }

    /// Gauss-Jordan inverse and determinant, independent of the Cholesky path.
    fn dense_inverse(a: &Square) -> (Vec<Vec<f64>>, f64) {
        let n = a.n;
        let mut m: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut r = a.row(i).to_vec();
                r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
                r
            })
            .collect();
        let mut det = 1.0;
        for c in 0..n {
            let p = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
            if p != c {
                m.swap(p, c);
                det = -det;
            }
            let pivot = m[c][c];
            det *= pivot;
            for v in &mut m[c] {
                *v /= pivot;
            }
            for r in 0..n {
                if r != c {
                    let f = m[r][c];
                    for k in 0..2 * n {
                        m[r][k] -= f * m[c][k];
                    }
                }
            }
        }
        (m.into_iter().map(|r| r[n..].to_vec()).collect(), det)
    }

    fn dense_nlml(x: &Inputs, y: &[f64], t: &Hyperparameters) -> f64 {
        let k = gram_matrix(x, t);
        let (inv, det) = dense_inverse(&k);
        let n = y.len();
        let quad: f64 = (0..n).map(|i| (0..n).map(|j| y[i] * inv[i][j] * y[j]).sum::<f64>()).sum();
        0.5 * quad + 0.5 * det.ln() + 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    #[test]
    fn kernel_examples() {
        let t = Hyperparameters::new(2.0, 1.0, 0.5).unwrap();
        assert_eq!(kernel_se(&[1.0, 2.0], &[1.0, 2.0], &t, true).unwrap(), 4.5);
        let t1 = Hyperparameters::new(1.0, 1.0, 0.3).unwrap();
        let v = kernel_se(&[0.0, 0.0], &[1.0, 1.0], &t1, false).unwrap();
        assert!((v - (-1f64).exp()).abs() < 1e-15);
        assert!(kernel_se(&[0.0], &[1e6], &t1, false).unwrap() < 1e-300);
        assert!(kernel_se(&[0.0], &[1.0, 2.0], &t1, false).is_err());
        assert!(Hyperparameters::new(0.0, 1.0, 1.0).is_err());
        assert!(Hyperparameters::new(1.0, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn gram_properties() {
        let t = Hyperparameters::new(1.0, 1.0, 0.1).unwrap();
        let one = gram_matrix(&random_inputs(1, 3, 0), &t);
        assert_eq!(one.data, vec![1.1]);
        let x = random_inputs(8, 3, 11);
        let k = gram_matrix(&x, &t);
        for i in 0..8 {
            assert_eq!(k.at(i, i), 1.1);
            for j in 0..8 {
                assert_eq!(k.at(i, j), k.at(j, i));
                assert_eq!(k.at(i, j), kernel_se(x.row(i), x.row(j), &t, i == j).unwrap());
            }
        }
        // smallest eigenvalue via inverse power iteration on K
        let (inv, _) = dense_inverse(&k);
        let mut v = vec![1.0; 8];
        let mut lambda = 0.0;
        for _ in 0..500 {
            let w: Vec<f64> = (0..8).map(|i| (0..8).map(|j| inv[i][j] * v[j]).sum()).collect();
            let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
            lambda = 1.0 / norm;
            v = w.iter().map(|a| a / norm).collect();
        }
        assert!(lambda >= 0.1 - 1e-10, "{lambda}");
    }

    #[test]
    fn nlml_examples() {
        let t = Hyperparameters::new(1.3, 0.7, 0.2).unwrap();
        let x = random_inputs(1, 2, 1);
        let v = nlml(&x, &[0.0], &t).unwrap();
        let want = 0.5 * t.prior_variance().ln() + 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((v - want).abs() < 1e-14);

        let t = Hyperparameters::new(1.0, 1.0, 0.1).unwrap();
        let x = Inputs::new(vec![0.0, 1.0], 1).unwrap();
        let y = [1.0, -1.0];
        assert!((nlml(&x, &y, &t).unwrap() - dense_nlml(&x, &y, &t)).abs() < 1e-10);

        let x = random_inputs(6, 2, 5);
        let k = gram_matrix(&x, &t);
        let (_, det) = dense_inverse(&k);
        let zero = nlml(&x, &[0.0; 6], &t).unwrap();
        assert!((zero - (0.5 * det.ln() + 3.0 * (2.0 * std::f64::consts::PI).ln())).abs() < 1e-10);
        assert!(nlml(&x, &[0.0; 5], &t).is_err());
    }

    #[test]
    fn noise_gradient_positive_for_zero_targets() {
        let x = random_inputs(5, 2, 9);
        let t = Hyperparameters::new(1.0, 1.0, 10.0).unwrap();
        assert!(nlml_gradient(&x, &[0.0; 5], &t).unwrap()[2] > 0.0);
    }

    fn check_gradient(n: usize, d: usize, seed: u64, t: Hyperparameters) -> std::result::Result<(), String> {
        let x = random_inputs(n, d, seed);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed + 1000);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let g = nlml_gradient(&x, &y, &t).unwrap();
        let base = t.as_array();
        for k in 0..3 {
            let h = 1e-5 * base[k];
            let (mut up, mut dn) = (base, base);
            up[k] += h;
            dn[k] -= h;
            let fd = (nlml(&x, &y, &Hyperparameters::from_array(up)).unwrap()
                - nlml(&x, &y, &Hyperparameters::from_array(dn)).unwrap())
                / (2.0 * h);
            let scale = fd.abs().max(g[k].abs()).max(1e-6);
            if (fd - g[k]).abs() > 1e-4 * scale {
                return Err(format!("component {k}: analytic {} vs fd {fd}", g[k]));
            }
        }
        Ok(())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn gradient_matches_finite_differences(
            n in 2usize..=10,
            d in 1usize..=4,
            seed in 0u64..1_000_000,
            f in 0.3f64..3.0,
            l in 0.3f64..3.0,
            noise in 0.05f64..1.0,
        ) {
            let t = Hyperparameters::new(f, l, noise).unwrap();
            prop_assert!(check_gradient(n, d, seed, t).is_ok(), "{:?}", check_gradient(n, d, seed, t));
        }
    }
}
