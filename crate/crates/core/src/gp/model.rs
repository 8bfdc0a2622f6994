use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernel::{distance_matrix, log_gradient, posterior_from_distances, squared_distance, Hyperparameters, Inputs, Posterior};
use super::linalg::{dot, forward_solve, Square};
use crate::error::{Error, Result};
use crate::labels::ModelKind;

/// Largest change of any log-hyperparameter in one step.
const MAX_LOG_STEP: f64 = 1.0;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub max_iters: usize,
    /// Initial step length in log-hyperparameter space per unit gradient.
    pub step_size: f64,
    /// Stop once the log-space gradient norm falls to this.
    pub grad_tol: f64,
    pub min_hyperparam: f64,
    pub subsample_cap: Option<usize>,
    pub seed: u64,
    /// Also descend from [`data_scale_theta`] and keep the better optimum.
    pub data_scale_restart: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            max_iters: 30,
            step_size: 0.01,
            grad_tol: 1e-3,
            min_hyperparam: 1e-6,
            subsample_cap: Some(4000),
            seed: 0,
            data_scale_restart: true,
        }
    }
}

impl TrainOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidOptions("max_iters must be at least 1".into()));
        }
        if !(self.step_size > 0.0 && self.grad_tol > 0.0 && self.min_hyperparam > 0.0) {
            return Err(Error::InvalidOptions(
                "step_size, grad_tol and min_hyperparam must be positive".into(),
            ));
        }
        if self.subsample_cap == Some(0) {
            return Err(Error::InvalidOptions("subsample_cap must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub model_kind: Option<ModelKind>,
    pub fold: Option<String>,
    pub initial_theta: Option<Hyperparameters>,
    pub n_available: usize,
    pub n_used: usize,
    pub iterations: usize,
    pub initial_nlml: f64,
    pub final_nlml: f64,
    pub converged: bool,
}

/// Per-dimension affine map applied to inputs before the kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputTransform {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
    /// Transformed coordinates are clamped to `[-bound, bound]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
}

impl InputTransform {
    /// Z-scores each dimension and divides by `sqrt(d)`, so squared
    /// distances are of order one whatever the dimension. Constant
    /// dimensions are zeroed.
    pub fn standardize(x: &Inputs) -> Self {
        let (n, d) = (x.n as f64, x.d);
        let mut shift = vec![0.0; d];
        let mut scale = vec![0.0; d];
        for j in 0..d {
            let mean = (0..x.n).map(|i| x.row(i)[j]).sum::<f64>() / n;
            let var = (0..x.n).map(|i| (x.row(i)[j] - mean).powi(2)).sum::<f64>() / n;
            shift[j] = mean;
            let sd = var.sqrt();
            scale[j] = if sd > 1e-12 * mean.abs().max(1.0) { 1.0 / (sd * (d as f64).sqrt()) } else { 0.0 };
        }
        InputTransform { shift, scale, bound: None }
    }

    /// Like [`standardize`](Self::standardize), with z-scores clamped to
    /// `[-z_max, z_max]`.
    pub fn standardize_clipped(x: &Inputs, z_max: f64) -> Self {
        let mut t = Self::standardize(x);
        t.bound = Some(z_max / (x.d as f64).sqrt());
        t
    }

    pub fn apply(&self, q: &[f64]) -> Vec<f64> {
        q.iter()
            .zip(self.shift.iter().zip(&self.scale))
            .map(|(v, (m, s))| {
                let z = (v - m) * s;
                match self.bound {
                    Some(b) => z.clamp(-b, b),
                    None => z,
                }
            })
            .collect()
    }

    pub fn apply_all(&self, x: &Inputs) -> Inputs {
        Inputs {
            n: x.n,
            d: x.d,
            data: (0..x.n).flat_map(|i| self.apply(x.row(i))).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpModel {
    pub theta: Hyperparameters,
    pub x: Inputs,
    pub alpha: Vec<f64>,
    /// Lower factor of the noisy Gram matrix (plus `jitter` on the diagonal).
    pub chol: Square,
    pub jitter: f64,
    pub meta: TrainingMeta,
    /// Maps raw query inputs into the space of `x`.
    pub transform: Option<InputTransform>,
}

impl GpModel {
    /// Conditions on `(x, y)` at fixed hyperparameters.
    pub fn fit(x: Inputs, y: &[f64], theta: Hyperparameters) -> Result<Self> {
        theta.validate()?;
        let post = posterior_from_distances(&distance_matrix(&x), y, &theta)?;
        Ok(GpModel::from_posterior(x, theta, post, TrainingMeta::default()))
    }

    fn from_posterior(x: Inputs, theta: Hyperparameters, post: Posterior, mut meta: TrainingMeta) -> Self {
        meta.n_used = x.n;
        meta.final_nlml = post.nlml;
        GpModel {
            theta,
            x,
            alpha: post.alpha,
            chol: post.chol,
            jitter: post.jitter,
            meta,
            transform: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.x.d
    }

    pub fn n(&self) -> usize {
        self.x.n
    }

    fn cross_covariance(&self, q: &[f64]) -> Vec<f64> {
        (0..self.x.n).map(|i| self.theta.covariance(squared_distance(self.x.row(i), q))).collect()
    }

    fn check_dim(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.x.d {
            return Err(Error::DimensionMismatch {
                expected: self.x.d,
                got: q.len(),
            });
        }
        Ok(())
    }

    fn to_model_space<'a>(&self, q: &'a [f64]) -> std::borrow::Cow<'a, [f64]> {
        match &self.transform {
            Some(t) => t.apply(q).into(),
            None => q.into(),
        }
    }

    pub fn predict_mean(&self, q: &[f64]) -> Result<f64> {
        self.check_dim(q)?;
        Ok(dot(&self.cross_covariance(&self.to_model_space(q)), &self.alpha))
    }

    /// Posterior mean and noisy predictive variance at `q`.
    pub fn predict(&self, q: &[f64]) -> Result<(f64, f64)> {
        self.check_dim(q)?;
        let k = self.cross_covariance(&self.to_model_space(q));
        let mean = dot(&k, &self.alpha);
        let v = forward_solve(&self.chol, &k);
        let var = (self.theta.prior_variance() - dot(&v, &v)).max(0.0);
        Ok((mean, var))
    }
}

/// Indices of a seeded uniform subsample of size `cap` (sorted), or all.
pub fn subsample_indices(n: usize, cap: Option<usize>, seed: u64) -> Vec<usize> {
    match cap {
        Some(c) if n > c => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = rand::seq::index::sample(&mut rng, n, c).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..n).collect(),
    }
}

fn norm(g: &[f64; 3]) -> f64 {
    g.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Gradient descent on the negative log marginal likelihood in
/// log-hyperparameter space. The step starts at `step_size`, is halved
/// whenever a trial does not improve the objective and doubled after every
/// accepted step. With `data_scale_restart` a second descent starts from
/// [`data_scale_theta`] and the lower final objective wins.
pub fn train(x: &Inputs, y: &[f64], theta0: Hyperparameters, opts: &TrainOptions) -> Result<GpModel> {
    opts.validate()?;
    theta0.validate()?;
    if x.n != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.n,
            got: y.len(),
        });
    }
    if x.n < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 training points, got {}", x.n)));
    }
    let idx = subsample_indices(x.n, opts.subsample_cap, opts.seed);
    let (xs, ys): (Inputs, Vec<f64>) = if idx.len() < x.n {
        log::info!("subsampling {} of {} training points", idx.len(), x.n);
        (x.select(&idx), idx.iter().map(|&i| y[i]).collect())
    } else {
        (x.clone(), y.to_vec())
    };
    let dist = distance_matrix(&xs);
    let mut best = descend(&dist, &ys, theta0, opts)?;
    if opts.data_scale_restart {
        let alt = data_scale_theta(&dist, &ys);
        match descend(&dist, &ys, alt, opts) {
            Ok(r) if r.2.nlml < best.2.nlml => best = r,
            Ok(_) => {}
            Err(e) => log::debug!("data-scale restart failed: {e}"),
        }
    }
    let (theta, mut meta, post) = best;
    meta.n_available = x.n;
    log::debug!(
        "trained on {} points: nlml {:.4} -> {:.4} in {} iterations, theta {:?}",
        xs.n,
        meta.initial_nlml,
        post.nlml,
        meta.iterations,
        theta
    );
    Ok(GpModel::from_posterior(xs, theta, post, meta))
}

type Descent = (Hyperparameters, TrainingMeta, Posterior);

fn descend(dist: &Square, ys: &[f64], theta0: Hyperparameters, opts: &TrainOptions) -> Result<Descent> {
    let mut theta = theta0;
    let mut post = posterior_from_distances(dist, ys, &theta)?;
    let mut grad = log_gradient(dist, &theta, &post);
    let mut meta = TrainingMeta {
        initial_theta: Some(theta0),
        initial_nlml: post.nlml,
        ..Default::default()
    };
    let mut step = opts.step_size;
    let floor = opts.min_hyperparam.ln();
    while meta.iterations < opts.max_iters {
        if norm(&grad) <= opts.grad_tol {
            meta.converged = true;
            break;
        }
        meta.iterations += 1;
        let logs = theta.as_array().map(f64::ln);
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial = Hyperparameters::from_array(std::array::from_fn(|k| {
                (logs[k] - (step * grad[k]).clamp(-MAX_LOG_STEP, MAX_LOG_STEP)).max(floor).exp()
            }));
            match posterior_from_distances(dist, ys, &trial) {
                Ok(p) if p.nlml < post.nlml => {
                    accepted = Some((trial, p));
                    break;
                }
                Ok(_) | Err(Error::NumericalBreakdown(_)) => step *= 0.5,
                Err(e) => return Err(e),
            }
        }
        let Some((t, p)) = accepted else {
            log::debug!("no improving step after {MAX_HALVINGS} halvings; stopping");
            meta.converged = true;
            break;
        };
        grad = log_gradient(dist, &t, &p);
        theta = t;
        post = p;
        step *= 2.0;
        log::trace!("iter {} nlml {:.6} theta {:?}", meta.iterations, post.nlml, theta);
    }
    if !meta.converged && norm(&grad) <= opts.grad_tol {
        meta.converged = true;
    }
    Ok((theta, meta, post))
}

/// Starting point matched to the data: signal scale the target standard
/// deviation, length scale the median pairwise distance, noise a tenth of
/// the target variance.
pub fn data_scale_theta(dist: &Square, y: &[f64]) -> Hyperparameters {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).max(1e-6);
    let mut d: Vec<f64> = (0..dist.n)
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .map(|(i, j)| dist.data[i * dist.n + j])
        .filter(|v| *v > 0.0)
        .collect();
    let ell = if d.is_empty() {
        1.0
    } else {
        let mid = d.len() / 2;
        d.select_nth_unstable_by(mid, f64::total_cmp);
        d[mid].sqrt()
    };
    Hyperparameters {
        theta_f: var.sqrt(),
        theta_l: ell,
        theta_n: 0.1 * var,
    }
}
