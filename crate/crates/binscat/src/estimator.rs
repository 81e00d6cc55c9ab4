//! Joint semilinear M-estimation and evaluation of the fitted functions.
//!
//! `fit` minimizes `Σᵢ ρ(yᵢ; η(b(xᵢ)'β + wᵢ'γ))` by damped Newton steps.
//! The Hessian has an arrow shape — a banded `K×K` basis block bordered by
//! `d` dense control columns — which the step solver exploits through a
//! banded Cholesky plus a Schur complement on the `d×d` block. Quantile
//! losses are handled by Moreau-envelope smoothing of the check function
//! with a geometric continuation in the smoothing parameter.

use crate::basis::{BasisSpec, DesignMatrix};
use crate::dataset::{self, Dataset};
use crate::error::{Error, Result};
use crate::linalg::{dot, BlockSolver, SymBanded};
use crate::model::{smoothed_check, Family, ModelSpec};

/// Where the control vector is evaluated when reporting level and marginal
/// effects.
#[derive(Debug, Clone)]
pub enum EvalSpec {
    Mean,
    Median,
    /// Values on the original (uncentered) scale.
    Values(Vec<f64>),
}

impl Default for EvalSpec {
    fn default() -> Self {
        EvalSpec::Mean
    }
}

/// Resolved evaluation point, kept in both centered and original
/// coordinates.
#[derive(Debug, Clone)]
pub struct EvalPoint {
    /// Coordinates in the centered-control space used by the fit.
    pub values: Vec<f64>,
    /// The same point on the original scale (for reporting).
    pub original: Vec<f64>,
    pub tag: String,
}

impl EvalPoint {
    pub fn resolve(data: &Dataset, spec: &EvalSpec) -> Result<EvalPoint> {
        let d = data.ncontrols();
        match spec {
            EvalSpec::Mean => Ok(EvalPoint {
                values: vec![0.0; d],
                original: data.w_means.clone(),
                tag: "mean".into(),
            }),
            EvalSpec::Median => {
                let mut values = Vec::with_capacity(d);
                let mut original = Vec::with_capacity(d);
                for (col, mean) in data.w.iter().zip(&data.w_means) {
                    let med_centered = dataset::median(col);
                    values.push(med_centered);
                    original.push(med_centered + mean);
                }
                Ok(EvalPoint {
                    values,
                    original,
                    tag: "median".into(),
                })
            }
            EvalSpec::Values(orig) => {
                if orig.len() != d {
                    return Err(Error::InvalidConfig(format!(
                        "evaluation point has {} entries but the model has {} controls",
                        orig.len(),
                        d
                    )));
                }
                if orig.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidConfig(
                        "evaluation point must be finite".into(),
                    ));
                }
                let values = orig
                    .iter()
                    .zip(&data.w_means)
                    .map(|(v, m)| v - m)
                    .collect();
                Ok(EvalPoint {
                    values,
                    original: orig.clone(),
                    tag: "user".into(),
                })
            }
        }
    }
}

/// Solver knobs; the defaults implement the documented behavior and exist
/// mostly so tests can tighten or relax them.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub eval: EvalSpec,
    pub max_iterations: usize,
    pub max_halvings: usize,
    /// Gradient tolerance factor: converged when
    /// `‖g‖∞ ≤ factor · n · (1 + sd(y))`.
    pub grad_tol_factor: f64,
    /// Relative objective-decrement tolerance.
    pub obj_tol_rel: f64,
    /// Initial and final quantile smoothing as multiples of IQR(y).
    pub kappa_start_iqr: f64,
    pub kappa_final_iqr: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            eval: EvalSpec::Mean,
            max_iterations: 200,
            max_halvings: 30,
            grad_tol_factor: 1e-8,
            obj_tol_rel: 1e-12,
            kappa_start_iqr: 0.1,
            kappa_final_iqr: 1e-6,
        }
    }
}

/// Converged coefficients plus the cached per-observation quantities the
/// covariance and inference layers reuse.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub basis: BasisSpec,
    pub model: ModelSpec,
    pub eval_point: EvalPoint,
    pub iterations: usize,
    pub converged: bool,
    pub grad_inf_norm: f64,
    /// Fitted index `θ̂ᵢ = b(xᵢ)'β̂ + wᵢ'γ̂` per observation.
    pub theta_hat: Vec<f64>,
    /// Cached design rows for the fitted sample.
    pub design: DesignMatrix,
    /// Objective values of accepted iterates in the final solver stage.
    pub objective_path: Vec<f64>,
    /// Control columns that were dropped as identically zero after
    /// centering (originally constant; absorbed by the basis intercept).
    pub dropped_w_cols: Vec<usize>,
    pub warnings: Vec<String>,
}

impl FitResult {
    /// `μ̂⁽ᵛ⁾(x) = b⁽ᵛ⁾(x)'β̂`.
    pub fn predict_mu(&self, x: f64, v: usize) -> Result<f64> {
        Ok(self.basis.eval(x, v)?.dot(&self.beta))
    }

    /// Index at the evaluation point: `θ̂(x, ŵ) = μ̂(x) + ŵ'γ̂`.
    pub fn predict_theta(&self, x: f64) -> Result<f64> {
        Ok(self.predict_mu(x, 0)? + dot(&self.eval_point.values, &self.gamma))
    }

    /// Level on the outcome scale: `ϑ̂(x, ŵ) = η(θ̂(x, ŵ))`.
    pub fn predict_level(&self, x: f64) -> Result<f64> {
        Ok(self.model.eta(self.predict_theta(x)?))
    }

    /// Marginal effect `ζ̂(x, ŵ) = η⁽¹⁾(θ̂(x, ŵ))·μ̂⁽¹⁾(x)`.
    pub fn predict_marginal(&self, x: f64) -> Result<f64> {
        if self.basis.degree() == 0 {
            return Err(Error::InvalidDerivative { v: 1, p: 0 });
        }
        let theta = self.predict_theta(x)?;
        Ok(self.model.eta1(theta) * self.predict_mu(x, 1)?)
    }

    /// Residuals `yᵢ − η(θ̂ᵢ)`.
    pub fn residuals(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(&self.theta_hat)
            .map(|(yi, ti)| yi - self.model.eta(*ti))
            .collect()
    }
}

pub fn fit(data: &Dataset, basis: &BasisSpec, model: &ModelSpec) -> Result<FitResult> {
    fit_with(data, basis, model, &FitOptions::default())
}

pub fn fit_with(
    data: &Dataset,
    basis: &BasisSpec,
    model: &ModelSpec,
    opts: &FitOptions,
) -> Result<FitResult> {
    model.check_outcomes(&data.y)?;
    let n = data.n();
    let k = basis.dim();
    let d_all = data.ncontrols();
    if n <= k + d_all {
        return Err(Error::InvalidConfig(format!(
            "need n > K + d, got n={n}, K={k}, d={d_all}"
        )));
    }
    let occupancy = basis.partition().occupancy(&data.x)?;
    if let Some(j) = occupancy.iter().position(|&c| c == 0) {
        return Err(Error::SingularSystem(format!(
            "bin {} of {} is empty; reduce the number of bins",
            j + 1,
            basis.partition().nbins()
        )));
    }
    let mut warnings = Vec::new();
    let ratio = basis.partition().quasi_uniform_ratio();
    if ratio > crate::partition::QUASI_UNIFORM_WARN_RATIO {
        warnings.push(format!(
            "partition is far from quasi-uniform (max/min bin width = {ratio:.1})"
        ));
    }

    let design = basis.design_matrix(&data.x)?;

    // constant controls center to zero columns and are absorbed by the
    // basis intercept; drop them from the solve and pin their coefficient
    let mut active_w: Vec<usize> = Vec::new();
    let mut dropped_w_cols = Vec::new();
    for (c, col) in data.w.iter().enumerate() {
        let scale = data.w_means[c].abs() + 1.0;
        if col.iter().all(|v| v.abs() <= 1e-12 * scale) {
            dropped_w_cols.push(c);
            warnings.push(format!(
                "control column '{}' is constant; coefficient set to 0",
                data.w_names.get(c).cloned().unwrap_or_else(|| c.to_string())
            ));
        } else {
            active_w.push(c);
        }
    }
    let d = active_w.len();

    let sd_y = dataset::sd(&data.y);
    let grad_tol = opts.grad_tol_factor * n as f64 * (1.0 + sd_y);

    // smoothing stages: one for the smooth families, a geometric κ
    // continuation for quantile
    let stages: Vec<Option<f64>> = if let Family::Quantile { .. } = model.family {
        let mut scale = dataset::iqr(&data.y);
        if !(scale > 0.0) {
            scale = sd_y.max(1e-12 * (1.0 + dataset::median(&data.y).abs()));
        }
        let final_kappa = opts.kappa_final_iqr * scale;
        let mut kappa = opts.kappa_start_iqr * scale;
        let mut out = Vec::new();
        while kappa > final_kappa {
            out.push(Some(kappa));
            kappa *= 0.5;
        }
        out.push(Some(final_kappa));
        out
    } else {
        vec![None]
    };

    let mut state = SolverState {
        beta: vec![0.0; k],
        gamma_active: vec![0.0; d],
        theta: vec![0.0; n],
    };
    state.refresh_theta(&design, data, &active_w);

    let mut total_iters = 0usize;
    let mut converged = false;
    let mut objective_path = Vec::new();
    let last_stage = stages.len() - 1;
    for (si, &kappa) in stages.iter().enumerate() {
        let final_stage = si == last_stage;
        let stage_grad_tol = if final_stage { grad_tol } else { grad_tol.max(1e-6 * n as f64 * (1.0 + sd_y)) };
        let stage_cap = if final_stage { opts.max_iterations } else { 40 };
        objective_path.clear();
        converged = false;

        let mut obj = objective(model, data, &state.theta, kappa)?;
        objective_path.push(obj);
        let mut stage_iters = 0usize;
        loop {
            if total_iters >= opts.max_iterations {
                let g = gradient(model, data, &design, &state.theta, kappa, &active_w)?;
                return Err(Error::NoConvergence {
                    iterations: total_iters,
                    grad_inf: inf_norm2(&g.0, &g.1),
                });
            }
            if stage_iters >= stage_cap && !final_stage {
                break; // continue to the next smoothing level
            }
            let (g_beta, g_gamma) = gradient(model, data, &design, &state.theta, kappa, &active_w)?;
            let g_inf = inf_norm2(&g_beta, &g_gamma);
            if g_inf <= stage_grad_tol {
                converged = true;
                break;
            }

            let step = newton_direction(
                model, data, &design, &state.theta, kappa, &active_w, &g_beta, &g_gamma, basis,
            )?;
            total_iters += 1;
            stage_iters += 1;

            // step halving on objective increase
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..=opts.max_halvings {
                let trial = state.stepped(&step, t, &design, data, &active_w);
                let trial_obj = objective(model, data, &trial.theta, kappa)?;
                if trial_obj <= obj {
                    let rel_dec = (obj - trial_obj) / obj.abs().max(1.0);
                    state = trial;
                    obj = trial_obj;
                    objective_path.push(obj);
                    accepted = true;
                    if rel_dec <= opts.obj_tol_rel {
                        converged = true;
                    }
                    break;
                }
                t *= 0.5;
            }
            if !accepted || converged {
                if !accepted {
                    // no descent direction left at this smoothing level;
                    // treat the iterate as stationary for this stage
                    converged = true;
                }
                break;
            }
        }
    }

    let (g_beta, g_gamma) = gradient(
        model,
        data,
        &design,
        &state.theta,
        *stages.last().unwrap(),
        &active_w,
    )?;
    let grad_inf_norm = inf_norm2(&g_beta, &g_gamma);
    if grad_inf_norm > grad_tol && !converged {
        return Err(Error::NoConvergence {
            iterations: total_iters,
            grad_inf: grad_inf_norm,
        });
    }

    let mut gamma = vec![0.0; d_all];
    for (slot, &c) in state.gamma_active.iter().zip(active_w.iter()) {
        gamma[c] = *slot;
    }
    let eval_point = EvalPoint::resolve(data, &opts.eval)?;
    Ok(FitResult {
        beta: state.beta,
        gamma,
        basis: basis.clone(),
        model: *model,
        eval_point,
        iterations: total_iters,
        converged,
        grad_inf_norm,
        theta_hat: state.theta,
        design,
        objective_path,
        dropped_w_cols,
        warnings,
    })
}

struct SolverState {
    beta: Vec<f64>,
    gamma_active: Vec<f64>,
    theta: Vec<f64>,
}

struct NewtonStep {
    d_beta: Vec<f64>,
    d_gamma: Vec<f64>,
}

impl SolverState {
    fn refresh_theta(&mut self, design: &DesignMatrix, data: &Dataset, active_w: &[usize]) {
        for (i, row) in design.rows.iter().enumerate() {
            let mut t = row.dot(&self.beta);
            for (slot, &c) in self.gamma_active.iter().zip(active_w.iter()) {
                t += slot * data.w[c][i];
            }
            self.theta[i] = t;
        }
    }

    fn stepped(
        &self,
        step: &NewtonStep,
        t: f64,
        design: &DesignMatrix,
        data: &Dataset,
        active_w: &[usize],
    ) -> SolverState {
        let beta: Vec<f64> = self
            .beta
            .iter()
            .zip(&step.d_beta)
            .map(|(b, d)| b + t * d)
            .collect();
        let gamma_active: Vec<f64> = self
            .gamma_active
            .iter()
            .zip(&step.d_gamma)
            .map(|(g, d)| g + t * d)
            .collect();
        let mut out = SolverState {
            beta,
            gamma_active,
            theta: vec![0.0; data.n()],
        };
        out.refresh_theta(design, data, active_w);
        out
    }
}

fn objective(
    model: &ModelSpec,
    data: &Dataset,
    theta: &[f64],
    kappa: Option<f64>,
) -> Result<f64> {
    let mut acc = 0.0;
    match (model.family, kappa) {
        (Family::Quantile { tau }, Some(k)) => {
            for (yi, ti) in data.y.iter().zip(theta) {
                acc += smoothed_check::rho(yi - ti, tau, k);
            }
        }
        _ => {
            for (yi, ti) in data.y.iter().zip(theta) {
                acc += model.rho(*yi, *ti)?;
            }
        }
    }
    Ok(acc)
}

fn gradient(
    model: &ModelSpec,
    data: &Dataset,
    design: &DesignMatrix,
    theta: &[f64],
    kappa: Option<f64>,
    active_w: &[usize],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut g_beta = vec![0.0; design.dim];
    let mut g_gamma = vec![0.0; active_w.len()];
    for (i, row) in design.rows.iter().enumerate() {
        let gt = grad_theta_obs(model, data.y[i], theta[i], kappa)?;
        for (off, val) in row.vals.iter().enumerate() {
            g_beta[row.start + off] += gt * val;
        }
        for (slot, &c) in g_gamma.iter_mut().zip(active_w.iter()) {
            *slot += gt * data.w[c][i];
        }
    }
    Ok((g_beta, g_gamma))
}

fn grad_theta_obs(model: &ModelSpec, y: f64, theta: f64, kappa: Option<f64>) -> Result<f64> {
    match (model.family, kappa) {
        (Family::Quantile { tau }, Some(k)) => Ok(smoothed_check::grad_theta(y - theta, tau, k)),
        (Family::Quantile { .. }, None) => model.grad_theta(y, theta),
        _ => model.grad_theta(y, theta),
    }
}

fn curvature_obs(model: &ModelSpec, y: f64, theta: f64, kappa: Option<f64>) -> f64 {
    match (model.family, kappa) {
        (Family::Quantile { tau }, Some(k)) => smoothed_check::curvature_theta(y - theta, tau, k),
        (Family::Quantile { tau }, None) => {
            // only used when evaluating stationarity of an exact-check fit
            let _ = tau;
            f64::NAN
        }
        _ => model.curvature_theta(y, theta),
    }
}

/// Clamps curvature weights below at a small fraction of the positive
/// median so the Newton system stays positive definite when part of the
/// sample has zero generalized second derivative.
fn floored_curvatures(
    model: &ModelSpec,
    data: &Dataset,
    theta: &[f64],
    kappa: Option<f64>,
) -> Result<Vec<f64>> {
    let mut h: Vec<f64> = data
        .y
        .iter()
        .zip(theta)
        .map(|(yi, ti)| curvature_obs(model, *yi, *ti, kappa))
        .collect();
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularCurvature(
            "non-finite curvature weight".into(),
        ));
    }
    let positives: Vec<f64> = h.iter().copied().filter(|v| *v > 0.0).collect();
    if positives.is_empty() {
        // no observation carries curvature at this iterate (quantile band
        // momentarily empty, or every Huber residual clipped): fall back to
        // a unit quadratic model so the step is a damped gradient move
        return Ok(vec![1.0; h.len()]);
    }
    let floor = 1e-8 * dataset::median(&positives);
    for v in &mut h {
        if *v < floor {
            *v = floor;
        }
    }
    Ok(h)
}

#[allow(clippy::too_many_arguments)]
fn newton_direction(
    model: &ModelSpec,
    data: &Dataset,
    design: &DesignMatrix,
    theta: &[f64],
    kappa: Option<f64>,
    active_w: &[usize],
    g_beta: &[f64],
    g_gamma: &[f64],
    basis: &BasisSpec,
) -> Result<NewtonStep> {
    let k = design.dim;
    let d = active_w.len();
    let h = floored_curvatures(model, data, theta, kappa)?;

    let mut a = SymBanded::zeros(k, basis.band_width());
    let mut b_cols = vec![vec![0.0; k]; d];
    let mut d_block = vec![0.0; d * d];
    for (i, row) in design.rows.iter().enumerate() {
        let hi = h[i];
        a.add_outer(row.start, &row.vals, hi);
        for (ci, &c) in active_w.iter().enumerate() {
            let wc = data.w[c][i];
            for (off, val) in row.vals.iter().enumerate() {
                b_cols[ci][row.start + off] += hi * val * wc;
            }
            for (cj, &c2) in active_w.iter().enumerate().skip(ci) {
                let v = hi * wc * data.w[c2][i];
                d_block[ci * d + cj] += v;
                if ci != cj {
                    d_block[cj * d + ci] += v;
                }
            }
        }
    }

    let solver = BlockSolver::new(&a, &b_cols, &d_block)?;
    let neg_gb: Vec<f64> = g_beta.iter().map(|v| -v).collect();
    let neg_gg: Vec<f64> = g_gamma.iter().map(|v| -v).collect();
    let (d_beta, d_gamma) = solver.solve(&neg_gb, &neg_gg);
    Ok(NewtonStep { d_beta, d_gamma })
}

fn inf_norm2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .chain(b.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::Partition;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bin_values(fit: &FitResult, part: &Partition) -> Vec<f64> {
        (1..=part.nbins())
            .map(|j| {
                let mid = 0.5 * (part.knots()[j - 1] + part.knots()[j]);
                fit.predict_mu(mid, 0).unwrap()
            })
            .collect()
    }

    fn uniform_data(n: usize, seed: u64, f: impl Fn(f64, &mut ChaCha8Rng) -> f64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let y: Vec<f64> = x.iter().map(|&xi| f(xi, &mut rng)).collect();
        Dataset::from_xy(x, y).unwrap()
    }

    #[test]
    fn constant_fit_reproduces_bin_means() {
        let data = uniform_data(400, 1, |x, rng| x + rng.gen_range(-0.5..0.5));
        let part = Partition::quantile_knots(&data.x, 5).unwrap();
        let basis = BasisSpec::new(0, 0, part.clone()).unwrap();
        let fit = fit(&data, &basis, &ModelSpec::least_squares()).unwrap();
        assert!(fit.converged);

        let bins = part.assign_bins(&data.x).unwrap();
        for j in 1..=part.nbins() {
            let members: Vec<f64> = data
                .y
                .iter()
                .zip(&bins)
                .filter(|(_, b)| **b == j)
                .map(|(y, _)| *y)
                .collect();
            let mean = dataset::mean(&members);
            let fitted = bin_values(&fit, &part)[j - 1];
            assert!((fitted - mean).abs() <= 1e-10, "bin {j}");
        }
    }

    #[test]
    fn quantile_fit_reproduces_bin_medians() {
        // 5 bins × 81 observations each: odd in-bin counts keep the median unique
        let data = uniform_data(405, 2, |x, rng| 2.0 * x + rng.gen_range(-1.0..1.0));
        let part = Partition::quantile_knots(&data.x, 5).unwrap();
        let basis = BasisSpec::new(0, 0, part.clone()).unwrap();
        let model = ModelSpec::quantile(0.5).unwrap();
        let fit = fit(&data, &basis, &model).unwrap();
        assert!(fit.converged);

        let bins = part.assign_bins(&data.x).unwrap();
        let tol = 1e-4 * dataset::sd(&data.y);
        for j in 1..=part.nbins() {
            let members: Vec<f64> = data
                .y
                .iter()
                .zip(&bins)
                .filter(|(_, b)| **b == j)
                .map(|(y, _)| *y)
                .collect();
            assert_eq!(members.len() % 2, 1, "test setup: odd bin counts");
            let med = dataset::median(&members);
            let fitted = bin_values(&fit, &part)[j - 1];
            assert!(
                (fitted - med).abs() <= tol,
                "bin {j}: fitted {fitted} vs median {med}"
            );
        }
    }

    #[test]
    fn logit_fit_reproduces_bin_proportions() {
        let data = uniform_data(600, 3, |x, rng| {
            if rng.gen::<f64>() < 0.2 + 0.6 * x {
                1.0
            } else {
                0.0
            }
        });
        let part = Partition::quantile_knots(&data.x, 4).unwrap();
        let basis = BasisSpec::new(0, 0, part.clone()).unwrap();
        let fit = fit(&data, &basis, &ModelSpec::logit()).unwrap();
        assert!(fit.converged);

        let bins = part.assign_bins(&data.x).unwrap();
        for j in 1..=part.nbins() {
            let members: Vec<f64> = data
                .y
                .iter()
                .zip(&bins)
                .filter(|(_, b)| **b == j)
                .map(|(y, _)| *y)
                .collect();
            let phat = dataset::mean(&members);
            let mid = 0.5 * (part.knots()[j - 1] + part.knots()[j]);
            let level = fit.predict_level(mid).unwrap();
            assert!(
                (level - phat).abs() <= 1e-8,
                "bin {j}: level {level} vs proportion {phat}"
            );
        }
    }

    #[test]
    fn empty_bin_is_a_hard_error() {
        let data = Dataset::from_xy(vec![0.0, 0.1, 0.9, 1.0], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let part = Partition::user_knots(vec![0.0, 0.3, 0.6, 1.0]).unwrap();
        let basis = BasisSpec::new(0, 0, part).unwrap();
        let err = fit(&data, &basis, &ModelSpec::least_squares()).unwrap_err();
        match err {
            Error::SingularSystem(msg) => assert!(msg.contains("empty")),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn linear_truth_reproduced_exactly() {
        let x: Vec<f64> = (0..120).map(|i| i as f64 / 119.0).collect();
        let y: Vec<f64> = x.iter().map(|&xi| 2.0 * xi).collect();
        let data = Dataset::from_xy(x, y).unwrap();
        let part = Partition::even_knots(&data.x, 4).unwrap();
        for s in [0usize, 1] {
            let basis = BasisSpec::new(1, s, part.clone()).unwrap();
            let fit = fit(&data, &basis, &ModelSpec::least_squares()).unwrap();
            for i in 0..=20 {
                let xx = i as f64 / 20.0;
                assert!((fit.predict_mu(xx, 0).unwrap() - 2.0 * xx).abs() <= 1e-8);
                assert!((fit.predict_mu(xx, 1).unwrap() - 2.0).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn derivative_prediction_zero_for_constant_fit() {
        let data = uniform_data(100, 4, |x, _| x);
        let part = Partition::even_knots(&data.x, 3).unwrap();
        let basis = BasisSpec::new(0, 0, part).unwrap();
        let f = fit(&data, &basis, &ModelSpec::least_squares()).unwrap();
        assert_eq!(f.predict_mu(0.4, 0).is_ok(), true);
        assert!(matches!(
            f.predict_marginal(0.4),
            Err(Error::InvalidDerivative { .. })
        ));
    }

    #[test]
    fn constant_control_matches_no_control_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..50).map(|_| rng.gen::<f64>()).collect();
        let y: Vec<f64> = x.iter().map(|&xi| xi + rng.gen_range(-0.2..0.2)).collect();
        let c = 3.7;
        let w = vec![vec![c; 50]];
        let with_w = Dataset::from_parts(
            y.clone(),
            x.clone(),
            w,
            vec!["c".into()],
            None,
        )
        .unwrap();
        let without = Dataset::from_xy(x, y).unwrap();
        let part = Partition::quantile_knots(&without.x, 3).unwrap();
        let basis = BasisSpec::new(0, 0, part).unwrap();
        let f1 = fit(&with_w, &basis, &ModelSpec::least_squares()).unwrap();
        let f0 = fit(&without, &basis, &ModelSpec::least_squares()).unwrap();
        assert_eq!(f1.dropped_w_cols, vec![0]);
        for i in 0..=10 {
            let xx = i as f64 / 10.0;
            let l1 = f1.predict_level(xx).unwrap();
            let l0 = f0.predict_level(xx).unwrap();
            assert!((l1 - l0).abs() <= 1e-10);
        }
    }

    #[test]
    fn logit_marginal_effect_chain_rule() {
        // θ̂ = 0 and μ̂⁽¹⁾ = 4  →  ζ̂ = 0.25·4 = 1
        let x: Vec<f64> = (0..80).map(|i| i as f64 / 79.0 - 0.5).collect();
        let data = {
            let mut rng = ChaCha8Rng::seed_from_u64(6);
            let y: Vec<f64> = x
                .iter()
                .map(|&xi| {
                    if rng.gen::<f64>() < crate::model::sigmoid(4.0 * xi) {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            Dataset::from_xy(x, y).unwrap()
        };
        let part = Partition::even_knots(&data.x, 3).unwrap();
        let basis = BasisSpec::new(1, 1, part).unwrap();
        let mut fitres = fit(&data, &basis, &ModelSpec::logit()).unwrap();
        // pin the coefficient vector to the exact linear index μ(x) = 4x so
        // the chain-rule value is deterministic
        let scale = (basis.partition().nbins() as f64).sqrt();
        let knots = basis.partition().knots().to_vec();
        fitres.beta = knots.iter().map(|&t| 4.0 * t / scale).collect();
        assert!((fitres.predict_mu(0.0, 0).unwrap()).abs() < 1e-12);
        assert!((fitres.predict_marginal(0.0).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn affine_equivariance_least_squares() {
        let data = uniform_data(300, 7, |x, rng| (3.0 * x).sin() + rng.gen_range(-0.5..0.5));
        let part = Partition::quantile_knots(&data.x, 6).unwrap();
        let basis = BasisSpec::new(1, 1, part).unwrap();
        let f0 = fit(&data, &basis, &ModelSpec::least_squares()).unwrap();

        let (a, b) = (2.5, -1.3);
        let data2 = Dataset::from_xy(
            data.x.clone(),
            data.y.iter().map(|y| a * y + b).collect(),
        )
        .unwrap();
        let f1 = fit(&data2, &basis, &ModelSpec::least_squares()).unwrap();
        for i in 0..=25 {
            let xx = i as f64 / 25.0;
            let l0 = f0.predict_level(xx).unwrap();
            let l1 = f1.predict_level(xx).unwrap();
            assert!((l1 - (a * l0 + b)).abs() <= 1e-10 * (1.0 + l1.abs()));
        }
    }

    #[test]
    fn objective_path_is_monotone() {
        let data = uniform_data(500, 8, |x, rng| {
            if rng.gen::<f64>() < crate::model::sigmoid(3.0 * x - 1.5) {
                1.0
            } else {
                0.0
            }
        });
        let part = Partition::quantile_knots(&data.x, 5).unwrap();
        let basis = BasisSpec::new(1, 1, part).unwrap();
        let f = fit(&data, &basis, &ModelSpec::logit()).unwrap();
        for w in f.objective_path.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn stationarity_at_convergence() {
        let data = uniform_data(400, 9, |x, rng| x * x + rng.gen_range(-0.3..0.3));
        let part = Partition::quantile_knots(&data.x, 4).unwrap();
        let basis = BasisSpec::new(1, 0, part).unwrap();
        for model in [
            ModelSpec::least_squares(),
            ModelSpec::huber(1.0).unwrap(),
        ] {
            let f = fit(&data, &basis, &model).unwrap();
            assert!(f.converged);
            let tol = 1e-6 * data.n() as f64 * dataset::sd(&data.y);
            assert!(f.grad_inf_norm <= tol, "{model:?}: {}", f.grad_inf_norm);
        }
    }

    #[test]
    fn huber_matches_bisection_oracle() {
        let data = uniform_data(300, 10, |x, rng| {
            x + rng.gen_range(-1.0f64..1.0).powi(3) * 2.0
        });
        let part = Partition::quantile_knots(&data.x, 3).unwrap();
        let basis = BasisSpec::new(0, 0, part.clone()).unwrap();
        let tau = 0.8;
        let model = ModelSpec::huber(tau).unwrap();
        let f = fit(&data, &basis, &model).unwrap();
        let bins = part.assign_bins(&data.x).unwrap();
        for j in 1..=part.nbins() {
            let members: Vec<f64> = data
                .y
                .iter()
                .zip(&bins)
                .filter(|(_, b)| **b == j)
                .map(|(y, _)| *y)
                .collect();
            // the Huber location solves Σψ(y−c)=0; ψ is monotone in c so
            // bisection is an independent oracle
            let psi_sum = |c: f64| -> f64 {
                members
                    .iter()
                    .map(|&y| model.psi(y, c).unwrap())
                    .sum::<f64>()
            };
            let (mut lo, mut hi) = (-10.0, 10.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if psi_sum(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let oracle = 0.5 * (lo + hi);
            let fitted = bin_values(&f, &part)[j - 1];
            assert!(
                (fitted - oracle).abs() <= 1e-6,
                "bin {j}: {fitted} vs {oracle}"
            );
        }
    }
}
