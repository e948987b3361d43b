//! Reference-prior ensemble weights.
//!
//! For one LR image `x` and resolver outputs `f_i(x)`, the weights solve
//!
//! ```text
//! min_w ||x - Y w||^2 + lambda ||w - w_ref||^2   s.t.  1^T w = 1
//! ```
//!
//! where column `i` of `Y` is `H f_i(x)`. Stacking `x' = [x; sqrt(lambda) w_ref]`
//! and `Y' = [Y; sqrt(lambda) I]` turns this into a sum-to-one constrained
//! least-squares problem. Under the constraint `x' - Y' w = (x' 1^T - Y') w`, so
//! with `G = (x' 1^T - Y')^T (x' 1^T - Y')` the optimum is
//! `w* = G^-1 1 / (1^T G^-1 1)`.
//!
//! Weights are not constrained to be non-negative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::linalg::{dot, norm1, norm2, Lu};
use crate::prior::ReferenceWeights;
use crate::resample::{apply_h, DegradationModel};
use crate::resolvers::ResolverSet;

/// Default prior strength.
pub const DEFAULT_LAMBDA: f64 = 0.8;

/// Below this reciprocal condition number the Gram matrix is regularized.
pub const RCOND_THRESHOLD: f64 = 1e-12;

/// Diagonal loading, relative to `trace(G) / N`.
pub const REGULARIZATION_FACTOR: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleProblem {
    x: Vec<f64>,
    /// `Y` by columns: `columns[i] = H f_i(x)` flattened.
    columns: Vec<Vec<f64>>,
    w_ref: Vec<f64>,
    lambda: f64,
}

impl EnsembleProblem {
    pub fn new(x: Vec<f64>, columns: Vec<Vec<f64>>, w_ref: Vec<f64>, lambda: f64) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidParameter("ensemble needs at least one resolver".into()));
        }
        if columns.len() != w_ref.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} resolver outputs but {} prior weights",
                columns.len(),
                w_ref.len()
            )));
        }
        if let Some(c) = columns.iter().find(|c| c.len() != x.len()) {
            return Err(Error::DimensionMismatch(format!(
                "column of length {} for an LR image of {} samples",
                c.len(),
                x.len()
            )));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        Ok(EnsembleProblem {
            x,
            columns,
            w_ref,
            lambda,
        })
    }

    /// Build `x` and `Y` from an LR image and the resolvers' HR outputs.
    /// `Y` uses the same `H` that generates LR images.
    pub fn assemble(lr: &Image, outputs: &[Image], model: &DegradationModel, w_ref: &[f64], lambda: f64) -> Result<Self> {
        let s = model.scale as usize;
        let expected = (lr.width() * s, lr.height() * s);
        let mut columns = Vec::with_capacity(outputs.len());
        for (i, out) in outputs.iter().enumerate() {
            if out.dims() != expected || out.channels() != lr.channels() {
                return Err(Error::DimensionMismatch(format!(
                    "output {i} is {}x{}x{}, expected {}x{}x{}",
                    out.width(),
                    out.height(),
                    out.channels(),
                    expected.0,
                    expected.1,
                    lr.channels()
                )));
            }
            columns.push(apply_h(out, model)?.into_data());
        }
        EnsembleProblem::new(lr.data().to_vec(), columns, w_ref.to_vec(), lambda)
    }

    pub fn n(&self) -> usize {
        self.columns.len()
    }

    /// Number of LR samples.
    pub fn m(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn w_ref(&self) -> &[f64] {
        &self.w_ref
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `(x', columns of Y')` with the `sqrt(lambda)` rows appended.
    pub fn augmented(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let root = self.lambda.sqrt();
        let mut x = self.x.clone();
        x.extend(self.w_ref.iter().map(|w| root * w));
        let n = self.n();
        let cols = self
            .columns
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let mut col = c.clone();
                col.extend((0..n).map(|k| if k == i { root } else { 0.0 }));
                col
            })
            .collect();
        (x, cols)
    }

    /// `G = (x' 1^T - Y')^T (x' 1^T - Y')`, row-major `N x N`.
    pub fn gram(&self) -> Vec<f64> {
        let (x, cols) = self.augmented();
        let diffs: Vec<Vec<f64>> = cols
            .iter()
            .map(|c| x.iter().zip(c).map(|(a, b)| a - b).collect())
            .collect();
        let n = self.n();
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = dot(&diffs[i], &diffs[j]);
                g[i * n + j] = v;
                g[j * n + i] = v;
            }
        }
        g
    }

    /// `Y w` (without the prior rows).
    pub fn predict(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m()];
        for (c, &wi) in self.columns.iter().zip(w) {
            for (o, v) in out.iter_mut().zip(c) {
                *o += wi * v;
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSolution {
    pub weights: Vec<f64>,
    /// `||x - Y w*||_2`.
    pub residual_recon: f64,
    /// `||w* - w_ref||_2`.
    pub residual_prior: f64,
    /// 1-norm condition number of the (possibly regularized) Gram matrix.
    pub gram_condition_estimate: f64,
    /// `epsilon` added to the Gram diagonal, 0 when none was needed.
    pub regularization_added: f64,
    /// The Gram matrix stayed singular and `w_ref` was returned instead.
    pub fallback_to_prior: bool,
}

fn attempt(g: &[f64], n: usize) -> Option<(Vec<f64>, f64)> {
    let lu = Lu::factor(g, n)?;
    let rcond = 1.0 / (norm1(g, n) * norm1(&lu.inverse(), n));
    let z = lu.solve(&vec![1.0; n]);
    let total: f64 = z.iter().sum();
    if !rcond.is_finite() || !total.is_finite() || total == 0.0 {
        return None;
    }
    Some((z.into_iter().map(|v| v / total).collect(), rcond))
}

/// Solve for the ensemble weights. Never fails: a Gram matrix that stays
/// singular after diagonal loading yields `w_ref` with the fallback flag.
pub fn solve_weights(problem: &EnsembleProblem) -> WeightSolution {
    let n = problem.n();
    let mut g = problem.gram();
    let mut eps = 0.0;
    let mut solved = attempt(&g, n).filter(|(_, rcond)| *rcond >= RCOND_THRESHOLD);
    if solved.is_none() {
        let trace: f64 = (0..n).map(|i| g[i * n + i]).sum();
        eps = REGULARIZATION_FACTOR * trace / n as f64;
        if eps > 0.0 && eps.is_finite() {
            for i in 0..n {
                g[i * n + i] += eps;
            }
            solved = attempt(&g, n).filter(|(_, rcond)| *rcond >= f64::EPSILON);
        }
    }
    let (weights, condition, fallback) = match solved {
        Some((w, rcond)) => (w, 1.0 / rcond, false),
        None => (problem.w_ref.clone(), f64::INFINITY, true),
    };
    let resid: Vec<f64> = problem
        .x
        .iter()
        .zip(problem.predict(&weights))
        .map(|(a, b)| a - b)
        .collect();
    let prior_gap: Vec<f64> = weights.iter().zip(&problem.w_ref).map(|(a, b)| a - b).collect();
    WeightSolution {
        residual_recon: norm2(&resid),
        residual_prior: norm2(&prior_gap),
        gram_condition_estimate: condition,
        regularization_added: if fallback { 0.0 } else { eps },
        fallback_to_prior: fallback,
        weights,
    }
}

/// `sum_i w_i f_i(x)` without clamping.
pub fn weighted_sum(outputs: &[Image], weights: &[f64]) -> Result<Image> {
    let first = outputs
        .first()
        .ok_or_else(|| Error::InvalidParameter("nothing to combine".into()))?;
    if outputs.len() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} outputs but {} weights",
            outputs.len(),
            weights.len()
        )));
    }
    let mut acc = vec![0.0; first.data().len()];
    for (out, &w) in outputs.iter().zip(weights) {
        first.ensure_same_shape(out)?;
        for (a, v) in acc.iter_mut().zip(out.data()) {
            *a += w * v;
        }
    }
    Image::new(first.width(), first.height(), first.channels(), acc)
}

/// Weighted combination clamped to `[0, 1]`. Weights must sum to one
/// within `1e-8`.
pub fn combine(outputs: &[Image], weights: &[f64]) -> Result<Image> {
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidParameter(format!("weights sum to {total}, not 1")));
    }
    Ok(weighted_sum(outputs, weights)?.clamped())
}

#[derive(Clone, Debug)]
pub struct EnsembleSolution {
    pub solution: WeightSolution,
    pub hr: Image,
}

impl EnsembleSolution {
    pub fn weights(&self) -> &[f64] {
        &self.solution.weights
    }
}

/// Solve and combine for precomputed resolver outputs.
pub fn ensemble_outputs(
    lr: &Image,
    outputs: &[Image],
    model: &DegradationModel,
    w_ref: &[f64],
    lambda: f64,
) -> Result<EnsembleSolution> {
    let problem = EnsembleProblem::assemble(lr, outputs, model, w_ref, lambda)?;
    let solution = solve_weights(&problem);
    let hr = combine(outputs, &solution.weights)?;
    Ok(EnsembleSolution { solution, hr })
}

/// Full pipeline for one LR image: run every resolver, solve, combine.
pub fn super_resolve(
    lr: &Image,
    resolvers: &ResolverSet,
    model: &DegradationModel,
    w_ref: &ReferenceWeights,
    lambda: f64,
    stem: Option<&str>,
) -> Result<EnsembleSolution> {
    if w_ref.resolver_ids != resolvers.ids() {
        return Err(Error::Config(format!(
            "prior was learned for resolvers {:?} but the set is {:?}",
            w_ref.resolver_ids,
            resolvers.ids()
        )));
    }
    let outputs = resolvers.run_all(lr, model.scale, stem)?;
    ensemble_outputs(lr, &outputs, model, &w_ref.weights, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(cols: Vec<Vec<f64>>, x: Vec<f64>, lambda: f64) -> EnsembleProblem {
        let n = cols.len();
        EnsembleProblem::new(x, cols, vec![1.0 / n as f64; n], lambda).unwrap()
    }

    #[test]
    fn single_resolver_gets_weight_one() {
        let p = problem(vec![vec![0.2, 0.4, 0.9]], vec![0.1, 0.5, 0.7], 0.0);
        let s = solve_weights(&p);
        assert_eq!(s.weights, [1.0]);
    }

    #[test]
    fn exact_column_dominates() {
        let x = vec![0.1, 0.5, 0.7, 0.3];
        let p = problem(vec![vec![0.2, 0.4, 0.9, 0.3], x.clone(), vec![0.0, 0.6, 0.6, 0.1]], x, 0.0);
        let s = solve_weights(&p);
        assert!(s.regularization_added > 0.0);
        assert!(s.weights[1] > 0.999, "{:?}", s.weights);
    }

    #[test]
    fn all_columns_equal_to_x_falls_back() {
        let x = vec![0.1, 0.5, 0.7];
        let p = EnsembleProblem::new(x.clone(), vec![x.clone(), x.clone()], vec![0.3, 0.7], 0.0).unwrap();
        let s = solve_weights(&p);
        assert!(s.fallback_to_prior);
        assert_eq!(s.weights, [0.3, 0.7]);
    }

    #[test]
    fn identical_columns_regularize_to_uniform() {
        let p = problem(vec![vec![0.2, 0.4, 0.9]; 3], vec![0.1, 0.5, 0.7], 0.0);
        let s = solve_weights(&p);
        assert!(!s.fallback_to_prior);
        assert!(s.regularization_added > 0.0);
        for w in &s.weights {
            assert!((w - 1.0 / 3.0).abs() < 1e-6);
        }
    }

    #[test]
    fn validation() {
        assert!(EnsembleProblem::new(vec![0.0; 3], vec![], vec![], 0.0).is_err());
        assert!(EnsembleProblem::new(vec![0.0; 3], vec![vec![0.0; 2]], vec![1.0], 0.0).is_err());
        assert!(EnsembleProblem::new(vec![0.0; 3], vec![vec![0.0; 3]], vec![0.5, 0.5], 0.0).is_err());
        assert!(EnsembleProblem::new(vec![0.0; 3], vec![vec![0.0; 3]], vec![1.0], -1.0).is_err());
    }

    #[test]
    fn combine_cases() {
        let a = Image::new(2, 1, 1, vec![0.2, 0.9]).unwrap();
        let b = Image::new(2, 1, 1, vec![0.6, 0.1]).unwrap();
        let outs = [a.clone(), b];
        assert_eq!(combine(&outs, &[1.0, 0.0]).unwrap(), a);
        let same = [a.clone(), a.clone()];
        let c = combine(&same, &[0.3, 0.7]).unwrap();
        for (p, q) in c.data().iter().zip(a.data()) {
            assert!((p - q).abs() < 1e-15);
        }
        // 1.2 * 0.9 - 0.2 * 0.1 = 1.06 before clamping
        let raw = weighted_sum(&outs, &[1.2, -0.2]).unwrap();
        assert!((raw.data()[1] - 1.06).abs() < 1e-12);
        let clamped = combine(&outs, &[1.2, -0.2]).unwrap();
        assert_eq!(clamped.data()[1], 1.0);
        assert!((clamped.data()[0] - 0.12).abs() < 1e-12);
        assert!(combine(&outs, &[0.5, 0.6]).is_err());
    }
}
