//! Ridge-regression readout with leave-one-out selection of the ridge
//! parameter.
//!
//! The readout minimises `Σ_m (y_m - a_m·w)² + r |w|²`. Leave-one-out errors
//! use the hat-matrix identity `e_(-m) = e_m / (1 - h_mm)` with
//! `H = A (AᵀA + rI)⁻¹ Aᵀ`, evaluated for every grid value from a single
//! eigendecomposition of `AᵀA`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Relative eigenvalue cut-off below which a direction of `AᵀA` counts as
/// null when no ridge penalty is applied.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedReadout {
    /// `N` reservoir weights followed by the direct-input weight.
    pub weights: Vec<f64>,
    pub ridge_param: f64,
    /// Mean squared training residual.
    pub training_error: f64,
    /// Mean squared leave-one-out residual.
    pub loo_error: f64,
}

impl TrainedReadout {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.weights.iter().zip(row).map(|(w, x)| w * x).sum()
    }

    /// A readout that always outputs zero.
    pub fn zeros(n_nodes: usize) -> Self {
        Self {
            weights: vec![0.0; n_nodes + 1],
            ridge_param: 0.0,
            training_error: 0.0,
            loo_error: 0.0,
        }
    }
}

/// 13 logarithmically spaced values from `1e-8` to `1e4`.
pub fn default_ridge_grid() -> Vec<f64> {
    (-8..=4).map(|e| 10f64.powi(e)).collect()
}

fn check_inputs(states: &DMatrix<f64>, targets: &[f64]) -> Result<()> {
    if states.nrows() != targets.len() {
        return Err(Error::invalid(
            "training data",
            format!(
                "{} design rows but {} targets",
                states.nrows(),
                targets.len()
            ),
        ));
    }
    if states.nrows() == 0 || states.ncols() == 0 {
        return Err(Error::invalid("training data", "empty design matrix"));
    }
    if states.iter().chain(targets).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("training data"));
    }
    if states.nrows() <= states.ncols() {
        log::warn!(
            "ridge regression with {} samples for {} weights",
            states.nrows(),
            states.ncols()
        );
    }
    Ok(())
}

fn check_ridge(r: f64) -> Result<()> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::invalid(
            "ridge parameter",
            format!("{r} must be finite and non-negative"),
        ));
    }
    Ok(())
}

/// Eigendecomposition of the Gram matrix shared by every ridge value.
struct GramSystem {
    eigvals: DVector<f64>,
    /// `A V`, so that `h_mm = Σ_k (AV)_mk² / (s_k + r)`.
    projected: DMatrix<f64>,
    /// `Vᵀ Aᵀ y`.
    rhs: DVector<f64>,
    cutoff: f64,
}

impl GramSystem {
    fn new(states: &DMatrix<f64>, targets: &DVector<f64>) -> Self {
        let gram = states.transpose() * states;
        let SymmetricEigen {
            eigenvalues,
            eigenvectors,
        } = SymmetricEigen::new(gram);
        let projected = states * &eigenvectors;
        let rhs = eigenvectors.transpose() * (states.transpose() * targets);
        let max_eig = eigenvalues.iter().cloned().fold(0.0, f64::max);
        Self {
            eigvals: eigenvalues,
            projected,
            rhs,
            cutoff: RANK_TOL * max_eig.max(f64::MIN_POSITIVE),
        }
    }

    /// `1 / (s_k + r)` or zero for null directions.
    fn inverse_spectrum(&self, r: f64) -> DVector<f64> {
        self.eigvals
            .map(|s| if s + r > self.cutoff { 1.0 / (s + r) } else { 0.0 })
    }

    fn rank_deficient(&self) -> bool {
        self.eigvals.iter().any(|&s| s <= self.cutoff)
    }

    fn loo_error(&self, r: f64, targets: &DVector<f64>) -> f64 {
        let inv = self.inverse_spectrum(r);
        let coef = self.rhs.component_mul(&inv);
        let fitted = &self.projected * &coef;
        let m = targets.len();
        let mut total = 0.0;
        for i in 0..m {
            let h: f64 = (0..inv.len())
                .map(|k| self.projected[(i, k)].powi(2) * inv[k])
                .sum();
            let resid = targets[i] - fitted[i];
            let denom = 1.0 - h;
            if denom <= 1e-12 {
                return f64::INFINITY;
            }
            total += (resid / denom).powi(2);
        }
        total / m as f64
    }
}

/// Fit the ridge readout at a fixed `r`.
///
/// For `r > 0` the normal equations are solved by Cholesky factorisation. At
/// `r = 0` a rank-deficient design yields the minimum-norm least-squares
/// solution and a warning.
pub fn ridge_train(states: &DMatrix<f64>, targets: &[f64], r: f64) -> Result<TrainedReadout> {
    check_inputs(states, targets)?;
    check_ridge(r)?;
    let y = DVector::from_column_slice(targets);
    let system = GramSystem::new(states, &y);
    let weights = solve(states, &y, r, &system)?;
    let fitted = states * &weights;
    let training_error = (&y - fitted).norm_squared() / y.len() as f64;
    Ok(TrainedReadout {
        weights: weights.iter().copied().collect(),
        ridge_param: r,
        training_error,
        loo_error: system.loo_error(r, &y),
    })
}

fn solve(
    states: &DMatrix<f64>,
    y: &DVector<f64>,
    r: f64,
    system: &GramSystem,
) -> Result<DVector<f64>> {
    let p = states.ncols();
    if r > 0.0 {
        let normal = states.transpose() * states + DMatrix::identity(p, p) * r;
        if let Some(chol) = normal.cholesky() {
            return Ok(chol.solve(&(states.transpose() * y)));
        }
    }
    if system.rank_deficient() {
        log::warn!("singular normal matrix at r = {r}; using the minimum-norm solution");
    }
    let svd = states.clone().svd(true, true);
    let tol = RANK_TOL.sqrt() * svd.singular_values.max();
    svd.solve(y, tol)
        .map_err(|e| Error::invalid("ridge regression", e.to_string()))
}

/// Train at every grid value and keep the one with the smallest
/// leave-one-out error (ties go to the smaller `r`).
pub fn select_ridge_loo(
    states: &DMatrix<f64>,
    targets: &[f64],
    grid: &[f64],
) -> Result<TrainedReadout> {
    if grid.is_empty() {
        return Err(Error::invalid("ridge grid", "grid is empty"));
    }
    for &r in grid {
        check_ridge(r)?;
    }
    check_inputs(states, targets)?;
    let y = DVector::from_column_slice(targets);
    let system = GramSystem::new(states, &y);
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best = (f64::INFINITY, sorted[0]);
    for &r in &sorted {
        let e = system.loo_error(r, &y);
        if e < best.0 {
            best = (e, r);
        }
    }
    let (loo, r) = best;
    let weights = solve(states, &y, r, &system)?;
    let fitted = states * &weights;
    Ok(TrainedReadout {
        weights: weights.iter().copied().collect(),
        ridge_param: r,
        training_error: (&y - fitted).norm_squared() / y.len() as f64,
        loo_error: loo,
    })
}

/// Objective `Σ (y - Aw)² + r |w|²`.
pub fn ridge_objective(states: &DMatrix<f64>, targets: &[f64], weights: &[f64], r: f64) -> f64 {
    let w = DVector::from_column_slice(weights);
    let y = DVector::from_column_slice(targets);
    (y - states * &w).norm_squared() + r * w.norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(m: usize, p: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(m, p, |_, _| rng.gen_range(-1.0..1.0));
        let y = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        (a, y)
    }

    /// Explicit leave-one-out: refit without each row in turn.
    fn brute_force_loo(a: &DMatrix<f64>, y: &[f64], r: f64) -> f64 {
        let m = a.nrows();
        let mut total = 0.0;
        for i in 0..m {
            let rows: Vec<usize> = (0..m).filter(|&j| j != i).collect();
            let sub = a.select_rows(&rows);
            let sub_y: Vec<f64> = rows.iter().map(|&j| y[j]).collect();
            let w = ridge_train(&sub, &sub_y, r).unwrap().weights;
            let pred: f64 = a.row(i).iter().zip(&w).map(|(x, w)| x * w).sum();
            total += (y[i] - pred).powi(2);
        }
        total / m as f64
    }

    /// Gradient-free compass search on the ridge objective.
    fn compass_minimise(a: &DMatrix<f64>, y: &[f64], r: f64) -> Vec<f64> {
        let p = a.ncols();
        let mut w = vec![0.0; p];
        let mut best = ridge_objective(a, y, &w, r);
        let mut step = 1.0;
        while step > 1e-10 {
            let mut improved = false;
            for k in 0..p {
                for dir in [1.0, -1.0] {
                    let mut trial = w.clone();
                    trial[k] += dir * step;
                    let f = ridge_objective(a, y, &trial, r);
                    if f < best {
                        best = f;
                        w = trial;
                        improved = true;
                    }
                }
            }
            if !improved {
                step /= 2.0;
            }
        }
        w
    }

    #[test]
    fn zero_targets_give_zero_weights() {
        let (a, _) = random_instance(10, 4, 1);
        let out = ridge_train(&a, &[0.0; 10], 1.0).unwrap();
        assert!(out.weights.iter().all(|w| w.abs() < 1e-15));
    }

    #[test]
    fn recovers_indicator_column() {
        let (a, _) = random_instance(12, 5, 2);
        let y: Vec<f64> = a.column(3).iter().copied().collect();
        let out = ridge_train(&a, &y, 0.0).unwrap();
        for (k, w) in out.weights.iter().enumerate() {
            let expected = if k == 3 { 1.0 } else { 0.0 };
            assert!((w - expected).abs() < 1e-10, "w[{k}] = {w}");
        }
        assert!(out.training_error < 1e-20);
    }

    #[test]
    fn matches_gradient_free_minimiser() {
        let (a, y) = random_instance(5, 3, 3);
        for r in [0.0, 0.1, 2.0] {
            let closed = ridge_train(&a, &y, r).unwrap().weights;
            let searched = compass_minimise(&a, &y, r);
            for (c, s) in closed.iter().zip(&searched) {
                assert!((c - s).abs() < 1e-6, "r={r}: {c} vs {s}");
            }
        }
    }

    #[test]
    fn closed_form_loo_matches_refits() {
        let (a, y) = random_instance(20, 5, 4);
        for r in [1e-6, 0.01, 1.0, 100.0] {
            let closed = ridge_train(&a, &y, r).unwrap().loo_error;
            let explicit = brute_force_loo(&a, &y, r);
            assert!(
                ((closed - explicit) / explicit).abs() < 1e-8,
                "r={r}: {closed} vs {explicit}"
            );
        }
    }

    #[test]
    fn noiseless_fit_selects_smallest_ridge() {
        let (a, _) = random_instance(30, 4, 5);
        let truth = [0.3, -1.2, 0.7, 2.0];
        let y: Vec<f64> = (0..30)
            .map(|i| (0..4).map(|k| a[(i, k)] * truth[k]).sum())
            .collect();
        let out = select_ridge_loo(&a, &y, &default_ridge_grid()).unwrap();
        assert_eq!(out.ridge_param, 1e-8);
    }

    #[test]
    fn single_grid_value_is_used() {
        let (a, y) = random_instance(15, 3, 6);
        let out = select_ridge_loo(&a, &y, &[0.1]).unwrap();
        assert_eq!(out.ridge_param, 0.1);
    }

    #[test]
    fn rejects_empty_grid_and_bad_ridge() {
        let (a, y) = random_instance(15, 3, 6);
        assert!(select_ridge_loo(&a, &y, &[]).is_err());
        assert!(ridge_train(&a, &y, -1.0).is_err());
        assert!(ridge_train(&a, &y[..3], 1.0).is_err());
    }

    #[test]
    fn rank_deficient_design_gives_min_norm() {
        // duplicated column: min-norm solution splits weight evenly
        let (base, _) = random_instance(10, 2, 7);
        let a = DMatrix::from_fn(10, 3, |i, j| base[(i, j.min(1))]);
        let y: Vec<f64> = (0..10).map(|i| 2.0 * base[(i, 1)]).collect();
        let out = ridge_train(&a, &y, 0.0).unwrap();
        assert!((out.weights[1] - 1.0).abs() < 1e-9);
        assert!((out.weights[2] - 1.0).abs() < 1e-9);
        assert!(out.weights[0].abs() < 1e-9);
    }

    #[test]
    fn perturbations_never_improve_objective() {
        let (a, y) = random_instance(20, 6, 8);
        let r = 0.05;
        let w = ridge_train(&a, &y, r).unwrap().weights;
        let base = ridge_objective(&a, &y, &w, r);
        for k in 0..w.len() {
            for d in [1e-4, -1e-4] {
                let mut p = w.clone();
                p[k] += d;
                assert!(ridge_objective(&a, &y, &p, r) >= base);
            }
        }
    }
}
