//! The PA-1SmT joint solver: block coordinate descent over the target
//! model parameters, soft memberships, the source-reconstruction
//! coefficients, the shared dictionary, and its coefficients.
//!
//! The solver only ever sees the source model `W_S`; source samples are
//! not part of the API. Knowledge flows through two channels: each
//! target's model columns reconstruct `W_S` (weighted by `beta`), and a
//! shared dictionary `D` couples all target models (weighted by `gamma`).
//! Both coefficient matrices carry a row-sparsity (L2,1) penalty.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::slmc::{self, Membership, SourceModel};

/// Solver hyperparameters and iteration controls.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct Hyperparams {
    /// Clustering-term weight.
    pub lambda: f64,
    /// Source-to-target transfer weight.
    pub beta: f64,
    /// Target-to-target (dictionary) transfer weight.
    pub gamma: f64,
    /// Row-sparsity weight on both coefficient matrices.
    pub eta: f64,
    /// Dictionary atom count r.
    pub dict_size: usize,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Relative objective-decrease threshold for the outer loop.
    pub tol_outer: f64,
    /// Relative change threshold for the reweighted inner loops.
    pub tol_inner: f64,
    /// Floor applied to coefficient row norms in the reweighting.
    pub eps_row: f64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            lambda: 1.0,
            beta: 50.0,
            gamma: 1.0,
            eta: 0.1,
            dict_size: 10,
            max_outer: 100,
            max_inner: 50,
            tol_outer: 1e-5,
            tol_inner: 1e-6,
            eps_row: 1e-8,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("lambda", self.lambda),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("eta", self.eta),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        if self.dict_size == 0 {
            return Err(Error::InvalidArgument("dict_size must be >= 1".into()));
        }
        if self.tol_outer <= 0.0 || self.tol_inner <= 0.0 || self.eps_row <= 0.0 {
            return Err(Error::InvalidArgument(
                "tolerances and eps_row must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One unlabeled target domain handed to [`fit`].
#[derive(Debug, Clone)]
pub struct TargetSpec {
    /// Samples as columns (d x n_t).
    pub data: Array2<f64>,
    /// Number of clusters C_T for this domain.
    pub categories: usize,
    /// Seed attached to the domain's identity; when `None` it derives
    /// from the solver seed and the target's position.
    pub init_seed: Option<u64>,
}

/// Per-target solver state.
#[derive(Debug, Clone)]
pub struct TargetState {
    /// Target model (d x C_T).
    pub w_t: Array2<f64>,
    /// Soft partition (C_T x n_t).
    pub membership: Membership,
    /// Coefficients reconstructing W_S over the columns of W_T (C_T x C_S).
    pub v: Array2<f64>,
    /// Coefficients reconstructing W_T over the dictionary (r x C_T).
    pub v_t: Array2<f64>,
}

/// Output of [`fit`].
#[derive(Debug, Clone)]
pub struct FitReport {
    pub states: Vec<TargetState>,
    /// Shared dictionary (d x r).
    pub dictionary: Array2<f64>,
    /// Joint objective value after each outer iteration.
    pub trace: Vec<f64>,
    /// Hard cluster assignments per target.
    pub assignments: Vec<Vec<usize>>,
    pub iterations: usize,
    pub converged: bool,
}

/// Sum of row Euclidean norms.
pub fn l21_norm(m: ArrayView2<'_, f64>) -> f64 {
    m.axis_iter(Axis(0))
        .map(|row| row.dot(&row).sqrt())
        .sum()
}

/// Joint objective over all targets.
pub fn objective(
    w_s: ArrayView2<'_, f64>,
    states: &[TargetState],
    dictionary: ArrayView2<'_, f64>,
    data: &[ArrayView2<'_, f64>],
    h: &Hyperparams,
) -> Result<f64> {
    if states.len() != data.len() {
        return Err(Error::Dimension(format!(
            "{} states for {} datasets",
            states.len(),
            data.len()
        )));
    }
    let mut total = 0.0;
    for (state, x) in states.iter().zip(data) {
        let w_norm: f64 = state.w_t.iter().map(|v| v * v).sum();
        let cluster = slmc::clustering_loss(state.w_t.view(), &state.membership, *x);
        let recon_s = &w_s.to_owned() - &state.w_t.dot(&state.v);
        let recon_t = &state.w_t - &dictionary.dot(&state.v_t);
        total += 0.5 * w_norm
            + 0.5 * h.lambda * cluster
            + 0.5 * h.beta * recon_s.iter().map(|v| v * v).sum::<f64>()
            + 0.5 * h.gamma * recon_t.iter().map(|v| v * v).sum::<f64>()
            + h.eta * (l21_norm(state.v.view()) + l21_norm(state.v_t.view()));
    }
    Ok(total)
}

/// Minimize the objective over one target's `W_T` with everything else
/// fixed. Stationarity is the Sylvester equation
/// `((1+gamma) I + lambda X diag(s) X^T) W + W (beta V V^T) = RHS`.
pub fn update_w_t(
    state: &TargetState,
    dictionary: ArrayView2<'_, f64>,
    w_s: ArrayView2<'_, f64>,
    x: ArrayView2<'_, f64>,
    h: &Hyperparams,
) -> Result<Array2<f64>> {
    let d = x.nrows();
    let usq = state.membership.matrix().mapv(|v| v * v);
    let s = usq.sum_axis(Axis(0));
    let mut xs = x.to_owned();
    for (j, mut col) in xs.axis_iter_mut(Axis(1)).enumerate() {
        col.mapv_inplace(|v| v * s[j]);
    }
    let mut a = xs.dot(&x.t());
    a.mapv_inplace(|v| v * h.lambda);
    for i in 0..d {
        a[[i, i]] += 1.0 + h.gamma;
    }
    let b = h.beta * state.v.dot(&state.v.t());
    let mut q = h.lambda * x.dot(&usq.t());
    if h.beta > 0.0 {
        q = q + h.beta * w_s.dot(&state.v.t());
    }
    if h.gamma > 0.0 {
        q = q + h.gamma * dictionary.dot(&state.v_t);
    }
    linalg::solve_sylvester(a.view(), b.view(), q.view())
}

/// Closed-form dictionary update
/// `D = (sum_j W_T^j V_T^j^T)(sum_j V_T^j V_T^j^T)^+`. Summation follows
/// the input order.
///
/// The denominator goes singular whenever the row-sparsity penalty
/// zeroes dictionary atoms out of every code, so the inverse is a
/// spectral pseudo-inverse: that still satisfies the normal equations
/// exactly (minimum-norm solution), keeping the update an exact block
/// minimizer.
pub fn update_d(states: &[TargetState]) -> Result<Array2<f64>> {
    let first = states
        .first()
        .ok_or_else(|| Error::InvalidArgument("no target states".into()))?;
    let d = first.w_t.nrows();
    let r = first.v_t.nrows();
    let mut num = Array2::zeros((d, r));
    let mut den = Array2::zeros((r, r));
    for state in states {
        num = num + state.w_t.dot(&state.v_t.t());
        den = den + state.v_t.dot(&state.v_t.t());
    }
    let (vals, vecs) = linalg::sym_eig(den.view())?;
    // collapsed code rows leave eigenvalues around 1e-12 of the top one;
    // the cutoff must sit above that noise band or the reciprocals
    // amplify float jitter into the dictionary
    let cutoff = vals.iter().cloned().fold(0.0, f64::max) * 1e-8;
    let mut projected = num.dot(&vecs);
    for (k, mut col) in projected.axis_iter_mut(Axis(1)).enumerate() {
        let inv = if vals[k] > cutoff { 1.0 / vals[k] } else { 0.0 };
        col.mapv_inplace(|v| v * inv);
    }
    Ok(projected.dot(&vecs.t()))
}

/// Iteratively reweighted solve shared by the two coefficient updates:
/// minimizes `0.5 * weight * ||target - basis * V||_F^2 + eta ||V||_{2,1}`
/// (row norms floored at `eps_row`).
fn reweighted_coefficients(
    basis: ArrayView2<'_, f64>,
    target: ArrayView2<'_, f64>,
    weight: f64,
    h: &Hyperparams,
) -> Result<Array2<f64>> {
    let rows = basis.ncols();
    let cols = target.ncols();
    if weight == 0.0 {
        return Ok(Array2::zeros((rows, cols)));
    }
    let gram = weight * basis.t().dot(&basis);
    let rhs = weight * basis.t().dot(&target);
    let mut weights = Array1::from_elem(rows, 1.0); // M starts as identity
    let mut v = Array2::zeros((rows, cols));
    for _ in 0..h.max_inner {
        let mut a = gram.clone();
        for i in 0..rows {
            a[[i, i]] += 2.0 * h.eta * weights[i];
        }
        let v_new = linalg::solve_spd_ridged(a.view(), rhs.view())?;
        for i in 0..rows {
            let norm = v_new.row(i).dot(&v_new.row(i)).sqrt();
            weights[i] = 1.0 / (2.0 * norm.max(h.eps_row));
        }
        let change = linalg::frob((&v_new - &v).view());
        let scale = linalg::frob(v.view()).max(1.0);
        v = v_new;
        if change <= h.tol_inner * scale {
            break;
        }
    }
    Ok(v)
}

/// Coefficients reconstructing `W_S` over the columns of `W_T`.
pub fn update_v(
    w_s: ArrayView2<'_, f64>,
    w_t: ArrayView2<'_, f64>,
    h: &Hyperparams,
) -> Result<Array2<f64>> {
    reweighted_coefficients(w_t, w_s, h.beta, h)
}

/// Coefficients reconstructing `W_T` over the dictionary.
pub fn update_v_t(
    dictionary: ArrayView2<'_, f64>,
    w_t: ArrayView2<'_, f64>,
    h: &Hyperparams,
) -> Result<Array2<f64>> {
    reweighted_coefficients(dictionary, w_t, h.gamma, h)
}

/// Deterministic per-target seed for targets that carry no explicit one.
pub fn derive_target_seed(base: u64, target_index: usize) -> u64 {
    // splitmix64 over (base, index) so nearby bases decorrelate
    let mut z = base
        .wrapping_add((target_index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Initial membership used by [`fit`] for a given per-target seed.
pub fn initial_membership(target_seed: u64, clusters: usize, samples: usize) -> Membership {
    let mut rng = ChaCha8Rng::seed_from_u64(target_seed);
    Membership::dirichlet(&mut rng, clusters, samples)
}

fn init_dictionary(d: usize, r: usize, seed: u64) -> Result<Array2<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD1C7_0000_0000_0001);
    let mut m = Array2::from_shape_fn((d, r), |_| rng.sample::<f64, _>(StandardNormal));
    if r <= d {
        linalg::orthonormalize_columns(&mut m)?;
    } else {
        // more atoms than dimensions: orthonormality is impossible,
        // settle for unit-norm columns
        for mut col in m.axis_iter_mut(Axis(1)) {
            let norm = col.dot(&col).sqrt();
            col.mapv_inplace(|v| v / norm);
        }
    }
    Ok(m)
}

/// Least-squares coefficients of `target` over `basis` columns, with a
/// ridge retry for rank-deficient bases.
fn least_squares_coefficients(
    basis: ArrayView2<'_, f64>,
    target: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    let gram = basis.t().dot(&basis);
    let rhs = basis.t().dot(&target);
    linalg::solve_spd_ridged(gram.view(), rhs.view())
}

/// Run the full PA-1SmT solver.
///
/// Only the source model crosses the domain boundary; target datasets
/// are unlabeled. Stops when the relative decrease of the joint
/// objective drops below `tol_outer` or after `max_outer` iterations.
pub fn fit(source: &SourceModel, targets: &[TargetSpec], h: &Hyperparams) -> Result<FitReport> {
    h.validate()?;
    if targets.is_empty() {
        return Err(Error::InvalidArgument("no target domains".into()));
    }
    let d = source.feature_dim();
    for (j, t) in targets.iter().enumerate() {
        if t.data.nrows() != d {
            return Err(Error::Dimension(format!(
                "target {j} has feature dim {}, source model has {d}",
                t.data.nrows()
            )));
        }
        if t.categories < 2 || t.categories > source.categories() {
            return Err(Error::InvalidArgument(format!(
                "target {j} has {} categories; need 2..={}",
                t.categories,
                source.categories()
            )));
        }
        if t.data.ncols() < t.categories {
            return Err(Error::InvalidArgument(format!(
                "target {j} has {} samples for {} clusters",
                t.data.ncols(),
                t.categories
            )));
        }
        linalg::check_finite(t.data.view(), &format!("target {j} data"))?;
    }
    let w_s = source.weights();

    let mut dictionary = init_dictionary(d, h.dict_size, h.seed)?;
    let mut states = Vec::with_capacity(targets.len());
    for (j, t) in targets.iter().enumerate() {
        let seed = t
            .init_seed
            .unwrap_or_else(|| derive_target_seed(h.seed, j));
        let membership = initial_membership(seed, t.categories, t.data.ncols());
        let w_t = slmc::slmc_w_solve(t.data.view(), &membership, h.lambda)?;
        let v = least_squares_coefficients(w_t.view(), w_s)?;
        let v_t = least_squares_coefficients(dictionary.view(), w_t.view())?;
        states.push(TargetState {
            w_t,
            membership,
            v,
            v_t,
        });
    }

    let data: Vec<ArrayView2<'_, f64>> = targets.iter().map(|t| t.data.view()).collect();
    let mut trace = Vec::new();
    let mut prev = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..h.max_outer {
        iterations += 1;
        for (state, x) in states.iter_mut().zip(&data) {
            state.w_t = update_w_t(state, dictionary.view(), w_s, *x, h)?;
            state.membership = slmc::update_membership(state.w_t.view(), *x)?;
            state.v = update_v(w_s, state.w_t.view(), h)?;
            state.v_t = update_v_t(dictionary.view(), state.w_t.view(), h)?;
        }
        if h.gamma > 0.0 {
            dictionary = update_d(&states)?;
        }
        let obj = objective(w_s, &states, dictionary.view(), &data, h)?;
        if !obj.is_finite() {
            return Err(Error::NonFinite("objective value".into()));
        }
        trace.push(obj);
        if prev.is_finite() && prev - obj <= h.tol_outer * prev.abs().max(1.0) {
            converged = true;
            break;
        }
        prev = obj;
    }

    let assignments = states
        .iter()
        .map(|s| slmc::hard_assign(&s.membership))
        .collect();
    Ok(FitReport {
        states,
        dictionary,
        trace,
        assignments,
        iterations,
        converged,
    })
}
