//! Soft large-margin clustering (SLMC): clustering in label space with a
//! linear decision function `f(x) = W^T x`, squared soft memberships, and
//! one-hot cluster encodings. Also trains the source model that the
//! adaptation solver consumes.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;

/// A sample counts as an exact hit on a cluster encoding when its decision
/// value is within this distance of the one-hot code.
const EXACT_HIT_TOL: f64 = 1e-12;

/// Column-stochastic soft assignment of samples to clusters (C x n).
#[derive(Debug, Clone, PartialEq)]
pub struct Membership(Array2<f64>);

impl Membership {
    /// Validate and wrap a C x n matrix: entries in [0, 1], columns
    /// summing to 1 within 1e-9.
    pub fn new(u: Array2<f64>) -> Result<Self> {
        for (j, col) in u.axis_iter(Axis(1)).enumerate() {
            let sum: f64 = col.sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "membership column {j} sums to {sum}, expected 1"
                )));
            }
            if col.iter().any(|&v| !(0.0..=1.0 + 1e-12).contains(&v)) {
                return Err(Error::InvalidArgument(format!(
                    "membership column {j} has entries outside [0, 1]"
                )));
            }
        }
        Ok(Membership(u))
    }

    /// Uniform 1/C memberships.
    pub fn uniform(clusters: usize, samples: usize) -> Self {
        Membership(Array2::from_elem(
            (clusters, samples),
            1.0 / clusters as f64,
        ))
    }

    /// Each column drawn from a symmetric Dirichlet(1) via normalized
    /// exponentials.
    pub fn dirichlet(rng: &mut impl Rng, clusters: usize, samples: usize) -> Self {
        let mut u = Array2::zeros((clusters, samples));
        for j in 0..samples {
            let mut sum = 0.0;
            for i in 0..clusters {
                let e: f64 = -(1.0 - rng.random::<f64>()).ln();
                u[[i, j]] = e;
                sum += e;
            }
            for i in 0..clusters {
                u[[i, j]] /= sum;
            }
        }
        Membership(u)
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn clusters(&self) -> usize {
        self.0.nrows()
    }

    pub fn samples(&self) -> usize {
        self.0.ncols()
    }
}

/// Linear source model: `W_S` (d x C_S) and its category count. Class id
/// `c` maps to the `c`-th one-hot encoding column.
#[derive(Debug, Clone)]
pub struct SourceModel {
    w: Array2<f64>,
    categories: usize,
}

impl SourceModel {
    pub fn new(w: Array2<f64>, categories: usize) -> Result<Self> {
        if w.ncols() != categories {
            return Err(Error::Dimension(format!(
                "W_S has {} columns but {categories} categories",
                w.ncols()
            )));
        }
        linalg::check_finite(w.view(), "source model")?;
        Ok(SourceModel { w, categories })
    }

    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.w.view()
    }

    pub fn feature_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn categories(&self) -> usize {
        self.categories
    }
}

/// Squared distances from each decision value `W^T x_i` to each one-hot
/// encoding: entry (k, i) = ||W^T x_i - l_k||^2.
fn encoding_distances(w: ArrayView2<'_, f64>, x: ArrayView2<'_, f64>) -> Array2<f64> {
    let f = w.t().dot(&x); // C x n
    let c = f.nrows();
    let n = f.ncols();
    let mut d2 = Array2::zeros((c, n));
    for i in 0..n {
        let fi = f.column(i);
        let base: f64 = fi.dot(&fi);
        for k in 0..c {
            // ||f - l_k||^2 = ||f||^2 - 2 f_k + 1
            d2[[k, i]] = (base - 2.0 * fi[k] + 1.0).max(0.0);
        }
    }
    d2
}

/// Closed-form membership update: `u_ki` proportional to the inverse
/// squared distance of `W^T x_i` to encoding `l_k`. Exact hits (distance
/// below 1e-12) split the mass uniformly over the hit clusters.
pub fn update_membership(w: ArrayView2<'_, f64>, x: ArrayView2<'_, f64>) -> Result<Membership> {
    if w.nrows() != x.nrows() {
        return Err(Error::Dimension(format!(
            "W has {} rows, X has {} rows",
            w.nrows(),
            x.nrows()
        )));
    }
    let d2 = encoding_distances(w, x);
    let (c, n) = d2.dim();
    let mut u = Array2::zeros((c, n));
    for i in 0..n {
        let hits: Vec<usize> = (0..c)
            .filter(|&k| d2[[k, i]].sqrt() <= EXACT_HIT_TOL)
            .collect();
        if !hits.is_empty() {
            let mass = 1.0 / hits.len() as f64;
            for k in hits {
                u[[k, i]] = mass;
            }
        } else {
            let inv: Vec<f64> = (0..c).map(|k| 1.0 / d2[[k, i]]).collect();
            let sum: f64 = inv.iter().sum();
            for k in 0..c {
                u[[k, i]] = inv[k] / sum;
            }
        }
    }
    Membership::new(u)
}

/// The membership-weighted squared-distance term
/// `sum_k sum_i u_ki^2 ||W^T x_i - l_k||^2`.
pub fn clustering_loss(
    w: ArrayView2<'_, f64>,
    u: &Membership,
    x: ArrayView2<'_, f64>,
) -> f64 {
    let d2 = encoding_distances(w, x);
    let um = u.matrix();
    d2.iter().zip(um.iter()).map(|(d, u)| u * u * d).sum()
}

/// SLMC objective: `0.5 ||W||_F^2 + (lambda/2) * clustering_loss`.
pub fn slmc_objective(
    w: ArrayView2<'_, f64>,
    u: &Membership,
    x: ArrayView2<'_, f64>,
    lambda: f64,
) -> f64 {
    let wnorm: f64 = w.iter().map(|v| v * v).sum();
    0.5 * wnorm + 0.5 * lambda * clustering_loss(w, u, x)
}

/// Minimize the SLMC objective over `W` for fixed memberships:
/// `(I + lambda * X diag(s) X^T) W = lambda * X (U.*U)^T` where
/// `s_i = sum_k u_ki^2`.
pub fn slmc_w_solve(
    x: ArrayView2<'_, f64>,
    u: &Membership,
    lambda: f64,
) -> Result<Array2<f64>> {
    let d = x.nrows();
    let n = x.ncols();
    if u.samples() != n {
        return Err(Error::Dimension(format!(
            "membership has {} samples, data has {n}",
            u.samples()
        )));
    }
    let usq = u.matrix().mapv(|v| v * v); // C x n
    let s = usq.sum_axis(Axis(0)); // n
    let mut xs = x.to_owned();
    for (j, mut col) in xs.axis_iter_mut(Axis(1)).enumerate() {
        col.mapv_inplace(|v| v * s[j]);
    }
    let mut a = xs.dot(&x.t());
    a.mapv_inplace(|v| v * lambda);
    for i in 0..d {
        a[[i, i]] += 1.0;
    }
    let rhs = lambda * x.dot(&usq.t()); // d x C
    linalg::solve_spd(a.view(), rhs.view())
}

/// Train the source model: ridge regression of one-hot label codes,
/// i.e. the SLMC objective with memberships frozen at the true labels.
pub fn train_source_model(
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    categories: usize,
    lambda: f64,
) -> Result<SourceModel> {
    let n = x.ncols();
    if n == 0 {
        return Err(Error::InvalidArgument("no source samples".into()));
    }
    if labels.len() != n {
        return Err(Error::Dimension(format!(
            "{} labels for {n} samples",
            labels.len()
        )));
    }
    if lambda < 0.0 {
        return Err(Error::InvalidArgument("lambda must be nonnegative".into()));
    }
    let mut counts = vec![0usize; categories];
    for &y in labels {
        if y >= categories {
            return Err(Error::InvalidArgument(format!(
                "label {y} out of range for {categories} categories"
            )));
        }
        counts[y] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::InvalidArgument(format!(
            "source class {empty} has no samples"
        )));
    }
    let d = x.nrows();
    let mut a = x.dot(&x.t());
    a.mapv_inplace(|v| v * lambda);
    for i in 0..d {
        a[[i, i]] += 1.0;
    }
    // X L^T with L the one-hot label matrix
    let mut rhs = Array2::zeros((d, categories));
    for (i, &y) in labels.iter().enumerate() {
        let col = x.column(i);
        for r in 0..d {
            rhs[[r, y]] += lambda * col[r];
        }
    }
    let w = linalg::solve_spd(a.view(), rhs.view())?;
    SourceModel::new(w, categories)
}

/// Result of an SLMC fit.
#[derive(Debug, Clone)]
pub struct SlmcFit {
    pub w: Array2<f64>,
    pub membership: Membership,
    /// Objective value after each alternation.
    pub trace: Vec<f64>,
}

/// Alternate the W-solve and the membership update until the relative
/// objective decrease drops below `tol` or `max_iter` is reached.
pub fn slmc_fit(
    x: ArrayView2<'_, f64>,
    clusters: usize,
    lambda: f64,
    init: Membership,
    max_iter: usize,
    tol: f64,
) -> Result<SlmcFit> {
    let n = x.ncols();
    if clusters < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 clusters, got {clusters}"
        )));
    }
    if n < clusters {
        return Err(Error::InvalidArgument(format!(
            "{n} samples for {clusters} clusters"
        )));
    }
    if init.clusters() != clusters || init.samples() != n {
        return Err(Error::Dimension(format!(
            "init membership is {}x{}, expected {clusters}x{n}",
            init.clusters(),
            init.samples()
        )));
    }
    linalg::check_finite(x, "slmc input")?;
    let mut u = init;
    let mut w = Array2::zeros((x.nrows(), clusters));
    let mut trace = Vec::new();
    let mut prev = f64::INFINITY;
    for _ in 0..max_iter {
        w = slmc_w_solve(x, &u, lambda)?;
        u = update_membership(w.view(), x)?;
        let obj = slmc_objective(w.view(), &u, x, lambda);
        trace.push(obj);
        if prev.is_finite() && prev - obj <= tol * prev.abs().max(1.0) {
            break;
        }
        prev = obj;
    }
    Ok(SlmcFit {
        w,
        membership: u,
        trace,
    })
}

/// Argmax over clusters per sample; ties go to the lowest cluster index.
pub fn hard_assign(u: &Membership) -> Vec<usize> {
    let m = u.matrix();
    (0..m.ncols())
        .map(|i| {
            let mut best = 0;
            let mut best_val = m[[0, i]];
            for k in 1..m.nrows() {
                if m[[k, i]] > best_val {
                    best = k;
                    best_val = m[[k, i]];
                }
            }
            best
        })
        .collect()
}

/// One-hot encoding matrix L (C x n) for integer labels.
pub fn one_hot(labels: &[usize], categories: usize) -> Array2<f64> {
    let mut l = Array2::zeros((categories, labels.len()));
    for (i, &y) in labels.iter().enumerate() {
        l[[y, i]] = 1.0;
    }
    l
}
