//! Feature standardization and Gaussian-kernel PCA.
//!
//! Samples are columns throughout. z-score uses the population (divide by
//! n) standard deviation. The kernel bandwidth is the mean Euclidean
//! distance over distinct unordered sample pairs.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::linalg;

/// How many kernel principal components to keep.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KpcaRetention {
    /// Exactly this many components.
    Components(usize),
    /// Smallest k whose eigenvalue mass reaches this fraction of the
    /// total positive-eigenvalue mass.
    Energy(f64),
}

/// Fitted kernel PCA model with the centering statistics needed for
/// out-of-sample projection.
#[derive(Debug, Clone)]
pub struct KpcaModel {
    training_data: Array2<f64>,
    bandwidth: f64,
    eigvecs: Array2<f64>,
    eigvals: Array1<f64>,
    row_means: Array1<f64>,
    total_mean: f64,
    k: usize,
}

/// Standardize each feature row to mean 0 and population std 1.
///
/// Zero-variance rows are centered and left at zero; their std is
/// recorded as 0.
pub fn zscore(x: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Array1<f64>, Array1<f64>)> {
    let n = x.ncols();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "zscore needs at least 2 samples".into(),
        ));
    }
    let means = x.mean_axis(Axis(1)).unwrap();
    let mut stds = Array1::zeros(x.nrows());
    let mut out = x.to_owned();
    for (i, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        row.mapv_inplace(|v| v - means[i]);
        let var = row.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let std = var.sqrt();
        stds[i] = std;
        if std > 0.0 {
            row.mapv_inplace(|v| v / std);
        }
    }
    Ok((out, means, stds))
}

/// Mean Euclidean distance over all unordered distinct column pairs.
pub fn mean_pairwise_bandwidth(x: ArrayView2<'_, f64>) -> Result<f64> {
    let n = x.ncols();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "bandwidth needs at least 2 samples".into(),
        ));
    }
    let d2 = linalg::pairwise_sq_dists(x);
    let mut sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            sum += d2[[i, j]].sqrt();
        }
    }
    let mean = sum / (n * (n - 1) / 2) as f64;
    if mean <= 0.0 {
        return Err(Error::InvalidArgument(
            "all samples identical: zero bandwidth".into(),
        ));
    }
    Ok(mean)
}

/// Gaussian kernel matrix `K[i,j] = exp(-||x_i - y_j||^2 / (2 w^2))`.
pub fn gaussian_kernel(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    bandwidth: f64,
) -> Result<Array2<f64>> {
    if bandwidth <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    if x.nrows() != y.nrows() {
        return Err(Error::Dimension(format!(
            "kernel inputs have feature dims {} and {}",
            x.nrows(),
            y.nrows()
        )));
    }
    let scale = -1.0 / (2.0 * bandwidth * bandwidth);
    let gx: Vec<f64> = x.axis_iter(Axis(1)).map(|c| c.dot(&c)).collect();
    let gy: Vec<f64> = y.axis_iter(Axis(1)).map(|c| c.dot(&c)).collect();
    let cross = x.t().dot(&y);
    let mut k = Array2::zeros((x.ncols(), y.ncols()));
    for i in 0..x.ncols() {
        for j in 0..y.ncols() {
            let d2 = (gx[i] + gy[j] - 2.0 * cross[[i, j]]).max(0.0);
            k[[i, j]] = (scale * d2).exp();
        }
    }
    Ok(k)
}

/// Fit kernel PCA on `x` with the bandwidth set to the mean pairwise
/// distance, retaining components per `retention`.
pub fn kpca_fit(x: ArrayView2<'_, f64>, retention: KpcaRetention) -> Result<KpcaModel> {
    let bandwidth = mean_pairwise_bandwidth(x)?;
    kpca_fit_with_bandwidth(x, bandwidth, retention)
}

pub fn kpca_fit_with_bandwidth(
    x: ArrayView2<'_, f64>,
    bandwidth: f64,
    retention: KpcaRetention,
) -> Result<KpcaModel> {
    let n = x.ncols();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "kpca needs at least 2 samples".into(),
        ));
    }
    let k = gaussian_kernel(x, x, bandwidth)?;
    let row_means = k.mean_axis(Axis(1)).unwrap();
    let total_mean = k.mean().unwrap();
    let mut centered = k;
    for i in 0..n {
        for j in 0..n {
            centered[[i, j]] += total_mean - row_means[i] - row_means[j];
        }
    }
    let (vals, vecs) = linalg::sym_eig(centered.view())?;
    // ascending from the eigensolver; flip to descending
    let mut order: Vec<usize> = (0..n).collect();
    order.reverse();
    let positive: Vec<usize> = order.into_iter().filter(|&i| vals[i] > 1e-12).collect();
    let kept = match retention {
        KpcaRetention::Components(k) => {
            if k == 0 || k > positive.len() {
                return Err(Error::InvalidArgument(format!(
                    "requested {k} components but only {} positive eigenvalues",
                    positive.len()
                )));
            }
            k
        }
        KpcaRetention::Energy(frac) => {
            if !(0.0..=1.0).contains(&frac) || frac <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "energy fraction must be in (0, 1], got {frac}"
                )));
            }
            let total: f64 = positive.iter().map(|&i| vals[i]).sum();
            let mut acc = 0.0;
            let mut kept = positive.len();
            for (count, &i) in positive.iter().enumerate() {
                acc += vals[i];
                if acc >= frac * total {
                    kept = count + 1;
                    break;
                }
            }
            kept
        }
    };
    let mut eigvals = Array1::zeros(kept);
    let mut eigvecs = Array2::zeros((n, kept));
    for (col, &i) in positive.iter().take(kept).enumerate() {
        eigvals[col] = vals[i];
        eigvecs.column_mut(col).assign(&vecs.column(i));
    }
    Ok(KpcaModel {
        training_data: x.to_owned(),
        bandwidth,
        eigvecs,
        eigvals,
        row_means,
        total_mean,
        k: kept,
    })
}

impl KpcaModel {
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn components(&self) -> usize {
        self.k
    }

    pub fn eigvals(&self) -> &Array1<f64> {
        &self.eigvals
    }

    /// Project new samples (columns of `y`) into the k-dimensional
    /// embedding. Components are scaled to unit variance on the training
    /// set.
    pub fn transform(&self, y: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if y.nrows() != self.training_data.nrows() {
            return Err(Error::Dimension(format!(
                "kpca transform: expected feature dim {}, got {}",
                self.training_data.nrows(),
                y.nrows()
            )));
        }
        let kx = gaussian_kernel(self.training_data.view(), y, self.bandwidth)?;
        let n = self.training_data.ncols();
        let m = y.ncols();
        let col_means = kx.mean_axis(Axis(0)).unwrap();
        let mut centered = kx;
        for i in 0..n {
            for j in 0..m {
                centered[[i, j]] += self.total_mean - self.row_means[i] - col_means[j];
            }
        }
        // z = diag(1/sqrt(eigval)) E^T Kc, one embedding column per sample
        let mut z = self.eigvecs.t().dot(&centered);
        for (i, mut row) in z.axis_iter_mut(Axis(0)).enumerate() {
            let s = self.eigvals[i].sqrt();
            row.mapv_inplace(|v| v / s);
        }
        Ok(z)
    }
}
