//! Dense linear-algebra kernels used by the solver: symmetric
//! eigendecomposition, SPD solves, a Sylvester solver specialized to
//! SPD/PSD coefficients, and pairwise squared distances.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use ndarray_linalg::{CholeskyFactorized, Eigh, FactorizeC, SolveC, UPLO};

use crate::error::{Error, Result};

/// Relative ridge added to the diagonal when an SPD factorization fails.
pub const RIDGE_SCALE: f64 = 1e-10;

pub fn check_finite(m: ArrayView2<'_, f64>, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

pub fn frob(m: ArrayView2<'_, f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Eigendecomposition of a symmetric matrix.
///
/// The input is symmetrized before decomposing. Eigenvalues come back in
/// ascending order with orthonormal eigenvectors as the columns of the
/// second return value.
pub fn sym_eig(s: ArrayView2<'_, f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    if s.nrows() != s.ncols() {
        return Err(Error::Dimension(format!(
            "sym_eig requires a square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    let sym = 0.5 * (&s + &s.t());
    let (vals, vecs) = sym.eigh(UPLO::Lower)?;
    Ok((vals, vecs))
}

fn cholesky(a: &Array2<f64>) -> Result<CholeskyFactorized<ndarray::OwnedRepr<f64>>> {
    a.factorizec(UPLO::Lower)
        .map_err(|e| Error::Indefinite(format!("Cholesky factorization failed: {e}")))
}

fn solve_columns(
    factor: &CholeskyFactorized<ndarray::OwnedRepr<f64>>,
    b: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    let mut x = Array2::zeros(b.raw_dim());
    for (j, col) in b.axis_iter(Axis(1)).enumerate() {
        let sol = factor.solvec(&col.to_owned())?;
        x.column_mut(j).assign(&sol);
    }
    Ok(x)
}

/// Solve `A X = B` for symmetric positive definite `A` without forming an
/// explicit inverse.
pub fn solve_spd(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if a.nrows() != a.ncols() || a.ncols() != b.nrows() {
        return Err(Error::Dimension(format!(
            "solve_spd: A is {}x{}, B is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let sym = 0.5 * (&a + &a.t());
    let factor = cholesky(&sym)?;
    solve_columns(&factor, b)
}

/// `solve_spd` with one ridge retry: on factorization failure, add
/// `RIDGE_SCALE * trace(A)/n` to the diagonal and try again.
pub fn solve_spd_ridged(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    match solve_spd(a, b) {
        Ok(x) => Ok(x),
        Err(Error::Indefinite(_)) => {
            let n = a.nrows() as f64;
            let tr: f64 = a.diag().sum();
            let ridge = (RIDGE_SCALE * tr / n).max(RIDGE_SCALE);
            let mut shifted = a.to_owned();
            for i in 0..a.nrows() {
                shifted[[i, i]] += ridge;
            }
            solve_spd(shifted.view(), b)
        }
        Err(e) => Err(e),
    }
}

/// Solve the Sylvester equation `A X + X B = Q` with `A` symmetric positive
/// definite and `B` symmetric positive semidefinite.
///
/// `B` is eigendecomposed as `P diag(mu) P^T`; each column of `Q P` is then
/// the right-hand side of a shifted SPD system `(A + mu_k I) x_k = q_k`.
pub fn solve_sylvester(
    a: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
    q: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    let d = a.nrows();
    let c = b.nrows();
    if a.ncols() != d || b.ncols() != c || q.nrows() != d || q.ncols() != c {
        return Err(Error::Dimension(format!(
            "solve_sylvester: A {}x{}, B {}x{}, Q {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    let (mu, p) = sym_eig(b)?;
    let q_rot = q.dot(&p);
    let a_sym = 0.5 * (&a + &a.t());
    let mut x_rot = Array2::zeros((d, c));
    for k in 0..c {
        let mut shifted = a_sym.clone();
        for i in 0..d {
            shifted[[i, i]] += mu[k];
        }
        let factor = cholesky(&shifted)?;
        let sol = factor.solvec(&q_rot.column(k).to_owned())?;
        x_rot.column_mut(k).assign(&sol);
    }
    Ok(x_rot.dot(&p.t()))
}

/// Squared Euclidean distances between the columns of `X`.
///
/// Returns a symmetric matrix with an exact-zero diagonal.
pub fn pairwise_sq_dists(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = x.ncols();
    let gram = x.t().dot(&x);
    let sq: Vec<f64> = (0..n).map(|i| gram[[i, i]]).collect();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (sq[i] + sq[j] - 2.0 * gram[[i, j]]).max(0.0);
            out[[i, j]] = d;
            out[[j, i]] = d;
        }
    }
    out
}

/// Replace the columns of `m` with an orthonormal basis of their span
/// (modified Gram-Schmidt). Requires full column rank.
pub fn orthonormalize_columns(m: &mut Array2<f64>) -> Result<()> {
    let (rows, cols) = m.dim();
    if cols > rows {
        return Err(Error::Dimension(format!(
            "cannot orthonormalize {cols} columns in {rows} dimensions"
        )));
    }
    for j in 0..cols {
        for i in 0..j {
            let proj = m.column(i).dot(&m.column(j));
            let qi = m.column(i).to_owned();
            let mut cj = m.column_mut(j);
            cj.scaled_add(-proj, &qi);
        }
        let norm = m.column(j).dot(&m.column(j)).sqrt();
        if norm <= 1e-12 {
            return Err(Error::InvalidArgument(
                "rank-deficient matrix in orthonormalization".into(),
            ));
        }
        m.column_mut(j).mapv_inplace(|v| v / norm);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::{random_matrix, random_psd, random_spd};
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sylvester_identity_halves() {
        let q = array![[1.0, 2.0], [3.0, 4.0]];
        let x = solve_sylvester(Array2::<f64>::eye(2).view(), Array2::<f64>::eye(2).view(), q.view()).unwrap();
        assert!(frob((&x - &(&q / 2.0)).view()) < 1e-12);
    }

    #[test]
    fn sylvester_diagonal_decouples() {
        let a = Array2::from_diag(&array![1.0, 2.0, 3.0]);
        let b = Array2::from_diag(&array![0.5, 4.0]);
        let q = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let x = solve_sylvester(a.view(), b.view(), q.view()).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                let expect = q[[i, j]] / (a[[i, i]] + b[[j, j]]);
                assert!((x[[i, j]] - expect).abs() < 1e-12);
            }
        }
    }

    // dense vectorization oracle: solve (I (x) A + B^T (x) I) vec(X) = vec(Q)
    pub fn sylvester_vectorization_oracle(
        a: &Array2<f64>,
        b: &Array2<f64>,
        q: &Array2<f64>,
    ) -> Array2<f64> {
        use ndarray_linalg::Solve;
        let d = a.nrows();
        let c = b.nrows();
        let n = d * c;
        let mut big = Array2::zeros((n, n));
        // column-stacked vec: entry (i, j) of X sits at index j*d + i
        for j in 0..c {
            for i in 0..d {
                let row = j * d + i;
                for k in 0..d {
                    big[[row, j * d + k]] += a[[i, k]];
                }
                for k in 0..c {
                    big[[row, k * d + i]] += b[[k, j]];
                }
            }
        }
        let mut rhs = Array1::zeros(n);
        for j in 0..c {
            for i in 0..d {
                rhs[j * d + i] = q[[i, j]];
            }
        }
        let sol = big.solve(&rhs).unwrap();
        let mut x = Array2::zeros((d, c));
        for j in 0..c {
            for i in 0..d {
                x[[i, j]] = sol[j * d + i];
            }
        }
        x
    }

    #[test]
    fn sylvester_matches_vectorization_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_spd(&mut rng, 6);
        let b = random_psd(&mut rng, 3);
        let q = random_matrix(&mut rng, 6, 3);
        let x = solve_sylvester(a.view(), b.view(), q.view()).unwrap();
        let oracle = sylvester_vectorization_oracle(&a, &b, &q);
        let rel = frob((&x - &oracle).view()) / frob(oracle.view()).max(1.0);
        assert!(rel < 1e-9, "rel err {rel}");
        let resid = &a.dot(&x) + &x.dot(&b) - &q;
        assert!(frob(resid.view()) / frob(q.view()).max(1.0) < 1e-10);
    }

    #[test]
    fn sylvester_rejects_indefinite_a() {
        let a = array![[1.0, 0.0], [0.0, -1.0]];
        let b = Array2::<f64>::eye(2);
        let q = Array2::<f64>::eye(2);
        assert!(matches!(
            solve_sylvester(a.view(), b.view(), q.view()),
            Err(Error::Indefinite(_))
        ));
    }

    #[test]
    fn sym_eig_diag_sorted_ascending() {
        let s = Array2::from_diag(&array![3.0, 1.0, 2.0]);
        let (vals, vecs) = sym_eig(s.view()).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 2.0).abs() < 1e-12);
        assert!((vals[2] - 3.0).abs() < 1e-12);
        // eigenvector of 1.0 is +/- e_1
        assert!((vecs[[1, 0]].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sym_eig_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r = random_matrix(&mut rng, 8, 8);
        let s = 0.5 * (&r + &r.t());
        let (vals, vecs) = sym_eig(s.view()).unwrap();
        let recon = vecs.dot(&Array2::from_diag(&vals)).dot(&vecs.t());
        assert!(frob((&recon - &s).view()) < 1e-9 * frob(s.view()));
        let gram = vecs.t().dot(&vecs);
        assert!(frob((&gram - &Array2::<f64>::eye(8)).view()) < 1e-10);
    }

    #[test]
    fn solve_spd_identity_and_scaled() {
        let b = array![[1.0, 2.0], [3.0, 4.0]];
        let x = solve_spd(Array2::<f64>::eye(2).view(), b.view()).unwrap();
        assert!(frob((&x - &b).view()) < 1e-14);
        let x2 = solve_spd((Array2::<f64>::eye(2) * 2.0).view(), Array2::<f64>::eye(2).view()).unwrap();
        assert!(frob((&x2 - &(Array2::<f64>::eye(2) * 0.5)).view()) < 1e-14);
    }

    #[test]
    fn solve_spd_residual_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_spd(&mut rng, 10);
        let b = random_matrix(&mut rng, 10, 4);
        let x = solve_spd(a.view(), b.view()).unwrap();
        let resid = &a.dot(&x) - &b;
        assert!(frob(resid.view()) <= 1e-10 * frob(b.view()).max(1.0));
    }

    #[test]
    fn solve_spd_ridged_recovers_singular() {
        let a = array![[1.0, 1.0], [1.0, 1.0]]; // PSD, singular
        let b = array![[2.0], [2.0]];
        let x = solve_spd_ridged(a.view(), b.view()).unwrap();
        let resid = &a.dot(&x) - &b;
        assert!(frob(resid.view()) < 1e-4);
    }

    #[test]
    fn pairwise_single_column_is_zero() {
        let x = array![[1.0], [2.0]];
        let d = pairwise_sq_dists(x.view());
        assert_eq!(d.dim(), (1, 1));
        assert_eq!(d[[0, 0]], 0.0);
    }

    #[test]
    fn pairwise_one_dim_points() {
        let x = array![[0.0, 2.0, 4.0]];
        let d = pairwise_sq_dists(x.view());
        assert_eq!(d[[0, 1]], 4.0);
        assert_eq!(d[[0, 2]], 16.0);
        assert_eq!(d[[1, 2]], 4.0);
        for i in 0..3 {
            assert_eq!(d[[i, i]], 0.0);
        }
    }

    #[test]
    fn pairwise_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = random_matrix(&mut rng, 5, 20);
        let d = pairwise_sq_dists(x.view());
        for i in 0..20 {
            for j in 0..20 {
                let diff = &x.column(i) - &x.column(j);
                let expect: f64 = diff.iter().map(|v| v * v).sum();
                assert!((d[[i, j]] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn orthonormalize_gives_orthonormal_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut m = random_matrix(&mut rng, 7, 3);
        orthonormalize_columns(&mut m).unwrap();
        let gram = m.t().dot(&m);
        assert!(frob((&gram - &Array2::<f64>::eye(3)).view()) < 1e-10);
    }
}
