use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;

/// Eigenpairs of a real symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: DVector<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: DMatrix<f64>,
}

/// Symmetric eigendecomposition with a deterministic ordering and sign.
///
/// Eigenvalues are sorted ascending (stable on ties) and every eigenvector is
/// flipped so its first component with magnitude above 1e-12 is positive.
pub fn sp_eigensolve(a: &DMatrix<f64>) -> Result<SymmetricEigen> {
    if !a.is_square() {
        return Err(Error::LengthMismatch {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    let asym = (a - a.transpose()).amax();
    if asym > SYMMETRY_TOL * a.amax().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let n = a.nrows();
    let eig = a.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                v.neg_mut();
            }
        }
        vectors.set_column(k, &v);
    }
    Ok(SymmetricEigen { values, vectors })
}
