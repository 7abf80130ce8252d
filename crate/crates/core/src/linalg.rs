//! Small dense complex linear algebra on top of `nalgebra`.
//!
//! Every matrix in the crate is a [`CMatrix`]. Hermitian eigenproblems go
//! through `nalgebra::SymmetricEigen`, which handles complex Hermitian input.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// Builds a matrix from rows of complex entries.
pub fn from_rows(rows: &[Vec<C64>]) -> CMatrix {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    CMatrix::from_fn(nrows, ncols, |i, j| rows[i][j])
}

/// Builds a matrix from rows of real entries.
pub fn from_real_rows(rows: &[&[f64]]) -> CMatrix {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    CMatrix::from_fn(nrows, ncols, |i, j| c(rows[i][j], 0.0))
}

pub fn diag(values: &[f64]) -> CMatrix {
    let n = values.len();
    CMatrix::from_fn(n, n, |i, j| if i == j { c(values[i], 0.0) } else { ZERO })
}

/// Maximum entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn hermitian_asymmetry(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    max_abs_diff(m, &m.adjoint())
}

pub fn outer(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// `tr(A B)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// `tr(A B†)` summed entry-wise.
pub fn trace_with_adjoint(a: &CMatrix, b: &CMatrix) -> C64 {
    a.iter()
        .zip(b.iter())
        .fold(ZERO, |acc, (x, y)| acc + x * y.conj())
}

/// Hermitian eigendecomposition with eigenvalues in ascending order and
/// eigenvectors as the matching columns.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    // Symmetrize first so round-off asymmetry cannot leak into the solver.
    let sym = (m + m.adjoint()) * c(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

pub fn eigvalsh(m: &CMatrix) -> Vec<f64> {
    eigh(m).0
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    eigvalsh(m).first().copied().unwrap_or(0.0)
}

/// Number of eigenvalues above `rel_tol` times the largest modulus.
pub fn numerical_rank(m: &CMatrix, rel_tol: f64) -> usize {
    let vals = eigvalsh(m);
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return 0;
    }
    vals.iter().filter(|v| v.abs() > rel_tol * scale).count()
}

/// `f(H)` for Hermitian `H` via its eigendecomposition.
pub fn hermitian_function(m: &CMatrix, f: impl Fn(f64) -> C64) -> CMatrix {
    let (vals, vecs) = eigh(m);
    spectral_apply(&vals, &vecs, f)
}

pub(crate) fn spectral_apply(vals: &[f64], vecs: &CMatrix, f: impl Fn(f64) -> C64) -> CMatrix {
    let n = vals.len();
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let fv = f(v);
        for i in 0..n {
            scaled[(i, j)] *= fv;
        }
    }
    scaled * vecs.adjoint()
}

/// `exp(-i t H)` for Hermitian `H`.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> CMatrix {
    hermitian_function(h, |e| C64::from_polar(1.0, -e * t))
}

/// Partial trace over the second tensor factor of a `(da*db)`-dimensional operator.
pub fn partial_trace_second(m: &CMatrix, da: usize, db: usize) -> CMatrix {
    CMatrix::from_fn(da, da, |i, j| {
        (0..db).fold(ZERO, |acc, k| acc + m[(i * db + k, j * db + k)])
    })
}

/// Partial trace over the first tensor factor.
pub fn partial_trace_first(m: &CMatrix, da: usize, db: usize) -> CMatrix {
    CMatrix::from_fn(db, db, |i, j| {
        (0..da).fold(ZERO, |acc, k| acc + m[(k * db + i, k * db + j)])
    })
}

pub fn pauli_x() -> CMatrix {
    from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
}

pub fn pauli_y() -> CMatrix {
    from_rows(&[vec![ZERO, c(0.0, -1.0)], vec![c(0.0, 1.0), ZERO]])
}

pub fn pauli_z() -> CMatrix {
    diag(&[1.0, -1.0])
}

/// Serde adapter: nested row-major arrays of `[re, im]` pairs.
pub mod matrix_serde {
    use super::*;

    pub fn to_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect()
    }

    pub fn from_pairs(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix, String> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err("ragged matrix rows".into());
        }
        if rows.iter().flatten().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err("non-finite matrix entry".into());
        }
        Ok(CMatrix::from_fn(nrows, ncols, |i, j| c(rows[i][j][0], rows[i][j][1])))
    }

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        from_pairs(&rows).map_err(serde::de::Error::custom)
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(ms: &[CMatrix], s: S) -> Result<S::Ok, S::Error> {
            ms.iter().map(to_rows).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CMatrix>, D::Error> {
            let all = Vec::<Vec<Vec<[f64; 2]>>>::deserialize(d)?;
            all.iter()
                .map(|rows| from_pairs(rows).map_err(serde::de::Error::custom))
                .collect()
        }
    }
}

/// Sums a sequence of matrices with a fixed index-ascending pairwise tree so
/// the result does not depend on how the terms were produced.
pub fn pairwise_sum(terms: &[CMatrix]) -> Option<CMatrix> {
    match terms.len() {
        0 => None,
        1 => Some(terms[0].clone()),
        n => {
            let (left, right) = terms.split_at(n / 2);
            let mut acc = pairwise_sum(left)?;
            acc += pairwise_sum(right)?;
            Some(acc)
        }
    }
}

pub fn pairwise_sum_scalars(terms: &[C64]) -> C64 {
    match terms.len() {
        0 => ZERO,
        1 => terms[0],
        n => {
            let (left, right) = terms.split_at(n / 2);
            pairwise_sum_scalars(left) + pairwise_sum_scalars(right)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigh_sorts_ascending() {
        let (vals, vecs) = eigh(&pauli_x());
        assert!((vals[0] + 1.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
        let recon = &vecs * diag(&vals) * vecs.adjoint();
        assert!(max_abs_diff(&recon, &pauli_x()) < 1e-14);
    }

    #[test]
    fn partial_traces_of_product() {
        let a = from_real_rows(&[&[0.3, 0.1], &[0.1, 0.7]]);
        let b = diag(&[0.2, 0.5, 0.3]);
        let ab = kron(&a, &b);
        assert!(max_abs_diff(&partial_trace_second(&ab, 2, 3), &a) < 1e-15);
        assert!(max_abs_diff(&partial_trace_first(&ab, 2, 3), &b) < 1e-15);
    }

    #[test]
    fn matrix_json_roundtrip() {
        let m = pauli_y();
        let json = serde_json::to_string(&matrix_serde::to_rows(&m)).unwrap();
        assert_eq!(json, "[[[0.0,0.0],[0.0,-1.0]],[[0.0,1.0],[0.0,0.0]]]");
        let rows: Vec<Vec<[f64; 2]>> = serde_json::from_str(&json).unwrap();
        assert_eq!(matrix_serde::from_pairs(&rows).unwrap(), m);
    }

    #[test]
    fn pairwise_sum_is_order_fixed() {
        let terms: Vec<CMatrix> = (0..7).map(|k| diag(&[k as f64 * 0.1])).collect();
        let s = pairwise_sum(&terms).unwrap();
        assert!((s[(0, 0)].re - 2.1).abs() < 1e-14);
    }
}
