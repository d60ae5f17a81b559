//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// All eigenvalues of a square matrix (real Schur route).
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    assert!(m.is_square(), "eigenvalues of a non-square matrix");
    if m.nrows() == 0 {
        return Vec::new();
    }
    m.complex_eigenvalues().iter().copied().collect()
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    eigenvalues(m).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest singular value, from the top eigenvalue of `mᵀm`.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = m.transpose() * m;
    gram.symmetric_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, &l| acc.max(l))
        .sqrt()
}

/// Pair every eigenvalue of `a` with its nearest unused partner in `b` and
/// return the largest pairing distance. `None` if the multisets differ in size.
pub fn spectrum_distance(a: &[Complex<f64>], b: &[Complex<f64>]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    let mut used = vec![false; b.len()];
    let mut worst = 0.0_f64;
    // Largest magnitudes first: small eigenvalues cluster near zero and are
    // the only place a greedy pairing could go wrong.
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&i, &j| a[j].norm().total_cmp(&a[i].norm()));
    for i in order {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, z)| (j, (z - a[i]).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))?;
        used[j] = true;
        worst = worst.max(d);
    }
    Some(worst)
}

pub fn rows_to_matrix(rows: &[Vec<f64>], ncols: usize) -> Option<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Serde adapter: a matrix as a list of rows (row-major).
pub mod serde_rows {
    use super::*;

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        matrix_to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let ncols = rows.first().map_or(0, Vec::len);
        rows_to_matrix(&rows, ncols).ok_or_else(|| serde::de::Error::custom("ragged matrix rows"))
    }
}

pub fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|x| x.is_finite())
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_of_rotation_and_scaling() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 2.0, 0.0]);
        assert!((spectral_radius(&m) - 2.0).abs() < 1e-12);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-3.0, 1.0]));
        assert!((spectral_radius(&d) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_norm_of_rank_one() {
        // u vᵀ has norm |u||v|.
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 2.0, 2.0, 4.0, 4.0]);
        assert!((spectral_norm(&m) - 5.0_f64.sqrt() * 3.0).abs() < 1e-12);
    }

    #[test]
    fn spectrum_distance_is_permutation_invariant() {
        let a = [
            Complex::new(1.0, 2.0),
            Complex::new(1.0, -2.0),
            Complex::new(0.0, 0.0),
        ];
        let b = [a[2], a[0], a[1]];
        assert_eq!(spectrum_distance(&a, &b), Some(0.0));
        assert_eq!(spectrum_distance(&a, &b[..2]), None);
    }

    #[test]
    fn rows_roundtrip() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let rows = matrix_to_rows(&m);
        assert_eq!(rows, vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        assert_eq!(rows_to_matrix(&rows, 3).unwrap(), m);
        assert!(rows_to_matrix(&[vec![1.0], vec![1.0, 2.0]], 1).is_none());
    }
}
