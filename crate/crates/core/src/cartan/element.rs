use nalgebra::DMatrix;

use super::{CartanError, CartanVector, Tolerances, Word};
use crate::linalg::singular_values_desc;
use crate::scalar::{lit, to_f64, tol, Real};

/// A unimodular matrix together with its inverse and the word that produced it.
///
/// The inverse is carried along so that quantities living in the lower half of
/// the singular spectrum can be read off the inverse, where they are large and
/// well conditioned.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement<T: Real> {
    matrix: DMatrix<T>,
    inverse: DMatrix<T>,
    word: Word,
}

impl<T: Real> GroupElement<T> {
    /// Normalizes `m` to determinant one and computes its inverse.
    pub fn from_matrix(m: DMatrix<T>) -> Result<Self, CartanError> {
        Self::from_matrix_with(m, &Tolerances::default())
    }

    pub fn from_matrix_with(m: DMatrix<T>, tols: &Tolerances) -> Result<Self, CartanError> {
        let (r, c) = m.shape();
        if r != c || r == 0 {
            return Err(CartanError::NotSquare(r, c));
        }
        let det = m.determinant();
        if det == T::zero() || !det.is_finite() {
            return Err(CartanError::SingularMatrix);
        }
        let d: T = lit(r as f64);
        let scale = if det > T::zero() {
            det.powf(T::one() / d)
        } else if r % 2 == 1 {
            -(-det).powf(T::one() / d)
        } else {
            return Err(CartanError::NegativeDeterminant);
        };
        let m = m / scale;
        let inverse = m
            .clone()
            .try_inverse()
            .ok_or(CartanError::SingularMatrix)?;
        let drift = (m.determinant() - T::one()).abs();
        if drift > tol::<T>(tols.det) {
            return Err(CartanError::DeterminantDrift(to_f64(drift)));
        }
        Ok(GroupElement {
            matrix: m,
            inverse,
            word: Word::empty(),
        })
    }

    /// Trusted constructor for a matrix whose inverse is known exactly.
    pub fn from_parts(matrix: DMatrix<T>, inverse: DMatrix<T>, word: Word) -> Self {
        debug_assert_eq!(matrix.shape(), inverse.shape());
        GroupElement {
            matrix,
            inverse,
            word,
        }
    }

    pub fn identity(d: usize) -> Self {
        GroupElement {
            matrix: DMatrix::identity(d, d),
            inverse: DMatrix::identity(d, d),
            word: Word::empty(),
        }
    }

    pub fn with_word(mut self, word: Word) -> Self {
        self.word = word;
        self
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn inverse_matrix(&self) -> &DMatrix<T> {
        &self.inverse
    }

    pub fn word(&self) -> &Word {
        &self.word
    }

    pub fn compose(&self, other: &Self) -> Self {
        GroupElement {
            matrix: &self.matrix * &other.matrix,
            inverse: &other.inverse * &self.inverse,
            word: self.word.concat(&other.word),
        }
    }

    pub fn inverse(&self) -> Self {
        GroupElement {
            matrix: self.inverse.clone(),
            inverse: self.matrix.clone(),
            word: self.word.inverse(),
        }
    }

    pub fn power(&self, n: i64) -> Self {
        let base = if n < 0 { self.inverse() } else { self.clone() };
        let mut acc = GroupElement::identity(self.dim());
        let mut sq = base;
        let mut k = n.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.compose(&sq);
            }
            sq = sq.compose(&sq);
            k >>= 1;
        }
        acc.word = self.word.power(n);
        acc
    }

    /// k g k⁻¹ for an orthogonal or general invertible `k`.
    pub fn conjugate_by(&self, k: &Self) -> Self {
        k.compose(self).compose(&k.inverse()).with_word(self.word.clone())
    }

    /// Evaluates the stored word over `generators` (1-based) and reports the
    /// largest relative entrywise deviation from the stored matrix.
    pub fn word_deviation(&self, generators: &[GroupElement<T>]) -> T {
        let mut acc = DMatrix::<T>::identity(self.dim(), self.dim());
        for &l in self.word.letters() {
            let g = &generators[l.unsigned_abs() as usize - 1];
            acc = if l > 0 { acc * g.matrix() } else { acc * g.inverse_matrix() };
        }
        let mut worst = T::zero();
        for (a, b) in acc.iter().zip(self.matrix.iter()) {
            let scale = T::one().max(a.abs()).max(b.abs());
            worst = worst.max((*a - *b).abs() / scale);
        }
        worst
    }
}

/// κ(g) = (log σ_1, …, log σ_d), sorted non-increasing with exact zero sum.
///
/// ω_k is read from the top k singular values of g when k ≤ d/2 and from the
/// top d−k singular values of g⁻¹ otherwise.
pub fn cartan_project<T: Real>(g: &GroupElement<T>) -> Result<CartanVector<T>, CartanError> {
    let d = g.dim();
    let s = singular_values_desc(g.matrix());
    let si = singular_values_desc(g.inverse_matrix());
    let tiny: T = lit(1e-300);
    // only the top halves are read, the small singular values carry no precision
    let top = d / 2;
    let bottom = (d - 1) / 2;
    let bad = |v: &[T], n: usize| n > 0 && (v[n - 1] < tiny || !v[0].is_finite());
    if bad(&s, top) || bad(&si, bottom) {
        return Err(CartanError::SingularMatrix);
    }
    let mut omegas = Vec::with_capacity(d - 1);
    for k in 1..d {
        let w = if 2 * k <= d {
            s[..k].iter().fold(T::zero(), |a, &x| a + x.ln())
        } else {
            si[..d - k].iter().fold(T::zero(), |a, &x| a + x.ln())
        };
        omegas.push(w);
    }
    Ok(CartanVector::from_omegas(&omegas))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn normalizes_determinant() {
        let m = DMatrix::<f64>::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]);
        let g = GroupElement::from_matrix(m).unwrap();
        assert!((g.matrix().determinant() - 1.0).abs() < 1e-15);
        let neg = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(
            GroupElement::<f64>::from_matrix(neg),
            Err(CartanError::NegativeDeterminant)
        );
        let odd = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0f64, 1.0, 1.0]));
        let g3 = GroupElement::from_matrix(odd).unwrap();
        assert!((g3.matrix().determinant() - 1.0).abs() < 1e-15);
        let sing = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(GroupElement::<f64>::from_matrix(sing), Err(CartanError::SingularMatrix));
    }

    #[test]
    fn kappa_examples() {
        let g = GroupElement::from_matrix(DMatrix::from_diagonal(&DVector::from_vec(vec![
            2.0, 1.0, 0.5,
        ])))
        .unwrap();
        let k = cartan_project(&g).unwrap();
        let l2 = 2f64.ln();
        assert!((k.entries() - DVector::from_vec(vec![l2, 0.0, -l2])).norm() < 1e-15);
        let id = cartan_project(&GroupElement::<f64>::identity(4)).unwrap();
        assert!(id.entries().norm() == 0.0);
    }

    #[test]
    fn power_matches_repeated_product() {
        let g = GroupElement::from_matrix(DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]))
            .unwrap()
            .with_word(Word::letter(1));
        let p = g.power(5);
        let mut q = GroupElement::identity(2);
        for _ in 0..5 {
            q = q.compose(&g);
        }
        assert!((p.matrix() - q.matrix()).norm() < 1e-10);
        assert_eq!(p.word(), q.word());
        assert!(p.word_deviation(&[g.clone()]) < 1e-12);
        let pinv = g.power(-3);
        assert!((pinv.matrix() * g.power(3).matrix() - DMatrix::identity(2, 2)).norm() < 1e-10);
    }

    #[test]
    fn works_in_single_precision() {
        let m = DMatrix::<f32>::from_row_slice(2, 2, &[3.0, 1.0, 2.0, 1.0]);
        let g = GroupElement::from_matrix(m).unwrap();
        let k = cartan_project(&g).unwrap();
        assert!(k.sum().abs() < 1e-6);
        assert!(k.entries()[0] > 0.0);
    }
}
