use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::CartanError;
use crate::scalar::{lit, to_f64, Real};

/// A set of simple-root indices θ ⊆ {1, …, d−1}.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RootSubset {
    d: usize,
    indices: Vec<usize>,
}

impl RootSubset {
    pub fn new(d: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self, CartanError> {
        let mut idx: Vec<usize> = indices.into_iter().collect();
        idx.sort_unstable();
        idx.dedup();
        if d < 2 || idx.iter().any(|&k| k == 0 || k >= d) {
            return Err(CartanError::InvalidRootSubset { indices: idx, d });
        }
        Ok(RootSubset { d, indices: idx })
    }

    pub fn full(d: usize) -> Self {
        RootSubset {
            d,
            indices: (1..d).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, k: usize) -> bool {
        self.indices.binary_search(&k).is_ok()
    }

    pub fn position(&self, k: usize) -> Option<usize> {
        self.indices.binary_search(&k).ok()
    }

    pub fn is_symmetric(&self) -> bool {
        self.indices.iter().all(|&k| self.contains(self.d - k))
    }

    pub fn require_symmetric(&self) -> Result<(), CartanError> {
        if self.is_symmetric() {
            Ok(())
        } else {
            Err(CartanError::NonSymmetricTheta)
        }
    }

    /// Parses a comma separated index list such as `1,2`.
    pub fn parse(d: usize, s: &str) -> Result<Self, CartanError> {
        let mut idx = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            idx.push(
                part.parse::<usize>()
                    .map_err(|_| CartanError::Parse(format!("theta {s:?}")))?,
            );
        }
        RootSubset::new(d, idx)
    }
}

impl fmt::Display for RootSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.indices.iter().map(|k| k.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// A point of the Cartan subspace: a trace-zero vector of log scales.
#[derive(Debug, Clone, PartialEq)]
pub struct CartanVector<T: Real>(DVector<T>);

impl<T: Real> CartanVector<T> {
    pub fn new(entries: DVector<T>) -> Self {
        CartanVector(entries)
    }

    pub fn from_slice(entries: &[T]) -> Self {
        CartanVector(DVector::from_column_slice(entries))
    }

    pub fn zeros(d: usize) -> Self {
        CartanVector(DVector::zeros(d))
    }

    /// Rebuilds the vector from weight coordinates ω_1 … ω_{d−1}.
    pub fn from_omegas(omegas: &[T]) -> Self {
        let d = omegas.len() + 1;
        let mut h = DVector::zeros(d);
        let mut prev = T::zero();
        for k in 0..d {
            let cur = if k + 1 < d { omegas[k] } else { T::zero() };
            h[k] = cur - prev;
            prev = cur;
        }
        CartanVector(h)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &DVector<T> {
        &self.0
    }

    /// ω_k(H) = h_1 + … + h_k.
    pub fn omega(&self, k: usize) -> T {
        self.0.iter().take(k).fold(T::zero(), |a, &b| a + b)
    }

    /// α_k(H) = h_k − h_{k+1}.
    pub fn alpha(&self, k: usize) -> T {
        self.0[k - 1] - self.0[k]
    }

    pub fn min_alpha(&self, theta: &RootSubset) -> T {
        theta
            .indices()
            .iter()
            .map(|&k| self.alpha(k))
            .fold(T::max_value().unwrap_or(lit(f64::MAX)), |a, b| a.min(b))
    }

    pub fn sum(&self) -> T {
        self.0.sum()
    }

    pub fn opposition(&self) -> Self {
        opposition(self)
    }

    pub fn weight_coords(&self, theta: &RootSubset) -> WeightVector<T> {
        weight_coords(self, theta)
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.0.iter().map(|&x| to_f64(x)).collect()
    }
}

/// Partial Cartan projection in fundamental-weight coordinates.
pub fn weight_coords<T: Real>(h: &CartanVector<T>, theta: &RootSubset) -> WeightVector<T> {
    let mut partial = Vec::with_capacity(h.dim());
    let mut acc = T::zero();
    for &x in h.entries().iter() {
        acc += x;
        partial.push(acc);
    }
    WeightVector {
        theta: theta.clone(),
        values: theta.indices().iter().map(|&k| partial[k - 1]).collect(),
    }
}

/// ι(h_1, …, h_d) = (−h_d, …, −h_1).
pub fn opposition<T: Real>(h: &CartanVector<T>) -> CartanVector<T> {
    let d = h.dim();
    CartanVector(DVector::from_fn(d, |i, _| -h.entries()[d - 1 - i]))
}

/// Values ω_k(·) for k ∈ θ, stored in θ order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector<T: Real> {
    pub theta: RootSubset,
    pub values: Vec<T>,
}

impl<T: Real> WeightVector<T> {
    pub fn zeros(theta: &RootSubset) -> Self {
        WeightVector {
            theta: theta.clone(),
            values: vec![T::zero(); theta.len()],
        }
    }

    pub fn get(&self, k: usize) -> Option<T> {
        self.theta.position(k).map(|i| self.values[i])
    }

    /// Applies the opposition involution: ω_k(ιH) = ω_{d−k}(H).
    pub fn opposition(&self) -> Result<Self, CartanError> {
        self.theta.require_symmetric()?;
        let d = self.theta.dim();
        let values = self
            .theta
            .indices()
            .iter()
            .map(|&k| self.get(d - k).expect("symmetric"))
            .collect();
        Ok(WeightVector {
            theta: self.theta.clone(),
            values,
        })
    }

    pub fn sub(&self, other: &Self) -> Self {
        WeightVector {
            theta: self.theta.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        WeightVector {
            theta: self.theta.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }

    pub fn norm_inf(&self) -> T {
        self.values.iter().fold(T::zero(), |a, &b| a.max(b.abs()))
    }

    pub fn norm(&self) -> T {
        self.values.iter().fold(T::zero(), |a, &b| a + b * b).sqrt()
    }

    pub fn scaled(&self, c: T) -> Self {
        WeightVector {
            theta: self.theta.clone(),
            values: self.values.iter().map(|&v| v * c).collect(),
        }
    }
}

/// φ = Σ_{k∈θ} c_k ω_k, stored with coefficients aligned to θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFunctional<T: Real> {
    pub theta: RootSubset,
    pub coeffs: Vec<T>,
}

impl<T: Real> LinearFunctional<T> {
    pub fn new(theta: &RootSubset, pairs: &[(usize, T)]) -> Result<Self, CartanError> {
        let mut coeffs = vec![T::zero(); theta.len()];
        for &(k, c) in pairs {
            let pos = theta.position(k).ok_or(CartanError::InvalidRootSubset {
                indices: vec![k],
                d: theta.dim(),
            })?;
            coeffs[pos] += c;
        }
        Ok(LinearFunctional {
            theta: theta.clone(),
            coeffs,
        })
    }

    /// The fundamental weight ω_k as a functional on θ (k must lie in θ).
    pub fn omega(theta: &RootSubset, k: usize) -> Result<Self, CartanError> {
        Self::new(theta, &[(k, T::one())])
    }

    /// Sum of all fundamental weights in θ.
    pub fn sum_of_weights(theta: &RootSubset) -> Self {
        LinearFunctional {
            theta: theta.clone(),
            coeffs: vec![T::one(); theta.len()],
        }
    }

    /// The simple root α_k = 2ω_k − ω_{k−1} − ω_{k+1}; needs the neighbouring
    /// indices (inside 1..d−1) to lie in θ.
    pub fn simple_root(theta: &RootSubset, k: usize) -> Result<Self, CartanError> {
        let d = theta.dim();
        let mut pairs = vec![(k, T::one() + T::one())];
        if k > 1 {
            pairs.push((k - 1, -T::one()));
        }
        if k + 1 < d {
            pairs.push((k + 1, -T::one()));
        }
        Self::new(theta, &pairs)
    }

    pub fn coeff(&self, k: usize) -> T {
        self.theta
            .position(k)
            .map(|i| self.coeffs[i])
            .unwrap_or(T::zero())
    }

    pub fn eval(&self, h: &CartanVector<T>) -> T {
        let mut partial = T::zero();
        let mut acc = T::zero();
        let mut next = 0usize;
        let idx = self.theta.indices();
        for (i, &x) in h.entries().iter().enumerate() {
            partial += x;
            if next < idx.len() && idx[next] == i + 1 {
                acc += self.coeffs[next] * partial;
                next += 1;
            }
        }
        acc
    }

    pub fn eval_weights(&self, w: &WeightVector<T>) -> T {
        debug_assert_eq!(w.theta, self.theta);
        self.coeffs
            .iter()
            .zip(&w.values)
            .fold(T::zero(), |a, (&c, &v)| a + c * v)
    }

    pub fn dual(&self) -> Result<Self, CartanError> {
        dual_functional(self)
    }

    pub fn scaled(&self, c: T) -> Self {
        LinearFunctional {
            theta: self.theta.clone(),
            coeffs: self.coeffs.iter().map(|&x| x * c).collect(),
        }
    }

    /// a·self + b·other.
    pub fn combine(&self, a: T, other: &Self, b: T) -> Result<Self, CartanError> {
        if self.theta != other.theta {
            return Err(CartanError::DimensionMismatch(self.theta.len(), other.theta.len()));
        }
        Ok(LinearFunctional {
            theta: self.theta.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&x, &y)| a * x + b * y)
                .collect(),
        })
    }

    /// Parses `k:c` pairs, e.g. `1:2.0,2:1`.
    pub fn parse(theta: &RootSubset, s: &str) -> Result<Self, CartanError> {
        let mut pairs = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, c) = part
                .split_once(':')
                .ok_or_else(|| CartanError::Parse(format!("functional {s:?}")))?;
            let k: usize = k
                .trim()
                .parse()
                .map_err(|_| CartanError::Parse(format!("functional {s:?}")))?;
            let c: f64 = c
                .trim()
                .parse()
                .map_err(|_| CartanError::Parse(format!("functional {s:?}")))?;
            pairs.push((k, lit(c)));
        }
        Self::new(theta, &pairs)
    }
}

/// φ̄ = φ ∘ ι, i.e. coefficient of ω_k becomes the coefficient of ω_{d−k}.
pub fn dual_functional<T: Real>(phi: &LinearFunctional<T>) -> Result<LinearFunctional<T>, CartanError> {
    phi.theta.require_symmetric()?;
    let d = phi.theta.dim();
    Ok(LinearFunctional {
        theta: phi.theta.clone(),
        coeffs: phi.theta.indices().iter().map(|&k| phi.coeff(d - k)).collect(),
    })
}
