use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::exact::RationalMatrix;
use super::OrbitError;
use crate::cartan::{GroupElement, Letter, RootSubset, Word};
use crate::scalar::{lit, to_f64, Real};

/// Convex domain a preset acts on, when it has one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainTag {
    /// SL(2,R) acting on the Klein disk through PSL(2,R) ≅ SO(2,1)°.
    KleinDisk,
}

/// A finitely generated subgroup of SL(d,R) given by generators; inverses are
/// adjoined implicitly, so letter `-k` is the inverse of generator `k`.
#[derive(Debug, Clone)]
pub struct GroupPreset<T: Real> {
    pub name: String,
    pub generators: Vec<GroupElement<T>>,
    pub theta: RootSubset,
    pub domain: Option<DomainTag>,
    /// Named subgroups, each given by generator words.
    pub subgroups: Vec<(String, Vec<Word>)>,
    /// The generators are known to be a free basis; any exact collision of
    /// distinct reduced words is then reported as non-discreteness.
    pub free: bool,
    /// Rational generator matrices for exact deduplication.
    pub exact: Option<Vec<RationalMatrix>>,
}

const FINITE_ORDER_PROBE: usize = 24;

impl<T: Real> GroupPreset<T> {
    /// Builds a preset, rejecting generators of small finite order.
    pub fn new(
        name: impl Into<String>,
        generators: Vec<GroupElement<T>>,
        theta: RootSubset,
    ) -> Result<Self, OrbitError<T>> {
        for (i, g) in generators.iter().enumerate() {
            if let Some(order) = finite_order(g) {
                return Err(OrbitError::FiniteOrderGenerator { index: i + 1, order });
            }
        }
        let generators = generators
            .into_iter()
            .enumerate()
            .map(|(i, g)| g.with_word(Word::letter(i as Letter + 1)))
            .collect();
        Ok(GroupPreset {
            name: name.into(),
            generators,
            theta,
            domain: None,
            subgroups: Vec::new(),
            free: false,
            exact: None,
        })
    }

    pub fn with_domain(mut self, domain: DomainTag) -> Self {
        self.domain = Some(domain);
        self
    }

    pub fn with_subgroup(mut self, name: impl Into<String>, words: Vec<Word>) -> Self {
        self.subgroups.push((name.into(), words));
        self
    }

    pub fn marked_free(mut self) -> Self {
        self.free = true;
        self
    }

    pub fn with_exact(mut self, exact: Vec<RationalMatrix>) -> Self {
        self.exact = Some(exact);
        self
    }

    pub fn dim(&self) -> usize {
        self.theta.dim()
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    /// Alphabet in shortlex order: a, A, b, B, …
    pub fn letters(&self) -> Vec<Letter> {
        (1..=self.rank() as Letter).flat_map(|k| [k, -k]).collect()
    }

    pub fn letter_element(&self, l: Letter) -> GroupElement<T> {
        let g = &self.generators[l.unsigned_abs() as usize - 1];
        if l > 0 {
            g.clone()
        } else {
            g.inverse()
        }
    }

    /// Evaluates a word in the generators.
    pub fn evaluate(&self, w: &Word) -> GroupElement<T> {
        let mut acc = GroupElement::identity(self.dim());
        for &l in w.letters() {
            acc = acc.compose(&self.letter_element(l));
        }
        acc.with_word(w.clone())
    }

    /// The subgroup generated by `words`, as a preset in its own alphabet.
    pub fn subgroup(&self, words: &[Word]) -> Result<GroupPreset<T>, OrbitError<T>> {
        let gens = words.iter().map(|w| self.evaluate(w)).collect();
        let label: Vec<String> = words.iter().map(|w| w.to_string()).collect();
        let mut sub = GroupPreset::new(format!("{}<{}>", self.name, label.join(",")), gens, self.theta.clone())?;
        sub.domain = self.domain;
        Ok(sub)
    }

    pub fn named_subgroup(&self, name: &str) -> Option<&[Word]> {
        self.subgroups
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, w)| w.as_slice())
    }

    pub fn with_theta(mut self, theta: RootSubset) -> Self {
        self.theta = theta;
        self
    }
}

impl GroupPreset<f64> {
    /// Converts the generators to another scalar type.
    pub fn cast<T: Real>(&self) -> GroupPreset<T> {
        let conv = |m: &DMatrix<f64>| m.map(|x| lit::<T>(x));
        GroupPreset {
            name: self.name.clone(),
            generators: self
                .generators
                .iter()
                .map(|g| GroupElement::from_parts(conv(g.matrix()), conv(g.inverse_matrix()), g.word().clone()))
                .collect(),
            theta: self.theta.clone(),
            domain: self.domain,
            subgroups: self.subgroups.clone(),
            free: self.free,
            exact: self.exact.clone(),
        }
    }
}

/// Smallest k ≤ 24 with g^k = ±I, if any.
fn finite_order<T: Real>(g: &GroupElement<T>) -> Option<usize> {
    let d = g.dim();
    let id = DMatrix::<T>::identity(d, d);
    let mut acc = id.clone();
    for k in 1..=FINITE_ORDER_PROBE {
        acc = &acc * g.matrix();
        let plus = to_f64((&acc - &id).amax());
        let minus = to_f64((&acc + &id).amax());
        if plus < 1e-9 || (d % 2 == 0 && minus < 1e-9) {
            return Some(k);
        }
    }
    None
}
