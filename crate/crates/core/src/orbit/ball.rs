use std::collections::HashMap;
use std::ops::Range;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GroupPreset, OrbitError};
use crate::cartan::{cartan_project, CartanError, CartanVector, GroupElement, Letter, Tolerances, Word};
use crate::scalar::{to_f64, Real};

const NO_PARENT: u32 = u32::MAX;
/// Merges this close in a free preset are treated as genuine collisions.
const EXACT_COLLISION: f64 = 1e-12;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DedupReport {
    /// Products formed during the search.
    pub candidates: usize,
    /// Candidates discarded as equal to an earlier element.
    pub merged: usize,
    /// Merges that matched the negated matrix (even d only).
    pub sign_merges: usize,
    /// Bucket hits rejected by the entrywise comparison.
    pub bucket_rejections: usize,
    /// Largest relative entrywise deviation among merged pairs.
    pub max_merge_deviation: f64,
    pub exact: bool,
}

/// Ball of radius R in the Cayley graph, one representative per group element.
///
/// Elements are stored in shortlex order of their representative words, so
/// the sphere of radius n is a contiguous range and the ball of radius r < R
/// is a prefix. Words are kept as parent links.
#[derive(Debug, Clone)]
pub struct WordBall<T: Real> {
    pub(super) dim: usize,
    pub(super) radius: usize,
    pub(super) mats: Vec<T>,
    pub(super) invs: Vec<T>,
    pub(super) parent: Vec<u32>,
    pub(super) letter: Vec<Letter>,
    pub(super) offsets: Vec<usize>,
    pub dedup: DedupReport,
    pub truncated: bool,
}

impl<T: Real> WordBall<T> {
    pub(super) fn identity(d: usize) -> Self {
        let id = DMatrix::<T>::identity(d, d);
        WordBall {
            dim: d,
            radius: 0,
            mats: id.as_slice().to_vec(),
            invs: id.as_slice().to_vec(),
            parent: vec![NO_PARENT],
            letter: vec![0],
            offsets: vec![0, 1],
            dedup: DedupReport::default(),
            truncated: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn sphere(&self, n: usize) -> Range<usize> {
        if n + 1 >= self.offsets.len() {
            return self.len()..self.len();
        }
        self.offsets[n]..self.offsets[n + 1]
    }

    pub fn sphere_sizes(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn word_length(&self, i: usize) -> usize {
        self.offsets.partition_point(|&o| o <= i) - 1
    }

    pub fn word(&self, i: usize) -> Word {
        let mut letters = Vec::new();
        let mut j = i;
        while self.parent[j] != NO_PARENT {
            letters.push(self.letter[j]);
            j = self.parent[j] as usize;
        }
        letters.reverse();
        Word::new(letters)
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        (self.parent[i] != NO_PARENT).then(|| self.parent[i] as usize)
    }

    pub fn last_letter(&self, i: usize) -> Letter {
        self.letter[i]
    }

    pub fn matrix_slice(&self, i: usize) -> &[T] {
        let n = self.dim * self.dim;
        &self.mats[i * n..(i + 1) * n]
    }

    pub fn inverse_slice(&self, i: usize) -> &[T] {
        let n = self.dim * self.dim;
        &self.invs[i * n..(i + 1) * n]
    }

    pub fn matrix(&self, i: usize) -> DMatrix<T> {
        DMatrix::from_column_slice(self.dim, self.dim, self.matrix_slice(i))
    }

    pub fn element(&self, i: usize) -> GroupElement<T> {
        GroupElement::from_parts(
            self.matrix(i),
            DMatrix::from_column_slice(self.dim, self.dim, self.inverse_slice(i)),
            self.word(i),
        )
    }

    pub fn elements(&self) -> impl Iterator<Item = GroupElement<T>> + '_ {
        (0..self.len()).map(move |i| self.element(i))
    }

    /// The sub-ball of radius `r`.
    pub fn truncated_to(&self, r: usize) -> WordBall<T> {
        let r = r.min(self.radius);
        let end = self.offsets[r + 1];
        let n = self.dim * self.dim;
        WordBall {
            dim: self.dim,
            radius: r,
            mats: self.mats[..end * n].to_vec(),
            invs: self.invs[..end * n].to_vec(),
            parent: self.parent[..end].to_vec(),
            letter: self.letter[..end].to_vec(),
            offsets: self.offsets[..r + 2].to_vec(),
            dedup: self.dedup.clone(),
            truncated: self.truncated && r == self.radius,
        }
    }

    /// κ of every element, in ball order.
    pub fn kappas(&self) -> Result<Vec<CartanVector<T>>, CartanError> {
        (0..self.len())
            .into_par_iter()
            .map(|i| cartan_project(&self.element(i)))
            .collect()
    }

    fn push(&mut self, m: &[T], inv: &[T], parent: u32, letter: Letter) {
        self.mats.extend_from_slice(m);
        self.invs.extend_from_slice(inv);
        self.parent.push(parent);
        self.letter.push(letter);
    }

    fn close_sphere(&mut self) {
        self.offsets.push(self.len());
    }
}

/// Column-major d×d product.
pub(super) fn mul_into<T: Real>(a: &[T], b: &[T], d: usize, out: &mut [T]) {
    for j in 0..d {
        for i in 0..d {
            let mut acc = T::zero();
            for k in 0..d {
                acc += a[i + k * d] * b[k + j * d];
            }
            out[i + j * d] = acc;
        }
    }
}

/// Relative entrywise deviation, each entry measured against max(1, |x|, |y|).
fn deviation<T: Real>(a: &[T], b: &[T], negate: bool) -> f64 {
    let mut worst: f64 = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (to_f64(x), if negate { -to_f64(y) } else { to_f64(y) });
        let s = 1f64.max(x.abs()).max(y.abs());
        worst = worst.max((x - y).abs() / s);
    }
    worst
}

/// Hash index keyed by a random projection of the entries, quantized relative
/// to the power of two above the largest entry; hits are confirmed entrywise.
struct DedupIndex {
    weights: Vec<f64>,
    quantum: f64,
    tol: f64,
    even: bool,
    head: HashMap<i64, u32>,
    next: Vec<u32>,
}

impl DedupIndex {
    fn new(d: usize, tols: &Tolerances) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(0x7d_0b_a1);
        let mut weights: Vec<f64> = (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let total: f64 = weights.iter().map(|w| w.abs()).sum();
        weights.iter_mut().for_each(|w| *w /= total);
        DedupIndex {
            weights,
            quantum: tols.dedup_quantum,
            tol: tols.dedup,
            even: d % 2 == 0,
            head: HashMap::new(),
            next: Vec::new(),
        }
    }

    /// Projection and log₂ of the largest entry (at least 0).
    fn project<T: Real>(&self, m: &[T]) -> (f64, f64) {
        let mut proj = 0.0;
        let mut scale: f64 = 1.0;
        for (&x, &w) in m.iter().zip(&self.weights) {
            let x = to_f64(x);
            proj += w * x;
            scale = scale.max(x.abs());
        }
        (proj, scale.log2())
    }

    fn scaled(&self, proj: f64, exponent: i32) -> f64 {
        proj / (self.quantum * 2f64.powi(exponent))
    }

    fn key<T: Real>(&self, m: &[T]) -> i64 {
        let (proj, lg) = self.project(m);
        self.scaled(proj, lg.ceil() as i32).round() as i64
    }

    /// Equal matrices move the scaled projection by at most tol/quantum of a
    /// bin, so a neighbouring bin or exponent is only probed near a boundary.
    fn find<T: Real>(&self, m: &[T], ball: &WordBall<T>, rejections: &mut usize) -> Option<(usize, f64, bool)> {
        let (proj, lg) = self.project(m);
        let e = lg.ceil() as i32;
        let slack = 1.5 * self.tol / self.quantum;
        let mut exponents = vec![e];
        if e > 0 && lg - (e - 1) as f64 <= 1e-6 {
            exponents.push(e - 1);
        }
        if e as f64 - lg <= 1e-6 {
            exponents.push(e + 1);
        }
        let signs: &[bool] = if self.even { &[false, true] } else { &[false] };
        for &exponent in &exponents {
            for &neg in signs {
                let x = self.scaled(if neg { -proj } else { proj }, exponent);
                let k = x.round() as i64;
                let frac = x - k as f64;
                let mut keys = vec![k];
                if frac > 0.5 - slack {
                    keys.push(k + 1);
                }
                if frac < -0.5 + slack {
                    keys.push(k - 1);
                }
                for key in keys {
                    let mut cur = self.head.get(&key).copied();
                    while let Some(idx) = cur {
                        let dev = deviation(m, ball.matrix_slice(idx as usize), neg);
                        if dev <= self.tol {
                            return Some((idx as usize, dev, neg));
                        }
                        *rejections += 1;
                        let nx = self.next[idx as usize];
                        cur = (nx != NO_PARENT).then_some(nx);
                    }
                }
            }
        }
        None
    }

    fn insert<T: Real>(&mut self, m: &[T], idx: usize) {
        let k = self.key(m);
        debug_assert_eq!(idx, self.next.len());
        let prev = self.head.insert(k, idx as u32);
        self.next.push(prev.unwrap_or(NO_PARENT));
    }
}

pub fn enumerate_ball<T: Real>(
    preset: &GroupPreset<T>,
    radius: usize,
    budget: usize,
) -> Result<WordBall<T>, OrbitError<T>> {
    enumerate_ball_with(preset, radius, budget, &Tolerances::default())
}

/// Breadth-first enumeration of reduced words up to `radius`, keeping the
/// shortlex-first word of every group element.
pub fn enumerate_ball_with<T: Real>(
    preset: &GroupPreset<T>,
    radius: usize,
    budget: usize,
    tols: &Tolerances,
) -> Result<WordBall<T>, OrbitError<T>> {
    let d = preset.dim();
    let nn = d * d;
    let letters = preset.letters();
    let gen_mats: Vec<(Vec<T>, Vec<T>)> = letters
        .iter()
        .map(|&l| {
            let g = preset.letter_element(l);
            (g.matrix().as_slice().to_vec(), g.inverse_matrix().as_slice().to_vec())
        })
        .collect();
    let mut ball = WordBall::identity(d);
    let mut index = DedupIndex::new(d, tols);
    index.insert(ball.matrix_slice(0), 0);

    for n in 1..=radius {
        let prev = ball.sphere(n - 1);
        let parents: Vec<usize> = prev.collect();
        // products in parallel, merge sequentially in shortlex order
        let produced: Vec<(Vec<T>, Vec<T>, Vec<(u32, Letter)>)> = parents
            .par_chunks(4096)
            .map(|chunk| {
                let mut mats = Vec::with_capacity(chunk.len() * letters.len() * nn);
                let mut invs = Vec::with_capacity(chunk.len() * letters.len() * nn);
                let mut tags = Vec::with_capacity(chunk.len() * letters.len());
                let mut m = vec![T::zero(); nn];
                let mut inv = vec![T::zero(); nn];
                for &p in chunk {
                    let last = ball.letter[p];
                    for (li, &l) in letters.iter().enumerate() {
                        if last != 0 && l == -last {
                            continue;
                        }
                        mul_into(ball.matrix_slice(p), &gen_mats[li].0, d, &mut m);
                        mul_into(&gen_mats[li].1, ball.inverse_slice(p), d, &mut inv);
                        mats.extend_from_slice(&m);
                        invs.extend_from_slice(&inv);
                        tags.push((p as u32, l));
                    }
                }
                (mats, invs, tags)
            })
            .collect();
        for (mats, invs, tags) in produced {
            for (c, &(p, l)) in tags.iter().enumerate() {
                let m = &mats[c * nn..(c + 1) * nn];
                ball.dedup.candidates += 1;
                let mut rejections = 0;
                let found = index.find(m, &ball, &mut rejections);
                ball.dedup.bucket_rejections += rejections;
                if let Some((hit, dev, neg)) = found {
                    if preset.free && dev <= EXACT_COLLISION && !neg {
                        let mut w = ball.word(p as usize).letters().to_vec();
                        w.push(l);
                        return Err(OrbitError::NonDiscreteSuspect {
                            first: ball.word(hit).to_string(),
                            second: Word::new(w).to_string(),
                        });
                    }
                    ball.dedup.merged += 1;
                    ball.dedup.sign_merges += neg as usize;
                    ball.dedup.max_merge_deviation = ball.dedup.max_merge_deviation.max(dev);
                    continue;
                }
                if ball.len() >= budget {
                    ball.close_sphere();
                    ball.radius = n;
                    ball.truncated = true;
                    return Err(OrbitError::BudgetExceeded {
                        budget,
                        reached: n,
                        partial: Box::new(ball),
                    });
                }
                let idx = ball.len();
                ball.push(m, &invs[c * nn..(c + 1) * nn], p, l);
                index.insert(m, idx);
            }
        }
        ball.close_sphere();
        ball.radius = n;
    }
    Ok(ball)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cartan::RootSubset;

    fn cyclic() -> GroupPreset<f64> {
        let a = GroupElement::from_matrix(DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5])).unwrap();
        GroupPreset::new("cyclic", vec![a], RootSubset::full(2)).unwrap().marked_free()
    }

    #[test]
    fn cyclic_ball_has_two_per_sphere() {
        let ball = enumerate_ball(&cyclic(), 5, 1000).unwrap();
        assert_eq!(ball.len(), 11);
        assert_eq!(ball.sphere_sizes(), vec![1, 2, 2, 2, 2, 2]);
        assert_eq!(ball.word(ball.sphere(3).start).to_string(), "aaa");
        assert_eq!(ball.word_length(7), 4);
    }

    #[test]
    fn budget_returns_partial_ball() {
        let err = enumerate_ball(&cyclic(), 5, 6).unwrap_err();
        let partial = err.into_partial().unwrap();
        assert!(partial.truncated);
        assert_eq!(partial.len(), 6);
    }

    #[test]
    fn finite_quotient_merges() {
        // commuting diagonal matrices generate Z²
        let a = GroupElement::from_matrix(DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.5])).unwrap();
        let b = GroupElement::from_matrix(DMatrix::from_row_slice(3, 3, &[3.0, 0.0, 0.0, 0.0, 1.0 / 9.0, 0.0, 0.0, 0.0, 3.0])).unwrap();
        let p = GroupPreset::new("z2", vec![a, b], RootSubset::full(3)).unwrap();
        let ball = enumerate_ball(&p, 4, 10_000).unwrap();
        // Z² ball of radius n has 2n² + 2n + 1 points
        assert_eq!(ball.len(), 41);
        assert!(ball.dedup.merged > 0);
        let free = p.marked_free();
        assert!(matches!(enumerate_ball(&free, 2, 100), Err(OrbitError::NonDiscreteSuspect { .. })));
    }
}
