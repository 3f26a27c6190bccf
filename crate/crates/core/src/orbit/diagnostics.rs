use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::Serialize;

use super::WordBall;
use crate::cartan::{
    cartan_project, flag_distance, is_transverse, u_theta, u_theta_unchecked, CartanError, GroupElement, PartialFlag,
    RootSubset, Word,
};
use crate::scalar::{lit, to_f64, Real};

#[derive(Debug, Clone, Serialize)]
pub struct SphereGap {
    pub n: usize,
    pub count: usize,
    /// min over the sphere of min_{k∈θ} α_k(κ(γ))
    pub min_gap: f64,
    pub max_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DivergenceTable {
    pub rows: Vec<SphereGap>,
    /// The minimal gap increases strictly over the outer half of the spheres.
    pub divergent_consistent: bool,
}

const STRICT_STEP: f64 = 1e-9;

pub fn divergence_diagnostic<T: Real>(ball: &WordBall<T>, theta: &RootSubset) -> Result<DivergenceTable, CartanError> {
    let mut rows = Vec::with_capacity(ball.radius());
    for n in 1..=ball.radius() {
        let range = ball.sphere(n);
        let gaps: Vec<f64> = range
            .clone()
            .into_par_iter()
            .map(|i| cartan_project(&ball.element(i)).map(|k| to_f64(k.min_alpha(theta))))
            .collect::<Result<_, _>>()?;
        rows.push(SphereGap {
            n,
            count: range.len(),
            min_gap: gaps.iter().copied().fold(f64::INFINITY, f64::min),
            max_gap: gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        });
    }
    let start = (ball.radius() / 2).max(1);
    let tail: Vec<f64> = rows.iter().filter(|r| r.n >= start).map(|r| r.min_gap).collect();
    let divergent_consistent = tail.len() >= 3 && tail.windows(2).all(|w| w[1] > w[0] + STRICT_STEP);
    Ok(DivergenceTable {
        rows,
        divergent_consistent,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConditioningSummary {
    pub pairs: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

#[derive(Debug, Clone)]
pub struct LimitSample<T: Real> {
    pub flags: Vec<(Word, PartialFlag<T>)>,
    pub weights: Vec<f64>,
    pub conditioning: ConditioningSummary,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// U_θ(γ) for one element of the outermost sphere per word prefix of length
/// `prefix_len`; since sphere elements are in shortlex order, each prefix
/// class is contiguous and the first member is taken. Sampling by prefix
/// keeps the pairwise separation independent of the radius.
pub fn limit_set_sample<T: Real>(
    ball: &WordBall<T>,
    theta: &RootSubset,
    prefix_len: usize,
) -> Result<LimitSample<T>, CartanError> {
    let r = ball.radius();
    let m = prefix_len.min(r);
    let mut flags = Vec::new();
    let mut last_prefix: Option<Word> = None;
    for i in ball.sphere(r) {
        let w = ball.word(i);
        let p = w.prefix(m);
        if last_prefix.as_ref() == Some(&p) {
            continue;
        }
        last_prefix = Some(p);
        flags.push((w, u_theta(&ball.element(i), theta)?));
    }
    let mut conds: Vec<f64> = Vec::new();
    for i in 0..flags.len() {
        for j in (i + 1)..flags.len() {
            conds.push(to_f64(is_transverse(&flags[i].1, &flags[j].1).1));
        }
    }
    conds.sort_by(|a, b| a.total_cmp(b));
    let n = flags.len();
    Ok(LimitSample {
        flags,
        weights: vec![1.0 / n.max(1) as f64; n],
        conditioning: ConditioningSummary {
            pairs: conds.len(),
            min: conds.first().copied().unwrap_or(f64::NAN),
            q1: quantile(&conds, 0.25),
            median: quantile(&conds, 0.5),
            q3: quantile(&conds, 0.75),
        },
    })
}

/// A point of Γ ∪ Λ_θ(Γ).
#[derive(Debug, Clone)]
pub enum CompactPoint<T: Real> {
    Group(GroupElement<T>),
    Flag(PartialFlag<T>),
}

fn m_theta<T: Real>(g: &GroupElement<T>, theta: &RootSubset) -> T {
    cartan_project(g)
        .map(|k| (-k.min_alpha(theta)).exp())
        .unwrap_or(T::zero())
}

/// Principal-angle flag metric rescaled to diameter 1.
fn flag_metric<T: Real>(f: &PartialFlag<T>, g: &PartialFlag<T>) -> T {
    flag_distance(f, g) / lit::<T>(FRAC_PI_2)
}

fn same_element<T: Real>(a: &GroupElement<T>, b: &GroupElement<T>) -> bool {
    a.matrix().iter().zip(b.matrix().iter()).all(|(&x, &y)| {
        let s = T::one().max(x.abs()).max(y.abs());
        (x - y).abs() <= lit::<T>(1e-7) * s
    })
}

/// The metric on Γ ∪ Λ_θ(Γ): m_θ(γ) = exp(−min_{α∈θ} α(κ(γ))) weights the
/// discrete metric on Γ, and flags are compared through U_θ.
pub fn compactification_distance<T: Real>(
    a: &CompactPoint<T>,
    b: &CompactPoint<T>,
    theta: &RootSubset,
) -> Result<T, CartanError> {
    theta.require_symmetric()?;
    Ok(match (a, b) {
        (CompactPoint::Group(g), CompactPoint::Group(h)) => {
            let discrete = if same_element(g, h) {
                T::zero()
            } else {
                m_theta(g, theta).max(m_theta(h, theta))
            };
            discrete + flag_metric(&u_theta_unchecked(g, theta), &u_theta_unchecked(h, theta))
        }
        (CompactPoint::Group(g), CompactPoint::Flag(f)) | (CompactPoint::Flag(f), CompactPoint::Group(g)) => {
            m_theta(g, theta) + flag_metric(&u_theta_unchecked(g, theta), f)
        }
        (CompactPoint::Flag(f), CompactPoint::Flag(g)) => flag_metric(f, g),
    })
}
