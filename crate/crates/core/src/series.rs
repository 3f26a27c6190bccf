//! Poincaré series, critical exponents and the experiments built on them.
//!
//! Everything here works on `f64` balls: sums over 10⁶ terms with exponents
//! in the hundreds leave no room for single precision.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cartan::{cartan_project, flag_distance, phi_length, CartanError, LinearFunctional, RootSubset, Word};
use crate::orbit::{enumerate_ball, limit_set_sample, GroupPreset, OrbitError, WordBall};

type Functional = LinearFunctional<f64>;

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("not enough orbit points below the complete level to regress: {points} points, {usable} usable bins")]
    InsufficientGrowth { points: usize, usable: usize },
    #[error(transparent)]
    Cartan(#[from] CartanError),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
}

/// Neumaier's variant of compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut k = KahanSum::default();
        for x in iter {
            k.add(x);
        }
        k
    }
}

/// φ(κ(γ)) for every element, in ball order.
pub fn phi_values(ball: &WordBall<f64>, phi: &Functional) -> Result<Vec<f64>, CartanError> {
    (0..ball.len())
        .into_par_iter()
        .map(|i| cartan_project(&ball.element(i)).map(|k| phi.eval(&k)))
        .collect()
}

/// Σ e^{−s·v} in ball order.
pub fn poincare_from_values(values: &[f64], s: f64) -> f64 {
    values.iter().map(|&v| (-s * v).exp()).collect::<KahanSum>().value()
}

/// Q(s) = Σ_{γ ∈ ball} e^{−s φ(κ(γ))}, identity included.
pub fn poincare_partial(ball: &WordBall<f64>, phi: &Functional, s: f64) -> Result<f64, CartanError> {
    Ok(poincare_from_values(&phi_values(ball, phi)?, s))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartialSum {
    pub s: f64,
    pub radius: usize,
    pub partial_sum: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadiusEstimate {
    pub radius: usize,
    /// Orbit points with φ below this level all lie in the ball.
    pub complete_below: f64,
    pub window: (f64, f64),
    pub regression: f64,
    pub bisection: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesEstimate {
    pub phi: Functional,
    pub radii: Vec<usize>,
    pub per_radius: Vec<RadiusEstimate>,
    pub partial_sums: Vec<PartialSum>,
    /// (T, N(T)) at the largest radius.
    pub counts: Vec<(f64, usize)>,
    /// Q_r(delta_hat) for r = 0, 1, …, largest radius.
    pub critical_sums: Vec<f64>,
    pub delta_hat: f64,
    pub band: f64,
    /// φ fails to be positive on some sampled limit-cone direction.
    pub possibly_infinite: bool,
}

const GRID: usize = 64;

fn sphere_values<'a>(values: &'a [f64], ball: &WordBall<f64>, r: usize) -> &'a [f64] {
    &values[ball.sphere(r)]
}

fn log_sum_exp(values: &[f64], s: f64) -> f64 {
    let m = values.iter().map(|&v| -s * v).fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + values.iter().map(|&v| (-s * v - m).exp()).collect::<KahanSum>().value().ln()
}

/// Root of s ↦ log S_R(s) − log S_{R−1}(s), S_r the sphere sum: the exponent
/// at which consecutive spheres carry equal mass.
fn balance_exponent(outer: &[f64], inner: &[f64]) -> f64 {
    let g = |s: f64| log_sum_exp(outer, s) - log_sum_exp(inner, s);
    if g(0.0) <= 0.0 {
        return 0.0;
    }
    let mut hi = 1.0;
    while g(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn count_below(sorted: &[f64], t: f64) -> usize {
    sorted.partition_point(|&v| v < t)
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Growth rate of N(T) from the values of a ball of the given radius, over
/// T between 20% and 80% of the level below which the ball is complete.
/// Percentiles of the values themselves would sit inside the last one or two
/// spheres, where a lumpy spectrum makes the slope meaningless. The count is taken over annuli N(T) − N(T − Δ), Δ a quarter of the
/// window, so polynomial growth such as that of a cyclic group regresses
/// to slope 0 instead of log T / T.
fn radius_estimate(ball: &WordBall<f64>, values: &[f64], r: usize) -> Result<RadiusEstimate, SeriesError> {
    let end = ball.sphere(r).end;
    let outer = sphere_values(values, ball, r);
    let complete_below = outer.iter().copied().fold(f64::INFINITY, f64::min);
    let mut inside: Vec<f64> = values[..end].iter().copied().filter(|&v| v < complete_below).collect();
    inside.sort_by(f64::total_cmp);
    if inside.len() < 16 || r < 2 {
        return Err(SeriesError::InsufficientGrowth {
            points: inside.len(),
            usable: 0,
        });
    }
    let (lo, hi) = (0.2 * complete_below, 0.8 * complete_below);
    let width = (hi - lo) / 4.0;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    if width > 0.0 {
        for k in 0..GRID {
            let t = lo + (hi - lo) * k as f64 / (GRID - 1) as f64;
            let annulus = count_below(&inside, t) - count_below(&inside, t - width);
            if annulus > 0 {
                xs.push(t);
                ys.push((annulus as f64).ln());
            }
        }
    }
    if xs.len() < 8 {
        return Err(SeriesError::InsufficientGrowth {
            points: inside.len(),
            usable: xs.len(),
        });
    }
    let bisection = balance_exponent(outer, sphere_values(values, ball, r - 1));
    Ok(RadiusEstimate {
        radius: r,
        complete_below,
        window: (lo, hi),
        regression: slope(&xs, &ys).max(0.0),
        bisection,
    })
}

/// Critical exponent from an enumerated ball, evaluated at each of `radii`
/// (each at most the ball radius); the last radius gives delta_hat and the
/// band is the spread between the regression and bisection estimators.
pub fn critical_exponent_of_ball(
    ball: &WordBall<f64>,
    phi: &Functional,
    radii: &[usize],
) -> Result<SeriesEstimate, SeriesError> {
    let values = phi_values(ball, phi)?;
    estimate_from_values(ball, &values, phi, radii)
}

fn estimate_from_values(
    ball: &WordBall<f64>,
    values: &[f64],
    phi: &Functional,
    radii: &[usize],
) -> Result<SeriesEstimate, SeriesError> {
    let mut radii: Vec<usize> = radii.iter().copied().filter(|&r| r <= ball.radius()).collect();
    radii.sort_unstable();
    radii.dedup();
    if radii.is_empty() {
        radii.push(ball.radius());
    }
    let per_radius = radii
        .iter()
        .map(|&r| radius_estimate(ball, values, r))
        .collect::<Result<Vec<_>, _>>()?;
    let last = per_radius.last().expect("nonempty");
    let delta_hat = last.regression;
    let band = (last.regression - last.bisection).abs();

    let rmax = *radii.last().expect("nonempty");
    let end = ball.sphere(rmax).end;
    let mut sorted = values[..end].to_vec();
    sorted.sort_by(f64::total_cmp);
    let counts = (0..GRID)
        .map(|k| {
            let t = last.complete_below * k as f64 / (GRID - 1) as f64;
            (t, count_below(&sorted, t))
        })
        .collect();

    let scales: &[f64] = if delta_hat > 0.0 { &[0.8, 0.9, 1.0, 1.1, 1.25] } else { &[0.0, 0.1, 0.25, 0.5, 1.0] };
    let mut partial_sums = Vec::new();
    for &c in scales {
        let s = if delta_hat > 0.0 { c * delta_hat } else { c };
        for &r in &radii {
            partial_sums.push(PartialSum {
                s,
                radius: r,
                partial_sum: poincare_from_values(&values[..ball.sphere(r).end], s),
            });
        }
    }
    let mut critical_sums = Vec::with_capacity(rmax + 1);
    let mut acc = KahanSum::default();
    for r in 0..=rmax {
        for &v in sphere_values(values, ball, r) {
            acc.add((-delta_hat * v).exp());
        }
        critical_sums.push(acc.value());
    }
    // φ(κ(γ)) ≤ 0 on an outer sphere puts a cone direction in the closed negative half
    let from = rmax.saturating_sub(1).max(1).min(rmax);
    let possibly_infinite = values[ball.sphere(from).start..end].iter().any(|&v| v <= 0.0);
    Ok(SeriesEstimate {
        phi: phi.clone(),
        radii,
        per_radius,
        partial_sums,
        counts,
        critical_sums,
        delta_hat,
        band,
        possibly_infinite,
    })
}

/// Enumerates the ball of the largest radius and estimates δ^φ.
pub fn critical_exponent(
    preset: &GroupPreset<f64>,
    phi: &Functional,
    radii: &[usize],
    budget: usize,
) -> Result<SeriesEstimate, SeriesError> {
    let r = radii.iter().copied().max().unwrap_or(0);
    let ball = enumerate_ball(preset, r, budget)?;
    critical_exponent_of_ball(&ball, phi, radii)
}

/// Directions of κ_θ over the outer spheres, in weight coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitCone {
    pub theta: RootSubset,
    pub directions: Vec<Vec<f64>>,
    /// Per-coordinate range of the unit directions.
    pub coord_min: Vec<f64>,
    pub coord_max: Vec<f64>,
    /// Largest angle between a direction and the mean direction.
    pub angular_radius: f64,
    /// Numerical rank of the direction set (singular values above 1e−3 of
    /// the largest).
    pub rank: usize,
}

impl LimitCone {
    /// min over sampled directions of φ; positive means φ > 0 on the sample.
    pub fn positivity(&self, phi: &Functional) -> f64 {
        self.directions
            .iter()
            .map(|d| d.iter().zip(&phi.coeffs).map(|(x, c)| x * c).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }
}

fn limit_cone_from(ball: &WordBall<f64>, theta: RootSubset, r: usize) -> Result<LimitCone, CartanError> {
    let from = r.saturating_sub(1).max(1).min(r);
    let idx: Vec<usize> = (from..=r).flat_map(|n| ball.sphere(n)).collect();
    let directions: Vec<Vec<f64>> = idx
        .par_iter()
        .map(|&i| {
            let w = cartan_project(&ball.element(i))?.weight_coords(&theta);
            let norm = w.values.iter().map(|x| x * x).sum::<f64>().sqrt();
            Ok(w.values.iter().map(|x| x / norm.max(f64::MIN_POSITIVE)).collect())
        })
        .collect::<Result<_, CartanError>>()?;
    let k = theta.len();
    let mut coord_min = vec![f64::INFINITY; k];
    let mut coord_max = vec![f64::NEG_INFINITY; k];
    for d in &directions {
        for j in 0..k {
            coord_min[j] = coord_min[j].min(d[j]);
            coord_max[j] = coord_max[j].max(d[j]);
        }
    }
    let mut mean = vec![0.0; k];
    for d in &directions {
        for j in 0..k {
            mean[j] += d[j];
        }
    }
    let mn = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
    let angular_radius = directions
        .iter()
        .map(|d| {
            let c = d.iter().zip(&mean).map(|(x, m)| x * m).sum::<f64>() / mn.max(f64::MIN_POSITIVE);
            c.clamp(-1.0, 1.0).acos()
        })
        .fold(0.0, f64::max);
    // rank from the k×k Gram matrix of the direction set
    let gram = nalgebra::DMatrix::from_fn(k, k, |a, b| directions.iter().map(|d| d[a] * d[b]).sum::<f64>());
    let rank = if directions.is_empty() {
        0
    } else {
        crate::linalg::numerical_rank(&gram, 1e-6)
    };
    Ok(LimitCone {
        theta,
        directions,
        coord_min,
        coord_max,
        angular_radius,
        rank,
    })
}

/// Unit directions of κ_θ(γ) for γ on the two outermost spheres.
pub fn limit_cone_sample(ball: &WordBall<f64>, theta: &RootSubset) -> Result<LimitCone, CartanError> {
    limit_cone_from(ball, theta.clone(), ball.radius())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DivergenceType {
    DivergentConsistent,
    ConvergentConsistent,
    Inconclusive,
}

/// Heuristic reading of the partial sums Q_r(delta_hat): sphere masses that
/// stay comparable (polynomial growth of Q) suggest divergence, geometric
/// decay with a negligible tail suggests convergence. A finite ball cannot
/// decide the dichotomy; the verdict is only a consistency label.
pub fn divergence_type(estimate: &SeriesEstimate) -> DivergenceType {
    let q = &estimate.critical_sums;
    if !estimate.delta_hat.is_finite() || q.len() < 5 {
        return DivergenceType::Inconclusive;
    }
    let n = q.len();
    let sphere = |r: usize| q[r] - q[r - 1];
    let ratios: Vec<f64> = (n - 3..n).map(|r| sphere(r) / sphere(r - 1)).collect();
    if ratios.iter().any(|x| !x.is_finite() || *x <= 0.0) {
        return DivergenceType::Inconclusive;
    }
    let rho = ratios.iter().map(|x| x.ln()).sum::<f64>() / ratios.len() as f64;
    let rho = rho.exp();
    let tail = sphere(n - 1) * rho / (1.0 - rho);
    if rho < 0.6 && tail < 1e-3 * q[n - 1] {
        DivergenceType::ConvergentConsistent
    } else if (0.8..=1.25).contains(&rho) {
        DivergenceType::DivergentConsistent
    } else {
        DivergenceType::Inconclusive
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManhattanRow {
    pub lambda: f64,
    pub delta_hat: f64,
    pub band: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManhattanTable {
    /// delta_hat of the unnormalized φ₁ and φ₂.
    pub scale: (f64, f64),
    pub rows: Vec<ManhattanRow>,
    /// Every value is at most 1 + band.
    pub below_one: bool,
    /// Midpoint concavity within bands on adjacent triples.
    pub midpoint_concave: bool,
    /// max |ℓ^{φ₁}(γ) − ℓ^{φ₂}(γ)| over sampled γ, for the normalized φᵢ.
    pub length_probe: f64,
    pub probe_words: usize,
}

/// Words of elements drawn from the ball without replacement.
pub fn sample_words(ball: &WordBall<f64>, count: usize, seed: u64) -> Vec<Word> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = ball.len().saturating_sub(1);
    let mut idx: Vec<usize> = sample(&mut rng, n, count.min(n)).into_iter().map(|i| i + 1).collect();
    idx.sort_unstable();
    idx.into_iter().map(|i| ball.word(i)).collect()
}

/// The Manhattan curve λ ↦ δ^{λφ₁ + (1−λ)φ₂} after normalizing δ^{φᵢ} = 1.
pub fn manhattan_experiment(
    ball: &WordBall<f64>,
    phi1: &Functional,
    phi2: &Functional,
    lambdas: &[f64],
    radii: &[usize],
    probe_words: usize,
    seed: u64,
) -> Result<ManhattanTable, SeriesError> {
    let v1 = phi_values(ball, phi1)?;
    let v2 = phi_values(ball, phi2)?;
    let d1 = estimate_from_values(ball, &v1, phi1, radii)?.delta_hat;
    let d2 = estimate_from_values(ball, &v2, phi2, radii)?.delta_hat;
    let n1 = phi1.scaled(d1);
    let n2 = phi2.scaled(d2);
    let mut rows = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        let mixed: Vec<f64> = v1.iter().zip(&v2).map(|(a, b)| l * d1 * a + (1.0 - l) * d2 * b).collect();
        let phi = n1.combine(l, &n2, 1.0 - l)?;
        let e = estimate_from_values(ball, &mixed, &phi, radii)?;
        rows.push(ManhattanRow {
            lambda: l,
            delta_hat: e.delta_hat,
            band: e.band,
        });
    }
    let below_one = rows.iter().all(|r| r.delta_hat <= 1.0 + r.band + 1e-9);
    let midpoint_concave = rows.windows(3).all(|w| {
        let mid = 0.5 * (w[0].delta_hat + w[2].delta_hat);
        w[1].delta_hat + w[1].band + 0.5 * (w[0].band + w[2].band) + 1e-9 >= mid
    });
    let sample_set = sample_words(ball, probe_words, seed);
    let mut probe: f64 = 0.0;
    for w in &sample_set {
        // a cyclically reduced conjugate has the same spectrum and far better
        // conditioned eigenvalues
        let g = element_of(ball, &w.cyclically_reduced());
        probe = probe.max((phi_length(&g, &n1)? - phi_length(&g, &n2)?).abs());
    }
    Ok(ManhattanTable {
        scale: (d1, d2),
        rows,
        below_one,
        midpoint_concave,
        length_probe: probe,
        probe_words: sample_set.len(),
    })
}

fn element_of(ball: &WordBall<f64>, w: &Word) -> crate::cartan::GroupElement<f64> {
    if let Some(i) = ball.sphere(w.len()).find(|&i| ball.word(i) == *w) {
        return ball.element(i).with_word(w.clone());
    }
    // not a stored representative (relators): multiply the letters
    let letters: Vec<_> = ball.sphere(1).map(|i| (ball.last_letter(i), ball.element(i))).collect();
    let mut g = crate::cartan::GroupElement::identity(ball.dim());
    for l in w.letters() {
        let (_, x) = letters.iter().find(|(m, _)| m == l).expect("generator letter");
        g = g.compose(x);
    }
    g.with_word(w.clone())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntropyDropReport {
    pub delta_group: f64,
    pub band_group: f64,
    pub delta_subgroup: f64,
    pub band_subgroup: f64,
    pub gap: f64,
    /// max over the group's limit sample of the distance to the subgroup's.
    pub hausdorff_group_to_sub: f64,
    pub hausdorff_sub_to_group: f64,
}

/// δ^φ of a preset against δ^φ of the subgroup generated by `words`, both
/// balls of the same word radius in their own generators.
pub fn entropy_drop_experiment(
    preset: &GroupPreset<f64>,
    words: &[Word],
    phi: &Functional,
    radius: usize,
    budget: usize,
) -> Result<EntropyDropReport, SeriesError> {
    let radii = [radius];
    let big = enumerate_ball(preset, radius, budget)?;
    let sub_preset = preset.subgroup(words)?;
    let small = enumerate_ball(&sub_preset, radius, budget)?;
    let eg = critical_exponent_of_ball(&big, phi, &radii)?;
    let es = critical_exponent_of_ball(&small, phi, &radii)?;
    let prefix = 3.min(radius);
    let fg = limit_set_sample(&big, &phi.theta, prefix)?;
    let fs = limit_set_sample(&small, &phi.theta, prefix)?;
    let directed = |a: &[(Word, crate::cartan::PartialFlag<f64>)], b: &[(Word, crate::cartan::PartialFlag<f64>)]| {
        a.iter()
            .map(|(_, f)| b.iter().map(|(_, g)| flag_distance(f, g)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    Ok(EntropyDropReport {
        delta_group: eg.delta_hat,
        band_group: eg.band,
        delta_subgroup: es.delta_hat,
        band_subgroup: es.band,
        gap: eg.delta_hat - es.delta_hat,
        hausdorff_group_to_sub: directed(&fg.flags, &fs.flags),
        hausdorff_sub_to_group: directed(&fs.flags, &fg.flags),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExhaustionRow {
    pub label: String,
    pub delta_hat: f64,
    pub band: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExhaustionReport {
    pub rows: Vec<ExhaustionRow>,
    pub non_decreasing: bool,
    /// |last − full| ≤ band of the full group.
    pub reaches_full: bool,
    pub full: ExhaustionRow,
}

/// δ^φ along a nested sequence of subgroups; the full group is appended as
/// the reference value.
pub fn exhaustion(
    preset: &GroupPreset<f64>,
    schedule: &[Vec<Word>],
    phi: &Functional,
    radius: usize,
    budget: usize,
) -> Result<ExhaustionReport, SeriesError> {
    let radii = [radius];
    let mut rows = Vec::with_capacity(schedule.len());
    for words in schedule {
        let sub = preset.subgroup(words)?;
        let e = critical_exponent_of_ball(&enumerate_ball(&sub, radius, budget)?, phi, &radii)?;
        rows.push(ExhaustionRow {
            label: sub.name.clone(),
            delta_hat: e.delta_hat,
            band: e.band,
        });
    }
    let e = critical_exponent_of_ball(&enumerate_ball(preset, radius, budget)?, phi, &radii)?;
    let full = ExhaustionRow {
        label: preset.name.clone(),
        delta_hat: e.delta_hat,
        band: e.band,
    };
    let non_decreasing = rows.windows(2).all(|w| w[1].delta_hat >= w[0].delta_hat);
    let reaches_full = rows
        .last()
        .is_some_and(|r| (r.delta_hat - full.delta_hat).abs() <= full.band + 1e-12);
    Ok(ExhaustionReport {
        rows,
        non_decreasing,
        reaches_full,
        full,
    })
}

/// max over `words` of |δ₁ ℓ^{φ₁}(ρ₁(w)) − δ₂ ℓ^{φ₂}(ρ₂(w))|, the two
/// representations sharing one alphabet.
pub fn length_rigidity_compare(
    a: &GroupPreset<f64>,
    b: &GroupPreset<f64>,
    phi1: &Functional,
    phi2: &Functional,
    words: &[Word],
    deltas: (f64, f64),
) -> Result<f64, CartanError> {
    let mut worst: f64 = 0.0;
    for w in words {
        let w = w.cyclically_reduced();
        let l1 = phi_length(&a.evaluate(&w), phi1)?;
        let l2 = phi_length(&b.evaluate(&w), phi2)?;
        worst = worst.max((deltas.0 * l1 - deltas.1 * l2).abs());
    }
    Ok(worst)
}
