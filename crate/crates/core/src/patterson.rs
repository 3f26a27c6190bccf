//! Patterson's construction: finite atomic approximations of conformal
//! measures, with conformality, shadow-lemma and conical-mass checks.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cartan::{cartan_project, iwasawa_cocycle, u_theta_unchecked, CartanError, GroupElement, RootSubset, Word};
use crate::hilbert::{ball_shadow_half_angle, klein, preset_domain};
use crate::orbit::{GroupPreset, WordBall};
use crate::series::{phi_values, KahanSum};
use crate::{Flag, Functional};

#[derive(Debug, Error)]
pub enum PattersonError {
    #[error("normalizer is not finite and positive at s = {0}")]
    NonSummable(f64),
    #[error("s = {s} is not above delta_hat − band = {bound}")]
    BelowCritical { s: f64, bound: f64 },
    #[error("measure is not carried on flags")]
    NotFlagCarried,
    #[error("preset {0} has no Klein-disk domain")]
    NoDomain(String),
    #[error("malformed measure file: {0}")]
    Format(String),
    #[error(transparent)]
    Cartan(#[from] CartanError),
}

/// The weight modifier h(e^{φ}) of the construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HFunction {
    ConstantOne,
    /// h(t) = max(1, log t)^p.
    SlowlyVarying { p: f64 },
}

impl Default for HFunction {
    fn default() -> Self {
        HFunction::ConstantOne
    }
}

impl HFunction {
    /// ln h(e^x).
    pub fn ln_at_exp(&self, x: f64) -> f64 {
        match *self {
            HFunction::ConstantOne => 0.0,
            HFunction::SlowlyVarying { p } => p * x.max(1.0).ln(),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.ln_at_exp(t.ln()).exp()
    }

    /// Smallest ln λ₀ on the grid {1, …, 200} with h(λs) ≤ s^ε h(λ) for all
    /// grid values ln λ ∈ (ln λ₀, ln λ₀ + 400] and ln s ∈ (0, 60]; `None` if
    /// no grid point works. Also checks monotonicity along the grid.
    pub fn grid_check(&self, eps: f64) -> Option<f64> {
        let lns: Vec<f64> = (1..=120).map(|k| 0.5 * k as f64).collect();
        let monotone = (0..800).all(|k| {
            let x = 0.5 * k as f64 - 50.0;
            self.ln_at_exp(x + 0.5) >= self.ln_at_exp(x)
        });
        if !monotone {
            return None;
        }
        (1..=200).map(|k| k as f64).find(|&l0| {
            (1..=400).all(|i| {
                let l = l0 + i as f64;
                lns.iter()
                    .all(|&ls| self.ln_at_exp(l + ls) <= eps * ls + self.ln_at_exp(l) + 1e-12)
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CarrierKind {
    Group,
    Flag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    /// The group element (by its word) the atom comes from; `None` for
    /// engineered atoms placed directly on flags.
    pub word: Option<Word>,
    pub flag: Option<Flag>,
    pub weight: f64,
    /// φ(κ(γ)) of the source element.
    pub phi_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    pub atoms: Vec<Atom>,
    pub carrier: CarrierKind,
    pub s: f64,
    /// The exponent β used by the checks; equal to s by construction.
    pub beta: f64,
    pub phi: Functional,
    pub h: HFunction,
}

impl AtomicMeasure {
    pub fn total(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).collect::<KahanSum>().value()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn max_atom(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).fold(0.0, f64::max)
    }

    /// Mass of atoms whose word has length at least n.
    pub fn mass_from_length(&self, n: usize) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.word.as_ref().is_some_and(|w| w.len() >= n))
            .map(|a| a.weight)
            .collect::<KahanSum>()
            .value()
    }

    fn renormalize(&mut self) {
        let t = self.total();
        for a in &mut self.atoms {
            a.weight /= t;
        }
    }

    /// Places every atom at U_θ(γ) of its group element.
    pub fn to_flags(&self, preset: &GroupPreset<f64>) -> Result<AtomicMeasure, PattersonError> {
        let theta = &preset.theta;
        let atoms = self
            .atoms
            .par_iter()
            .map(|a| match (&a.flag, &a.word) {
                (Some(_), _) => Ok(a.clone()),
                (None, Some(w)) => Ok(Atom {
                    flag: Some(u_theta_unchecked(&preset.evaluate(w), theta)),
                    ..a.clone()
                }),
                (None, None) => Err(PattersonError::Format("atom without carrier".into())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(AtomicMeasure {
            atoms,
            carrier: CarrierKind::Flag,
            ..self.clone()
        })
    }

    /// γ_*μ: words are left-multiplied and freely reduced, flags are moved by
    /// γ, weights are unchanged.
    pub fn pushforward(&self, preset: &GroupPreset<f64>, gamma: &Word) -> AtomicMeasure {
        let g = preset.evaluate(gamma);
        let atoms = self
            .atoms
            .par_iter()
            .map(|a| Atom {
                word: a.word.as_ref().map(|w| gamma.concat(w)),
                flag: a.flag.as_ref().map(|f| f.apply(&g)),
                weight: a.weight,
                phi_value: a.phi_value,
            })
            .collect();
        AtomicMeasure {
            atoms,
            ..self.clone()
        }
    }

    /// Total variation distance, matching atoms by word.
    pub fn tv_distance(&self, other: &AtomicMeasure) -> f64 {
        use std::collections::HashMap;
        let mut diff: HashMap<&Word, f64> = HashMap::new();
        for a in &self.atoms {
            if let Some(w) = &a.word {
                *diff.entry(w).or_default() += a.weight;
            }
        }
        for a in &other.atoms {
            if let Some(w) = &a.word {
                *diff.entry(w).or_default() -= a.weight;
            }
        }
        let mut v: Vec<f64> = diff.into_values().map(f64::abs).collect();
        v.sort_by(f64::total_cmp);
        0.5 * v.into_iter().collect::<KahanSum>().value()
    }

    pub fn to_json(&self) -> Result<String, PattersonError> {
        let file = MeasureFile {
            carrier: self.carrier,
            s: self.s,
            beta: self.beta,
            phi: self.phi.clone(),
            h: self.h,
            atoms: self
                .atoms
                .iter()
                .map(|a| AtomRecord {
                    word: a.word.as_ref().map(|w| w.to_string()),
                    frame: match (&a.word, &a.flag) {
                        (None, Some(f)) => Some(f.frame().as_slice().to_vec()),
                        _ => None,
                    },
                    weight: a.weight,
                    phi_value: a.phi_value,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).map_err(|e| PattersonError::Format(e.to_string()))
    }

    /// Inverse of [`AtomicMeasure::to_json`]; flags are recomputed from the
    /// words through the preset.
    pub fn from_json(text: &str, preset: &GroupPreset<f64>) -> Result<AtomicMeasure, PattersonError> {
        let file: MeasureFile = serde_json::from_str(text).map_err(|e| PattersonError::Format(e.to_string()))?;
        let d = preset.dim();
        let atoms = file
            .atoms
            .into_iter()
            .map(|r| {
                let word = r.word.as_deref().map(Word::parse).transpose()?;
                let flag = match &r.frame {
                    Some(fr) if fr.len() == d * d => {
                        Some(Flag::from_frame(&preset.theta, &DMatrix::from_column_slice(d, d, fr))?)
                    }
                    Some(_) => return Err(PattersonError::Format("frame has the wrong size".into())),
                    None => None,
                };
                Ok(Atom {
                    word,
                    flag,
                    weight: r.weight,
                    phi_value: r.phi_value,
                })
            })
            .collect::<Result<Vec<_>, PattersonError>>()?;
        let m = AtomicMeasure {
            atoms,
            carrier: CarrierKind::Group,
            s: file.s,
            beta: file.beta,
            phi: file.phi,
            h: file.h,
        };
        match file.carrier {
            CarrierKind::Group => Ok(m),
            CarrierKind::Flag => m.to_flags(preset),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct AtomRecord {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    word: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    frame: Option<Vec<f64>>,
    weight: f64,
    phi_value: f64,
}

#[derive(Serialize, Deserialize)]
struct MeasureFile {
    carrier: CarrierKind,
    s: f64,
    beta: f64,
    phi: Functional,
    h: HFunction,
    atoms: Vec<AtomRecord>,
}

fn measure_from_values(
    ball: &WordBall<f64>,
    values: &[f64],
    range: std::ops::Range<usize>,
    phi: &Functional,
    s: f64,
    h: HFunction,
) -> Result<AtomicMeasure, PattersonError> {
    let logw: Vec<f64> = values[range.clone()].iter().map(|&v| h.ln_at_exp(v) - s * v).collect();
    let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(PattersonError::NonSummable(s));
    }
    let w: Vec<f64> = logw.iter().map(|&x| (x - top).exp()).collect();
    let total = w.iter().copied().collect::<KahanSum>().value();
    if !(total.is_finite() && total > 0.0) {
        return Err(PattersonError::NonSummable(s));
    }
    let atoms = range
        .zip(&w)
        .map(|(i, &wi)| Atom {
            word: Some(ball.word(i)),
            flag: None,
            weight: wi / total,
            phi_value: values[i],
        })
        .collect();
    let mut m = AtomicMeasure {
        atoms,
        carrier: CarrierKind::Group,
        s,
        beta: s,
        phi: phi.clone(),
        h,
    };
    m.renormalize();
    Ok(m)
}

/// μ_s ∝ Σ h(e^{φ(κ(γ))}) e^{−sφ(κ(γ))} δ_γ over the whole ball.
pub fn patterson_measure(
    ball: &WordBall<f64>,
    phi: &Functional,
    s: f64,
    h: HFunction,
) -> Result<AtomicMeasure, PattersonError> {
    let values = phi_values(ball, phi)?;
    measure_from_values(ball, &values, 0..ball.len(), phi, s, h)
}

/// The same weights restricted to the outer `width` spheres. At s equal to
/// the sphere-balance exponent this is the finite stand-in for the weak-*
/// limit that keeps the truncation boundary term of order the sphere-to-
/// sphere mass fluctuation rather than 1/R.
pub fn patterson_shell(
    ball: &WordBall<f64>,
    phi: &Functional,
    s: f64,
    h: HFunction,
    width: usize,
) -> Result<AtomicMeasure, PattersonError> {
    let values = phi_values(ball, phi)?;
    let r = ball.radius();
    let start = ball.sphere((r + 1).saturating_sub(width.max(1))).start;
    measure_from_values(ball, &values, start..ball.len(), phi, s, h)
}

/// Guards the summability precondition s > delta_hat − band.
pub fn check_exponent(s: f64, delta_hat: f64, band: f64) -> Result<(), PattersonError> {
    if s > delta_hat - band {
        Ok(())
    } else {
        Err(PattersonError::BelowCritical {
            s,
            bound: delta_hat - band,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScheduleStep {
    pub k: u32,
    pub s: f64,
    pub radius: usize,
    pub tv_to_previous: Option<f64>,
    pub max_atom: f64,
}

/// s_k = δ̂(1 + 2^{−k}) paired with growing radii; total variation between
/// consecutive approximations monitors convergence.
pub fn patterson_schedule(
    ball: &WordBall<f64>,
    phi: &Functional,
    delta_hat: f64,
    steps: &[(u32, usize)],
    h: HFunction,
) -> Result<Vec<ScheduleStep>, PattersonError> {
    let mut out: Vec<ScheduleStep> = Vec::new();
    let mut prev: Option<AtomicMeasure> = None;
    for &(k, radius) in steps {
        let s = delta_hat * (1.0 + 0.5f64.powi(k as i32));
        let m = patterson_measure(&ball.truncated_to(radius), phi, s, h)?;
        out.push(ScheduleStep {
            k,
            s,
            radius,
            tv_to_previous: prev.as_ref().map(|p| p.tv_distance(&m)),
            max_atom: m.max_atom(),
        });
        prev = Some(m);
    }
    Ok(out)
}

/// Voronoi cells of a flag sample. Membership uses the chordal projector
/// distance max_j ‖P_{F^j} − P_{C^j}‖, which orders points exactly like the
/// principal-angle metric when θ consists of a single line or hyperplane.
#[derive(Debug, Clone)]
pub struct Cells {
    pub centers: Vec<Flag>,
    projectors: Vec<Vec<DMatrix<f64>>>,
    theta: RootSubset,
}

fn projectors(f: &Flag, theta: &RootSubset) -> Vec<DMatrix<f64>> {
    theta.indices().iter().map(|&j| f.projector(j)).collect()
}

impl Cells {
    pub fn new(centers: Vec<Flag>) -> Self {
        let theta = centers.first().map(|f| f.theta().clone()).unwrap_or_else(|| RootSubset::full(2));
        let projectors = centers.iter().map(|c| projectors(c, &theta)).collect();
        Cells {
            centers,
            projectors,
            theta,
        }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn assign(&self, f: &Flag) -> usize {
        let p = projectors(f, &self.theta);
        let mut best = (f64::INFINITY, 0);
        for (k, c) in self.projectors.iter().enumerate() {
            let d = p.iter().zip(c).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            if d < best.0 {
                best = (d, k);
            }
        }
        best.1
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellComparison {
    pub cell: usize,
    pub mass: f64,
    pub pushed: f64,
    pub transported: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConformalityReport {
    pub max_rel_error: f64,
    pub cells: Vec<CellComparison>,
    /// Cells below the mass floor, skipped.
    pub skipped: Vec<usize>,
}

pub const MASS_FLOOR: f64 = 1e-4;

/// Compares γ_*μ(A) with ∫_A e^{−βφ(B_θ(γ⁻¹, F))} dμ(F) on every cell of
/// mass at least `mass_floor`.
pub fn conformality_check(
    mu: &AtomicMeasure,
    gamma: &GroupElement<f64>,
    cells: &Cells,
    mass_floor: f64,
) -> Result<ConformalityReport, PattersonError> {
    if mu.carrier != CarrierKind::Flag {
        return Err(PattersonError::NotFlagCarried);
    }
    let d = gamma.dim();
    let is_identity = *gamma.matrix() == DMatrix::identity(d, d);
    let inv = gamma.inverse();
    let per_atom: Vec<(usize, usize, f64)> = mu
        .atoms
        .par_iter()
        .map(|a| {
            let f = a.flag.as_ref().expect("flag-carried");
            let here = cells.assign(f);
            if is_identity {
                return (here, here, a.weight);
            }
            let there = cells.assign(&f.apply(gamma));
            let b = iwasawa_cocycle(&inv, f);
            let density = (-mu.beta * mu.phi.eval_weights(&b)).exp();
            (here, there, a.weight * density)
        })
        .collect();
    let n = cells.len();
    let mut mass = vec![KahanSum::default(); n];
    let mut pushed = vec![KahanSum::default(); n];
    let mut transported = vec![KahanSum::default(); n];
    for (a, &(here, there, dens)) in mu.atoms.iter().zip(&per_atom) {
        mass[here].add(a.weight);
        pushed[there].add(a.weight);
        transported[here].add(dens);
    }
    let mut out = Vec::new();
    let mut skipped = Vec::new();
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let m = mass[k].value();
        if m < mass_floor {
            skipped.push(k);
            continue;
        }
        let (p, t) = (pushed[k].value(), transported[k].value());
        worst = worst.max((p - t).abs() / t.max(p).max(f64::MIN_POSITIVE));
        out.push(CellComparison {
            cell: k,
            mass: m,
            pushed: p,
            transported: t,
        });
    }
    Ok(ConformalityReport {
        max_rel_error: worst,
        cells: out,
        skipped,
    })
}

/// Boundary points ξ(F) of the flag-carried atoms, as angles on the circle,
/// sorted with cumulative weights for arc queries.
struct ArcIndex {
    angles: Vec<f64>,
    cumulative: Vec<f64>,
}

fn boundary_angle(f: &Flag) -> f64 {
    let x = klein::boundary_of_flag(f);
    x[1].atan2(x[0])
}

impl ArcIndex {
    fn new(mu: &AtomicMeasure) -> Self {
        let mut pairs: Vec<(f64, f64)> = mu
            .atoms
            .par_iter()
            .map(|a| (boundary_angle(a.flag.as_ref().expect("flag-carried")), a.weight))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut cumulative = Vec::with_capacity(pairs.len() + 1);
        let mut acc = KahanSum::default();
        cumulative.push(0.0);
        for &(_, w) in &pairs {
            acc.add(w);
            cumulative.push(acc.value());
        }
        ArcIndex {
            angles: pairs.into_iter().map(|p| p.0).collect(),
            cumulative,
        }
    }

    fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        let i = self.angles.partition_point(|&a| a < lo);
        let j = self.angles.partition_point(|&a| a < hi);
        self.cumulative[j] - self.cumulative[i]
    }

    /// Mass of the open arc of half-width `half` around `centre`.
    fn arc_mass(&self, centre: f64, half: f64) -> f64 {
        use std::f64::consts::PI;
        let (lo, hi) = (centre - half, centre + half);
        let mut m = self.mass_between(lo.max(-PI), hi.min(PI));
        if lo < -PI {
            m += self.mass_between(lo + 2.0 * PI, PI + 1.0);
        }
        if hi > PI {
            m += self.mass_between(-PI - 1.0, hi - 2.0 * PI);
        }
        m
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ShadowRow {
    pub word: String,
    pub length: usize,
    pub shadow_mass: f64,
    /// μ(𝒪_r(b₀, γb₀)) · e^{βφ(κ(γ))}.
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShadowReport {
    pub r: f64,
    pub rows: Vec<ShadowRow>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Smallest C with every ratio in [1/C, C].
    pub constant: f64,
    pub declared_c: f64,
    pub pass: bool,
}

/// (direction angle, d_Ω(b₀, γb₀)) of an orbit point of an `SL(2)` preset,
/// read from the Cartan decomposition: the direction is ξ(U₁(γ)) and the
/// distance is 2·α₁(κ(γ)). Stays accurate where the Klein coordinates of
/// γb₀ would round onto the boundary.
pub fn orbit_polar(g: &GroupElement<f64>) -> Result<(f64, f64), PattersonError> {
    let k = cartan_project(g)?;
    let f = u_theta_unchecked(g, &RootSubset::full(2));
    Ok((boundary_angle(&f), 2.0 * k.alpha(1)))
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}

/// x ∈ 𝒪_r(b₀, γb₀) from polar data.
fn in_orbit_shadow(x_angle: f64, polar: (f64, f64), r: f64) -> bool {
    match ball_shadow_half_angle(polar.1, r) {
        None => true,
        Some(half) => angle_gap(x_angle, polar.0) < half,
    }
}

fn require_disk(preset: &GroupPreset<f64>) -> Result<(), PattersonError> {
    preset_domain(preset)
        .map(|_| ())
        .ok_or_else(|| PattersonError::NoDomain(preset.name.clone()))
}

/// Shadow-lemma ratios for the sampled elements, with shadows seen from the
/// basepoint of the Klein disk.
pub fn shadow_lemma_check(
    mu: &AtomicMeasure,
    preset: &GroupPreset<f64>,
    r: f64,
    gammas: &[GroupElement<f64>],
    declared_c: f64,
) -> Result<ShadowReport, PattersonError> {
    if mu.carrier != CarrierKind::Flag {
        return Err(PattersonError::NotFlagCarried);
    }
    require_disk(preset)?;
    let index = ArcIndex::new(mu);
    let rows = gammas
        .iter()
        .map(|g| {
            let (centre, dist) = orbit_polar(g)?;
            let mass = match ball_shadow_half_angle(dist, r) {
                None => 1.0,
                Some(half) => index.arc_mass(centre, half),
            };
            let phi = mu.phi.eval(&cartan_project(g)?);
            Ok(ShadowRow {
                word: g.word().to_string(),
                length: g.word().len(),
                shadow_mass: mass,
                ratio: mass * (mu.beta * phi).exp(),
            })
        })
        .collect::<Result<Vec<_>, PattersonError>>()?;
    let min_ratio = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let constant = max_ratio.max(1.0 / min_ratio);
    Ok(ShadowReport {
        r,
        rows,
        min_ratio,
        max_ratio,
        constant,
        declared_c,
        pass: constant <= declared_c,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RadiusSweep {
    /// (r, min ratio, max ratio).
    pub rows: Vec<(f64, f64, f64)>,
    /// Smallest r of the grid whose ratios all lie in [1/C, C].
    pub r0: Option<f64>,
}

/// Shadow-lemma ratios over a grid of radii; R₀ is where the lower bound
/// starts to hold with the declared constant.
pub fn calibrate_shadow_radius(
    mu: &AtomicMeasure,
    preset: &GroupPreset<f64>,
    gammas: &[GroupElement<f64>],
    grid: &[f64],
    declared_c: f64,
) -> Result<RadiusSweep, PattersonError> {
    let mut rows = Vec::new();
    let mut r0 = None;
    for &r in grid {
        let rep = shadow_lemma_check(mu, preset, r, gammas, declared_c)?;
        rows.push((r, rep.min_ratio, rep.max_ratio));
        if r0.is_none() && rep.pass {
            r0 = Some(r);
        }
    }
    Ok(RadiusSweep { rows, r0 })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConicalReport {
    pub r: f64,
    /// (N, μ-mass covered by shadows of elements of length ≥ N).
    pub schedule: Vec<(usize, f64)>,
    pub estimate: f64,
}

/// Mass of ∩_N ∪_{|γ| ≥ N} 𝒪_r(b₀, γb₀) over the truncated ball, for each N
/// in the schedule. Atoms coming from group elements are tested against the
/// shadows of their own prefixes, which gives a lower bound; engineered
/// atoms are tested against every element of the ball.
pub fn conical_mass_estimate(
    mu: &AtomicMeasure,
    preset: &GroupPreset<f64>,
    ball: &WordBall<f64>,
    r: f64,
    schedule: &[usize],
) -> Result<ConicalReport, PattersonError> {
    if mu.carrier != CarrierKind::Flag {
        return Err(PattersonError::NotFlagCarried);
    }
    require_disk(preset)?;
    let nmin = schedule.iter().copied().min().unwrap_or(0);
    let far: Vec<(usize, (f64, f64))> = if mu.atoms.iter().any(|a| a.word.is_none()) {
        (ball.sphere(nmin.min(ball.radius())).start..ball.len())
            .into_par_iter()
            .map(|i| Ok((ball.word_length(i), orbit_polar(&ball.element(i))?)))
            .collect::<Result<_, PattersonError>>()?
    } else {
        Vec::new()
    };
    // deepest covering length per atom
    let depth: Vec<Option<usize>> = mu
        .atoms
        .par_iter()
        .map(|a| {
            let x = boundary_angle(a.flag.as_ref().expect("flag-carried"));
            match &a.word {
                Some(w) => (nmin..=w.len()).rev().find(|&k| {
                    orbit_polar(&preset.evaluate(&w.prefix(k))).is_ok_and(|p| in_orbit_shadow(x, p, r))
                }),
                None => far
                    .iter()
                    .filter(|(_, p)| in_orbit_shadow(x, *p, r))
                    .map(|(len, _)| *len)
                    .max(),
            }
        })
        .collect();
    let schedule: Vec<(usize, f64)> = schedule
        .iter()
        .map(|&n| {
            let m = mu
                .atoms
                .iter()
                .zip(&depth)
                .filter(|(_, d)| d.is_some_and(|d| d >= n))
                .map(|(a, _)| a.weight)
                .collect::<KahanSum>()
                .value();
            (n, m)
        })
        .collect();
    let estimate = schedule.last().map(|p| p.1).unwrap_or(0.0);
    Ok(ConicalReport { r, schedule, estimate })
}

/// A flag-carried measure with equal atoms at the given lines of R²; used
/// as a control supported away from a limit set.
pub fn atoms_on_lines(lines: &[DVector<f64>], template: &AtomicMeasure) -> Result<AtomicMeasure, PattersonError> {
    let theta = RootSubset::full(2);
    let n = lines.len() as f64;
    let atoms = lines
        .iter()
        .map(|u| {
            let frame = DMatrix::from_column_slice(2, 2, &[u[0], u[1], -u[1], u[0]]);
            Ok(Atom {
                word: None,
                flag: Some(Flag::from_frame(&theta, &frame)?),
                weight: 1.0 / n,
                phi_value: 0.0,
            })
        })
        .collect::<Result<Vec<_>, CartanError>>()?;
    Ok(AtomicMeasure {
        atoms,
        carrier: CarrierKind::Flag,
        ..template.clone()
    })
}
