//! The Bowen-Margulis-Sullivan density in Hopf coordinates, its Γ-invariance
//! residual, and finite-horizon recurrence diagnostics of the geodesic flow.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cartan::{gromov_product, is_transverse, CartanError, Letter, Word};
use crate::hilbert::{geodesic_point, hilbert_distance, klein, preset_domain, ConvexDomain};
use crate::orbit::GroupPreset;
use crate::patterson::{AtomicMeasure, CarrierKind};
use crate::Functional;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("atoms are not transverse (conditioning {0:e})")]
    NotTransverse(f64),
    #[error("measure is not carried on flags")]
    NotFlagCarried,
    #[error("preset {0} has no Klein-disk domain")]
    NoDomain(String),
    #[error("atom index {0} out of range")]
    NoAtom(usize),
    #[error(transparent)]
    Cartan(#[from] CartanError),
}

/// μ̄ ⊗ μ with the Gromov-product density; the flow coordinate s does not
/// enter, so flow invariance holds by construction.
#[derive(Debug, Clone)]
pub struct BmsAssembly {
    pub mu: AtomicMeasure,
    pub mubar: AtomicMeasure,
    pub beta: f64,
    pub phi: Functional,
    mu_index: HashMap<Word, usize>,
    mubar_index: HashMap<Word, usize>,
}

fn word_index(m: &AtomicMeasure) -> HashMap<Word, usize> {
    m.atoms
        .iter()
        .enumerate()
        .filter_map(|(i, a)| a.word.clone().map(|w| (w, i)))
        .collect()
}

impl BmsAssembly {
    /// `mu` is φ-conformal and `mubar` is conformal for the dual functional.
    pub fn new(mu: AtomicMeasure, mubar: AtomicMeasure) -> Result<Self, FlowError> {
        if mu.carrier != CarrierKind::Flag || mubar.carrier != CarrierKind::Flag {
            return Err(FlowError::NotFlagCarried);
        }
        Ok(BmsAssembly {
            beta: mu.beta,
            phi: mu.phi.clone(),
            mu_index: word_index(&mu),
            mubar_index: word_index(&mubar),
            mu,
            mubar,
        })
    }

    /// The same data with the roles of the two factors exchanged.
    pub fn swapped(&self) -> Self {
        BmsAssembly::new(self.mubar.clone(), self.mu.clone()).expect("both flag-carried")
    }

    pub fn mu_atom(&self, w: &Word) -> Option<usize> {
        self.mu_index.get(w).copied()
    }

    pub fn mubar_atom(&self, w: &Word) -> Option<usize> {
        self.mubar_index.get(w).copied()
    }
}

/// e^{−βφ([ξx, ξy])} · μ̄({x}) · μ({y}) for x an atom of μ̄ and y of μ.
pub fn bms_density(assembly: &BmsAssembly, x: usize, y: usize) -> Result<f64, FlowError> {
    let ax = assembly.mubar.atoms.get(x).ok_or(FlowError::NoAtom(x))?;
    let ay = assembly.mu.atoms.get(y).ok_or(FlowError::NoAtom(y))?;
    let (fx, fy) = (ax.flag.as_ref().expect("flag"), ay.flag.as_ref().expect("flag"));
    let gp = gromov_product(fx, fy).map_err(|e| match e {
        CartanError::NotTransverse(c) => FlowError::NotTransverse(c),
        other => FlowError::Cartan(other),
    })?;
    let density = if assembly.beta == 0.0 { 1.0 } else { (-assembly.beta * assembly.phi.eval_weights(&gp)).exp() };
    Ok(density * ax.weight * ay.weight)
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub max_rel_error: f64,
    pub evaluated: usize,
    /// Pairs whose transport leaves the truncated ball or is not transverse.
    pub skipped: usize,
}

/// Ratio of the density mass at (γx, γy) to that at (x, y), with γ acting on
/// atoms through their words; `None` where the transported atoms are not in
/// the measures or not transverse.
pub fn transport_ratio(assembly: &BmsAssembly, gamma: &Word, x: usize, y: usize) -> Option<f64> {
    let wx = assembly.mubar.atoms.get(x)?.word.as_ref()?;
    let wy = assembly.mu.atoms.get(y)?.word.as_ref()?;
    let gx = assembly.mubar_atom(&gamma.concat(wx))?;
    let gy = assembly.mu_atom(&gamma.concat(wy))?;
    let before = bms_density(assembly, x, y).ok()?;
    let after = bms_density(assembly, gx, gy).ok()?;
    Some(after / before)
}

/// max |transported / original − 1| over the sample.
pub fn invariance_residual(assembly: &BmsAssembly, gamma: &Word, pairs: &[(usize, usize)]) -> InvarianceReport {
    let ratios: Vec<Option<f64>> = pairs.par_iter().map(|&(x, y)| transport_ratio(assembly, gamma, x, y)).collect();
    let evaluated = ratios.iter().flatten().count();
    InvarianceReport {
        max_rel_error: ratios.iter().flatten().map(|r| (r - 1.0).abs()).fold(0.0, f64::max),
        evaluated,
        skipped: ratios.len() - evaluated,
    }
}

/// Pairs (x of μ̄, y of μ) drawn by weight, transverse, with atoms taken
/// from words of length in `lengths` when given.
pub fn sample_pairs(
    assembly: &BmsAssembly,
    count: usize,
    lengths: Option<std::ops::RangeInclusive<usize>>,
    seed: u64,
) -> Vec<(usize, usize)> {
    let eligible = |m: &AtomicMeasure| -> Vec<usize> {
        (0..m.atoms.len())
            .filter(|&i| match (&lengths, &m.atoms[i].word) {
                (Some(range), Some(w)) => range.contains(&w.len()),
                (Some(_), None) => false,
                (None, _) => true,
            })
            .filter(|&i| m.atoms[i].weight > 0.0)
            .collect()
    };
    let (xs, ys) = (eligible(&assembly.mubar), eligible(&assembly.mu));
    if xs.is_empty() || ys.is_empty() {
        return Vec::new();
    }
    let wx = WeightedIndex::new(xs.iter().map(|&i| assembly.mubar.atoms[i].weight)).expect("positive weights");
    let wy = WeightedIndex::new(ys.iter().map(|&i| assembly.mu.atoms[i].weight)).expect("positive weights");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count && tries < 100 * count {
        tries += 1;
        let (x, y) = (xs[wx.sample(&mut rng)], ys[wy.sample(&mut rng)]);
        let (fx, fy) = (
            assembly.mubar.atoms[x].flag.as_ref().expect("flag"),
            assembly.mu.atoms[y].flag.as_ref().expect("flag"),
        );
        if is_transverse(fx, fy).0 {
            out.push((x, y));
        }
    }
    out
}

/// Klein-disk picture of a flag-carried atom.
fn boundary(m: &AtomicMeasure, i: usize) -> DVector<f64> {
    klein::boundary_of_flag(m.atoms[i].flag.as_ref().expect("flag"))
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryStep {
    pub t: f64,
    /// Word of the orbit point the walk is currently recentred at.
    pub cell: String,
    pub inside: bool,
    pub reentry: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
    pub visits: usize,
    /// Visits in the second half of the horizon.
    pub late_visits: usize,
    pub reentries: usize,
    pub escaped: bool,
}

/// Beyond this distance from b₀ the reduced walk is in a funnel it cannot
/// leave, and Klein coordinates start to lose precision.
const ESCAPE: f64 = 30.0;

struct Recentring {
    letters: Vec<Letter>,
    maps: Vec<DMatrix<f64>>,
}

fn project_to_circle(v: DVector<f64>) -> DVector<f64> {
    let n = v.norm();
    v / n
}

/// Walks the geodesic from x to y at unit time steps, recentring by
/// generators whenever that moves the current point closer to b₀.
fn walk(
    omega: &ConvexDomain<f64>,
    rec: &Recentring,
    mut x: DVector<f64>,
    mut y: DVector<f64>,
    horizon: usize,
    cell_radius: f64,
) -> Trajectory {
    let b0 = omega.basepoint.clone();
    let dist = |z: &DVector<f64>| hilbert_distance(omega, &b0, z).unwrap_or(f64::INFINITY);
    // start at the point of (x, y) closest to b₀
    let mut z = closest_on_chord(omega, &x, &y);
    let mut word = Word::empty();
    let mut steps = Vec::with_capacity(horizon + 1);
    let (mut visits, mut late_visits, mut reentries) = (0, 0, 0);
    let (mut prev_inside, mut escaped) = (false, false);
    for k in 0..=horizon {
        if k > 0 && !escaped {
            z = geodesic_point(omega, &z, &(&y - &z), 1.0);
        }
        // greedy recentring
        let mut d = dist(&z);
        loop {
            if escaped {
                break;
            }
            let best = rec
                .maps
                .iter()
                .enumerate()
                .map(|(i, m)| (i, dist(&klein::apply(m, &z))))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("letters");
            if best.1 + 1e-12 >= d {
                break;
            }
            let m = &rec.maps[best.0];
            z = klein::apply(m, &z);
            x = project_to_circle(klein::apply(m, &x));
            y = project_to_circle(klein::apply(m, &y));
            // maps[i] is the action of letters[i]⁻¹, so the cell moves by letters[i]
            word = word.concat(&Word::letter(rec.letters[best.0]));
            d = best.1;
        }
        if d > ESCAPE {
            escaped = true;
        }
        let inside = !escaped && d <= cell_radius;
        let reentry = inside && !prev_inside;
        visits += inside as usize;
        late_visits += (inside && 2 * k >= horizon) as usize;
        reentries += reentry as usize;
        prev_inside = inside;
        steps.push(TrajectoryStep {
            t: k as f64,
            cell: word.to_string(),
            inside,
            reentry,
        });
    }
    Trajectory {
        steps,
        visits,
        late_visits,
        reentries,
        escaped,
    }
}

fn closest_on_chord(omega: &ConvexDomain<f64>, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
    let b0 = &omega.basepoint;
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let eps = 1e-9;
    let f = |t: f64| {
        let p = x + (y - x) * t;
        hilbert_distance(omega, b0, &p).unwrap_or(f64::INFINITY)
    };
    let (mut a, mut b) = (eps, 1.0 - eps);
    while b - a > 1e-10 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if f(c) <= f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let t = 0.5 * (a + b);
    x + (y - x) * t
}

#[derive(Debug, Clone, Serialize)]
pub struct RecurrenceReport {
    pub horizon: usize,
    pub cell_radius: f64,
    /// Samples count as recurrent with at least this many visits in the
    /// second half of the horizon.
    pub visit_threshold: usize,
    pub samples: usize,
    pub recurrent_fraction: f64,
    pub escape_fraction: f64,
    pub mean_visits: f64,
    /// "consistent with conservative", "consistent with dissipative" or
    /// "inconclusive"; a finite-horizon proxy, never a verdict.
    pub reading: String,
}

/// Re-entry cell radius: twice the largest generator displacement of b₀.
pub fn cell_radius(preset: &GroupPreset<f64>) -> f64 {
    preset
        .letters()
        .iter()
        .map(|&l| 2.0 * crate::cartan::cartan_project(&preset.letter_element(l)).map(|k| 2.0 * k.alpha(1)).unwrap_or(0.0))
        .fold(0.0, f64::max)
}

/// Walks sampled pairs up to the horizon and reports visit statistics.
pub fn recurrence_diagnostic(
    preset: &GroupPreset<f64>,
    assembly: &BmsAssembly,
    horizon: usize,
    sample_size: usize,
    seed: u64,
) -> Result<(RecurrenceReport, Vec<Trajectory>), FlowError> {
    let omega = preset_domain(preset).ok_or_else(|| FlowError::NoDomain(preset.name.clone()))?;
    let letters = preset.letters();
    let rec = Recentring {
        maps: letters.iter().map(|&l| klein::isometry(&preset.letter_element(-l))).collect(),
        letters,
    };
    let radius = cell_radius(preset);
    let pairs = sample_pairs(assembly, sample_size, None, seed);
    let trajectories: Vec<Trajectory> = pairs
        .par_iter()
        .map(|&(i, j)| walk(&omega, &rec, boundary(&assembly.mubar, i), boundary(&assembly.mu, j), horizon, radius))
        .collect();
    let n = trajectories.len().max(1) as f64;
    let threshold = ((horizon as f64).sqrt().ceil() as usize).max(1);
    let recurrent = trajectories.iter().filter(|t| t.late_visits >= threshold).count() as f64 / n;
    let escaped = trajectories.iter().filter(|t| t.escaped).count() as f64 / n;
    let reading = if recurrent >= 0.9 {
        "consistent with conservative"
    } else if recurrent <= 0.1 {
        "consistent with dissipative"
    } else {
        "inconclusive"
    };
    Ok((
        RecurrenceReport {
            horizon,
            cell_radius: radius,
            visit_threshold: threshold,
            samples: trajectories.len(),
            recurrent_fraction: recurrent,
            escape_fraction: escaped,
            mean_visits: trajectories.iter().map(|t| t.visits as f64).sum::<f64>() / n,
            reading: reading.into(),
        },
        trajectories,
    ))
}

/// Trajectory log as CSV rows (sample, t, cell, reentry).
pub fn write_trajectories_csv<W: Write>(trajectories: &[Trajectory], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sample", "t", "cell", "reentry"])?;
    for (i, tr) in trajectories.iter().enumerate() {
        for s in &tr.steps {
            w.write_record([i.to_string(), format!("{}", s.t), s.cell.clone(), (s.reentry as u8).to_string()])?;
        }
    }
    w.flush()
}
