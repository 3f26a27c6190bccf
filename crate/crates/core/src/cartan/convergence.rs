use nalgebra::DMatrix;
use serde::Serialize;

use super::{cartan_project, flag_distance, is_transverse, u_theta_unchecked, GroupElement, PartialFlag};
use crate::scalar::{lit, to_f64, Real};

#[derive(Debug, Clone, Copy)]
pub struct ConvergenceTolerances {
    /// Flag distance counted as "arrived".
    pub flag_tol: f64,
    /// Probes closer than this conditioning to the opposite locus are ignored.
    pub probe_tau: f64,
    /// Gap needed in the tail; defaults to log(1 / (flag_tol · probe_tau)) so
    /// that contraction by e^{−α} moves every admissible probe within flag_tol.
    pub alpha_min: f64,
    pub tail_fraction: f64,
    pub cluster_radius: f64,
}

impl Default for ConvergenceTolerances {
    fn default() -> Self {
        let flag_tol: f64 = 1e-3;
        let probe_tau: f64 = 1e-3;
        ConvergenceTolerances {
            flag_tol,
            probe_tau,
            alpha_min: -(flag_tol * probe_tau).ln(),
            tail_fraction: 1.0 / 3.0,
            cluster_radius: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionVerdict {
    pub name: &'static str,
    /// Worst tail value of the metric the condition is judged on.
    pub metric: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub tail_start: usize,
    pub u_distance: Vec<f64>,
    pub u_inverse_distance: Vec<f64>,
    pub min_alpha: Vec<f64>,
    pub probe_forward: Vec<f64>,
    pub probe_backward: Vec<f64>,
    pub usable_forward_probes: usize,
    pub usable_backward_probes: usize,
    pub conditions: Vec<ConditionVerdict>,
}

impl ConvergenceReport {
    pub fn unanimous(&self) -> bool {
        self.conditions.iter().all(|c| c.holds) || self.conditions.iter().all(|c| !c.holds)
    }

    pub fn converges(&self) -> bool {
        self.conditions.iter().all(|c| c.holds)
    }
}

fn givens<T: Real>(d: usize, i: usize, j: usize, t: f64) -> DMatrix<T> {
    let mut m = DMatrix::identity(d, d);
    m[(i, i)] = lit(t.cos());
    m[(j, j)] = lit(t.cos());
    m[(i, j)] = lit(-t.sin());
    m[(j, i)] = lit(t.sin());
    m
}

fn cluster<T: Real>(p: &PartialFlag<T>, eps: f64) -> Vec<PartialFlag<T>> {
    let d = p.dim();
    let mut out = vec![p.clone()];
    for i in 0..d {
        for j in (i + 1)..d {
            for s in [eps, -eps] {
                let frame = givens::<T>(d, i, j, s) * p.frame();
                out.push(PartialFlag::from_frame_unchecked(p.theta(), frame));
            }
        }
    }
    out
}

fn tail_max(v: &[f64], start: usize) -> f64 {
    v[start..].iter().copied().fold(0.0, f64::max)
}

/// Evaluates the four equivalent characterizations of g_n → (F⁺, F⁻) on the
/// tail of a finite sequence.
pub fn check_flag_convergence<T: Real>(
    gs: &[GroupElement<T>],
    f_plus: &PartialFlag<T>,
    f_minus: &PartialFlag<T>,
    probes: &[PartialFlag<T>],
    tols: &ConvergenceTolerances,
) -> ConvergenceReport {
    let theta = f_plus.theta();
    let n = gs.len();
    let tail_len = ((n as f64 * tols.tail_fraction).ceil() as usize).clamp(1, n.max(1));
    let tail_start = n.saturating_sub(tail_len);

    let fwd_probes: Vec<&PartialFlag<T>> = probes
        .iter()
        .filter(|p| to_f64(is_transverse(p, f_minus).1) >= tols.probe_tau)
        .collect();
    let bwd_probes: Vec<&PartialFlag<T>> = probes
        .iter()
        .filter(|p| to_f64(is_transverse(p, f_plus).1) >= tols.probe_tau)
        .collect();

    let mut u_distance = Vec::with_capacity(n);
    let mut u_inverse_distance = Vec::with_capacity(n);
    let mut min_alpha = Vec::with_capacity(n);
    let mut probe_forward = Vec::with_capacity(n);
    let mut probe_backward = Vec::with_capacity(n);
    for g in gs {
        let gi = g.inverse();
        u_distance.push(to_f64(flag_distance(&u_theta_unchecked(g, theta), f_plus)));
        u_inverse_distance.push(to_f64(flag_distance(&u_theta_unchecked(&gi, theta), f_minus)));
        min_alpha.push(cartan_project(g).map(|k| to_f64(k.min_alpha(theta))).unwrap_or(0.0));
        probe_forward.push(
            fwd_probes
                .iter()
                .map(|p| to_f64(flag_distance(&p.apply(g), f_plus)))
                .fold(0.0, f64::max),
        );
        probe_backward.push(
            bwd_probes
                .iter()
                .map(|p| to_f64(flag_distance(&p.apply(&gi), f_minus)))
                .fold(0.0, f64::max),
        );
    }

    let flag_tol = tols.flag_tol;
    let alpha_tail = min_alpha[tail_start..].iter().copied().fold(f64::INFINITY, f64::min);
    let c1_metric = tail_max(&u_distance, tail_start).max(tail_max(&u_inverse_distance, tail_start));
    let c1 = ConditionVerdict {
        name: "cartan",
        metric: c1_metric,
        holds: c1_metric <= flag_tol && alpha_tail >= tols.alpha_min,
    };
    let c2_metric = tail_max(&probe_forward, tail_start);
    let c2 = ConditionVerdict {
        name: "forward-probes",
        metric: c2_metric,
        holds: !fwd_probes.is_empty() && c2_metric <= flag_tol,
    };
    let c3_metric = tail_max(&probe_backward, tail_start);
    let c3 = ConditionVerdict {
        name: "backward-probes",
        metric: c3_metric,
        holds: !bwd_probes.is_empty() && c3_metric <= flag_tol,
    };

    // open-set form: whole clusters around one admissible probe on each side
    let mut c4_metric = f64::INFINITY;
    if let (Some(p), Some(q)) = (fwd_probes.first(), bwd_probes.first()) {
        let cp = cluster(p, tols.cluster_radius);
        let cq = cluster(q, tols.cluster_radius);
        let mut worst: f64 = 0.0;
        for g in &gs[tail_start..] {
            let gi = g.inverse();
            for x in &cp {
                worst = worst.max(to_f64(flag_distance(&x.apply(g), f_plus)));
            }
            for y in &cq {
                worst = worst.max(to_f64(flag_distance(&y.apply(&gi), f_minus)));
            }
        }
        c4_metric = worst;
    }
    let c4 = ConditionVerdict {
        name: "open-sets",
        metric: c4_metric,
        holds: c4_metric <= flag_tol,
    };

    ConvergenceReport {
        tail_start,
        u_distance,
        u_inverse_distance,
        min_alpha,
        probe_forward,
        probe_backward,
        usable_forward_probes: fwd_probes.len(),
        usable_backward_probes: bwd_probes.len(),
        conditions: vec![c1, c2, c3, c4],
    }
}
