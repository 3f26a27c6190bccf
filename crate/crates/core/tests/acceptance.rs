//! Acceptance run: one line per criterion with the measured quantity, the
//! target and the wall time. Exits non-zero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::Rng;
use transverse_core::cartan::{
    cartan_project, check_flag_convergence, gromov_product, is_transverse, iwasawa_cocycle, opposition,
    ConvergenceTolerances, RootSubset, Word,
};
use transverse_core::hilbert::{
    ball_shadow_half_angle, hilbert_distance, horofunction, shadow_contains, ConvexDomain,
};
use transverse_core::orbit::{enumerate_ball, limit_set_sample};
use transverse_core::patterson::*;
use transverse_core::series::{
    critical_exponent_of_ball, entropy_drop_experiment, exhaustion, manhattan_experiment, poincare_partial,
};
use transverse_core::{presets, Functional, Preset};

use common::{engineered_sequences, random_flag, random_sl, rng};

const BIG: usize = 1 << 22;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn omega(p: &Preset, k: usize) -> Functional {
    Functional::omega(&p.theta, k).unwrap()
}

fn cocycle_identity() -> Outcome {
    let mut r = rng(101);
    let theta = RootSubset::full(3);
    let (mut worst, mut n): (f64, usize) = (0.0, 0);
    while n < 1000 {
        let g = random_sl(&mut r, 3, 2.0);
        let h = random_sl(&mut r, 3, 2.0);
        let f = random_flag(&mut r, &theta);
        // conditioning of F against the repelling flag of h
        let repel = transverse_core::cartan::u_theta(&h.inverse(), &theta);
        if let Ok(rf) = repel {
            if is_transverse(&f, &rf).1 < 1e-3 {
                continue;
            }
        }
        n += 1;
        let lhs = iwasawa_cocycle(&g.compose(&h), &f);
        let rhs = iwasawa_cocycle(&g, &f.apply(&h)).add(&iwasawa_cocycle(&h, &f));
        worst = worst.max(lhs.sub(&rhs).norm_inf());
    }
    outcome(worst <= 1e-8, format!("max error {worst:.2e} over {n} triples (target 1e-8)"))
}

fn gromov_identity() -> Outcome {
    let mut r = rng(102);
    let theta = RootSubset::full(3);
    let (mut worst, mut n): (f64, usize) = (0.0, 0);
    while n < 1000 {
        let g = random_sl(&mut r, 3, 2.0);
        let f = random_flag(&mut r, &theta);
        let h = random_flag(&mut r, &theta);
        if is_transverse(&f, &h).1 < 1e-3 || is_transverse(&f.apply(&g), &h.apply(&g)).1 < 1e-3 {
            continue;
        }
        n += 1;
        let before = gromov_product(&f, &h).unwrap();
        let after = gromov_product(&f.apply(&g), &h.apply(&g)).unwrap();
        let bf = iwasawa_cocycle(&g, &f).opposition().unwrap();
        let bh = iwasawa_cocycle(&g, &h);
        worst = worst.max(after.sub(&before).add(&bf).add(&bh).norm_inf());
    }
    outcome(worst <= 1e-7, format!("max error {worst:.2e} over {n} triples (target 1e-7)"))
}

fn kappa_symmetry() -> Outcome {
    let mut r = rng(103);
    let (mut inv, mut sub): (f64, f64) = (0.0, f64::NEG_INFINITY);
    for _ in 0..10_000 {
        let g = random_sl(&mut r, 3, 2.0);
        let h = random_sl(&mut r, 3, 2.0);
        let kg = cartan_project(&g).unwrap();
        let kh = cartan_project(&h).unwrap();
        let kinv = cartan_project(&g.inverse()).unwrap();
        inv = inv.max((opposition(&kg).entries() - kinv.entries()).amax());
        let kgh = cartan_project(&g.compose(&h)).unwrap();
        for j in 1..3 {
            sub = sub.max(kgh.omega(j) - kg.omega(j) - kh.omega(j));
        }
    }
    outcome(
        inv <= 1e-9 && sub <= 1e-9,
        format!("inverse symmetry {inv:.2e}, worst subadditivity excess {sub:.2e} (target 1e-9)"),
    )
}

fn in_disk(r: &mut impl Rng, rmax: f64) -> DVector<f64> {
    let t: f64 = r.random_range(0.0..std::f64::consts::TAU);
    let s: f64 = rmax * r.random_range(0.0f64..1.0).sqrt();
    DVector::from_column_slice(&[s * t.cos(), s * t.sin()])
}

fn on_circle(t: f64) -> DVector<f64> {
    DVector::from_column_slice(&[t.cos(), t.sin()])
}

fn hilbert_ball() -> Outcome {
    let d = ConvexDomain::unit_ball(2);
    let mut r = rng(104);
    let b0 = d.basepoint.clone();
    let (mut dist_err, mut shadow_err, mut horo_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let minkowski = |a: &DVector<f64>, xi: &DVector<f64>| ((1.0 - a.dot(xi)) / (1.0 - a.dot(a)).sqrt()).ln();
    for _ in 0..400 {
        let (p, q) = (in_disk(&mut r, 0.95), in_disk(&mut r, 0.95));
        let c = (1.0 - p.dot(&q)) / ((1.0 - p.dot(&p)) * (1.0 - q.dot(&q))).sqrt();
        let want = 2.0 * c.max(1.0).acosh();
        let got = hilbert_distance(&d, &p, &q).unwrap();
        dist_err = dist_err.max((got - want).abs() / want.max(1.0));
    }
    let mut shadows = 0;
    while shadows < 200 {
        let p = in_disk(&mut r, 0.95);
        let rad: f64 = r.random_range(0.1..2.0);
        let dist = hilbert_distance(&d, &b0, &p).unwrap();
        // closed form from the right hyperbolic triangle
        let Some(want) = ball_shadow_half_angle(dist, rad).filter(|_| dist > rad + 0.05) else {
            continue;
        };
        shadows += 1;
        let dir = p[1].atan2(p[0]);
        let (mut lo, mut hi) = (0.0, std::f64::consts::PI);
        while hi - lo > 1e-9 {
            let mid = 0.5 * (lo + hi);
            let x = d.certify(on_circle(dir + mid));
            if shadow_contains(&d, &b0, &p, rad, &x).unwrap() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        shadow_err = shadow_err.max((0.5 * (lo + hi) - want).abs());
    }
    for _ in 0..400 {
        let (a, b) = (in_disk(&mut r, 0.9), in_disk(&mut r, 0.9));
        let xi = on_circle(r.random_range(0.0..std::f64::consts::TAU));
        let want = 2.0 * (minkowski(&a, &xi) - minkowski(&b, &xi));
        let got = horofunction(&d, &d.certify(xi), &a, &b).unwrap().value;
        horo_err = horo_err.max((got - want).abs());
    }
    let worst = dist_err.max(shadow_err).max(horo_err);
    outcome(
        worst <= 1e-6,
        format!("1000 cases: distance {dist_err:.1e}, shadow angle {shadow_err:.1e}, horofunction {horo_err:.1e} (target 1e-6)"),
    )
}

fn cyclic_closed_forms() -> Outcome {
    let p = presets::cyclic(std::f64::consts::E);
    let phi = omega(&p, 1);
    let ball = enumerate_ball(&p, 20, 1000).unwrap();
    let s = 1.0;
    let q = poincare_partial(&ball, &phi, s).unwrap();
    let e = (-1.0f64).exp();
    let want = 1.0 + 2.0 * (e - e.powi(21)) / (1.0 - e);
    let sum_err = (q - want).abs();
    let mu = patterson_measure(&ball, &phi, s, HFunction::ConstantOne).unwrap();
    let weight_err = mu
        .atoms
        .iter()
        .map(|a| (a.weight - (-(a.word.as_ref().unwrap().len() as f64)).exp() / want).abs())
        .fold(0.0, f64::max);
    outcome(
        sum_err <= 1e-12 && weight_err <= 1e-12,
        format!("radius 20: partial sum error {sum_err:.1e}, weight error {weight_err:.1e} (target 1e-12)"),
    )
}

fn schottky_pipeline() -> Outcome {
    let p = presets::schottky();
    let phi = omega(&p, 1);
    let ball = enumerate_ball(&p, 12, BIG).unwrap();
    let size_ok = ball.len() < 2 * 3usize.pow(12);
    let small = ball.truncated_to(10);
    let e12 = critical_exponent_of_ball(&ball, &phi, &[12]).unwrap();
    let e10 = critical_exponent_of_ball(&small, &phi, &[10]).unwrap();
    let drift = (e12.delta_hat - e10.delta_hat).abs() / e12.delta_hat;

    let conformality = |b: &transverse_core::Ball, delta: f64| {
        let mu = patterson_shell(b, &phi, delta, HFunction::ConstantOne, 1).unwrap().to_flags(&p).unwrap();
        let sample = limit_set_sample(b, &p.theta, 2).unwrap();
        let cells = Cells::new(sample.flags.into_iter().map(|(_, f)| f).collect());
        let worst = p
            .letters()
            .into_iter()
            .map(|l| {
                conformality_check(&mu, &p.evaluate(&Word::letter(l)), &cells, MASS_FLOOR)
                    .unwrap()
                    .max_rel_error
            })
            .fold(0.0, f64::max);
        (mu, worst)
    };
    let (_, c10) = conformality(&small, e10.delta_hat);
    let (mu, c12) = conformality(&ball, e12.delta_hat);

    let gammas: Vec<_> = (4..=10)
        .flat_map(|n| ball.sphere(n).step_by(97).take(30).map(|i| ball.element(i)))
        .collect();
    let grid = [0.01, 0.03, 0.1, 0.3, 1.0, 2.0];
    let sweep = calibrate_shadow_radius(&mu, &p, &gammas, &grid, 20.0).unwrap();
    let shadow = sweep
        .r0
        .map(|r0| shadow_lemma_check(&mu, &p, r0 + 1.0, &gammas, 20.0).unwrap());
    let shadow_ok = shadow.as_ref().is_some_and(|s| s.pass && s.constant <= 20.0);
    let conical = conical_mass_estimate(&mu, &p, &ball, 2.0, &[3, 5, 7, 9]).unwrap();

    let a = drift <= 0.10;
    let b = c12 <= 5e-2 && c12 < c10;
    let d = conical.estimate >= 0.95;
    outcome(
        size_ok && a && b && shadow_ok && d,
        format!(
            "{} elements; (a) delta_hat {:.4} -> {:.4}, drift {:.2}% [{}]; (b) conformality {:.4} -> {:.4} [{}]; (c) C = {} at r = {} [{}]; (d) conical {:.4} [{}]",
            ball.len(),
            e10.delta_hat,
            e12.delta_hat,
            100.0 * drift,
            ok(a),
            c10,
            c12,
            ok(b),
            shadow.as_ref().map_or("none".into(), |s| format!("{:.3}", s.constant)),
            shadow.as_ref().map_or("none".into(), |s| format!("{:.2}", s.r)),
            ok(shadow_ok),
            conical.estimate,
            ok(d),
        ),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAIL"
    }
}

fn entropy_drop() -> Outcome {
    let p = presets::schottky();
    let phi = omega(&p, 1);
    let cyc = entropy_drop_experiment(&p, p.named_subgroup("a").unwrap(), &phi, 10, BIG).unwrap();
    let sq = entropy_drop_experiment(&p, p.named_subgroup("a2b2").unwrap(), &phi, 10, BIG).unwrap();
    let band_c = cyc.band_group + cyc.band_subgroup;
    let band_s = sq.band_group + sq.band_subgroup;
    outcome(
        cyc.gap > 3.0 * band_c && sq.gap > band_s,
        format!(
            "<a>: gap {:.4} vs 3*band {:.4}; <a^2,b^2>: gap {:.4} vs band {:.4}",
            cyc.gap,
            3.0 * band_c,
            sq.gap,
            band_s
        ),
    )
}

fn manhattan() -> Outcome {
    let s = presets::sym2_schottky();
    let ball = enumerate_ball(&s, 12, BIG).unwrap();
    let m = manhattan_experiment(&ball, &omega(&s, 1), &omega(&s, 2), &[0.0, 0.25, 0.5, 0.75, 1.0], &[12], 100, 7)
        .unwrap();
    let flat = m.rows.iter().all(|r| (r.delta_hat - 1.0).abs() <= r.band);
    let worst = m.rows.iter().map(|r| (r.delta_hat - 1.0).abs()).fold(0.0, f64::max);
    outcome(
        flat && m.rows.len() == 5 && m.probe_words == 100 && m.length_probe <= 1e-9,
        format!(
            "5 grid points, max |delta_hat - 1| {worst:.1e} within band {:.3}; length probe {:.1e} over {} words (target 1e-9)",
            m.rows[0].band, m.length_probe, m.probe_words
        ),
    )
}

fn exhaustion_monotone() -> Outcome {
    let p = presets::schottky();
    let schedule: Vec<Vec<Word>> = ["ab8", "ab4", "ab2"]
        .iter()
        .map(|n| p.named_subgroup(n).unwrap().to_vec())
        .chain(std::iter::once(vec![Word::parse("a").unwrap(), Word::parse("b").unwrap()]))
        .collect();
    let rep = exhaustion(&p, &schedule, &omega(&p, 1), 10, BIG).unwrap();
    let seq: Vec<String> = rep.rows.iter().map(|r| format!("{:.4}", r.delta_hat)).collect();
    outcome(
        rep.non_decreasing && rep.reaches_full,
        format!("delta_hat {} -> full {:.4} (band {:.4})", seq.join(", "), rep.full.delta_hat, rep.full.band),
    )
}

fn convergence_checker() -> Outcome {
    let (seqs, p2, p3) = engineered_sequences(23);
    let tols = ConvergenceTolerances::default();
    let mut unanimous = 0;
    let mut expected = 0;
    for s in &seqs {
        let probes = if s.f_plus.dim() == 2 { &p2 } else { &p3 };
        let rep = check_flag_convergence(&s.elements, &s.f_plus, &s.f_minus, probes, &tols);
        unanimous += rep.unanimous() as usize;
        expected += (rep.converges() == s.expect_convergence) as usize;
    }
    outcome(
        unanimous == seqs.len() && expected == seqs.len(),
        format!("{unanimous}/{} unanimous, {expected} match the engineered verdict", seqs.len()),
    )
}

fn main() {
    type Check = fn() -> Outcome;
    let criteria: [(u32, &str, Check, Duration); 10] = [
        (1, "cocycle identity", cocycle_identity, Duration::from_secs(5)),
        (2, "Gromov product identity", gromov_identity, Duration::from_secs(5)),
        (3, "kappa inverse symmetry and subadditivity", kappa_symmetry, Duration::from_secs(5)),
        (4, "Hilbert ball vs hyperbolic closed forms", hilbert_ball, Duration::from_secs(10)),
        (5, "cyclic closed forms", cyclic_closed_forms, Duration::from_secs(1)),
        (6, "Schottky pipeline at radius 12", schottky_pipeline, Duration::from_secs(60)),
        (7, "entropy drop", entropy_drop, Duration::from_secs(120)),
        (8, "Manhattan equality case", manhattan, Duration::from_secs(120)),
        (9, "exhaustion monotonicity", exhaustion_monotone, Duration::from_secs(180)),
        (10, "flag convergence checker", convergence_checker, Duration::from_secs(10)),
    ];
    let mut failed = 0;
    for (id, name, check, budget) in criteria {
        let start = Instant::now();
        let out = check();
        let took = start.elapsed();
        let pass = out.pass && took <= budget;
        failed += (!pass) as usize;
        println!(
            "[{}] {id:>2} {name}: {} | {:.2} s (budget {} s)",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
