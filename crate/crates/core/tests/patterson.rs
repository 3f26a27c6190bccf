mod common;

use nalgebra::DVector;
use transverse_core::cartan::Word;
use transverse_core::orbit::{enumerate_ball, limit_set_sample, WordBall};
use transverse_core::patterson::*;
use transverse_core::series::critical_exponent_of_ball;
use transverse_core::{presets, Functional, Preset};

const E: f64 = std::f64::consts::E;

fn omega1(p: &Preset) -> Functional {
    Functional::omega(&p.theta, 1).unwrap()
}

fn schottky_ball(r: usize) -> (Preset, WordBall<f64>) {
    let p = presets::schottky();
    let b = enumerate_ball(&p, r, 1 << 22).unwrap();
    (p, b)
}

#[test]
fn cyclic_weights_are_geometric() {
    let p = presets::cyclic(E);
    let phi = omega1(&p);
    let big = enumerate_ball(&p, 20, 1000).unwrap();
    for radius in [1, 5, 12, 20] {
        let ball = big.truncated_to(radius);
        let mu = patterson_measure(&ball, &phi, 1.0, HFunction::ConstantOne).unwrap();
        let rr = radius as f64;
        let z = 1.0 + 2.0 * ((-1.0f64).exp() - (-rr - 1.0).exp()) / (1.0 - (-1.0f64).exp());
        for a in &mu.atoms {
            let n = a.word.as_ref().unwrap().len() as f64;
            assert!((a.weight - (-n).exp() / z).abs() < 1e-12, "{radius}");
        }
        assert!((mu.total() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn cyclic_conformality_is_closed_form() {
    let lambda = 2.0;
    let p = presets::cyclic(lambda);
    let phi = omega1(&p);
    let ball = enumerate_ball(&p, 20, 1000).unwrap();
    let sample = limit_set_sample(&ball, &p.theta, 1).unwrap();
    let cells = Cells::new(sample.flags.iter().map(|f| f.1.clone()).collect());
    assert_eq!(cells.len(), 2);
    let a = p.evaluate(&Word::parse("a").unwrap());
    for s in [0.5, 0.1, 0.01] {
        let mu = patterson_measure(&ball, &phi, s, HFunction::ConstantOne).unwrap().to_flags(&p).unwrap();
        let rep = conformality_check(&mu, &a, &cells, MASS_FLOOR).unwrap();
        // both fixed lines have derivative λ^{∓1}, so each cell is off by λ^{−s}
        assert!((rep.max_rel_error - (1.0 - lambda.powf(-s))).abs() < 1e-12, "{s}: {}", rep.max_rel_error);
        let id = p.evaluate(&Word::empty());
        assert_eq!(conformality_check(&mu, &id, &cells, MASS_FLOOR).unwrap().max_rel_error, 0.0);
    }
}

#[test]
fn cyclic_shadow_ratios_are_constant() {
    let p = presets::cyclic(2.0);
    let phi = omega1(&p);
    let ball = enumerate_ball(&p, 20, 1000).unwrap();
    let mu = patterson_measure(&ball, &phi, 0.01, HFunction::ConstantOne).unwrap().to_flags(&p).unwrap();
    let gammas: Vec<_> = (1..=10).map(|n| p.evaluate(&Word::parse("a").unwrap().power(n))).collect();
    let rep = shadow_lemma_check(&mu, &p, 1.0, &gammas, 20.0).unwrap();
    assert!(rep.max_ratio / rep.min_ratio < 1.1, "{rep:?}");
    assert!(rep.pass);
}

#[test]
fn schottky_measure_converges_in_radius() {
    let (p, big) = schottky_ball(11);
    let phi = omega1(&p);
    let est = critical_exponent_of_ball(&big, &phi, &[11]).unwrap();
    let s = est.delta_hat * 1.05;
    check_exponent(s, est.delta_hat, est.band).unwrap();
    let mut tvs = Vec::new();
    for r in [5, 7, 9] {
        let a = patterson_measure(&big.truncated_to(r), &phi, s, HFunction::ConstantOne).unwrap();
        let b = patterson_measure(&big.truncated_to(r + 2), &phi, s, HFunction::ConstantOne).unwrap();
        tvs.push(a.tv_distance(&b));
        // tail mass decays geometrically along word length
        let tails: Vec<f64> = (1..=r).map(|n| b.mass_from_length(n)).collect();
        for w in tails.windows(2) {
            assert!(w[1] < w[0]);
        }
        let ratios: Vec<f64> = tails.windows(2).map(|w| w[1] / w[0]).collect();
        assert!(ratios.iter().skip(1).all(|&q| q < 0.97), "{ratios:?}");
    }
    assert!(tvs[0] > tvs[1] && tvs[1] > tvs[2], "{tvs:?}");
}

#[test]
fn schedule_tracks_total_variation() {
    let (p, big) = schottky_ball(10);
    let phi = omega1(&p);
    let delta = critical_exponent_of_ball(&big, &phi, &[10]).unwrap().delta_hat;
    let steps = patterson_schedule(&big, &phi, delta, &[(1, 6), (2, 8), (3, 10)], HFunction::ConstantOne).unwrap();
    assert_eq!(steps.len(), 3);
    assert!(steps[0].tv_to_previous.is_none());
    assert!(steps.iter().skip(1).all(|s| s.tv_to_previous.unwrap() > 0.0));
    // s_k decreases to δ̂ and the heaviest atom loses mass
    assert!(steps[0].s > steps[1].s && steps[1].s > steps[2].s && steps[2].s > delta);
    assert!(steps[0].max_atom > steps[1].max_atom && steps[1].max_atom > steps[2].max_atom);
}

#[test]
fn atoms_vanish_as_radius_grows() {
    let (p, big) = schottky_ball(10);
    let phi = omega1(&p);
    let delta = critical_exponent_of_ball(&big, &phi, &[10]).unwrap().delta_hat;
    let maxes: Vec<f64> = [6, 8, 10]
        .iter()
        .map(|&r| patterson_shell(&big.truncated_to(r), &phi, delta, HFunction::ConstantOne, 1).unwrap().max_atom())
        .collect();
    assert!(maxes[0] > maxes[1] && maxes[1] > maxes[2], "{maxes:?}");
    assert!(maxes[2] < 1e-3);
}

#[test]
fn schottky_conformality_improves_with_radius() {
    let (p, big) = schottky_ball(11);
    let phi = omega1(&p);
    let gens: Vec<_> = ["a", "A", "b", "B"].iter().map(|w| p.evaluate(&Word::parse(w).unwrap())).collect();
    let mut worst = Vec::new();
    for r in [9, 11] {
        let ball = big.truncated_to(r);
        let delta = critical_exponent_of_ball(&ball, &phi, &[r]).unwrap().delta_hat;
        let mu = patterson_shell(&ball, &phi, delta, HFunction::ConstantOne, 1).unwrap().to_flags(&p).unwrap();
        let sample = limit_set_sample(&ball, &p.theta, 3).unwrap();
        let cells = Cells::new(sample.flags.iter().map(|f| f.1.clone()).collect());
        let e = gens
            .iter()
            .map(|g| conformality_check(&mu, g, &cells, MASS_FLOOR).unwrap().max_rel_error)
            .fold(0.0, f64::max);
        worst.push(e);
    }
    assert!(worst[1] < worst[0] && worst[1] < 5e-2, "{worst:?}");
}

#[test]
fn shadow_lemma_and_negative_control() {
    let (p, big) = schottky_ball(10);
    let phi = omega1(&p);
    let delta = critical_exponent_of_ball(&big, &phi, &[10]).unwrap().delta_hat;
    let mu = patterson_shell(&big, &phi, delta, HFunction::ConstantOne, 1).unwrap().to_flags(&p).unwrap();
    let gammas: Vec<_> = (4..=9).flat_map(|n| big.sphere(n).step_by(101).take(10).map(|i| big.element(i))).collect();
    let grid: Vec<f64> = [0.01, 0.03, 0.1, 0.3, 1.0, 2.0].to_vec();
    let sweep = calibrate_shadow_radius(&mu, &p, &gammas, &grid, 20.0).unwrap();
    let r0 = sweep.r0.expect("some radius works");
    assert!(r0 > grid[0], "{sweep:?}");
    // below R₀ the lower bound fails for some γ
    let below = shadow_lemma_check(&mu, &p, grid[0], &gammas, 20.0).unwrap();
    assert!(!below.pass && below.min_ratio < 1.0 / 20.0);
    let rep = shadow_lemma_check(&mu, &p, r0 + 1.0, &gammas, 20.0).unwrap();
    assert!(rep.pass, "{rep:?}");
    // the constant does not depend on word length
    for n in 4..=9 {
        let rows: Vec<_> = rep.rows.iter().filter(|r| r.length == n).collect();
        assert!(!rows.is_empty());
        assert!(rows.iter().all(|r| r.ratio >= 1.0 / rep.constant && r.ratio <= rep.constant));
    }
}

#[test]
fn conical_mass_contrasts_measure_and_control() {
    let (p, big) = schottky_ball(9);
    let phi = omega1(&p);
    let delta = critical_exponent_of_ball(&big, &phi, &[9]).unwrap().delta_hat;
    let mu = patterson_shell(&big, &phi, delta, HFunction::ConstantOne, 1).unwrap().to_flags(&p).unwrap();
    let rep = conical_mass_estimate(&mu, &p, &big, 2.0, &[3, 5, 7]).unwrap();
    assert!(rep.estimate >= 0.95, "{rep:?}");
    for w in rep.schedule.windows(2) {
        assert!(w[1].1 <= w[0].1 + 1e-15);
    }
    // evenly spread lines miss the limit set
    let lines: Vec<DVector<f64>> = (0..64)
        .map(|k| {
            let t = std::f64::consts::PI * (k as f64 + 0.5) / 64.0;
            DVector::from_column_slice(&[t.cos(), t.sin()])
        })
        .collect();
    let control = atoms_on_lines(&lines, &mu).unwrap();
    let crep = conical_mass_estimate(&control, &p, &big, 2.0, &[3, 5, 7]).unwrap();
    assert!(crep.estimate < 0.1, "{crep:?}");
    assert!(crep.schedule[0].1 >= crep.estimate);
}

#[test]
fn json_round_trip_is_deterministic() {
    let (p, big) = schottky_ball(4);
    let phi = omega1(&p);
    let mu = patterson_measure(&big, &phi, 1.1, HFunction::SlowlyVarying { p: 1.5 }).unwrap();
    let text = mu.to_json().unwrap();
    let back = AtomicMeasure::from_json(&text, &p).unwrap();
    assert_eq!(back, mu);
    assert_eq!(back.to_json().unwrap(), text);
    let flagged = mu.to_flags(&p).unwrap();
    let back = AtomicMeasure::from_json(&flagged.to_json().unwrap(), &p).unwrap();
    assert_eq!(back, flagged);
}

#[test]
fn pushforward_round_trip_is_exact() {
    let (p, big) = schottky_ball(5);
    let phi = omega1(&p);
    let mu = patterson_measure(&big, &phi, 1.0, HFunction::ConstantOne).unwrap().to_flags(&p).unwrap();
    for w in ["a", "bA", "abbA"] {
        let g = Word::parse(w).unwrap();
        let there = mu.pushforward(&p, &g);
        assert!((there.total() - 1.0).abs() < 1e-12);
        let back = there.pushforward(&p, &g.inverse());
        for (x, y) in mu.atoms.iter().zip(&back.atoms) {
            assert_eq!(x.word, y.word);
            assert_eq!(x.weight, y.weight);
            let (fx, fy) = (x.flag.as_ref().unwrap(), y.flag.as_ref().unwrap());
            assert!((fx.projector(1) - fy.projector(1)).norm() < 1e-9);
        }
    }
}

#[test]
fn slowly_varying_weights_change_only_by_log_factor() {
    let (p, big) = schottky_ball(6);
    let phi = omega1(&p);
    let plain = patterson_measure(&big, &phi, 1.0, HFunction::ConstantOne).unwrap();
    let slow = patterson_measure(&big, &phi, 1.0, HFunction::SlowlyVarying { p: 2.0 }).unwrap();
    let h = HFunction::SlowlyVarying { p: 2.0 };
    let c = slow.atoms[0].weight / plain.atoms[0].weight;
    for (a, b) in plain.atoms.iter().zip(&slow.atoms) {
        let expect = c * h.eval(a.phi_value.exp());
        assert!((b.weight / a.weight - expect).abs() < 1e-9 * expect);
    }
}
