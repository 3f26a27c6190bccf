mod common;

use std::collections::HashMap;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use transverse_core::cartan::{flag_distance, u_theta, GroupElement, PartialFlag, RootSubset, Word};
use transverse_core::orbit::*;
use transverse_core::presets;

const BIG: usize = 5_000_000;

fn free_count(rank: usize, n: usize) -> usize {
    // 1 + 2k · Σ (2k−1)^{j−1}
    let mut total = 1;
    let mut sphere = 2 * rank;
    for _ in 1..=n {
        total += sphere;
        sphere *= 2 * rank - 1;
    }
    total
}

#[test]
fn free_schottky_counts() {
    let p = presets::schottky();
    let ball = enumerate_ball(&p, 9, BIG).unwrap();
    for n in 0..=9 {
        assert_eq!(ball.truncated_to(n).len(), 2 * 3usize.pow(n as u32) - 1);
    }
    assert_eq!(ball.dedup.merged, 0);
}

#[test]
fn cyclic_radius_five() {
    let ball = enumerate_ball(&presets::cyclic(2.0), 5, BIG).unwrap();
    assert_eq!(ball.len(), 11);
    assert_eq!(ball.sphere_sizes(), vec![1, 2, 2, 2, 2, 2]);
}

/// Reduced words over the alphabet, by length.
fn reduced_words(rank: usize, max_len: usize) -> Vec<Vec<i16>> {
    let letters: Vec<i16> = (1..=rank as i16).flat_map(|k| [k, -k]).collect();
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &frontier {
            for &l in &letters {
                if w.last() == Some(&-l) {
                    continue;
                }
                let mut v: Vec<i16> = w.clone();
                v.push(l);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn free_reduce(w: &[i16]) -> Vec<i16> {
    let mut out: Vec<i16> = Vec::new();
    for &l in w {
        if out.last() == Some(&-l) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

fn cyclic_relators(r: &[i16]) -> Vec<Vec<i16>> {
    let inv: Vec<i16> = r.iter().rev().map(|l| -l).collect();
    let mut out = Vec::new();
    for base in [r.to_vec(), inv] {
        for k in 0..base.len() {
            let mut c = base[k..].to_vec();
            c.extend_from_slice(&base[..k]);
            out.push(c);
        }
    }
    out
}

/// Counts group elements of word length ≤ n in the genus-two surface group.
/// The Cayley graph has girth 8 and its 8-cycles are the cyclic conjugates of
/// the relator, so two words of length ≤ 4 are equal iff w·v⁻¹ reduces to
/// nothing or to such a conjugate.
fn surface_oracle(n: usize) -> usize {
    let relator = Word::parse(presets::SURFACE2_RELATOR).unwrap();
    let rels = cyclic_relators(relator.letters());
    let words = reduced_words(4, n);
    let mut parent: Vec<usize> = (0..words.len()).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..words.len() {
        for j in (i + 1)..words.len() {
            if words[i].len() + words[j].len() != 8 {
                continue;
            }
            let mut x = words[i].clone();
            x.extend(words[j].iter().rev().map(|l| -l));
            let x = free_reduce(&x);
            if rels.contains(&x) {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    (0..words.len()).filter(|&i| root(&mut parent, i) == i).count()
}

#[test]
fn surface_group_matches_word_oracle() {
    let ball = enumerate_ball(&presets::surface2(), 4, BIG).unwrap();
    let expected = surface_oracle(4);
    assert_eq!(expected, 3193);
    assert_eq!(ball.len(), expected);
    assert_eq!(ball.sphere_sizes(), vec![1, 8, 56, 392, 2736]);
}

#[test]
fn balls_are_prefix_closed() {
    for name in ["schottky", "surface2", "product"] {
        let ball = enumerate_ball(&presets::by_name(name).unwrap(), 4, BIG).unwrap();
        let mut index: HashMap<Word, usize> = HashMap::new();
        for i in 0..ball.len() {
            index.insert(ball.word(i), i);
        }
        for i in 1..ball.len() {
            let w = ball.word(i);
            assert_eq!(w.len(), ball.word_length(i));
            for k in 0..w.len() {
                let j = index[&w.prefix(k)];
                assert_eq!(ball.word_length(j), k, "{name} {w}");
            }
        }
    }
}

#[test]
fn exact_and_float_dedup_agree() {
    let p = presets::schottky();
    let float = enumerate_ball(&p, 7, BIG).unwrap();
    let exact = enumerate_ball_exact(&p, 7, BIG).unwrap();
    assert!(exact.dedup.exact);
    assert_eq!(float.sphere_sizes(), exact.sphere_sizes());
    for i in 0..float.len() {
        assert_eq!(float.word(i), exact.word(i));
        for (x, y) in float.matrix_slice(i).iter().zip(exact.matrix_slice(i)) {
            assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }
}

#[test]
fn words_evaluate_to_stored_matrices() {
    let p = presets::asym_schottky();
    let ball = enumerate_ball(&p, 5, BIG).unwrap();
    for i in (0..ball.len()).step_by(7) {
        let g = p.evaluate(&ball.word(i));
        let dev = (g.matrix() - ball.matrix(i)).amax() / g.matrix().amax().max(1.0);
        assert!(dev < 1e-10);
        let e = ball.element(i);
        let id = e.matrix() * e.inverse_matrix();
        let scale = e.matrix().amax() * e.inverse_matrix().amax();
        assert!((id - DMatrix::identity(3, 3)).amax() < 1e-13 * scale);
    }
}

#[test]
fn budget_overrun_returns_partial_ball() {
    let err = enumerate_ball(&presets::schottky(), 8, 100).unwrap_err();
    assert!(matches!(err, OrbitError::BudgetExceeded { budget: 100, reached: 4, .. }));
    let partial = err.into_partial().unwrap();
    assert!(partial.truncated);
    assert_eq!(partial.len(), 100);
    assert_eq!(partial.truncated_to(3).len(), 53);
}

#[test]
fn divergence_verdicts() {
    let s = presets::schottky();
    let table = divergence_diagnostic(&enumerate_ball(&s, 8, BIG).unwrap(), &s.theta).unwrap();
    assert!(table.divergent_consistent);
    assert!(table.rows.windows(2).all(|w| w[1].min_gap > w[0].min_gap));

    let e = presets::elliptic();
    let table = divergence_diagnostic(&enumerate_ball(&e, 8, BIG).unwrap(), &e.theta).unwrap();
    assert!(!table.divergent_consistent);
    assert!(table.rows.iter().all(|r| r.min_gap < 1e-9));

    let b = presets::block();
    let ball = enumerate_ball(&b, 6, BIG).unwrap();
    assert!(!divergence_diagnostic(&ball, &b.theta).unwrap().divergent_consistent);
    let outer = RootSubset::new(4, [1, 3]).unwrap();
    assert!(divergence_diagnostic(&ball, &outer).unwrap().divergent_consistent);
}

#[test]
fn schottky_limit_sample_has_four_blocks() {
    let p = presets::schottky();
    let ball = enumerate_ball(&p, 8, BIG).unwrap();
    let sample = limit_set_sample(&ball, &p.theta, 3).unwrap();
    assert_eq!(sample.flags.len(), 36);
    let mut intra: f64 = 0.0;
    let mut inter = f64::INFINITY;
    for (w1, f1) in &sample.flags {
        for (w2, f2) in &sample.flags {
            let dist = flag_distance(f1, f2);
            if w1.letters()[0] == w2.letters()[0] {
                intra = intra.max(dist);
            } else {
                inter = inter.min(dist);
            }
        }
    }
    assert!(intra < inter, "intra {intra} inter {inter}");
    assert!(sample.conditioning.min > 0.0);
    assert!((sample.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn cyclic_limit_sample_is_two_flags() {
    let p = presets::cyclic(std::f64::consts::E);
    let ball = enumerate_ball(&p, 10, BIG).unwrap();
    let sample = limit_set_sample(&ball, &p.theta, 1).unwrap();
    assert_eq!(sample.flags.len(), 2);
    let e1 = PartialFlag::standard(&p.theta);
    let e2 = PartialFlag::opposite_standard(&p.theta);
    let near = |f: &PartialFlag<f64>, g: &PartialFlag<f64>| flag_distance(f, g) < 1e-8;
    let (a, b) = (&sample.flags[0].1, &sample.flags[1].1);
    assert!((near(a, &e1) && near(b, &e2)) || (near(a, &e2) && near(b, &e1)));
}

#[test]
fn sym2_conditioning_is_radius_independent() {
    let p = presets::sym2_schottky();
    let ball = enumerate_ball(&p, 12, BIG).unwrap();
    let mins: Vec<f64> = (6..=12)
        .map(|r| limit_set_sample(&ball.truncated_to(r), &p.theta, 3).unwrap().conditioning.min)
        .collect();
    let lo = mins.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = mins.iter().copied().fold(0.0, f64::max);
    assert!(lo > 1e-6, "{mins:?}");
    assert!(hi / lo < 1.5, "{mins:?}");
}

fn compact_points(seed: u64) -> (Vec<CompactPoint<f64>>, RootSubset) {
    let p = presets::schottky();
    let ball = enumerate_ball(&p, 6, BIG).unwrap();
    let sample = limit_set_sample(&ball, &p.theta, 4).unwrap();
    let mut r = common::rng(seed);
    let mut pts: Vec<CompactPoint<f64>> = (0..200)
        .map(|_| CompactPoint::Group(ball.element(r.random_range(0..ball.len()))))
        .collect();
    pts.extend(sample.flags.into_iter().map(|(_, f)| CompactPoint::Flag(f)));
    (pts, p.theta)
}

#[test]
fn compactification_triangle_inequality() {
    let (pts, theta) = compact_points(11);
    let mut r = common::rng(12);
    let n = pts.len();
    let dist: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| compactification_distance(&pts[i], &pts[j], &theta).unwrap()).collect())
        .collect();
    for _ in 0..10_000 {
        let (i, j, k) = (r.random_range(0..n), r.random_range(0..n), r.random_range(0..n));
        assert!(dist[i][k] <= dist[i][j] + dist[j][k] + 1e-12);
        assert!((dist[i][j] - dist[j][i]).abs() < 1e-12);
    }
}

#[test]
fn compactification_examples() {
    let p = presets::schottky();
    let g = p.generators[1].clone();
    let same = compactification_distance(&CompactPoint::Group(g.clone()), &CompactPoint::Group(g.clone()), &p.theta);
    assert_eq!(same.unwrap(), 0.0);

    let mut r = common::rng(3);
    for _ in 0..20 {
        let f = common::random_flag(&mut r, &p.theta);
        let id = CompactPoint::Group(GroupElement::identity(2));
        assert!(compactification_distance(&id, &CompactPoint::Flag(f), &p.theta).unwrap() >= 1.0);
    }

    // b = k a k⁻¹ attracts towards k·e₁ = (119, 120)/169
    let k_e1 = PartialFlag::from_frame(&p.theta, &DMatrix::from_column_slice(2, 1, &[119.0, 120.0])).unwrap();
    assert!(flag_distance(&u_theta(&g.power(20), &p.theta).unwrap(), &k_e1) < 1e-12);
    let mut last = f64::INFINITY;
    for n in 1..=12 {
        let d = compactification_distance(&CompactPoint::Group(g.power(n)), &CompactPoint::Flag(k_e1.clone()), &p.theta)
            .unwrap();
        assert!(d < last);
        last = d;
    }
    assert!(last < 1e-6);

    let nonsym = RootSubset::new(3, [1]).unwrap();
    let id = CompactPoint::Group(GroupElement::<f64>::identity(3));
    assert!(compactification_distance(&id, &id, &nonsym).is_err());
}

#[test]
fn cache_round_trip() {
    let dir = std::env::temp_dir().join(format!("td-cache-test-{}", std::process::id()));
    let p = presets::bent_schottky();
    let tols = Default::default();
    let first = cached_ball(&p, 5, BIG, &tols, Some(&dir)).unwrap();
    let key = ball_cache_key(&p, 5, &tols);
    assert!(dir.join(format!("{key}.tdball")).exists());
    let second = cached_ball(&p, 5, BIG, &tols, Some(&dir)).unwrap();
    assert_eq!(first.len(), second.len());
    assert_eq!(first.sphere_sizes(), second.sphere_sizes());
    for i in 0..first.len() {
        assert_eq!(first.word(i), second.word(i));
        assert_eq!(first.matrix_slice(i), second.matrix_slice(i));
        assert_eq!(first.inverse_slice(i), second.inverse_slice(i));
    }
    assert_ne!(key, ball_cache_key(&p, 6, &tols));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn sphere_csv() {
    let p = presets::schottky();
    let ball = enumerate_ball(&p, 4, BIG).unwrap();
    let mut out = Vec::new();
    write_sphere_csv(&ball, &p.theta, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "word_length,count,min_gap,max_gap");
    assert_eq!(lines.len(), 6);
    assert!(lines[3].starts_with("2,12,"));
}

#[test]
fn single_precision_ball() {
    let p = presets::schottky().cast::<f32>();
    let ball = enumerate_ball(&p, 6, BIG).unwrap();
    assert_eq!(ball.len(), 2 * 3usize.pow(6) - 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_schottky_groups_are_free(lambda in 3.0f64..12.0, angle in 0.6f64..1.0, radius in 0usize..6) {
        let p = presets::schottky_with(lambda, angle, "random");
        let ball = enumerate_ball(&p, radius, BIG).unwrap();
        prop_assert_eq!(ball.len(), free_count(2, radius));
    }

    #[test]
    fn truncation_preserves_prefix(radius in 1usize..6, cut in 0usize..6) {
        let p = presets::product();
        let ball = enumerate_ball(&p, radius, BIG).unwrap();
        let small = ball.truncated_to(cut.min(radius));
        prop_assert_eq!(small.len(), free_count(2, cut.min(radius)));
        for i in 0..small.len() {
            prop_assert_eq!(small.word(i), ball.word(i));
        }
    }
}
