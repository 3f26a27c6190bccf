#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use transverse_core::cartan::{GroupElement, PartialFlag, RootSubset};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random element of SL(d) with entries of size `scale`.
pub fn random_sl(r: &mut ChaCha8Rng, d: usize, scale: f64) -> GroupElement<f64> {
    loop {
        let mut m = DMatrix::from_fn(d, d, |_, _| r.random_range(-scale..scale));
        let det = m.determinant();
        if det.abs() < 1e-3 {
            continue;
        }
        if det < 0.0 {
            let row = -m.row(0).into_owned();
            m.set_row(0, &row);
        }
        return GroupElement::from_matrix(m).unwrap();
    }
}

pub fn random_flag(r: &mut ChaCha8Rng, theta: &RootSubset) -> PartialFlag<f64> {
    let d = theta.dim();
    let m = DMatrix::from_fn(d, d, |_, _| r.random_range(-1.0..1.0));
    PartialFlag::from_frame(theta, &m).unwrap()
}

pub fn diag(v: &[f64]) -> GroupElement<f64> {
    GroupElement::from_matrix(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(v))).unwrap()
}

pub fn rotation2(t: f64) -> GroupElement<f64> {
    GroupElement::from_matrix(DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()])).unwrap()
}

/// Rotation of R^3 about a fixed generic axis.
pub fn rotation3(t: f64) -> GroupElement<f64> {
    let axis = nalgebra::Vector3::new(1.0, 2.0, 3.0).normalize();
    let r = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), t);
    GroupElement::from_matrix(DMatrix::from_fn(3, 3, |i, j| r.matrix()[(i, j)])).unwrap()
}

pub struct Sequence {
    pub label: String,
    pub elements: Vec<GroupElement<f64>>,
    pub f_plus: PartialFlag<f64>,
    pub f_minus: PartialFlag<f64>,
    pub expect_convergence: bool,
}

/// Fifty sequences: proximal conjugated powers, aⁿc products, alternating
/// mixtures of two proximal powers, and elliptic rotations.
pub fn engineered_sequences(seed: u64) -> (Vec<Sequence>, Vec<PartialFlag<f64>>, Vec<PartialFlag<f64>>) {
    let mut r = rng(seed);
    let t2 = RootSubset::full(2);
    let t3 = RootSubset::full(3);
    let mut out = Vec::new();
    let len = 40i64;
    for i in 0..20 {
        let (theta, a) = if i % 2 == 0 {
            (&t2, diag(&[3.0, 1.0 / 3.0]))
        } else {
            (&t3, diag(&[3.0, 1.0, 1.0 / 3.0]))
        };
        let k = random_sl(&mut r, theta.dim(), 1.0);
        let b = a.conjugate_by(&k);
        out.push(Sequence {
            label: format!("proximal-power-{i}"),
            elements: (1..=len).map(|n| b.power(n)).collect(),
            f_plus: PartialFlag::standard(theta).apply(&k),
            f_minus: PartialFlag::opposite_standard(theta).apply(&k),
            expect_convergence: true,
        });
    }
    for i in 0..10 {
        let (theta, a) = if i % 2 == 0 {
            (&t2, diag(&[2.5, 0.4]))
        } else {
            (&t3, diag(&[2.5, 1.2, 1.0 / 3.0]))
        };
        let c = random_sl(&mut r, theta.dim(), 1.0);
        out.push(Sequence {
            label: format!("power-times-fixed-{i}"),
            elements: (1..=len).map(|n| a.power(n).compose(&c)).collect(),
            f_plus: PartialFlag::standard(theta),
            f_minus: PartialFlag::opposite_standard(theta).apply(&c.inverse()),
            expect_convergence: true,
        });
    }
    for i in 0..10 {
        let (theta, a) = if i % 2 == 0 {
            (&t2, diag(&[3.0, 1.0 / 3.0]))
        } else {
            (&t3, diag(&[3.0, 1.0, 1.0 / 3.0]))
        };
        let k = random_sl(&mut r, theta.dim(), 1.0);
        let b = a.conjugate_by(&k);
        out.push(Sequence {
            label: format!("alternating-{i}"),
            elements: (1..=len)
                .map(|n| if n % 2 == 0 { a.power(n) } else { b.power(n) })
                .collect(),
            f_plus: PartialFlag::standard(theta),
            f_minus: PartialFlag::opposite_standard(theta),
            expect_convergence: false,
        });
    }
    for i in 0..10 {
        let angle = 0.7 + 0.13 * i as f64;
        let (theta, rot) = if i % 2 == 0 {
            (&t2, rotation2(angle))
        } else {
            (&t3, rotation3(angle))
        };
        let k = random_sl(&mut r, theta.dim(), 1.0);
        let e = rot.conjugate_by(&k);
        out.push(Sequence {
            label: format!("elliptic-{i}"),
            elements: (1..=len).map(|n| e.power(n)).collect(),
            f_plus: PartialFlag::standard(theta),
            f_minus: PartialFlag::opposite_standard(theta),
            expect_convergence: false,
        });
    }
    let probes2 = (0..8).map(|_| random_flag(&mut r, &t2)).collect();
    let probes3 = (0..8).map(|_| random_flag(&mut r, &t3)).collect();
    (out, probes2, probes3)
}

pub type Rng8 = ChaCha8Rng;
