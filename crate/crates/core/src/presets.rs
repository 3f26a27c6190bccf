//! Shipped example groups.

use std::f64::consts::{E, FRAC_PI_4, PI};

use nalgebra::DMatrix;

use crate::cartan::{GroupElement, RootSubset, Word};
use crate::orbit::{DomainTag, GroupPreset, OrbitError, RationalMatrix};
use crate::scalar::{lit, Real};

pub const NAMES: &[&str] = &[
    "cyclic",
    "schottky",
    "schottky16",
    "bent-schottky",
    "sym2-schottky",
    "block",
    "product",
    "asym-schottky",
    "surface2",
    "elliptic",
];

pub fn by_name(name: &str) -> Result<GroupPreset<f64>, OrbitError> {
    match name {
        "cyclic" => Ok(cyclic(E)),
        "schottky" => Ok(schottky()),
        "schottky16" => Ok(schottky_with(16.0, FRAC_PI_4, "schottky16")),
        "bent-schottky" => Ok(bent_schottky()),
        "sym2-schottky" => Ok(sym2_schottky()),
        "block" => Ok(block()),
        "product" => Ok(product()),
        "asym-schottky" => Ok(asym_schottky()),
        "surface2" => Ok(surface2()),
        "elliptic" => Ok(elliptic()),
        _ => Err(OrbitError::UnknownPreset(name.to_string())),
    }
}

fn el(d: usize, rows: &[f64]) -> GroupElement<f64> {
    GroupElement::from_matrix(DMatrix::from_row_slice(d, d, rows)).expect("preset generator")
}

fn diag2(l: f64) -> GroupElement<f64> {
    el(2, &[l, 0.0, 0.0, 1.0 / l])
}

fn rot2(t: f64) -> GroupElement<f64> {
    el(2, &[t.cos(), -t.sin(), t.sin(), t.cos()])
}

fn theta(d: usize, k: &[usize]) -> RootSubset {
    RootSubset::new(d, k.iter().copied()).expect("preset root subset")
}

fn words(ws: &[&str]) -> Vec<Word> {
    ws.iter().map(|w| Word::parse(w).expect("preset word")).collect()
}

/// ⟨diag(λ, 1/λ)⟩.
pub fn cyclic(lambda: f64) -> GroupPreset<f64> {
    GroupPreset::new("cyclic", vec![diag2(lambda)], theta(2, &[1]))
        .expect("infinite order")
        .with_domain(DomainTag::KleinDisk)
        .marked_free()
}

/// a = diag(λ, 1/λ), b = k a k⁻¹ with k the rotation by `angle`.
pub fn schottky_with(lambda: f64, angle: f64, name: &str) -> GroupPreset<f64> {
    let a = diag2(lambda);
    let b = a.conjugate_by(&rot2(angle));
    GroupPreset::new(name, vec![a, b], theta(2, &[1]))
        .expect("hyperbolic generators")
        .with_domain(DomainTag::KleinDisk)
        .marked_free()
        .with_subgroup("a", words(&["a"]))
        .with_subgroup("a2b2", words(&["aa", "bb"]))
}

/// λ = 4 Schottky group whose conjugating rotation has rational entries
/// (cos, sin) = (119/169, 120/169), about 45.2°, so exact dedup applies.
pub fn schottky() -> GroupPreset<f64> {
    let (c, s) = (119.0 / 169.0, 120.0 / 169.0);
    let angle = f64::atan2(s, c);
    let k = RationalMatrix::from_fractions(2, &[(119, 169), (-120, 169), (120, 169), (119, 169)]).expect("rotation");
    let a = RationalMatrix::from_fractions(2, &[(4, 1), (0, 1), (0, 1), (1, 4)]).expect("diagonal");
    let b = conjugate_exact(&a, &k);
    schottky_with(4.0, angle, "schottky")
        .with_exact(vec![a, b])
        .with_subgroup("ab2", words(&["a", "bb"]))
        .with_subgroup("ab4", words(&["a", "bbbb"]))
        .with_subgroup("ab8", words(&["a", "bbbbbbbb"]))
}

fn conjugate_exact(a: &RationalMatrix, k: &RationalMatrix) -> RationalMatrix {
    let d = a.dim;
    let mul = |x: &[num_rational::BigRational], y: &[num_rational::BigRational]| {
        let mut out = vec![num_rational::BigRational::default(); d * d];
        for i in 0..d {
            for j in 0..d {
                for l in 0..d {
                    out[i * d + j] += &x[i * d + l] * &y[l * d + j];
                }
            }
        }
        out
    };
    RationalMatrix {
        dim: d,
        entries: mul(&mul(&k.entries, &a.entries), &k.inverse),
        inverse: mul(&mul(&k.entries, &a.inverse), &k.inverse),
    }
}

/// The λ = 4 Schottky group with its second generator moved: different
/// translation length and axis. Same alphabet as [`schottky`].
pub fn bent_schottky() -> GroupPreset<f64> {
    let a = diag2(4.0);
    let b = diag2(4.6).conjugate_by(&rot2(FRAC_PI_4 + 0.15));
    GroupPreset::new("bent-schottky", vec![a, b], theta(2, &[1]))
        .expect("hyperbolic generators")
        .with_domain(DomainTag::KleinDisk)
        .marked_free()
}

/// Symmetric square SL(2) → SL(3) in the orthonormal basis (x², √2·xy, y²),
/// so that SO(2) maps into SO(3) and σ(Sym² g) = (σ², 1, σ⁻²).
pub fn sym2<T: Real>(g: &GroupElement<T>) -> GroupElement<T> {
    let f = |m: &DMatrix<T>| {
        let (p, q, r, s) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        let rt2: T = lit(std::f64::consts::SQRT_2);
        DMatrix::from_row_slice(
            3,
            3,
            &[
                p * p,
                rt2 * p * q,
                q * q,
                rt2 * p * r,
                p * s + q * r,
                rt2 * q * s,
                r * r,
                rt2 * r * s,
                s * s,
            ],
        )
    };
    GroupElement::from_parts(f(g.matrix()), f(g.inverse_matrix()), g.word().clone())
}

pub fn sym2_schottky() -> GroupPreset<f64> {
    let base = schottky();
    let gens = base.generators.iter().map(sym2).collect();
    GroupPreset::new("sym2-schottky", gens, theta(3, &[1, 2]))
        .expect("hyperbolic generators")
        .marked_free()
}

fn block_diag(blocks: &[&DMatrix<f64>]) -> GroupElement<f64> {
    let d: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut m = DMatrix::zeros(d, d);
    let mut o = 0;
    for b in blocks {
        m.view_mut((o, o), (b.nrows(), b.nrows())).copy_from(b);
        o += b.nrows();
    }
    GroupElement::from_matrix(m).expect("block generator")
}

/// diag(A, 1, 1) for A in the λ = 4 Schottky group, d = 4: α₁ and α₃ grow
/// with A while α₂ stays 0.
pub fn block() -> GroupPreset<f64> {
    let one = DMatrix::identity(2, 2);
    let gens = schottky()
        .generators
        .iter()
        .map(|g| block_diag(&[g.matrix(), &one]))
        .collect();
    GroupPreset::new("block", gens, theta(4, &[1, 2, 3])).expect("block generators")
}

/// a = diag(λ_a), b = k·diag(λ_b)·k⁻¹ with k the rotation by π/4. The axes
/// cross at a right angle, and tr[a, b] = x² + y² − x²y²/4 − 2 with x, y the
/// traces, so the group is a Schottky group when 4/x² + 4/y² < 1.
fn crossed_pair(lambda_a: f64, lambda_b: f64) -> [DMatrix<f64>; 2] {
    let a = diag2(lambda_a);
    let b = diag2(lambda_b).conjugate_by(&rot2(FRAC_PI_4));
    [a.matrix().clone(), b.matrix().clone()]
}

/// diag(A_i, B_i) for two Schottky representations of F₂ with different
/// translation lengths, d = 4: the left factor stretches a more than b, the
/// right factor the reverse. The left factor dominates on every element, so
/// ω₁ reads the left factor and ω₂ − ω₁ the right one.
pub fn product() -> GroupPreset<f64> {
    let left = crossed_pair(12.0, 7.0);
    let right = crossed_pair(3.0, 4.0);
    let gens = left
        .iter()
        .zip(&right)
        .map(|(a, b)| block_diag(&[a, b]))
        .collect();
    GroupPreset::new("product", gens, theta(4, &[1, 2, 3]))
        .expect("product generators")
        .marked_free()
}

fn rot3(axis: [f64; 3], t: f64) -> GroupElement<f64> {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let (x, y, z) = (axis[0] / n, axis[1] / n, axis[2] / n);
    let (c, s) = (t.cos(), t.sin());
    let v = 1.0 - c;
    el(
        3,
        &[
            c + x * x * v,
            x * y * v - z * s,
            x * z * v + y * s,
            y * x * v + z * s,
            c + y * y * v,
            y * z * v - x * s,
            z * x * v - y * s,
            z * y * v + x * s,
            c + z * z * v,
        ],
    )
}

/// Two loxodromics in SL(3) whose spectra are not symmetric under
/// inversion, so ℓ^{ω₁} and ℓ^{ω₂} are not proportional.
pub fn asym_schottky() -> GroupPreset<f64> {
    let a = el(3, &[3f64.exp(), 0.0, 0.0, 0.0, (-0.5f64).exp(), 0.0, 0.0, 0.0, (-2.5f64).exp()]);
    let b0 = el(3, &[2.5f64.exp(), 0.0, 0.0, 0.0, 0.5f64.exp(), 0.0, 0.0, 0.0, (-3f64).exp()]);
    let b = b0.conjugate_by(&rot3([1.0, 2.0, 3.0], 1.1));
    GroupPreset::new("asym-schottky", vec![a, b], theta(3, &[1, 2]))
        .expect("loxodromic generators")
        .marked_free()
}

/// Genus-two surface group: translations along the four axes through the
/// centre of the regular octagon with interior angles π/4,
/// with cosh(ℓ/2) = 1 + √2. Relator aBcDAbCd.
pub fn surface2() -> GroupPreset<f64> {
    let ell = 2.0 * (1.0 + std::f64::consts::SQRT_2).acosh();
    let t = diag2((ell / 2.0).exp());
    let gens = (0..4).map(|k| t.conjugate_by(&rot2(k as f64 * PI / 8.0))).collect();
    GroupPreset::new("surface2", gens, theta(2, &[1]))
        .expect("hyperbolic generators")
        .with_domain(DomainTag::KleinDisk)
}

pub const SURFACE2_RELATOR: &str = "aBcDAbCd";

/// Rotation by one radian: infinite order, bounded κ.
pub fn elliptic() -> GroupPreset<f64> {
    GroupPreset::new("elliptic", vec![rot2(1.0)], theta(2, &[1]))
        .expect("infinite order")
        .with_domain(DomainTag::KleinDisk)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_resolves() {
        for n in NAMES {
            let p = by_name(n).unwrap();
            for g in &p.generators {
                assert!((g.matrix().determinant() - 1.0).abs() < 1e-9, "{n}");
                assert!((g.matrix() * g.inverse_matrix() - DMatrix::identity(p.dim(), p.dim())).amax() < 1e-9);
            }
        }
        assert!(by_name("nope").is_err());
    }

    #[test]
    fn exact_generators_match_floats() {
        let p = schottky();
        for (g, e) in p.generators.iter().zip(p.exact.as_ref().unwrap()) {
            let f = DMatrix::from_row_slice(2, 2, &e.to_f64());
            assert!((g.matrix() - f).amax() < 1e-13);
        }
    }

    #[test]
    fn product_left_factor_dominates() {
        let p = product();
        let ball = crate::orbit::enumerate_ball(&p, 7, 100_000).unwrap();
        for i in 1..ball.len() {
            let m = ball.matrix(i);
            let left = crate::linalg::singular_values_desc(&m.view((0, 0), (2, 2)).into_owned())[0];
            let right = crate::linalg::singular_values_desc(&m.view((2, 2), (2, 2)).into_owned())[0];
            assert!(left > right, "{}", ball.word(i));
        }
    }

    #[test]
    fn surface_relator_is_trivial() {
        let p = surface2();
        let r = p.evaluate(&Word::parse(SURFACE2_RELATOR).unwrap());
        let m = r.matrix();
        let plus = (m - DMatrix::identity(2, 2)).amax();
        let minus = (m + DMatrix::identity(2, 2)).amax();
        assert!(plus.min(minus) < 1e-10);
    }
}
