use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::ball::WordBall;
use super::{GroupPreset, OrbitError};
use crate::cartan::Word;
use crate::scalar::{lit, Real};

/// Square matrix over Q, row-major, with its exact inverse.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RationalMatrix {
    pub dim: usize,
    pub entries: Vec<BigRational>,
    pub inverse: Vec<BigRational>,
}

impl RationalMatrix {
    /// Entries as (numerator, denominator) pairs in row-major order.
    pub fn from_fractions(dim: usize, fr: &[(i64, i64)]) -> Option<Self> {
        assert_eq!(fr.len(), dim * dim);
        let entries: Vec<BigRational> = fr
            .iter()
            .map(|&(p, q)| BigRational::new(BigInt::from(p), BigInt::from(q)))
            .collect();
        let inverse = invert(dim, &entries)?;
        Some(RationalMatrix { dim, entries, inverse })
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.entries.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect()
    }

    pub fn determinant(&self) -> BigRational {
        let d = self.dim;
        let mut a = self.entries.clone();
        let mut det = BigRational::one();
        for c in 0..d {
            let Some(p) = (c..d).find(|&r| !a[r * d + c].is_zero()) else {
                return BigRational::zero();
            };
            if p != c {
                for k in 0..d {
                    a.swap(p * d + k, c * d + k);
                }
                det = -det;
            }
            let piv = a[c * d + c].clone();
            det *= &piv;
            for r in c + 1..d {
                let f = &a[r * d + c] / &piv;
                for k in c..d {
                    let v = &f * &a[c * d + k];
                    a[r * d + k] -= v;
                }
            }
        }
        det
    }
}

fn invert(d: usize, m: &[BigRational]) -> Option<Vec<BigRational>> {
    let mut a = m.to_vec();
    let mut inv: Vec<BigRational> = (0..d * d)
        .map(|i| if i / d == i % d { BigRational::one() } else { BigRational::zero() })
        .collect();
    for c in 0..d {
        let p = (c..d).find(|&r| !a[r * d + c].is_zero())?;
        for k in 0..d {
            a.swap(p * d + k, c * d + k);
            inv.swap(p * d + k, c * d + k);
        }
        let piv = a[c * d + c].clone();
        for k in 0..d {
            a[c * d + k] = &a[c * d + k] / &piv;
            inv[c * d + k] = &inv[c * d + k] / &piv;
        }
        for r in 0..d {
            if r == c || a[r * d + c].is_zero() {
                continue;
            }
            let f = a[r * d + c].clone();
            for k in 0..d {
                let x = &f * &a[c * d + k];
                a[r * d + k] -= x;
                let y = &f * &inv[c * d + k];
                inv[r * d + k] -= y;
            }
        }
    }
    Some(inv)
}

fn mul(d: usize, a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let mut out = vec![BigRational::zero(); d * d];
    for i in 0..d {
        for k in 0..d {
            if a[i * d + k].is_zero() {
                continue;
            }
            for j in 0..d {
                out[i * d + j] += &a[i * d + k] * &b[k * d + j];
            }
        }
    }
    out
}

/// ±M identified for even d: the representative has a positive first
/// nonzero entry.
fn canonical(d: usize, m: &[BigRational]) -> Vec<BigRational> {
    if d % 2 == 0 {
        if let Some(first) = m.iter().find(|x| !x.is_zero()) {
            if first.is_negative() {
                return m.iter().map(|x| -x).collect();
            }
        }
    }
    m.to_vec()
}

fn row_to_col_major<T: Real>(d: usize, m: &[BigRational]) -> Vec<T> {
    let mut out = vec![T::zero(); d * d];
    for i in 0..d {
        for j in 0..d {
            out[i + j * d] = lit(m[i * d + j].to_f64().unwrap_or(f64::NAN));
        }
    }
    out
}

/// Same traversal as [`super::enumerate_ball`], deduplicating on exact
/// rational matrices.
pub fn enumerate_ball_exact<T: Real>(
    preset: &GroupPreset<T>,
    radius: usize,
    budget: usize,
) -> Result<WordBall<T>, OrbitError<T>> {
    let gens = preset.exact.as_ref().ok_or(OrbitError::NoExactGenerators)?;
    let d = preset.dim();
    let letters = preset.letters();
    let letter_mats: Vec<(&[BigRational], &[BigRational])> = letters
        .iter()
        .map(|&l| {
            let g = &gens[l.unsigned_abs() as usize - 1];
            if l > 0 {
                (g.entries.as_slice(), g.inverse.as_slice())
            } else {
                (g.inverse.as_slice(), g.entries.as_slice())
            }
        })
        .collect();
    let mut ball = WordBall::<T>::identity(d);
    ball.dedup.exact = true;
    let id: Vec<BigRational> = (0..d * d)
        .map(|i| if i / d == i % d { BigRational::one() } else { BigRational::zero() })
        .collect();
    let mut exact_mats = vec![(id.clone(), id.clone())];
    let mut seen: HashMap<Vec<BigRational>, usize> = HashMap::new();
    seen.insert(canonical(d, &id), 0);

    for n in 1..=radius {
        for p in ball.sphere(n - 1) {
            let last = ball.letter[p];
            for (li, &l) in letters.iter().enumerate() {
                if last != 0 && l == -last {
                    continue;
                }
                ball.dedup.candidates += 1;
                let m = mul(d, &exact_mats[p].0, letter_mats[li].0);
                let key = canonical(d, &m);
                if let Some(&hit) = seen.get(&key) {
                    if preset.free && key == m {
                        let mut w = ball.word(p).letters().to_vec();
                        w.push(l);
                        return Err(OrbitError::NonDiscreteSuspect {
                            first: ball.word(hit).to_string(),
                            second: Word::new(w).to_string(),
                        });
                    }
                    ball.dedup.merged += 1;
                    ball.dedup.sign_merges += (key != m) as usize;
                    continue;
                }
                if ball.len() >= budget {
                    ball.offsets.push(ball.len());
                    ball.radius = n;
                    ball.truncated = true;
                    return Err(OrbitError::BudgetExceeded {
                        budget,
                        reached: n,
                        partial: Box::new(ball),
                    });
                }
                let inv = mul(d, letter_mats[li].1, &exact_mats[p].1);
                let idx = ball.len();
                ball.mats.extend(row_to_col_major::<T>(d, &m));
                ball.invs.extend(row_to_col_major::<T>(d, &inv));
                ball.parent.push(p as u32);
                ball.letter.push(l);
                seen.insert(key, idx);
                exact_mats.push((m, inv));
            }
        }
        ball.offsets.push(ball.len());
        ball.radius = n;
    }
    Ok(ball)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_inverse_and_determinant() {
        let r = RationalMatrix::from_fractions(2, &[(119, 169), (-120, 169), (120, 169), (119, 169)]).unwrap();
        assert!(r.determinant().is_one());
        let prod = mul(2, &r.entries, &r.inverse);
        assert!(prod[0].is_one() && prod[1].is_zero() && prod[2].is_zero() && prod[3].is_one());
    }
}
