use nalgebra::DMatrix;

use super::{cartan_project, CartanError, GroupElement, RootSubset, Tolerances, WeightVector};
use crate::linalg::{complete_frame, log_volume, max_principal_angle, svd_sorted};
use crate::scalar::{lit, to_f64, tol, Real};

/// Partial flag F^{i_1} ⊂ … ⊂ F^{i_k} stored as an adapted orthonormal frame:
/// F^j is spanned by the first j columns for every j ∈ θ.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialFlag<T: Real> {
    theta: RootSubset,
    frame: DMatrix<T>,
}

/// Number of leading columns read forward and trailing columns read through
/// the inverse transpose.
fn split(d: usize) -> (usize, usize) {
    let p = d / 2;
    (p, d - p - 1)
}

impl<T: Real> PartialFlag<T> {
    /// The frame is re-orthonormalized column by column.
    pub fn from_frame(theta: &RootSubset, frame: &DMatrix<T>) -> Result<Self, CartanError> {
        let d = theta.dim();
        if frame.nrows() != d || frame.ncols() == 0 || frame.ncols() > d {
            return Err(CartanError::DimensionMismatch(frame.nrows(), d));
        }
        let empty = DMatrix::zeros(d, 0);
        let frame = complete_frame(frame, &empty);
        if frame.iter().any(|x| !x.is_finite()) {
            return Err(CartanError::SingularMatrix);
        }
        Ok(PartialFlag {
            theta: theta.clone(),
            frame,
        })
    }

    pub(crate) fn from_frame_unchecked(theta: &RootSubset, frame: DMatrix<T>) -> Self {
        PartialFlag {
            theta: theta.clone(),
            frame,
        }
    }

    /// ⟨e_1⟩ ⊂ ⟨e_1, e_2⟩ ⊂ …
    pub fn standard(theta: &RootSubset) -> Self {
        let d = theta.dim();
        PartialFlag {
            theta: theta.clone(),
            frame: DMatrix::identity(d, d),
        }
    }

    /// ⟨e_d⟩ ⊂ ⟨e_d, e_{d−1}⟩ ⊂ …, transverse to the standard flag.
    pub fn opposite_standard(theta: &RootSubset) -> Self {
        let d = theta.dim();
        PartialFlag {
            theta: theta.clone(),
            frame: DMatrix::from_fn(d, d, |i, j| if i + j == d - 1 { T::one() } else { T::zero() }),
        }
    }

    pub fn theta(&self) -> &RootSubset {
        &self.theta
    }

    pub fn dim(&self) -> usize {
        self.frame.nrows()
    }

    pub fn frame(&self) -> &DMatrix<T> {
        &self.frame
    }

    /// Orthonormal basis of F^j.
    pub fn subspace(&self, j: usize) -> DMatrix<T> {
        self.frame.columns(0, j).into_owned()
    }

    /// Orthonormal basis of the orthogonal complement of F^j.
    pub fn complement(&self, j: usize) -> DMatrix<T> {
        self.frame.columns(j, self.dim() - j).into_owned()
    }

    /// Orthogonal projector onto F^j.
    pub fn projector(&self, j: usize) -> DMatrix<T> {
        let b = self.subspace(j);
        &b * b.transpose()
    }

    /// Largest deviation of F^i from F^j over consecutive indices of θ.
    pub fn nesting_defect(&self) -> T {
        let idx = self.theta.indices();
        let mut worst = T::zero();
        for w in idx.windows(2) {
            let small = self.subspace(w[0]);
            let big = self.subspace(w[1]);
            let resid = &small - &big * (big.transpose() * &small);
            worst = worst.max(resid.amax());
        }
        worst
    }

    /// g·F, computed forward on the leading block and through g^{-T} on the
    /// orthogonal complements of the trailing block.
    pub fn apply(&self, g: &GroupElement<T>) -> Self {
        let d = self.dim();
        let (p, q) = split(d);
        let top = g.matrix() * self.frame.columns(0, p);
        let git = g.inverse_matrix().transpose();
        let mut bottom = DMatrix::zeros(d, q);
        for i in 0..q {
            bottom.set_column(i, &(&git * self.frame.column(d - 1 - i)));
        }
        PartialFlag {
            theta: self.theta.clone(),
            frame: complete_frame(&top, &bottom),
        }
    }

    /// Concatenated projector entries for j ∈ θ; basis independent.
    pub fn projector_entries(&self) -> Vec<T> {
        let mut out = Vec::new();
        for &j in self.theta.indices() {
            out.extend(self.projector(j).iter().copied());
        }
        out
    }
}

/// U_θ(g) with the default gap threshold.
pub fn u_theta<T: Real>(g: &GroupElement<T>, theta: &RootSubset) -> Result<PartialFlag<T>, CartanError> {
    u_theta_with(g, theta, &Tolerances::default())
}

pub fn u_theta_with<T: Real>(
    g: &GroupElement<T>,
    theta: &RootSubset,
    tols: &Tolerances,
) -> Result<PartialFlag<T>, CartanError> {
    if g.dim() != theta.dim() {
        return Err(CartanError::DimensionMismatch(g.dim(), theta.dim()));
    }
    let kappa = cartan_project(g)?;
    let gap_min: T = tol(tols.gap_min);
    for &k in theta.indices() {
        let gap = kappa.alpha(k);
        if gap < gap_min {
            return Err(CartanError::DegenerateGap {
                index: k,
                gap: to_f64(gap),
            });
        }
    }
    Ok(u_theta_unchecked(g, theta))
}

/// Leading left singular vectors without the gap test; when gaps vanish the
/// result is one admissible choice among many.
pub fn u_theta_unchecked<T: Real>(g: &GroupElement<T>, theta: &RootSubset) -> PartialFlag<T> {
    let d = g.dim();
    let (p, q) = split(d);
    let fwd = svd_sorted(g.matrix());
    let back = svd_sorted(g.inverse_matrix());
    let top = fwd.u.columns(0, p).into_owned();
    // right singular vectors of g⁻¹ are left singular vectors of g^{-T}
    let bottom = back.v.columns(0, q).into_owned();
    PartialFlag::from_frame_unchecked(theta, complete_frame(&top, &bottom))
}

/// ω_j(B_θ(g, F)) = log vol_j(g F^j) for j ∈ θ. Large indices use the dual
/// identity vol_j(g F^j) = vol_{d−j}(g^{-T} (F^j)^⊥), valid since det g = 1.
pub fn iwasawa_cocycle<T: Real>(g: &GroupElement<T>, f: &PartialFlag<T>) -> WeightVector<T> {
    let d = f.dim();
    let values = f
        .theta()
        .indices()
        .iter()
        .map(|&j| {
            if 2 * j <= d {
                log_volume(&(g.matrix() * f.frame().columns(0, j)))
            } else {
                log_volume(&(g.inverse_matrix().transpose() * f.frame().columns(j, d - j)))
            }
        })
        .collect();
    WeightVector {
        theta: f.theta().clone(),
        values,
    }
}

/// |det[F^j | G^{d−j}]| for each j ∈ θ, with orthonormal bases.
fn pairing_dets<T: Real>(f: &PartialFlag<T>, g: &PartialFlag<T>) -> Vec<(usize, T)> {
    let d = f.dim();
    f.theta()
        .indices()
        .iter()
        .map(|&j| {
            let m = f.frame().columns(0, j).transpose() * g.frame().columns(d - j, j);
            (j, m.determinant().abs())
        })
        .collect()
}

/// Transversality test: F^j ⊕ G^{d−j} = R^d for all j ∈ θ. Returns the
/// verdict and the smallest |det| of the stacked orthonormal bases.
pub fn is_transverse<T: Real>(f: &PartialFlag<T>, g: &PartialFlag<T>) -> (bool, T) {
    is_transverse_with(f, g, Tolerances::default().transverse)
}

pub fn is_transverse_with<T: Real>(f: &PartialFlag<T>, g: &PartialFlag<T>, tau: f64) -> (bool, T) {
    let cond = pairing_dets(f, g)
        .into_iter()
        .map(|(_, v)| v)
        .fold(T::one(), |a, b| a.min(b));
    (cond > lit(tau), cond)
}

/// [F, G]_j = log |det(B_{F^{d−j}}ᵀ · B_{(G^j)^⊥})|, zero at the standard
/// opposite pair. Satisfies [hF, hG]_j − [F, G]_j = −B(h,F)_{d−j} − B(h,G)_j.
pub fn gromov_product<T: Real>(f: &PartialFlag<T>, g: &PartialFlag<T>) -> Result<WeightVector<T>, CartanError> {
    f.theta().require_symmetric()?;
    if f.theta() != g.theta() {
        return Err(CartanError::DimensionMismatch(f.theta().len(), g.theta().len()));
    }
    let dets = pairing_dets(f, g);
    let cond = dets.iter().map(|&(_, v)| v).fold(T::one(), |a, b| a.min(b));
    if !(cond > lit(Tolerances::default().transverse)) {
        return Err(CartanError::NotTransverse(to_f64(cond)));
    }
    let d = f.dim();
    let values = f
        .theta()
        .indices()
        .iter()
        .map(|&j| {
            let pos = f.theta().position(d - j).expect("symmetric");
            dets[pos].1.ln()
        })
        .collect();
    Ok(WeightVector {
        theta: f.theta().clone(),
        values,
    })
}

/// Largest principal angle between F^j and G^j, maximized over j ∈ θ;
/// takes values in [0, π/2].
pub fn flag_distance<T: Real>(f: &PartialFlag<T>, g: &PartialFlag<T>) -> T {
    let d = f.dim();
    let mut worst = T::zero();
    for &j in f.theta().indices() {
        let ang = if 2 * j <= d {
            max_principal_angle(&f.subspace(j), &g.subspace(j))
        } else {
            max_principal_angle(&f.complement(j), &g.complement(j))
        };
        worst = worst.max(ang);
    }
    worst
}
