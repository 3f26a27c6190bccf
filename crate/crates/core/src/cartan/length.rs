use nalgebra::DMatrix;

use super::{
    cartan_project, is_transverse, iwasawa_cocycle, u_theta, weight_coords, CartanError, CartanVector,
    GroupElement, LinearFunctional, PartialFlag,
};
use crate::linalg::{compound, singular_values_desc, spectral_radius};
use crate::scalar::{lit, to_f64, Real};

/// Jordan projection: sorted log-moduli of the eigenvalues, built from
/// ω_k = log ρ(Λ^k g) (k ≤ d/2) or log ρ(Λ^{d−k} g⁻¹) (k > d/2).
pub fn jordan_projection<T: Real>(g: &GroupElement<T>) -> Result<CartanVector<T>, CartanError> {
    let d = g.dim();
    let mut omegas = Vec::with_capacity(d - 1);
    for k in 1..d {
        let rho = if 2 * k <= d {
            spectral_radius(&compound(g.matrix(), k))
        } else {
            spectral_radius(&compound(g.inverse_matrix(), d - k))
        }
        .ok_or(CartanError::EigenFailure)?;
        if !(rho > T::zero()) {
            return Err(CartanError::EigenFailure);
        }
        omegas.push(rho.ln());
    }
    Ok(CartanVector::from_omegas(&omegas))
}

/// ℓ^φ(g) = φ(λ(g)).
pub fn phi_length<T: Real>(g: &GroupElement<T>, phi: &LinearFunctional<T>) -> Result<T, CartanError> {
    Ok(phi.eval(&jordan_projection(g)?))
}

/// log σ_1(M^{2^n}) by normalized repeated squaring.
fn log_top_singular_of_power<T: Real>(m: &DMatrix<T>, n: u32) -> T {
    let mut a = m.clone();
    let mut log_scale = T::zero();
    for _ in 0..n {
        let s = a.norm();
        a /= s;
        log_scale += s.ln();
        a = &a * &a;
        log_scale *= lit::<T>(2.0);
    }
    log_scale + singular_values_desc(&a)[0].ln()
}

fn phi_kappa_power<T: Real>(g: &GroupElement<T>, phi: &LinearFunctional<T>, n: u32) -> T {
    let d = g.dim();
    let mut acc = T::zero();
    for (&k, &c) in phi.theta.indices().iter().zip(&phi.coeffs) {
        let w = if 2 * k <= d {
            log_top_singular_of_power(&compound(g.matrix(), k), n)
        } else {
            log_top_singular_of_power(&compound(g.inverse_matrix(), d - k), n)
        };
        acc += c * w;
    }
    acc
}

/// φ(κ(g^N)) / N with N = 2^n.
pub fn phi_power_estimate<T: Real>(g: &GroupElement<T>, phi: &LinearFunctional<T>, n: u32) -> T {
    phi_kappa_power(g, phi, n) / lit::<T>(2f64.powi(n as i32))
}

/// (φ(κ(g^{2N})) − φ(κ(g^N))) / N with N = 2^n; the bounded offset of
/// φ(κ(g^N)) − N ℓ^φ(g) cancels, so this converges geometrically.
pub fn phi_power_increment<T: Real>(g: &GroupElement<T>, phi: &LinearFunctional<T>, n: u32) -> T {
    (phi_kappa_power(g, phi, n + 1) - phi_kappa_power(g, phi, n)) / lit::<T>(2f64.powi(n as i32))
}

/// ‖B_θ(g, F) − κ_θ(g)‖_∞ for F at conditioning ≥ `eps` from the repelling
/// locus of g.
pub fn quint_gap_check<T: Real>(g: &GroupElement<T>, f: &PartialFlag<T>, eps: f64) -> Result<T, CartanError> {
    let repelling = u_theta(&g.inverse(), f.theta())?;
    let (_, cond) = is_transverse(f, &repelling);
    if cond < lit(eps) {
        return Err(CartanError::PreconditionViolated(format!(
            "flag conditioning {:e} against the repelling locus is below {eps:e}",
            to_f64(cond)
        )));
    }
    let kappa = weight_coords(&cartan_project(g)?, f.theta());
    Ok(iwasawa_cocycle(g, f).sub(&kappa).norm_inf())
}
