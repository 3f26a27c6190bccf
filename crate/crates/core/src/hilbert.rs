//! Properly convex domains with their Hilbert metric: shadows, horofunctions,
//! Hopf coordinates and visibility, plus the Klein-disk model through which
//! the `SL(2, R)` presets act.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cartan::{cartan_project, CartanError, GroupElement, PartialFlag};
use crate::orbit::{DomainTag, GroupPreset};
use crate::scalar::{lit, to_f64, tol, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HilbertError {
    #[error("point is within {0:e} of the boundary")]
    PointOnBoundary(f64),
    #[error("boundary point has no smoothness certificate")]
    NotSmoothCertificate,
    #[error("domain is not properly convex: {0}")]
    NotProperlyConvex(String),
    #[error("basepoint margin {0:e} is below 1e-9")]
    BasepointMargin(f64),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error(transparent)]
    Cartan(#[from] CartanError),
}

const BOUNDARY_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum DomainKind<T: Real> {
    /// {x : |L(x − c)| < 1}, i.e. the ellipsoid with shape LᵀL.
    Ball { center: DVector<T>, map: DMatrix<T> },
    /// {x : ⟨a_i, x⟩ + b_i > 0 for all i}.
    Polytope { normals: Vec<DVector<T>>, offsets: Vec<T>, simplex: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexDomain<T: Real> {
    pub kind: DomainKind<T>,
    pub basepoint: DVector<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint<T: Real> {
    pub point: DVector<T>,
    /// Outward normal of the unique supporting hyperplane, when unique.
    pub normal: Option<DVector<T>>,
    /// Distance to the nearest inactive facet (infinite for the ball).
    pub uniqueness_margin: T,
    /// Facet or quadric residual.
    pub residual: T,
}

impl<T: Real> BoundaryPoint<T> {
    pub fn is_smooth(&self) -> bool {
        self.normal.is_some() && self.uniqueness_margin > lit(BOUNDARY_MARGIN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Horofunction<T: Real> {
    pub value: T,
    /// Difference of the last two extrapolation stages (0 in closed form).
    pub residual: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopfVector<T: Real> {
    pub x: BoundaryPoint<T>,
    pub y: BoundaryPoint<T>,
    pub s: T,
}

impl<T: Real> ConvexDomain<T> {
    pub fn unit_ball(d0: usize) -> Self {
        ConvexDomain {
            kind: DomainKind::Ball {
                center: DVector::zeros(d0),
                map: DMatrix::identity(d0, d0),
            },
            basepoint: DVector::zeros(d0),
        }
    }

    /// Ellipsoid {(x − c)ᵀ A (x − c) < 1}, A positive definite.
    pub fn ellipsoid(center: DVector<T>, shape: DMatrix<T>) -> Result<Self, HilbertError> {
        let chol = shape
            .cholesky()
            .ok_or_else(|| HilbertError::NotProperlyConvex("shape is not positive definite".into()))?;
        let map = chol.l().transpose();
        Ok(ConvexDomain {
            kind: DomainKind::Ball { center: center.clone(), map },
            basepoint: center,
        })
    }

    /// Open simplex with the given d₀ + 1 vertices, based at the barycentre.
    pub fn simplex(vertices: &[DVector<T>]) -> Result<Self, HilbertError> {
        let d0 = vertices.first().map(|v| v.len()).unwrap_or(0);
        if vertices.len() != d0 + 1 {
            return Err(HilbertError::NotProperlyConvex("a simplex needs d0 + 1 vertices".into()));
        }
        let m = DMatrix::from_fn(d0 + 1, d0 + 1, |i, j| if i < d0 { vertices[j][i] } else { T::one() });
        let inv = m
            .try_inverse()
            .ok_or_else(|| HilbertError::NotProperlyConvex("degenerate simplex".into()))?;
        // row i of the inverse is the barycentric coordinate vanishing on the facet opposite v_i
        let normals = (0..=d0).map(|i| DVector::from_fn(d0, |k, _| inv[(i, k)])).collect();
        let offsets = (0..=d0).map(|i| inv[(i, d0)]).collect();
        let n: T = lit((d0 + 1) as f64);
        let centre = vertices.iter().fold(DVector::zeros(d0), |acc, v| acc + v) / n;
        Self::polytope_inner(normals, offsets, centre, true)
    }

    /// The standard simplex spanned by 0, e₁, …, e_{d₀}.
    pub fn standard_simplex(d0: usize) -> Self {
        let mut vs = vec![DVector::zeros(d0)];
        for k in 0..d0 {
            let mut e = DVector::zeros(d0);
            e[k] = T::one();
            vs.push(e);
        }
        Self::simplex(&vs).expect("standard simplex")
    }

    pub fn polytope(normals: Vec<DVector<T>>, offsets: Vec<T>, basepoint: DVector<T>) -> Result<Self, HilbertError> {
        Self::polytope_inner(normals, offsets, basepoint, false)
    }

    fn polytope_inner(
        normals: Vec<DVector<T>>,
        offsets: Vec<T>,
        basepoint: DVector<T>,
        simplex: bool,
    ) -> Result<Self, HilbertError> {
        let d0 = basepoint.len();
        let dom = ConvexDomain {
            kind: DomainKind::Polytope { normals, offsets, simplex },
            basepoint,
        };
        let margin = dom.interior_margin(&dom.basepoint);
        if margin < lit(1e-9) {
            return Err(HilbertError::BasepointMargin(to_f64(margin)));
        }
        // bounded iff every ray from the basepoint leaves; probe the axes
        // and the inward normals
        let DomainKind::Polytope { normals, .. } = &dom.kind else { unreachable!() };
        let mut probes: Vec<DVector<T>> = Vec::new();
        for k in 0..d0 {
            let mut e = DVector::zeros(d0);
            e[k] = T::one();
            probes.push(-e.clone());
            probes.push(e);
        }
        probes.extend(normals.iter().cloned());
        for v in &probes {
            if dom.exit_time(&dom.basepoint, v) >= T::max_value().unwrap() {
                return Err(HilbertError::NotProperlyConvex("unbounded in some direction".into()));
            }
        }
        Ok(dom)
    }

    pub fn dim(&self) -> usize {
        self.basepoint.len()
    }

    pub fn is_ball(&self) -> bool {
        matches!(self.kind, DomainKind::Ball { .. })
    }

    fn normalized(&self, p: &DVector<T>) -> DVector<T> {
        match &self.kind {
            DomainKind::Ball { center, map } => map * (p - center),
            DomainKind::Polytope { .. } => p.clone(),
        }
    }

    /// Facet values ⟨a_i, p⟩ + b_i (polytopes only).
    pub fn facet_values(&self, p: &DVector<T>) -> Vec<T> {
        match &self.kind {
            DomainKind::Polytope { normals, offsets, .. } => {
                normals.iter().zip(offsets).map(|(a, &b)| a.dot(p) + b).collect()
            }
            DomainKind::Ball { .. } => Vec::new(),
        }
    }

    /// Positive inside, zero on the boundary.
    pub fn interior_margin(&self, p: &DVector<T>) -> T {
        match &self.kind {
            DomainKind::Ball { .. } => T::one() - self.normalized(p).norm(),
            DomainKind::Polytope { normals, .. } => self
                .facet_values(p)
                .iter()
                .zip(normals)
                .map(|(&f, a)| f / a.norm())
                .fold(T::max_value().unwrap(), |m, x| m.min(x)),
        }
    }

    fn require_interior(&self, p: &DVector<T>) -> Result<(), HilbertError> {
        let m = self.interior_margin(p);
        if !(m >= lit(BOUNDARY_MARGIN)) {
            return Err(HilbertError::PointOnBoundary(to_f64(m)));
        }
        Ok(())
    }

    /// Smallest t > 0 with p + t·v on the boundary (infinite if none).
    fn exit_time(&self, p: &DVector<T>, v: &DVector<T>) -> T {
        self.chord(p, v).1
    }

    /// (t₋, t₊) with t₋ < 0 < t₊ the boundary crossings of p + t·v.
    pub fn chord(&self, p: &DVector<T>, v: &DVector<T>) -> (T, T) {
        let inf = T::max_value().unwrap();
        match &self.kind {
            DomainKind::Ball { map, .. } => {
                let w = self.normalized(p);
                let dv = map * v;
                let a = dv.dot(&dv);
                let b = w.dot(&dv);
                let c = w.dot(&w) - T::one();
                let disc = (b * b - a * c).max(T::zero()).sqrt();
                // stable roots of a t² + 2 b t + c
                let q = if b >= T::zero() { -(b + disc) } else { -b + disc };
                let (t1, t2) = (q / a, c / q);
                (t1.min(t2), t1.max(t2))
            }
            DomainKind::Polytope { normals, offsets, .. } => {
                let (mut lo, mut hi) = (-inf, inf);
                for (a, &b) in normals.iter().zip(offsets) {
                    let f = a.dot(p) + b;
                    let rate = a.dot(v);
                    if rate < T::zero() {
                        hi = hi.min(f / -rate);
                    } else if rate > T::zero() {
                        lo = lo.max(-f / rate);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// The boundary point hit by the ray from `from` through `towards`.
    pub fn radial_projection(&self, from: &DVector<T>, towards: &DVector<T>) -> Result<BoundaryPoint<T>, HilbertError> {
        self.require_interior(from)?;
        let v = towards - from;
        let t = self.exit_time(from, &v);
        Ok(self.certify(from + v * t))
    }

    /// Boundary point along the ray from `from` with direction `v`.
    pub fn exit_point(&self, from: &DVector<T>, v: &DVector<T>) -> BoundaryPoint<T> {
        let t = self.exit_time(from, v);
        self.certify(from + v * t)
    }

    /// Attaches the supporting-hyperplane certificate to a boundary point.
    pub fn certify(&self, x: DVector<T>) -> BoundaryPoint<T> {
        match &self.kind {
            DomainKind::Ball { map, .. } => {
                let w = self.normalized(&x);
                let residual = (w.norm() - T::one()).abs();
                let n = map.transpose() * &w;
                let n = &n / n.norm();
                BoundaryPoint {
                    point: x,
                    normal: Some(n),
                    uniqueness_margin: T::max_value().unwrap(),
                    residual,
                }
            }
            DomainKind::Polytope { normals, .. } => {
                let vals: Vec<T> = self
                    .facet_values(&x)
                    .iter()
                    .zip(normals)
                    .map(|(&f, a)| f / a.norm())
                    .collect();
                let eps: T = tol(1e-10);
                let active: Vec<usize> = (0..vals.len()).filter(|&i| vals[i].abs() <= eps).collect();
                let residual = vals.iter().fold(T::max_value().unwrap(), |m, &v| m.min(v)).abs();
                let margin = (0..vals.len())
                    .filter(|i| !active.contains(i))
                    .map(|i| vals[i])
                    .fold(T::max_value().unwrap(), |m, v| m.min(v));
                let normal = (active.len() == 1).then(|| {
                    let a = &normals[active[0]];
                    -a / a.norm()
                });
                BoundaryPoint {
                    point: x,
                    normal,
                    uniqueness_margin: if active.len() == 1 { margin } else { T::zero() },
                    residual,
                }
            }
        }
    }
}

fn log_cross_ratio<T: Real>(m: T, beyond: T) -> T {
    // ln((1 + m)/m) + ln(t₊/(t₊ − 1)) with beyond = t₊ − 1
    (T::one() / m).ln_1p() + (T::one() / beyond).ln_1p()
}

/// Hilbert distance from facet values, exact in the ratios even when one
/// point is extremely close to a facet.
fn facet_distance<T: Real>(fp: &[T], fq: &[T]) -> T {
    let inf = T::max_value().unwrap();
    let (mut back, mut beyond) = (inf, inf);
    for (&p, &q) in fp.iter().zip(fq) {
        if q < p {
            beyond = beyond.min(q / (p - q));
        } else if q > p {
            back = back.min(p / (q - p));
        }
    }
    if back == inf && beyond == inf {
        return T::zero();
    }
    log_cross_ratio(back, beyond)
}

/// log of the cross ratio (x, p, q, y) along the chord through p and q.
pub fn hilbert_distance<T: Real>(omega: &ConvexDomain<T>, p: &DVector<T>, q: &DVector<T>) -> Result<T, HilbertError> {
    omega.require_interior(p)?;
    omega.require_interior(q)?;
    Ok(distance_unchecked(omega, p, q))
}

fn distance_unchecked<T: Real>(omega: &ConvexDomain<T>, p: &DVector<T>, q: &DVector<T>) -> T {
    match &omega.kind {
        DomainKind::Polytope { .. } => facet_distance(&omega.facet_values(p), &omega.facet_values(q)),
        DomainKind::Ball { .. } => {
            let v = q - p;
            if v.norm() == T::zero() {
                return T::zero();
            }
            let (lo, hi) = omega.chord(p, &v);
            log_cross_ratio(-lo, hi - T::one())
        }
    }
}

const GOLDEN_TOL: f64 = 1e-12;

/// min over t ∈ [0, t_max] of f(t) for a quasi-convex f, by golden section.
fn golden_min<T: Real>(f: impl Fn(T) -> T, t_max: T) -> T {
    let phi: T = lit((5f64.sqrt() - 1.0) / 2.0);
    let (mut a, mut b) = (T::zero(), t_max);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let eps: T = tol(GOLDEN_TOL);
    while b - a > eps {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    f(a).min(f(b)).min(fc).min(fd)
}

/// d_Ω(p, [a, x)) for x on the boundary (open end) or in the interior.
pub fn distance_to_segment<T: Real>(omega: &ConvexDomain<T>, p: &DVector<T>, a: &DVector<T>, x: &DVector<T>) -> T {
    let v = x - a;
    let interior_end = omega.interior_margin(x) >= lit(BOUNDARY_MARGIN);
    let t_max = if interior_end { T::one() } else { T::one() - tol::<T>(GOLDEN_TOL) };
    golden_min(|t| distance_unchecked(omega, p, &(a + &v * t)), t_max)
}

/// x ∈ 𝒪_r(b, p): the segment [b, x) passes within r of p.
pub fn shadow_contains<T: Real>(
    omega: &ConvexDomain<T>,
    b: &DVector<T>,
    p: &DVector<T>,
    r: T,
    x: &BoundaryPoint<T>,
) -> Result<bool, HilbertError> {
    if !(r > T::zero()) {
        return Err(HilbertError::PreconditionViolated("shadow radius must be positive".into()));
    }
    omega.require_interior(b)?;
    omega.require_interior(p)?;
    Ok(distance_to_segment(omega, p, b, &x.point) < r)
}

/// Half-angle of 𝒪_r(0, p) in the unit ball, where `dist` = d_Ω(0, p);
/// `None` when the shadow is the whole sphere.
pub fn ball_shadow_half_angle(dist: f64, r: f64) -> Option<f64> {
    (r < dist).then(|| ((r / 2.0).sinh() / (dist / 2.0).sinh()).asin())
}

/// Lorentz boost of the Klein model carrying `b` to the origin, acting on
/// homogeneous coordinates (1, x).
pub fn ball_recentering(b: &DVector<f64>) -> DMatrix<f64> {
    let n = b.len();
    let v2 = b.dot(b);
    let g = 1.0 / (1.0 - v2).sqrt();
    let mut m = DMatrix::identity(n + 1, n + 1);
    m[(0, 0)] = g;
    for i in 0..n {
        m[(0, i + 1)] = -g * b[i];
        m[(i + 1, 0)] = -g * b[i];
        for j in 0..n {
            if v2 > 0.0 {
                m[(i + 1, j + 1)] += (g - 1.0) * b[i] * b[j] / v2;
            }
        }
    }
    m
}

fn apply_homogeneous(m: &DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let mut h = DVector::zeros(x.len() + 1);
    h[0] = 1.0;
    h.rows_mut(1, x.len()).copy_from(x);
    let y = m * h;
    y.rows(1, x.len()) / y[0]
}

/// Closed-form shadow membership in the unit ball: recentre at b, then x is
/// in the shadow iff its angle to p is below the hyperbolic half-angle.
pub fn ball_shadow_contains(b: &DVector<f64>, p: &DVector<f64>, r: f64, x: &DVector<f64>) -> bool {
    let ball = ConvexDomain::unit_ball(b.len());
    let dist = distance_unchecked(&ball, b, p);
    let Some(half) = ball_shadow_half_angle(dist, r) else { return true };
    let m = ball_recentering(b);
    let (p0, x0) = (apply_homogeneous(&m, p), apply_homogeneous(&m, x));
    let c = (p0.dot(&x0) / (p0.norm() * x0.norm())).clamp(-1.0, 1.0);
    c.acos() < half
}

/// Busemann value of the unit ball in normalized coordinates, Hilbert scale.
fn ball_busemann<T: Real>(y: &DVector<T>, a: &DVector<T>, b: &DVector<T>) -> T {
    let two: T = lit(2.0);
    let h = |z: &DVector<T>| (T::one() - z.dot(y)).ln() - (T::one() - z.dot(z)).ln() / two;
    two * (h(a) - h(b))
}

const HORO_SCHEDULE: [f64; 3] = [10.0, 20.0, 40.0];

/// h_y(a, b) = lim_{x→y} d(x, a) − d(x, b).
pub fn horofunction<T: Real>(
    omega: &ConvexDomain<T>,
    y: &BoundaryPoint<T>,
    a: &DVector<T>,
    b: &DVector<T>,
) -> Result<Horofunction<T>, HilbertError> {
    if !y.is_smooth() {
        return Err(HilbertError::NotSmoothCertificate);
    }
    omega.require_interior(a)?;
    omega.require_interior(b)?;
    match &omega.kind {
        DomainKind::Ball { .. } => {
            let yn = omega.normalized(&y.point);
            let yn = &yn / yn.norm();
            Ok(Horofunction {
                value: ball_busemann(&yn, &omega.normalized(a), &omega.normalized(b)),
                residual: T::zero(),
            })
        }
        DomainKind::Polytope { .. } => {
            let b0 = &omega.basepoint;
            let f0 = omega.facet_values(b0);
            let mut fy = omega.facet_values(&y.point);
            for (v, &w) in fy.iter_mut().zip(&f0) {
                if v.abs() <= tol::<T>(1e-10) * w.abs() {
                    *v = T::zero();
                }
            }
            // chord b0 → y with b0 at 0 and y at 1; m is the back exit
            let (lo, _) = omega.chord(b0, &(&y.point - b0));
            let m = -lo;
            let fa = omega.facet_values(a);
            let fb = omega.facet_values(b);
            let stages: Vec<T> = HORO_SCHEDULE
                .iter()
                .map(|&dist| {
                    let e: T = lit::<T>(dist).exp();
                    let s = (T::one() + m) / (T::one() + e * m);
                    let fx: Vec<T> = fy.iter().zip(&f0).map(|(&u, &w)| (T::one() - s) * u + s * w).collect();
                    facet_distance(&fx, &fa) - facet_distance(&fx, &fb)
                })
                .collect();
            let (h1, h2, h3) = (stages[0], stages[1], stages[2]);
            let d1 = h2 - h1;
            let d2 = h3 - h2;
            // Aitken's Δ² when the stages contract, else the last stage
            let value = if d1 != d2 && (d2 / d1).abs() < lit(0.9) { h3 - d2 * d2 / (d2 - d1) } else { h3 };
            Ok(Horofunction {
                value,
                residual: d2.abs(),
            })
        }
    }
}

/// The point at signed Hilbert distance t from z along the chord in
/// direction u.
pub fn geodesic_point<T: Real>(omega: &ConvexDomain<T>, z: &DVector<T>, u: &DVector<T>, t: T) -> DVector<T> {
    let (lo, hi) = omega.chord(z, u);
    let m = -lo;
    let e = t.exp();
    let tau = m * hi * (e - T::one()) / (hi + m * e);
    z + u * tau
}

/// Hopf coordinates (v⁻, v⁺, h_{v⁺}(b₀, π(v))) of the unit tangent vector
/// at z pointing along u.
pub fn hopf_coordinates<T: Real>(
    omega: &ConvexDomain<T>,
    b0: &DVector<T>,
    z: &DVector<T>,
    u: &DVector<T>,
) -> Result<HopfVector<T>, HilbertError> {
    omega.require_interior(z)?;
    let (lo, hi) = omega.chord(z, u);
    let x = omega.certify(z + u * lo);
    let y = omega.certify(z + u * hi);
    let s = horofunction(omega, &y, b0, z)?.value;
    Ok(HopfVector { x, y, s })
}

#[derive(Debug, Clone, Serialize)]
pub struct VisibilityReport {
    pub pairs: usize,
    pub min_margin: f64,
    pub all_smooth: bool,
    pub pass: bool,
}

/// Interiority of the open segments between all pairs of boundary points,
/// sampled at 32 interior points each, and smoothness certificates.
pub fn visibility_check<T: Real>(omega: &ConvexDomain<T>, sample: &[BoundaryPoint<T>]) -> VisibilityReport {
    let mut min_margin = f64::INFINITY;
    let mut pairs = 0;
    for i in 0..sample.len() {
        for j in (i + 1)..sample.len() {
            let (x, y) = (&sample[i].point, &sample[j].point);
            pairs += 1;
            for k in 1..=32 {
                let t: T = lit(k as f64 / 33.0);
                let p = x + (y - x) * t;
                min_margin = min_margin.min(to_f64(omega.interior_margin(&p)));
            }
        }
    }
    let all_smooth = sample.iter().all(BoundaryPoint::is_smooth);
    VisibilityReport {
        pairs,
        min_margin,
        all_smooth,
        pass: min_margin > BOUNDARY_MARGIN && all_smooth,
    }
}

/// Boundary points as CSV rows of coordinates plus the smoothness flag.
pub fn write_boundary_csv<T: Real, W: Write>(points: &[BoundaryPoint<T>], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let d0 = points.first().map(|p| p.point.len()).unwrap_or(0);
    let mut header: Vec<String> = (0..d0).map(|k| format!("x{k}")).collect();
    header.push("smooth".into());
    w.write_record(&header)?;
    for p in points {
        let mut row: Vec<String> = p.point.iter().map(|&x| format!("{:.15e}", to_f64(x))).collect();
        row.push(p.is_smooth().to_string());
        w.write_record(&row)?;
    }
    w.flush()
}

/// Klein-disk model of `PSL(2, R)`: g acts on symmetric matrices by
/// S ↦ g S gᵀ, which preserves det S = X₀² − X₁² − X₂² in the coordinates
/// S = [[X₀ + X₁, X₂], [X₂, X₀ − X₁]]. Points of the disk are (X₁, X₂)/X₀
/// and the basepoint is the identity, i.e. the origin.
pub mod klein {
    use super::*;

    fn to_sym<T: Real>(x: &[T; 3]) -> DMatrix<T> {
        DMatrix::from_row_slice(2, 2, &[x[0] + x[1], x[2], x[2], x[0] - x[1]])
    }

    fn from_sym<T: Real>(s: &DMatrix<T>) -> [T; 3] {
        let two: T = lit(2.0);
        [(s[(0, 0)] + s[(1, 1)]) / two, (s[(0, 0)] - s[(1, 1)]) / two, (s[(0, 1)] + s[(1, 0)]) / two]
    }

    /// The 3×3 matrix of S ↦ g S gᵀ in (X₀, X₁, X₂) coordinates, an element
    /// of SO(2, 1).
    pub fn isometry<T: Real>(g: &GroupElement<T>) -> DMatrix<T> {
        let m = g.matrix();
        let mut out = DMatrix::zeros(3, 3);
        for k in 0..3 {
            let mut e = [T::zero(); 3];
            e[k] = T::one();
            let image = from_sym(&(m * to_sym(&e) * m.transpose()));
            for i in 0..3 {
                out[(i, k)] = image[i];
            }
        }
        out
    }

    /// Projective action of a 3×3 matrix on the disk chart.
    pub fn apply<T: Real>(m: &DMatrix<T>, p: &DVector<T>) -> DVector<T> {
        let h = m * DVector::from_column_slice(&[T::one(), p[0], p[1]]);
        DVector::from_column_slice(&[h[1] / h[0], h[2] / h[0]])
    }

    /// g·b₀, the image of the origin.
    pub fn orbit_point<T: Real>(g: &GroupElement<T>) -> DVector<T> {
        let s = g.matrix() * g.matrix().transpose();
        let x = from_sym(&s);
        DVector::from_column_slice(&[x[1] / x[0], x[2] / x[0]])
    }

    /// The boundary point of a line ⟨u⟩ ∈ RP¹: the rank-one limit u uᵀ,
    /// i.e. the angle 2θ for u = (cos θ, sin θ).
    pub fn boundary_of_line<T: Real>(u: &DVector<T>) -> DVector<T> {
        let n = u.dot(u);
        DVector::from_column_slice(&[(u[0] * u[0] - u[1] * u[1]) / n, (u[0] * u[1] + u[1] * u[0]) / n])
    }

    /// ξ(F) for a flag of an `SL(2)` preset.
    pub fn boundary_of_flag<T: Real>(f: &PartialFlag<T>) -> DVector<T> {
        boundary_of_line(&f.frame().column(0).into_owned())
    }
}

/// The domain a preset acts on, if it declares one.
pub fn preset_domain<T: Real>(preset: &GroupPreset<T>) -> Option<ConvexDomain<T>> {
    match preset.domain {
        Some(DomainTag::KleinDisk) if preset.dim() == 2 => Some(ConvexDomain::unit_ball(2)),
        _ => None,
    }
}

/// max over pairs and j ∈ θ of |ω_j(κ(η)) − ω_j(κ(γ)) − ω_j(κ(γ⁻¹η))| for
/// pairs with γb₀ within r of the segment [b₀, ηb₀].
pub fn coarse_additivity_check<T: Real>(
    preset: &GroupPreset<T>,
    r: T,
    pairs: &[(GroupElement<T>, GroupElement<T>)],
) -> Result<T, HilbertError> {
    let omega = preset_domain(preset)
        .ok_or_else(|| HilbertError::PreconditionViolated(format!("preset {} has no Klein-disk domain", preset.name)))?;
    let b0 = omega.basepoint.clone();
    let mut offending = Vec::new();
    let mut worst = T::zero();
    for (g, h) in pairs {
        let gp = klein::orbit_point(g);
        let hp = klein::orbit_point(h);
        if distance_to_segment(&omega, &gp, &b0, &hp) > r {
            offending.push(format!("({}, {})", g.word(), h.word()));
            continue;
        }
        let kh = cartan_project(h)?.weight_coords(&preset.theta);
        let kg = cartan_project(g)?.weight_coords(&preset.theta);
        let kgh = cartan_project(&g.inverse().compose(h))?.weight_coords(&preset.theta);
        for ((x, y), z) in kh.values.iter().zip(&kg.values).zip(&kgh.values) {
            worst = worst.max((*x - *y - *z).abs());
        }
    }
    if !offending.is_empty() {
        return Err(HilbertError::PreconditionViolated(format!(
            "pairs farther than r from the segment: {}",
            offending.join(", ")
        )));
    }
    Ok(worst)
}

/// Serializable description of a domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DomainSpec {
    Ball { dim: usize },
    Ellipsoid { center: Vec<f64>, shape: Vec<Vec<f64>> },
    Simplex { vertices: Vec<Vec<f64>> },
    Polytope { facets: Vec<(Vec<f64>, f64)>, basepoint: Vec<f64> },
}

impl DomainSpec {
    pub fn build(&self) -> Result<ConvexDomain<f64>, HilbertError> {
        let v = |x: &[f64]| DVector::from_column_slice(x);
        match self {
            DomainSpec::Ball { dim } => Ok(ConvexDomain::unit_ball(*dim)),
            DomainSpec::Ellipsoid { center, shape } => {
                let n = center.len();
                let flat: Vec<f64> = shape.iter().flatten().copied().collect();
                if flat.len() != n * n {
                    return Err(HilbertError::NotProperlyConvex("shape must be square".into()));
                }
                ConvexDomain::ellipsoid(v(center), DMatrix::from_row_slice(n, n, &flat))
            }
            DomainSpec::Simplex { vertices } => ConvexDomain::simplex(&vertices.iter().map(|x| v(x)).collect::<Vec<_>>()),
            DomainSpec::Polytope { facets, basepoint } => ConvexDomain::polytope(
                facets.iter().map(|(a, _)| v(a)).collect(),
                facets.iter().map(|(_, b)| *b).collect(),
                v(basepoint),
            ),
        }
    }
}
