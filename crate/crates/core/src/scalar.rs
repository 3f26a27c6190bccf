use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating scalar accepted by the geometric core.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static {}

impl Real for f32 {}
impl Real for f64 {}

#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("finite literal")
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Tolerance floor for scalars coarser than `f64`.
#[inline]
pub fn tol<T: Real>(requested: f64) -> T {
    let floor = 64.0 * to_f64(T::default_epsilon());
    lit(requested.max(floor))
}
