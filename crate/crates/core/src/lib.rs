//! Numerical Patterson-Sullivan theory for transverse subgroups of `SL(d, R)`.
//!
//! The library is organised bottom-up: [`cartan`] holds the exact-formula linear
//! algebra (Cartan projection, flags, Iwasawa cocycle, Gromov product), [`orbit`]
//! enumerates word balls, [`series`] estimates critical exponents, [`patterson`]
//! builds atomic conformal measures, [`hilbert`] supplies the convex-projective
//! geometry and [`flow`] runs sample-path diagnostics on the BMS density.

pub mod cartan;
pub mod flow;
pub mod hilbert;
pub mod linalg;
pub mod orbit;
pub mod patterson;
pub mod presets;
pub mod scalar;
pub mod series;

pub use scalar::Real;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Element = cartan::GroupElement<f64>;
pub type Flag = cartan::PartialFlag<f64>;
pub type Cartan = cartan::CartanVector<f64>;
pub type Weights = cartan::WeightVector<f64>;
pub type Functional = cartan::LinearFunctional<f64>;
pub type Preset = orbit::GroupPreset<f64>;
pub type Ball = orbit::WordBall<f64>;
pub type Domain = hilbert::ConvexDomain<f64>;
