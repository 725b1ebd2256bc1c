//! Tight concave (or concave-over-affine) lower bounds of the nonconcave
//! objectives, one per block update. Each is exact at its expansion point.

mod bound;
mod gamma;
mod lifted;
mod power;

pub use bound::ratio_log_bound;
pub use gamma::{EkConvention, GammaSurrogateCoeffs, QuadraticModel};
pub use lifted::{g1_gradient, g2_gradient, lifted_split, sr_mmse_lifted, LiftedSplit, LiftedSurrogate};
pub use power::{MmsePowerSurrogate, PowerSurrogate};
