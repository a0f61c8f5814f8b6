//! Multi-path systematic streaming network code.
//!
//! * [`galois`]: GF(2^m) arithmetic for coding coefficients and payloads.
//! * [`codec`]: streaming encoder with a sliding code window and a
//!   row-echelon decoder that releases packets in order.
//! * [`policy`]: path parameters, code rates and admissibility.
//! * [`analysis`]: closed-form in-order delay and its Monte-Carlo oracle.
//! * [`sim`]: discrete-event simulation over parallel erasure paths.
//!
//! The closed forms in [`policy`] and [`analysis`] are generic over the float
//! type through [`num::Real`]; the aliases below fix it to `f64` or `f32`.

pub mod analysis;
pub mod codec;
pub mod galois;
pub mod num;
pub mod policy;
pub mod sim;

pub use analysis::AnalysisError;
pub use codec::{CodecError, CodedPacket, Decoder, Encoder, FeedbackMessage, InfoPacket, Packet};
pub use galois::{Field, FieldConfig, FieldElement, GaloisError};
pub use num::Real;
pub use policy::{CodingPolicy, Interval, PolicyError};
pub use sim::{SimConfig, SimError, SimResult, SimTime, SweepGrid, SweepRow};

pub type PathSpecF64 = policy::PathSpec<f64>;
pub type PathSpecF32 = policy::PathSpec<f32>;
pub type LossModelF64 = analysis::LossModel<f64>;
pub type LossModelF32 = analysis::LossModel<f32>;
pub type RenewalMomentsF64 = analysis::RenewalMoments<f64>;
pub type RenewalMomentsF32 = analysis::RenewalMoments<f32>;
pub type DelayEstimateF64 = analysis::DelayEstimate<f64>;
pub type DelayEstimateF32 = analysis::DelayEstimate<f32>;
