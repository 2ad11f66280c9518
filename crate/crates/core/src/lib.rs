//! Phase-subtractive two-photon interference by path identity.
//!
//! Two independent down-conversion sources share their idler paths through
//! a phase object; only signal photons are detected. The crate builds the
//! four-photon Fock state exactly, averages over the random pump phase by
//! tag contraction, evaluates coincidence rates and camera maps, and
//! recovers the object phase from a map.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the `F64`
//! aliases below are the common choice.

pub mod error;
pub mod fock;
pub mod imaging;
pub mod interferometer;
pub mod io;
pub mod oracles;
pub mod recover;
pub mod rng;
pub mod scalar;
pub mod spdc;

pub use error::{Error, Result};
pub use fock::{averaged_pairing, ModeId, OccupationKet, Species, Statistics, TaggedState};
pub use imaging::{CoincidenceMap, CorrelationModel, ModeGrid, PhaseField, PhaseObject, PhaseObjectKind, PortPair};
pub use interferometer::{DetectorOp, RateResult};
pub use recover::{ReconstructionReport, WrappedField};
pub use scalar::Real;

pub type TaggedStateF64 = TaggedState<f64>;
pub type TaggedStateF32 = TaggedState<f32>;
pub type CoincidenceMapF64 = CoincidenceMap<f64>;
pub type CoincidenceMapF32 = CoincidenceMap<f32>;
pub type PhaseFieldF64 = PhaseField<f64>;
pub type PhaseFieldF32 = PhaseField<f32>;
pub type CorrelationModelF64 = CorrelationModel<f64>;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
