//! Simulation and code synthesis for 1-bit phase-coded underwater acoustic
//! reflecting surfaces.
//!
//! The crate is organized bottom-up:
//!
//! * [`acoustics`]: sound speed, wavelength, Thorp absorption and
//!   spherical transmission loss.
//! * [`array`]: the reflection-unit grid, 1-bit [`PhaseCode`]s and the
//!   front-hemisphere element pattern.
//! * [`beampattern`]: the far-field array factor of a coded surface, full
//!   direction sweeps and lobe detection (grating lobes included).
//! * [`codesynth`]: quantized steering, an exhaustive oracle for small
//!   arrays and target-versus-eavesdropper local search.
//! * [`linksim`]: exact-geometry narrowband links with a direct and a
//!   reflected path, toggled envelopes and calibration.
//!
//! ```
//! use uaris::{ArrayGeometry, Direction, PhaseCode, beampattern};
//!
//! let geometry = ArrayGeometry::new(4, 6, 0.05).with_exponent(0.0);
//! let code = PhaseCode::zeros(4, 6);
//! let normal = Direction::new(0.0, 0.0).unwrap();
//! let af = beampattern::array_factor(&geometry, &code, normal, 27_000.0, normal, 1480.0).unwrap();
//! assert!((af.norm() - 24.0).abs() < 1e-12);
//! ```

pub mod acoustics;
pub mod array;
pub mod beampattern;
pub mod codesynth;
mod error;
pub mod linksim;
mod vec3;

pub use acoustics::{Absorption, AbsorptionTable, Medium, SourceLevel};
pub use array::{ArrayGeometry, Direction, PhaseCode};
pub use beampattern::{BeamPattern, LobeReport};
pub use codesynth::{SteeringTask, SuppressionTask};
pub use error::{Error, Result};
pub use linksim::{ReceivedField, Scenario};
pub use num_complex::Complex64;
pub use vec3::Vec3;

/// Chapters of the guide in `book/`, compiled as doc-tests so the snippets
/// cannot drift from the API.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/acoustics.md")]
    pub struct Acoustics;
    #[doc = include_str!("../../../book/src/phase-codes.md")]
    pub struct PhaseCodes;
    #[doc = include_str!("../../../book/src/beam-patterns.md")]
    pub struct BeamPatterns;
    #[doc = include_str!("../../../book/src/code-synthesis.md")]
    pub struct CodeSynthesis;
    #[doc = include_str!("../../../book/src/link-simulation.md")]
    pub struct LinkSimulation;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct CommandLine;
}
