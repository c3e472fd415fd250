//! Propagation primitives of the underwater medium.
//!
//! Pressure levels are referenced to 1 µPa at a reference distance of 1 m.
//! Transmission loss is spherical spreading plus frequency-dependent
//! absorption:
//!
//! ```text
//! TL(r, f) = 20 log10(r / 1 m) + alpha(f) * r / 1000     [dB]
//! ```
//!
//! where `alpha` is in dB/km. The default absorption law is Thorp's
//! empirical fit, with `f` in kHz:
//!
//! ```text
//! alpha(f) = 0.11 f^2 / (1 + f^2) + 44 f^2 / (4100 + f^2) + 2.75e-4 f^2 + 0.003
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Nominal sound speed in water, m/s.
pub const DEFAULT_SOUND_SPEED: f64 = 1480.0;

/// Reference distance for source levels and spreading loss, m.
pub const REFERENCE_DISTANCE: f64 = 1.0;

const MAX_RANGE: f64 = 1.0e6;

/// Absorption law used for transmission loss.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Absorption {
    #[default]
    Thorp,
    None,
    CustomTable(AbsorptionTable),
}

/// Tabulated absorption in dB/km, linearly interpolated in frequency and
/// clamped to the end values outside the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct AbsorptionTable {
    points: Vec<(f64, f64)>,
}

impl AbsorptionTable {
    /// Builds a table from `(frequency_hz, db_per_km)` pairs.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        let invalid = |reason: String| Error::Invalid {
            what: "absorption table",
            reason,
        };
        if points.is_empty() {
            return Err(invalid("table is empty".into()));
        }
        for (i, &(f, a)) in points.iter().enumerate() {
            if !(f.is_finite() && f > 0.0) {
                return Err(invalid(format!("frequency {f} at entry {i} is not positive")));
            }
            if !(a.is_finite() && a >= 0.0) {
                return Err(invalid(format!("absorption {a} at entry {i} is negative")));
            }
            if i > 0 && f <= points[i - 1].0 {
                return Err(invalid(format!(
                    "frequencies must be strictly increasing (entry {i})"
                )));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    fn eval(&self, frequency: f64) -> f64 {
        let pts = &self.points;
        let first = pts[0];
        let last = pts[pts.len() - 1];
        if frequency <= first.0 {
            return first.1;
        }
        if frequency >= last.0 {
            return last.1;
        }
        let hi = pts.partition_point(|&(f, _)| f <= frequency);
        let (f0, a0) = pts[hi - 1];
        let (f1, a1) = pts[hi];
        a0 + (a1 - a0) * (frequency - f0) / (f1 - f0)
    }
}

impl TryFrom<Vec<(f64, f64)>> for AbsorptionTable {
    type Error = Error;
    fn try_from(points: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<AbsorptionTable> for Vec<(f64, f64)> {
    fn from(t: AbsorptionTable) -> Self {
        t.points
    }
}

/// The propagation medium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Medium {
    /// m/s
    pub sound_speed: f64,
    #[serde(default)]
    pub absorption: Absorption,
}

impl Default for Medium {
    fn default() -> Self {
        Self {
            sound_speed: DEFAULT_SOUND_SPEED,
            absorption: Absorption::Thorp,
        }
    }
}

impl Medium {
    pub fn new(sound_speed: f64, absorption: Absorption) -> Result<Self> {
        let medium = Self {
            sound_speed,
            absorption,
        };
        medium.validate()?;
        Ok(medium)
    }

    /// Medium with the default sound speed and absorption switched off.
    pub fn lossless() -> Self {
        Self {
            absorption: Absorption::None,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sound_speed.is_finite() && self.sound_speed > 0.0) {
            return Err(domain(format!(
                "sound speed must be positive, got {}",
                self.sound_speed
            )));
        }
        if let Absorption::CustomTable(t) = &self.absorption {
            AbsorptionTable::new(t.points.clone())?;
        }
        Ok(())
    }

    /// Acoustic wavelength in meters.
    pub fn wavelength(&self, frequency: f64) -> Result<f64> {
        check_frequency(frequency)?;
        Ok(self.sound_speed / frequency)
    }

    /// Wavenumber `2 pi f / c` in rad/m.
    pub fn wavenumber(&self, frequency: f64) -> Result<f64> {
        check_frequency(frequency)?;
        Ok(std::f64::consts::TAU * frequency / self.sound_speed)
    }

    /// Absorption coefficient in dB/km under this medium's absorption law.
    pub fn absorption_db_per_km(&self, frequency: f64) -> Result<f64> {
        check_frequency(frequency)?;
        Ok(match &self.absorption {
            Absorption::Thorp => thorp_db_per_km(frequency),
            Absorption::None => 0.0,
            Absorption::CustomTable(t) => t.eval(frequency),
        })
    }

    /// One-way transmission loss in dB over `distance` meters.
    pub fn transmission_loss(&self, distance: f64, frequency: f64) -> Result<f64> {
        if !(distance.is_finite() && distance >= REFERENCE_DISTANCE) {
            return Err(domain(format!(
                "distance {distance} m is below the 1 m reference"
            )));
        }
        let alpha = self.absorption_db_per_km(frequency)?;
        Ok(20.0 * (distance / REFERENCE_DISTANCE).log10() + alpha * distance / 1000.0)
    }

    /// Inverts [`Medium::transmission_loss`] by bisection on `[1 m, 1e6 m]`.
    ///
    /// The returned range reproduces `target_tl` to within 0.01 dB; the
    /// bisection itself runs until the bracket is a few micrometers wide.
    pub fn solve_range(&self, frequency: f64, target_tl: f64) -> Result<f64> {
        if !(target_tl.is_finite() && target_tl >= 0.0) {
            return Err(domain(format!(
                "target transmission loss must be non-negative, got {target_tl}"
            )));
        }
        let tl = |r: f64| self.transmission_loss(r, frequency);
        let (mut lo, mut hi) = (REFERENCE_DISTANCE, MAX_RANGE);
        if target_tl > tl(hi)? {
            return Err(Error::OutOfBracket {
                target: target_tl,
                lo,
                hi,
            });
        }
        if target_tl <= tl(lo)? {
            return Ok(lo);
        }
        while hi - lo > 1e-6 * lo.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if tl(mid)? < target_tl {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Thorp absorption in dB/km for a frequency in Hz.
///
/// Only meaningful as a monotone law above roughly 1 kHz.
pub fn thorp_db_per_km(frequency: f64) -> f64 {
    let f2 = (frequency / 1000.0).powi(2);
    0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75e-4 * f2 + 0.003
}

/// Wavelength `c / f` for the given medium.
pub fn wavelength(medium: &Medium, frequency: f64) -> Result<f64> {
    medium.wavelength(frequency)
}

/// Thorp absorption with a domain check on the frequency.
pub fn absorption_db_per_km(frequency: f64) -> Result<f64> {
    check_frequency(frequency)?;
    Ok(thorp_db_per_km(frequency))
}

pub fn transmission_loss(medium: &Medium, distance: f64, frequency: f64) -> Result<f64> {
    medium.transmission_loss(distance, frequency)
}

pub fn solve_range(medium: &Medium, frequency: f64, target_tl: f64) -> Result<f64> {
    medium.solve_range(frequency, target_tl)
}

fn check_frequency(frequency: f64) -> Result<()> {
    if frequency.is_finite() && frequency > 0.0 {
        Ok(())
    } else {
        Err(domain(format!("frequency must be positive, got {frequency}")))
    }
}

/// Source level in dB re 1 µPa at 1 m.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SourceLevel(pub f64);

impl SourceLevel {
    /// Pressure amplitude at the 1 m reference, in µPa.
    pub fn pressure_upa(self) -> f64 {
        10f64.powf(self.0 / 20.0)
    }

    /// Linear amplitude factor `10^(-TL/20)` for a loss in dB.
    pub fn loss_factor(tl_db: f64) -> f64 {
        10f64.powf(-tl_db / 20.0)
    }
}
