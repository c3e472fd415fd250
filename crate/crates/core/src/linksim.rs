//! Narrowband link between a transmitter and a receiver in front of the
//! surface, with a direct path and one reflected path per element.
//!
//! Every path uses exact geometry. A path of length `r` scales pressure by
//! `10^(-TL(r)/20)` and delays its phase by `k r`:
//!
//! ```text
//! D   = p0 * g(|tx - rx|) * exp(-j k |tx - rx|)
//! R_n = s * E(theta_in,n) * E(theta_out,n) * exp(j pi b_n)
//!         * p0 * g(r1n) * exp(-j k r1n) * g(r2n) * exp(-j k r2n)
//! ```
//!
//! where `s` is the element re-radiation amplitude at 1 m per unit incident
//! pressure and the element angles are measured from each element's own
//! normal. The transmitter of the lake layout sits 0.8 m from the surface,
//! so `g` is evaluated below the 1 m reference as well (pure `1/r` plus
//! absorption) instead of rejecting the path.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};

use crate::acoustics::{Medium, SourceLevel};
use crate::array::{ArrayGeometry, PhaseCode};
use crate::error::{domain, Error, Result};
use crate::vec3::Vec3;

/// Minimum distance between a transducer and an element, m.
const MIN_CLEARANCE: f64 = 1e-6;

const MAX_SEARCH_RANGE: f64 = 1e6;

/// Placement and parameters of one simulated link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub medium: Medium,
    #[serde(rename = "frequency_hz")]
    pub frequency: f64,
    #[serde(rename = "tx_pos_m")]
    pub tx: Vec3,
    #[serde(rename = "rx_pos_m")]
    pub rx: Vec3,
    /// The surface. `rho` is not used here; `scatter_scale` carries the
    /// absolute reflection strength.
    #[serde(rename = "array")]
    pub geometry: ArrayGeometry,
    #[serde(rename = "source_level_db")]
    pub source_level: SourceLevel,
    pub scatter_scale: f64,
    /// Ambient noise, dB re 1 µPa.
    #[serde(
        rename = "noise_level_db",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub noise_level: Option<f64>,
}

/// Complex pressures at the receiver, µPa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceivedField {
    pub direct: Complex64,
    pub reflected: Complex64,
    pub total: Complex64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.medium.validate()?;
        self.geometry.validate()?;
        if !(self.frequency.is_finite() && self.frequency > 0.0) {
            return Err(domain(format!("frequency must be positive, got {}", self.frequency)));
        }
        if !self.source_level.0.is_finite() {
            return Err(domain("source level must be finite"));
        }
        if !(self.scatter_scale.is_finite() && self.scatter_scale >= 0.0) {
            return Err(domain(format!(
                "scatter scale must be non-negative, got {}",
                self.scatter_scale
            )));
        }
        if let Some(n) = self.noise_level {
            if !n.is_finite() {
                return Err(domain("noise level must be finite"));
            }
        }
        for (name, p) in [("transmitter", self.tx), ("receiver", self.rx)] {
            if !p.is_finite() || p.x <= 0.0 {
                return Err(domain(format!(
                    "{name} must lie in front of the surface (x > 0), got {:?}",
                    <[f64; 3]>::from(p)
                )));
            }
        }
        if (self.tx - self.rx).norm() < MIN_CLEARANCE {
            return Err(domain("transmitter and receiver coincide"));
        }
        Ok(())
    }

    pub fn with_scatter_scale(&self, scatter_scale: f64) -> Self {
        Self {
            scatter_scale,
            ..self.clone()
        }
    }

    pub fn with_rx(&self, rx: Vec3) -> Self {
        Self { rx, ..self.clone() }
    }

    fn path(&self, r: f64, k: f64) -> Result<Complex64> {
        let alpha = self.medium.absorption_db_per_km(self.frequency)?;
        let amp = 10f64.powf(-alpha * r / 20_000.0) / r;
        Ok(Complex64::from_polar(amp, -k * r))
    }

    fn p0(&self) -> f64 {
        self.source_level.pressure_upa()
    }

    /// Direct-path pressure at the receiver.
    pub fn direct(&self) -> Result<Complex64> {
        self.validate()?;
        let k = self.medium.wavenumber(self.frequency)?;
        Ok(self.path((self.tx - self.rx).norm(), k)? * self.p0())
    }

    /// Reflected pressure of each element at the receiver, row-major.
    pub fn element_contributions(&self, code: &PhaseCode) -> Result<Vec<Complex64>> {
        self.validate()?;
        self.geometry.check_code(code)?;
        let k = self.medium.wavenumber(self.frequency)?;
        let p0 = self.p0();
        self.geometry
            .element_positions()
            .iter()
            .enumerate()
            .map(|(i, &r_n)| {
                let to_tx = self.tx - r_n;
                let to_rx = self.rx - r_n;
                let (r1, r2) = (to_tx.norm(), to_rx.norm());
                if r1 < MIN_CLEARANCE || r2 < MIN_CLEARANCE {
                    return Err(domain(format!("element {i} coincides with a transducer")));
                }
                let e_in = self.geometry.gain_from_cos(to_tx.x / r1);
                let e_out = self.geometry.gain_from_cos(to_rx.x / r2);
                let amp = self.scatter_scale * e_in * e_out * code.sign(i) * p0;
                Ok(self.path(r1, k)? * self.path(r2, k)? * amp)
            })
            .collect()
    }

    pub fn received_field(&self, code: &PhaseCode) -> Result<ReceivedField> {
        let direct = self.direct()?;
        let reflected = self
            .element_contributions(code)?
            .into_iter()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc + c);
        Ok(ReceivedField {
            direct,
            reflected,
            total: direct + reflected,
        })
    }

    /// Scatter scale that reproduces a measured pair of envelope amplitudes
    /// for `code` (larger) and its complement (smaller).
    ///
    /// The measured ratio `m = a_minus / a_plus` is matched exactly. With
    /// `assume_in_phase` the model's reflected field is taken to be aligned
    /// with the direct one, which gives `|R| / |D| = (a_plus - a_minus) /
    /// (a_plus + a_minus)`; otherwise the actual model phase `delta` between
    /// `R` and `D` is used and `y = s |R1| / |D|` solves
    /// `y^2 - 2 beta y + 1 = 0` with `beta = |cos delta| (1 + m^2) / (1 - m^2)`,
    /// taking the weaker-reflection root.
    pub fn calibrate_scatter(
        &self,
        code: &PhaseCode,
        a_plus: f64,
        a_minus: f64,
        assume_in_phase: bool,
    ) -> Result<f64> {
        if !(a_plus.is_finite() && a_minus.is_finite() && a_minus >= 0.0 && a_plus > 0.0) {
            return Err(domain(format!(
                "amplitudes must be finite with a_plus > 0 and a_minus >= 0, got ({a_plus}, {a_minus})"
            )));
        }
        if a_plus < a_minus {
            return Err(domain(format!(
                "a_plus ({a_plus}) must not be smaller than a_minus ({a_minus})"
            )));
        }
        if a_plus == a_minus {
            return Ok(0.0);
        }
        let unit = self.with_scatter_scale(1.0).received_field(code)?;
        let r1 = unit.reflected.norm();
        let d = unit.direct.norm();
        if !(r1 > 0.0) {
            return Err(Error::Calibration(
                "the model reflects nothing toward the receiver".into(),
            ));
        }
        let m = a_minus / a_plus;
        let y = if assume_in_phase {
            (1.0 - m) / (1.0 + m)
        } else {
            let cos_delta = (unit.reflected * unit.direct.conj()).re / (r1 * d);
            let beta = cos_delta.abs() * (1.0 + m * m) / (1.0 - m * m);
            if beta < 1.0 {
                return Err(Error::Calibration(format!(
                    "ratio {m:.4} is unreachable with a {:.1} degree phase offset",
                    cos_delta.clamp(-1.0, 1.0).acos().to_degrees()
                )));
            }
            beta - (beta * beta - 1.0).sqrt()
        };
        Ok(y * d / r1)
    }

    /// Gain of the coded link over the direct path alone, dB.
    pub fn snr_gain_db(&self, code: &PhaseCode) -> Result<f64> {
        let f = self.received_field(code)?;
        Ok(20.0 * (f.total.norm() / f.direct.norm()).log10())
    }

    /// Received level over the noise level, dB, when a noise level is set.
    pub fn snr_db(&self, code: &PhaseCode) -> Result<Option<f64>> {
        let Some(noise) = self.noise_level else {
            return Ok(None);
        };
        let f = self.received_field(code)?;
        Ok(Some(20.0 * f.total.norm().log10() - noise))
    }

    /// Extra range the coded link gains over a direct-only link.
    ///
    /// The receiver is moved along the ray from the transmitter through its
    /// current position until `|total|` drops to the direct-only amplitude
    /// at `reference_range`; the result is that range minus
    /// `reference_range`, negative when the code hurts.
    pub fn range_extension(&self, code: &PhaseCode, reference_range: f64) -> Result<f64> {
        if !(reference_range.is_finite() && reference_range >= 1.0) {
            return Err(domain(format!(
                "reference range must be at least 1 m, got {reference_range}"
            )));
        }
        self.validate()?;
        let offset = self.rx - self.tx;
        let bearing = offset.scale(1.0 / offset.norm());
        if bearing.x < 0.0 {
            return Err(domain("receiver bearing points behind the surface"));
        }
        let at = |r: f64| self.with_rx(self.tx + bearing.scale(r));
        let wanted = at(reference_range).direct()?.norm();
        let excess = |r: f64| -> Result<f64> {
            Ok(at(r).received_field(code)?.total.norm() - wanted)
        };

        let (mut good, mut bad) = if excess(reference_range)? >= 0.0 {
            let mut hi = reference_range;
            loop {
                let next = (hi * 2.0).min(MAX_SEARCH_RANGE);
                if excess(next)? < 0.0 {
                    break (hi, next);
                }
                if next >= MAX_SEARCH_RANGE {
                    return Err(Error::OutOfBracket {
                        target: wanted,
                        lo: reference_range,
                        hi: MAX_SEARCH_RANGE,
                    });
                }
                hi = next;
            }
        } else {
            let mut lo = reference_range;
            loop {
                let next = lo / 2.0;
                if excess(next)? >= 0.0 {
                    break (next, lo);
                }
                if next < 1e-3 {
                    return Ok(next - reference_range);
                }
                lo = next;
            }
        };
        while (bad - good).abs() > 1e-9 * good.max(1.0) {
            let mid = 0.5 * (good + bad);
            if excess(mid)? >= 0.0 {
                good = mid;
            } else {
                bad = mid;
            }
        }
        Ok(0.5 * (good + bad) - reference_range)
    }
}

/// Piecewise-constant receiver envelope while the surface alternates
/// between two codes.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// `|total|` under the first code.
    pub level_a: f64,
    /// `|total|` under the second code.
    pub level_b: f64,
}

impl Envelope {
    pub fn amplitude_difference(&self) -> f64 {
        (self.level_a - self.level_b).abs()
    }

    /// `min / max` of the two levels.
    pub fn ratio(&self) -> f64 {
        let (lo, hi) = if self.level_a <= self.level_b {
            (self.level_a, self.level_b)
        } else {
            (self.level_b, self.level_a)
        };
        if hi > 0.0 {
            lo / hi
        } else {
            1.0
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t_s,envelope")?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writeln!(out, "{t:.9},{v:.12e}")?;
        }
        Ok(())
    }
}

/// Samples the envelope for `duration` seconds, starting with `code_a` at
/// `t = 0` and switching instantly every `period` seconds.
pub fn toggle_envelope(
    scenario: &Scenario,
    code_a: &PhaseCode,
    code_b: &PhaseCode,
    period: f64,
    duration: f64,
    sample_rate: f64,
) -> Result<Envelope> {
    if !(period.is_finite() && period > 0.0) {
        return Err(domain(format!("toggle period must be positive, got {period}")));
    }
    if !(duration.is_finite() && duration >= 2.0 * period) {
        return Err(domain(format!(
            "duration {duration} s must cover at least two periods of {period} s"
        )));
    }
    if !(sample_rate.is_finite() && sample_rate * period >= 10.0) {
        return Err(domain(format!(
            "sample rate {sample_rate} Hz gives fewer than 10 samples per period"
        )));
    }
    let level_a = scenario.received_field(code_a)?.total.norm();
    let level_b = scenario.received_field(code_b)?.total.norm();
    let samples = (duration * sample_rate + 1e-9).floor() as usize;
    let per_period = period * sample_rate;
    let (times, values) = (0..samples)
        .map(|i| {
            let segment = ((i as f64 + 1e-9) / per_period).floor() as usize;
            let v = if segment.is_multiple_of(2) { level_a } else { level_b };
            (i as f64 / sample_rate, v)
        })
        .unzip();
    Ok(Envelope {
        times,
        values,
        level_a,
        level_b,
    })
}
