//! Reflection-unit grid, 1-bit phase codes and the element pattern.
//!
//! Array-local frame: the surface lies in the `x = 0` plane and faces `+X`
//! (boresight). Rows run along `Z`, columns along `Y`, and unit `(m, n)`
//! sits at
//!
//! ```text
//! (0, (n - (cols - 1)/2) * pitch, (m - (rows - 1)/2) * pitch)
//! ```
//!
//! so the grid is centered on the origin. Elements are enumerated row-major.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::vec3::Vec3;

/// Planar grid of reflection units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    /// Unit count along Z.
    pub rows: usize,
    /// Unit count along Y.
    pub cols: usize,
    /// Center-to-center spacing, m.
    #[serde(rename = "pitch_m")]
    pub pitch: f64,
    /// Exponent of the `cos^q` front-hemisphere element pattern.
    #[serde(default = "default_exponent")]
    pub q: f64,
    /// Reflection efficiency in `(0, 1]`.
    #[serde(default = "default_efficiency")]
    pub rho: f64,
}

fn default_exponent() -> f64 {
    1.0
}

fn default_efficiency() -> f64 {
    1.0
}

impl ArrayGeometry {
    /// Grid with the default element pattern (`q = 1`) and `rho = 1`.
    pub fn new(rows: usize, cols: usize, pitch: f64) -> Self {
        Self {
            rows,
            cols,
            pitch,
            q: default_exponent(),
            rho: default_efficiency(),
        }
    }

    pub fn with_exponent(mut self, q: f64) -> Self {
        self.q = q;
        self
    }

    pub fn with_efficiency(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(domain(format!(
                "array must have at least one row and column, got {}x{}",
                self.rows, self.cols
            )));
        }
        if !(self.pitch.is_finite() && self.pitch > 0.0) {
            return Err(domain(format!("pitch must be positive, got {}", self.pitch)));
        }
        if !(self.q.is_finite() && self.q >= 0.0) {
            return Err(domain(format!("element exponent must be >= 0, got {}", self.q)));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(domain(format!(
                "reflection efficiency must lie in (0, 1], got {}",
                self.rho
            )));
        }
        Ok(())
    }

    /// Number of reflection units.
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unit positions in row-major order; the centroid is the origin.
    pub fn element_positions(&self) -> Vec<Vec3> {
        let row_mid = (self.rows as f64 - 1.0) / 2.0;
        let col_mid = (self.cols as f64 - 1.0) / 2.0;
        (0..self.rows)
            .flat_map(|m| {
                (0..self.cols).map(move |n| {
                    Vec3::new(
                        0.0,
                        (n as f64 - col_mid) * self.pitch,
                        (m as f64 - row_mid) * self.pitch,
                    )
                })
            })
            .collect()
    }

    /// Element directivity toward `direction`.
    pub fn element_gain(&self, direction: Direction) -> f64 {
        self.gain_from_cos(direction.cos_theta())
    }

    /// Element directivity given the cosine of the off-normal angle.
    ///
    /// Rear half-space (`cos < 0`) gives zero.
    pub fn gain_from_cos(&self, cos_theta: f64) -> f64 {
        if cos_theta < 0.0 {
            0.0
        } else if self.q == 0.0 {
            1.0
        } else {
            cos_theta.min(1.0).powf(self.q)
        }
    }

    pub(crate) fn check_code(&self, code: &PhaseCode) -> Result<()> {
        if code.rows != self.rows || code.cols != self.cols {
            return Err(Error::DimensionMismatch {
                rows: self.rows,
                cols: self.cols,
                code_rows: code.rows,
                code_cols: code.cols,
            });
        }
        Ok(())
    }
}

/// Free-function form of [`ArrayGeometry::element_positions`].
pub fn element_positions(geometry: &ArrayGeometry) -> Vec<Vec3> {
    geometry.element_positions()
}

/// Free-function form of [`ArrayGeometry::element_gain`].
pub fn element_gain(geometry: &ArrayGeometry, direction: Direction) -> f64 {
    geometry.element_gain(direction)
}

/// Direction in the array-local frame.
///
/// `theta` is the polar angle off boresight (`+X`) in `[0, 90]` degrees;
/// `phi` is the azimuth in the Y-Z plane measured from `+Y` toward `+Z`,
/// stored in `[0, 360)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDirection")]
pub struct Direction {
    theta: f64,
    phi: f64,
}

#[derive(Deserialize)]
struct RawDirection {
    theta: f64,
    phi: f64,
}

impl TryFrom<RawDirection> for Direction {
    type Error = Error;
    fn try_from(raw: RawDirection) -> Result<Self> {
        Direction::new(raw.theta, raw.phi)
    }
}

impl Direction {
    /// Off-normal convention. `phi` is wrapped into `[0, 360)`.
    pub fn new(theta_deg: f64, phi_deg: f64) -> Result<Self> {
        if !(theta_deg.is_finite() && (0.0..=90.0).contains(&theta_deg)) {
            return Err(domain(format!(
                "polar angle must lie in [0, 90] degrees, got {theta_deg}"
            )));
        }
        if !phi_deg.is_finite() {
            return Err(domain(format!("azimuth must be finite, got {phi_deg}")));
        }
        let mut phi = phi_deg.rem_euclid(360.0);
        if phi >= 360.0 {
            phi = 0.0;
        }
        Ok(Self {
            theta: theta_deg,
            phi,
        })
    }

    /// Elevation measured from the array plane, so 90 degrees is boresight.
    pub fn from_plane(elevation_deg: f64, phi_deg: f64) -> Result<Self> {
        if !(elevation_deg.is_finite() && (0.0..=90.0).contains(&elevation_deg)) {
            return Err(domain(format!(
                "elevation must lie in [0, 90] degrees, got {elevation_deg}"
            )));
        }
        Self::new(90.0 - elevation_deg, phi_deg)
    }

    /// Boresight.
    pub fn normal() -> Self {
        Self { theta: 0.0, phi: 0.0 }
    }

    /// Direction of a front-half-space vector. Returns `None` for zero or
    /// rear-facing vectors.
    pub fn from_vector(v: Vec3) -> Option<Self> {
        let r = v.norm();
        if !(r > 0.0) || v.x < 0.0 {
            return None;
        }
        let theta = (v.x / r).clamp(-1.0, 1.0).acos().to_degrees().min(90.0);
        let phi = v.z.atan2(v.y).to_degrees();
        Self::new(theta, phi).ok()
    }

    /// Incident-wave direction for a source seen from the array along
    /// `self`: same polar angle, azimuth turned by 180 degrees, so that the
    /// specular reflection of a source at `(theta, phi)` leaves toward
    /// `(theta, phi + 180)`.
    pub fn as_incident(self) -> Self {
        Self::new(self.theta, self.phi + 180.0).expect("rotated azimuth is valid")
    }

    pub fn theta(self) -> f64 {
        self.theta
    }

    pub fn phi(self) -> f64 {
        self.phi
    }

    pub fn cos_theta(self) -> f64 {
        if self.theta == 90.0 {
            0.0
        } else {
            self.theta.to_radians().cos()
        }
    }

    /// `(cos theta, sin theta cos phi, sin theta sin phi)`.
    pub fn unit_vector(self) -> Vec3 {
        let (st, ct) = self.theta.to_radians().sin_cos();
        let (sp, cp) = self.phi.to_radians().sin_cos();
        Vec3::new(ct, st * cp, st * sp)
    }

    /// Angle between two directions in degrees.
    pub fn separation_deg(self, other: Direction) -> f64 {
        self.unit_vector()
            .dot(other.unit_vector())
            .clamp(-1.0, 1.0)
            .acos()
            .to_degrees()
    }
}

/// Matrix of 1-bit reflection states: bit 0 is a 0 degree reflection (open
/// circuit), bit 1 is 180 degrees (short circuit).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "CodeFile", into = "CodeFile")]
pub struct PhaseCode {
    rows: usize,
    cols: usize,
    bits: Vec<u8>,
}

#[derive(Serialize, Deserialize)]
struct CodeFile {
    rows: usize,
    cols: usize,
    bits: Vec<Vec<u8>>,
}

impl PhaseCode {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            bits: vec![0; rows * cols],
        }
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            bits: vec![1; rows * cols],
        }
    }

    /// Builds a code from row-major bits.
    pub fn from_bits(rows: usize, cols: usize, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(Error::Invalid {
                what: "phase code",
                reason: format!("expected {} bits, got {}", rows * cols, bits.len()),
            });
        }
        if let Some(i) = bits.iter().position(|&b| b > 1) {
            return Err(Error::Invalid {
                what: "phase code",
                reason: format!("entry {i} is {}, expected 0 or 1", bits[i]),
            });
        }
        Ok(Self { rows, cols, bits })
    }

    /// Builds a code from nested rows, rejecting ragged input.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::Invalid {
                what: "phase code",
                reason: format!("row {i} has {} entries, expected {cols}", rows[i].len()),
            });
        }
        Self::from_bits(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Row-major bits.
    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.bits[row * self.cols + col]
    }

    /// Flips the bit at row-major index `index`.
    pub fn flip(&mut self, index: usize) {
        self.bits[index] ^= 1;
    }

    /// `+1` for bit 0, `-1` for bit 1.
    pub fn sign(&self, index: usize) -> f64 {
        if self.bits[index] == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Every bit inverted.
    pub fn complement(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            bits: self.bits.iter().map(|b| b ^ 1).collect(),
        }
    }

    /// The member of `{self, complement}` whose first bit is 0.
    pub fn canonical(self) -> Self {
        if self.bits.first() == Some(&1) {
            self.complement()
        } else {
            self
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        self.bits.chunks(self.cols.max(1)).map(<[u8]>::to_vec).collect()
    }
}

/// Free-function form of [`PhaseCode::complement`].
pub fn complement(code: &PhaseCode) -> PhaseCode {
    code.complement()
}

impl TryFrom<CodeFile> for PhaseCode {
    type Error = Error;
    fn try_from(f: CodeFile) -> Result<Self> {
        if f.bits.len() != f.rows {
            return Err(Error::Invalid {
                what: "phase code",
                reason: format!("declared {} rows but found {}", f.rows, f.bits.len()),
            });
        }
        if let Some(i) = f.bits.iter().position(|r| r.len() != f.cols) {
            return Err(Error::Invalid {
                what: "phase code",
                reason: format!(
                    "row {i} has {} entries, expected {}",
                    f.bits[i].len(),
                    f.cols
                ),
            });
        }
        Self::from_rows(&f.bits).map(|mut c| {
            c.rows = f.rows;
            c.cols = f.cols;
            c
        })
    }
}

impl From<PhaseCode> for CodeFile {
    fn from(c: PhaseCode) -> Self {
        CodeFile {
            rows: c.rows,
            cols: c.cols,
            bits: c.to_rows(),
        }
    }
}
