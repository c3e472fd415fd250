//! Far-field array factor of a coded surface.
//!
//! For a plane wave described by the incident direction `u_inc` and an
//! observer in direction `u_obs` the reflected far field is
//!
//! ```text
//! AF = sum_n rho * E(theta_inc) * E(theta_obs) * exp(j pi b_n) * exp(j k (u_inc - u_obs) . r_n)
//! ```
//!
//! with `k = 2 pi f / c` and `b_n` the element's bit. Only the tangential
//! (Y-Z) components of `u_inc - u_obs` matter since every `r_n` lies in the
//! `x = 0` plane, so the specular reflection of `u_inc` is `u_inc` itself:
//! the incident direction names where the zero-gradient code sends energy.
//!
//! Sums run sequentially in row-major element order, which makes every
//! evaluation bit-reproducible and `AF(complement) == -AF` exact.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};

use crate::array::{ArrayGeometry, Direction, PhaseCode};
use crate::error::{domain, Result};
use crate::vec3::Vec3;

/// Level floor for zero magnitudes in normalized dB output.
pub const DB_FLOOR: f64 = -80.0;

/// Main-lobe threshold relative to the global maximum, dB.
pub const MAIN_LOBE_DB: f64 = -3.0;

/// A coded surface illuminated by one plane wave at one frequency.
#[derive(Debug, Clone)]
pub struct FarField {
    geometry: ArrayGeometry,
    positions: Vec<Vec3>,
    incident: Direction,
    wavenumber: f64,
}

impl FarField {
    pub fn new(
        geometry: &ArrayGeometry,
        incident: Direction,
        frequency: f64,
        sound_speed: f64,
    ) -> Result<Self> {
        geometry.validate()?;
        if !(frequency.is_finite() && frequency > 0.0) {
            return Err(domain(format!("frequency must be positive, got {frequency}")));
        }
        if !(sound_speed.is_finite() && sound_speed > 0.0) {
            return Err(domain(format!("sound speed must be positive, got {sound_speed}")));
        }
        Ok(Self {
            geometry: geometry.clone(),
            positions: geometry.element_positions(),
            incident,
            wavenumber: std::f64::consts::TAU * frequency / sound_speed,
        })
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn incident(&self) -> Direction {
        self.incident
    }

    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }

    /// Uncoded per-element contributions toward `observation` (every bit 0).
    pub fn element_phasors(&self, observation: Direction) -> Vec<Complex64> {
        let amp = self.geometry.rho
            * self.geometry.element_gain(self.incident)
            * self.geometry.element_gain(observation);
        let delta = self.incident.unit_vector() - observation.unit_vector();
        self.positions
            .iter()
            .map(|&r| Complex64::from_polar(amp, self.wavenumber * delta.dot(r)))
            .collect()
    }

    /// Complex array factor of `code` toward `observation`.
    pub fn evaluate(&self, code: &PhaseCode, observation: Direction) -> Result<Complex64> {
        self.geometry.check_code(code)?;
        Ok(self.evaluate_unchecked(code, observation))
    }

    fn evaluate_unchecked(&self, code: &PhaseCode, observation: Direction) -> Complex64 {
        signed_sum(code, &self.element_phasors(observation))
    }

    /// Array factor with continuous reflection phases (rad, row-major) in
    /// place of the 1-bit states. Used as the unquantized reference.
    pub fn evaluate_profile(&self, phases: &[f64], observation: Direction) -> Result<Complex64> {
        self.check_profile(phases)?;
        Ok(self.evaluate_profile_unchecked(phases, observation))
    }

    fn evaluate_profile_unchecked(&self, phases: &[f64], observation: Direction) -> Complex64 {
        self.element_phasors(observation)
            .iter()
            .zip(phases)
            .fold(Complex64::new(0.0, 0.0), |acc, (&w, &p)| {
                acc + w * Complex64::from_polar(1.0, p)
            })
    }

    fn check_profile(&self, phases: &[f64]) -> Result<()> {
        if phases.len() != self.positions.len() {
            return Err(domain(format!(
                "phase profile has {} entries for {} elements",
                phases.len(),
                self.positions.len()
            )));
        }
        Ok(())
    }
}

/// `sum_n sign(b_n) * w_n` in index order.
pub(crate) fn signed_sum(code: &PhaseCode, phasors: &[Complex64]) -> Complex64 {
    phasors
        .iter()
        .enumerate()
        .fold(Complex64::new(0.0, 0.0), |acc, (i, &w)| {
            if code.bits()[i] == 0 {
                acc + w
            } else {
                acc - w
            }
        })
}

/// One-shot array factor evaluation.
pub fn array_factor(
    geometry: &ArrayGeometry,
    code: &PhaseCode,
    incident: Direction,
    frequency: f64,
    observation: Direction,
    sound_speed: f64,
) -> Result<Complex64> {
    FarField::new(geometry, incident, frequency, sound_speed)?.evaluate(code, observation)
}

/// Array factor sampled on a regular `(theta, phi)` grid.
///
/// `values` is theta-major: index `i * phis.len() + j` holds
/// `(thetas[i], phis[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamPattern {
    pub thetas: Vec<f64>,
    pub phis: Vec<f64>,
    pub values: Vec<Complex64>,
    /// Largest magnitude on the grid.
    pub peak: f64,
}

impl BeamPattern {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn direction(&self, index: usize) -> Direction {
        let n_phi = self.phis.len();
        Direction::new(self.thetas[index / n_phi], self.phis[index % n_phi])
            .expect("grid directions are valid")
    }

    /// `|AF| / peak`, or 0 everywhere for an identically zero pattern.
    pub fn normalized(&self, index: usize) -> f64 {
        if self.peak > 0.0 {
            self.values[index].norm() / self.peak
        } else {
            0.0
        }
    }

    /// Normalized level in dB, floored at [`DB_FLOOR`].
    pub fn level_db(&self, index: usize) -> f64 {
        let m = self.normalized(index);
        if m > 0.0 {
            (20.0 * m.log10()).max(DB_FLOOR)
        } else {
            DB_FLOOR
        }
    }

    /// Index of the grid point closest to `(theta, phi)`.
    pub fn nearest_index(&self, direction: Direction) -> usize {
        let nearest = |axis: &[f64], v: f64, wrap: Option<f64>| {
            let dist = |a: f64| match wrap {
                Some(p) => {
                    let d = (a - v).rem_euclid(p);
                    d.min(p - d)
                }
                None => (a - v).abs(),
            };
            (0..axis.len())
                .min_by(|&a, &b| dist(axis[a]).total_cmp(&dist(axis[b])))
                .unwrap_or(0)
        };
        let i = nearest(&self.thetas, direction.theta(), None);
        let j = nearest(&self.phis, direction.phi(), Some(360.0));
        i * self.phis.len() + j
    }

    /// Writes `theta_deg,phi_deg,af_real,af_imag,af_db_norm` rows in
    /// theta-major order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "theta_deg,phi_deg,af_real,af_imag,af_db_norm")?;
        let n_phi = self.phis.len();
        for (idx, v) in self.values.iter().enumerate() {
            writeln!(
                out,
                "{},{},{:.12e},{:.12e},{:.6}",
                self.thetas[idx / n_phi],
                self.phis[idx % n_phi],
                v.re,
                v.im,
                self.level_db(idx)
            )?;
        }
        Ok(())
    }
}

fn axis(step: f64, span: f64, inclusive: bool) -> Vec<f64> {
    let ratio = span / step;
    let count = if inclusive {
        (ratio + 1e-9).floor() as usize + 1
    } else {
        (ratio - 1e-9).ceil() as usize
    };
    (0..count).map(|i| i as f64 * step).collect()
}

fn check_step(name: &str, step: f64) -> Result<()> {
    if step.is_finite() && step > 0.0 && step <= 10.0 {
        Ok(())
    } else {
        Err(domain(format!("{name} step must lie in (0, 10] degrees, got {step}")))
    }
}

/// Evaluates the array factor over `theta in [0, 90]`, `phi in [0, 360)`.
pub fn sweep(field: &FarField, code: &PhaseCode, theta_step: f64, phi_step: f64) -> Result<BeamPattern> {
    sweep_impl(field, code, theta_step, phi_step, false)
}

/// Same grid as [`sweep`] with points evaluated on the rayon pool. Output
/// is bit-identical to the sequential sweep.
pub fn sweep_parallel(
    field: &FarField,
    code: &PhaseCode,
    theta_step: f64,
    phi_step: f64,
) -> Result<BeamPattern> {
    sweep_impl(field, code, theta_step, phi_step, true)
}

/// Sweep of a continuous phase profile, see [`FarField::evaluate_profile`].
pub fn sweep_profile(
    field: &FarField,
    phases: &[f64],
    theta_step: f64,
    phi_step: f64,
) -> Result<BeamPattern> {
    field.check_profile(phases)?;
    grid_sweep(theta_step, phi_step, false, |dir| {
        field.evaluate_profile_unchecked(phases, dir)
    })
}

fn sweep_impl(
    field: &FarField,
    code: &PhaseCode,
    theta_step: f64,
    phi_step: f64,
    parallel: bool,
) -> Result<BeamPattern> {
    field.geometry.check_code(code)?;
    grid_sweep(theta_step, phi_step, parallel, |dir| {
        field.evaluate_unchecked(code, dir)
    })
}

fn grid_sweep<F>(theta_step: f64, phi_step: f64, parallel: bool, eval: F) -> Result<BeamPattern>
where
    F: Fn(Direction) -> Complex64 + Sync,
{
    check_step("theta", theta_step)?;
    check_step("phi", phi_step)?;
    let thetas = axis(theta_step, 90.0, true);
    let phis = axis(phi_step, 360.0, false);
    let n_phi = phis.len();
    let point = |idx: usize| {
        eval(Direction::new(thetas[idx / n_phi], phis[idx % n_phi]).expect("grid is valid"))
    };
    let total = thetas.len() * n_phi;
    let values: Vec<Complex64> = if parallel {
        (0..total).into_par_iter().map(point).collect()
    } else {
        (0..total).map(point).collect()
    };
    let peak = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    Ok(BeamPattern {
        thetas,
        phis,
        values,
        peak,
    })
}

/// A detected lobe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lobe {
    pub direction: Direction,
    /// Level relative to the global maximum, dB (`<= 0`).
    pub level_db: f64,
}

/// Summary of the local maxima of a pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LobeReport {
    /// Local maxima within 3 dB of the global maximum, strongest first.
    pub main_lobes: Vec<Lobe>,
    /// Highest local maximum that is not a main lobe.
    pub peak_sidelobe_db: Option<f64>,
    /// More than one main lobe, i.e. grating or quantization image lobes.
    pub grating_lobe_flag: bool,
}

/// Finds local maxima over the 8-neighborhood of the grid.
///
/// `phi` wraps around and the `theta = 0` row is treated as a single pole
/// node adjacent to the whole first ring. On plateaus only the earliest
/// grid point (theta-major order) counts, so an all-equal pattern yields a
/// single main lobe at the smallest `(theta, phi)`.
pub fn find_lobes(pattern: &BeamPattern) -> Result<LobeReport> {
    if pattern.is_empty() {
        return Err(domain("cannot find lobes of an empty pattern"));
    }
    let n_phi = pattern.phis.len();
    let n_theta = pattern.thetas.len();
    let has_pole = pattern.thetas[0] == 0.0;
    let mag = |i: usize, j: usize| {
        if has_pole && i == 0 {
            pattern.values[0].norm()
        } else {
            pattern.values[i * n_phi + j].norm()
        }
    };
    // node ordering key: pole collapses to (0, 0)
    let key = |i: usize, j: usize| if has_pole && i == 0 { (0, 0) } else { (i, j) };

    let mut maxima: Vec<(usize, f64)> = Vec::new();
    for i in 0..n_theta {
        let js: Vec<usize> = if has_pole && i == 0 { vec![0] } else { (0..n_phi).collect() };
        for j in js {
            let here = mag(i, j);
            let me = key(i, j);
            let mut neighbors: Vec<(usize, usize)> = Vec::with_capacity(n_phi.max(8));
            if has_pole && i == 0 {
                if n_theta > 1 {
                    neighbors.extend((0..n_phi).map(|jj| (1, jj)));
                }
            } else {
                for di in [-1i64, 0, 1] {
                    let ii = i as i64 + di;
                    if ii < 0 || ii >= n_theta as i64 {
                        continue;
                    }
                    for dj in [-1i64, 0, 1] {
                        if di == 0 && dj == 0 {
                            continue;
                        }
                        let jj = (j as i64 + dj).rem_euclid(n_phi as i64) as usize;
                        let nb = (ii as usize, jj);
                        if key(nb.0, nb.1) != me {
                            neighbors.push(nb);
                        }
                    }
                }
            }
            let is_max = neighbors.iter().all(|&(ii, jj)| {
                let other = mag(ii, jj);
                if key(ii, jj) < me {
                    here > other
                } else {
                    here >= other
                }
            });
            if is_max {
                maxima.push((i * n_phi + j, here));
            }
        }
    }

    let level = |m: f64| {
        if pattern.peak > 0.0 && m > 0.0 {
            20.0 * (m / pattern.peak).log10()
        } else if pattern.peak > 0.0 {
            f64::NEG_INFINITY
        } else {
            0.0
        }
    };
    maxima.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut main_lobes = Vec::new();
    let mut peak_sidelobe_db = None;
    for &(idx, m) in &maxima {
        let db = level(m).min(0.0);
        if db >= MAIN_LOBE_DB {
            main_lobes.push(Lobe {
                direction: pattern.direction(idx),
                level_db: db,
            });
        } else if peak_sidelobe_db.is_none() {
            peak_sidelobe_db = Some(db.max(DB_FLOOR));
        }
    }
    let grating_lobe_flag = main_lobes.len() > 1;
    Ok(LobeReport {
        main_lobes,
        peak_sidelobe_db,
        grating_lobe_flag,
    })
}
