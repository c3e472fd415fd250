//! Synthesis of 1-bit phase codes.
//!
//! Three procedures share the far-field model of [`crate::beampattern`]:
//!
//! * [`steer_code`] quantizes the ideal continuous phase profile that would
//!   send the reflection toward a target, scanning a global phase offset
//!   because 1-bit quantization depends on it.
//! * [`brute_force_code`] enumerates every code of a small array and is the
//!   oracle the other two are measured against.
//! * [`suppress_code`] starts from the steered code and runs first-improvement
//!   single-bit flips on `J = |AF(target)|^2 - mu |AF(eavesdropper)|^2`.
//!
//! All outputs are canonicalized so bit `(0, 0)` is 0; magnitudes are
//! unchanged by complementing, so nothing is lost.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{ArrayGeometry, Direction, PhaseCode};
use crate::beampattern::{signed_sum, FarField};
use crate::error::{domain, Error, Result};

/// Largest array [`brute_force_code`] accepts.
pub const BRUTE_FORCE_LIMIT: usize = 20;

pub const DEFAULT_OFFSET_STEPS: usize = 64;

pub const DEFAULT_MAX_PASSES: usize = 100;

/// Steer the reflection of `incident` toward `target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteeringTask {
    pub incident: Direction,
    pub target: Direction,
    pub frequency: f64,
    /// Number of global offsets scanned over `[0, pi)`.
    pub offset_steps: usize,
}

impl SteeringTask {
    pub fn new(incident: Direction, target: Direction, frequency: f64) -> Self {
        Self {
            incident,
            target,
            frequency,
            offset_steps: DEFAULT_OFFSET_STEPS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.offset_steps == 0 {
            return Err(domain("offset_steps must be at least 1"));
        }
        Ok(())
    }
}

/// Favor `target` while starving `eavesdropper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuppressionTask {
    pub incident: Direction,
    pub target: Direction,
    pub eavesdropper: Direction,
    pub frequency: f64,
    /// Weight on the eavesdropper power.
    pub mu: f64,
    pub max_passes: usize,
}

impl SuppressionTask {
    pub fn new(
        incident: Direction,
        target: Direction,
        eavesdropper: Direction,
        frequency: f64,
        mu: f64,
    ) -> Self {
        Self {
            incident,
            target,
            eavesdropper,
            frequency,
            mu,
            max_passes: DEFAULT_MAX_PASSES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(domain(format!("mu must be non-negative, got {}", self.mu)));
        }
        if self.max_passes == 0 {
            return Err(domain("max_passes must be at least 1"));
        }
        if !(self.target.separation_deg(self.eavesdropper) > 0.0) {
            return Err(domain("target and eavesdropper directions coincide"));
        }
        Ok(())
    }
}

/// Result of [`steer_code`].
#[derive(Debug, Clone, PartialEq)]
pub struct Steered {
    pub code: PhaseCode,
    /// `|AF(target)|`.
    pub gain: f64,
    /// Global offset that produced the winning code, rad.
    pub offset_rad: f64,
}

/// Result of [`suppress_code`].
#[derive(Debug, Clone, PartialEq)]
pub struct Suppressed {
    pub code: PhaseCode,
    pub objective: f64,
    pub target_gain: f64,
    pub eavesdropper_gain: f64,
    /// Passes over the array that were executed.
    pub passes: usize,
    /// `|AF(target)|` and offset of the steered starting point.
    pub start: Steered,
}

/// Wraps a phase to `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

/// 1-bit quantizer: bit 0 when `wrap(psi + offset)` lies in `(-pi/2, pi/2]`.
pub fn quantize_phases(ideal: &[f64], offset: f64) -> Vec<u8> {
    ideal
        .iter()
        .map(|&psi| {
            let w = wrap_phase(psi + offset);
            if w > -FRAC_PI_2 && w <= FRAC_PI_2 {
                0
            } else {
                1
            }
        })
        .collect()
}

/// Scans offsets `i * pi / steps` and keeps the quantization of `ideal`
/// that maximizes `|sum_n sign_n * phasors_n|`. Earlier offsets win ties.
///
/// Returns `(bits, offset, gain)`.
pub fn best_offset_quantize(
    ideal: &[f64],
    phasors: &[Complex64],
    steps: usize,
) -> (Vec<u8>, f64, f64) {
    debug_assert_eq!(ideal.len(), phasors.len());
    let mut best: Option<(Vec<u8>, f64, f64)> = None;
    for i in 0..steps.max(1) {
        let offset = i as f64 * PI / steps.max(1) as f64;
        let bits = quantize_phases(ideal, offset);
        let gain = bits
            .iter()
            .zip(phasors)
            .fold(Complex64::new(0.0, 0.0), |acc, (&b, &w)| if b == 0 { acc + w } else { acc - w })
            .norm();
        if best.as_ref().is_none_or(|(_, _, g)| gain > *g) {
            best = Some((bits, offset, gain));
        }
    }
    best.expect("at least one offset is scanned")
}

/// Continuous reflection phases (rad, row-major) that co-phase every
/// element toward `task.target`: `k (u_target - u_inc) . r_n`, wrapped.
pub fn ideal_profile(geometry: &ArrayGeometry, task: &SteeringTask, sound_speed: f64) -> Result<Vec<f64>> {
    let field = FarField::new(geometry, task.incident, task.frequency, sound_speed)?;
    let k = field.wavenumber();
    let delta = task.target.unit_vector() - task.incident.unit_vector();
    Ok(geometry
        .element_positions()
        .iter()
        .map(|&r| wrap_phase(k * delta.dot(r)))
        .collect())
}

/// Quantized steering code. See the module docs.
///
/// The quantizer works on `psi_n = -k (u_target - u_inc) . r_n`, the
/// negated ideal profile; with real `+/-1` states the offset scan makes the
/// sign immaterial.
pub fn steer_code(geometry: &ArrayGeometry, task: &SteeringTask, sound_speed: f64) -> Result<Steered> {
    task.validate()?;
    let field = FarField::new(geometry, task.incident, task.frequency, sound_speed)?;
    let k = field.wavenumber();
    let delta = task.target.unit_vector() - task.incident.unit_vector();
    let ideal: Vec<f64> = geometry
        .element_positions()
        .iter()
        .map(|&r| wrap_phase(-k * delta.dot(r)))
        .collect();
    let phasors = field.element_phasors(task.target);
    let (bits, offset, _) = best_offset_quantize(&ideal, &phasors, task.offset_steps);
    let code = PhaseCode::from_bits(geometry.rows, geometry.cols, bits)?.canonical();
    let gain = signed_sum(&code, &phasors).norm();
    Ok(Steered {
        code,
        gain,
        offset_rad: offset,
    })
}

/// Exhaustive search for the code maximizing `|AF(target)|`.
///
/// Only codes with bit `(0, 0) = 0` are enumerated (the complement has the
/// same magnitude). Code value `v` puts element 0 in the most significant
/// bit; among equal gains the lowest `v` wins. The enumeration runs on the
/// rayon pool and the reduction applies the same tie-break, so the result
/// does not depend on scheduling.
pub fn brute_force_code(
    geometry: &ArrayGeometry,
    incident: Direction,
    target: Direction,
    frequency: f64,
    sound_speed: f64,
) -> Result<(PhaseCode, f64)> {
    let n = geometry.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            elements: n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let field = FarField::new(geometry, incident, frequency, sound_speed)?;
    let phasors = field.element_phasors(target);
    let (best_v, gain) = exhaustive_argmax(n, |v| code_sum(v, &phasors).norm());
    let code = PhaseCode::from_bits(geometry.rows, geometry.cols, value_to_bits(best_v, n))?;
    Ok((code, gain))
}

fn value_to_bits(v: u64, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((v >> (n - 1 - i)) & 1) as u8).collect()
}

fn code_sum(v: u64, phasors: &[Complex64]) -> Complex64 {
    let n = phasors.len();
    phasors
        .iter()
        .enumerate()
        .fold(Complex64::new(0.0, 0.0), |acc, (i, &w)| {
            if (v >> (n - 1 - i)) & 1 == 0 {
                acc + w
            } else {
                acc - w
            }
        })
}

/// Max of `score` over canonical code values `0..2^(n-1)`, lowest value on ties.
fn exhaustive_argmax<F>(n: usize, score: F) -> (u64, f64)
where
    F: Fn(u64) -> f64 + Sync,
{
    let count: u64 = if n == 0 { 1 } else { 1 << (n - 1) };
    let pick = |a: (u64, f64), b: (u64, f64)| {
        if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
            b
        } else {
            a
        }
    };
    (0..count)
        .into_par_iter()
        .map(|v| (v, score(v)))
        .reduce(|| (u64::MAX, f64::NEG_INFINITY), pick)
}

/// Target-versus-eavesdropper local search. See the module docs.
pub fn suppress_code(
    geometry: &ArrayGeometry,
    task: &SuppressionTask,
    sound_speed: f64,
) -> Result<Suppressed> {
    task.validate()?;
    let steer = SteeringTask::new(task.incident, task.target, task.frequency);
    let start = steer_code(geometry, &steer, sound_speed)?;
    let field = FarField::new(geometry, task.incident, task.frequency, sound_speed)?;
    let to_target = field.element_phasors(task.target);
    let to_eve = field.element_phasors(task.eavesdropper);
    let objective = |c: &PhaseCode| {
        signed_sum(c, &to_target).norm_sqr() - task.mu * signed_sum(c, &to_eve).norm_sqr()
    };

    let mut code = start.code.clone();
    let mut best = objective(&code);
    let mut passes = 0;
    while passes < task.max_passes {
        passes += 1;
        let mut improved = false;
        for idx in 0..code.len() {
            code.flip(idx);
            let j = objective(&code);
            if j > best {
                best = j;
                improved = true;
            } else {
                code.flip(idx);
            }
        }
        if !improved {
            break;
        }
    }
    let code = code.canonical();
    Ok(Suppressed {
        objective: objective(&code),
        target_gain: signed_sum(&code, &to_target).norm(),
        eavesdropper_gain: signed_sum(&code, &to_eve).norm(),
        code,
        passes,
        start,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beampattern::array_factor;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const C: f64 = 1480.0;

    fn dir(theta: f64, phi: f64) -> Direction {
        Direction::new(theta, phi).unwrap()
    }

    /// Plain enumeration of all 2^N codes, independent of the canonical
    /// half-space trick used by `brute_force_code`.
    fn enumerate_all<F: Fn(&PhaseCode) -> f64>(g: &ArrayGeometry, f: F) -> f64 {
        let n = g.len();
        (0..1u64 << n)
            .map(|v| {
                let bits = (0..n).map(|i| ((v >> i) & 1) as u8).collect();
                f(&PhaseCode::from_bits(g.rows, g.cols, bits).unwrap())
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_phase(PI), PI);
        assert_relative_eq!(wrap_phase(-PI), PI, epsilon = 1e-15);
        assert_relative_eq!(wrap_phase(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-15);
        assert_eq!(wrap_phase(0.0), 0.0);
    }

    #[test]
    fn broadside_steering_is_all_zeros() {
        let g = ArrayGeometry::new(4, 6, 0.05);
        let s = steer_code(&g, &SteeringTask::new(dir(0.0, 0.0), dir(0.0, 0.0), 27e3), C).unwrap();
        assert_eq!(s.code, PhaseCode::zeros(4, 6));
        assert_relative_eq!(s.gain, 24.0, epsilon = 1e-12);
        assert_eq!(s.offset_rad, 0.0);
    }

    #[test]
    fn steering_gain_matches_array_factor() {
        let g = ArrayGeometry::new(4, 6, 0.05);
        let task = SteeringTask::new(dir(0.0, 0.0), dir(30.0, 45.0), 27e3);
        let s = steer_code(&g, &task, C).unwrap();
        let af = array_factor(&g, &s.code, task.incident, 27e3, task.target, C).unwrap();
        assert!((af.norm() - s.gain).abs() < 1e-9);
        assert_eq!(s.code.get(0, 0), 0);
    }

    #[test]
    fn one_by_four_thirty_degrees_vs_oracle() {
        let g = ArrayGeometry::new(1, 4, 0.05);
        let (inc, tgt) = (dir(0.0, 0.0), dir(30.0, 0.0));
        let s = steer_code(&g, &SteeringTask::new(inc, tgt, 27e3), C).unwrap();
        let (code, best) = brute_force_code(&g, inc, tgt, 27e3, C).unwrap();
        let af = array_factor(&g, &s.code, inc, 27e3, tgt, C).unwrap();
        assert_eq!(af.norm(), s.gain);
        let af_best = array_factor(&g, &code, inc, 27e3, tgt, C).unwrap();
        assert_eq!(af_best.norm(), best);
        assert!(best >= s.gain);
        assert!((s.gain / best).powi(2) >= 0.4);
        let oracle = enumerate_all(&g, |c| array_factor(&g, c, inc, 27e3, tgt, C).unwrap().norm());
        assert_relative_eq!(best, oracle, max_relative = 1e-12);
    }

    #[test]
    fn two_by_three_forty_five_degrees() {
        let g = ArrayGeometry::new(2, 3, 0.05);
        let (inc, tgt) = (dir(0.0, 0.0), dir(45.0, 30.0));
        let s = steer_code(&g, &SteeringTask::new(inc, tgt, 27e3), C).unwrap();
        let (_, best) = brute_force_code(&g, inc, tgt, 27e3, C).unwrap();
        assert!(best >= s.gain, "steer {} brute {}", s.gain, best);
    }

    #[test]
    fn brute_force_edge_cases() {
        let g = ArrayGeometry::new(1, 1, 0.05).with_exponent(1.0).with_efficiency(0.7);
        let (code, gain) = brute_force_code(&g, dir(20.0, 0.0), dir(40.0, 0.0), 27e3, C).unwrap();
        assert_eq!(code, PhaseCode::zeros(1, 1));
        let expected = 0.7 * 20f64.to_radians().cos() * 40f64.to_radians().cos();
        assert_relative_eq!(gain, expected, epsilon = 1e-15);

        for (r, c) in [(1, 1), (2, 3), (3, 4)] {
            let g = ArrayGeometry::new(r, c, 0.05).with_exponent(0.0);
            let (code, gain) = brute_force_code(&g, dir(0.0, 0.0), dir(0.0, 0.0), 27e3, C).unwrap();
            assert_eq!(code, PhaseCode::zeros(r, c));
            assert_relative_eq!(gain, (r * c) as f64, epsilon = 1e-12);
        }
        let big = ArrayGeometry::new(3, 7, 0.05);
        assert!(matches!(
            brute_force_code(&big, dir(0.0, 0.0), dir(0.0, 0.0), 27e3, C),
            Err(Error::TooLarge { elements: 21, .. })
        ));
    }

    #[test]
    fn steering_reciprocity() {
        let g = ArrayGeometry::new(3, 4, 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = dir(rng.gen_range(0.0..70.0), rng.gen_range(0.0..360.0));
            let b = dir(rng.gen_range(0.0..70.0), rng.gen_range(0.0..360.0));
            let fwd = steer_code(&g, &SteeringTask::new(a, b, 27e3), C).unwrap();
            let back = steer_code(&g, &SteeringTask::new(b, a, 27e3), C).unwrap();
            assert_relative_eq!(fwd.gain, back.gain, max_relative = 1e-9);
        }
    }

    #[test]
    fn suppression_with_zero_weight_only_improves_target() {
        let g = ArrayGeometry::new(4, 6, 0.05);
        let task = SuppressionTask::new(dir(0.0, 0.0), dir(30.0, 0.0), dir(30.0, 180.0), 27e3, 0.0);
        let s = suppress_code(&g, &task, C).unwrap();
        assert!(s.target_gain >= s.start.gain);
        assert!(s.passes >= 1 && s.passes <= task.max_passes);
        assert_eq!(s.code.get(0, 0), 0);
    }

    #[test]
    fn suppression_reduces_eavesdropper() {
        let g = ArrayGeometry::new(4, 6, 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let target = dir(rng.gen_range(0.0..60.0), rng.gen_range(0.0..360.0));
            let eve = dir(rng.gen_range(0.0..60.0), rng.gen_range(0.0..360.0));
            let task = SuppressionTask::new(dir(0.0, 0.0), target, eve, 27e3, 1e3);
            let s = suppress_code(&g, &task, C).unwrap();
            let start_eve = array_factor(&g, &s.start.code, task.incident, 27e3, eve, C).unwrap().norm();
            assert!(s.eavesdropper_gain <= start_eve + 1e-12);
            let start_j = s.start.gain.powi(2) - 1e3 * start_eve.powi(2);
            assert!(s.objective >= start_j);
        }
    }

    #[test]
    fn suppression_validation() {
        let g = ArrayGeometry::new(2, 2, 0.05);
        let same = SuppressionTask::new(dir(0.0, 0.0), dir(30.0, 0.0), dir(30.0, 0.0), 27e3, 1.0);
        assert!(suppress_code(&g, &same, C).is_err());
        let neg = SuppressionTask::new(dir(0.0, 0.0), dir(30.0, 0.0), dir(10.0, 0.0), 27e3, -1.0);
        assert!(suppress_code(&g, &neg, C).is_err());
    }

    #[test]
    fn ideal_profile_is_co_phased_at_target() {
        let g = ArrayGeometry::new(4, 6, 0.05).with_exponent(0.0);
        let task = SteeringTask::new(dir(10.0, 30.0), dir(40.0, 250.0), 27e3);
        let profile = ideal_profile(&g, &task, C).unwrap();
        let field = FarField::new(&g, task.incident, 27e3, C).unwrap();
        let af = field.evaluate_profile(&profile, task.target).unwrap();
        assert_relative_eq!(af.norm(), 24.0, max_relative = 1e-12);
    }

    /// Mean of `(|sum_n +/-exp(j psi_n)| / N)^2` for i.i.d. uniform phases.
    fn quantization_power(trials: usize, n: usize, best_offset: bool, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut acc = 0.0;
        for _ in 0..trials {
            let ideal: Vec<f64> = (0..n).map(|_| rng.gen_range(-PI..PI)).collect();
            let phasors: Vec<Complex64> = ideal.iter().map(|&p| Complex64::from_polar(1.0, -p)).collect();
            let gain = if best_offset {
                best_offset_quantize(&ideal, &phasors, DEFAULT_OFFSET_STEPS).2
            } else {
                quantize_phases(&ideal, 0.0)
                    .iter()
                    .zip(&phasors)
                    .fold(Complex64::new(0.0, 0.0), |a, (&b, &w)| if b == 0 { a + w } else { a - w })
                    .norm()
            };
            acc += (gain / n as f64).powi(2);
        }
        acc / trials as f64
    }

    #[test]
    fn one_bit_power_factor() {
        // E = 1/N + (1 - 1/N) (2/pi)^2 for a fixed reference offset
        let fixed = quantization_power(10_000, 24, false, 99);
        let two_over_pi_sq = (2.0 / PI).powi(2);
        assert!((fixed - two_over_pi_sq).abs() <= 0.05, "{fixed}");
        let predicted = 1.0 / 24.0 + (23.0 / 24.0) * two_over_pi_sq;
        assert!((fixed - predicted).abs() <= 0.01, "{fixed} vs {predicted}");
        // picking the best offset per draw biases the statistic upward
        let best = quantization_power(2_000, 24, true, 99);
        assert!(best > fixed);
    }

    #[test]
    fn quantizer_boundaries() {
        assert_eq!(quantize_phases(&[0.0, FRAC_PI_2, -FRAC_PI_2, PI], 0.0), vec![0, 0, 1, 1]);
    }
}
