//! Synthetic operating-current trajectories for the four degradation modes.
//!
//! At constant optical power the drive current grows as
//!
//! ```text
//! I(t)   = I0 + Inr(t)
//! Inr(t) = beta * exp(k * t)
//! k      = P^n * exp(mu0 - Ea / (kB * T))
//! ```
//!
//! Gradual and rapid degradation both follow this law and differ only in
//! their coefficient distributions and observation horizon. Degradation
//! starts after a drawn period of normal operation (`onset_fraction`), and
//! `t` in the law above is measured from that onset. Sudden degradation is a
//! sustained additive current step; normal operation is flat. Every mode
//! receives i.i.d. Gaussian observation noise proportional to `I0`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mode::DegradationMode;
use crate::seeds;

/// Boltzmann constant in eV/K.
pub const BOLTZMANN_EV_PER_K: f64 = 8.617333262e-5;

/// Redraws allowed when a truncated normal draw lands outside its bounds.
pub const MAX_REDRAWS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserParams {
    pub optical_power_mw: f64,
    pub threshold_current_ma: f64,
    pub temperature_k: f64,
    pub wavelength_nm: f64,
}

impl LaserParams {
    pub fn new(
        optical_power_mw: f64,
        threshold_current_ma: f64,
        temperature_k: f64,
        wavelength_nm: f64,
    ) -> Result<Self> {
        let laser = LaserParams {
            optical_power_mw,
            threshold_current_ma,
            temperature_k,
            wavelength_nm,
        };
        laser.validate()?;
        Ok(laser)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("optical_power_mw", self.optical_power_mw),
            ("threshold_current_ma", self.threshold_current_ma),
            ("temperature_k", self.temperature_k),
            ("wavelength_nm", self.wavelength_nm),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::domain(name, format!("must be finite and > 0, got {value}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationCoefficients {
    /// Non-radiative current prefactor, mA.
    pub beta_ma: f64,
    pub derating_exponent: f64,
    pub scale_parameter: f64,
    pub activation_energy_ev: f64,
}

impl DegradationCoefficients {
    /// Placeholder record for modes that do not use the growth law.
    pub const NONE: DegradationCoefficients = DegradationCoefficients {
        beta_ma: 0.0,
        derating_exponent: 0.0,
        scale_parameter: 0.0,
        activation_energy_ev: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.beta_ma.is_finite() && self.beta_ma >= 0.0) {
            return Err(Error::domain("beta_ma", format!("must be >= 0, got {}", self.beta_ma)));
        }
        if !(self.activation_energy_ev.is_finite() && self.activation_energy_ev >= 0.0) {
            return Err(Error::domain(
                "activation_energy_ev",
                format!("must be >= 0, got {}", self.activation_energy_ev),
            ));
        }
        if !self.derating_exponent.is_finite() {
            return Err(Error::domain("derating_exponent", "must be finite"));
        }
        if !self.scale_parameter.is_finite() {
            return Err(Error::domain("scale_parameter", "must be finite"));
        }
        Ok(())
    }
}

/// Degradation rate `k` in 1/h.
pub fn compute_rate_k(laser: &LaserParams, coeffs: &DegradationCoefficients) -> Result<f64> {
    laser.validate()?;
    coeffs.validate()?;
    let power_factor = laser.optical_power_mw.powf(coeffs.derating_exponent);
    if !(power_factor.is_finite() && power_factor > 0.0) {
        return Err(Error::domain(
            "derating_exponent",
            format!(
                "P^n is not a positive finite number (P={}, n={})",
                laser.optical_power_mw, coeffs.derating_exponent
            ),
        ));
    }
    let exponent = coeffs.scale_parameter - coeffs.activation_energy_ev / (BOLTZMANN_EV_PER_K * laser.temperature_k);
    let arrhenius = exponent.exp();
    if !arrhenius.is_finite() {
        return Err(Error::domain("scale_parameter", format!("exp({exponent}) overflows")));
    }
    let k = power_factor * arrhenius;
    if !(k.is_finite() && k > 0.0) {
        let culprit = if coeffs.scale_parameter.abs() >= exponent.abs() / 2.0 {
            "scale_parameter"
        } else {
            "activation_energy_ev"
        };
        return Err(Error::domain(
            culprit,
            format!("rate k = {k} is not positive and finite"),
        ));
    }
    Ok(k)
}

/// Operating current `I0 + beta * exp(k * t)` in mA.
pub fn current_at(t_hours: f64, threshold_current_ma: f64, beta_ma: f64, k_per_hour: f64) -> Result<f64> {
    if !(t_hours >= 0.0) {
        return Err(Error::Argument(format!("time must be >= 0, got {t_hours}")));
    }
    let growth = (k_per_hour * t_hours).exp();
    let current = threshold_current_ma + beta_ma * growth;
    if !current.is_finite() {
        return Err(Error::domain(
            "k_per_hour",
            format!("exp(k*t) overflows for k={k_per_hour}, t={t_hours}"),
        ));
    }
    Ok(current)
}

/// Normal distribution truncated to `[lower, upper]` by redrawing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalDistribution {
    pub mean: f64,
    pub std_dev: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
}

impl NormalDistribution {
    pub const fn new(mean: f64, std_dev: f64) -> Self {
        NormalDistribution {
            mean,
            std_dev,
            lower: None,
            upper: None,
        }
    }

    pub const fn at_least(mut self, lower: f64) -> Self {
        self.lower = Some(lower);
        self
    }

    pub const fn fixed(value: f64) -> Self {
        NormalDistribution::new(value, 0.0)
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !self.mean.is_finite() {
            return Err(Error::Config(format!("{name}: mean must be finite")));
        }
        if !(self.std_dev.is_finite() && self.std_dev >= 0.0) {
            return Err(Error::Config(format!("{name}: std_dev must be >= 0")));
        }
        if let (Some(lo), Some(hi)) = (self.lower, self.upper) {
            if lo > hi {
                return Err(Error::Config(format!("{name}: lower bound exceeds upper bound")));
            }
        }
        Ok(())
    }

    fn admits(&self, value: f64) -> bool {
        self.lower.is_none_or(|lo| value >= lo) && self.upper.is_none_or(|hi| value <= hi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, name: &str, rng: &mut R) -> Result<f64> {
        if self.std_dev == 0.0 {
            return if self.admits(self.mean) {
                Ok(self.mean)
            } else {
                Err(Error::Generation(format!(
                    "{name}: fixed value {} violates its bounds",
                    self.mean
                )))
            };
        }
        let normal = Normal::new(self.mean, self.std_dev).map_err(|e| Error::Config(format!("{name}: {e}")))?;
        for _ in 0..MAX_REDRAWS {
            let value = normal.sample(rng);
            if self.admits(value) {
                return Ok(value);
            }
        }
        Err(Error::Generation(format!(
            "{name}: no draw within bounds after {MAX_REDRAWS} attempts"
        )))
    }
}

/// Closed interval of fractions of the observation horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformRange {
    pub low: f64,
    pub high: f64,
}

impl UniformRange {
    pub const fn new(low: f64, high: f64) -> Self {
        UniformRange { low, high }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.low.is_finite() && self.high.is_finite() && self.low <= self.high) {
            return Err(Error::Config(format!("{name}: need low <= high")));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.low == self.high {
            self.low
        } else {
            rng.gen_range(self.low..=self.high)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub horizon_hours: f64,
    pub sample_interval_hours: f64,
}

impl TimeGrid {
    fn validate(&self, name: &str) -> Result<()> {
        if !(self.sample_interval_hours.is_finite() && self.sample_interval_hours > 0.0) {
            return Err(Error::Config(format!("{name}: sample_interval_hours must be > 0")));
        }
        if !(self.horizon_hours.is_finite() && self.horizon_hours >= self.sample_interval_hours) {
            return Err(Error::Config(format!(
                "{name}: horizon_hours must be >= sample_interval_hours"
            )));
        }
        Ok(())
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        ((self.horizon_hours / self.sample_interval_hours).round() as usize).max(1)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| i as f64 * self.sample_interval_hours).collect()
    }
}

/// Coefficient distributions for a mode driven by the growth law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthProfile {
    pub grid: TimeGrid,
    /// `beta` as a fraction of the laser's threshold current.
    pub beta_fraction: NormalDistribution,
    pub derating_exponent: NormalDistribution,
    pub scale_parameter: NormalDistribution,
    pub activation_energy_ev: NormalDistribution,
    /// Degradation onset as a fraction of the horizon.
    pub onset_fraction: UniformRange,
}

impl GrowthProfile {
    fn validate(&self, name: &str) -> Result<()> {
        self.grid.validate(name)?;
        self.beta_fraction.validate(&format!("{name}.beta_fraction"))?;
        self.derating_exponent.validate(&format!("{name}.derating_exponent"))?;
        self.scale_parameter.validate(&format!("{name}.scale_parameter"))?;
        self.activation_energy_ev
            .validate(&format!("{name}.activation_energy_ev"))?;
        self.onset_fraction.validate(&format!("{name}.onset_fraction"))?;
        if self.onset_fraction.low < 0.0 || self.onset_fraction.high >= 1.0 {
            return Err(Error::Config(format!("{name}.onset_fraction must lie in [0, 1)")));
        }
        Ok(())
    }

    pub fn draw_coefficients<R: Rng + ?Sized>(
        &self,
        laser: &LaserParams,
        rng: &mut R,
    ) -> Result<DegradationCoefficients> {
        let beta_fraction = self.beta_fraction.sample("beta_fraction", rng)?;
        let derating_exponent = self.derating_exponent.sample("derating_exponent", rng)?;
        let scale_parameter = self.scale_parameter.sample("scale_parameter", rng)?;
        let activation_energy_ev = self.activation_energy_ev.sample("activation_energy_ev", rng)?;
        let coeffs = DegradationCoefficients {
            beta_ma: beta_fraction * laser.threshold_current_ma,
            derating_exponent,
            scale_parameter,
            activation_energy_ev,
        };
        coeffs
            .validate()
            .map_err(|e| Error::Generation(format!("drawn coefficients invalid: {e}")))?;
        Ok(coeffs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepProfile {
    pub grid: TimeGrid,
    /// Jump magnitude as a fraction of the threshold current.
    pub jump_fraction: NormalDistribution,
    pub onset_fraction: UniformRange,
}

impl StepProfile {
    fn validate(&self, name: &str) -> Result<()> {
        self.grid.validate(name)?;
        self.jump_fraction.validate(&format!("{name}.jump_fraction"))?;
        self.onset_fraction.validate(&format!("{name}.onset_fraction"))?;
        if self.onset_fraction.low < 0.0 || self.onset_fraction.high >= 1.0 {
            return Err(Error::Config(format!(
                "{name}.onset_fraction must lie in [0, 1) so the step happens before the horizon"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub samples_per_mode: usize,
    pub rng_seed: u64,
    /// Observation noise standard deviation as a fraction of `I0`.
    pub observation_noise_fraction: f64,
    pub laser_pool: Vec<LaserParams>,
    pub normal: TimeGrid,
    pub gradual: GrowthProfile,
    pub rapid: GrowthProfile,
    pub sudden: StepProfile,
}

/// 1550 nm DFB-style devices: (P mW, I0 mA, T K, lambda nm).
const DEFAULT_POOL: [(f64, f64, f64, f64); 8] = [
    (10.0, 10.0, 298.15, 1550.0),
    (15.0, 12.0, 298.15, 1550.0),
    (20.0, 15.0, 308.15, 1548.0),
    (10.0, 8.0, 318.15, 1552.0),
    (20.0, 12.0, 313.15, 1530.0),
    (25.0, 18.0, 298.15, 1565.0),
    (30.0, 20.0, 303.15, 1555.0),
    (12.0, 9.0, 293.15, 1545.0),
];

impl Default for GenerationConfig {
    fn default() -> Self {
        let long_grid = TimeGrid {
            horizon_hours: 1000.0,
            sample_interval_hours: 1.0,
        };
        GenerationConfig {
            samples_per_mode: 1500,
            rng_seed: 2020,
            observation_noise_fraction: 0.005,
            laser_pool: DEFAULT_POOL
                .iter()
                .map(|&(p, i0, t, l)| LaserParams {
                    optical_power_mw: p,
                    threshold_current_ma: i0,
                    temperature_k: t,
                    wavelength_nm: l,
                })
                .collect(),
            normal: long_grid,
            // k ~ 2.7e-3 /h: end of life after several hundred hours.
            gradual: GrowthProfile {
                grid: long_grid,
                beta_fraction: NormalDistribution::new(0.06, 0.008).at_least(0.0),
                derating_exponent: NormalDistribution::new(0.2, 0.01),
                scale_parameter: NormalDistribution::new(-4.57, 0.05),
                activation_energy_ev: NormalDistribution::new(0.05, 0.002).at_least(0.0),
                onset_fraction: UniformRange::new(0.0, 0.7),
            },
            // k ~ 3e-2 /h: end of life within the first 100 hours.
            rapid: GrowthProfile {
                grid: TimeGrid {
                    horizon_hours: 100.0,
                    sample_interval_hours: 0.1,
                },
                beta_fraction: NormalDistribution::new(0.15, 0.02).at_least(0.0),
                derating_exponent: NormalDistribution::new(0.2, 0.01),
                scale_parameter: NormalDistribution::new(-2.16, 0.05),
                activation_energy_ev: NormalDistribution::new(0.05, 0.002).at_least(0.0),
                onset_fraction: UniformRange::new(0.0, 0.7),
            },
            sudden: StepProfile {
                grid: long_grid,
                jump_fraction: NormalDistribution::new(0.4, 0.05).at_least(0.25),
                onset_fraction: UniformRange::new(0.4, 0.95),
            },
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_mode == 0 {
            return Err(Error::Config("samples_per_mode must be > 0".into()));
        }
        if !(self.observation_noise_fraction.is_finite() && self.observation_noise_fraction >= 0.0) {
            return Err(Error::Config("observation_noise_fraction must be >= 0".into()));
        }
        if self.laser_pool.is_empty() {
            return Err(Error::Config("laser_pool is empty".into()));
        }
        for (i, laser) in self.laser_pool.iter().enumerate() {
            laser
                .validate()
                .map_err(|e| Error::Config(format!("laser_pool[{i}]: {e}")))?;
        }
        self.normal.validate("normal")?;
        self.gradual.validate("gradual")?;
        self.rapid.validate("rapid")?;
        self.sudden.validate("sudden")?;
        Ok(())
    }

    pub fn grid(&self, mode: DegradationMode) -> TimeGrid {
        match mode {
            DegradationMode::Normal => self.normal,
            DegradationMode::Gradual => self.gradual.grid,
            DegradationMode::Rapid => self.rapid.grid,
            DegradationMode::Sudden => self.sudden.grid,
        }
    }

    pub fn growth_profile(&self, mode: DegradationMode) -> Option<&GrowthProfile> {
        match mode {
            DegradationMode::Gradual => Some(&self.gradual),
            DegradationMode::Rapid => Some(&self.rapid),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationSample {
    pub sample_id: usize,
    pub mode: DegradationMode,
    pub laser: LaserParams,
    pub coefficients: DegradationCoefficients,
    /// Time at which the fault begins; `None` for normal operation.
    pub onset_hours: Option<f64>,
    /// Step height of a sudden failure, mA.
    pub jump_ma: Option<f64>,
    pub times: Vec<f64>,
    pub series: Vec<f64>,
}

impl DegradationSample {
    pub fn horizon_hours(&self) -> f64 {
        match self.times.as_slice() {
            [] => 0.0,
            [_] => 0.0,
            [first, second, ..] => (second - first) * self.times.len() as f64,
        }
    }
}

/// One trajectory for `mode`. Draws the onset time (and, for sudden
/// failures, the jump height) and the observation noise from `rng`.
pub fn generate_trajectory<R: Rng + ?Sized>(
    mode: DegradationMode,
    laser: &LaserParams,
    coeffs: &DegradationCoefficients,
    config: &GenerationConfig,
    rng: &mut R,
) -> Result<DegradationSample> {
    laser.validate()?;
    let grid = config.grid(mode);
    let times = grid.times();
    let i0 = laser.threshold_current_ma;
    let horizon = grid.horizon_hours;

    let (mut series, onset_hours, jump_ma) = match mode {
        DegradationMode::Normal => (vec![i0; times.len()], None, None),
        DegradationMode::Gradual | DegradationMode::Rapid => {
            let profile = config.growth_profile(mode).expect("growth modes have a growth profile");
            let k = compute_rate_k(laser, coeffs)?;
            let onset = profile.onset_fraction.sample(rng) * horizon;
            let series = times
                .iter()
                .map(|&t| {
                    if t < onset {
                        Ok(i0)
                    } else {
                        current_at(t - onset, i0, coeffs.beta_ma, k)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            (series, Some(onset), None)
        }
        DegradationMode::Sudden => {
            let onset = config.sudden.onset_fraction.sample(rng) * horizon;
            if onset >= horizon {
                return Err(Error::Generation(format!(
                    "sudden onset {onset} h is not before the horizon {horizon} h"
                )));
            }
            let jump = config.sudden.jump_fraction.sample("jump_fraction", rng)? * i0;
            let series = times.iter().map(|&t| if t < onset { i0 } else { i0 + jump }).collect();
            (series, Some(onset), Some(jump))
        }
    };

    let sigma = config.observation_noise_fraction * i0;
    if sigma > 0.0 {
        let noise = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
        for value in series.iter_mut() {
            *value += noise.sample(rng);
        }
    }
    for value in series.iter_mut() {
        *value = value.max(0.0);
    }

    Ok(DegradationSample {
        sample_id: 0,
        mode,
        laser: *laser,
        coefficients: *coeffs,
        onset_hours,
        jump_ma,
        times,
        series,
    })
}

/// Draws the laser, the coefficients and the trajectory of one sample from
/// its own substream.
pub fn generate_sample(
    config: &GenerationConfig,
    mode: DegradationMode,
    sample_id: usize,
) -> Result<DegradationSample> {
    let mut rng = seeds::substream(config.rng_seed, sample_id as u64);
    let laser = config.laser_pool[rng.gen_range(0..config.laser_pool.len())];
    let coeffs = match config.growth_profile(mode) {
        Some(profile) => profile.draw_coefficients(&laser, &mut rng)?,
        None => DegradationCoefficients::NONE,
    };
    let mut sample = generate_trajectory(mode, &laser, &coeffs, config, &mut rng)?;
    sample.sample_id = sample_id;
    Ok(sample)
}

/// `samples_per_mode` samples of every mode, ordered by mode then index.
pub fn generate_dataset(config: &GenerationConfig) -> Result<Vec<DegradationSample>> {
    config.validate()?;
    let mut samples = Vec::with_capacity(config.samples_per_mode * DegradationMode::ALL.len());
    for mode in DegradationMode::ALL {
        for i in 0..config.samples_per_mode {
            let sample_id = mode.index() * config.samples_per_mode + i;
            samples.push(generate_sample(config, mode, sample_id)?);
        }
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::substream;

    fn laser(p: f64, i0: f64, t: f64) -> LaserParams {
        LaserParams::new(p, i0, t, 1550.0).unwrap()
    }

    fn coeffs(beta: f64, n: f64, mu0: f64, ea: f64) -> DegradationCoefficients {
        DegradationCoefficients {
            beta_ma: beta,
            derating_exponent: n,
            scale_parameter: mu0,
            activation_energy_ev: ea,
        }
    }

    fn quiet_config() -> GenerationConfig {
        let mut config = GenerationConfig::default();
        config.observation_noise_fraction = 0.0;
        config.gradual.onset_fraction = UniformRange::new(0.0, 0.0);
        config.rapid.onset_fraction = UniformRange::new(0.0, 0.0);
        config
    }

    #[test]
    fn rate_collapses_to_one() {
        let k = compute_rate_k(&laser(1.0, 20.0, 300.0), &coeffs(0.5, 3.0, 0.0, 0.0)).unwrap();
        assert_eq!(k, 1.0);
    }

    #[test]
    fn rate_keeps_derating_factor() {
        let k = compute_rate_k(&laser(2.0, 20.0, 300.0), &coeffs(0.5, 1.0, 0.0, 0.0)).unwrap();
        assert_eq!(k, 2.0);
    }

    #[test]
    fn rate_arrhenius_value() {
        // exponent = -0.025852 / (8.617333262e-5 * 300) = -1.0000 to four decimals
        let k = compute_rate_k(&laser(1.0, 20.0, 300.0), &coeffs(0.5, 0.0, 0.0, 0.025852)).unwrap();
        let expected = (-0.025852f64 / (8.617333262e-5 * 300.0)).exp();
        assert!((k - expected).abs() < 1e-15);
        assert!((k - 0.36788).abs() < 5e-5);
    }

    #[test]
    fn rate_overflow_names_scale_parameter() {
        let err = compute_rate_k(&laser(1.0, 20.0, 300.0), &coeffs(0.5, 1.0, 1000.0, 0.0)).unwrap_err();
        match err {
            Error::Domain { parameter, .. } => assert_eq!(parameter, "scale_parameter"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rate_rejects_invalid_inputs() {
        assert!(compute_rate_k(&laser(1.0, 20.0, 300.0), &coeffs(-1.0, 1.0, 0.0, 0.0)).is_err());
        assert!(compute_rate_k(&laser(1.0, 20.0, 300.0), &coeffs(1.0, 1.0, 0.0, -0.1)).is_err());
        assert!(LaserParams::new(0.0, 20.0, 300.0, 1550.0).is_err());
    }

    #[test]
    fn current_examples() {
        assert_eq!(current_at(0.0, 20.0, 0.5, 0.3).unwrap(), 20.5);
        assert_eq!(current_at(123.0, 20.0, 0.0, 0.3).unwrap(), 20.0);
        let value = current_at(100.0, 20.0, 0.5, 0.01).unwrap();
        assert!((value - 21.35914).abs() < 1e-5, "{value}");
        assert!((value - (20.0 + 0.5 * std::f64::consts::E)).abs() < 1e-12);
    }

    #[test]
    fn current_errors() {
        assert!(matches!(current_at(-1.0, 20.0, 0.5, 0.1), Err(Error::Argument(_))));
        assert!(matches!(current_at(1e6, 20.0, 0.5, 1.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn arrhenius_rate_increases_with_temperature() {
        let c = coeffs(0.5, 0.3, -1.0, 0.4);
        let mut previous = 0.0;
        for t in [250.0, 280.0, 300.0, 330.0, 370.0] {
            let k = compute_rate_k(&laser(10.0, 20.0, t), &c).unwrap();
            assert!(k > previous);
            previous = k;
        }
    }

    #[test]
    fn noiseless_normal_is_flat() {
        let config = quiet_config();
        let l = laser(10.0, 20.0, 300.0);
        let s = generate_trajectory(
            DegradationMode::Normal,
            &l,
            &DegradationCoefficients::NONE,
            &config,
            &mut substream(1, 0),
        )
        .unwrap();
        assert_eq!(s.series.len(), 1000);
        assert!(s.series.iter().all(|&v| v == 20.0));
        assert_eq!(s.onset_hours, None);
    }

    #[test]
    fn noiseless_sudden_is_a_step() {
        let mut config = quiet_config();
        config.sudden.grid = TimeGrid {
            horizon_hours: 100.0,
            sample_interval_hours: 1.0,
        };
        config.sudden.onset_fraction = UniformRange::new(0.5, 0.5);
        config.sudden.jump_fraction = NormalDistribution::fixed(0.5);
        let l = laser(10.0, 20.0, 300.0);
        let s = generate_trajectory(
            DegradationMode::Sudden,
            &l,
            &DegradationCoefficients::NONE,
            &config,
            &mut substream(1, 0),
        )
        .unwrap();
        for (t, v) in s.times.iter().zip(&s.series) {
            if *t < 50.0 {
                assert_eq!(*v, 20.0);
            } else {
                assert_eq!(*v, 30.0);
            }
        }
        assert_eq!(s.onset_hours, Some(50.0));
        assert_eq!(s.jump_ma, Some(10.0));
    }

    #[test]
    fn noiseless_rapid_matches_growth_law() {
        let config = quiet_config();
        let l = laser(20.0, 15.0, 308.15);
        let c = coeffs(2.0, 0.2, -2.16, 0.05);
        let s = generate_trajectory(DegradationMode::Rapid, &l, &c, &config, &mut substream(3, 9)).unwrap();
        let k = 20f64.powf(0.2) * (-2.16f64 - 0.05 / (8.617333262e-5 * 308.15)).exp();
        for (t, v) in s.times.iter().zip(&s.series) {
            let expected = 15.0 + 2.0 * (k * t).exp();
            assert!(((v - expected) / expected).abs() < 1e-12);
        }
        assert!(s.series.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn delayed_onset_is_flat_then_growing() {
        let mut config = quiet_config();
        config.gradual.onset_fraction = UniformRange::new(0.3, 0.3);
        let l = laser(20.0, 15.0, 308.15);
        let c = coeffs(1.0, 0.2, -4.57, 0.05);
        let s = generate_trajectory(DegradationMode::Gradual, &l, &c, &config, &mut substream(3, 9)).unwrap();
        assert_eq!(s.onset_hours, Some(300.0));
        assert!(s.series[..300].iter().all(|&v| v == 15.0));
        assert_eq!(s.series[300], 16.0);
        assert!(s.series[300..].windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn dataset_counts_and_determinism() {
        let mut config = GenerationConfig::default();
        config.samples_per_mode = 1;
        let data = generate_dataset(&config).unwrap();
        assert_eq!(data.len(), 4);
        for (mode, sample) in DegradationMode::ALL.iter().zip(&data) {
            assert_eq!(sample.mode, *mode);
        }
        config.samples_per_mode = 3;
        let a = generate_dataset(&config).unwrap();
        let b = generate_dataset(&config).unwrap();
        assert_eq!(a, b);
        for mode in DegradationMode::ALL {
            assert_eq!(a.iter().filter(|s| s.mode == mode).count(), 3);
        }
        assert!(a.iter().all(|s| s.series.iter().all(|&v| v >= 0.0)));
    }

    #[test]
    fn empty_pool_is_rejected() {
        let mut config = GenerationConfig::default();
        config.laser_pool.clear();
        assert!(matches!(generate_dataset(&config), Err(Error::Config(_))));
    }

    #[test]
    fn truncated_draw_gives_up_after_budget() {
        let dist = NormalDistribution::new(-10.0, 0.1).at_least(0.0);
        let err = dist.sample("beta", &mut substream(0, 0)).unwrap_err();
        assert!(matches!(err, Error::Generation(_)));
    }
}
