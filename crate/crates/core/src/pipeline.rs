//! Windowing, scaling, stratified splitting and partial-failure mutation.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::degradation::{
    generate_trajectory, DegradationCoefficients, DegradationSample, GenerationConfig, LaserParams, UniformRange,
};
use crate::error::{Error, Result};
use crate::mode::{DegradationMode, NUM_CLASSES};
use crate::seeds;

pub const WINDOW_LEN: usize = 100;
pub const NUM_CHANNELS: usize = 5;
pub const CHANNEL_NAMES: [&str; NUM_CHANNELS] = [
    "current_ma",
    "threshold_current_ma",
    "temperature_k",
    "optical_power_mw",
    "wavelength_nm",
];

/// Margin applied when scaling data the scaler was not fitted on.
pub const CLAMP_LOW: f64 = -0.5;
pub const CLAMP_HIGH: f64 = 1.5;

/// Fixed-length series: block means when compressing, repetition when
/// stretching.
pub fn compress_to_window(series: &[f64], target_len: usize) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(Error::Argument("cannot window an empty series".into()));
    }
    if target_len == 0 {
        return Err(Error::Argument("target length must be >= 1".into()));
    }
    let n = series.len();
    if n == target_len {
        return Ok(series.to_vec());
    }
    if n > target_len {
        // block i covers [floor(i*n/L), floor((i+1)*n/L)); sizes differ by at most one
        return Ok((0..target_len)
            .map(|i| {
                let start = i * n / target_len;
                let end = (i + 1) * n / target_len;
                series[start..end].iter().sum::<f64>() / (end - start) as f64
            })
            .collect());
    }
    let repeat = target_len.div_ceil(n);
    Ok(series
        .iter()
        .flat_map(|&v| std::iter::repeat_n(v, repeat))
        .take(target_len)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutationRecord {
    pub fault_fraction: f64,
    pub normal_steps: usize,
    /// First window step of the original fault window that was kept.
    pub fault_start: usize,
}

/// A 100-step window in physical units, before scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawWindow {
    pub sample_id: usize,
    pub label: DegradationMode,
    pub laser: LaserParams,
    pub times: Vec<f64>,
    pub currents: Vec<f64>,
    /// Window step at which the fault begins.
    pub fault_onset_step: Option<usize>,
    pub mutation: Option<MutationRecord>,
}

impl RawWindow {
    pub fn from_sample(sample: &DegradationSample) -> Result<Self> {
        let currents = compress_to_window(&sample.series, WINDOW_LEN)?;
        let times = compress_to_window(&sample.times, WINDOW_LEN)?;
        let horizon = sample.horizon_hours();
        let fault_onset_step = match (sample.mode.is_fault(), sample.onset_hours) {
            (false, _) => None,
            (true, Some(onset)) if horizon > 0.0 => {
                Some(((onset / horizon * WINDOW_LEN as f64).floor() as usize).min(WINDOW_LEN - 1))
            }
            (true, _) => Some(0),
        };
        Ok(RawWindow {
            sample_id: sample.sample_id,
            label: sample.mode,
            laser: sample.laser,
            times,
            currents,
            fault_onset_step,
            mutation: None,
        })
    }

    fn channel_value(&self, channel: usize, step: usize) -> f64 {
        match channel {
            0 => self.currents[step],
            1 => self.laser.threshold_current_ma,
            2 => self.laser.temperature_k,
            3 => self.laser.optical_power_mw,
            _ => self.laser.wavelength_nm,
        }
    }
}

/// Scaled model input: `WINDOW_LEN` steps by `NUM_CHANNELS` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSample {
    pub sample_id: usize,
    pub label: DegradationMode,
    pub features: Array2<f64>,
}

/// Per-channel min-max scaler fitted on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub min: [f64; NUM_CHANNELS],
    pub max: [f64; NUM_CHANNELS],
}

impl Scaler {
    pub fn fit(train: &[RawWindow]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Argument("cannot fit a scaler on an empty training set".into()));
        }
        let mut min = [f64::INFINITY; NUM_CHANNELS];
        let mut max = [f64::NEG_INFINITY; NUM_CHANNELS];
        for window in train {
            for channel in 0..NUM_CHANNELS {
                let steps = if channel == 0 { window.currents.len() } else { 1 };
                for step in 0..steps {
                    let v = window.channel_value(channel, step);
                    min[channel] = min[channel].min(v);
                    max[channel] = max[channel].max(v);
                }
            }
        }
        Ok(Scaler { min, max })
    }

    /// Constant channels map to 0.5; `clamp` bounds the result to the
    /// out-of-sample margin.
    pub fn scale_value(&self, channel: usize, value: f64, clamp: bool) -> f64 {
        let (lo, hi) = (self.min[channel], self.max[channel]);
        if !(hi > lo) {
            return 0.5;
        }
        let scaled = (value - lo) / (hi - lo);
        if clamp {
            scaled.clamp(CLAMP_LOW, CLAMP_HIGH)
        } else {
            scaled
        }
    }

    pub fn transform(&self, window: &RawWindow, clamp: bool) -> Result<WindowedSample> {
        if window.currents.len() != WINDOW_LEN {
            return Err(Error::Argument(format!(
                "window {} has {} steps, expected {WINDOW_LEN}",
                window.sample_id,
                window.currents.len()
            )));
        }
        let mut features = Array2::zeros((WINDOW_LEN, NUM_CHANNELS));
        for channel in 0..NUM_CHANNELS {
            if channel == 0 {
                for step in 0..WINDOW_LEN {
                    features[[step, 0]] = self.scale_value(0, window.currents[step], clamp);
                }
            } else {
                let v = self.scale_value(channel, window.channel_value(channel, 0), clamp);
                features.column_mut(channel).fill(v);
            }
        }
        Ok(WindowedSample {
            sample_id: window.sample_id,
            label: window.label,
            features,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.6,
            validation: 0.2,
            test: 0.2,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
            return Err(Error::Config("split fractions must be >= 0".into()));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("split fractions must sum to 1".into()));
        }
        Ok(())
    }

    /// (train, validation, test) counts for a class of `n` samples.
    pub fn counts(&self, n: usize) -> (usize, usize, usize) {
        let train = ((n as f64 * self.train).round() as usize).min(n);
        let validation = ((n as f64 * self.validation).round() as usize).min(n - train);
        (train, validation, n - train - validation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Val,
    Test,
}

impl SplitName {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Val => "val",
            SplitName::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(SplitName::Train),
            "val" => Some(SplitName::Val),
            "test" => Some(SplitName::Test),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: Vec<RawWindow>,
    pub validation: Vec<RawWindow>,
    pub test: Vec<RawWindow>,
    pub scaler: Scaler,
    pub split_seed: u64,
}

impl SplitDataset {
    pub fn part(&self, name: SplitName) -> &[RawWindow] {
        match name {
            SplitName::Train => &self.train,
            SplitName::Val => &self.validation,
            SplitName::Test => &self.test,
        }
    }

    pub fn scaled(&self, name: SplitName) -> Result<Vec<WindowedSample>> {
        let clamp = name != SplitName::Train;
        self.part(name)
            .iter()
            .map(|w| self.scaler.transform(w, clamp))
            .collect()
    }
}

/// Minimum number of samples per class accepted by [`split_dataset`].
pub const MIN_PER_CLASS: usize = 5;

/// Seeded stratified partition; each part is ordered by sample id.
pub fn split_dataset(windows: Vec<RawWindow>, fractions: SplitFractions, seed: u64) -> Result<SplitDataset> {
    fractions.validate()?;
    let mut by_class: Vec<Vec<RawWindow>> = vec![Vec::new(); NUM_CLASSES];
    for window in windows {
        by_class[window.label.index()].push(window);
    }
    let mut train = Vec::new();
    let mut validation = Vec::new();
    let mut test = Vec::new();
    for (class, mut members) in by_class.into_iter().enumerate() {
        if members.len() < MIN_PER_CLASS {
            return Err(Error::Argument(format!(
                "class {} has {} samples, need at least {MIN_PER_CLASS}",
                DegradationMode::ALL[class],
                members.len()
            )));
        }
        members.sort_by_key(|w| w.sample_id);
        members.shuffle(&mut seeds::substream(seed, class as u64));
        let (n_train, n_val, _) = fractions.counts(members.len());
        let rest = members.split_off(n_train);
        train.extend(members);
        let mut rest = rest;
        let tail = rest.split_off(n_val);
        validation.extend(rest);
        test.extend(tail);
    }
    for part in [&mut train, &mut validation, &mut test] {
        part.sort_by_key(|w| w.sample_id);
    }
    let scaler = Scaler::fit(&train)?;
    Ok(SplitDataset {
        train,
        validation,
        test,
        scaler,
        split_seed: seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PartialFailureSpec {
    pub fault_fraction_range: UniformRange,
    pub rng_seed: u64,
}

impl Default for PartialFailureSpec {
    fn default() -> Self {
        PartialFailureSpec {
            fault_fraction_range: UniformRange::new(0.20, 0.40),
            rng_seed: 0,
        }
    }
}

impl PartialFailureSpec {
    pub fn validate(&self) -> Result<()> {
        let r = self.fault_fraction_range;
        if !(r.low > 0.0 && r.low <= r.high && r.high < 1.0) {
            return Err(Error::Config(
                "fault_fraction_range must satisfy 0 < low <= high < 1".into(),
            ));
        }
        Ok(())
    }
}

/// Supplies normal-operation windows used as the prefix of a mutated window.
pub trait NormalSource {
    fn normal_window(&self, laser: &LaserParams, rng: &mut dyn RngCore) -> Result<Vec<f64>>;
}

/// Draws a fresh noisy normal trajectory from the generator and windows it.
pub struct GeneratedNormalSource<'a> {
    pub config: &'a GenerationConfig,
}

impl NormalSource for GeneratedNormalSource<'_> {
    fn normal_window(&self, laser: &LaserParams, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let sample = generate_trajectory(
            DegradationMode::Normal,
            laser,
            &DegradationCoefficients::NONE,
            self.config,
            rng,
        )?;
        compress_to_window(&sample.series, WINDOW_LEN)
    }
}

/// Normal prefix followed by the first `fault_fraction` of the fault,
/// counted from the window step where the fault begins.
pub fn splice_partial_failure(window: &RawWindow, fault_fraction: f64, normal: &[f64]) -> Result<RawWindow> {
    if !window.label.is_fault() {
        return Ok(window.clone());
    }
    if normal.len() != WINDOW_LEN || window.currents.len() != WINDOW_LEN {
        return Err(Error::Argument(
            "partial-failure splicing needs 100-step windows".into(),
        ));
    }
    if !(fault_fraction > 0.0 && fault_fraction < 1.0) {
        return Err(Error::Argument(format!(
            "fault fraction {fault_fraction} outside (0, 1)"
        )));
    }
    let normal_steps = ((1.0 - fault_fraction) * WINDOW_LEN as f64).floor() as usize;
    let fault_steps = WINDOW_LEN - normal_steps;
    let onset = window.fault_onset_step.unwrap_or(0);
    let fault_start = onset.min(WINDOW_LEN - fault_steps);

    let mut currents = Vec::with_capacity(WINDOW_LEN);
    currents.extend_from_slice(&normal[..normal_steps]);
    currents.extend_from_slice(&window.currents[fault_start..fault_start + fault_steps]);

    Ok(RawWindow {
        currents,
        fault_onset_step: Some(normal_steps),
        mutation: Some(MutationRecord {
            fault_fraction,
            normal_steps,
            fault_start,
        }),
        ..window.clone()
    })
}

/// Normal windows pass through untouched.
pub fn mutate_to_partial_failure(
    window: &RawWindow,
    spec: &PartialFailureSpec,
    source: &dyn NormalSource,
    rng: &mut dyn RngCore,
) -> Result<RawWindow> {
    if !window.label.is_fault() {
        return Ok(window.clone());
    }
    let r = spec.fault_fraction_range;
    let fraction = if r.low == r.high {
        r.low
    } else {
        rng.gen_range(r.low..=r.high)
    };
    let normal = source.normal_window(&window.laser, rng)?;
    splice_partial_failure(window, fraction, &normal)
}

/// Mutates every fault window of the test split, each from its own substream.
pub fn mutate_test_split(split: &mut SplitDataset, spec: &PartialFailureSpec, source: &dyn NormalSource) -> Result<()> {
    spec.validate()?;
    for window in split.test.iter_mut() {
        let mut rng = seeds::substream(spec.rng_seed, window.sample_id as u64);
        *window = mutate_to_partial_failure(window, spec, source, &mut rng)?;
    }
    Ok(())
}

/// Windows, splits and mutates a generated dataset.
pub fn preprocess(
    samples: &[DegradationSample],
    generation: &GenerationConfig,
    fractions: SplitFractions,
    split_seed: u64,
    partial: &PartialFailureSpec,
) -> Result<SplitDataset> {
    let windows = samples.iter().map(RawWindow::from_sample).collect::<Result<Vec<_>>>()?;
    let mut split = split_dataset(windows, fractions, split_seed)?;
    mutate_test_split(&mut split, partial, &GeneratedNormalSource { config: generation })?;
    Ok(split)
}
