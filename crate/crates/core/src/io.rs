//! Dataset and split persistence.
//!
//! Both use a long CSV (one row per time step) plus a JSON sidecar holding
//! what the columns cannot: generation settings and per-sample provenance
//! for the dataset; scaler, split seed and mutation records for the splits.
//! Every file is written to a temporary sibling and renamed into place.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::degradation::{DegradationCoefficients, DegradationSample, GenerationConfig, LaserParams};
use crate::error::{Error, Result};
use crate::mode::DegradationMode;
use crate::pipeline::{MutationRecord, PartialFailureSpec, RawWindow, Scaler, SplitDataset, SplitFractions, SplitName};

pub const FORMAT_VERSION: u32 = 1;
pub const DATASET_CSV: &str = "dataset.csv";
pub const DATASET_SIDECAR: &str = "dataset.json";
pub const SPLITS_CSV: &str = "splits.csv";
pub const SPLITS_SIDECAR: &str = "splits.json";

/// Writes through `body` into a temporary file next to `path`, then renames.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, |w| w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e)))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| serde_json::to_writer_pretty(w, value).map_err(Error::from))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn format_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SeriesRow {
    sample_id: usize,
    mode_code: u8,
    #[serde(rename = "P_mW")]
    power_mw: f64,
    #[serde(rename = "I0_mA")]
    threshold_ma: f64,
    #[serde(rename = "T_K")]
    temperature_k: f64,
    lambda_nm: f64,
    t_hours: f64,
    #[serde(rename = "current_mA")]
    current_ma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SplitRow {
    sample_id: usize,
    mode_code: u8,
    #[serde(rename = "P_mW")]
    power_mw: f64,
    #[serde(rename = "I0_mA")]
    threshold_ma: f64,
    #[serde(rename = "T_K")]
    temperature_k: f64,
    lambda_nm: f64,
    t_hours: f64,
    #[serde(rename = "current_mA")]
    current_ma: f64,
    split_assignment: String,
    mutated: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleProvenance {
    pub sample_id: usize,
    pub mode: DegradationMode,
    pub coefficients: DegradationCoefficients,
    pub onset_hours: Option<f64>,
    pub jump_ma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub format_version: u32,
    pub master_seed: u64,
    pub generation: GenerationConfig,
    pub samples: Vec<SampleProvenance>,
}

pub fn dataset_paths(dir: &Path) -> (PathBuf, PathBuf) {
    (dir.join(DATASET_CSV), dir.join(DATASET_SIDECAR))
}

pub fn write_dataset(
    dir: &Path,
    samples: &[DegradationSample],
    generation: &GenerationConfig,
    master_seed: u64,
) -> Result<()> {
    let (csv_path, json_path) = dataset_paths(dir);
    write_atomic(&csv_path, |w| {
        let mut out = csv::Writer::from_writer(w);
        for s in samples {
            for (t, c) in s.times.iter().zip(&s.series) {
                out.serialize(SeriesRow {
                    sample_id: s.sample_id,
                    mode_code: s.mode.code(),
                    power_mw: s.laser.optical_power_mw,
                    threshold_ma: s.laser.threshold_current_ma,
                    temperature_k: s.laser.temperature_k,
                    lambda_nm: s.laser.wavelength_nm,
                    t_hours: *t,
                    current_ma: *c,
                })?;
            }
        }
        out.flush().map_err(|e| Error::io(&csv_path, e))
    })?;
    let sidecar = DatasetSidecar {
        format_version: FORMAT_VERSION,
        master_seed,
        generation: generation.clone(),
        samples: samples
            .iter()
            .map(|s| SampleProvenance {
                sample_id: s.sample_id,
                mode: s.mode,
                coefficients: s.coefficients,
                onset_hours: s.onset_hours,
                jump_ma: s.jump_ma,
            })
            .collect(),
    };
    write_json(&json_path, &sidecar)
}

/// Rows grouped by consecutive `sample_id`.
fn grouped<R: for<'de> Deserialize<'de>>(path: &Path, id: impl Fn(&R) -> usize) -> Result<Vec<Vec<R>>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(std::io::BufReader::new(file));
    let mut groups: Vec<Vec<R>> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for row in reader.deserialize::<R>() {
        let row = row.map_err(|e| format_error(path, e.to_string()))?;
        let sid = id(&row);
        match groups.last_mut() {
            Some(g) if id(&g[0]) == sid => g.push(row),
            _ => {
                if !seen.insert(sid) {
                    return Err(format_error(path, format!("rows of sample {sid} are not contiguous")));
                }
                groups.push(vec![row]);
            }
        }
    }
    if groups.is_empty() {
        return Err(format_error(path, "no samples found"));
    }
    Ok(groups)
}

fn laser_of(path: &Path, sid: usize, p: f64, i0: f64, t: f64, l: f64) -> Result<LaserParams> {
    LaserParams::new(p, i0, t, l).map_err(|e| format_error(path, format!("sample {sid}: {e}")))
}

pub fn read_dataset(dir: &Path) -> Result<(Vec<DegradationSample>, DatasetSidecar)> {
    let (csv_path, json_path) = dataset_paths(dir);
    let sidecar: DatasetSidecar = read_json(&json_path)?;
    if sidecar.format_version != FORMAT_VERSION {
        return Err(format_error(
            &json_path,
            format!("format version {} is not supported", sidecar.format_version),
        ));
    }
    let provenance: HashMap<usize, &SampleProvenance> = sidecar.samples.iter().map(|p| (p.sample_id, p)).collect();
    let groups = grouped::<SeriesRow>(&csv_path, |r| r.sample_id)?;
    let mut samples = Vec::with_capacity(groups.len());
    for rows in groups {
        let first = &rows[0];
        let sid = first.sample_id;
        let mode = DegradationMode::from_code(first.mode_code).map_err(|e| format_error(&csv_path, e.to_string()))?;
        let prov = provenance
            .get(&sid)
            .ok_or_else(|| format_error(&json_path, format!("no provenance for sample {sid}")))?;
        if prov.mode != mode {
            return Err(format_error(
                &json_path,
                format!("sample {sid} mode disagrees with the CSV"),
            ));
        }
        samples.push(DegradationSample {
            sample_id: sid,
            mode,
            laser: laser_of(
                &csv_path,
                sid,
                first.power_mw,
                first.threshold_ma,
                first.temperature_k,
                first.lambda_nm,
            )?,
            coefficients: prov.coefficients,
            onset_hours: prov.onset_hours,
            jump_ma: prov.jump_ma,
            times: rows.iter().map(|r| r.t_hours).collect(),
            series: rows.iter().map(|r| r.current_ma).collect(),
        });
    }
    Ok((samples, sidecar))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowProvenance {
    pub sample_id: usize,
    pub split: SplitName,
    pub fault_onset_step: Option<usize>,
    pub mutation: Option<MutationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSidecar {
    pub format_version: u32,
    pub master_seed: u64,
    pub split_seed: u64,
    pub fractions: SplitFractions,
    pub partial_failure: PartialFailureSpec,
    pub scaler: Scaler,
    pub windows: Vec<WindowProvenance>,
}

pub fn splits_paths(dir: &Path) -> (PathBuf, PathBuf) {
    (dir.join(SPLITS_CSV), dir.join(SPLITS_SIDECAR))
}

const SPLIT_ORDER: [SplitName; 3] = [SplitName::Train, SplitName::Val, SplitName::Test];

pub fn write_splits(
    dir: &Path,
    split: &SplitDataset,
    fractions: SplitFractions,
    partial: &PartialFailureSpec,
    master_seed: u64,
) -> Result<()> {
    let (csv_path, json_path) = splits_paths(dir);
    write_atomic(&csv_path, |w| {
        let mut out = csv::Writer::from_writer(w);
        for name in SPLIT_ORDER {
            for win in split.part(name) {
                for (t, c) in win.times.iter().zip(&win.currents) {
                    out.serialize(SplitRow {
                        sample_id: win.sample_id,
                        mode_code: win.label.code(),
                        power_mw: win.laser.optical_power_mw,
                        threshold_ma: win.laser.threshold_current_ma,
                        temperature_k: win.laser.temperature_k,
                        lambda_nm: win.laser.wavelength_nm,
                        t_hours: *t,
                        current_ma: *c,
                        split_assignment: name.as_str().to_string(),
                        mutated: u8::from(win.mutation.is_some()),
                    })?;
                }
            }
        }
        out.flush().map_err(|e| Error::io(&csv_path, e))
    })?;
    let sidecar = SplitSidecar {
        format_version: FORMAT_VERSION,
        master_seed,
        split_seed: split.split_seed,
        fractions,
        partial_failure: *partial,
        scaler: split.scaler.clone(),
        windows: SPLIT_ORDER
            .iter()
            .flat_map(|&name| {
                split.part(name).iter().map(move |w| WindowProvenance {
                    sample_id: w.sample_id,
                    split: name,
                    fault_onset_step: w.fault_onset_step,
                    mutation: w.mutation,
                })
            })
            .collect(),
    };
    write_json(&json_path, &sidecar)
}

pub fn read_splits(dir: &Path) -> Result<(SplitDataset, SplitSidecar)> {
    let (csv_path, json_path) = splits_paths(dir);
    let sidecar: SplitSidecar = read_json(&json_path)?;
    if sidecar.format_version != FORMAT_VERSION {
        return Err(format_error(
            &json_path,
            format!("format version {} is not supported", sidecar.format_version),
        ));
    }
    let provenance: HashMap<usize, &WindowProvenance> = sidecar.windows.iter().map(|w| (w.sample_id, w)).collect();
    let groups = grouped::<SplitRow>(&csv_path, |r| r.sample_id)?;
    let mut parts: [Vec<RawWindow>; 3] = Default::default();
    for rows in groups {
        let first = &rows[0];
        let sid = first.sample_id;
        let name = SplitName::parse(&first.split_assignment)
            .ok_or_else(|| format_error(&csv_path, format!("bad split_assignment '{}'", first.split_assignment)))?;
        let prov = provenance
            .get(&sid)
            .ok_or_else(|| format_error(&json_path, format!("no provenance for window {sid}")))?;
        if prov.split != name || prov.mutation.is_some() != (first.mutated == 1) {
            return Err(format_error(&json_path, format!("window {sid} disagrees with the CSV")));
        }
        let window = RawWindow {
            sample_id: sid,
            label: DegradationMode::from_code(first.mode_code).map_err(|e| format_error(&csv_path, e.to_string()))?,
            laser: laser_of(
                &csv_path,
                sid,
                first.power_mw,
                first.threshold_ma,
                first.temperature_k,
                first.lambda_nm,
            )?,
            times: rows.iter().map(|r| r.t_hours).collect(),
            currents: rows.iter().map(|r| r.current_ma).collect(),
            fault_onset_step: prov.fault_onset_step,
            mutation: prov.mutation,
        };
        let slot = SPLIT_ORDER.iter().position(|&n| n == name).expect("known split");
        parts[slot].push(window);
    }
    let [train, validation, test] = parts;
    let split = SplitDataset {
        train,
        validation,
        test,
        scaler: sidecar.scaler.clone(),
        split_seed: sidecar.split_seed,
    };
    Ok((split, sidecar))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degradation::generate_dataset;
    use crate::pipeline::preprocess;

    fn small_config() -> GenerationConfig {
        GenerationConfig {
            samples_per_mode: 10,
            ..GenerationConfig::default()
        }
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = small_config();
        let samples = generate_dataset(&g).unwrap();
        write_dataset(dir.path(), &samples, &g, 5).unwrap();
        let (back, sidecar) = read_dataset(dir.path()).unwrap();
        assert_eq!(back, samples);
        assert_eq!(sidecar.generation, g);
        let text = fs::read_to_string(dir.path().join(DATASET_CSV)).unwrap();
        assert!(text.starts_with("sample_id,mode_code,P_mW,I0_mA,T_K,lambda_nm,t_hours,current_mA\n"));
    }

    #[test]
    fn splits_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = small_config();
        let samples = generate_dataset(&g).unwrap();
        let partial = PartialFailureSpec::default();
        let split = preprocess(&samples, &g, SplitFractions::default(), 3, &partial).unwrap();
        write_splits(dir.path(), &split, SplitFractions::default(), &partial, 1).unwrap();
        let (back, _) = read_splits(dir.path()).unwrap();
        assert_eq!(back, split);
    }

    #[test]
    fn missing_dataset_names_path() {
        let dir = tempfile::tempdir().unwrap();
        match read_dataset(dir.path()) {
            Err(Error::Io { path, .. }) => assert!(path.ends_with(DATASET_SIDECAR)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_csv_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let g = small_config();
        write_dataset(dir.path(), &[], &g, 0).unwrap();
        assert!(matches!(read_dataset(dir.path()), Err(Error::Format { .. })));
    }
}
