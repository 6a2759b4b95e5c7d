//! On-disk dataset construction and loading.
//!
//! Layout: a directory with `manifest.txt` (key=value lines), `samples.f32`
//! (raw little-endian f32 sample data, concatenated), and `labels.u8` (one
//! byte per sample; 0 = SOI, 1 = CWI).
//!
//! KPM rows are produced by simulating the uplink with the jammer off/on and
//! sliding a window of `t` reports over each episode; the RAN operates
//! correctly during collection (fixed max MCS when clean, adaptive when
//! jammed), and every report passes through the same integer quantization
//! the wire uses, so training data matches what the closed loop stores.

use super::kpm::{gen_kpm_window, NormBounds};
use super::signal::synth_iq_frame;
use super::spectrogram::{iq_to_spectrogram, SPEC_SIZE};
use super::{JammerProfile, Label};
use crate::error::{Error, Result};
use crate::nn::Dataset;
use crate::ric::{ControlDecision, KpmReport};
use crate::rng::{derive_seed, rng_from_seed};
use crate::simnet::{LinkParams, LinkSim};
use crate::tensor::Tensor;
use rand::Rng as _;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

/// Paper-scale spectrogram count per class.
pub const PAPER_SPEC_PER_CLASS: usize = 5_000;
/// Paper-scale KPM row counts.
pub const PAPER_KPM_SOI: usize = 15_032;
pub const PAPER_KPM_CWI: usize = 10_254;

/// Desk-scale defaults preserving the paper's class-imbalance direction.
pub const DESK_SPEC_PER_CLASS: usize = 2_000;
pub const DESK_KPM_SOI: usize = 6_000;
pub const DESK_KPM_CWI: usize = 4_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Spectrogram,
    Kpm,
}

impl DatasetKind {
    fn as_str(self) -> &'static str {
        match self {
            DatasetKind::Spectrogram => "spectrogram",
            DatasetKind::Kpm => "kpm",
        }
    }

    fn from_str(s: &str) -> Result<DatasetKind> {
        match s {
            "spectrogram" => Ok(DatasetKind::Spectrogram),
            "kpm" => Ok(DatasetKind::Kpm),
            other => Err(Error::invalid(format!("unknown dataset kind {other}"))),
        }
    }
}

/// Generation request.
#[derive(Debug, Clone)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub soi_count: usize,
    pub cwi_count: usize,
    pub seed: u64,
    /// Stacked windows per KPM row (ignored for spectrograms).
    pub t: usize,
    /// KPM features per report.
    pub m: usize,
    pub bounds: NormBounds,
}

impl DatasetSpec {
    pub fn desk_spectrogram(seed: u64) -> DatasetSpec {
        DatasetSpec {
            kind: DatasetKind::Spectrogram,
            soi_count: DESK_SPEC_PER_CLASS,
            cwi_count: DESK_SPEC_PER_CLASS,
            seed,
            t: 1,
            m: 4,
            bounds: NormBounds::default(),
        }
    }

    pub fn desk_kpm(seed: u64, t: usize) -> DatasetSpec {
        DatasetSpec {
            kind: DatasetKind::Kpm,
            soi_count: DESK_KPM_SOI,
            cwi_count: DESK_KPM_CWI,
            seed,
            t,
            m: 4,
            bounds: NormBounds::default(),
        }
    }

    pub fn paper_spectrogram(seed: u64) -> DatasetSpec {
        DatasetSpec {
            soi_count: PAPER_SPEC_PER_CLASS,
            cwi_count: PAPER_SPEC_PER_CLASS,
            ..DatasetSpec::desk_spectrogram(seed)
        }
    }

    pub fn paper_kpm(seed: u64, t: usize) -> DatasetSpec {
        DatasetSpec {
            soi_count: PAPER_KPM_SOI,
            cwi_count: PAPER_KPM_CWI,
            ..DatasetSpec::desk_kpm(seed, t)
        }
    }

    fn sample_len(&self) -> usize {
        match self.kind {
            DatasetKind::Spectrogram => SPEC_SIZE * SPEC_SIZE,
            DatasetKind::Kpm => self.m * self.t,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.soi_count == 0 || self.cwi_count == 0 {
            return Err(Error::invalid("need at least one sample per class"));
        }
        if self.kind == DatasetKind::Kpm && (self.t == 0 || self.m == 0 || self.m > 4) {
            return Err(Error::invalid("kpm datasets need t >= 1 and 1 <= m <= 4"));
        }
        Ok(())
    }
}

/// What `manifest.txt` records.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub kind: DatasetKind,
    pub soi_count: usize,
    pub cwi_count: usize,
    pub seed: u64,
    pub t: usize,
    pub m: usize,
    pub sample_len: usize,
    pub bounds: NormBounds,
}

impl DatasetManifest {
    pub fn total(&self) -> usize {
        self.soi_count + self.cwi_count
    }

    fn to_text(&self) -> String {
        let b = &self.bounds;
        format!(
            "kind={}\nsoi_count={}\ncwi_count={}\nseed={}\nt={}\nm={}\nsample_len={}\n\
             byte_order=little_endian\nsample_format=f32\n\
             bounds.sinr_db={},{}\nbounds.bitrate_mbps={},{}\nbounds.bler={},{}\nbounds.mcs={},{}\n",
            self.kind.as_str(),
            self.soi_count,
            self.cwi_count,
            self.seed,
            self.t,
            self.m,
            self.sample_len,
            b.sinr_db.0, b.sinr_db.1,
            b.bitrate_mbps.0, b.bitrate_mbps.1,
            b.bler.0, b.bler.1,
            b.mcs.0, b.mcs.1,
        )
    }

    fn from_text(text: &str) -> Result<DatasetManifest> {
        let mut kv = std::collections::HashMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("bad manifest line: {line}")))?;
            kv.insert(k.to_string(), v.to_string());
        }
        let get = |k: &str| {
            kv.get(k).cloned().ok_or_else(|| Error::invalid(format!("manifest missing key {k}")))
        };
        let num = |k: &str| -> Result<usize> {
            get(k)?.parse().map_err(|_| Error::invalid(format!("bad numeric value for {k}")))
        };
        let pair = |k: &str| -> Result<(f64, f64)> {
            let raw = get(k)?;
            let (a, b) = raw
                .split_once(',')
                .ok_or_else(|| Error::invalid(format!("bad bounds value for {k}")))?;
            Ok((
                a.parse().map_err(|_| Error::invalid(format!("bad float in {k}")))?,
                b.parse().map_err(|_| Error::invalid(format!("bad float in {k}")))?,
            ))
        };
        Ok(DatasetManifest {
            kind: DatasetKind::from_str(&get("kind")?)?,
            soi_count: num("soi_count")?,
            cwi_count: num("cwi_count")?,
            seed: get("seed")?.parse().map_err(|_| Error::invalid("bad seed"))?,
            t: num("t")?,
            m: num("m")?,
            sample_len: num("sample_len")?,
            bounds: NormBounds {
                sinr_db: pair("bounds.sinr_db")?,
                bitrate_mbps: pair("bounds.bitrate_mbps")?,
                bler: pair("bounds.bler")?,
                mcs: pair("bounds.mcs")?,
            },
        })
    }
}

/// Generate a dataset into `dir`, writing samples, labels, and the manifest.
/// Deterministic: the same spec writes byte-identical files.
pub fn build_dataset(spec: &DatasetSpec, dir: &Path) -> Result<DatasetManifest> {
    spec.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let samples_path = dir.join("samples.f32");
    let labels_path = dir.join("labels.u8");
    let samples_file = std::fs::File::create(&samples_path)
        .map_err(|e| Error::io(samples_path.display().to_string(), e))?;
    let labels_file = std::fs::File::create(&labels_path)
        .map_err(|e| Error::io(labels_path.display().to_string(), e))?;
    let mut samples = BufWriter::new(samples_file);
    let mut labels = BufWriter::new(labels_file);

    match spec.kind {
        DatasetKind::Spectrogram => {
            write_spectrogram_rows(spec, &mut samples, &mut labels, &samples_path)?
        }
        DatasetKind::Kpm => write_kpm_rows(spec, &mut samples, &mut labels, &samples_path)?,
    }
    samples.flush().map_err(|e| Error::io(samples_path.display().to_string(), e))?;
    labels.flush().map_err(|e| Error::io(labels_path.display().to_string(), e))?;

    let manifest = DatasetManifest {
        kind: spec.kind,
        soi_count: spec.soi_count,
        cwi_count: spec.cwi_count,
        seed: spec.seed,
        t: spec.t,
        m: spec.m,
        sample_len: spec.sample_len(),
        bounds: spec.bounds,
    };
    let manifest_path = dir.join("manifest.txt");
    std::fs::write(&manifest_path, manifest.to_text())
        .map_err(|e| Error::io(manifest_path.display().to_string(), e))?;
    Ok(manifest)
}

fn write_spectrogram_rows(
    spec: &DatasetSpec,
    samples: &mut impl Write,
    labels: &mut impl Write,
    path: &Path,
) -> Result<()> {
    let io_err = |e| Error::io(path.display().to_string(), e);
    let mut gain_rng = rng_from_seed(derive_seed(spec.seed, "cwi-gains", 0));
    for i in 0..spec.soi_count + spec.cwi_count {
        let label = if i < spec.soi_count { Label::Soi } else { Label::Cwi };
        let jammer = match label {
            Label::Soi => JammerProfile::off(),
            Label::Cwi => JammerProfile::on(gain_rng.gen_range(30.0..=40.0))?,
        };
        let frame = synth_iq_frame(label, &jammer, derive_seed(spec.seed, "sample", i as u64))?;
        let image = iq_to_spectrogram(&frame);
        samples.write_all(&image.to_f32_bytes()).map_err(io_err)?;
        labels.write_all(&[label.class_index() as u8]).map_err(io_err)?;
    }
    Ok(())
}

fn write_kpm_rows(
    spec: &DatasetSpec,
    samples: &mut impl Write,
    labels: &mut impl Write,
    path: &Path,
) -> Result<()> {
    let io_err = |e| Error::io(path.display().to_string(), e);
    // windows per episode; episodes re-draw the jammer gain
    const EPISODE_ROWS: usize = 500;
    for (label, count) in [(Label::Soi, spec.soi_count), (Label::Cwi, spec.cwi_count)] {
        let mut produced = 0usize;
        let mut episode = 0u64;
        let mut gain_rng = rng_from_seed(derive_seed(spec.seed, "kpm-gains", label.class_index() as u64));
        while produced < count {
            let episode_target = EPISODE_ROWS.min(count - produced);
            let jammer = match label {
                Label::Soi => JammerProfile::off(),
                Label::Cwi => JammerProfile::on(gain_rng.gen_range(30.0..=40.0))?,
            };
            let mut link = LinkSim::new(
                LinkParams::default(),
                derive_seed(spec.seed, "kpm-episode", (label.class_index() as u64) << 32 | episode),
                1000,
                0u64.wrapping_sub(1) / 4,
            )?;
            link.set_jammer(jammer);
            // correct RAN operation during collection
            let decision = ControlDecision::for_class(label.class_index())?;
            let mut history = Vec::new();
            while history.len() < spec.t + episode_target - 1 {
                let (_, kpm, _) = link.link_step(1000)?;
                link.apply_control(&decision);
                if let Some(sample) = kpm {
                    // pass through the wire quantization the RIC applies
                    let quantized =
                        KpmReport::from_sample(&sample, history.len() as u32).to_sample()?;
                    history.push(quantized);
                }
            }
            for start in 0..episode_target {
                let window =
                    gen_kpm_window(&history[..start + spec.t], spec.t, spec.m, &spec.bounds, label)?;
                samples.write_all(&window.to_f32_bytes()).map_err(io_err)?;
                labels.write_all(&[label.class_index() as u8]).map_err(io_err)?;
                produced += 1;
            }
            episode += 1;
        }
    }
    Ok(())
}

/// Load a dataset directory into memory.
pub fn load_dataset(dir: &Path) -> Result<(Dataset, DatasetManifest)> {
    let manifest_path = dir.join("manifest.txt");
    let text = std::fs::read_to_string(&manifest_path)
        .map_err(|e| Error::io(manifest_path.display().to_string(), e))?;
    let manifest = DatasetManifest::from_text(&text)?;

    let samples_path = dir.join("samples.f32");
    let mut bytes = Vec::new();
    std::fs::File::open(&samples_path)
        .map_err(|e| Error::io(samples_path.display().to_string(), e))?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(samples_path.display().to_string(), e))?;
    let labels_path = dir.join("labels.u8");
    let label_bytes =
        std::fs::read(&labels_path).map_err(|e| Error::io(labels_path.display().to_string(), e))?;

    let total = manifest.total();
    let len = manifest.sample_len;
    if bytes.len() != total * len * 4 {
        return Err(Error::invalid(format!(
            "samples.f32 has {} bytes, expected {}",
            bytes.len(),
            total * len * 4
        )));
    }
    if label_bytes.len() != total {
        return Err(Error::invalid("labels.u8 length mismatch"));
    }
    let shape: Vec<usize> = match manifest.kind {
        DatasetKind::Spectrogram => vec![SPEC_SIZE, SPEC_SIZE, 1],
        DatasetKind::Kpm => vec![len],
    };
    let mut inputs = Vec::with_capacity(total);
    for i in 0..total {
        let chunk = &bytes[i * len * 4..(i + 1) * len * 4];
        let data: Vec<f64> = chunk
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        inputs.push(Tensor::new(shape.clone(), data)?);
    }
    let labels: Vec<usize> = label_bytes.iter().map(|&b| usize::from(b)).collect();
    Ok((Dataset { inputs, labels }, manifest))
}
