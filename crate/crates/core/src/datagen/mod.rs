//! Synthetic re-creation of the two test-data modalities: I/Q frames turned
//! into spectrograms (SOI vs CWI) and KPM windows (clean vs jammed link),
//! plus on-disk dataset files with a text manifest.

mod dataset;
mod kpm;
mod signal;
mod spectrogram;

pub use dataset::{
    build_dataset, load_dataset, DatasetKind, DatasetManifest, DatasetSpec, PAPER_KPM_CWI,
    PAPER_KPM_SOI, PAPER_SPEC_PER_CLASS,
};
pub use kpm::{
    denormalize_sample, gen_kpm_window, normalize_sample, KpmSample, KpmWindow, NormBounds,
};
pub use signal::{
    mean_power, synth_iq_frame, IqFrame, CARRIER_HZ, CWI_REF_SCALE, FRAME_BYTES, FRAME_MS,
    FRAME_SAMPLES, SAMPLE_RATE,
};
pub use spectrogram::{iq_to_spectrogram, Spectrogram, SPEC_SIZE};

use crate::error::{Error, Result};

/// Class label of a stored test-data item.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    /// Signal of interest: clean uplink.
    Soi,
    /// Continuous-wave interference present.
    Cwi,
}

impl Label {
    pub fn class_index(self) -> usize {
        match self {
            Label::Soi => crate::models::CLASS_SOI,
            Label::Cwi => crate::models::CLASS_CWI,
        }
    }

    pub fn from_class_index(i: usize) -> Result<Label> {
        match i {
            0 => Ok(Label::Soi),
            1 => Ok(Label::Cwi),
            other => Err(Error::invalid(format!("unknown class index {other}"))),
        }
    }
}

/// Tone jammer description. Gains follow the 30-40 dB range the datasets use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JammerProfile {
    pub gain_db: f64,
    pub on: bool,
}

/// Allowed jammer gain range in dB.
pub const JAMMER_GAIN_RANGE: (f64, f64) = (30.0, 40.0);

impl JammerProfile {
    pub fn off() -> Self {
        JammerProfile { gain_db: JAMMER_GAIN_RANGE.1, on: false }
    }

    pub fn on(gain_db: f64) -> Result<Self> {
        let (lo, hi) = JAMMER_GAIN_RANGE;
        if !(lo..=hi).contains(&gain_db) {
            return Err(Error::invalid(format!(
                "jammer gain {gain_db} dB outside configured range [{lo}, {hi}]"
            )));
        }
        Ok(JammerProfile { gain_db, on: true })
    }

    pub fn label(&self) -> Label {
        if self.on {
            Label::Cwi
        } else {
            Label::Soi
        }
    }
}
