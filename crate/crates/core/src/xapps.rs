//! The legitimate InterClass xApp and the malicious adversarial xApp.
//!
//! Both interact with the RIC only through SDL handles. The legitimate xApp
//! reads its data key, classifies new versions, and emits one control
//! decision per version. The malicious xApp holds a white-box copy of the
//! victim model, reads the latest entry, crafts an adversarial replacement
//! targeted at SOI (suppressing jammer detection), and writes it back under
//! the same key.

use crate::attack::{craft, AttackConfig, AttackKind};
use crate::clock::Clock;
use crate::datagen::{Spectrogram, SPEC_SIZE};
use crate::error::{Error, Result};
use crate::models::{predict, CLASS_SOI};
use crate::nn::Model;
use crate::ric::{ControlDecision, RicDbEntry, SdlHandle, KEY_KPM_LATEST, KEY_SPEC_LATEST};
use crate::tensor::Tensor;

/// Which data modality an xApp consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XappVariant {
    Spec,
    Kpm,
}

impl XappVariant {
    pub fn data_key(self) -> &'static str {
        match self {
            XappVariant::Spec => KEY_SPEC_LATEST,
            XappVariant::Kpm => KEY_KPM_LATEST,
        }
    }
}

/// Defense deployed in a scenario run; exactly one is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefenseKind {
    None,
    AdversarialTraining,
    Distillation,
}

/// Scenario phase switches for a run.
#[derive(Debug, Clone, Copy)]
pub struct ScenarioPhase {
    pub attack_enabled: bool,
    pub defense: DefenseKind,
}

/// Decode a stored database value into a model input tensor.
pub fn decode_entry(variant: XappVariant, bytes: &[u8]) -> Result<Tensor> {
    match variant {
        XappVariant::Spec => Ok(Spectrogram::from_f32_bytes(bytes)?.to_tensor()),
        XappVariant::Kpm => {
            if bytes.is_empty() || bytes.len() % 4 != 0 {
                return Err(Error::invalid("KPM window bytes must be a positive multiple of 4"));
            }
            let values: Vec<f64> = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect();
            Ok(Tensor::from_vec(values))
        }
    }
}

/// Encode a model input tensor back into database bytes.
pub fn encode_entry(variant: XappVariant, x: &Tensor) -> Result<Vec<u8>> {
    match variant {
        XappVariant::Spec => {
            if x.len() != SPEC_SIZE * SPEC_SIZE {
                return Err(Error::invalid("spectrogram tensor has wrong size"));
            }
            Ok(Spectrogram::from_pixels(x.data().to_vec()).to_f32_bytes())
        }
        XappVariant::Kpm => {
            let mut out = Vec::with_capacity(x.len() * 4);
            for &v in x.data() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
            Ok(out)
        }
    }
}

/// Result of one legitimate xApp step.
#[derive(Debug, Clone)]
pub enum XappStep {
    Decision {
        decision: ControlDecision,
        class: usize,
        probs: Vec<f64>,
        version: u64,
        inference_ms: f64,
    },
    /// No entry newer than the last processed version.
    NoNewData,
}

/// The legitimate interference classifier.
pub struct InterClassXapp {
    pub variant: XappVariant,
    model: Model,
    sdl: SdlHandle,
    clock: Clock,
    last_version: u64,
}

impl InterClassXapp {
    pub fn new(variant: XappVariant, model: Model, sdl: SdlHandle, clock: Clock) -> InterClassXapp {
        InterClassXapp { variant, model, sdl, clock, last_version: 0 }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// Read the latest entry; if it is new, classify it and emit exactly one
    /// control decision. Bumps the processed-version watermark.
    pub fn step(&mut self) -> Result<XappStep> {
        let entry: RicDbEntry = match self.sdl.get_latest(self.variant.data_key()) {
            Ok(e) => e,
            Err(Error::NotFound(_)) => return Ok(XappStep::NoNewData),
            Err(e) => return Err(e),
        };
        if entry.version <= self.last_version {
            return Ok(XappStep::NoNewData);
        }
        self.last_version = entry.version;
        let x = decode_entry(self.variant, &entry.value)?;
        let t0 = self.clock.now_ms();
        let (class, probs) = predict(&self.model, &x)?;
        let inference_ms = self.clock.now_ms() - t0;
        let decision = ControlDecision::for_class(class)?;
        Ok(XappStep::Decision { decision, class, probs, version: entry.version, inference_ms })
    }
}

/// The malicious xApp: white-box attacker over the shared database.
pub struct MaliciousXapp {
    pub variant: XappVariant,
    pub kind: AttackKind,
    pub cfg: AttackConfig,
    victim_model: Model,
    sdl: SdlHandle,
    last_processed: u64,
    perturbed_versions: Vec<u64>,
}

impl MaliciousXapp {
    /// `cfg.mode` defaults to targeted-at-SOI via [`AttackConfig::targeted`];
    /// callers may override for studies.
    pub fn new(
        variant: XappVariant,
        kind: AttackKind,
        cfg: AttackConfig,
        victim_model: Model,
        sdl: SdlHandle,
    ) -> MaliciousXapp {
        MaliciousXapp { variant, kind, cfg, victim_model, sdl, last_processed: 0, perturbed_versions: Vec::new() }
    }

    /// Convenience: targeted-at-SOI config at the given budget.
    pub fn targeted_soi(
        variant: XappVariant,
        kind: AttackKind,
        epsilon: f64,
        victim_model: Model,
        sdl: SdlHandle,
    ) -> MaliciousXapp {
        Self::new(variant, kind, AttackConfig::targeted(CLASS_SOI, epsilon), victim_model, sdl)
    }

    /// Versions this xApp wrote (scenario bookkeeping, invisible to the
    /// legitimate xApp).
    pub fn perturbed_versions(&self) -> &[u64] {
        &self.perturbed_versions
    }

    /// Read the latest entry; if it is not one of our own writes, craft an
    /// adversarial replacement and write it back under the same key.
    /// Returns the new version, or `None` when there is nothing to perturb.
    pub fn step(&mut self) -> Result<Option<u64>> {
        let entry = self.sdl.get_latest(self.variant.data_key())?;
        if entry.version <= self.last_processed {
            return Ok(None);
        }
        let x = decode_entry(self.variant, &entry.value)?;
        let adv = craft(&self.victim_model, &x, self.kind, &self.cfg)?;
        let bytes = encode_entry(self.variant, &adv.x_adv)?;
        let version = self.sdl.put(self.variant.data_key(), bytes)?;
        self.last_processed = version;
        self.perturbed_versions.push(version);
        Ok(Some(version))
    }
}
