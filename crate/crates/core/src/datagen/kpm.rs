//! KPM samples, fixed-bound normalization, and window stacking.

use super::Label;
use crate::error::{Error, Result};

/// One KPM report from the link: the four uplink metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KpmSample {
    pub ul_sinr_db: f64,
    pub bitrate_mbps: f64,
    /// Block error rate in [0, 1].
    pub bler: f64,
    /// MCS index 0..=28.
    pub mcs: u8,
}

impl KpmSample {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.bler) {
            return Err(Error::invalid(format!("bler {} outside [0,1]", self.bler)));
        }
        if self.mcs > 28 {
            return Err(Error::invalid(format!("mcs {} outside 0..=28", self.mcs)));
        }
        Ok(())
    }

    fn features(&self) -> [f64; 4] {
        [self.ul_sinr_db, self.bitrate_mbps, self.bler, f64::from(self.mcs)]
    }
}

/// Fixed per-feature normalization bounds, published in the dataset manifest
/// so windows are reproducible and invertible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormBounds {
    pub sinr_db: (f64, f64),
    pub bitrate_mbps: (f64, f64),
    pub bler: (f64, f64),
    pub mcs: (f64, f64),
}

impl Default for NormBounds {
    fn default() -> Self {
        NormBounds {
            sinr_db: (-20.0, 40.0),
            bitrate_mbps: (0.0, 30.0),
            bler: (0.0, 1.0),
            mcs: (0.0, 28.0),
        }
    }
}

impl NormBounds {
    fn as_array(&self) -> [(f64, f64); 4] {
        [self.sinr_db, self.bitrate_mbps, self.bler, self.mcs]
    }
}

/// Min-max normalize the first `m` features of a sample, clamped to [0, 1].
pub fn normalize_sample(s: &KpmSample, m: usize, bounds: &NormBounds) -> Result<Vec<f64>> {
    if m == 0 || m > 4 {
        return Err(Error::invalid(format!("m must be in 1..=4, got {m}")));
    }
    let f = s.features();
    let b = bounds.as_array();
    Ok((0..m)
        .map(|i| {
            let (lo, hi) = b[i];
            ((f[i] - lo) / (hi - lo)).clamp(0.0, 1.0)
        })
        .collect())
}

/// Invert [`normalize_sample`] for values that were inside the bounds.
pub fn denormalize_sample(values: &[f64], bounds: &NormBounds) -> Result<KpmSample> {
    if values.len() != 4 {
        return Err(Error::invalid("denormalize expects 4 features"));
    }
    let b = bounds.as_array();
    let raw: Vec<f64> =
        values.iter().zip(b).map(|(&v, (lo, hi))| lo + v * (hi - lo)).collect();
    Ok(KpmSample {
        ul_sinr_db: raw[0],
        bitrate_mbps: raw[1],
        bler: raw[2],
        mcs: raw[3].round().clamp(0.0, 28.0) as u8,
    })
}

/// A stacked, normalized window of `t` consecutive reports: the DNN input.
#[derive(Debug, Clone, PartialEq)]
pub struct KpmWindow {
    pub values: Vec<f64>,
    pub label: Label,
}

impl KpmWindow {
    pub fn to_tensor(&self) -> crate::tensor::Tensor {
        crate::tensor::Tensor::from_vec(self.values.clone())
    }

    /// Little-endian f32 bytes, the RIC database storage format.
    pub fn to_f32_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.values.len() * 4);
        for &v in &self.values {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_f32_bytes(bytes: &[u8], label: Label) -> Result<KpmWindow> {
        if bytes.len() % 4 != 0 || bytes.is_empty() {
            return Err(Error::invalid("KPM window bytes must be a positive multiple of 4"));
        }
        Ok(KpmWindow {
            values: bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect(),
            label,
        })
    }
}

/// Stack the last `t` reports into a length `m*t` normalized vector.
///
/// The window is labeled by the most recent report's link condition, passed
/// by the caller.
pub fn gen_kpm_window(
    history: &[KpmSample],
    t: usize,
    m: usize,
    bounds: &NormBounds,
    label: Label,
) -> Result<KpmWindow> {
    if t == 0 {
        return Err(Error::invalid("t must be >= 1"));
    }
    if history.len() < t {
        return Err(Error::invalid(format!(
            "need at least {t} reports, have {}",
            history.len()
        )));
    }
    let mut values = Vec::with_capacity(m * t);
    for s in &history[history.len() - t..] {
        values.extend(normalize_sample(s, m, bounds)?);
    }
    Ok(KpmWindow { values, label })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(sinr: f64) -> KpmSample {
        KpmSample { ul_sinr_db: sinr, bitrate_mbps: 12.0, bler: 0.1, mcs: 16 }
    }

    #[test]
    fn window_lengths() {
        let hist: Vec<KpmSample> = (0..20).map(|i| sample(i as f64)).collect();
        let b = NormBounds::default();
        let w = gen_kpm_window(&hist, 15, 4, &b, Label::Soi).unwrap();
        assert_eq!(w.values.len(), 60);
        let w = gen_kpm_window(&hist, 1, 4, &b, Label::Soi).unwrap();
        assert_eq!(w.values.len(), 4);
    }

    #[test]
    fn window_takes_most_recent_reports() {
        let hist: Vec<KpmSample> = (0..5).map(|i| sample(i as f64)).collect();
        let b = NormBounds::default();
        let w = gen_kpm_window(&hist, 2, 1, &b, Label::Soi).unwrap();
        // sinr 3 and 4 normalized over [-20, 40]
        assert!((w.values[0] - 23.0 / 60.0).abs() < 1e-12);
        assert!((w.values[1] - 24.0 / 60.0).abs() < 1e-12);
    }

    #[test]
    fn insufficient_history_rejected() {
        let hist: Vec<KpmSample> = (0..3).map(|i| sample(i as f64)).collect();
        let b = NormBounds::default();
        assert!(gen_kpm_window(&hist, 4, 4, &b, Label::Soi).is_err());
        assert!(gen_kpm_window(&hist, 0, 4, &b, Label::Soi).is_err());
    }

    #[test]
    fn normalization_round_trip() {
        let b = NormBounds::default();
        let s = KpmSample { ul_sinr_db: 17.31, bitrate_mbps: 4.25, bler: 0.4375, mcs: 11 };
        let norm = normalize_sample(&s, 4, &b).unwrap();
        assert!(norm.iter().all(|v| (0.0..=1.0).contains(v)));
        let back = denormalize_sample(&norm, &b).unwrap();
        assert!((back.ul_sinr_db - s.ul_sinr_db).abs() < 1e-9);
        assert!((back.bitrate_mbps - s.bitrate_mbps).abs() < 1e-9);
        assert!((back.bler - s.bler).abs() < 1e-9);
        assert_eq!(back.mcs, s.mcs);
    }

    #[test]
    fn out_of_bounds_values_clamp() {
        let b = NormBounds::default();
        let s = KpmSample { ul_sinr_db: -100.0, bitrate_mbps: 99.0, bler: 0.0, mcs: 0 };
        let norm = normalize_sample(&s, 4, &b).unwrap();
        assert_eq!(norm[0], 0.0);
        assert_eq!(norm[1], 1.0);
    }

    #[test]
    fn sample_validation() {
        assert!(sample(0.0).validate().is_ok());
        assert!(KpmSample { bler: 1.5, ..sample(0.0) }.validate().is_err());
        assert!(KpmSample { mcs: 29, ..sample(0.0) }.validate().is_err());
    }
}
