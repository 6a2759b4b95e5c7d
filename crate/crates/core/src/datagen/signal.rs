//! Synthetic uplink I/Q frames.
//!
//! The over-the-air capture is replaced by a signal model that preserves the
//! contrast the classifier exploits: the SOI is an OFDM-like waveform of
//! seeded QPSK subcarriers filling the 25-PRB band (300 of 512 subcarriers,
//! about 4.5 MHz of the 7.68 Msps span) plus AWGN at 20 dB SNR; a CWI frame
//! adds one constant tone inside the occupied band whose amplitude is
//! `10^(gain_db/20) * CWI_REF_SCALE`.

use super::{JammerProfile, Label};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};
use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rustfft::FftPlanner;
use std::f64::consts::TAU;

/// Samples per frame: 10 ms at 7.68 Msps.
pub const FRAME_SAMPLES: usize = 76_800;
/// Sample rate in samples/second.
pub const SAMPLE_RATE: f64 = 7.68e6;
/// Frame duration in milliseconds.
pub const FRAME_MS: u64 = 10;
/// Uplink carrier frequency tag (metadata only).
pub const CARRIER_HZ: f64 = 2.56e9;
/// Bytes per frame on the wire: interleaved f32 I/Q.
pub const FRAME_BYTES: usize = FRAME_SAMPLES * 8;

/// OFDM synthesis FFT size; 76,800 / 512 = 150 symbols per frame.
const OFDM_FFT: usize = 512;
/// Active subcarriers (25 PRBs x 12), split symmetrically around DC.
const ACTIVE_SUBCARRIERS: usize = 300;
/// Frame-level SNR of the SOI in dB.
const SOI_SNR_DB: f64 = 20.0;

/// Reference amplitude scale of the jammer tone. A 40 dB gain produces a
/// tone amplitude of `10^2 * CWI_REF_SCALE` against a unit-power SOI, so the
/// tone towers over the band the way a near-field jammer swamps a receiver.
pub const CWI_REF_SCALE: f64 = 1e6;

/// The tone frequency grid: aligned to the 256-point analysis bins so the
/// jammer energy concentrates in a single spectrogram row instead of
/// leaking across the whole image.
const TONE_GRID_HZ: f64 = SAMPLE_RATE / 256.0;

/// One 10 ms uplink capture.
#[derive(Debug, Clone, PartialEq)]
pub struct IqFrame {
    pub samples: Vec<Complex64>,
}

impl IqFrame {
    /// Serialize as interleaved little-endian f32 I/Q (614,400 bytes).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.samples.len() * 8);
        for s in &self.samples {
            out.extend_from_slice(&(s.re as f32).to_le_bytes());
            out.extend_from_slice(&(s.im as f32).to_le_bytes());
        }
        out
    }

    /// Parse interleaved little-endian f32 I/Q.
    pub fn from_bytes(bytes: &[u8]) -> Result<IqFrame> {
        if bytes.len() != FRAME_BYTES {
            return Err(Error::invalid(format!(
                "I/Q frame must be {FRAME_BYTES} bytes, got {}",
                bytes.len()
            )));
        }
        let mut samples = Vec::with_capacity(FRAME_SAMPLES);
        for c in bytes.chunks_exact(8) {
            let re = f32::from_le_bytes(c[0..4].try_into().unwrap()) as f64;
            let im = f32::from_le_bytes(c[4..8].try_into().unwrap()) as f64;
            samples.push(Complex64::new(re, im));
        }
        Ok(IqFrame { samples })
    }
}

/// Mean per-sample power of a frame.
pub fn mean_power(frame: &IqFrame) -> f64 {
    frame.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / frame.samples.len() as f64
}

/// Generate one frame. `label` must be consistent with `jammer.on`.
pub fn synth_iq_frame(label: Label, jammer: &JammerProfile, seed: u64) -> Result<IqFrame> {
    if jammer.label() != label {
        return Err(Error::invalid("label inconsistent with jammer state"));
    }
    let mut rng = rng_from_seed(derive_seed(seed, "iq-frame", 0));
    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(OFDM_FFT);

    // QPSK on the 300 subcarriers around DC (DC itself unused)
    let half = ACTIVE_SUBCARRIERS / 2;
    let mut samples = Vec::with_capacity(FRAME_SAMPLES);
    let mut buf = vec![Complex64::new(0.0, 0.0); OFDM_FFT];
    let qpsk = 1.0 / 2f64.sqrt();
    for _symbol in 0..FRAME_SAMPLES / OFDM_FFT {
        for v in buf.iter_mut() {
            *v = Complex64::new(0.0, 0.0);
        }
        for k in 1..=half {
            buf[k] = qpsk_symbol(&mut rng, qpsk);
            buf[OFDM_FFT - k] = qpsk_symbol(&mut rng, qpsk);
        }
        ifft.process(&mut buf);
        samples.extend_from_slice(&buf);
    }

    // normalize the OFDM waveform to unit average power
    let power = samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / samples.len() as f64;
    let scale = 1.0 / power.sqrt();
    for s in &mut samples {
        *s *= scale;
    }

    // AWGN at SOI_SNR_DB below the unit signal power
    let noise_power = 10f64.powf(-SOI_SNR_DB / 10.0);
    let sigma = (noise_power / 2.0).sqrt();
    let normal = Normal::new(0.0, sigma).expect("valid sigma");
    for s in &mut samples {
        *s += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
    }

    if jammer.on {
        let amplitude = 10f64.powf(jammer.gain_db / 20.0) * CWI_REF_SCALE;
        // tone frequency inside the occupied band, away from its very edge,
        // drawn per frame from the analysis-bin grid (DC excluded)
        let band_edge = (half as f64 / OFDM_FFT as f64) * SAMPLE_RATE;
        let max_bin = (0.95 * band_edge / TONE_GRID_HZ).floor() as i64;
        let mut bin = rng.gen_range(-max_bin..=max_bin);
        if bin == 0 {
            bin = 1;
        }
        let freq = bin as f64 * TONE_GRID_HZ;
        let phase = rng.gen_range(0.0..TAU);
        for (n, s) in samples.iter_mut().enumerate() {
            let arg = TAU * freq * n as f64 / SAMPLE_RATE + phase;
            *s += Complex64::new(amplitude * arg.cos(), amplitude * arg.sin());
        }
    }

    Ok(IqFrame { samples })
}

fn qpsk_symbol(rng: &mut crate::rng::Rng, scale: f64) -> Complex64 {
    let re = if rng.gen::<bool>() { scale } else { -scale };
    let im = if rng.gen::<bool>() { scale } else { -scale };
    Complex64::new(re, im)
}
