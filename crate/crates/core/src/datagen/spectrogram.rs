//! I/Q frame to grayscale spectrogram.
//!
//! Pipeline: magnitude STFT (FFT 256, hop 600, Hann window) -> log10 with a
//! 1e-12 magnitude floor -> min-max normalization over the whole image ->
//! bilinear resize to 128x128. Frequency runs along rows (DC centered),
//! time along columns. An all-zero-energy frame normalizes to all zeros.

use super::signal::IqFrame;
use crate::tensor::Tensor;
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::TAU;

/// Output side length: spectrograms are SPEC_SIZE x SPEC_SIZE grayscale.
pub const SPEC_SIZE: usize = 128;

const STFT_FFT: usize = 256;
const STFT_HOP: usize = 600;
const LOG_FLOOR: f64 = 1e-12;

/// A 128x128 grayscale image with values in [0, 1], rows = frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pixels: Vec<f64>,
}

impl Spectrogram {
    pub fn from_pixels(pixels: Vec<f64>) -> Self {
        assert_eq!(pixels.len(), SPEC_SIZE * SPEC_SIZE);
        Spectrogram { pixels }
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixel(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * SPEC_SIZE + col]
    }

    /// Model input tensor of shape [128, 128, 1].
    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![SPEC_SIZE, SPEC_SIZE, 1], self.pixels.clone()).expect("valid pixels")
    }

    /// Little-endian f32 pixel bytes, the storage format in the RIC database
    /// and in dataset files.
    pub fn to_f32_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.pixels.len() * 4);
        for &p in &self.pixels {
            out.extend_from_slice(&(p as f32).to_le_bytes());
        }
        out
    }

    pub fn from_f32_bytes(bytes: &[u8]) -> crate::error::Result<Spectrogram> {
        if bytes.len() != SPEC_SIZE * SPEC_SIZE * 4 {
            return Err(crate::error::Error::invalid(format!(
                "spectrogram must be {} bytes, got {}",
                SPEC_SIZE * SPEC_SIZE * 4,
                bytes.len()
            )));
        }
        let pixels = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        Ok(Spectrogram { pixels })
    }

    /// Mean intensity of each frequency row.
    pub fn row_means(&self) -> Vec<f64> {
        (0..SPEC_SIZE)
            .map(|r| {
                self.pixels[r * SPEC_SIZE..(r + 1) * SPEC_SIZE].iter().sum::<f64>()
                    / SPEC_SIZE as f64
            })
            .collect()
    }
}

/// Convert a frame into its spectrogram. Deterministic.
pub fn iq_to_spectrogram(frame: &IqFrame) -> Spectrogram {
    let n = frame.samples.len();
    let n_frames = if n >= STFT_FFT { (n - STFT_FFT) / STFT_HOP + 1 } else { 0 };

    let window: Vec<f64> =
        (0..STFT_FFT).map(|i| 0.5 * (1.0 - (TAU * i as f64 / STFT_FFT as f64).cos())).collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(STFT_FFT);

    // magnitude grid, rows = fftshifted frequency bins, cols = time frames
    let mut log_mag = vec![0.0f64; STFT_FFT * n_frames];
    let mut buf = vec![Complex64::new(0.0, 0.0); STFT_FFT];
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for t in 0..n_frames {
        let start = t * STFT_HOP;
        for (i, w) in window.iter().enumerate() {
            buf[i] = frame.samples[start + i] * *w;
        }
        fft.process(&mut buf);
        for (bin, v) in buf.iter().enumerate() {
            // fftshift: negative frequencies on top rows
            let row = (bin + STFT_FFT / 2) % STFT_FFT;
            let lm = v.norm().max(LOG_FLOOR).log10();
            log_mag[row * n_frames + t] = lm;
            min = min.min(lm);
            max = max.max(lm);
        }
    }

    let range = max - min;
    if !(range > 0.0) {
        // degenerate frame (for example all zeros): defined as the all-zero image
        return Spectrogram { pixels: vec![0.0; SPEC_SIZE * SPEC_SIZE] };
    }
    for v in &mut log_mag {
        *v = (*v - min) / range;
    }

    Spectrogram { pixels: resize_bilinear(&log_mag, STFT_FFT, n_frames, SPEC_SIZE, SPEC_SIZE) }
}

/// Bilinear resize of a row-major `src_h x src_w` grid.
fn resize_bilinear(src: &[f64], src_h: usize, src_w: usize, dst_h: usize, dst_w: usize) -> Vec<f64> {
    let mut out = vec![0.0; dst_h * dst_w];
    let sy = src_h as f64 / dst_h as f64;
    let sx = src_w as f64 / dst_w as f64;
    for r in 0..dst_h {
        let fy = ((r as f64 + 0.5) * sy - 0.5).clamp(0.0, (src_h - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(src_h - 1);
        let wy = fy - y0 as f64;
        for c in 0..dst_w {
            let fx = ((c as f64 + 0.5) * sx - 0.5).clamp(0.0, (src_w - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(src_w - 1);
            let wx = fx - x0 as f64;
            let top = src[y0 * src_w + x0] * (1.0 - wx) + src[y0 * src_w + x1] * wx;
            let bot = src[y1 * src_w + x0] * (1.0 - wx) + src[y1 * src_w + x1] * wx;
            out[r * dst_w + c] = top * (1.0 - wy) + bot * wy;
        }
    }
    out
}
