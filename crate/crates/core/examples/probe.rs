// temporary calibration probe
use oransim_core::datagen::*;

fn main() {
    for gain in [30.0_f64, 35.0, 40.0] {
        for seed in [1u64, 2, 3] {
            let jam = JammerProfile::on(gain).unwrap();
            let frame = synth_iq_frame(Label::Cwi, &jam, seed).unwrap();
            let s = iq_to_spectrogram(&frame);
            let mut means = s.row_means();
            let peak = means.iter().cloned().fold(0.0, f64::max);
            means.sort_by(f64::total_cmp);
            let median = means[means.len() / 2];
            let min = means[0];
            println!("gain {gain} seed {seed}: peak {peak:.4} median {median:.4} min-row {min:.4} ratio {:.2}", peak/median);
        }
    }
    let frame = synth_iq_frame(Label::Soi, &JammerProfile::off(), 1).unwrap();
    let s = iq_to_spectrogram(&frame);
    let mut means = s.row_means();
    let peak = means.iter().cloned().fold(0.0, f64::max);
    means.sort_by(f64::total_cmp);
    println!("SOI: peak {peak:.4} median {:.4} ratio {:.2}", means[64], peak/means[64]);
}
