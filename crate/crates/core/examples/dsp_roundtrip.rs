//! STFT analysis/resynthesis, Schroeder decay fitting and the Sabine formula.
//!
//! cargo run --release -p vam-core --example dsp_roundtrip

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vam::dsp::{schroeder_rt60, snr_db, Stft, StftConfig, Waveform, CLIP_SAMPLES};
use vam::synth::{exponential_rir, sabine_rt60, synth_source, RoomSpec};

fn main() -> vam::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x: Waveform = synth_source(&mut rng);
    let x = x.to_f64();

    let stft = Stft::<f64>::new(StftConfig::default())?;
    let spec = stft.spectrogram(&x)?;
    let y = stft.inverse(&spec)?;
    println!(
        "{} samples -> {} frames x {} bins, resynthesis SNR {:.1} dB",
        CLIP_SAMPLES,
        spec.frames,
        spec.bins,
        snr_db(&x, &y)
    );

    for t in [0.2, 0.5, 1.0] {
        let rir = exponential_rir(t, 0.0, 0, &mut rng);
        println!("exponential decay T={t:.1} s: Schroeder estimate {:.3} s", schroeder_rt60(&rir)?);
    }

    let room = RoomSpec {
        dims: [10.0, 8.0, 3.0],
        mean_absorption: 0.2,
        distance: 2.0,
    };
    println!("Sabine RT60 of a 10x8x3 m room at mean absorption 0.2: {:.3} s", sabine_rt60(&room)?);
    Ok(())
}
