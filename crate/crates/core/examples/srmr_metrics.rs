//! SRMR and the spectral distances on one source rendered at rising RT60.
//!
//! cargo run --release -p vam-core --example srmr_metrics

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vam::dsp::convolve_rir;
use vam::metrics::{log_stft_error, srmr, srmr_norm, stft_error};
use vam::synth::{exponential_rir, synth_source};

fn main() -> vam::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let dry = synth_source(&mut rng);
    println!("dry: SRMR {:.3} (normalised {:.3})", srmr(&dry.samples)?, srmr_norm(&dry.samples)?);
    println!("rt60   SRMR    norm   stft_err  log_stft_err (vs dry)");
    for rt in [0.2, 0.4, 0.6, 0.8, 1.0, 1.2] {
        let rir = exponential_rir(rt, 0.0, 0, &mut rng);
        let wet = convolve_rir(&dry, &rir).audio.samples;
        println!(
            "{rt:.1}   {:6.3}  {:.3}  {:.5}   {:.4}",
            srmr(&wet)?,
            srmr_norm(&wet)?,
            stft_error(&wet, &dry.samples)?,
            log_stft_error(&wet, &dry.samples)?
        );
    }
    Ok(())
}
