//! Sample rooms, render a clip in each and write the WAVs.
//!
//! cargo run --release -p vam-core --example synth_room -- [out_dir] [rooms]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vam::dsp::{drr, schroeder_rt60, write_wav};
use vam::synth::{render_sample, sample_room};

fn main() -> vam::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = std::path::PathBuf::from(args.first().map_or("synth_room_out", String::as_str));
    let rooms: usize = args.get(1).and_then(|n| n.parse().ok()).unwrap_or(4);
    std::fs::create_dir_all(&out).map_err(|e| vam::Error::Io {
        path: out.clone(),
        source: e,
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    println!("room  dims (m)            absorb  dist  rt60_true  schroeder  drr_db  descriptor[0..3]");
    for i in 0..rooms {
        let room = sample_room(&mut rng, (0.2, 1.2));
        let s = render_sample(&room, &mut rng)?;
        let d = s.spec.dims;
        println!(
            "{i:4}  {:5.1} x {:4.1} x {:3.1}   {:.3}   {:4.1}  {:.3}      {:.3}      {:6.2}  {:?}",
            d[0],
            d[1],
            d[2],
            s.spec.mean_absorption,
            s.spec.distance,
            s.rir.rt60_true,
            schroeder_rt60(&s.rir)?,
            drr(&s.rir),
            &s.descriptor.as_slice()[..3]
        );
        write_wav(out.join(format!("room{i}_dry.wav")), &s.source)?;
        write_wav(out.join(format!("room{i}_wet.wav")), &s.audio)?;
    }
    println!("wrote {} clips to {}", 2 * rooms, out.display());
    Ok(())
}
