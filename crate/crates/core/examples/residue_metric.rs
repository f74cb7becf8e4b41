//! The acoustic residue score and its blend with SRMR.
//!
//! The score compares how far a blind and a conditioned reverberator land
//! from the target decay time. Values above 0.5 mean the blind model did
//! worse, i.e. the input carried little room information it could exploit.
//!
//! cargo run --release -p vam-core --example residue_metric

use vam::debias::{combine, residue_score, ResidueMetricConfig};

fn main() {
    let cfg = ResidueMetricConfig::default();
    println!("floor {} s, alpha {}", cfg.rt60_floor, cfg.alpha);
    let target = 0.6;
    println!("rt_blind  rt_visual  score  (target {target} s)");
    for (b, v) in [(0.6, 0.6), (0.2, 0.6), (1.0, 0.55), (0.6, 0.3), (0.58, 0.9)] {
        println!("{b:8.2}  {v:9.2}  {:.4}", residue_score(b, v, target, cfg.rt60_floor));
    }
    // A short target hits the floor in the denominator.
    println!("short target: {:.4}", residue_score(0.35, 0.05, 0.05, cfg.rt60_floor));

    println!("alpha  combined(srmr_norm=0.6, residue=0.5)");
    for a in [0.0, 0.3, 0.7, 1.0] {
        println!("{a:5.1}  {:.3}", combine(a, 0.6, 0.5));
    }
}
