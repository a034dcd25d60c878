//! Simulates a single speckle frame at the paper geometry and writes it as
//! a PGM image next to the executable's working directory.

use std::io::Write;

use pseudothermal::config::RunConfig;
use pseudothermal::pipeline::simulate_stack;

fn main() {
    let mut cfg = RunConfig::default();
    cfg.frames = 1;
    cfg.target_mean_gray = 60.0;

    let stack = simulate_stack(&cfg).unwrap();
    let frame = &stack.frames[0];
    let (h, w) = frame.pixels.dim();

    let mean: f64 = frame.pixels.iter().map(|&p| p as f64).sum::<f64>() / (h * w) as f64;
    let max = frame.pixels.iter().max().unwrap();
    println!("frame {}x{}: mean gray {:.2}, max {}, clipped fraction {:.2e}", w, h, mean, max, frame.clipped_fraction);

    let path = "speckle_frame.pgm";
    let mut out = std::fs::File::create(path).unwrap();
    write!(out, "P5\n{w} {h}\n255\n").unwrap();
    let bytes: Vec<u8> = frame.pixels.iter().map(|&p| p.min(255) as u8).collect();
    out.write_all(&bytes).unwrap();
    println!("wrote {path}");
}
