//! Run the rank-sensitivity sharpness experiment from the library API.
//!
//! Usage: `cargo run --release --example sharpness_demo [N] [M] [seed]`

use ergodic_lab::averaging::{MaximalMode, MaximalSpec};
use ergodic_lab::lattice::ShiftFamily;
use ergodic_lab::space::GridSpace;
use ergodic_lab::verify::sharpness_sweep;

fn main() {
    let mut args = std::env::args().skip(1);
    let n: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(521);
    let m: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(16);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);

    let space = GridSpace::new(vec![n, n]).expect("valid grid");
    let family = ShiftFamily::new(space, vec![vec![1, 0], vec![0, 1], vec![1, 1]])
        .expect("valid family");
    let spec = MaximalSpec::new(m, MaximalMode::Dyadic).expect("valid cap");
    let heights: Vec<u64> = (4..=10).map(|e| 1u64 << e).collect();

    let started = std::time::Instant::now();
    let report = sharpness_sweep(&family, &heights, &spec, seed).expect("sweep runs");
    println!("# Z_{n}^2, generators (1,0) (0,1) (1,1), M = {m}, seed {seed}");
    println!("# elapsed: {:.1} s", started.elapsed().as_secs_f64());
    println!("H      sup ratio Log_{}   sup ratio Log_{}", report.order_high, report.order_low);
    for ((h, hi), lo) in heights.iter().zip(&report.ratio_high).zip(&report.ratio_low) {
        println!("{h:5}  {hi:16.6}  {lo:16.6}");
    }
    let g = &report.growth;
    println!(
        "low order grew x{:.2} ({}), slope {:.3} per ln H; high order tail spread {:.1}%",
        g.low_growth_factor,
        if g.low_monotone { "monotone" } else { "not monotone" },
        g.low_log_slope,
        100.0 * g.high_tail_spread
    );
}
