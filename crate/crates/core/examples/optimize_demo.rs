use biphoton::{optimize_shaping, OptimizerConfig, ShapingProblem, TimeGrid};

// Maximize the Gaussian shaping fidelity from scratch for a few seeds.

fn main() {
    let seeds: Vec<u64> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("seeds are integers"))
        .collect();
    let seeds = if seeds.is_empty() { vec![0] } else { seeds };

    let grid = TimeGrid::new(-10.0, 30.0, 2001).unwrap();
    let problem = ShapingProblem::ed_sine_to_gaussian(1.0, grid).unwrap();
    for seed in seeds {
        let config = OptimizerConfig { restarts: 8, budget: 5000, seed };
        let start = std::time::Instant::now();
        let out = optimize_shaping(&problem, &config).unwrap();
        println!(
            "seed {seed}: fidelity {:.6} after {} evaluations ({:.1?})",
            out.fidelity,
            out.evaluations,
            start.elapsed()
        );
        println!("  x = {:?}", out.x_best.iter().map(|v| (v * 1e3).round() / 1e3).collect::<Vec<_>>());
    }
}
