use shiftforest::eval::{run_simulation_cell, SimulationConfig};
fn main() {
    let lambdas = [1.0, 1.07, 1.14, 1.21, 1.29, 1.36, 1.43, 1.5];
    for (mn, n0f) in [(Some(16usize), 0.02f64), (Some(16), 0.4), (None, 0.02)] {
        let cfg = SimulationConfig { replications: 8, seed: 2026, max_terminal_nodes: mn, n0_fraction: n0f, ..Default::default() };
        print!("mn={mn:?} n0f={n0f}: M5 gaps");
        let mut worst: f64 = 0.0;
        for (i, &l) in lambdas.iter().enumerate() {
            let c = run_simulation_cell(&cfg, 5, i, l).unwrap();
            let g = (c.weighted.score - c.unweighted.score).abs() / c.unweighted.score;
            worst = worst.max(g);
            print!(" {g:.3}");
        }
        let m2 = run_simulation_cell(&cfg, 2, 0, 1.0).unwrap();
        let m1h = run_simulation_cell(&cfg, 1, 7, 1.5).unwrap();
        let m1 = run_simulation_cell(&cfg, 1, 0, 1.0).unwrap();
        let m5 = run_simulation_cell(&cfg, 5, 0, 1.0).unwrap();
        println!("\n  worst {worst:.3} | M2r {:.3} | M1@1.5 {:.3}/{:.3} | covg M1 {:.3} M5 {:.3}",
            m2.weighted.rmse / m2.unweighted.rmse, m1h.weighted.rmse, m1h.unweighted.rmse,
            m1.weighted.coverage, m5.weighted.coverage);
    }
}
