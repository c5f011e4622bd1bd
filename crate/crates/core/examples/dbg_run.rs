use perceptive_mpc::harness::{run_scenario, Scenario, TerrainSpec};
use perceptive_mpc::reference::CommandProfile;
use perceptive_mpc::solver::SolveMode;

fn main() {
    let mut s1 = Scenario::default();
    s1.terrain = TerrainSpec::Box { height: 0.35, start: 0.6, length: 1.2, extent: 7.0, resolution: 0.04 };
    s1.commands = CommandProfile::constant(0.25, 0.0, 0.0);
    s1.run.duration = 14.0;
    s1.run.start = [-0.8, 0.0, 0.0];
    let r = run_scenario(&s1, SolveMode::RealTimeIteration).unwrap();
    for (t, leg, m) in &r.foothold_checks {
        if *m < 0.0 {
            println!("VIOLATION t={t:.2} leg{leg} margin {m:.4}");
        }
    }
    println!("checked {} touchdowns, min {:.4}", r.metrics.touchdowns_checked, r.metrics.min_foothold_margin);
}
