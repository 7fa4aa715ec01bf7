// temporary probe: drift and cost vs tolerance
use chaosmeter::dicke_classical::{DickeDynamics, DickeState};

fn main() {
    let d = DickeDynamics::new(1.0, 1.0, 1.0).unwrap();
    let s0 = d.sample_shell(1.2, 1, 77).unwrap()[0];
    for tol in [1e-10f64, 1e-11, 1e-12, 1e-13] {
        let t0 = std::time::Instant::now();
        let traj = d.integrate(&s0, 3000.0, tol).unwrap();
        println!(
            "tol {:.0e}: drift {:.3e}  steps {}  rhs {}  wall {:?}",
            tol,
            traj.max_rel_energy_drift,
            traj.solution.n_accepted,
            traj.solution.n_rhs,
            t0.elapsed()
        );
    }
}
