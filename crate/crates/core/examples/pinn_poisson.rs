//! Trains residual networks on the Poisson problem `u'' = -pi^2 sin(pi x)`
//! and compares the squared-ReLU tail against the plain ReLU control.
//!
//! Usage: `pinn_poisson [iterations] [width]`.

use std::time::Instant;

use dsrn::pinn::{adam_train, evaluate_solution, PoissonProblem, ResNet, ResNetMode, ResNetSpec, TrainConfig};

fn main() -> dsrn::Result<()> {
    let mut args = std::env::args().skip(1);
    let iterations = args.next().and_then(|a| a.parse().ok()).unwrap_or(5000);
    let width = args.next().and_then(|a| a.parse().ok()).unwrap_or(40);
    let problem = PoissonProblem::default();
    for mode in [ResNetMode::Dsrn, ResNetMode::AllRelu] {
        for seed in 0..3 {
            let t = Instant::now();
            let model = ResNet::init(ResNetSpec::new(mode, width), seed)?;
            let cfg = TrainConfig {
                iterations,
                seed,
                ..Default::default()
            };
            let res = adam_train(&model, &problem, &cfg)?;
            let rep = evaluate_solution(&res.model, &problem, 1000)?;
            println!(
                "{mode:?} seed {seed}: loss {:.3e} -> {:.3e}, max |u - u*| {:.3e}, max |u' - u*'| {:.3e} ({:.1?})",
                res.initial_loss(),
                res.final_loss(),
                rep.max_err,
                rep.max_deriv_err,
                t.elapsed()
            );
        }
    }
    Ok(())
}
