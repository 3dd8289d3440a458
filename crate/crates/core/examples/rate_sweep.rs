//! Measures how the approximation error of the assembled network decays
//! as the number of cells grows, for sin(pi x) in one dimension.

use std::time::Instant;

use dsrn::assembler::{rate_sweep, ApproximantConfig};
use dsrn::target::TargetFunction;

fn main() -> dsrn::Result<()> {
    let f = TargetFunction::sin_pi(1);
    let configs = [4, 8, 16, 32]
        .into_iter()
        .map(|k| ApproximantConfig::with_cells(k, 4, f64::INFINITY, 1))
        .collect::<dsrn::Result<Vec<_>>>()?;
    let t = Instant::now();
    let (rows, slopes) = rate_sweep(&f, &configs, &[2.0, f64::INFINITY], 7)?;
    println!(
        "{:>4} {:>5} {:>12} {:>12} {:>12} {:>6} {:>6}",
        "K", "p", "L^p", "W^1,p", "W^2,p", "width", "depth"
    );
    for r in &rows {
        println!(
            "{:>4} {:>5} {:>12.4e} {:>12.4e} {:>12.4e} {:>6} {:>6}",
            r.k, r.p, r.err_l, r.err_w1, r.err_w2, r.width_realized, r.depth_realized
        );
    }
    for s in &slopes {
        println!(
            "p = {}: slopes L {:.3}, W1 {:.3}, W2 {:.3}",
            s.p, s.slope_l, s.slope_w1, s.slope_w2
        );
    }
    println!("elapsed {:.1?}", t.elapsed());
    Ok(())
}
