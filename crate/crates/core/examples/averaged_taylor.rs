//! Averaged Taylor polynomials of sin(2 pi x) on shrinking cubes, showing the
//! Bramble-Hilbert error ratio stays roughly constant.

use dsrn::local_poly::{averaged_taylor, bramble_hilbert_check, BallSpec};
use dsrn::target::TargetFunction;

fn main() -> dsrn::Result<()> {
    let f = TargetFunction::sin_2pi(1);
    let q = averaged_taylor(
        &f,
        &BallSpec {
            center: vec![0.4],
            radius: 0.1,
        },
        4,
    )?;
    println!("Q^4 f on B(0.4, 0.1), {} quadrature points:", q.quad_points);
    for (a, c) in q.alphas.iter().zip(&q.coeffs) {
        println!("  x^{} : {c:+.6}", a.0[0]);
    }
    let sides = [0.2, 0.1, 0.05, 0.025, 0.0125];
    for k in 0..=2 {
        println!("seminorm order {k}:");
        for row in bramble_hilbert_check(&f, 4, k, f64::INFINITY, &[0.4], &sides)? {
            println!(
                "  side {:<7} error {:.3e}  ratio {:.4}",
                row.side, row.error_seminorm, row.ratio
            );
        }
    }
    Ok(())
}
