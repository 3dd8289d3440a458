//! VC and pseudo-dimension bounds for second derivatives of DSRNs, and an
//! empirical count of sign patterns for a tiny architecture.

use dsrn::complexity::{empirical_shatter_probe, pdim_upper, vc_recursion_bound, vcdim_upper, ArchSpec};
use dsrn::net::Activation;

fn main() -> dsrn::Result<()> {
    println!(
        "{:>4} {:>4} {:>14} {:>12} {:>14}",
        "N", "L", "VCdim bound", "normalized", "Pdim (d=2)"
    );
    for n in [2usize, 4, 8, 16] {
        for l in [2usize, 4, 8, 16] {
            let vc = vcdim_upper(n, l, 1.0)?;
            let pd = pdim_upper(n, l, 1.0, 2)?;
            println!(
                "{n:>4} {l:>4} {:>14.4e} {:>12.3} {:>14.4e}",
                vc.bound, vc.normalized, pd.bound
            );
        }
    }
    let arch = ArchSpec::new(1, vec![2], vec![Activation::ReluSquared])?;
    let points: Vec<Vec<f64>> = (0..12).map(|i| vec![-1.0 + i as f64 / 5.5]).collect();
    let probe = empirical_shatter_probe(&arch, &points, (0, 0), 20_000, 1)?;
    let bound = vc_recursion_bound(&arch, 1.0, points.len() as f64)?;
    println!(
        "U = {}: {} sign patterns of f'' on 12 points (bound e^{:.1}), largest shattered subset {}",
        arch.u(),
        probe.distinct_patterns,
        bound.bound.ln,
        probe.shattered
    );
    Ok(())
}
