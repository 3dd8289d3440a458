//! Sobolev norms of a target and of the error of its network approximant.

use dsrn::assembler::{assemble_gamma, ApproximantConfig};
use dsrn::metrics::{error_norm, sobolev_norm, Domain, GridSpec};
use dsrn::target::TargetFunction;

fn main() -> dsrn::Result<()> {
    let f = TargetFunction::gaussian_bump(2);
    let domain = Domain::unit_cube(2);
    let grid = GridSpec::new(128, 3);
    for p in [1.0, 2.0, f64::INFINITY] {
        let r = sobolev_norm(&f, 2, p, &domain, &grid)?;
        println!(
            "p = {p}: |f|_L = {:.4}, |f|_W1 = {:.4}, |f|_W2 = {:.4} (discrepancy {:.1e})",
            r.norm_of_order(0),
            r.norm_of_order(1),
            r.norm_of_order(2),
            r.discrepancy
        );
    }
    let cfg = ApproximantConfig::with_cells(4, 3, 2.0, 2)?;
    let (gamma, _) = assemble_gamma(&f, &cfg)?;
    let e = error_norm(&f, &gamma, 2, 2.0, &domain, &GridSpec::new(32, 3))?;
    println!(
        "K = 4 approximant: ||f - gamma||_W2,2 = {:.3e}, kink hits {}, {} params",
        e.norm,
        e.kink_hits,
        gamma.num_params()
    );
    Ok(())
}
