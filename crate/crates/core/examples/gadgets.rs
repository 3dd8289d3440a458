//! Builds the exact algebra gadgets and a polynomial network, then prints
//! their sizes and the worst error over a grid of [-2, 2]^2.

use dsrn::gadgets::{make_algebra_gadget, make_monomial, make_polynomial, AlgebraGadget, MultiIndex};
use dsrn::net::Network;

type Oracle = Box<dyn Fn(f64, f64) -> f64>;

fn worst_error(net: &Network, f: impl Fn(f64, f64) -> f64) -> dsrn::Result<f64> {
    let mut worst = 0.0f64;
    for i in 0..=40 {
        for j in 0..=40 {
            let (x, y) = (-2.0 + i as f64 / 10.0, -2.0 + j as f64 / 10.0);
            let input = if net.input_dim() == 1 { vec![x] } else { vec![x, y] };
            worst = worst.max((net.evaluate_scalar(&input)? - f(x, y)).abs());
        }
    }
    Ok(worst)
}

fn main() -> dsrn::Result<()> {
    let terms = [
        (1.0, MultiIndex(vec![2, 1])),
        (-3.0, MultiIndex(vec![0, 3])),
        (0.5, MultiIndex(vec![0, 0])),
    ];
    let cases: Vec<(&str, Network, Oracle)> = vec![
        (
            "x^2",
            make_algebra_gadget(AlgebraGadget::Square)?,
            Box::new(|x, _| x * x),
        ),
        (
            "x*y",
            make_algebra_gadget(AlgebraGadget::Product)?,
            Box::new(|x, y| x * y),
        ),
        (
            "x^3 y^2",
            make_monomial(&MultiIndex(vec![3, 2]), 2)?,
            Box::new(|x: f64, y: f64| x.powi(3) * y * y),
        ),
        (
            "x^2 y - 3 y^3 + 1/2",
            make_polynomial(&terms, 2)?,
            Box::new(|x, y: f64| x * x * y - 3.0 * y.powi(3) + 0.5),
        ),
    ];
    println!(
        "{:<22} {:>6} {:>6} {:>8} {:>12}",
        "gadget", "depth", "width", "params", "max error"
    );
    for (name, net, f) in &cases {
        println!(
            "{:<22} {:>6} {:>6} {:>8} {:>12.3e}",
            name,
            net.depth(),
            net.width(),
            net.num_params(),
            worst_error(net, f)?
        );
    }
    Ok(())
}
