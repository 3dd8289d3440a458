//! Evaluates the bump partition of unity in two dimensions and checks the
//! sum and the derivative scales on a grid.

use dsrn::gadgets::{make_partition_network, PartitionSpec};
use dsrn::jet::eval_jet2;

fn main() -> dsrn::Result<()> {
    let d = 2;
    for k in [2usize, 4, 8] {
        let nets = PartitionSpec::all_regions(d)
            .into_iter()
            .map(|m| make_partition_network(&PartitionSpec { k, m }))
            .collect::<dsrn::Result<Vec<_>>>()?;
        let (mut sum_err, mut grad, mut hess) = (0.0f64, 0.0f64, 0.0f64);
        // offset grid: breakpoints sit on multiples of 1/(8K), where jets
        // only see one-sided derivatives
        let n = 16 * k;
        for i in 0..n {
            for j in 0..n {
                let x = [(i as f64 + 0.37) / n as f64, (j as f64 + 0.61) / n as f64];
                let mut sum = 0.0;
                for net in &nets {
                    let jet = eval_jet2(net, &x)?;
                    sum += jet.value;
                    grad = jet.grad.iter().fold(grad, |a, g| a.max(g.abs()));
                    hess = jet.hess.iter().fold(hess, |a, h| a.max(h.abs()));
                }
                sum_err = sum_err.max((sum - 1.0).abs());
            }
        }
        let kf = k as f64;
        println!(
            "K = {k:>2}: max |sum - 1| = {sum_err:.1e}, max |Ds| / K = {:.2}, max |D2s| / K^2 = {:.2}, depth {}",
            grad / kf,
            hess / (kf * kf),
            nets[0].depth()
        );
    }
    Ok(())
}
