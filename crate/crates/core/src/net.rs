//! Layered networks with mixed ReLU / squared-ReLU activations.
//!
//! A [`Network`] is the chain
//!
//! ```text
//! x = h~_0 -> h_1 = W_1 h~_0 + b_1 -> h~_1 = sigma(h_1) -> ... -> h_{L+1} = W_{L+1} h~_L + b_{L+1}
//! ```
//!
//! where every hidden layer carries its own activation tag and the final
//! layer is affine. Width and depth count hidden layers only.
//!
//! Weights are stored row-sparse. Constructed approximants are dominated by
//! block-diagonal structure, so evaluation cost follows the number of stored
//! entries rather than `rows * cols`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-layer activation tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Activation {
    #[serde(rename = "relu")]
    Relu,
    #[serde(rename = "relu2")]
    ReluSquared,
    #[serde(rename = "linear")]
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::ReluSquared => {
                let r = z.max(0.0);
                r * r
            }
            Activation::Linear => z,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::ReluSquared => "relu2",
            Activation::Linear => "linear",
        }
    }
}

/// One affine map followed by an activation.
#[derive(Clone, Debug)]
pub struct Layer {
    in_dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl Layer {
    /// Dense constructor. Every entry is stored, including zeros, so all of
    /// them are trainable parameters.
    pub fn dense(weights: Vec<Vec<f64>>, bias: Vec<f64>, activation: Activation) -> Result<Layer> {
        let in_dim = weights
            .first()
            .map(|r| r.len())
            .ok_or_else(|| Error::Structure("layer has no rows".into()))?;
        let rows = weights
            .into_iter()
            .map(|row| row.into_iter().enumerate().collect())
            .collect();
        Self::from_rows(in_dim, rows, bias, activation, false)
    }

    /// Sparse constructor from per-row `(column, value)` lists. Duplicate
    /// columns are summed and exact zeros are dropped.
    pub fn sparse(
        in_dim: usize,
        rows: Vec<Vec<(usize, f64)>>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Layer> {
        Self::from_rows(in_dim, rows, bias, activation, true)
    }

    fn from_rows(
        in_dim: usize,
        rows: Vec<Vec<(usize, f64)>>,
        bias: Vec<f64>,
        activation: Activation,
        prune: bool,
    ) -> Result<Layer> {
        if in_dim == 0 {
            return Err(Error::Structure("layer input dimension must be positive".into()));
        }
        if rows.is_empty() {
            return Err(Error::Structure("layer has no rows".into()));
        }
        if rows.len() != bias.len() {
            return Err(Error::Structure(format!(
                "weight rows ({}) != bias length ({})",
                rows.len(),
                bias.len()
            )));
        }
        if let Some(b) = bias.iter().find(|b| !b.is_finite()) {
            return Err(Error::Overflow(format!("non-finite bias {b}")));
        }
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for (r, mut row) in rows.into_iter().enumerate() {
            if prune {
                row.sort_by_key(|&(c, _)| c);
            }
            let start = cols.len();
            for (c, v) in row {
                if c >= in_dim {
                    return Err(Error::Structure(format!(
                        "row {r} references column {c} >= input dimension {in_dim}"
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::Overflow(format!("non-finite weight {v} in row {r}")));
                }
                if prune && cols.len() > start && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                    continue;
                }
                cols.push(c);
                vals.push(v);
            }
            if prune {
                // drop entries that are (or summed to) +0.0
                let mut w = start;
                for k in start..cols.len() {
                    if vals[k].to_bits() != 0 {
                        cols[w] = cols[k];
                        vals[w] = vals[k];
                        w += 1;
                    }
                }
                cols.truncate(w);
                vals.truncate(w);
            } else if cols[start..].windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Structure(format!("row {r} has unsorted columns")));
            }
            row_ptr.push(cols.len());
        }
        Ok(Layer {
            in_dim,
            row_ptr,
            cols,
            vals,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.bias.len()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Stored `(columns, values)` of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    /// Number of stored weights.
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        c.binary_search(&j).map(|k| v[k]).unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.out_dim())
            .map(|i| {
                let mut row = vec![0.0; self.in_dim];
                let (c, v) = self.row(i);
                for (&j, &w) in c.iter().zip(v) {
                    row[j] = w;
                }
                row
            })
            .collect()
    }

    /// Stored weight values, row-major over the sparsity pattern.
    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.vals
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    /// Column index of every stored value, aligned with [`Layer::values`].
    pub fn columns(&self) -> &[usize] {
        &self.cols
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_ptr
    }

    /// `out = W x + b`.
    #[inline]
    pub fn affine_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            let mut acc = self.bias[i];
            for (&j, &w) in c.iter().zip(v) {
                acc += w * x[j];
            }
            *o = acc;
        }
    }

    fn sparse_rows(&self) -> Vec<Vec<(usize, f64)>> {
        (0..self.out_dim())
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter().copied().zip(v.iter().copied()).collect()
            })
            .collect()
    }

    fn with_activation(mut self, activation: Activation) -> Layer {
        self.activation = activation;
        self
    }
}

impl PartialEq for Layer {
    fn eq(&self, other: &Self) -> bool {
        self.in_dim == other.in_dim
            && self.activation == other.activation
            && self.bias.len() == other.bias.len()
            && self
                .bias
                .iter()
                .zip(&other.bias)
                .all(|(a, b)| a.to_bits() == b.to_bits())
            && self
                .to_dense()
                .iter()
                .flatten()
                .zip(other.to_dense().iter().flatten())
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Feed-forward network: hidden layers plus a final linear layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    input_dim: usize,
    layers: Vec<Layer>,
}

impl Network {
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Network> {
        if input_dim == 0 {
            return Err(Error::Structure("input dimension must be positive".into()));
        }
        let Some(last) = layers.last() else {
            return Err(Error::Structure("network needs at least an output layer".into()));
        };
        if last.activation != Activation::Linear {
            return Err(Error::Structure("final layer must be linear".into()));
        }
        let mut prev = input_dim;
        for (k, layer) in layers.iter().enumerate() {
            if layer.in_dim != prev {
                return Err(Error::Structure(format!(
                    "layer {k} expects input {} but receives {prev}",
                    layer.in_dim
                )));
            }
            if k + 1 < layers.len() && layer.activation == Activation::Linear {
                return Err(Error::Structure(format!(
                    "hidden layer {k} is linear; linear is reserved for the output layer"
                )));
            }
            prev = layer.out_dim();
        }
        Ok(Network { input_dim, layers })
    }

    /// Network with no hidden layer: `x -> A x + c`.
    pub fn affine(input_dim: usize, a: Vec<Vec<(usize, f64)>>, c: Vec<f64>) -> Result<Network> {
        let out = Layer::sparse(input_dim, a, c, Activation::Linear)?;
        Network::new(input_dim, vec![out])
    }

    /// Constant map `R^d -> R^k`.
    pub fn constant(input_dim: usize, values: Vec<f64>) -> Result<Network> {
        Network::affine(input_dim, vec![Vec::new(); values.len()], values)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.out_dim()).unwrap_or(0)
    }

    /// Number of hidden layers.
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    /// Maximum hidden width (0 for an affine map).
    pub fn width(&self) -> usize {
        self.hidden().iter().map(Layer::out_dim).max().unwrap_or(0)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn hidden(&self) -> &[Layer] {
        &self.layers[..self.layers.len() - 1]
    }

    /// Total stored weights plus biases.
    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.nnz() + l.out_dim()).sum()
    }

    /// Activation tags of the hidden layers in order.
    pub fn schedule(&self) -> Vec<Activation> {
        self.hidden().iter().map(Layer::activation).collect()
    }

    /// `(relu layers, relu2 layers)` when the schedule is a ReLU prefix
    /// followed by a squared-ReLU suffix.
    pub fn segments(&self) -> Option<(usize, usize)> {
        let sched = self.schedule();
        let l1 = sched.iter().take_while(|a| **a == Activation::Relu).count();
        if sched[l1..].iter().all(|a| *a == Activation::ReluSquared) {
            Some((l1, sched.len() - l1))
        } else {
            None
        }
    }

    /// Forward evaluation.
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::Dimension(format!(
                "input has length {} but network expects {}",
                x.len(),
                self.input_dim
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Overflow("non-finite input".into()));
        }
        let mut cur = x.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            let mut next = vec![0.0; layer.out_dim()];
            layer.affine_into(&cur, &mut next);
            for v in next.iter_mut() {
                *v = layer.activation.apply(*v);
            }
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::Overflow(format!("non-finite activation in layer {k}")));
            }
            cur = next;
        }
        Ok(cur)
    }

    /// Convenience for scalar-output networks.
    pub fn evaluate_scalar(&self, x: &[f64]) -> Result<f64> {
        let out = self.evaluate(x)?;
        if out.len() != 1 {
            return Err(Error::Dimension(format!("expected scalar output, got {}", out.len())));
        }
        Ok(out[0])
    }

    /// `y -> A y + c` applied after the network.
    pub fn with_readout(&self, a: Vec<Vec<(usize, f64)>>, c: Vec<f64>) -> Result<Network> {
        let readout = Network::affine(self.output_dim(), a, c)?;
        compose(&readout, self)
    }

    /// Appends a ReLU layer computing `sigma(y_k)` for every output. Exact
    /// only when all outputs are nonnegative; the schedule must not contain
    /// squared-ReLU layers yet.
    pub fn rectify_outputs(&self) -> Result<Network> {
        if self.schedule().contains(&Activation::ReluSquared) {
            return Err(Error::Structure(
                "cannot append a ReLU layer after squared-ReLU layers".into(),
            ));
        }
        let k = self.output_dim();
        let mut layers = self.layers.clone();
        let out = layers.pop().unwrap().with_activation(Activation::Relu);
        layers.push(out);
        layers.push(Layer::sparse(
            k,
            (0..k).map(|i| vec![(i, 1.0)]).collect(),
            vec![0.0; k],
            Activation::Linear,
        )?);
        Network::new(self.input_dim, layers)
    }

    /// Pads the schedule to `relu` leading ReLU layers and `relu2` trailing
    /// squared-ReLU layers with exact identity layers.
    pub fn pad_schedule(&self, relu: usize, relu2: usize) -> Result<Network> {
        let (a, b) = self
            .segments()
            .ok_or_else(|| Error::Structure("schedule is not a ReLU prefix plus squared-ReLU suffix".into()))?;
        if a > relu || b > relu2 {
            return Err(Error::Structure(format!(
                "cannot pad ({a}, {b}) down to ({relu}, {relu2})"
            )));
        }
        let mut net = self.clone();
        for _ in a..relu {
            net = compose(&net, &relu_identity(self.input_dim)?)?;
        }
        for _ in b..relu2 {
            net = compose(&relu2_identity(net.output_dim())?, &net)?;
        }
        Ok(net)
    }
}

/// Exact identity on `R^d` with one ReLU layer of `2d` neurons.
pub fn relu_identity(d: usize) -> Result<Network> {
    let rows = (0..d)
        .map(|i| vec![(i, 1.0)])
        .chain((0..d).map(|i| vec![(i, -1.0)]))
        .collect();
    let hidden = Layer::sparse(d, rows, vec![0.0; 2 * d], Activation::Relu)?;
    let out = Layer::sparse(
        2 * d,
        (0..d).map(|i| vec![(i, 1.0), (d + i, -1.0)]).collect(),
        vec![0.0; d],
        Activation::Linear,
    )?;
    Network::new(d, vec![hidden, out])
}

/// Exact identity on `R^d` with one squared-ReLU layer of `4d` neurons,
/// using `x = ((x+1)^2 - (x-1)^2) / 4`.
pub fn relu2_identity(d: usize) -> Result<Network> {
    let mut rows = Vec::with_capacity(4 * d);
    let mut bias = Vec::with_capacity(4 * d);
    for i in 0..d {
        rows.push(vec![(i, 1.0)]);
        bias.push(1.0);
        rows.push(vec![(i, -1.0)]);
        bias.push(-1.0);
        rows.push(vec![(i, 1.0)]);
        bias.push(-1.0);
        rows.push(vec![(i, -1.0)]);
        bias.push(1.0);
    }
    let hidden = Layer::sparse(d, rows, bias, Activation::ReluSquared)?;
    let out = Layer::sparse(
        4 * d,
        (0..d)
            .map(|i| vec![(4 * i, 0.25), (4 * i + 1, 0.25), (4 * i + 2, -0.25), (4 * i + 3, -0.25)])
            .collect(),
        vec![0.0; d],
        Activation::Linear,
    )?;
    Network::new(d, vec![hidden, out])
}

/// `outer ∘ inner`; the output layer of `inner` is folded into the first
/// layer of `outer`.
pub fn compose(outer: &Network, inner: &Network) -> Result<Network> {
    if outer.input_dim != inner.output_dim() {
        return Err(Error::Dimension(format!(
            "cannot compose: outer expects {} inputs, inner produces {}",
            outer.input_dim,
            inner.output_dim()
        )));
    }
    let inner_out = inner.layers.last().unwrap();
    let first = &outer.layers[0];
    let cols = inner_out.in_dim;
    let mut acc = vec![0.0; cols];
    let mut touched: Vec<usize> = Vec::new();
    let mut mark = vec![false; cols];
    let mut rows = Vec::with_capacity(first.out_dim());
    let mut bias = Vec::with_capacity(first.out_dim());
    for i in 0..first.out_dim() {
        let (oc, ov) = first.row(i);
        let mut b = first.bias[i];
        for (&k, &w) in oc.iter().zip(ov) {
            b += w * inner_out.bias[k];
            let (ic, iv) = inner_out.row(k);
            for (&j, &u) in ic.iter().zip(iv) {
                if !mark[j] {
                    mark[j] = true;
                    touched.push(j);
                }
                acc[j] += w * u;
            }
        }
        touched.sort_unstable();
        let row = touched
            .iter()
            .map(|&j| {
                let v = acc[j];
                acc[j] = 0.0;
                mark[j] = false;
                (j, v)
            })
            .collect();
        touched.clear();
        rows.push(row);
        bias.push(b);
    }
    let merged = Layer::sparse(cols, rows, bias, first.activation)?;
    let mut layers: Vec<Layer> = inner.hidden().to_vec();
    layers.push(merged);
    layers.extend(outer.layers[1..].iter().cloned());
    Network::new(inner.input_dim, layers)
}

/// Runs several networks on the same input and concatenates their outputs.
/// Schedules are aligned by exact identity padding.
pub fn parallel(nets: &[Network]) -> Result<Network> {
    let Some(first) = nets.first() else {
        return Err(Error::Structure("parallel composition of zero networks".into()));
    };
    let d = first.input_dim;
    if nets.iter().any(|n| n.input_dim != d) {
        return Err(Error::Dimension(
            "parallel networks must share the input dimension".into(),
        ));
    }
    let mut relu = 0;
    let mut relu2 = 0;
    for n in nets {
        let (a, b) = n
            .segments()
            .ok_or_else(|| Error::Structure("schedule is not a ReLU prefix plus squared-ReLU suffix".into()))?;
        relu = relu.max(a);
        relu2 = relu2.max(b);
    }
    let padded: Vec<Network> = nets
        .iter()
        .map(|n| n.pad_schedule(relu, relu2))
        .collect::<Result<_>>()?;
    let n_layers = relu + relu2 + 1;
    let mut layers = Vec::with_capacity(n_layers);
    for k in 0..n_layers {
        let mut rows = Vec::new();
        let mut bias = Vec::new();
        let mut offset = 0;
        for net in &padded {
            let layer = &net.layers[k];
            let shift = if k == 0 { 0 } else { offset };
            for (i, row) in layer.sparse_rows().into_iter().enumerate() {
                rows.push(row.into_iter().map(|(j, v)| (j + shift, v)).collect());
                bias.push(layer.bias[i]);
            }
            offset += layer.in_dim;
        }
        let in_dim = if k == 0 { d } else { offset };
        let act = padded[0].layers[k].activation;
        layers.push(Layer::sparse(in_dim, rows, bias, act)?);
    }
    Network::new(d, layers)
}

/// Structural profile of a deep super ReLU network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DsrnProfile {
    pub c: f64,
    /// Total hidden depth `L`.
    pub depth: usize,
    /// Leading ReLU segment `L1`.
    pub relu_depth: usize,
    /// Trailing squared-ReLU segment `L2`.
    pub relu2_depth: usize,
}

impl DsrnProfile {
    /// `C * log2(L)`, the squared-ReLU allowance.
    pub fn relu2_allowance(&self) -> f64 {
        if self.depth == 0 {
            0.0
        } else {
            self.c * (self.depth as f64).log2()
        }
    }

    /// Smallest `C` for which this schedule passes; `None` when no finite
    /// `C` works (`L <= 1` with a squared-ReLU layer).
    pub fn min_c(&self) -> Option<f64> {
        if self.relu2_depth == 0 {
            return Some(0.0);
        }
        let lg = (self.depth as f64).log2();
        (lg > 0.0).then(|| self.relu2_depth as f64 / lg)
    }
}

/// Checks membership in the DSRN class with constant `c` (base-2 log).
pub fn validate_dsrn(net: &Network, c: f64) -> Result<DsrnProfile> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::Spec(format!("C must be a positive real, got {c}")));
    }
    let (l1, l2) = net
        .segments()
        .ok_or_else(|| Error::Structure("a squared-ReLU layer precedes a ReLU layer".into()))?;
    let profile = DsrnProfile {
        c,
        depth: net.depth(),
        relu_depth: l1,
        relu2_depth: l2,
    };
    if l2 > 0 {
        let limit = profile.relu2_allowance();
        // tolerate rounding in C*log2(L) for exact integer limits
        if l2 as f64 > limit * (1.0 + 1e-12) {
            return Err(Error::Budget { l2, limit });
        }
    }
    Ok(profile)
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    activation: Activation,
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    input_dim: usize,
    layers: Vec<LayerFile>,
}

/// UTF-8 JSON encoding with shortest round-trip float formatting.
pub fn serialize(net: &Network) -> Vec<u8> {
    let file = NetworkFile {
        input_dim: net.input_dim,
        layers: net
            .layers
            .iter()
            .map(|l| LayerFile {
                weights: l.to_dense(),
                bias: l.bias.clone(),
                activation: l.activation,
            })
            .collect(),
    };
    serde_json::to_vec(&file).expect("network serialization is infallible")
}

pub fn deserialize(bytes: &[u8]) -> Result<Network> {
    let file: NetworkFile = serde_json::from_slice(bytes).map_err(|e| Error::Parse(e.to_string()))?;
    let mut layers = Vec::with_capacity(file.layers.len());
    let mut prev = file.input_dim;
    for (k, lf) in file.layers.into_iter().enumerate() {
        if lf.weights.iter().any(|r| r.len() != prev) {
            return Err(Error::Parse(format!("layer {k}: weight rows must have length {prev}")));
        }
        let rows = lf
            .weights
            .into_iter()
            .map(|r| r.into_iter().enumerate().collect())
            .collect();
        let layer = Layer::sparse(prev.max(1), rows, lf.bias, lf.activation)
            .map_err(|e| Error::Parse(format!("layer {k}: {e}")))?;
        prev = layer.out_dim();
        layers.push(layer);
    }
    Network::new(file.input_dim, layers).map_err(|e| Error::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_relu() -> Network {
        Network::new(
            1,
            vec![
                Layer::dense(vec![vec![1.0]], vec![0.0], Activation::Relu).unwrap(),
                Layer::dense(vec![vec![1.0]], vec![0.0], Activation::Linear).unwrap(),
            ],
        )
        .unwrap()
    }

    fn schedule_net(sched: &[Activation]) -> Network {
        let mut layers: Vec<Layer> = sched
            .iter()
            .map(|&a| Layer::dense(vec![vec![1.0]], vec![0.0], a).unwrap())
            .collect();
        layers.push(Layer::dense(vec![vec![1.0]], vec![0.0], Activation::Linear).unwrap());
        Network::new(1, layers).unwrap()
    }

    #[test]
    fn relu_kills_negative_input() {
        assert_eq!(single_relu().evaluate(&[-2.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let err = single_relu().evaluate(&[1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn overflow_is_reported() {
        let net = Network::new(
            1,
            vec![
                Layer::dense(vec![vec![1e200]], vec![0.0], Activation::ReluSquared).unwrap(),
                Layer::dense(vec![vec![1e200]], vec![0.0], Activation::Linear).unwrap(),
            ],
        )
        .unwrap();
        assert!(matches!(net.evaluate(&[1e10]), Err(Error::Overflow(_))));
    }

    #[test]
    fn linear_hidden_layer_is_rejected() {
        let layers = vec![
            Layer::dense(vec![vec![1.0]], vec![0.0], Activation::Linear).unwrap(),
            Layer::dense(vec![vec![1.0]], vec![0.0], Activation::Linear).unwrap(),
        ];
        assert!(matches!(Network::new(1, layers), Err(Error::Structure(_))));
    }

    #[test]
    fn dsrn_budget_examples() {
        use Activation::*;
        let mut sched = vec![Relu; 12];
        sched.extend([ReluSquared; 4]);
        let p = validate_dsrn(&schedule_net(&sched), 1.0).unwrap();
        assert_eq!((p.depth, p.relu_depth, p.relu2_depth), (16, 12, 4));

        let mut sched = vec![Relu; 11];
        sched.extend([ReluSquared; 5]);
        assert!(matches!(
            validate_dsrn(&schedule_net(&sched), 1.0),
            Err(Error::Budget { l2: 5, .. })
        ));

        let p = validate_dsrn(&schedule_net(&[Relu; 7]), 0.5).unwrap();
        assert_eq!(p.relu2_depth, 0);

        assert!(matches!(
            validate_dsrn(&schedule_net(&[ReluSquared, Relu]), 10.0),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn compose_folds_affine_maps() {
        let inner = Network::affine(2, vec![vec![(0, 2.0), (1, 1.0)]], vec![1.0]).unwrap();
        let outer = single_relu();
        let net = compose(&outer, &inner).unwrap();
        assert_eq!(net.depth(), 1);
        assert_eq!(net.evaluate(&[1.0, 2.0]).unwrap(), vec![5.0]);
        assert_eq!(net.evaluate(&[-3.0, 2.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn parallel_pads_and_concatenates() {
        let a = relu_identity(2).unwrap();
        let b = relu2_identity(2).unwrap();
        let c = Network::constant(2, vec![7.0]).unwrap();
        let net = parallel(&[a, b, c]).unwrap();
        assert_eq!(net.segments(), Some((1, 1)));
        let y = net.evaluate(&[0.3, -0.7]).unwrap();
        let want = [0.3, -0.7, 0.3, -0.7, 7.0];
        for (u, v) in y.iter().zip(want) {
            assert!((u - v).abs() < 1e-14, "{y:?}");
        }
    }

    #[test]
    fn truncated_bytes_fail_to_parse() {
        let bytes = serialize(&single_relu());
        assert!(matches!(deserialize(&bytes[..bytes.len() / 2]), Err(Error::Parse(_))));
    }

    #[test]
    fn inconsistent_dimensions_fail_to_parse() {
        let text = br#"{"input_dim":2,"layers":[{"weights":[[1.0]],"bias":[0.0],"activation":"linear"}]}"#;
        assert!(matches!(deserialize(text), Err(Error::Parse(_))));
        let text = br#"{"input_dim":1,"layers":[{"weights":[[null]],"bias":[0.0],"activation":"linear"}]}"#;
        assert!(matches!(deserialize(text), Err(Error::Parse(_))));
    }

    #[test]
    fn affine_net_round_trips() {
        let net = Network::affine(3, vec![vec![(0, 0.1), (2, -3.5)]], vec![1e-300]).unwrap();
        let back = deserialize(&serialize(&net)).unwrap();
        assert_eq!(back, net);
        assert_eq!(back.depth(), 0);
        assert_eq!(
            back.evaluate(&[1.0, 5.0, 2.0]).unwrap(),
            net.evaluate(&[1.0, 5.0, 2.0]).unwrap()
        );
    }
}
