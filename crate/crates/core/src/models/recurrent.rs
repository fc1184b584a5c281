use super::layers::{apply_mask, draw_dropout, Mask, Seq};
use crate::error::{Error, Result};
use crate::nn::{gemm, glorot_bound, sigmoid_scalar, Parameter, Tensor};
use crate::rng::Rng;

fn check_input(x: &Seq, mask: &Mask, input: usize) -> Result<()> {
    if x.dim != input {
        return Err(Error::shape(format!("recurrent layer expects width {input}, got {}", x.dim)));
    }
    if mask.steps != x.steps || mask.batch != x.batch {
        return Err(Error::shape("mask does not match input sequence"));
    }
    Ok(())
}

fn time_order(steps: usize, reverse: bool) -> Box<dyn DoubleEndedIterator<Item = usize>> {
    if reverse {
        Box::new((0..steps).rev())
    } else {
        Box::new(0..steps)
    }
}

/// `x W_x + b` for every step at once.
fn input_projection(x: &Seq, w_x: &Parameter, b: &Parameter) -> Seq {
    let g = b.len();
    let mut pre = Seq::zeros(x.steps, x.batch, g);
    for r in pre.data.chunks_exact_mut(g) {
        r.copy_from_slice(b.value.data());
    }
    gemm(false, false, x.steps * x.batch, g, x.dim, 1.0, &x.data, w_x.value.data(), 1.0, &mut pre.data);
    pre
}

/// Weight gradients shared by both cell types, plus `dL/dx`.
fn accumulate_input_grads(x: &Seq, hprev: &Seq, dz: &Seq, w_x: &mut Parameter, w_h: &mut Parameter, b: &mut Parameter) -> Seq {
    let (n, g, h) = (x.steps * x.batch, dz.dim, hprev.dim);
    gemm(true, false, x.dim, g, n, 1.0, &x.data, &dz.data, 1.0, w_x.grad.data_mut());
    gemm(true, false, h, g, n, 1.0, &hprev.data, &dz.data, 1.0, w_h.grad.data_mut());
    let db = b.grad.data_mut();
    for r in dz.data.chunks_exact(g) {
        db.iter_mut().zip(r).for_each(|(a, d)| *a += d);
    }
    let mut dx = Seq::zeros(x.steps, x.batch, x.dim);
    gemm(false, true, n, x.dim, g, 1.0, &dz.data, w_x.value.data(), 0.0, &mut dx.data);
    dx
}

/// Elman recurrence `h_t = tanh(x_t W_x + h_{t-1} W_h + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RnnLayer {
    pub w_x: Parameter,
    pub w_h: Parameter,
    pub b: Parameter,
}

#[derive(Clone, Debug)]
pub struct RnnCache {
    hprev: Seq,
    act: Seq,
}

impl RnnLayer {
    pub fn new(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        RnnLayer {
            w_x: Parameter::new(Tensor::uniform(&[input, hidden], glorot_bound(input, hidden), rng)),
            w_h: Parameter::new(Tensor::uniform(&[hidden, hidden], glorot_bound(hidden, hidden), rng)),
            b: Parameter::new(Tensor::zeros(&[hidden])),
        }
    }

    pub fn input_size(&self) -> usize {
        self.w_x.shape()[0]
    }

    pub fn hidden_size(&self) -> usize {
        self.w_h.shape()[0]
    }

    /// Runs the sequence (right to left when `reverse`). Masked cells carry
    /// the previous state unchanged.
    pub fn forward(&self, x: &Seq, mask: &Mask, reverse: bool) -> Result<(Seq, RnnCache)> {
        check_input(x, mask, self.input_size())?;
        let (batch, hd) = (x.batch, self.hidden_size());
        let mut act = input_projection(x, &self.w_x, &self.b);
        let mut out = Seq::zeros(x.steps, batch, hd);
        let mut hprev = Seq::zeros(x.steps, batch, hd);
        let mut h = vec![0.0; batch * hd];
        for t in time_order(x.steps, reverse) {
            hprev.at_mut(t).copy_from_slice(&h);
            let z = act.at_mut(t);
            gemm(false, false, batch, hd, hd, 1.0, &h, self.w_h.value.data(), 1.0, z);
            for b in 0..batch {
                if mask.is_valid(t, b) {
                    let row = &mut z[b * hd..(b + 1) * hd];
                    row.iter_mut().for_each(|v| *v = v.tanh());
                    h[b * hd..(b + 1) * hd].copy_from_slice(row);
                }
            }
            out.at_mut(t).copy_from_slice(&h);
        }
        Ok((out, RnnCache { hprev, act }))
    }

    /// Accumulates parameter gradients from `dout` (gradient w.r.t. every
    /// output step) and returns `dL/dx`.
    pub fn backward(&mut self, x: &Seq, mask: &Mask, cache: &RnnCache, dout: &Seq, reverse: bool) -> Seq {
        let (batch, hd) = (x.batch, self.hidden_size());
        let mut dz = Seq::zeros(x.steps, batch, hd);
        let mut dh = vec![0.0; batch * hd];
        let mut next = vec![0.0; batch * hd];
        for t in time_order(x.steps, reverse).rev() {
            dh.iter_mut().zip(dout.at(t)).for_each(|(a, d)| *a += d);
            let a = cache.act.at(t);
            let dzt = dz.at_mut(t);
            for b in 0..batch {
                if mask.is_valid(t, b) {
                    for k in b * hd..(b + 1) * hd {
                        dzt[k] = dh[k] * (1.0 - a[k] * a[k]);
                    }
                }
            }
            gemm(false, true, batch, hd, hd, 1.0, dzt, self.w_h.value.data(), 0.0, &mut next);
            for b in 0..batch {
                if !mask.is_valid(t, b) {
                    next[b * hd..(b + 1) * hd].copy_from_slice(&dh[b * hd..(b + 1) * hd]);
                }
            }
            std::mem::swap(&mut dh, &mut next);
        }
        accumulate_input_grads(x, &cache.hprev, &dz, &mut self.w_x, &mut self.w_h, &mut self.b)
    }

    pub fn parameters(&self) -> Vec<(&'static str, &Parameter)> {
        vec![("w_x", &self.w_x), ("w_h", &self.w_h), ("b", &self.b)]
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.w_x, &mut self.w_h, &mut self.b]
    }
}

/// LSTM with gate blocks ordered input, forget, candidate, output in the
/// columns of `w_x`, `w_h` and `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayer {
    pub w_x: Parameter,
    pub w_h: Parameter,
    pub b: Parameter,
}

#[derive(Clone, Debug)]
pub struct LstmCache {
    hprev: Seq,
    cprev: Seq,
    gates: Seq,
    tanh_c: Seq,
}

impl LstmLayer {
    /// Glorot-uniform weights per gate block; forget-gate bias starts at 1.
    pub fn new(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let g = 4 * hidden;
        let mut w_x = Tensor::zeros(&[input, g]);
        let mut w_h = Tensor::zeros(&[hidden, g]);
        for (w, fan_in) in [(&mut w_x, input), (&mut w_h, hidden)] {
            let block = Tensor::uniform(&[fan_in, g], glorot_bound(fan_in, hidden), rng);
            w.data_mut().copy_from_slice(block.data());
        }
        let mut b = Tensor::zeros(&[g]);
        b.data_mut()[hidden..2 * hidden].fill(1.0);
        LstmLayer {
            w_x: Parameter::new(w_x),
            w_h: Parameter::new(w_h),
            b: Parameter::new(b),
        }
    }

    pub fn input_size(&self) -> usize {
        self.w_x.shape()[0]
    }

    pub fn hidden_size(&self) -> usize {
        self.w_h.shape()[0]
    }

    pub fn forward(&self, x: &Seq, mask: &Mask, reverse: bool) -> Result<(Seq, LstmCache)> {
        self.forward_with_state(x, mask, reverse, None)
    }

    /// As [`LstmLayer::forward`], starting from `(h0, c0)` rows instead of
    /// zeros. Also returns the final cell state.
    pub fn forward_with_state(
        &self,
        x: &Seq,
        mask: &Mask,
        reverse: bool,
        init: Option<(&[f64], &[f64])>,
    ) -> Result<(Seq, LstmCache)> {
        check_input(x, mask, self.input_size())?;
        let (batch, hd) = (x.batch, self.hidden_size());
        let mut gates = input_projection(x, &self.w_x, &self.b);
        let mut out = Seq::zeros(x.steps, batch, hd);
        let mut hprev = Seq::zeros(x.steps, batch, hd);
        let mut cprev = Seq::zeros(x.steps, batch, hd);
        let mut tanh_c = Seq::zeros(x.steps, batch, hd);
        let (mut h, mut c) = match init {
            Some((h0, c0)) => (h0.to_vec(), c0.to_vec()),
            None => (vec![0.0; batch * hd], vec![0.0; batch * hd]),
        };
        for t in time_order(x.steps, reverse) {
            hprev.at_mut(t).copy_from_slice(&h);
            cprev.at_mut(t).copy_from_slice(&c);
            let z = gates.at_mut(t);
            gemm(false, false, batch, 4 * hd, hd, 1.0, &h, self.w_h.value.data(), 1.0, z);
            let tc = tanh_c.at_mut(t);
            for b in 0..batch {
                if !mask.is_valid(t, b) {
                    continue;
                }
                let zr = &mut z[b * 4 * hd..(b + 1) * 4 * hd];
                for k in 0..hd {
                    let i = sigmoid_scalar(zr[k]);
                    let f = sigmoid_scalar(zr[hd + k]);
                    let g = zr[2 * hd + k].tanh();
                    let o = sigmoid_scalar(zr[3 * hd + k]);
                    zr[k] = i;
                    zr[hd + k] = f;
                    zr[2 * hd + k] = g;
                    zr[3 * hd + k] = o;
                    let idx = b * hd + k;
                    c[idx] = f * c[idx] + i * g;
                    tc[idx] = c[idx].tanh();
                    h[idx] = o * tc[idx];
                }
            }
            out.at_mut(t).copy_from_slice(&h);
        }
        Ok((
            out,
            LstmCache {
                hprev,
                cprev,
                gates,
                tanh_c,
            },
        ))
    }

    pub fn backward(&mut self, x: &Seq, mask: &Mask, cache: &LstmCache, dout: &Seq, reverse: bool) -> Seq {
        self.backward_with_state(x, mask, cache, dout, reverse, None).0
    }

    /// Backward pass that also accepts a gradient on the final cell state
    /// and returns the gradients on the initial `(h0, c0)`.
    pub fn backward_with_state(
        &mut self,
        x: &Seq,
        mask: &Mask,
        cache: &LstmCache,
        dout: &Seq,
        reverse: bool,
        dc_final: Option<&[f64]>,
    ) -> (Seq, Vec<f64>, Vec<f64>) {
        let (batch, hd) = (x.batch, self.hidden_size());
        let mut dz = Seq::zeros(x.steps, batch, 4 * hd);
        let mut dh = vec![0.0; batch * hd];
        let mut dc = dc_final.map_or_else(|| vec![0.0; batch * hd], <[f64]>::to_vec);
        let mut next = vec![0.0; batch * hd];
        for t in time_order(x.steps, reverse).rev() {
            dh.iter_mut().zip(dout.at(t)).for_each(|(a, d)| *a += d);
            let (gates, tc, cp) = (cache.gates.at(t), cache.tanh_c.at(t), cache.cprev.at(t));
            let dzt = dz.at_mut(t);
            for b in 0..batch {
                if !mask.is_valid(t, b) {
                    continue;
                }
                let gr = &gates[b * 4 * hd..(b + 1) * 4 * hd];
                let dr = &mut dzt[b * 4 * hd..(b + 1) * 4 * hd];
                for k in 0..hd {
                    let (i, f, g, o) = (gr[k], gr[hd + k], gr[2 * hd + k], gr[3 * hd + k]);
                    let idx = b * hd + k;
                    let dct = dc[idx] + dh[idx] * o * (1.0 - tc[idx] * tc[idx]);
                    dr[k] = dct * g * i * (1.0 - i);
                    dr[hd + k] = dct * cp[idx] * f * (1.0 - f);
                    dr[2 * hd + k] = dct * i * (1.0 - g * g);
                    dr[3 * hd + k] = dh[idx] * tc[idx] * o * (1.0 - o);
                    dc[idx] = dct * f;
                }
            }
            gemm(false, true, batch, hd, 4 * hd, 1.0, dzt, self.w_h.value.data(), 0.0, &mut next);
            for b in 0..batch {
                if !mask.is_valid(t, b) {
                    next[b * hd..(b + 1) * hd].copy_from_slice(&dh[b * hd..(b + 1) * hd]);
                }
            }
            std::mem::swap(&mut dh, &mut next);
        }
        let dx = accumulate_input_grads(x, &cache.hprev, &dz, &mut self.w_x, &mut self.w_h, &mut self.b);
        (dx, dh, dc)
    }

    pub fn parameters(&self) -> Vec<(&'static str, &Parameter)> {
        vec![("w_x", &self.w_x), ("w_h", &self.w_h), ("b", &self.b)]
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.w_x, &mut self.w_h, &mut self.b]
    }
}

/// One LSTM step on single vectors: returns `(h_t, c_t)`.
pub fn lstm_cell_forward(x: &[f64], h_prev: &[f64], c_prev: &[f64], cell: &LstmLayer) -> Result<(Vec<f64>, Vec<f64>)> {
    let hd = cell.hidden_size();
    if x.len() != cell.input_size() || h_prev.len() != hd || c_prev.len() != hd {
        return Err(Error::shape(format!(
            "lstm cell expects x[{}], h[{hd}], c[{hd}]; got x[{}], h[{}], c[{}]",
            cell.input_size(),
            x.len(),
            h_prev.len(),
            c_prev.len()
        )));
    }
    let xs = Seq {
        steps: 1,
        batch: 1,
        dim: x.len(),
        data: x.to_vec(),
    };
    let (out, cache) = cell.forward_with_state(&xs, &Mask::all_valid(1, 1), false, Some((h_prev, c_prev)))?;
    let g = cache.gates.at(0);
    let c = (0..hd)
        .map(|k| g[hd + k] * c_prev[k] + g[k] * g[2 * hd + k])
        .collect();
    Ok((out.data, c))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Rnn(RnnLayer),
    Lstm(LstmLayer),
}

#[derive(Clone, Debug)]
pub enum CellCache {
    Rnn(RnnCache),
    Lstm(LstmCache),
}

impl Cell {
    pub fn hidden_size(&self) -> usize {
        match self {
            Cell::Rnn(c) => c.hidden_size(),
            Cell::Lstm(c) => c.hidden_size(),
        }
    }

    pub fn input_size(&self) -> usize {
        match self {
            Cell::Rnn(c) => c.input_size(),
            Cell::Lstm(c) => c.input_size(),
        }
    }

    fn forward(&self, x: &Seq, mask: &Mask, reverse: bool) -> Result<(Seq, CellCache)> {
        Ok(match self {
            Cell::Rnn(c) => {
                let (o, k) = c.forward(x, mask, reverse)?;
                (o, CellCache::Rnn(k))
            }
            Cell::Lstm(c) => {
                let (o, k) = c.forward(x, mask, reverse)?;
                (o, CellCache::Lstm(k))
            }
        })
    }

    fn backward(&mut self, x: &Seq, mask: &Mask, cache: &CellCache, dout: &Seq, reverse: bool) -> Seq {
        match (self, cache) {
            (Cell::Rnn(c), CellCache::Rnn(k)) => c.backward(x, mask, k, dout, reverse),
            (Cell::Lstm(c), CellCache::Lstm(k)) => c.backward(x, mask, k, dout, reverse),
            _ => unreachable!("cache built by a different cell type"),
        }
    }

    pub fn parameters(&self) -> Vec<(&'static str, &Parameter)> {
        match self {
            Cell::Rnn(c) => c.parameters(),
            Cell::Lstm(c) => c.parameters(),
        }
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        match self {
            Cell::Rnn(c) => c.parameters_mut(),
            Cell::Lstm(c) => c.parameters_mut(),
        }
    }
}

/// One level of a recurrent stack: a forward cell and, for bidirectional
/// stacks, a backward cell whose outputs are concatenated after it.
#[derive(Clone, Debug, PartialEq)]
pub struct StackLayer {
    pub forward: Cell,
    pub backward: Option<Cell>,
}

impl StackLayer {
    pub fn output_size(&self) -> usize {
        self.forward.hidden_size() * if self.backward.is_some() { 2 } else { 1 }
    }
}

#[derive(Clone, Debug)]
pub struct StackCache {
    inputs: Vec<Seq>,
    fwd: Vec<CellCache>,
    bwd: Vec<Option<CellCache>>,
    dropout: Vec<Option<Vec<f64>>>,
    pub output: Seq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecurrentStack {
    pub layers: Vec<StackLayer>,
    pub dropout_rate: f64,
}

fn concat_directions(a: &Seq, b: &Seq) -> Seq {
    let mut out = Seq::zeros(a.steps, a.batch, a.dim + b.dim);
    for t in 0..a.steps {
        for r in 0..a.batch {
            let row = out.row_mut(t, r);
            row[..a.dim].copy_from_slice(a.row(t, r));
            row[a.dim..].copy_from_slice(b.row(t, r));
        }
    }
    out
}

fn split_directions(d: &Seq, left: usize) -> (Seq, Seq) {
    let mut a = Seq::zeros(d.steps, d.batch, left);
    let mut b = Seq::zeros(d.steps, d.batch, d.dim - left);
    for t in 0..d.steps {
        for r in 0..d.batch {
            let row = d.row(t, r);
            a.row_mut(t, r).copy_from_slice(&row[..left]);
            b.row_mut(t, r).copy_from_slice(&row[left..]);
        }
    }
    (a, b)
}

impl RecurrentStack {
    pub fn new(cell: CellKind, input: usize, hidden: usize, layers: usize, bidirectional: bool, dropout_rate: f64, rng: &mut Rng) -> Self {
        let make = |input: usize, rng: &mut Rng| match cell {
            CellKind::Rnn => Cell::Rnn(RnnLayer::new(input, hidden, rng)),
            CellKind::Lstm => Cell::Lstm(LstmLayer::new(input, hidden, rng)),
        };
        let mut out = Vec::with_capacity(layers);
        let mut width = input;
        for _ in 0..layers {
            let forward = make(width, rng);
            let backward = bidirectional.then(|| make(width, rng));
            let layer = StackLayer { forward, backward };
            width = layer.output_size();
            out.push(layer);
        }
        RecurrentStack {
            layers: out,
            dropout_rate,
        }
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map_or(0, StackLayer::output_size)
    }

    pub fn is_bidirectional(&self) -> bool {
        self.layers.first().is_some_and(|l| l.backward.is_some())
    }

    /// Runs every layer; with `rng` set, inverted dropout follows each layer.
    pub fn forward(&self, x: Seq, mask: &Mask, mut rng: Option<&mut Rng>) -> Result<StackCache> {
        let mut cache = StackCache {
            inputs: Vec::with_capacity(self.layers.len()),
            fwd: Vec::new(),
            bwd: Vec::new(),
            dropout: Vec::new(),
            output: Seq::zeros(0, 0, 0),
        };
        let mut current = x;
        for layer in &self.layers {
            let (fo, fc) = layer.forward.forward(&current, mask, false)?;
            let (mut out, bc) = match &layer.backward {
                Some(cell) => {
                    let (bo, bc) = cell.forward(&current, mask, true)?;
                    (concat_directions(&fo, &bo), Some(bc))
                }
                None => (fo, None),
            };
            let drop = draw_dropout(out.data.len(), self.dropout_rate, rng.as_deref_mut());
            apply_mask(&mut out.data, &drop);
            cache.inputs.push(current);
            cache.fwd.push(fc);
            cache.bwd.push(bc);
            cache.dropout.push(drop);
            current = out;
        }
        cache.output = current;
        Ok(cache)
    }

    /// Final state per sequence: the last step of the forward direction,
    /// concatenated with the first step of the backward direction.
    pub fn final_features(&self, out: &Seq) -> Tensor {
        let width = out.dim;
        let mut f = Tensor::zeros(&[out.batch, width]);
        let last = out.steps - 1;
        for b in 0..out.batch {
            let row = f.row_mut(b);
            if self.is_bidirectional() {
                let h = width / 2;
                row[..h].copy_from_slice(&out.row(last, b)[..h]);
                row[h..].copy_from_slice(&out.row(0, b)[h..]);
            } else {
                row.copy_from_slice(out.row(last, b));
            }
        }
        f
    }

    /// Gradient on the output sequence given the gradient on
    /// [`RecurrentStack::final_features`].
    pub fn scatter_features(&self, dfeat: &Tensor, steps: usize) -> Seq {
        let (batch, width) = (dfeat.rows(), dfeat.cols());
        let mut d = Seq::zeros(steps, batch, width);
        for b in 0..batch {
            let g = dfeat.row(b);
            if self.is_bidirectional() {
                let h = width / 2;
                d.row_mut(steps - 1, b)[..h].copy_from_slice(&g[..h]);
                d.row_mut(0, b)[h..].copy_from_slice(&g[h..]);
            } else {
                d.row_mut(steps - 1, b).copy_from_slice(g);
            }
        }
        d
    }

    pub fn backward(&mut self, mask: &Mask, cache: &StackCache, dout: Seq) -> Seq {
        let mut grad = dout;
        for (l, layer) in self.layers.iter_mut().enumerate().rev() {
            apply_mask(&mut grad.data, &cache.dropout[l]);
            let x = &cache.inputs[l];
            grad = match (&mut layer.backward, &cache.bwd[l]) {
                (Some(cell), Some(bc)) => {
                    let (df, db) = split_directions(&grad, layer.forward.hidden_size());
                    let mut dx = layer.forward.backward(x, mask, &cache.fwd[l], &df, false);
                    let dxb = cell.backward(x, mask, bc, &db, true);
                    dx.data.iter_mut().zip(&dxb.data).for_each(|(a, b)| *a += b);
                    dx
                }
                _ => layer.forward.backward(x, mask, &cache.fwd[l], &grad, false),
            };
        }
        grad
    }

    pub fn parameters(&self) -> Vec<(String, &Parameter)> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            for (n, p) in layer.forward.parameters() {
                out.push((format!("layer{l}.fwd.{n}"), p));
            }
            if let Some(cell) = &layer.backward {
                for (n, p) in cell.parameters() {
                    out.push((format!("layer{l}.bwd.{n}"), p));
                }
            }
        }
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            out.extend(layer.forward.parameters_mut());
            if let Some(cell) = &mut layer.backward {
                out.extend(cell.parameters_mut());
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellKind {
    Rnn,
    Lstm,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn zero_lstm(input: usize, hidden: usize) -> LstmLayer {
        LstmLayer {
            w_x: Parameter::new(Tensor::zeros(&[input, 4 * hidden])),
            w_h: Parameter::new(Tensor::zeros(&[hidden, 4 * hidden])),
            b: Parameter::new(Tensor::zeros(&[4 * hidden])),
        }
    }

    #[test]
    fn zero_cell_stays_at_zero() {
        let cell = zero_lstm(3, 2);
        let (h, c) = lstm_cell_forward(&[0.5, -1.0, 2.0], &[0.0; 2], &[0.0; 2], &cell).unwrap();
        assert_eq!(h, vec![0.0, 0.0]);
        assert_eq!(c, vec![0.0, 0.0]);
    }

    #[test]
    fn saturated_forget_gate_keeps_cell_state() {
        let mut cell = zero_lstm(1, 2);
        let b = cell.b.value.data_mut();
        b[2..4].fill(40.0); // forget gate
        b[0..2].fill(-40.0); // input gate shut
        let (_, c) = lstm_cell_forward(&[1.0], &[0.0; 2], &[0.7, -0.3], &cell).unwrap();
        assert!((c[0] - 0.7).abs() < 1e-6 && (c[1] + 0.3).abs() < 1e-6);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let cell = zero_lstm(3, 2);
        assert!(lstm_cell_forward(&[0.0; 2], &[0.0; 2], &[0.0; 2], &cell).is_err());
    }

    #[test]
    fn masked_steps_carry_state() {
        let mut r = rng::seeded(3);
        let layer = RnnLayer::new(2, 3, &mut r);
        let x = Seq {
            steps: 3,
            batch: 1,
            dim: 2,
            data: vec![0.1, 0.2, 0.3, 0.4, 9.0, 9.0],
        };
        let mask = Mask::from_lengths(&[2], 3);
        let (out, _) = layer.forward(&x, &mask, false).unwrap();
        assert_eq!(out.row(2, 0), out.row(1, 0));
    }

    #[test]
    fn stacked_widths() {
        let mut r = rng::seeded(1);
        let s = RecurrentStack::new(CellKind::Lstm, 10, 8, 3, true, 0.0, &mut r);
        assert_eq!(s.layers[1].forward.input_size(), 16);
        assert_eq!(s.output_size(), 16);
        let u = RecurrentStack::new(CellKind::Lstm, 10, 8, 3, false, 0.0, &mut r);
        assert_eq!(u.layers[2].forward.input_size(), 8);
    }
}
