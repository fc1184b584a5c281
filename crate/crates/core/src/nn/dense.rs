use rand::Rng;

use super::{gemm, glorot_bound, Parameter, Tensor};
use crate::error::{Error, Result};

/// `x W + b` for `x: n x in`, `W: in x out`, `b: out`.
pub fn dense_forward(x: &Tensor, w: &Parameter, b: &Parameter) -> Result<Tensor> {
    let (fan_in, fan_out) = match w.shape() {
        [i, o] => (*i, *o),
        s => return Err(Error::shape(format!("dense weight must be 2-D, got {s:?}"))),
    };
    if b.len() != fan_out {
        return Err(Error::shape(format!(
            "dense bias has {} entries, expected {fan_out}",
            b.len()
        )));
    }
    if x.cols() != fan_in {
        return Err(Error::shape(format!(
            "dense input has {} columns, expected {fan_in}",
            x.cols()
        )));
    }
    let n = x.rows();
    let mut out = Tensor::zeros(&[n, fan_out]);
    for r in 0..n {
        out.row_mut(r).copy_from_slice(b.value.data());
    }
    gemm(
        false,
        false,
        n,
        fan_out,
        fan_in,
        1.0,
        x.data(),
        w.value.data(),
        1.0,
        out.data_mut(),
    );
    Ok(out)
}

/// Fully connected layer with manual backward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Parameter,
    pub bias: Parameter,
}

impl Dense {
    pub fn new(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let bound = glorot_bound(fan_in, fan_out);
        Dense {
            weight: Parameter::new(Tensor::uniform(&[fan_in, fan_out], bound, rng)),
            bias: Parameter::new(Tensor::zeros(&[fan_out])),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn fan_out(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        dense_forward(x, &self.weight, &self.bias)
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&mut self, x: &Tensor, dy: &Tensor) -> Tensor {
        let (n, fi, fo) = (x.rows(), self.fan_in(), self.fan_out());
        gemm(
            true,
            false,
            fi,
            fo,
            n,
            1.0,
            x.data(),
            dy.data(),
            1.0,
            self.weight.grad.data_mut(),
        );
        let db = self.bias.grad.data_mut();
        for r in 0..n {
            db.iter_mut().zip(dy.row(r)).for_each(|(a, b)| *a += b);
        }
        let mut dx = Tensor::zeros(&[n, fi]);
        gemm(
            false,
            true,
            n,
            fi,
            fo,
            1.0,
            dy.data(),
            self.weight.value.data(),
            0.0,
            dx.data_mut(),
        );
        dx
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(rows: usize, cols: usize, v: Vec<f64>) -> Parameter {
        Parameter::new(Tensor::matrix(rows, cols, v).unwrap())
    }

    #[test]
    fn hand_multiplied_example() {
        let x = Tensor::matrix(1, 2, vec![1.0, 0.0]).unwrap();
        let w = p(2, 2, vec![2.0, 0.0, 0.0, 3.0]);
        let b = Parameter::new(Tensor::vector(vec![0.0, 0.0]));
        assert_eq!(dense_forward(&x, &w, &b).unwrap().data(), &[2.0, 0.0]);
    }

    #[test]
    fn zero_input_broadcasts_bias() {
        let x = Tensor::zeros(&[3, 2]);
        let w = p(2, 2, vec![2.0, 1.0, 5.0, 3.0]);
        let b = Parameter::new(Tensor::vector(vec![0.5, -1.0]));
        let y = dense_forward(&x, &w, &b).unwrap();
        for r in 0..3 {
            assert_eq!(y.row(r), &[0.5, -1.0]);
        }
    }

    #[test]
    fn wrong_input_width_is_shape_error() {
        let x = Tensor::zeros(&[1, 3]);
        let w = p(2, 2, vec![0.0; 4]);
        let b = Parameter::new(Tensor::zeros(&[2]));
        assert!(matches!(dense_forward(&x, &w, &b), Err(Error::Shape(_))));
    }
}
