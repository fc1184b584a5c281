use rand::Rng;

use super::Tensor;
use crate::error::{Error, Result};
use crate::rng;

/// Inverted-dropout multipliers: 0 with probability `rate`, else `1/(1-rate)`.
pub fn dropout_mask(len: usize, rate: f64, rng: &mut impl Rng) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

/// Inverted dropout. Inference (`training == false`) is the exact identity.
pub fn dropout(x: &Tensor, rate: f64, training: bool, seed: u64) -> Result<Tensor> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::value(format!("dropout rate {rate} outside [0, 1)")));
    }
    if !training || rate == 0.0 {
        return Ok(x.clone());
    }
    let mask = dropout_mask(x.len(), rate, &mut rng::seeded(seed));
    let mut out = x.clone();
    out.data_mut()
        .iter_mut()
        .zip(&mask)
        .for_each(|(v, m)| *v *= m);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inference_and_zero_rate_are_identity() {
        let x = Tensor::vector(vec![1.0, -2.0, 3.5]);
        assert_eq!(dropout(&x, 0.5, false, 1).unwrap(), x);
        assert_eq!(dropout(&x, 0.0, true, 1).unwrap(), x);
        assert!(dropout(&x, 1.0, true, 1).is_err());
    }

    #[test]
    fn survivor_fraction_and_expectation() {
        let n = 200_000;
        let x = Tensor::full(&[n], 1.0);
        let y = dropout(&x, 0.2, true, 42).unwrap();
        let survivors = y.data().iter().filter(|&&v| v != 0.0).count() as f64 / n as f64;
        let mean = y.data().iter().sum::<f64>() / n as f64;
        assert!((survivors - 0.8).abs() <= 0.02, "survivors {survivors}");
        assert!((mean - 1.0).abs() <= 0.02, "mean {mean}");
    }
}
