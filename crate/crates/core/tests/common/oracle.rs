//! Bag-of-words logistic regression, written independently of the library's
//! tokenizer, vocabulary and optimiser.

use std::collections::HashMap;

use stackguard_core::corpus::{Label, LabeledFunction};

fn bag(source: &str, index: &HashMap<String, usize>) -> Vec<usize> {
    let mut ids: Vec<usize> = source.split(' ').filter_map(|t| index.get(t).copied()).collect();
    ids.sort_unstable();
    ids.dedup();
    ids
}

fn target(f: &LabeledFunction) -> f64 {
    if f.label == Label::Vulnerable {
        1.0
    } else {
        0.0
    }
}

/// Held-out accuracy of binary-presence features fit by full-batch
/// gradient descent with a small L2 penalty.
pub fn bow_accuracy(train: &[LabeledFunction], test: &[LabeledFunction]) -> f64 {
    let mut index = HashMap::new();
    for f in train {
        for t in f.source.split(' ').filter(|t| !t.is_empty()) {
            let next = index.len();
            index.entry(t.to_string()).or_insert(next);
        }
    }
    let xs: Vec<Vec<usize>> = train.iter().map(|f| bag(&f.source, &index)).collect();
    let ys: Vec<f64> = train.iter().map(target).collect();
    let mut w = vec![0.0; index.len()];
    let mut b = 0.0;
    let n = train.len() as f64;
    for _ in 0..400 {
        let mut gw = vec![0.0; w.len()];
        let mut gb = 0.0;
        for (x, y) in xs.iter().zip(&ys) {
            let z: f64 = b + x.iter().map(|&i| w[i]).sum::<f64>();
            let err = 1.0 / (1.0 + (-z).exp()) - y;
            for &i in x {
                gw[i] += err / n;
            }
            gb += err / n;
        }
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= 1.0 * (g + 1e-3 * *wi);
        }
        b -= 1.0 * gb;
    }
    let correct = test
        .iter()
        .filter(|f| {
            let z: f64 = b + bag(&f.source, &index).iter().map(|&i| w[i]).sum::<f64>();
            (z >= 0.0) == (f.label == Label::Vulnerable)
        })
        .count();
    correct as f64 / test.len() as f64
}
