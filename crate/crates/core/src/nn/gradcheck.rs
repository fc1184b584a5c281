use super::{Parameter, Tensor};

/// An objective whose parameters can be perturbed in place.
pub trait Differentiable {
    fn parameters_mut(&mut self) -> Vec<&mut Parameter>;

    /// Loss at the current parameters, with fresh gradients written into every
    /// parameter's `grad`.
    fn loss_and_grad(&mut self) -> f64;

    /// Loss only; must be deterministic.
    fn loss(&mut self) -> f64;
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// (parameter index, flat coordinate) of the worst disagreement.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub coordinates: usize,
}

impl GradCheckReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_relative_error <= tolerance
    }
}

/// Compares analytic gradients against central finite differences at every
/// coordinate. Relative error is `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn grad_check<D: Differentiable + ?Sized>(objective: &mut D, step: f64) -> GradCheckReport {
    objective.loss_and_grad();
    let analytic: Vec<Tensor> = objective
        .parameters_mut()
        .into_iter()
        .map(|p| p.grad.clone())
        .collect();

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
        coordinates: 0,
    };
    for (pi, grads) in analytic.iter().enumerate() {
        for i in 0..grads.len() {
            let original = objective.parameters_mut()[pi].value.data()[i];
            objective.parameters_mut()[pi].value.data_mut()[i] = original + step;
            let plus = objective.loss();
            objective.parameters_mut()[pi].value.data_mut()[i] = original - step;
            let minus = objective.loss();
            objective.parameters_mut()[pi].value.data_mut()[i] = original;

            let numeric = (plus - minus) / (2.0 * step);
            let a = grads.data()[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            report.coordinates += 1;
            if rel > report.max_relative_error || rel.is_nan() {
                report.max_relative_error = rel;
                report.worst = (pi, i);
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    report
}

/// `x -> Dense -> tanh -> Dense -> sigmoid -> BCE`, a two-layer probe for the
/// dense backward pass.
pub struct DenseBceObjective {
    pub hidden: super::Dense,
    pub output: super::Dense,
    pub x: Tensor,
    pub y: Tensor,
}

impl DenseBceObjective {
    fn forward(&self) -> (Tensor, Tensor, Tensor) {
        let a = super::tanh(&self.hidden.forward(&self.x).expect("probe shapes agree"));
        let p = super::sigmoid(&self.output.forward(&a).expect("probe shapes agree"));
        let loss = super::bce_loss(&p, &self.y).expect("probe shapes agree");
        (a, p, Tensor::vector(vec![loss]))
    }
}

impl Differentiable for DenseBceObjective {
    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut v = self.hidden.parameters_mut();
        v.extend(self.output.parameters_mut());
        v
    }

    fn loss_and_grad(&mut self) -> f64 {
        self.parameters_mut().into_iter().for_each(Parameter::zero_grad);
        let (a, p, loss) = self.forward();
        let n = self.y.len() as f64;
        let dz = Tensor::new(
            p.shape().to_vec(),
            p.data().iter().zip(self.y.data()).map(|(p, y)| (p - y) / n).collect(),
        )
        .expect("same shape as p");
        let da = self.output.backward(&a, &dz);
        let dh = Tensor::new(
            a.shape().to_vec(),
            da.data()
                .iter()
                .zip(a.data())
                .map(|(d, a)| d * super::tanh_grad_from_output(*a))
                .collect(),
        )
        .expect("same shape as a");
        self.hidden.backward(&self.x, &dh);
        loss.data()[0]
    }

    fn loss(&mut self) -> f64 {
        self.forward().2.data()[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 0.5 * ||p||^2 with an optional gradient corruption factor.
    struct Quadratic {
        p: Parameter,
        corrupt: f64,
    }

    impl Differentiable for Quadratic {
        fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
            vec![&mut self.p]
        }
        fn loss_and_grad(&mut self) -> f64 {
            let g: Vec<f64> = self.p.value.data().iter().map(|v| v * self.corrupt).collect();
            self.p.grad.data_mut().copy_from_slice(&g);
            self.loss()
        }
        fn loss(&mut self) -> f64 {
            0.5 * self.p.value.data().iter().map(|v| v * v).sum::<f64>()
        }
    }

    #[test]
    fn quadratic_passes() {
        let mut q = Quadratic {
            p: Parameter::new(Tensor::vector(vec![0.3, -1.2, 2.5])),
            corrupt: 1.0,
        };
        assert!(grad_check(&mut q, 1e-5).max_relative_error < 1e-8);
    }

    #[test]
    fn doubled_gradient_is_flagged() {
        let mut q = Quadratic {
            p: Parameter::new(Tensor::vector(vec![0.3, -1.2, 2.5])),
            corrupt: 2.0,
        };
        let r = grad_check(&mut q, 1e-5);
        assert!((r.max_relative_error - 0.5).abs() < 1e-6);
        assert!(!r.passed(1e-4));
    }
}
