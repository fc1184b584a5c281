//! Two-level stacking: Level-0 probabilities from the base models feed a
//! logistic-regression meta-learner.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{DatasetSplit, LabeledFunction};
use crate::error::{Error, Result};
use crate::lexer::EncodedSequence;
use crate::models::{predict_proba, Architecture, PredictionVector, TrainedModel};
use crate::nn::{sigmoid_scalar, Differentiable, Parameter, Tensor};

/// N instances by M base-model probabilities, columns in `model_order`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StackInput {
    pub matrix: Vec<Vec<f64>>,
    pub model_order: Vec<Architecture>,
}

impl StackInput {
    pub fn new(matrix: Vec<Vec<f64>>, model_order: Vec<Architecture>) -> Result<Self> {
        let m = model_order.len();
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != m {
                return Err(Error::shape(format!("row {i} has {} columns, expected {m}", row.len())));
            }
            if let Some(p) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::value(format!("row {i} holds probability {p} outside [0, 1]")));
            }
        }
        Ok(StackInput { matrix, model_order })
    }

    pub fn rows(&self) -> usize {
        self.matrix.len()
    }

    pub fn column(&self, m: usize) -> Vec<f64> {
        self.matrix.iter().map(|r| r[m]).collect()
    }
}

/// `p_weighted = sum_m w_m p_m`.
pub fn weighted_probability(p: &[f64], w: &[f64]) -> Result<f64> {
    if p.len() != w.len() {
        return Err(Error::shape(format!("{} probabilities but {} weights", p.len(), w.len())));
    }
    Ok(p.iter().zip(w).map(|(a, b)| a * b).sum())
}

/// `1 / (1 + exp(-(p_weighted + bias)))`.
pub fn final_prediction(p_weighted: f64, bias: f64) -> f64 {
    sigmoid_scalar(p_weighted + bias)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaLearner {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub model_order: Vec<Architecture>,
}

impl MetaLearner {
    pub fn predict_row(&self, p: &[f64]) -> Result<f64> {
        Ok(final_prediction(weighted_probability(p, &self.weights)?, self.bias))
    }

    pub fn predict(&self, input: &StackInput) -> Result<PredictionVector> {
        if input.model_order != self.model_order {
            return Err(Error::shape("stack input columns are not in the meta-learner's model order"));
        }
        let probs = input
            .matrix
            .iter()
            .map(|r| self.predict_row(r))
            .collect::<Result<Vec<_>>>()?;
        PredictionVector::new(probs)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let meta: MetaLearner = serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if meta.weights.len() != meta.model_order.len() || !meta.weights.iter().all(|w| w.is_finite()) {
            return Err(Error::Format(format!("{}: malformed meta-learner", path.display())));
        }
        Ok(meta)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetaParams {
    pub l2: f64,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for MetaParams {
    fn default() -> Self {
        MetaParams {
            l2: 1e-4,
            learning_rate: 0.1,
            epochs: 500,
        }
    }
}

/// Logistic-regression objective `mean BCE + l2 * ||w||^2 / 2`; the bias is
/// not penalised.
pub struct MetaObjective<'a> {
    pub weights: Parameter,
    pub bias: Parameter,
    pub input: &'a StackInput,
    pub labels: &'a [f64],
    pub l2: f64,
}

impl MetaObjective<'_> {
    fn eval(&mut self, grad: bool) -> f64 {
        let w = self.weights.value.data().to_vec();
        let b = self.bias.value.data()[0];
        let n = self.labels.len() as f64;
        let mut loss = 0.0;
        let mut gw = vec![0.0; w.len()];
        let mut gb = 0.0;
        for (row, &y) in self.input.matrix.iter().zip(self.labels) {
            let z: f64 = row.iter().zip(&w).map(|(p, w)| p * w).sum::<f64>() + b;
            let p = sigmoid_scalar(z).clamp(crate::nn::BCE_EPSILON, 1.0 - crate::nn::BCE_EPSILON);
            loss -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
            let d = (sigmoid_scalar(z) - y) / n;
            gw.iter_mut().zip(row).for_each(|(g, p)| *g += d * p);
            gb += d;
        }
        let penalty: f64 = w.iter().map(|v| v * v).sum::<f64>() * self.l2 / 2.0;
        if grad {
            self.weights.grad = Tensor::vector(gw.iter().zip(&w).map(|(g, v)| g + self.l2 * v).collect());
            self.bias.grad = Tensor::vector(vec![gb]);
        }
        loss / n + penalty
    }

    /// Data-term gradient only (without the penalty).
    fn data_grad(&self) -> (Vec<f64>, f64) {
        let w = self.weights.value.data();
        let b = self.bias.value.data()[0];
        let n = self.labels.len() as f64;
        let mut gw = vec![0.0; w.len()];
        let mut gb = 0.0;
        for (row, &y) in self.input.matrix.iter().zip(self.labels) {
            let z: f64 = row.iter().zip(w).map(|(p, w)| p * w).sum::<f64>() + b;
            let d = (sigmoid_scalar(z) - y) / n;
            gw.iter_mut().zip(row).for_each(|(g, p)| *g += d * p);
            gb += d;
        }
        (gw, gb)
    }
}

impl Differentiable for MetaObjective<'_> {
    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.weights, &mut self.bias]
    }

    fn loss_and_grad(&mut self) -> f64 {
        self.eval(true)
    }

    fn loss(&mut self) -> f64 {
        self.eval(false)
    }
}

/// Full-batch proximal gradient descent on the meta objective, starting from
/// zero weights and bias. The L2 term is applied as the exact proximal step
/// `w <- w' / (1 + lr * l2)`, which stays stable for any penalty strength.
pub fn train_meta(level0_val: &StackInput, val_labels: &[u8], params: &MetaParams) -> Result<MetaLearner> {
    if level0_val.rows() != val_labels.len() {
        return Err(Error::shape(format!(
            "{} Level-0 rows but {} labels",
            level0_val.rows(),
            val_labels.len()
        )));
    }
    if val_labels.iter().any(|&l| l > 1) {
        return Err(Error::value("meta-learner labels must be 0 or 1"));
    }
    let positives = val_labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == val_labels.len() {
        return Err(Error::value("meta-learner needs both classes in its labels"));
    }
    if !(params.learning_rate > 0.0) || !(params.l2 >= 0.0) {
        return Err(Error::value("meta-learner needs learning_rate > 0 and l2 >= 0"));
    }
    let m = level0_val.model_order.len();
    let labels: Vec<f64> = val_labels.iter().map(|&l| f64::from(l)).collect();
    let mut obj = MetaObjective {
        weights: Parameter::new(Tensor::zeros(&[m.max(1)])),
        bias: Parameter::new(Tensor::vector(vec![0.0])),
        input: level0_val,
        labels: &labels,
        l2: params.l2,
    };
    if m == 0 {
        return Err(Error::value("meta-learner needs at least one base model"));
    }
    let shrink = 1.0 / (1.0 + params.learning_rate * params.l2);
    for epoch in 0..params.epochs {
        let (gw, gb) = obj.data_grad();
        let w = obj.weights.value.data_mut();
        for (v, g) in w.iter_mut().zip(&gw) {
            *v = (*v - params.learning_rate * g) * shrink;
        }
        obj.bias.value.data_mut()[0] -= params.learning_rate * gb;
        if !obj.weights.value.is_finite() || !obj.bias.value.is_finite() {
            return Err(Error::Training {
                epoch,
                reason: "meta-learner weights diverged".into(),
            });
        }
    }
    Ok(MetaLearner {
        weights: obj.weights.value.data().to_vec(),
        bias: obj.bias.value.data()[0],
        model_order: level0_val.model_order.clone(),
    })
}

/// Column `m` is `predict_proba` of base model `m`.
pub fn collect_level0(base_models: &[TrainedModel], data: &[EncodedSequence]) -> Result<StackInput> {
    let mut columns = Vec::with_capacity(base_models.len());
    for model in base_models {
        if !model.trained {
            return Err(Error::State(format!("base model {} has not been trained", model.architecture())));
        }
        columns.push(predict_proba(model, data)?.probs);
    }
    let matrix = (0..data.len())
        .map(|i| columns.iter().map(|c| c[i]).collect())
        .collect();
    StackInput::new(matrix, base_models.iter().map(TrainedModel::architecture).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleModel {
    pub base_models: Vec<TrainedModel>,
    pub meta: MetaLearner,
}

impl EnsembleModel {
    pub fn new(base_models: Vec<TrainedModel>, meta: MetaLearner) -> Result<Self> {
        let order: Vec<Architecture> = base_models.iter().map(TrainedModel::architecture).collect();
        if order != meta.model_order {
            return Err(Error::shape("base models do not match the meta-learner's model order"));
        }
        Ok(EnsembleModel { base_models, meta })
    }

    pub fn predict(&self, data: &[EncodedSequence]) -> Result<PredictionVector> {
        self.meta.predict(&collect_level0(&self.base_models, data)?)
    }
}

/// Everything [`stacking_ensemble`] produces.
#[derive(Clone, Debug)]
pub struct StackingOutcome {
    pub split: DatasetSplit,
    pub ensemble: EnsembleModel,
    pub level0_test: StackInput,
    pub test_predictions: PredictionVector,
    pub test_labels: Vec<u8>,
}

/// Fits the meta-learner on Level-0 validation outputs and applies the
/// ensemble to the test split.
pub fn stack_trained(
    base_models: Vec<TrainedModel>,
    val: &[EncodedSequence],
    val_labels: &[u8],
    test: &[EncodedSequence],
    params: &MetaParams,
) -> Result<(EnsembleModel, StackInput, PredictionVector)> {
    let level0_val = collect_level0(&base_models, val)?;
    let meta = train_meta(&level0_val, val_labels, params)?;
    let level0_test = collect_level0(&base_models, test)?;
    let preds = meta.predict(&level0_test)?;
    Ok((EnsembleModel::new(base_models, meta)?, level0_test, preds))
}

/// Runs the whole two-level procedure on raw labeled functions:
/// split, prepare, train the five base models, fit the meta-learner on
/// validation outputs, predict the test split.
pub fn stacking_ensemble(
    data: &[LabeledFunction],
    settings: &crate::pipeline::PipelineSettings,
    seed: u64,
) -> Result<StackingOutcome> {
    crate::pipeline::run_stacking(data, settings, seed)
}
