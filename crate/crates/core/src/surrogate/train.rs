use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::mlp::{Mlp, Targets};
use super::{FeatureLayout, FeatureVector, SurrogateError, SurrogateModel, MODEL_FORMAT_VERSION};
use crate::math::{cos, exp, ln, sqrt};
use crate::optim::{Adam, AdamConfig};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSpec {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Weight of the latency term in the loss.
    pub loss_lambda: f64,
    pub training_steps: u64,
    pub hidden: usize,
    /// Hidden layers before the heads; with the heads the net is `trunk_layers + 1` deep.
    pub trunk_layers: usize,
    pub dropout: f64,
    /// Fit `ln(label)` instead of the raw label.
    pub log_labels: bool,
    #[serde(default)]
    pub schedule: LrSchedule,
    /// Curve sampling interval in steps.
    pub log_every: u64,
    pub seed: u64,
}

/// Learning-rate schedule over the training run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// Half-cosine decay from `learning_rate` to zero at the last step.
    #[default]
    Cosine,
}

impl LrSchedule {
    pub fn rate(self, base: f64, step: u64, total: u64) -> f64 {
        match self {
            LrSchedule::Constant => base,
            LrSchedule::Cosine => {
                let frac = (step.saturating_sub(1)) as f64 / total.max(1) as f64;
                0.5 * base * (1.0 + cos(core::f64::consts::PI * frac))
            }
        }
    }
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            learning_rate: 1e-3,
            batch_size: 128,
            loss_lambda: 10.0,
            training_steps: 50_000,
            hidden: 256,
            trunk_layers: 2,
            dropout: 0.1,
            log_labels: true,
            schedule: LrSchedule::default(),
            log_every: 500,
            seed: 0,
        }
    }
}

impl TrainSpec {
    pub fn validate(&self) -> Result<(), SurrogateError> {
        let ok = self.learning_rate > 0.0
            && self.batch_size > 0
            && self.loss_lambda >= 0.0
            && self.training_steps > 0
            && self.hidden > 0
            && self.trunk_layers > 0
            && (0.0..1.0).contains(&self.dropout)
            && self.log_every > 0;
        if ok {
            Ok(())
        } else {
            Err(SurrogateError::Spec)
        }
    }
}

/// z-score normalization of one label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: f64,
    pub std: f64,
}

impl Standardizer {
    pub fn fit(values: impl Iterator<Item = f64> + Clone) -> Self {
        let n = values.clone().count().max(1) as f64;
        let mean = values.clone().sum::<f64>() / n;
        let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = sqrt(var);
        Standardizer { mean, std: if std > 0.0 { std } else { 1.0 } }
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

pub(crate) fn to_model_space(x: f64, log: bool) -> f64 {
    if log {
        ln(x)
    } else {
        x
    }
}

pub(crate) fn from_model_space(x: f64, log: bool) -> f64 {
    if log {
        exp(x)
    } else {
        x
    }
}

/// A featurized, labeled example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Labeled {
    pub features: FeatureVector,
    pub area: f64,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: u64,
    /// Mean training loss over the preceding interval.
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub model: SurrogateModel,
    pub curve: Vec<CurvePoint>,
}

/// Seeded split; returns (train, held-out).
pub fn split<T: Clone>(data: &[T], holdout_fraction: f64, seed: u64) -> (Vec<T>, Vec<T>) {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut rng::rng(seed));
    let n_hold = ((data.len() as f64) * holdout_fraction) as usize;
    let hold = idx[..n_hold].iter().map(|&i| data[i].clone()).collect();
    let train = idx[n_hold..].iter().map(|&i| data[i].clone()).collect();
    (train, hold)
}

pub fn train(data: &[Labeled], layout: &FeatureLayout, spec: &TrainSpec) -> Result<TrainOutcome, SurrogateError> {
    train_with(data, layout, spec, &mut |_| {})
}

/// Minibatch Adam on the two-head loss. `on_curve` sees every curve point
/// as it is produced.
pub fn train_with(
    data: &[Labeled],
    layout: &FeatureLayout,
    spec: &TrainSpec,
    on_curve: &mut dyn FnMut(CurvePoint),
) -> Result<TrainOutcome, SurrogateError> {
    spec.validate()?;
    if data.is_empty() {
        return Err(SurrogateError::EmptyDataset);
    }
    let dim = layout.len();
    if let Some(bad) = data.iter().find(|d| d.features.len() != dim) {
        return Err(SurrogateError::Dimension { expected: dim, got: bad.features.len() });
    }
    if data.iter().any(|d| !(d.area > 0.0 && d.latency_ms > 0.0) && spec.log_labels) {
        return Err(SurrogateError::NonPositiveLabel);
    }

    let area_norm = Standardizer::fit(data.iter().map(|d| to_model_space(d.area, spec.log_labels)));
    let latency_norm = Standardizer::fit(data.iter().map(|d| to_model_space(d.latency_ms, spec.log_labels)));
    let targets: Vec<Targets> = data
        .iter()
        .map(|d| Targets {
            area: area_norm.apply(to_model_space(d.area, spec.log_labels)),
            latency: latency_norm.apply(to_model_space(d.latency_ms, spec.log_labels)),
        })
        .collect();

    let mut mlp = Mlp::new(dim, spec.hidden, spec.trunk_layers, spec.dropout, rng::derive(spec.seed, 1));
    let mut adam = Adam::new(AdamConfig::with_lr(spec.learning_rate), mlp.params.len());
    let mut grad = vec![0.0; mlp.params.len()];
    let mut scratch = mlp.scratch();
    let mut shuffle_rng = rng::rng(rng::derive(spec.seed, 2));
    let mut dropout_rng = rng::rng(rng::derive(spec.seed, 3));

    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut shuffle_rng);
    let mut cursor = 0;
    let batch_size = spec.batch_size.min(data.len());
    let mut batch: Vec<(&[f64], Targets)> = Vec::with_capacity(batch_size);
    let mut curve = Vec::new();
    let mut running = 0.0;

    for step in 1..=spec.training_steps {
        batch.clear();
        while batch.len() < batch_size {
            if cursor == order.len() {
                order.shuffle(&mut shuffle_rng);
                cursor = 0;
            }
            let i = order[cursor];
            cursor += 1;
            batch.push((data[i].features.as_slice(), targets[i]));
        }
        let loss = mlp.loss_and_grad(&batch, spec.loss_lambda, Some(&mut dropout_rng), &mut grad, &mut scratch);
        if !loss.total.is_finite() {
            return Err(SurrogateError::Diverged { step });
        }
        adam.config.learning_rate = spec.schedule.rate(spec.learning_rate, step, spec.training_steps);
        adam.step(&mut mlp.params, &grad);
        running += loss.total;
        if step % spec.log_every == 0 || step == spec.training_steps {
            let span = (step - 1) % spec.log_every + 1;
            let point = CurvePoint { step, loss: running / span as f64 };
            on_curve(point);
            curve.push(point);
            running = 0.0;
        }
    }

    let model = SurrogateModel {
        format_version: MODEL_FORMAT_VERSION,
        layout: layout.clone(),
        mlp,
        area_norm,
        latency_norm,
        log_labels: spec.log_labels,
    };
    Ok(TrainOutcome { model, curve })
}

/// Mean relative errors of a model on labeled data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub samples: usize,
    pub area_mean_rel_error: f64,
    pub latency_mean_rel_error: f64,
}

pub fn error_report(model: &SurrogateModel, data: &[Labeled]) -> Result<ErrorReport, SurrogateError> {
    let mut scratch = model.mlp.scratch();
    let (mut ea, mut el) = (0.0, 0.0);
    for d in data {
        let (area, lat) = model.predict_with(&d.features, &mut scratch)?;
        ea += (area - d.area).abs() / d.area.abs();
        el += (lat - d.latency_ms).abs() / d.latency_ms.abs();
    }
    let n = data.len().max(1) as f64;
    Ok(ErrorReport { samples: data.len(), area_mean_rel_error: ea / n, latency_mean_rel_error: el / n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accel::baseline_config;
    use crate::nas::{build_space, sample_uniform, SpaceName};

    #[test]
    fn standardizer_round_trip() {
        let s = Standardizer::fit([1.0, 2.0, 4.0, 8.0].into_iter());
        for x in [0.1, 3.0, -7.5, 1e6] {
            assert!((s.invert(s.apply(x)) - x).abs() <= 1e-9 * x.abs().max(1.0));
        }
        let constant = Standardizer::fit([5.0, 5.0].into_iter());
        assert_eq!(constant.std, 1.0);
    }

    #[test]
    fn memorizes_one_record() {
        let s1 = build_space(SpaceName::S1MobileNetV2);
        let layout = FeatureLayout::for_space(&s1);
        let rec = Labeled {
            features: layout.encode(&sample_uniform(&s1, 0), &baseline_config()).unwrap(),
            area: 1.0,
            latency_ms: 0.3,
        };
        let spec = TrainSpec { training_steps: 300, hidden: 32, dropout: 0.0, log_every: 100, ..Default::default() };
        let out = train(core::slice::from_ref(&rec), &layout, &spec).unwrap();
        assert!(out.curve.last().unwrap().loss < 1e-6, "{:?}", out.curve);
        let (area, lat) = out.model.predict(&rec.features).unwrap();
        assert!((area - 1.0).abs() < 1e-3 && (lat - 0.3).abs() < 1e-3, "{area} {lat}");
        assert_eq!(out.curve.len(), 3);
    }

    #[test]
    fn divergence_is_reported() {
        let s1 = build_space(SpaceName::S1MobileNetV2);
        let layout = FeatureLayout::for_space(&s1);
        let rec = Labeled {
            features: layout.encode(&sample_uniform(&s1, 0), &baseline_config()).unwrap(),
            area: 1.0,
            latency_ms: 0.3,
        };
        let spec = TrainSpec { training_steps: 50, hidden: 8, learning_rate: 1e300, ..Default::default() };
        let data = [rec.clone(), Labeled { area: 2.0, ..rec }];
        assert!(matches!(train(&data, &layout, &spec), Err(SurrogateError::Diverged { .. })));
    }

    #[test]
    fn split_is_seeded_and_complete() {
        let data: Vec<u32> = (0..100).collect();
        let (a, b) = split(&data, 0.1, 5);
        assert_eq!((a.len(), b.len()), (90, 10));
        assert_eq!(split(&data, 0.1, 5), (a.clone(), b.clone()));
        let mut all: Vec<u32> = a.into_iter().chain(b).collect();
        all.sort_unstable();
        assert_eq!(all, data);
    }
}
