use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blueprint::{augment, AugmentConfig, ViewGeometry, ViewSet};
use crate::geometry::{Vec3, ViewKind};
use crate::sampling::{SampleRecord, SampleSet};

use super::encoder::EncoderTape;
use super::mlp;
use super::ops::{c, Tensor};
use super::pifu::{decode, FieldOutput, PixelAlignedField};
use super::{FieldError, Network, MLP_OUTPUTS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// SGD with heavy-ball momentum.
    Sgd,
    /// Adam with `momentum` as the first-moment decay.
    Adam,
}

/// Training loop settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub optimizer: Optimizer,
    /// Number of optimizer steps.
    pub iterations: usize,
    /// Blueprints per step; only 1 is supported.
    pub batch_size: usize,
    /// Precomputed samples of the chosen blueprint evaluated per step.
    pub samples_per_step: usize,
    pub lambda_value: f64,
    pub lambda_normal: f64,
    pub lambda_edge: f64,
    /// View degradation applied per step; the step's seed is derived from `seed`.
    pub augment: AugmentConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.9,
            optimizer: Optimizer::Sgd,
            iterations: 2000,
            batch_size: 1,
            samples_per_step: 512,
            lambda_value: 1.0,
            lambda_normal: 0.1,
            lambda_edge: 0.1,
            augment: AugmentConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), FieldError> {
        let err = |m: &str| Err(FieldError::Config(m.into()));
        if self.batch_size != 1 {
            return err("batch_size must be 1 (one blueprint per step)");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return err("learning_rate must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return err("momentum must be in [0, 1)");
        }
        if [self.lambda_value, self.lambda_normal, self.lambda_edge].iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return err("loss weights must be finite and non-negative");
        }
        if self.samples_per_step == 0 {
            return err("samples_per_step must be at least 1");
        }
        Ok(())
    }

    fn lambdas(&self) -> [f64; 3] {
        [self.lambda_value, self.lambda_normal, self.lambda_edge]
    }
}

/// Weighted loss terms; `total` is their sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub value: f64,
    pub normal: f64,
    pub edge: f64,
}

impl LossParts {
    fn add(&mut self, o: &LossParts) {
        self.total += o.total;
        self.value += o.value;
        self.normal += o.normal;
        self.edge += o.edge;
    }

    fn scale(&mut self, s: f64) {
        self.total *= s;
        self.value *= s;
        self.normal *= s;
        self.edge *= s;
    }
}

/// Loss of one prediction: squared value error, plus `1 − cos` between normals on
/// surface-derived samples, plus squared edge error, each times its `λ`.
pub fn loss(pred: &FieldOutput, sample: &SampleRecord, lambdas: [f64; 3]) -> LossParts {
    let [lv, ln, le] = lambdas;
    let value = lv * (pred.value - sample.value as f64).powi(2);
    let normal = if sample.surface {
        let t = Vec3::new(sample.normal[0] as f64, sample.normal[1] as f64, sample.normal[2] as f64);
        ln * (1.0 - pred.normal.dot(&t))
    } else {
        0.0
    };
    let edge = le * (pred.edge - sample.edge as f64).powi(2);
    LossParts { total: value + normal + edge, value, normal, edge }
}

/// Gradient of [`loss`] with respect to the raw head outputs.
fn loss_grad(raw: &[f64], sample: &SampleRecord, lambdas: [f64; 3]) -> [f64; MLP_OUTPUTS] {
    let [lv, ln, le] = lambdas;
    let v = super::pifu::sigmoid(raw[0]);
    let mut g = [0.0; MLP_OUTPUTS];
    g[0] = 2.0 * lv * (v - sample.value as f64) * v * (1.0 - v);
    let r = Vec3::new(raw[1], raw[2], raw[3]);
    let len = r.norm();
    if sample.surface && len > 0.0 {
        let n = r / len;
        let t = Vec3::new(sample.normal[0] as f64, sample.normal[1] as f64, sample.normal[2] as f64);
        let d = -(t - n * n.dot(&t)) * (ln / len);
        g[1..4].copy_from_slice(d.as_slice());
    }
    g[4] = 2.0 * le * (raw[4] - sample.edge as f64);
    g
}

fn position(r: &SampleRecord) -> Vec3 {
    Vec3::new(r.position[0] as f64, r.position[1] as f64, r.position[2] as f64)
}

/// Mean loss over `records` for the views in `geometry`; when `grad` is given the
/// exact gradient of that mean is accumulated into it.
pub(crate) fn loss_and_grad<T: Float + Send + Sync>(
    net: &Network<T>,
    geometry: &ViewGeometry,
    records: &[SampleRecord],
    lambdas: [f64; 3],
    grad: Option<&mut [T]>,
) -> Result<LossParts, FieldError> {
    let mut tapes = Vec::with_capacity(4);
    for kind in ViewKind::ALL {
        tapes.push(EncoderTape::forward(net, kind, &geometry.images[kind.index()])?);
    }
    let features: [Tensor<T>; 4] = std::array::from_fn(|k| tapes[k].output().clone());
    let field = PixelAlignedField::from_features(net, geometry, features);
    let n_in = net.config().mlp_input_len();
    let batch = records.len();
    let mut input = vec![T::zero(); batch * n_in];
    let mut all_taps = Vec::with_capacity(batch);
    for (r, row) in records.iter().zip(input.chunks_mut(n_in)) {
        let p = position(r);
        let taps = field.taps(&p);
        field.fill_row(&p, &taps, row);
        all_taps.push(taps);
    }
    let tape = mlp::forward(net, input, batch);
    let mut parts = LossParts::default();
    let mut d_out = vec![T::zero(); batch * MLP_OUTPUTS];
    let inv = 1.0 / batch.max(1) as f64;
    for (b, r) in records.iter().enumerate() {
        let raw: Vec<f64> = tape.output()[b * MLP_OUTPUTS..(b + 1) * MLP_OUTPUTS].iter().map(|v| v.to_f64().unwrap()).collect();
        parts.add(&loss(&decode(&raw, [false; 4]), r, lambdas));
        for (k, g) in loss_grad(&raw, r, lambdas).iter().enumerate() {
            d_out[b * MLP_OUTPUTS + k] = c(g * inv);
        }
    }
    parts.scale(inv);
    let Some(grad) = grad else { return Ok(parts) };
    let d_in = mlp::backward(net, &tape, d_out, grad);
    let ch = net.config().encoder.feature_depth;
    let mut d_feat: Vec<Tensor<T>> =
        field.features.iter().map(|f| Tensor::zeros(f.channels, f.height, f.width)).collect();
    for (taps, drow) in all_taps.iter().zip(d_in.chunks(n_in)) {
        for (k, (t, _)) in taps.iter().enumerate() {
            let df = &mut d_feat[k];
            let plane = df.height * df.width;
            for j in 0..ch {
                let g = drow[k * ch + j];
                for &(i, w) in t {
                    let slot = &mut df.data[j * plane + i];
                    *slot = *slot + g * c(w);
                }
            }
        }
    }
    for (tape, d) in tapes.iter().zip(d_feat) {
        tape.backward(net, d, grad);
    }
    Ok(parts)
}

/// One blueprint with its precomputed samples.
#[derive(Clone, Debug)]
pub struct TrainItem {
    pub name: String,
    pub views: ViewSet,
    pub samples: SampleSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: u64,
    pub loss: LossParts,
}

/// Optimizer position: completed steps and the moment buffers.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingState {
    pub step: u64,
    pub optimizer: Optimizer,
    /// SGD: one velocity per parameter. Adam: first then second moments.
    pub buffers: Vec<f32>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub curve: Vec<LossRecord>,
    pub state: TrainingState,
}

fn step_rng(seed: u64, step: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step);
    rng
}

const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Runs `cfg.iterations` steps, continuing from `resume` when given. Every step
/// picks one blueprint, augments its views with a seed derived from the master
/// seed and the global step index, evaluates a random minibatch of its samples and
/// applies one optimizer update. Resuming from a saved state reproduces the curve
/// of an uninterrupted run.
pub fn train<T: Float + Send + Sync>(
    net: &mut Network<T>,
    data: &[TrainItem],
    cfg: &TrainConfig,
    resume: Option<&TrainingState>,
) -> Result<TrainOutcome, FieldError> {
    cfg.validate()?;
    if data.is_empty() || data.iter().any(|d| d.samples.is_empty()) {
        return Err(FieldError::EmptyDataset);
    }
    let n = net.param_count();
    let buffers_per_param = match cfg.optimizer {
        Optimizer::Sgd => 1,
        Optimizer::Adam => 2,
    };
    let (start, mut buffers): (u64, Vec<T>) = match resume {
        Some(s) if s.optimizer == cfg.optimizer && s.buffers.len() == n * buffers_per_param => {
            (s.step, s.buffers.iter().map(|&b| c(b as f64)).collect())
        }
        Some(s) if s.buffers.is_empty() => (s.step, vec![T::zero(); n * buffers_per_param]),
        Some(_) => return Err(FieldError::Config("resume state does not match the optimizer or network".into())),
        None => (0, vec![T::zero(); n * buffers_per_param]),
    };
    let static_geometry: Vec<Option<ViewGeometry>> = if cfg.augment.is_identity() {
        data.iter().map(|d| d.views.geometry().map(Some)).collect::<Result<_, _>>()?
    } else {
        vec![None; data.len()]
    };
    let lr = cfg.learning_rate;
    let mut curve = Vec::with_capacity(cfg.iterations);
    let mut grad = vec![T::zero(); n];
    for step in start..start + cfg.iterations as u64 {
        let mut rng = step_rng(cfg.seed, step);
        let pick = rng.random_range(0..data.len());
        let item = &data[pick];
        let geometry = match &static_geometry[pick] {
            Some(g) => g.clone(),
            None => augment(&item.views, &AugmentConfig { seed: rng.random(), ..cfg.augment.clone() }).geometry()?,
        };
        let batch: Vec<SampleRecord> = (0..cfg.samples_per_step)
            .map(|_| item.samples.records[rng.random_range(0..item.samples.len())])
            .collect();
        grad.iter_mut().for_each(|g| *g = T::zero());
        let parts = loss_and_grad(net, &geometry, &batch, cfg.lambdas(), Some(&mut grad))?;
        curve.push(LossRecord { step, loss: parts });
        match cfg.optimizer {
            Optimizer::Sgd => {
                let mu: T = c(cfg.momentum);
                let lr: T = c(lr);
                for ((p, v), &g) in net.params.iter_mut().zip(&mut buffers).zip(&grad) {
                    *v = mu * *v + g;
                    *p = *p - lr * *v;
                }
            }
            Optimizer::Adam => {
                let t = (step + 1) as i32;
                let (b1, b2) = (cfg.momentum, ADAM_BETA2);
                let alpha: T = c(lr * (1.0 - b2.powi(t)).sqrt() / (1.0 - b1.powi(t)));
                let (b1, b2, eps): (T, T, T) = (c(b1), c(b2), c(ADAM_EPS));
                let (m, v) = buffers.split_at_mut(n);
                for i in 0..n {
                    let g = grad[i];
                    m[i] = b1 * m[i] + (T::one() - b1) * g;
                    v[i] = b2 * v[i] + (T::one() - b2) * g * g;
                    net.params[i] = net.params[i] - alpha * m[i] / (v[i].sqrt() + eps);
                }
            }
        }
    }
    let state = TrainingState {
        step: start + cfg.iterations as u64,
        optimizer: cfg.optimizer,
        buffers: buffers.iter().map(|b| b.to_f32().unwrap_or(0.0)).collect(),
    };
    Ok(TrainOutcome { curve, state })
}

/// Mean loss of `net` over all samples of `item` (no augmentation).
pub fn evaluate_loss<T: Float + Send + Sync>(
    net: &Network<T>,
    item: &TrainItem,
    cfg: &TrainConfig,
) -> Result<LossParts, FieldError> {
    let geometry = item.views.geometry()?;
    let mut total = LossParts::default();
    for chunk in item.samples.records.chunks(4096) {
        let mut part = loss_and_grad(net, &geometry, chunk, cfg.lambdas(), None)?;
        part.scale(chunk.len() as f64);
        total.add(&part);
    }
    total.scale(1.0 / item.samples.len().max(1) as f64);
    Ok(total)
}

/// CSV with header `step,total,value,normal,edge`.
pub fn write_loss_csv(curve: &[LossRecord]) -> String {
    let mut out = String::from("step,total,value,normal,edge\n");
    for r in curve {
        let l = &r.loss;
        out.push_str(&format!("{},{},{},{},{}\n", r.step, l.total, l.value, l.normal, l.edge));
    }
    out
}

/// Result of comparing analytic gradients with central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Parameter (tensor name and flat index) with the largest error.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// Central-difference check of every parameter whose tensor name passes `select`.
/// The relative error of one parameter is `|a − n| / max(|a|, |n|)`, and a pair of
/// zero gradients counts as exact.
pub fn grad_check(
    net: &Network<f64>,
    geometry: &ViewGeometry,
    records: &[SampleRecord],
    lambdas: [f64; 3],
    eps: f64,
    select: impl Fn(&str) -> bool,
) -> Result<GradCheck, FieldError> {
    let mut grad = vec![0.0; net.param_count()];
    loss_and_grad(net, geometry, records, lambdas, Some(&mut grad))?;
    let mut probe = net.clone();
    let mut result = GradCheck { max_rel_error: 0.0, worst: None, checked: 0 };
    for spec in net.layout().iter().filter(|s| select(&s.name)) {
        for i in spec.offset..spec.offset + spec.len() {
            let orig = probe.params[i];
            probe.params[i] = orig + eps;
            let plus = loss_and_grad(&probe, geometry, records, lambdas, None)?.total;
            probe.params[i] = orig - eps;
            let minus = loss_and_grad(&probe, geometry, records, lambdas, None)?.total;
            probe.params[i] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let analytic = grad[i];
            let denom = analytic.abs().max(numeric.abs());
            let rel = if denom == 0.0 { 0.0 } else { (analytic - numeric).abs() / denom };
            result.checked += 1;
            if rel > result.max_rel_error {
                result.max_rel_error = rel;
                result.worst = Some((spec.name.clone(), i - spec.offset));
            }
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(value: f32, surface: bool, normal: [f32; 3], edge: f32) -> SampleRecord {
        SampleRecord { position: [0.0; 3], sdf: 0.0, normal, edge, value, surface }
    }

    fn pred(value: f64, normal: Vec3, edge: f64) -> FieldOutput {
        FieldOutput { value, normal, edge, out_of_frame: [false; 4] }
    }

    #[test]
    fn exact_prediction_has_zero_loss() {
        let r = record(0.3, true, [0.0, 1.0, 0.0], 0.4);
        let l = loss(&pred(0.3f32 as f64, Vec3::y(), 0.4f32 as f64), &r, [1.0, 0.1, 0.1]);
        assert_eq!(l, LossParts::default());
    }

    #[test]
    fn antiparallel_normals_cost_two_lambda() {
        let r = record(0.5, true, [0.0, 0.0, 1.0], 0.0);
        let l = loss(&pred(0.5, -Vec3::z(), 0.0), &r, [1.0, 0.25, 0.1]);
        assert_eq!(l.normal, 0.5);
        let uniform = record(0.5, false, [0.0, 0.0, 1.0], 0.0);
        assert_eq!(loss(&pred(0.5, -Vec3::z(), 0.0), &uniform, [1.0, 0.25, 0.1]).normal, 0.0);
    }

    #[test]
    fn head_gradient_matches_differences() {
        let r = record(0.8, true, [0.6, 0.0, 0.8], 0.3);
        let raw = [0.4, 0.3, -0.2, 0.9, 0.1];
        let lambdas = [1.0, 0.1, 0.1];
        let f = |raw: &[f64]| loss(&decode(raw, [false; 4]), &r, lambdas).total;
        let g = loss_grad(&raw, &r, lambdas);
        for k in 0..5 {
            let (mut a, mut b) = (raw, raw);
            a[k] += 1e-6;
            b[k] -= 1e-6;
            assert!(((f(&a) - f(&b)) / 2e-6 - g[k]).abs() < 1e-8, "{k}");
        }
    }

    #[test]
    fn invalid_train_configs() {
        assert!(TrainConfig { batch_size: 2, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { lambda_edge: -1.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { momentum: 1.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn csv_layout() {
        let curve = [LossRecord { step: 3, loss: LossParts { total: 1.5, value: 1.0, normal: 0.25, edge: 0.25 } }];
        assert_eq!(write_loss_csv(&curve), "step,total,value,normal,edge\n3,1.5,1,0.25,0.25\n");
    }
}
