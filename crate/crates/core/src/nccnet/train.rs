use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::patch::Patch;

use super::network::{check_label, BatchAccumulator, GradientSet, NccNetwork};

/// Per-epoch learning-rate factor: `√0.1`, i.e. a tenfold drop every two
/// epochs (1e-3 down to 1e-5 over five epochs).
pub const DEFAULT_LR_DECAY: f64 = 0.316_227_766_016_837_94;

/// Optimizer and schedule settings. Defaults are momentum 0.95, initial
/// learning rate 0.001 decaying geometrically per epoch, weight decay
/// 0.0005, batches of 40 and 5 epochs.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Rate of the first epoch.
    pub learning_rate: f64,
    /// Epoch `e` (1-based) uses `learning_rate · lr_decay^(e−1)`; 1 keeps
    /// the rate constant.
    pub lr_decay: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            lr_decay: DEFAULT_LR_DECAY,
            momentum: 0.95,
            weight_decay: 0.0005,
            batch_size: 40,
            max_epochs: 5,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // zero is accepted and freezes the network
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be >= 0".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::InvalidConfig("lr_decay must be in (0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig("momentum must be in [0, 1)".into()));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::InvalidConfig("weight_decay must be >= 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        Ok(())
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.lr_decay.powi(epoch.saturating_sub(1) as i32)
    }
}

/// Heavy-ball velocity, laid out like the network parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Velocity(pub GradientSet);

impl Velocity {
    pub fn zeros(net: &NccNetwork) -> Self {
        Velocity(GradientSet::zeros_like(net))
    }
}

/// `v ← m·v − lr·(g + λ·θ)`, `θ ← θ + v` for every filter tap and weight.
pub fn sgd_step(net: &mut NccNetwork, grads: &GradientSet, config: &TrainConfig, velocity: &mut Velocity) {
    let (lr, m, wd) = (config.learning_rate, config.momentum, config.weight_decay);
    let update = |theta: &mut f64, g: f64, v: &mut f64| {
        *v = m * *v - lr * (g + wd * *theta);
        *theta += *v;
    };
    for k in 0..net.filter_count() {
        let f = &mut net.filters_mut()[k];
        let side = f.width();
        let g = &grads.filter_grads[k];
        let v = &mut velocity.0.filter_grads[k];
        for i in 0..g.len() {
            let (r, c) = (i / side, i % side);
            let mut theta = f.get(r, c);
            update(&mut theta, g[i], &mut v[i]);
            f.set(r, c, theta);
        }
    }
    let v = &mut velocity.0.weight_grads;
    for (k, w) in net.weights_mut().iter_mut().enumerate() {
        update(w, grads.weight_grads[k], &mut v[k]);
    }
}

/// Indexed access to labelled training windows.
///
/// Implementations may synthesize windows on demand (augmentation) instead of
/// storing them.
pub trait SampleSource {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn label(&self, index: usize) -> f64;

    /// Writes the window pixels (row-major) into `buf`, replacing its content.
    fn fill(&self, index: usize, buf: &mut Vec<f64>);
}

/// A stored window and its `±1` label.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledPatch {
    pub patch: Patch,
    pub label: f64,
}

impl SampleSource for Vec<LabeledPatch> {
    fn len(&self) -> usize {
        Vec::len(self)
    }

    fn label(&self, index: usize) -> f64 {
        self[index].label
    }

    fn fill(&self, index: usize, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend_from_slice(self[index].patch.values());
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean L1 loss over the epoch's non-degenerate samples, measured before
    /// each batch update.
    pub mean_loss: f64,
    /// `‖θ_e − θ_{e−1}‖ / ‖θ_{e−1}‖` over all filter taps.
    pub filter_change: f64,
    pub held_out_accuracy: Option<f64>,
    pub skipped_degenerate: usize,
    /// Filters at the end of the epoch.
    pub filters: Vec<Patch>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    /// First epoch (1-based) whose filter change fell below `tol`.
    pub fn converged_at(&self, tol: f64) -> Option<usize> {
        self.epochs
            .iter()
            .find(|e| e.filter_change < tol)
            .map(|e| e.epoch)
    }
}

/// Output above which a window is called a target. Rectified scores make the
/// output non-negative whenever the weights are, so the cut sits halfway
/// between a fully suppressed output (0) and the positive target (1).
pub const DECISION_THRESHOLD: f64 = 0.5;

/// Fraction of samples classified correctly at [`DECISION_THRESHOLD`];
/// degenerate windows have output 0.
pub fn accuracy(net: &NccNetwork, source: &dyn SampleSource) -> Result<f64> {
    if source.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let prepared = net.prepare()?;
    let mut buf = Vec::new();
    let mut correct = 0usize;
    for i in 0..source.len() {
        source.fill(i, &mut buf);
        let out = match net.forward_values(&prepared, &buf) {
            Ok(v) => v,
            Err(Error::DegeneratePatch(_)) => 0.0,
            Err(e) => return Err(e),
        };
        let predicted = if out > DECISION_THRESHOLD { 1.0 } else { -1.0 };
        if predicted == source.label(i) {
            correct += 1;
        }
    }
    Ok(correct as f64 / source.len() as f64)
}

fn flat_filters(net: &NccNetwork) -> Vec<f64> {
    net.filters()
        .iter()
        .flat_map(|f| f.values().iter().copied())
        .collect()
}

/// Mini-batch SGD with momentum on the L1 loss.
///
/// Each epoch visits the samples in a seeded shuffled order; gradients are
/// averaged over the non-degenerate samples of each batch. Degenerate (flat)
/// windows are skipped and counted. The result depends only on the inputs.
pub fn train(
    net: &NccNetwork,
    data: &dyn SampleSource,
    held_out: Option<&dyn SampleSource>,
    config: &TrainConfig,
) -> Result<(NccNetwork, TrainHistory)> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut seen = [false; 2];
    for i in 0..data.len() {
        let label = data.label(i);
        check_label(label)?;
        seen[usize::from(label > 0.0)] = true;
    }
    if !(seen[0] && seen[1]) {
        return Err(Error::SingleClassDataset);
    }

    let mut net = net.clone();
    let mut velocity = Velocity::zeros(&net);
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = TrainHistory::default();
    let mut buf = Vec::new();

    for epoch in 1..=config.max_epochs {
        let step_config = TrainConfig {
            learning_rate: config.learning_rate_at(epoch),
            ..config.clone()
        };
        order.shuffle(&mut rng);
        let before = flat_filters(&net);
        let mut loss_sum = 0.0;
        let mut counted = 0usize;
        let mut skipped = 0usize;
        for batch in order.chunks(config.batch_size) {
            let prepared = net.prepare()?;
            let mut acc = BatchAccumulator::new(&net);
            let mut used = 0usize;
            for &i in batch {
                data.fill(i, &mut buf);
                match acc.add(&net, &prepared, &buf, data.label(i)) {
                    Ok(loss) => {
                        loss_sum += loss;
                        used += 1;
                    }
                    Err(Error::DegeneratePatch(_)) => skipped += 1,
                    Err(e) => return Err(e),
                }
            }
            if used == 0 {
                return Err(Error::AllDegenerateBatch);
            }
            counted += used;
            acc.scale(1.0 / used as f64);
            let grads = acc.finish(&net, &prepared)?;
            sgd_step(&mut net, &grads, &step_config, &mut velocity);
        }
        let after = flat_filters(&net);
        let diff: f64 = after
            .iter()
            .zip(&before)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let base: f64 = before.iter().map(|b| b * b).sum::<f64>().sqrt();
        let held_out_accuracy = match held_out {
            Some(h) if !h.is_empty() => Some(accuracy(&net, h)?),
            _ => None,
        };
        history.epochs.push(EpochRecord {
            epoch,
            mean_loss: loss_sum / counted as f64,
            filter_change: if base > 0.0 { diff / base } else { diff },
            held_out_accuracy,
            skipped_degenerate: skipped,
            filters: net.filters().to_vec(),
        });
    }
    Ok((net, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nccnet::{forward, init_network, NormMode};
    use rand::Rng;

    #[test]
    fn vanilla_sgd_step() {
        let mut net = init_network(1, 3, NormMode::Std, 1).unwrap();
        let before = net.clone();
        let mut grads = GradientSet::zeros_like(&net);
        grads.filter_grads[0] = (0..9).map(|i| i as f64).collect();
        grads.weight_grads[0] = 2.0;
        let cfg = TrainConfig {
            learning_rate: 0.1,
            momentum: 0.0,
            weight_decay: 0.0,
            ..TrainConfig::default()
        };
        let mut v = Velocity::zeros(&net);
        sgd_step(&mut net, &grads, &cfg, &mut v);
        for i in 0..9 {
            let (r, c) = (i / 3, i % 3);
            let expected = before.filters()[0].get(r, c) - 0.1 * i as f64;
            assert!((net.filters()[0].get(r, c) - expected).abs() < 1e-15);
        }
        assert!((net.weights()[0] - (before.weights()[0] - 0.2)).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut net = init_network(2, 5, NormMode::Mad, 3).unwrap();
        let before = net.clone();
        let cfg = TrainConfig {
            weight_decay: 0.0,
            ..TrainConfig::default()
        };
        let mut v = Velocity::zeros(&net);
        let zero = GradientSet::zeros_like(&net);
        sgd_step(&mut net, &zero, &cfg, &mut v);
        assert_eq!(net, before);
    }

    #[test]
    fn momentum_two_step_displacement() {
        // unrolled by hand: v1 = −lr·g, v2 = −m·lr·g − lr·g ⇒ Δθ = −lr·g·(2 + m)
        let (lr, m, g) = (0.01, 0.9, 3.0);
        let mut net = init_network(1, 3, NormMode::Std, 5).unwrap();
        let start = net.weights()[0];
        let mut grads = GradientSet::zeros_like(&net);
        grads.weight_grads[0] = g;
        let cfg = TrainConfig {
            learning_rate: lr,
            momentum: m,
            weight_decay: 0.0,
            ..TrainConfig::default()
        };
        let mut v = Velocity::zeros(&net);
        sgd_step(&mut net, &grads, &cfg, &mut v);
        sgd_step(&mut net, &grads, &cfg, &mut v);
        assert!((net.weights()[0] - start - (-lr * g * (2.0 + m))).abs() < 1e-15);
    }

    fn bright_center(rng: &mut ChaCha8Rng) -> Patch {
        Patch::from_fn(15, 15, |r, c| {
            let d2 = (r as f64 - 7.0).powi(2) + (c as f64 - 7.0).powi(2);
            100.0 + 40.0 * (-d2 / 2.0).exp() + rng.random_range(-2.0..2.0)
        })
    }

    fn noise(rng: &mut ChaCha8Rng) -> Patch {
        Patch::from_fn(15, 15, |_, _| 100.0 + rng.random_range(-2.0..2.0))
    }

    fn toy_set(seed: u64, count: usize) -> Vec<LabeledPatch> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|i| {
                if i % 2 == 0 {
                    LabeledPatch {
                        patch: bright_center(&mut rng),
                        label: 1.0,
                    }
                } else {
                    LabeledPatch {
                        patch: noise(&mut rng),
                        label: -1.0,
                    }
                }
            })
            .collect()
    }

    #[test]
    fn separable_toy_problem_is_learned() {
        let train_set = toy_set(1, 2000);
        let held = toy_set(2, 200);
        // a single rectified filter that starts anti-correlated with the bump
        // never receives gradient from positives, so start from one that does
        let net = (0..)
            .map(|seed| init_network(1, 15, NormMode::Std, seed).unwrap())
            .find(|net| forward(net, &train_set[0].patch).unwrap() > 0.0)
            .unwrap();
        let cfg = TrainConfig {
            rng_seed: 3,
            ..TrainConfig::default()
        };
        let (trained, hist) = train(&net, &train_set, Some(&held), &cfg).unwrap();
        assert_eq!(hist.epochs.len(), 5);
        let acc = hist.last().unwrap().held_out_accuracy.unwrap();
        assert!(acc > 0.95, "held-out accuracy {acc}");
        assert_eq!(accuracy(&trained, &held).unwrap(), acc);
    }

    #[test]
    fn training_is_deterministic() {
        let data = toy_set(4, 120);
        let net = init_network(2, 15, NormMode::Mad, 1).unwrap();
        let cfg = TrainConfig {
            rng_seed: 11,
            max_epochs: 2,
            ..TrainConfig::default()
        };
        let a = train(&net, &data, None, &cfg).unwrap();
        let b = train(&net, &data, None, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_learning_rate_freezes_filters() {
        let data = toy_set(5, 80);
        let net = init_network(1, 15, NormMode::Std, 2).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            max_epochs: 3,
            ..TrainConfig::default()
        };
        let (trained, hist) = train(&net, &data, None, &cfg).unwrap();
        assert_eq!(trained, net);
        assert!(hist.epochs.iter().all(|e| e.filter_change == 0.0));
    }

    #[test]
    fn degenerate_samples_are_skipped() {
        let mut data = toy_set(6, 40);
        data.push(LabeledPatch {
            patch: Patch::filled(15, 15, 3.0),
            label: -1.0,
        });
        let net = init_network(1, 15, NormMode::Std, 2).unwrap();
        let cfg = TrainConfig {
            max_epochs: 2,
            ..TrainConfig::default()
        };
        let (_, hist) = train(&net, &data, None, &cfg).unwrap();
        assert!(hist.epochs.iter().all(|e| e.skipped_degenerate == 1));
    }

    #[test]
    fn dataset_errors() {
        let net = init_network(1, 15, NormMode::Std, 2).unwrap();
        let cfg = TrainConfig::default();
        let empty: Vec<LabeledPatch> = Vec::new();
        assert!(matches!(
            train(&net, &empty, None, &cfg),
            Err(Error::EmptyDataset)
        ));
        let one_class: Vec<_> = toy_set(7, 10).into_iter().filter(|s| s.label > 0.0).collect();
        assert!(matches!(
            train(&net, &one_class, None, &cfg),
            Err(Error::SingleClassDataset)
        ));
        let flat = vec![
            LabeledPatch {
                patch: Patch::filled(15, 15, 1.0),
                label: 1.0,
            },
            LabeledPatch {
                patch: Patch::filled(15, 15, 2.0),
                label: -1.0,
            },
        ];
        assert!(matches!(
            train(&net, &flat, None, &cfg),
            Err(Error::AllDegenerateBatch)
        ));
        let bad = TrainConfig {
            momentum: 1.0,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(&net, &toy_set(8, 4), None, &bad),
            Err(Error::InvalidConfig(_))
        ));
    }
}
