use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::patch::{dot, Patch};
use crate::patchmath::{backprop_normalized, Deviation, KinkPolicy, Normalized};

pub const MAX_FILTERS: usize = 4;

/// Half-width of the uniform interval filter taps are drawn from.
pub const INIT_TAP_BOUND: f64 = 0.05;

/// Fixed input gain of the unnormalized mode. Raw detector counts (10³–10⁴)
/// would otherwise make plain correlation outputs and their gradients
/// explode under the shared optimizer settings. A global constant leaves the
/// mean intensity in the signal, which is what the baseline is meant to show.
pub const UNNORMALIZED_GAIN: f64 = 1.0 / 4096.0;

/// How the correlation layer treats its operands.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NormMode {
    Std,
    Mad,
    /// Plain correlation of raw (gain-scaled) pixels with raw taps.
    None,
}

impl NormMode {
    pub fn deviation(self) -> Option<Deviation> {
        match self {
            NormMode::Std => Some(Deviation::Std),
            NormMode::Mad => Some(Deviation::Mad),
            NormMode::None => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NormMode::Std => "std",
            NormMode::Mad => "mad",
            NormMode::None => "none",
        }
    }
}

impl std::str::FromStr for NormMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "std" => Ok(NormMode::Std),
            "mad" => Ok(NormMode::Mad),
            "none" => Ok(NormMode::None),
            other => Err(Error::InvalidConfig(format!("unknown norm mode `{other}`"))),
        }
    }
}

/// Correlation layer of up to four filters, per-filter ReLU, and a `1×1×N`
/// weighted-sum decision layer. No bias terms.
#[derive(Clone, Debug, PartialEq)]
pub struct NccNetwork {
    filters: Vec<Patch>,
    weights: Vec<f64>,
    mode: NormMode,
}

/// Gradients with the same layout as [`NccNetwork`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet {
    pub filter_grads: Vec<Vec<f64>>,
    pub weight_grads: Vec<f64>,
}

impl GradientSet {
    pub fn zeros_like(net: &NccNetwork) -> Self {
        Self {
            filter_grads: net.filters.iter().map(|f| vec![0.0; f.len()]).collect(),
            weight_grads: vec![0.0; net.weights.len()],
        }
    }
}

impl NccNetwork {
    pub fn new(filters: Vec<Patch>, weights: Vec<f64>, mode: NormMode) -> Result<Self> {
        let n = filters.len();
        if n == 0 || n > MAX_FILTERS {
            return Err(Error::InvalidFilterCount(n));
        }
        if weights.len() != n {
            return Err(Error::SizeMismatch(format!(
                "{n} filters but {} decision weights",
                weights.len()
            )));
        }
        let first = &filters[0];
        if !first.is_square() || first.height().is_multiple_of(2) {
            return Err(Error::InvalidShape(format!(
                "filters must be square with odd side, got {}x{}",
                first.height(),
                first.width()
            )));
        }
        if filters.iter().any(|f| !f.same_shape(first)) {
            return Err(Error::InvalidShape("filters differ in size".into()));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite(0));
        }
        Ok(Self {
            filters,
            weights,
            mode,
        })
    }

    pub fn filters(&self) -> &[Patch] {
        &self.filters
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mode(&self) -> NormMode {
        self.mode
    }

    pub fn filter_count(&self) -> usize {
        self.filters.len()
    }

    /// Side length of the (square) filters and hence of the input window.
    pub fn side(&self) -> usize {
        self.filters[0].height()
    }

    pub(crate) fn filters_mut(&mut self) -> &mut [Patch] {
        &mut self.filters
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// Precomputes the per-filter operands used by scoring.
    pub fn prepare(&self) -> Result<PreparedFilters> {
        let operands = match self.mode.deviation() {
            Some(dev) => self
                .filters
                .iter()
                .map(|f| Normalized::of(f.values(), dev))
                .collect::<Result<Vec<_>>>()?,
            None => Vec::new(),
        };
        Ok(PreparedFilters { operands })
    }

    /// Per-filter correlation scores of a window given as raw pixel values.
    pub(crate) fn scores_into(
        &self,
        prepared: &PreparedFilters,
        window: &[f64],
        scratch: &mut Vec<f64>,
        scores: &mut Vec<f64>,
    ) -> Result<Option<Normalized>> {
        scores.clear();
        match self.mode.deviation() {
            Some(dev) => {
                let norm = Normalized::of(window, dev)?;
                for op in &prepared.operands {
                    scores.push(dot(norm.values(), op.values()));
                }
                Ok(Some(norm))
            }
            None => {
                scratch.clear();
                scratch.extend(window.iter().map(|v| v * UNNORMALIZED_GAIN));
                for f in &self.filters {
                    scores.push(dot(scratch, f.values()));
                }
                Ok(None)
            }
        }
    }

    pub(crate) fn combine(&self, scores: &[f64]) -> f64 {
        scores.iter().zip(&self.weights).map(|(s, w)| w * relu(*s)).sum()
    }

    /// Targetness of a window given as raw row-major pixels.
    pub fn forward_values(&self, prepared: &PreparedFilters, window: &[f64]) -> Result<f64> {
        let mut scratch = Vec::new();
        let mut scores = Vec::with_capacity(self.filters.len());
        self.scores_into(prepared, window, &mut scratch, &mut scores)?;
        Ok(self.combine(&scores))
    }
}

/// Filter operands normalized once, reused across many windows.
#[derive(Clone, Debug)]
pub struct PreparedFilters {
    pub(crate) operands: Vec<Normalized>,
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

pub fn l1_loss(output: f64, label: f64) -> Result<f64> {
    check_label(label)?;
    Ok((output - label).abs())
}

pub(crate) fn check_label(label: f64) -> Result<()> {
    if label == 1.0 || label == -1.0 {
        Ok(())
    } else {
        Err(Error::InvalidLabel(label))
    }
}

fn check_window(net: &NccNetwork, p: &Patch) -> Result<()> {
    if !p.same_shape(&net.filters[0]) {
        return Err(Error::SizeMismatch(format!(
            "patch {}x{} vs {}x{} filters",
            p.height(),
            p.width(),
            net.side(),
            net.side()
        )));
    }
    Ok(())
}

/// Scalar targetness `Σ_k w_k · relu(score_k)`.
pub fn forward(net: &NccNetwork, p: &Patch) -> Result<f64> {
    check_window(net, p)?;
    net.forward_values(&net.prepare()?, p.values())
}

/// Loss and exact gradients of `l1_loss(forward(net, p), label)`.
///
/// Subgradient conventions: `relu'(0) = 0`, `d|x|/dx = 0` at 0, and
/// `sign(0) = 0` at MAD kinks.
pub fn backward(net: &NccNetwork, p: &Patch, label: f64) -> Result<(f64, GradientSet)> {
    check_window(net, p)?;
    check_label(label)?;
    let prepared = net.prepare()?;
    let mut acc = BatchAccumulator::new(net);
    let loss = acc.add(net, &prepared, p.values(), label)?;
    Ok((loss, acc.finish(net, &prepared)?))
}

/// Accumulates gradients over a batch. Filter gradients are collected with
/// respect to the normalized filters and pushed through the filter
/// normalization once in [`BatchAccumulator::finish`]; the normalization is
/// linearized at the same point for every sample of the batch.
pub(crate) struct BatchAccumulator {
    filter_upstream: Vec<Vec<f64>>,
    weight_grads: Vec<f64>,
    scratch: Vec<f64>,
    scores: Vec<f64>,
}

impl BatchAccumulator {
    pub(crate) fn new(net: &NccNetwork) -> Self {
        let n = net.filters[0].len();
        Self {
            filter_upstream: vec![vec![0.0; n]; net.filters.len()],
            weight_grads: vec![0.0; net.filters.len()],
            scratch: Vec::with_capacity(n),
            scores: Vec::with_capacity(net.filters.len()),
        }
    }

    /// Adds one sample; returns its loss.
    pub(crate) fn add(
        &mut self,
        net: &NccNetwork,
        prepared: &PreparedFilters,
        window: &[f64],
        label: f64,
    ) -> Result<f64> {
        let norm = net.scores_into(prepared, window, &mut self.scratch, &mut self.scores)?;
        let output = net.combine(&self.scores);
        let diff = output - label;
        let d_out = if diff > 0.0 {
            1.0
        } else if diff < 0.0 {
            -1.0
        } else {
            0.0
        };
        if d_out != 0.0 {
            let operand: &[f64] = match &norm {
                Some(n) => n.values(),
                None => &self.scratch,
            };
            for k in 0..net.filters.len() {
                let s = self.scores[k];
                self.weight_grads[k] += d_out * relu(s);
                if s > 0.0 && net.weights[k] != 0.0 {
                    let d_score = d_out * net.weights[k];
                    for (u, x) in self.filter_upstream[k].iter_mut().zip(operand) {
                        *u += d_score * x;
                    }
                }
            }
        }
        Ok(diff.abs())
    }

    pub(crate) fn scale(&mut self, factor: f64) {
        for u in &mut self.filter_upstream {
            u.iter_mut().for_each(|v| *v *= factor);
        }
        self.weight_grads.iter_mut().for_each(|v| *v *= factor);
    }

    pub(crate) fn finish(self, net: &NccNetwork, prepared: &PreparedFilters) -> Result<GradientSet> {
        let filter_grads = match net.mode.deviation() {
            Some(_) => self
                .filter_upstream
                .iter()
                .zip(&prepared.operands)
                .map(|(u, op)| backprop_normalized(u, op, KinkPolicy::Subgradient))
                .collect::<Result<Vec<_>>>()?,
            None => self.filter_upstream,
        };
        Ok(GradientSet {
            filter_grads,
            weight_grads: self.weight_grads,
        })
    }
}

/// Filters with i.i.d. uniform taps in `[−0.05, 0.05]`, decision weights `1/N`.
pub fn init_network(filter_count: usize, side: usize, mode: NormMode, seed: u64) -> Result<NccNetwork> {
    if filter_count == 0 || filter_count > MAX_FILTERS {
        return Err(Error::InvalidFilterCount(filter_count));
    }
    if side.is_multiple_of(2) {
        return Err(Error::InvalidShape(format!(
            "filter side must be odd, got {side}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let filters = (0..filter_count)
        .map(|_| {
            Patch::from_fn(side, side, |_, _| {
                rng.random_range(-INIT_TAP_BOUND..=INIT_TAP_BOUND)
            })
        })
        .collect();
    let weights = vec![1.0 / filter_count as f64; filter_count];
    NccNetwork::new(filters, weights, mode)
}

/// Cosine similarity of the mean-centered filters, in `[−1, 1]`.
pub fn filter_similarity(a: &Patch, b: &Patch) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::SizeMismatch("filters differ in size".into()));
    }
    let na = Normalized::of(a.values(), Deviation::Std).map_err(|_| Error::FlatFilter)?;
    let nb = Normalized::of(b.values(), Deviation::Std).map_err(|_| Error::FlatFilter)?;
    Ok(dot(na.values(), nb.values()).clamp(-1.0, 1.0))
}
