use crate::error::{Error, Result};
use crate::filterbank::{center_mad_ratio, to_counts, FilterSpec, FixedMadNcc, Precision};
use crate::nccnet::{NccNetwork, PreparedFilters};
use crate::patch::{dot, Patch};
use crate::patchmath::{normalize_into, Deviation, Normalized, ResponseMap};

enum Kind {
    Ncc(Normalized),
    FixedMad(FixedMadNcc),
    MadRatio,
    Network(Box<NccNetwork>, PreparedFilters),
}

/// A window scorer that can be slid over a frame. Degenerate (flat)
/// windows score 0.
pub struct Scorer {
    name: String,
    side: usize,
    kind: Kind,
}

impl Scorer {
    /// Float NCC in the filter's deviation mode, or the integer MAD-NCC
    /// pipeline for fixed-point MAD filters. Fixed-point STD filters are
    /// scored in float against their quantized taps.
    pub fn from_filter(spec: &FilterSpec) -> Result<Self> {
        let kind = match (spec.precision, spec.deviation) {
            (Precision::Fixed(_), Deviation::Mad) => Kind::FixedMad(FixedMadNcc::from_spec(spec)?),
            _ => {
                Kind::Ncc(Normalized::of(spec.grid.values(), spec.deviation).map_err(|_| Error::FlatFilter)?)
            }
        };
        Ok(Self {
            name: spec.name.clone(),
            side: spec.side(),
            kind,
        })
    }

    pub fn fixed_mad(name: impl Into<String>, filter: FixedMadNcc) -> Self {
        Self {
            name: name.into(),
            side: filter.side(),
            kind: Kind::FixedMad(filter),
        }
    }

    /// Centre-pixel MAD ratio over a `side × side` window.
    pub fn mad_ratio(name: impl Into<String>, side: usize) -> Result<Self> {
        if side.is_multiple_of(2) || side < 3 {
            return Err(Error::InvalidShape(format!(
                "MAD-ratio window side must be odd and >= 3, got {side}"
            )));
        }
        Ok(Self {
            name: name.into(),
            side,
            kind: Kind::MadRatio,
        })
    }

    pub fn network(name: impl Into<String>, net: NccNetwork) -> Result<Self> {
        let prepared = net.prepare()?;
        Ok(Self {
            name: name.into(),
            side: net.side(),
            kind: Kind::Network(Box::new(net), prepared),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Whether scores are unchanged by `a·frame + b` with `a > 0`.
    pub fn is_affine_invariant(&self) -> bool {
        match &self.kind {
            Kind::Ncc(_) | Kind::FixedMad(_) | Kind::MadRatio => true,
            Kind::Network(net, _) => net.mode().deviation().is_some(),
        }
    }

    /// Score of every valid window; entry `(r, c)` belongs to the window
    /// whose top-left corner is `(r, c)`. Fixed-point scorers need integer
    /// counts in `[0, 65535]`.
    pub fn response_map(&self, frame: &Patch) -> Result<ResponseMap> {
        let s = self.side;
        if s > frame.height() || s > frame.width() {
            return Err(Error::SizeMismatch(format!(
                "{s}x{s} window does not fit in {}x{} frame",
                frame.height(),
                frame.width()
            )));
        }
        let (oh, ow) = (frame.height() - s + 1, frame.width() - s + 1);
        let fw = frame.width();
        let mut values = Vec::with_capacity(oh * ow);
        match &self.kind {
            Kind::FixedMad(f) => {
                let counts = to_counts(frame)?;
                let mut window = Vec::with_capacity(s * s);
                for r in 0..oh {
                    for c in 0..ow {
                        window.clear();
                        for wr in 0..s {
                            let start = (r + wr) * fw + c;
                            window.extend_from_slice(&counts[start..start + s]);
                        }
                        values.push(f.score(&window)?.value());
                    }
                }
            }
            _ => {
                let px = frame.values();
                let mut window = Vec::with_capacity(s * s);
                let mut unit = Vec::with_capacity(s * s);
                for r in 0..oh {
                    for c in 0..ow {
                        window.clear();
                        for wr in 0..s {
                            let start = (r + wr) * fw + c;
                            window.extend_from_slice(&px[start..start + s]);
                        }
                        values.push(self.score_window(&window, &mut unit)?);
                    }
                }
            }
        }
        Ok(ResponseMap {
            height: oh,
            width: ow,
            values,
        })
    }

    fn score_window(&self, window: &[f64], unit: &mut Vec<f64>) -> Result<f64> {
        let degenerate_is_zero = |r: Result<f64>| match r {
            Err(Error::DegeneratePatch(_)) => Ok(0.0),
            other => other,
        };
        match &self.kind {
            Kind::Ncc(f) => {
                degenerate_is_zero(normalize_into(window, f.mode(), unit).map(|_| dot(unit, f.values())))
            }
            Kind::MadRatio => {
                let p = Patch::new(self.side, self.side, window.to_vec())?;
                Ok(center_mad_ratio(&p))
            }
            Kind::Network(net, prepared) => degenerate_is_zero(net.forward_values(prepared, window)),
            Kind::FixedMad(_) => unreachable!("scored on integer counts"),
        }
    }
}

impl std::fmt::Debug for Scorer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scorer")
            .field("name", &self.name)
            .field("side", &self.side)
            .finish_non_exhaustive()
    }
}
