//! Iterative landing-site proposal over a suitability raster.
//!
//! A radially decaying kernel is correlated with the binary suitability grid to
//! produce a response map whose peaks sit at the centers of large contiguous
//! suitable regions. Each iteration proposes the global maximum, asks a
//! [`Verifier`] about it, and updates the map with a tabu rule:
//!
//! * accepted: every value in the `(2d+1)²` square around the center is zeroed;
//! * rejected: values in the same square are scaled by
//!   `((x - x*)² + (y - y*)²) / (2d²)`, which is 0 at the center and 1 at the
//!   square's corners.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{Pixel, PixelRect, SuitabilityRaster};
use crate::verifier::{PatchSource, Verdict, VerdictLabel, Verifier, VerifyError};

#[derive(Debug, Error, PartialEq)]
pub enum ProposalError {
    #[error("kernel half-width must be at least 1, got {0}")]
    InvalidHalfWidth(usize),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("raster {width}x{height} is smaller than the {side}x{side} kernel footprint")]
    RasterTooSmall { width: usize, height: usize, side: usize },
    #[error("response map is empty")]
    EmptyResponse,
    #[error("maximum response {max} does not exceed the floor {floor}")]
    BelowFloor { max: f64, floor: f64 },
    #[error("pixel ({x}, {y}) outside the response map")]
    OutOfBounds { x: usize, y: usize },
    #[error("invalid loop configuration: {0}")]
    InvalidConfig(String),
}

/// `(2d+1) × (2d+1)` weights `1 - ((i-d)² + (j-d)²) / (2d²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    half_width: usize,
    weights: Vec<f64>,
}

impl Kernel {
    pub fn new(half_width: usize) -> Result<Self, ProposalError> {
        if half_width < 1 {
            return Err(ProposalError::InvalidHalfWidth(half_width));
        }
        let d = half_width as f64;
        let side = 2 * half_width + 1;
        let denom = 2.0 * d * d;
        let weights = (0..side)
            .flat_map(|i| (0..side).map(move |j| (i, j)))
            .map(|(i, j)| {
                let di = i as f64 - d;
                let dj = j as f64 - d;
                1.0 - (di * di + dj * dj) / denom
            })
            .collect();
        Ok(Self { half_width, weights })
    }

    /// Rebuilds a kernel from a dumped weight matrix, checking it is square
    /// with odd side at least 3.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ProposalError> {
        let side = rows.len();
        if side < 3 || side.is_multiple_of(2) {
            return Err(ProposalError::InvalidKernel(format!("side {side} is not odd and >= 3")));
        }
        if rows.iter().any(|r| r.len() != side) {
            return Err(ProposalError::InvalidKernel("matrix is not square".into()));
        }
        Ok(Self {
            half_width: side / 2,
            weights: rows.concat(),
        })
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn side(&self) -> usize {
        2 * self.half_width + 1
    }

    /// Weight at row `i`, column `j` of the footprint.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.side() + j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.weights.chunks(self.side()).map(<[f64]>::to_vec).collect()
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Serialized form of a kernel (`kernel-dump` output).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelDump {
    pub d: usize,
    pub weights: Vec<Vec<f64>>,
}

impl From<&Kernel> for KernelDump {
    fn from(k: &Kernel) -> Self {
        Self {
            d: k.half_width,
            weights: k.rows(),
        }
    }
}

impl TryFrom<KernelDump> for Kernel {
    type Error = ProposalError;

    fn try_from(dump: KernelDump) -> Result<Self, Self::Error> {
        let k = Kernel::from_rows(&dump.weights)?;
        if k.half_width != dump.d {
            return Err(ProposalError::InvalidKernel(format!(
                "declared d={} but matrix side is {}",
                dump.d,
                k.side()
            )));
        }
        Ok(k)
    }
}

/// Footprint half-width covering `radius_m` at the given ground sample distance.
pub fn default_half_width(radius_m: f64, gsd: f64) -> usize {
    ((radius_m / gsd).ceil() as usize).max(1)
}

/// Half the kernel mass: at least half the footprint must be suitable.
pub fn default_response_floor(kernel: &Kernel) -> f64 {
    0.5 * kernel.sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ResponseMap {
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), width * height, "response buffer length");
        Self { width, height, values }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, p: Pixel) -> f64 {
        self.values[p.y * self.width + p.x]
    }

    /// Global maximum; ties resolve to the first in row-major order.
    pub fn argmax(&self) -> Option<(Pixel, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in self.values.iter().enumerate() {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, v)| (Pixel::new(i % self.width, i / self.width), v))
    }

    fn check(&self, center: Pixel) -> Result<(), ProposalError> {
        if center.x >= self.width || center.y >= self.height {
            return Err(ProposalError::OutOfBounds { x: center.x, y: center.y });
        }
        Ok(())
    }

    /// Zeroes the `(2d+1)²` square around `center`, clipped to the map.
    pub fn suppress_hard(&mut self, center: Pixel, half_width: usize) -> Result<(), ProposalError> {
        self.check(center)?;
        let rect = PixelRect::square_clipped(center, half_width, self.width, self.height);
        for y in rect.y0..rect.y1 {
            self.values[y * self.width + rect.x0..y * self.width + rect.x1].fill(0.0);
        }
        Ok(())
    }

    /// Scales the square around `center` by the squared distance over `2d²`.
    pub fn penalize_soft(&mut self, center: Pixel, half_width: usize) -> Result<(), ProposalError> {
        self.check(center)?;
        let rect = PixelRect::square_clipped(center, half_width, self.width, self.height);
        let denom = 2.0 * (half_width as f64).powi(2);
        for p in rect.pixels() {
            let dx = p.x as f64 - center.x as f64;
            let dy = p.y as f64 - center.y as f64;
            self.values[p.y * self.width + p.x] *= (dx * dx + dy * dy) / denom;
        }
        Ok(())
    }
}

/// Correlates the suitability grid with `kernel`, treating everything outside
/// the raster as unsuitable. The output has the raster's dimensions.
pub fn compute_response(raster: &SuitabilityRaster, kernel: &Kernel) -> Result<ResponseMap, ProposalError> {
    let (w, h) = (raster.width(), raster.height());
    let side = kernel.side();
    if w < side || h < side {
        return Err(ProposalError::RasterTooSmall { width: w, height: h, side });
    }
    let d = kernel.half_width();
    let data = raster.data();
    let mut values = vec![0.0; w * h];
    for y in 0..h {
        let out = &mut values[y * w..(y + 1) * w];
        let ky_lo = d.saturating_sub(y);
        let ky_hi = side.min(h + d - y);
        for ky in ky_lo..ky_hi {
            let src = &data[(y + ky - d) * w..(y + ky - d + 1) * w];
            let krow = &kernel.weights()[ky * side..(ky + 1) * side];
            for (x, acc) in out.iter_mut().enumerate() {
                let kx_lo = d.saturating_sub(x);
                let kx_hi = side.min(w + d - x);
                for kx in kx_lo..kx_hi {
                    if src[x + kx - d] != 0 {
                        *acc += krow[kx];
                    }
                }
            }
        }
    }
    Ok(ResponseMap::from_values(w, h, values))
}

/// A proposed landing location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub center: Pixel,
    /// Response value at `center` when proposed.
    pub response: f64,
    /// Footprint square around `center`, clipped to the raster.
    pub bbox: PixelRect,
    pub iteration: usize,
}

impl Candidate {
    pub fn new(center: Pixel, response: f64, half_width: usize, width: usize, height: usize, iteration: usize) -> Self {
        Self {
            center,
            response,
            bbox: PixelRect::square_clipped(center, half_width, width, height),
            iteration,
        }
    }

    /// Stable identifier used in logs and error messages.
    pub fn id(&self) -> String {
        format!("it{:03}@{},{}", self.iteration, self.center.x, self.center.y)
    }
}

/// Proposes the response maximum, or reports `BelowFloor` when it does not
/// exceed `floor`.
pub fn propose(
    response: &ResponseMap,
    half_width: usize,
    floor: f64,
    iteration: usize,
) -> Result<Candidate, ProposalError> {
    let (center, max) = response.argmax().ok_or(ProposalError::EmptyResponse)?;
    if max <= floor {
        return Err(ProposalError::BelowFloor { max, floor });
    }
    Ok(Candidate::new(
        center,
        max,
        half_width,
        response.width(),
        response.height(),
        iteration,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub half_width: usize,
    /// Number of accepted sites after which the loop stops.
    pub max_accepted: usize,
    pub max_iterations: usize,
    /// Proposals must exceed this response value.
    pub response_floor: f64,
}

impl LoopConfig {
    pub fn new(
        half_width: usize,
        max_accepted: usize,
        max_iterations: usize,
        response_floor: f64,
    ) -> Result<Self, ProposalError> {
        let cfg = Self {
            half_width,
            max_accepted,
            max_iterations,
            response_floor,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Uses half the kernel mass as the response floor.
    pub fn with_default_floor(half_width: usize, max_accepted: usize, max_iterations: usize) -> Result<Self, ProposalError> {
        let kernel = Kernel::new(half_width)?;
        Self::new(half_width, max_accepted, max_iterations, default_response_floor(&kernel))
    }

    pub fn validate(&self) -> Result<(), ProposalError> {
        if self.half_width < 1 {
            return Err(ProposalError::InvalidHalfWidth(self.half_width));
        }
        if self.max_accepted < 1 {
            return Err(ProposalError::InvalidConfig("max_accepted must be >= 1".into()));
        }
        if self.max_iterations < self.max_accepted {
            return Err(ProposalError::InvalidConfig(
                "max_iterations must be >= max_accepted".into(),
            ));
        }
        if self.response_floor.is_nan() || self.response_floor < 0.0 {
            return Err(ProposalError::InvalidConfig("response_floor must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TabuAction {
    HardSuppress,
    SoftPenalty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopStep {
    pub candidate: Candidate,
    pub verdict: Verdict,
    pub action: TabuAction,
}

impl LoopStep {
    pub fn accepted(&self) -> bool {
        self.action == TabuAction::HardSuppress
    }

    pub fn record(&self) -> TraceRecord {
        TraceRecord {
            iteration: self.candidate.iteration,
            center_px: [self.candidate.center.x, self.candidate.center.y],
            response: self.candidate.response,
            verdict: self.verdict.label,
            reason: self.verdict.reason.clone(),
            action: self.action,
        }
    }
}

/// One line of the serialized proposal trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub center_px: [usize; 2],
    pub response: f64,
    pub verdict: VerdictLabel,
    pub reason: String,
    pub action: TabuAction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxAccepted,
    BelowFloor,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopOutcome {
    pub steps: Vec<LoopStep>,
    pub stop: StopReason,
}

impl LoopOutcome {
    pub fn accepted(&self) -> impl Iterator<Item = &LoopStep> {
        self.steps.iter().filter(|s| s.accepted())
    }

    pub fn trace(&self) -> Vec<TraceRecord> {
        self.steps.iter().map(LoopStep::record).collect()
    }
}

#[derive(Debug, Error)]
pub enum LoopError {
    #[error(transparent)]
    Proposal(#[from] ProposalError),
    #[error("verification failed after {} completed step(s): {source}", partial.len())]
    Verifier {
        #[source]
        source: VerifyError,
        partial: Vec<LoopStep>,
    },
}

/// Outcome of a single [`ProposalLoop::step`].
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Continue(LoopStep),
    Stopped(StopReason),
}

/// Stepwise propose-and-verify loop over one response map.
pub struct ProposalLoop<'a> {
    raster: &'a SuitabilityRaster,
    patches: &'a PatchSource,
    config: LoopConfig,
    response: ResponseMap,
    iteration: usize,
    accepted: usize,
    steps: Vec<LoopStep>,
    stopped: Option<StopReason>,
}

impl<'a> ProposalLoop<'a> {
    pub fn new(raster: &'a SuitabilityRaster, patches: &'a PatchSource, config: LoopConfig) -> Result<Self, ProposalError> {
        config.validate()?;
        let kernel = Kernel::new(config.half_width)?;
        let response = compute_response(raster, &kernel)?;
        Ok(Self {
            raster,
            patches,
            config,
            response,
            iteration: 0,
            accepted: 0,
            steps: Vec::new(),
            stopped: None,
        })
    }

    pub fn response(&self) -> &ResponseMap {
        &self.response
    }

    pub fn steps(&self) -> &[LoopStep] {
        &self.steps
    }

    pub fn step(&mut self, verifier: &dyn Verifier) -> Result<Step, VerifyError> {
        if let Some(stop) = self.stopped {
            return Ok(Step::Stopped(stop));
        }
        let stop = if self.accepted >= self.config.max_accepted {
            Some(StopReason::MaxAccepted)
        } else if self.iteration >= self.config.max_iterations {
            Some(StopReason::MaxIterations)
        } else {
            None
        };
        if let Some(stop) = stop {
            self.stopped = Some(stop);
            return Ok(Step::Stopped(stop));
        }

        let candidate = match propose(
            &self.response,
            self.config.half_width,
            self.config.response_floor,
            self.iteration,
        ) {
            Ok(c) => c,
            Err(_) => {
                self.stopped = Some(StopReason::BelowFloor);
                return Ok(Step::Stopped(StopReason::BelowFloor));
            }
        };
        let request = self.patches.request(&candidate, self.raster)?;
        let verdict = verifier.verify(&request)?;
        let d = self.config.half_width;
        let action = if verdict.is_safe() {
            self.response
                .suppress_hard(candidate.center, d)
                .expect("argmax lies inside the map");
            self.accepted += 1;
            TabuAction::HardSuppress
        } else {
            self.response
                .penalize_soft(candidate.center, d)
                .expect("argmax lies inside the map");
            TabuAction::SoftPenalty
        };
        self.iteration += 1;
        let step = LoopStep {
            candidate,
            verdict,
            action,
        };
        self.steps.push(step.clone());
        Ok(Step::Continue(step))
    }

    /// Steps until a stop condition, returning the full trace.
    pub fn run(mut self, verifier: &dyn Verifier) -> Result<LoopOutcome, LoopError> {
        loop {
            match self.step(verifier) {
                Ok(Step::Continue(_)) => {}
                Ok(Step::Stopped(stop)) => {
                    return Ok(LoopOutcome {
                        steps: self.steps,
                        stop,
                    })
                }
                Err(source) => {
                    return Err(LoopError::Verifier {
                        source,
                        partial: self.steps,
                    })
                }
            }
        }
    }
}

/// Runs the propose/verify/update cycle to completion.
pub fn run_proposal_loop(
    raster: &SuitabilityRaster,
    patches: &PatchSource,
    verifier: &dyn Verifier,
    config: &LoopConfig,
) -> Result<LoopOutcome, LoopError> {
    ProposalLoop::new(raster, patches, config.clone())?.run(verifier)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{RasterKind, RasterMeta, WorldPoint};
    use crate::verifier::{PatchRequest, VerdictSource};
    use proptest::prelude::*;

    fn meta() -> RasterMeta {
        RasterMeta::new(1.0, WorldPoint::new(0.0, 0.0), "local", RasterKind::Suitability).unwrap()
    }

    fn raster(w: usize, h: usize, data: Vec<u8>) -> SuitabilityRaster {
        SuitabilityRaster::new(w, h, data, meta()).unwrap()
    }

    fn always(label: VerdictLabel) -> impl Fn(&PatchRequest) -> Result<Verdict, VerifyError> {
        move |_| Ok(Verdict::new(label, "fixed", VerdictSource::RuleOracle))
    }

    #[test]
    fn kernel_d1() {
        let k = Kernel::new(1).unwrap();
        assert_eq!(k.rows(), vec![vec![0.0, 0.5, 0.0], vec![0.5, 1.0, 0.5], vec![0.0, 0.5, 0.0]]);
        assert_eq!(k.sum(), 3.0);
    }

    #[test]
    fn kernel_d2_and_invalid() {
        let k = Kernel::new(2).unwrap();
        assert_eq!(k.weight(0, 2), 0.5);
        assert_eq!(k.weight(2, 2), 1.0);
        assert_eq!(k.weight(0, 0), 0.0);
        assert_eq!(Kernel::new(0), Err(ProposalError::InvalidHalfWidth(0)));
    }

    #[test]
    fn kernel_dump_round_trip() {
        let k = Kernel::new(3).unwrap();
        let json = serde_json::to_string(&KernelDump::from(&k)).unwrap();
        let back: KernelDump = serde_json::from_str(&json).unwrap();
        assert_eq!(Kernel::try_from(back).unwrap(), k);
        let bad = KernelDump { d: 2, weights: k.rows() };
        assert!(Kernel::try_from(bad).is_err());
    }

    #[test]
    fn response_of_full_3x3() {
        let r = compute_response(&raster(3, 3, vec![1; 9]), &Kernel::new(1).unwrap()).unwrap();
        assert_eq!(r.get(Pixel::new(1, 1)), 3.0);
        // corner sees the center, two edges and itself
        assert_eq!(r.get(Pixel::new(0, 0)), 1.0 + 0.5 + 0.5 + 0.0);
    }

    #[test]
    fn response_of_zeros_and_too_small() {
        let r = compute_response(&raster(5, 5, vec![0; 25]), &Kernel::new(2).unwrap()).unwrap();
        assert!(r.values().iter().all(|&v| v == 0.0));
        assert_eq!(
            compute_response(&raster(4, 9, vec![0; 36]), &Kernel::new(2).unwrap()),
            Err(ProposalError::RasterTooSmall { width: 4, height: 9, side: 5 })
        );
    }

    #[test]
    fn propose_argmax_and_ties() {
        let mut vals = vec![1.0; 100];
        vals[7 * 10 + 5] = 3.0;
        let r = ResponseMap::from_values(10, 10, vals);
        let c = propose(&r, 1, 0.0, 0).unwrap();
        assert_eq!((c.center, c.response), (Pixel::new(5, 7), 3.0));

        let uniform = ResponseMap::from_values(4, 4, vec![2.0; 16]);
        assert_eq!(propose(&uniform, 1, 0.0, 0).unwrap().center, Pixel::new(0, 0));
        assert!(matches!(propose(&uniform, 1, 2.0, 0), Err(ProposalError::BelowFloor { .. })));
        let empty = ResponseMap::from_values(0, 0, vec![]);
        assert_eq!(propose(&empty, 1, 0.0, 0), Err(ProposalError::EmptyResponse));
    }

    #[test]
    fn hard_suppression() {
        let mut r = ResponseMap::from_values(5, 5, vec![1.0; 25]);
        r.suppress_hard(Pixel::new(2, 2), 1).unwrap();
        assert_eq!(r.values().iter().filter(|&&v| v == 0.0).count(), 9);
        assert_eq!(r.values().iter().sum::<f64>(), 16.0);

        let mut r = ResponseMap::from_values(5, 5, vec![1.0; 25]);
        r.suppress_hard(Pixel::new(0, 0), 1).unwrap();
        let zeros: Vec<_> = (0..25).filter(|&i| r.values()[i] == 0.0).collect();
        assert_eq!(zeros, vec![0, 1, 5, 6]);
        assert!(r.suppress_hard(Pixel::new(5, 0), 1).is_err());
    }

    #[test]
    fn soft_penalty() {
        let mut r = ResponseMap::from_values(5, 5, vec![2.0; 25]);
        r.values[2 * 5 + 2] = 5.0;
        r.penalize_soft(Pixel::new(2, 2), 1).unwrap();
        assert_eq!(r.get(Pixel::new(2, 2)), 0.0);
        assert_eq!(r.get(Pixel::new(3, 2)), 1.0);
        assert_eq!(r.get(Pixel::new(3, 3)), 2.0);
        assert_eq!(r.get(Pixel::new(4, 4)), 2.0);
        assert!(r.penalize_soft(Pixel::new(0, 9), 1).is_err());
    }

    #[test]
    fn loop_config_validation() {
        assert!(LoopConfig::new(1, 0, 5, 0.0).is_err());
        assert!(LoopConfig::new(1, 3, 2, 0.0).is_err());
        assert!(LoopConfig::new(1, 1, 2, -1.0).is_err());
        assert!(LoopConfig::new(0, 1, 2, 0.0).is_err());
        assert_eq!(LoopConfig::with_default_floor(1, 1, 1).unwrap().response_floor, 1.5);
        assert_eq!(default_half_width(10.0, 0.3), 34);
        assert_eq!(default_half_width(10.0, 1.0), 10);
        assert_eq!(default_half_width(0.1, 1.0), 1);
    }

    #[test]
    fn empty_raster_stops_immediately() {
        let r = raster(16, 16, vec![0; 256]);
        let cfg = LoopConfig::new(1, 2, 10, 0.0).unwrap();
        let out = run_proposal_loop(&r, &PatchSource::from_suitability(&r), &always(VerdictLabel::Safe), &cfg).unwrap();
        assert!(out.steps.is_empty());
        assert_eq!(out.stop, StopReason::BelowFloor);
    }

    #[test]
    fn always_unsafe_never_accepts() {
        let mut data = vec![0; 256];
        for y in 4..12 {
            for x in 4..12 {
                data[y * 16 + x] = 1;
            }
        }
        let r = raster(16, 16, data);
        let cfg = LoopConfig::with_default_floor(1, 2, 30).unwrap();
        let out = run_proposal_loop(&r, &PatchSource::from_suitability(&r), &always(VerdictLabel::Unsafe), &cfg).unwrap();
        assert_eq!(out.accepted().count(), 0);
        assert!(matches!(out.stop, StopReason::MaxIterations | StopReason::BelowFloor));
        assert!(out.steps.len() <= 30);
    }

    #[test]
    fn verifier_error_keeps_partial_trace() {
        let r = raster(8, 8, vec![1; 64]);
        let cfg = LoopConfig::new(1, 5, 10, 0.0).unwrap();
        let calls = std::cell::Cell::new(0);
        let flaky = |req: &PatchRequest| {
            calls.set(calls.get() + 1);
            if calls.get() > 2 {
                Err(VerifyError::Timeout { candidate: req.candidate_id.clone(), attempts: 3 })
            } else {
                Ok(Verdict::new(VerdictLabel::Safe, "ok", VerdictSource::RuleOracle))
            }
        };
        match run_proposal_loop(&r, &PatchSource::from_suitability(&r), &flaky, &cfg) {
            Err(LoopError::Verifier { source, partial }) => {
                assert_eq!(partial.len(), 2);
                assert_eq!(source.candidate(), Some("it002@5,1"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn kernel_symmetry(d in 1usize..=8) {
            let k = Kernel::new(d).unwrap();
            let n = k.side();
            prop_assert_eq!(k.weight(d, d), 1.0);
            for i in 0..n {
                for j in 0..n {
                    let w = k.weight(i, j);
                    prop_assert!(w >= 0.0);
                    prop_assert_eq!(w, k.weight(j, n - 1 - i));
                    prop_assert_eq!(w, k.weight(n - 1 - i, j));
                    prop_assert_eq!(w, k.weight(i, n - 1 - j));
                }
            }
        }

        #[test]
        fn adding_a_suitable_pixel_is_monotone(
            bits in proptest::collection::vec(0u8..2, 144),
            flip in 0usize..144,
            d in 1usize..4,
        ) {
            let k = Kernel::new(d).unwrap();
            let before = compute_response(&raster(12, 12, bits.clone()), &k).unwrap();
            let mut more = bits;
            more[flip] = 1;
            let after = compute_response(&raster(12, 12, more), &k).unwrap();
            for (a, b) in after.values().iter().zip(before.values()) {
                prop_assert!(a >= b);
            }
        }

        #[test]
        fn soft_penalty_contracts(
            vals in proptest::collection::vec(0.0f64..10.0, 100),
            cx in 0usize..10,
            cy in 0usize..10,
            d in 1usize..5,
        ) {
            let before = ResponseMap::from_values(10, 10, vals);
            let mut after = before.clone();
            after.penalize_soft(Pixel::new(cx, cy), d).unwrap();
            prop_assert_eq!(after.get(Pixel::new(cx, cy)), 0.0);
            for (a, b) in after.values().iter().zip(before.values()) {
                prop_assert!(a <= b);
            }
        }
    }
}
