use std::path::Path;

use super::{PatchRequest, Verdict, VerdictLabel, VerdictSource, Verifier, VerifyError};
use crate::raster::{RasterError, RasterMeta, SuitabilityRaster};

/// Binary grid of hazards the segmentation cannot see (1 = hazard present),
/// aligned with the pipeline's suitability raster.
#[derive(Debug, Clone, PartialEq)]
pub struct HazardLayer {
    grid: SuitabilityRaster,
}

impl HazardLayer {
    pub fn new(grid: SuitabilityRaster) -> Self {
        Self { grid }
    }

    pub fn empty(width: usize, height: usize, meta: RasterMeta) -> Self {
        Self::new(SuitabilityRaster::zeros(width, height, meta))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RasterError> {
        SuitabilityRaster::load(path).map(Self::new)
    }

    pub fn grid(&self) -> &SuitabilityRaster {
        &self.grid
    }

    pub fn width(&self) -> usize {
        self.grid.width()
    }

    pub fn height(&self) -> usize {
        self.grid.height()
    }
}

/// Unsafe iff any hazard pixel falls inside the request's bounding box.
pub fn rule_oracle_verify(request: &PatchRequest, hazards: &HazardLayer) -> Result<Verdict, VerifyError> {
    let b = request.bbox_px;
    if b.x1 > hazards.width() || b.y1 > hazards.height() || b.x0 > b.x1 || b.y0 > b.y1 {
        return Err(VerifyError::OutOfBounds {
            candidate: request.candidate_id.clone(),
        });
    }
    let count = hazards.grid.count_in(&b);
    let verdict = if count == 0 {
        Verdict::new(
            VerdictLabel::Safe,
            "0 hazard pixels inside the landing footprint.",
            VerdictSource::RuleOracle,
        )
    } else {
        let noun = if count == 1 { "pixel" } else { "pixels" };
        Verdict::new(
            VerdictLabel::Unsafe,
            format!("{count} hazard {noun} inside the landing footprint."),
            VerdictSource::RuleOracle,
        )
    };
    Ok(verdict)
}

/// Deterministic offline verifier backed by a [`HazardLayer`].
#[derive(Debug, Clone)]
pub struct RuleOracle {
    hazards: HazardLayer,
}

impl RuleOracle {
    pub fn new(hazards: HazardLayer) -> Self {
        Self { hazards }
    }
}

impl Verifier for RuleOracle {
    fn verify(&self, request: &PatchRequest) -> Result<Verdict, VerifyError> {
        rule_oracle_verify(request, &self.hazards)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{Pixel, PixelRect, RasterKind, WorldPoint};

    fn request(bbox: PixelRect) -> PatchRequest {
        PatchRequest {
            candidate_id: "it000@1,1".into(),
            image_png: Vec::new(),
            center_world: WorldPoint::new(0.0, 0.0),
            bbox_px: bbox,
            gsd: 1.0,
        }
    }

    fn layer(hazard_pixels: &[Pixel]) -> HazardLayer {
        let meta = RasterMeta::new(1.0, WorldPoint::new(0.0, 0.0), "local", RasterKind::Suitability).unwrap();
        let mut grid = SuitabilityRaster::zeros(8, 8, meta);
        for &p in hazard_pixels {
            grid.set(p, true);
        }
        HazardLayer::new(grid)
    }

    #[test]
    fn clear_footprint_is_safe() {
        let v = rule_oracle_verify(&request(PixelRect { x0: 0, y0: 0, x1: 3, y1: 3 }), &layer(&[Pixel::new(5, 5)])).unwrap();
        assert_eq!(v.label, VerdictLabel::Safe);
        assert_eq!(v.source, VerdictSource::RuleOracle);
    }

    #[test]
    fn hazard_count_is_reported() {
        let hz = layer(&[Pixel::new(0, 0), Pixel::new(1, 2), Pixel::new(2, 2), Pixel::new(7, 7)]);
        let req = request(PixelRect { x0: 0, y0: 0, x1: 3, y1: 3 });
        let v = rule_oracle_verify(&req, &hz).unwrap();
        assert_eq!(v.label, VerdictLabel::Unsafe);
        assert!(v.reason.contains('3'), "{}", v.reason);
        assert_eq!(rule_oracle_verify(&req, &hz).unwrap(), v);
    }

    #[test]
    fn bbox_outside_layer() {
        let err = rule_oracle_verify(&request(PixelRect { x0: 6, y0: 6, x1: 9, y1: 9 }), &layer(&[])).unwrap_err();
        assert!(matches!(err, VerifyError::OutOfBounds { .. }));
    }
}
