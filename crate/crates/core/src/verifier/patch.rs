use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat};

use super::VerifyError;
use crate::proposal::Candidate;
use crate::raster::{PixelRect, SuitabilityRaster, WorldPoint};

/// Image crop of one candidate footprint, ready to send to a verifier.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchRequest {
    pub candidate_id: String,
    /// PNG-encoded crop; its dimensions equal `bbox_px`.
    pub image_png: Vec<u8>,
    pub center_world: WorldPoint,
    pub bbox_px: PixelRect,
    pub gsd: f64,
}

/// Imagery aligned with the suitability grid from which patches are cropped.
#[derive(Debug, Clone)]
pub struct PatchSource {
    image: DynamicImage,
}

impl PatchSource {
    /// Renders the suitability raster itself (255 = suitable) as the imagery.
    pub fn from_suitability(raster: &SuitabilityRaster) -> Self {
        let pixels = raster.data().iter().map(|&v| v * 255).collect();
        let gray = GrayImage::from_raw(raster.width() as u32, raster.height() as u32, pixels)
            .expect("buffer length matches dimensions");
        Self {
            image: DynamicImage::ImageLuma8(gray),
        }
    }

    pub fn from_image(image: DynamicImage, raster: &SuitabilityRaster) -> Result<Self, VerifyError> {
        if image.width() as usize != raster.width() || image.height() as usize != raster.height() {
            return Err(VerifyError::Patch(format!(
                "imagery is {}x{}, suitability grid is {}x{}",
                image.width(),
                image.height(),
                raster.width(),
                raster.height()
            )));
        }
        Ok(Self { image })
    }

    pub fn open(path: impl AsRef<Path>, raster: &SuitabilityRaster) -> Result<Self, VerifyError> {
        let path = path.as_ref();
        let image = image::open(path).map_err(|e| VerifyError::Patch(format!("{}: {e}", path.display())))?;
        Self::from_image(image, raster)
    }

    pub fn request(&self, candidate: &Candidate, raster: &SuitabilityRaster) -> Result<PatchRequest, VerifyError> {
        let b = candidate.bbox;
        let crop = self
            .image
            .crop_imm(b.x0 as u32, b.y0 as u32, b.width() as u32, b.height() as u32);
        let mut png = Vec::new();
        crop.write_to(&mut Cursor::new(&mut png), ImageFormat::Png)
            .map_err(|e| VerifyError::Patch(e.to_string()))?;
        let meta = raster.meta();
        Ok(PatchRequest {
            candidate_id: candidate.id(),
            image_png: png,
            center_world: WorldPoint::new(
                meta.origin.x + (candidate.center.x as f64 + 0.5) * meta.gsd,
                meta.origin.y + (candidate.center.y as f64 + 0.5) * meta.gsd,
            ),
            bbox_px: b,
            gsd: meta.gsd,
        })
    }
}
