use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use base64::Engine as _;
use image::{ImageFormat, Rgba, RgbaImage};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

/// An image handed to a model backend.
///
/// The digest identifies the image in replay keys. For files it is taken over
/// the raw file bytes; for images derived in memory (crops, overlays) it is
/// taken over the decoded RGBA pixels so it does not depend on the encoder.
#[derive(Clone)]
pub struct ImagePayload {
    bytes: Arc<[u8]>,
    digest: String,
    uri: Option<PathBuf>,
}

impl std::fmt::Debug for ImagePayload {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImagePayload")
            .field("digest", &self.digest)
            .field("uri", &self.uri)
            .field("len", &self.bytes.len())
            .finish()
    }
}

impl ImagePayload {
    pub fn from_path(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut p = Self::from_bytes(bytes);
        p.uri = Some(path.to_path_buf());
        Ok(p)
    }

    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        let digest = hex::encode(Sha256::digest(&bytes));
        Self { bytes: bytes.into(), digest, uri: None }
    }

    /// Encodes an in-memory image as PNG.
    pub fn from_rgba(img: &RgbaImage) -> Result<Self> {
        let mut hasher = Sha256::new();
        hasher.update(format!("rgba8:{}x{}:", img.width(), img.height()).as_bytes());
        hasher.update(img.as_raw());
        let digest = hex::encode(hasher.finalize());
        let mut buf = Cursor::new(Vec::new());
        img.write_to(&mut buf, ImageFormat::Png).map_err(|e| Error::Image(e.to_string()))?;
        Ok(Self { bytes: buf.into_inner().into(), digest, uri: None })
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn uri(&self) -> Option<&Path> {
        self.uri.as_deref()
    }

    pub fn to_base64(&self) -> String {
        base64::engine::general_purpose::STANDARD.encode(&self.bytes)
    }

    pub fn data_url(&self) -> String {
        format!("data:image/png;base64,{}", self.to_base64())
    }

    pub fn decode(&self) -> Result<RgbaImage> {
        image::load_from_memory(&self.bytes)
            .map(|i| i.to_rgba8())
            .map_err(|e| Error::Image(e.to_string()))
    }

    pub fn dimensions(&self) -> Result<(u32, u32)> {
        let img = self.decode()?;
        Ok(img.dimensions())
    }

    /// Cuts `bbox` out of the image after clamping it to the image bounds.
    /// Fails when less than one whole pixel remains.
    pub fn crop(&self, bbox: &BoundingBox) -> Result<Self> {
        let img = self.decode()?;
        let (w, h) = img.dimensions();
        let clamped = bbox
            .clamp_to(w as f64, h as f64)
            .ok_or_else(|| Error::Crop(format!("box {bbox:?} lies outside the {w}x{h} image")))?;
        let x0 = clamped.x.floor() as u32;
        let y0 = clamped.y.floor() as u32;
        let x1 = (clamped.right().ceil() as u32).min(w);
        let y1 = (clamped.bottom().ceil() as u32).min(h);
        if clamped.w < 1.0 || clamped.h < 1.0 || x1 <= x0 || y1 <= y0 {
            return Err(Error::Crop(format!("box {bbox:?} degenerates below 1x1 after clamping")));
        }
        let sub = image::imageops::crop_imm(&img, x0, y0, x1 - x0, y1 - y0).to_image();
        Self::from_rgba(&sub)
    }

    /// Draws box outlines on a copy of the image.
    pub fn with_boxes(&self, boxes: &[BoundingBox]) -> Result<Self> {
        let mut img = self.decode()?;
        let (w, h) = img.dimensions();
        let color = Rgba([255, 0, 0, 255]);
        for b in boxes {
            let Some(b) = b.clamp_to(w as f64, h as f64) else { continue };
            let x0 = b.x.floor() as u32;
            let y0 = b.y.floor() as u32;
            let x1 = (b.right().ceil() as u32).min(w).saturating_sub(1);
            let y1 = (b.bottom().ceil() as u32).min(h).saturating_sub(1);
            for t in 0..2u32 {
                for x in x0..=x1 {
                    img.put_pixel(x, (y0 + t).min(y1), color);
                    img.put_pixel(x, y1.saturating_sub(t).max(y0), color);
                }
                for y in y0..=y1 {
                    img.put_pixel((x0 + t).min(x1), y, color);
                    img.put_pixel(x1.saturating_sub(t).max(x0), y, color);
                }
            }
        }
        Self::from_rgba(&img)
    }
}
