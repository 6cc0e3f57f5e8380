//! RGB8 raster buffer plus PNG/JPEG decode and PNG encode.

use std::io::Cursor;

use image::{imageops::FilterType, ImageFormat, RgbImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImageError {
    #[error("image dimensions must be at least 1x1 (got {width}x{height})")]
    EmptyImage { width: u32, height: u32 },
    #[error("pixel buffer has {found} bytes, expected {expected}")]
    BufferLength { expected: usize, found: usize },
    #[error("cannot decode image: {0}")]
    Undecodable(String),
    #[error("unsupported image format `{0}` (expected png or jpeg)")]
    UnsupportedFormat(String),
    #[error("cannot encode image: {0}")]
    Encode(String),
}

/// Container formats accepted on input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageKind {
    Png,
    Jpeg,
}

impl ImageKind {
    pub fn tag(self) -> &'static str {
        match self {
            ImageKind::Png => "png",
            ImageKind::Jpeg => "jpeg",
        }
    }

    /// Sniffs the format from magic bytes.
    pub fn detect(bytes: &[u8]) -> Option<Self> {
        match image::guess_format(bytes).ok()? {
            ImageFormat::Png => Some(ImageKind::Png),
            ImageFormat::Jpeg => Some(ImageKind::Jpeg),
            _ => None,
        }
    }

    fn format(self) -> ImageFormat {
        match self {
            ImageKind::Png => ImageFormat::Png,
            ImageKind::Jpeg => ImageFormat::Jpeg,
        }
    }
}

/// Row-major RGB8 image. `data.len() == width * height * 3`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RasterImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl std::fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RasterImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl RasterImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyImage { width, height });
        }
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(ImageError::BufferLength {
                expected,
                found: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Solid-colour image. Panics on a zero dimension.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let data = rgb.repeat(width as usize * height as usize);
        Self {
            width,
            height,
            data,
        }
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.data
    }

    /// Pixel at linear index `i = y * width + x`.
    pub fn pixel(&self, i: usize) -> [u8; 3] {
        let o = i * 3;
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    pub fn set_pixel(&mut self, i: usize, rgb: [u8; 3]) {
        let o = i * 3;
        self.data[o..o + 3].copy_from_slice(&rgb);
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }

    /// Decodes PNG or JPEG bytes to RGB8, dropping any alpha channel.
    pub fn decode(bytes: &[u8]) -> Result<Self, ImageError> {
        let kind = ImageKind::detect(bytes)
            .ok_or_else(|| ImageError::Undecodable("not a PNG or JPEG stream".into()))?;
        let img = image::load_from_memory_with_format(bytes, kind.format())
            .map_err(|e| ImageError::Undecodable(e.to_string()))?;
        Self::from_rgb(img.to_rgb8())
    }

    pub fn from_rgb(img: RgbImage) -> Result<Self, ImageError> {
        let (w, h) = img.dimensions();
        Self::new(w, h, img.into_raw())
    }

    pub fn to_rgb(&self) -> RgbImage {
        RgbImage::from_raw(self.width, self.height, self.data.clone())
            .expect("buffer length checked at construction")
    }

    /// Bilinear (triangle filter) resize. Returns a clone when the size
    /// already matches.
    pub fn resize(&self, width: u32, height: u32) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        if width == self.width && height == self.height {
            return self.clone();
        }
        let out = image::imageops::resize(&self.to_rgb(), width, height, FilterType::Triangle);
        Self {
            width,
            height,
            data: out.into_raw(),
        }
    }

    pub fn encode(&self, kind: ImageKind) -> Result<Vec<u8>, ImageError> {
        let mut buf = Cursor::new(Vec::new());
        self.to_rgb()
            .write_to(&mut buf, kind.format())
            .map_err(|e| ImageError::Encode(e.to_string()))?;
        Ok(buf.into_inner())
    }

    pub fn to_png(&self) -> Result<Vec<u8>, ImageError> {
        self.encode(ImageKind::Png)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_buffers() {
        assert_eq!(
            RasterImage::new(2, 2, vec![0; 11]),
            Err(ImageError::BufferLength {
                expected: 12,
                found: 11
            })
        );
        assert!(matches!(
            RasterImage::new(0, 2, vec![]),
            Err(ImageError::EmptyImage { .. })
        ));
    }

    #[test]
    fn png_round_trip_is_lossless() {
        let img = RasterImage::from_fn(7, 5, |x, y| [x as u8 * 30, y as u8 * 40, (x * y) as u8]);
        let bytes = img.to_png().unwrap();
        assert_eq!(ImageKind::detect(&bytes), Some(ImageKind::Png));
        assert_eq!(RasterImage::decode(&bytes).unwrap(), img);
    }

    #[test]
    fn jpeg_decodes_to_same_size() {
        let img = RasterImage::filled(16, 9, [200, 10, 10]);
        let bytes = img.encode(ImageKind::Jpeg).unwrap();
        let back = RasterImage::decode(&bytes).unwrap();
        assert_eq!((back.width(), back.height()), (16, 9));
    }

    #[test]
    fn garbage_is_undecodable() {
        assert!(matches!(
            RasterImage::decode(&[0x42]),
            Err(ImageError::Undecodable(_))
        ));
        let mut png = RasterImage::filled(4, 4, [1, 2, 3]).to_png().unwrap();
        png.truncate(20);
        assert!(matches!(
            RasterImage::decode(&png),
            Err(ImageError::Undecodable(_))
        ));
    }

    #[test]
    fn resize_keeps_solid_colour() {
        let img = RasterImage::filled(10, 30, [12, 34, 56]).resize(224, 224);
        assert_eq!((img.width(), img.height()), (224, 224));
        assert!(img.pixels().all(|p| p == [12, 34, 56]));
    }
}
