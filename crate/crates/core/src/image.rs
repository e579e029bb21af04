//! RGB image buffers with components in `[0, 1]`, plus 8-bit PNG I/O.

use std::path::Path;

use thiserror::Error;

/// Smallest side accepted by the distortion engine.
pub const MIN_SIDE: usize = 8;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image {height}x{width} is smaller than the {min}x{min} minimum")]
    TooSmall { height: usize, width: usize, min: usize },
    #[error("image data has {actual} values, expected {expected}")]
    DataLength { expected: usize, actual: usize },
    #[error("component {value} at index {index} is outside [0, 1]")]
    OutOfRange { index: usize, value: f32 },
    #[error("cannot downsample {height}x{width} by {factor}")]
    Factor { factor: usize, height: usize, width: usize },
    #[error("png {path}: {source}")]
    Png {
        path: String,
        #[source]
        source: image::ImageError,
    },
}

/// Row-major `H x W x 3` image.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuf {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl ImageBuf {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self, ImageError> {
        if height < MIN_SIDE || width < MIN_SIDE {
            return Err(ImageError::TooSmall {
                height,
                width,
                min: MIN_SIDE,
            });
        }
        if data.len() != height * width * 3 {
            return Err(ImageError::DataLength {
                expected: height * width * 3,
                actual: data.len(),
            });
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(ImageError::OutOfRange { index, value });
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, rgb: [f32; 3]) -> Self {
        let data = (0..height * width).flat_map(|_| rgb).collect();
        Self::new(height, width, data).expect("valid fill")
    }

    /// Build from unclamped values; every component is clamped into `[0, 1]`
    /// and NaN maps to 0.
    pub fn from_unclamped(height: usize, width: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), height * width * 3);
        let data = data.into_iter().map(clamp01).collect();
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn pixel(&self, y: usize, x: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, y: usize, x: usize, rgb: [f32; 3]) {
        let i = (y * self.width + x) * 3;
        for (c, v) in rgb.into_iter().enumerate() {
            self.data[i + c] = clamp01(v);
        }
    }

    /// One channel as a row-major plane.
    pub fn channel(&self, c: usize) -> Vec<f32> {
        self.data.iter().skip(c).step_by(3).copied().collect()
    }

    pub fn from_planes(height: usize, width: usize, planes: [&[f32]; 3]) -> Self {
        let mut data = Vec::with_capacity(height * width * 3);
        for i in 0..height * width {
            data.extend(planes.iter().map(|p| p[i]));
        }
        Self::from_unclamped(height, width, data)
    }

    /// Rec. 601 luma plane.
    pub fn luma(&self) -> Vec<f64> {
        self.data
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
            .collect()
    }

    /// 8-bit quantization used on write: `round(v * 255)` with ties away from
    /// zero.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| (clamp01(v) * 255.0).round() as u8).collect()
    }

    pub fn from_rgb8(height: usize, width: usize, bytes: &[u8]) -> Result<Self, ImageError> {
        Self::new(height, width, bytes.iter().map(|&b| b as f32 / 255.0).collect())
    }

    pub fn write_png(&self, path: &Path) -> Result<(), ImageError> {
        image::save_buffer_with_format(
            path,
            &self.to_rgb8(),
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::Rgb8,
            image::ImageFormat::Png,
        )
        .map_err(|source| ImageError::Png {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read_png(path: &Path) -> Result<Self, ImageError> {
        let img = image::open(path)
            .map_err(|source| ImageError::Png {
                path: path.display().to_string(),
                source,
            })?
            .to_rgb8();
        Self::from_rgb8(img.height() as usize, img.width() as usize, img.as_raw())
    }

    /// Image as `[1, 3, H, W]` planar values with `offset` added, the network
    /// input layout.
    pub fn to_planar(&self, offset: f32) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.data.len());
        for c in 0..3 {
            out.extend(self.data.iter().skip(c).step_by(3).map(|&v| v + offset));
        }
        out
    }

    /// Box-filter downsample by an integer `factor` that divides both sides.
    pub fn downsample(&self, factor: usize) -> Result<Self, ImageError> {
        if factor == 0 || self.height % factor != 0 || self.width % factor != 0 {
            return Err(ImageError::Factor {
                factor,
                height: self.height,
                width: self.width,
            });
        }
        let (h, w) = (self.height / factor, self.width / factor);
        let norm = 1.0 / (factor * factor) as f32;
        let mut data = vec![0.0f32; h * w * 3];
        for y in 0..self.height {
            for x in 0..self.width {
                let dst = ((y / factor) * w + x / factor) * 3;
                let src = (y * self.width + x) * 3;
                for c in 0..3 {
                    data[dst + c] += self.data[src + c];
                }
            }
        }
        data.iter_mut().for_each(|v| *v = clamp01(*v * norm));
        Self::new(h, w, data)
    }
}

pub fn clamp01(v: f32) -> f32 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}
