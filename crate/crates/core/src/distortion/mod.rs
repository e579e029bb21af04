//! Deterministic synthesis of 25 distortion kinds at five intensity levels.
//!
//! Every kind is a pure function of `(image, DistortionSpec)`. Stochastic
//! kinds draw only from a generator seeded with `spec.seed`.
//!
//! Per-level parameter tables (level 1..=5):
//!
//! | kind | parameter | values |
//! |---|---|---|
//! | gaussian_blur | sigma px | 1, 2, 3, 4, 6 |
//! | lens_blur | disk radius px | 1, 2, 3, 5, 7 |
//! | motion_blur | line length px | 3, 5, 7, 9, 11 |
//! | color_diffusion | Lab chroma blur sigma px | 1, 2, 4, 6, 8 |
//! | color_shift | channel offset px | 1, 2, 4, 6, 8 |
//! | color_quantization | levels per channel | 32, 16, 8, 5, 3 |
//! | hsv_saturation | saturation scale | 0.75, 0.55, 0.35, 0.2, 0.05 |
//! | lab_saturation | chroma scale | 1.5, 2, 2.5, 3, 4 |
//! | jpeg2000_compression | detail step | 0.02, 0.05, 0.1, 0.2, 0.4 |
//! | jpeg_compression | table scale | 0.5, 1, 2, 4, 8 |
//! | white_noise | sigma | 0.02, 0.05, 0.09, 0.14, 0.20 |
//! | color_noise | chroma sigma | 0.02, 0.04, 0.07, 0.10, 0.15 |
//! | impulse_noise | probability | 0.01, 0.03, 0.06, 0.10, 0.18 |
//! | multiplicative_noise | sigma | 0.05, 0.10, 0.20, 0.30, 0.45 |
//! | gaussian_denoise | noise sigma (then sigma-1 filter) | 0.03, 0.06, 0.10, 0.15, 0.20 |
//! | brighten | gamma | 0.9, 0.8, 0.7, 0.55, 0.4 |
//! | darken | gamma | 1/0.9, 1/0.8, 1/0.7, 1/0.55, 1/0.4 |
//! | mean_shift | offset | 0.05, 0.10, 0.15, 0.20, 0.25 |
//! | jitter | max displacement px | 1, 2, 3, 4, 5 |
//! | non_eccentricity_patch | max patch shift px (8 px patches) | 2, 4, 6, 8, 10 |
//! | pixelate | block px | 2, 3, 4, 8, 16 |
//! | quantization | regions per channel | 10, 7, 5, 3, 2 |
//! | color_block | rectangles | 1, 2, 3, 4, 5 |
//! | high_sharpen | unsharp amount | 1, 2, 3, 5, 8 |
//! | contrast_change | scale about 0.5 | 0.9, 0.75, 0.6, 0.45, 0.3 |

mod codecs;
pub mod color;
pub mod filters;

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::ImageBuf;
use crate::rng::{frame_seed, rng, Rng};
use filters::Plane;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistortionError {
    #[error("unknown distortion kind `{0}`")]
    UnknownKind(String),
    #[error("level {0} is outside 1..=5")]
    Level(u8),
    #[error("{kind} level {level} needs at least {min}x{min} pixels, image is {height}x{width}")]
    TooSmall {
        kind: DistortionKind,
        level: u8,
        min: usize,
        height: usize,
        width: usize,
    },
    #[error("empty batch")]
    EmptyBatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "D.1")]
    Blur,
    #[serde(rename = "D.2")]
    Color,
    #[serde(rename = "D.3")]
    Compression,
    #[serde(rename = "D.4")]
    Noise,
    #[serde(rename = "D.5")]
    Brightness,
    #[serde(rename = "D.6")]
    Spatial,
    #[serde(rename = "D.7")]
    SharpnessContrast,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::Blur,
        Category::Color,
        Category::Compression,
        Category::Noise,
        Category::Brightness,
        Category::Spatial,
        Category::SharpnessContrast,
    ];

    /// Short code, `D.1` .. `D.7`.
    pub fn code(self) -> &'static str {
        match self {
            Category::Blur => "D.1",
            Category::Color => "D.2",
            Category::Compression => "D.3",
            Category::Noise => "D.4",
            Category::Brightness => "D.5",
            Category::Spatial => "D.6",
            Category::SharpnessContrast => "D.7",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Category::Blur => "Blurs",
            Category::Color => "Color distortions",
            Category::Compression => "Compression",
            Category::Noise => "Noise",
            Category::Brightness => "Brightness change",
            Category::Spatial => "Spatial distortions",
            Category::SharpnessContrast => "Sharpness and contrast",
        }
    }
}

macro_rules! kinds {
    ($( $variant:ident => $name:literal, $title:literal, $cat:ident; )*) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum DistortionKind {
            $( #[serde(rename = $name)] $variant, )*
        }

        impl DistortionKind {
            /// Catalog order.
            pub const ALL: [DistortionKind; 25] = [$( DistortionKind::$variant, )*];

            pub fn name(self) -> &'static str {
                match self { $( DistortionKind::$variant => $name, )* }
            }

            /// Display title as used in report tables.
            pub fn title(self) -> &'static str {
                match self { $( DistortionKind::$variant => $title, )* }
            }

            pub fn category(self) -> Category {
                match self { $( DistortionKind::$variant => Category::$cat, )* }
            }
        }
    };
}

kinds! {
    GaussianBlur => "gaussian_blur", "Gaussian blur", Blur;
    LensBlur => "lens_blur", "Lens blur", Blur;
    MotionBlur => "motion_blur", "Motion blur", Blur;
    ColorDiffusion => "color_diffusion", "Color diffusion", Color;
    ColorShift => "color_shift", "Color shift", Color;
    ColorQuantization => "color_quantization", "Color quantization", Color;
    HsvSaturation => "hsv_saturation", "HSV saturation", Color;
    LabSaturation => "lab_saturation", "Lab saturation", Color;
    Jpeg2000 => "jpeg2000_compression", "JPEG2000 compression", Compression;
    Jpeg => "jpeg_compression", "JPEG compression", Compression;
    WhiteNoise => "white_noise", "White noise", Noise;
    ColorNoise => "color_noise", "Color noise", Noise;
    ImpulseNoise => "impulse_noise", "Impulse noise", Noise;
    MultiplicativeNoise => "multiplicative_noise", "Multiplicative noise", Noise;
    GaussianDenoise => "gaussian_denoise", "Gaussian Denoise", Noise;
    Brighten => "brighten", "Brighten", Brightness;
    Darken => "darken", "Darken", Brightness;
    MeanShift => "mean_shift", "Mean shift", Brightness;
    Jitter => "jitter", "Jitter", Spatial;
    NonEccentricityPatch => "non_eccentricity_patch", "Non-eccentricity patch", Spatial;
    Pixelate => "pixelate", "Pixelate", Spatial;
    Quantization => "quantization", "Quantization", Spatial;
    ColorBlock => "color_block", "Color block", Spatial;
    HighSharpen => "high_sharpen", "High sharpen", SharpnessContrast;
    ContrastChange => "contrast_change", "Contrast change", SharpnessContrast;
}

impl DistortionKind {
    /// Kinds whose mean PSNR against the reference falls as level rises.
    pub const MONOTONE: [DistortionKind; 11] = [
        DistortionKind::GaussianBlur,
        DistortionKind::LensBlur,
        DistortionKind::WhiteNoise,
        DistortionKind::ColorNoise,
        DistortionKind::ImpulseNoise,
        DistortionKind::MultiplicativeNoise,
        DistortionKind::Jpeg,
        DistortionKind::Jpeg2000,
        DistortionKind::Pixelate,
        DistortionKind::ColorQuantization,
        DistortionKind::Darken,
    ];

    pub fn is_stochastic(self) -> bool {
        use DistortionKind::*;
        matches!(
            self,
            MotionBlur
                | ColorShift
                | WhiteNoise
                | ColorNoise
                | ImpulseNoise
                | MultiplicativeNoise
                | GaussianDenoise
                | Jitter
                | NonEccentricityPatch
                | ColorBlock
        )
    }

    /// Smallest image side the kind supports at `level`.
    pub fn min_side(self, level: u8) -> usize {
        match level_params(self, level) {
            Ok(LevelParams::PatchShift { patch, max_shift, .. }) => patch + 2 * max_shift,
            Ok(LevelParams::BlockSize(b)) => b,
            _ => crate::image::MIN_SIDE,
        }
    }
}

impl fmt::Display for DistortionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistortionKind {
    type Err = DistortionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        DistortionKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| DistortionError::UnknownKind(s.to_string()))
    }
}

/// Kind-specific severity parameters for one `(kind, level)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "param", content = "value", rename_all = "snake_case")]
pub enum LevelParams {
    BlurSigma(f64),
    DiskRadius(f64),
    LineLength(usize),
    ChromaSigma(f64),
    ChannelOffset(isize),
    LevelsPerChannel(usize),
    SaturationScale(f64),
    WaveletStep(f64),
    JpegTableScale(f64),
    NoiseSigma(f64),
    ImpulseProbability(f64),
    DenoiseSigma { noise: f64, filter: f64 },
    Gamma(f64),
    Offset(f64),
    Displacement(isize),
    PatchShift { patch: usize, max_shift: usize, count: usize },
    BlockSize(usize),
    Regions(usize),
    Rectangles { count: usize, side: usize },
    SharpenAmount(f64),
    ContrastScale(f64),
}

const BRIGHTEN_GAMMA: [f64; 5] = [0.9, 0.8, 0.7, 0.55, 0.4];

/// Frozen parameter table lookup.
pub fn level_params(kind: DistortionKind, level: u8) -> Result<LevelParams, DistortionError> {
    if !(1..=5).contains(&level) {
        return Err(DistortionError::Level(level));
    }
    let i = (level - 1) as usize;
    use DistortionKind::*;
    use LevelParams as P;
    Ok(match kind {
        GaussianBlur => P::BlurSigma([1.0, 2.0, 3.0, 4.0, 6.0][i]),
        LensBlur => P::DiskRadius([1.0, 2.0, 3.0, 5.0, 7.0][i]),
        MotionBlur => P::LineLength([3, 5, 7, 9, 11][i]),
        ColorDiffusion => P::ChromaSigma([1.0, 2.0, 4.0, 6.0, 8.0][i]),
        ColorShift => P::ChannelOffset([1, 2, 4, 6, 8][i]),
        ColorQuantization => P::LevelsPerChannel([32, 16, 8, 5, 3][i]),
        HsvSaturation => P::SaturationScale([0.75, 0.55, 0.35, 0.2, 0.05][i]),
        LabSaturation => P::SaturationScale([1.5, 2.0, 2.5, 3.0, 4.0][i]),
        Jpeg2000 => P::WaveletStep([0.02, 0.05, 0.1, 0.2, 0.4][i]),
        Jpeg => P::JpegTableScale([0.5, 1.0, 2.0, 4.0, 8.0][i]),
        WhiteNoise => P::NoiseSigma([0.02, 0.05, 0.09, 0.14, 0.20][i]),
        ColorNoise => P::NoiseSigma([0.02, 0.04, 0.07, 0.10, 0.15][i]),
        ImpulseNoise => P::ImpulseProbability([0.01, 0.03, 0.06, 0.10, 0.18][i]),
        MultiplicativeNoise => P::NoiseSigma([0.05, 0.10, 0.20, 0.30, 0.45][i]),
        GaussianDenoise => P::DenoiseSigma {
            noise: [0.03, 0.06, 0.10, 0.15, 0.20][i],
            filter: 1.0,
        },
        Brighten => P::Gamma(BRIGHTEN_GAMMA[i]),
        Darken => P::Gamma(1.0 / BRIGHTEN_GAMMA[i]),
        MeanShift => P::Offset([0.05, 0.10, 0.15, 0.20, 0.25][i]),
        Jitter => P::Displacement([1, 2, 3, 4, 5][i]),
        NonEccentricityPatch => P::PatchShift {
            patch: 8,
            max_shift: 2 * level as usize,
            count: 20,
        },
        Pixelate => P::BlockSize([2, 3, 4, 8, 16][i]),
        Quantization => P::Regions([10, 7, 5, 3, 2][i]),
        ColorBlock => P::Rectangles {
            count: level as usize,
            side: 16,
        },
        HighSharpen => P::SharpenAmount([1.0, 2.0, 3.0, 5.0, 8.0][i]),
        ContrastChange => P::ContrastScale([0.9, 0.75, 0.6, 0.45, 0.3][i]),
    })
}

/// One catalog row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub kind: DistortionKind,
    pub category: Category,
    pub levels: [LevelParams; 5],
}

/// All 25 kinds in stable order with their level tables.
pub fn list_kinds() -> Vec<CatalogEntry> {
    DistortionKind::ALL
        .into_iter()
        .map(|kind| CatalogEntry {
            kind,
            category: kind.category(),
            levels: [1, 2, 3, 4, 5].map(|l| level_params(kind, l).expect("valid level")),
        })
        .collect()
}

/// Fully determines one distortion application.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DistortionSpec {
    pub kind: DistortionKind,
    pub level: u8,
    pub seed: u64,
}

impl DistortionSpec {
    pub fn new(kind: DistortionKind, level: u8, seed: u64) -> Result<Self, DistortionError> {
        level_params(kind, level)?;
        Ok(Self { kind, level, seed })
    }

    pub fn category(&self) -> Category {
        self.kind.category()
    }

    pub fn params(&self) -> Result<LevelParams, DistortionError> {
        level_params(self.kind, self.level)
    }
}

fn planes(img: &ImageBuf) -> [Plane; 3] {
    [0, 1, 2].map(|c| Plane::new(img.height(), img.width(), img.channel(c)))
}

fn from_planes(p: &[Plane; 3]) -> ImageBuf {
    ImageBuf::from_planes(p[0].height, p[0].width, [&p[0].data, &p[1].data, &p[2].data])
}

fn map_pixels(img: &ImageBuf, f: impl Fn([f32; 3]) -> [f32; 3]) -> ImageBuf {
    let data = img
        .data()
        .chunks_exact(3)
        .flat_map(|p| f([p[0], p[1], p[2]]))
        .collect();
    ImageBuf::from_unclamped(img.height(), img.width(), data)
}

fn map_values(img: &ImageBuf, f: impl Fn(f32) -> f32) -> ImageBuf {
    ImageBuf::from_unclamped(img.height(), img.width(), img.data().iter().map(|&v| f(v)).collect())
}

fn gauss(rng: &mut Rng) -> f32 {
    let z: f64 = StandardNormal.sample(rng);
    z as f32
}

/// Apply `spec` to `img`. Output has the same shape with every component in
/// `[0, 1]`; identical inputs give bit-identical outputs.
pub fn apply_distortion(img: &ImageBuf, spec: &DistortionSpec) -> Result<ImageBuf, DistortionError> {
    let params = spec.params()?;
    let min = spec.kind.min_side(spec.level);
    if img.height() < min || img.width() < min {
        return Err(DistortionError::TooSmall {
            kind: spec.kind,
            level: spec.level,
            min,
            height: img.height(),
            width: img.width(),
        });
    }
    let mut rng = rng(spec.seed);
    let (h, w) = (img.height(), img.width());
    use DistortionKind as K;
    use LevelParams as P;
    let out = match (spec.kind, params) {
        (K::GaussianBlur, P::BlurSigma(s)) => from_planes(&planes(img).map(|p| filters::gaussian_blur(&p, s))),
        (K::LensBlur, P::DiskRadius(r)) => {
            let k = filters::disk_kernel(r);
            from_planes(&planes(img).map(|p| filters::convolve(&p, &k)))
        }
        (K::MotionBlur, P::LineLength(len)) => {
            let angle = rng.gen_range(0.0..std::f64::consts::PI);
            let k = filters::line_kernel(len, angle);
            from_planes(&planes(img).map(|p| filters::convolve(&p, &k)))
        }
        (K::ColorDiffusion, P::ChromaSigma(s)) => {
            let lab: Vec<[f64; 3]> = img.data().chunks_exact(3).map(|p| color::rgb_to_lab([p[0], p[1], p[2]])).collect();
            let chroma = |c: usize| Plane::new(h, w, lab.iter().map(|v| v[c] as f32).collect());
            let (a, b) = (filters::gaussian_blur(&chroma(1), s), filters::gaussian_blur(&chroma(2), s));
            let data = lab
                .iter()
                .enumerate()
                .flat_map(|(i, v)| color::lab_to_rgb([v[0], a.data[i] as f64, b.data[i] as f64]))
                .collect();
            ImageBuf::from_unclamped(h, w, data)
        }
        (K::ColorShift, P::ChannelOffset(d)) => {
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let dy = (d as f64 * angle.sin()).round() as isize;
            let dx = (d as f64 * angle.cos()).round() as isize;
            let [r, g, b] = planes(img);
            from_planes(&[r, filters::shift(&g, dy, dx), filters::shift(&b, -dy, -dx)])
        }
        (K::ColorQuantization, P::LevelsPerChannel(n)) => {
            let steps = (n - 1) as f32;
            map_values(img, |v| (v * steps).round() / steps)
        }
        (K::HsvSaturation, P::SaturationScale(s)) => map_pixels(img, |p| {
            let [hh, ss, vv] = color::rgb_to_hsv(p);
            color::hsv_to_rgb([hh, ss * s as f32, vv])
        }),
        (K::LabSaturation, P::SaturationScale(s)) => map_pixels(img, |p| {
            let [l, a, b] = color::rgb_to_lab(p);
            color::lab_to_rgb([l, a * s, b * s])
        }),
        (K::Jpeg2000, P::WaveletStep(step)) => {
            let ycc = to_ycbcr_planes(img);
            from_ycbcr_planes(&ycc.map(|p| codecs::wavelet_plane(&p, step)))
        }
        (K::Jpeg, P::JpegTableScale(s)) => {
            let ycc = to_ycbcr_planes(img);
            from_ycbcr_planes(&ycc.map(|p| codecs::jpeg_plane(&p, s)))
        }
        (K::WhiteNoise, P::NoiseSigma(s)) => {
            let s = s as f32;
            ImageBuf::from_unclamped(h, w, img.data().iter().map(|&v| v + s * gauss(&mut rng)).collect())
        }
        (K::ColorNoise, P::NoiseSigma(s)) => {
            let s = s as f32;
            let data = img
                .data()
                .chunks_exact(3)
                .flat_map(|p| {
                    let [y, cb, cr] = color::rgb_to_ycbcr([p[0], p[1], p[2]]);
                    color::ycbcr_to_rgb([y, cb + s * gauss(&mut rng), cr + s * gauss(&mut rng)])
                })
                .collect();
            ImageBuf::from_unclamped(h, w, data)
        }
        (K::ImpulseNoise, P::ImpulseProbability(prob)) => {
            let mut data = img.data().to_vec();
            for px in data.chunks_exact_mut(3) {
                if rng.gen_bool(prob) {
                    let v = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
                    px.fill(v);
                }
            }
            ImageBuf::from_unclamped(h, w, data)
        }
        (K::MultiplicativeNoise, P::NoiseSigma(s)) => {
            let s = s as f32;
            ImageBuf::from_unclamped(h, w, img.data().iter().map(|&v| v + v * s * gauss(&mut rng)).collect())
        }
        (K::GaussianDenoise, P::DenoiseSigma { noise, filter }) => {
            let s = noise as f32;
            let noisy = ImageBuf::from_unclamped(h, w, img.data().iter().map(|&v| v + s * gauss(&mut rng)).collect());
            from_planes(&planes(&noisy).map(|p| filters::gaussian_blur(&p, filter)))
        }
        (K::Brighten | K::Darken, P::Gamma(g)) => {
            let g = g as f32;
            map_values(img, |v| v.powf(g))
        }
        (K::MeanShift, P::Offset(o)) => {
            let o = o as f32;
            map_values(img, |v| v + o)
        }
        (K::Jitter, P::Displacement(d)) => {
            let src = planes(img);
            let mut out = src.clone();
            for y in 0..h {
                for x in 0..w {
                    let dy = rng.gen_range(-d..=d);
                    let dx = rng.gen_range(-d..=d);
                    for c in 0..3 {
                        out[c].data[y * w + x] = src[c].at_clamped(y as isize + dy, x as isize + dx);
                    }
                }
            }
            from_planes(&out)
        }
        (K::NonEccentricityPatch, P::PatchShift { patch, max_shift, count }) => {
            let mut out = img.clone();
            let m = max_shift as isize;
            for _ in 0..count {
                let sy = rng.gen_range(m as usize..=h - patch - max_shift);
                let sx = rng.gen_range(m as usize..=w - patch - max_shift);
                let dy = rng.gen_range(-m..=m);
                let dx = rng.gen_range(-m..=m);
                for y in 0..patch {
                    for x in 0..patch {
                        let px = img.pixel(sy + y, sx + x);
                        out.set_pixel((sy as isize + dy) as usize + y, (sx as isize + dx) as usize + x, px);
                    }
                }
            }
            out
        }
        (K::Pixelate, P::BlockSize(b)) => {
            let mut out = img.clone();
            for by in (0..h).step_by(b) {
                for bx in (0..w).step_by(b) {
                    let (ey, ex) = ((by + b).min(h), (bx + b).min(w));
                    let n = ((ey - by) * (ex - bx)) as f32;
                    let mut mean = [0.0f32; 3];
                    for y in by..ey {
                        for x in bx..ex {
                            let p = img.pixel(y, x);
                            for c in 0..3 {
                                mean[c] += p[c];
                            }
                        }
                    }
                    let mean = mean.map(|v| v / n);
                    for y in by..ey {
                        for x in bx..ex {
                            out.set_pixel(y, x, mean);
                        }
                    }
                }
            }
            out
        }
        (K::Quantization, P::Regions(n)) => {
            let quantized = planes(img).map(|p| quantize_regions(&p, n));
            from_planes(&quantized)
        }
        (K::ColorBlock, P::Rectangles { count, side }) => {
            let mut out = img.clone();
            let side = side.min(h).min(w);
            for _ in 0..count {
                let y0 = rng.gen_range(0..=h - side);
                let x0 = rng.gen_range(0..=w - side);
                let rgb = [rng.gen::<f32>(), rng.gen::<f32>(), rng.gen::<f32>()];
                for y in y0..y0 + side {
                    for x in x0..x0 + side {
                        out.set_pixel(y, x, rgb);
                    }
                }
            }
            out
        }
        (K::HighSharpen, P::SharpenAmount(a)) => {
            let a = a as f32;
            let sharpened = planes(img).map(|p| {
                let blurred = filters::gaussian_blur(&p, 1.0);
                let data = p.data.iter().zip(&blurred.data).map(|(&v, &b)| v + a * (v - b)).collect();
                Plane::new(h, w, data)
            });
            from_planes(&sharpened)
        }
        (K::ContrastChange, P::ContrastScale(s)) => {
            let s = s as f32;
            map_values(img, |v| 0.5 + (v - 0.5) * s)
        }
        (kind, params) => unreachable!("parameter table mismatch: {kind} -> {params:?}"),
    };
    Ok(out)
}

fn to_ycbcr_planes(img: &ImageBuf) -> [Plane; 3] {
    let (h, w) = (img.height(), img.width());
    let ycc: Vec<[f32; 3]> = img.data().chunks_exact(3).map(|p| color::rgb_to_ycbcr([p[0], p[1], p[2]])).collect();
    [0, 1, 2].map(|c| Plane::new(h, w, ycc.iter().map(|v| v[c]).collect()))
}

fn from_ycbcr_planes(p: &[Plane; 3]) -> ImageBuf {
    let (h, w) = (p[0].height, p[0].width);
    let data = (0..h * w)
        .flat_map(|i| color::ycbcr_to_rgb([p[0].data[i], p[1].data[i], p[2].data[i]]))
        .collect();
    ImageBuf::from_unclamped(h, w, data)
}

/// Split a plane into `n` intensity regions at its quantiles and replace each
/// value by its region mean.
fn quantize_regions(p: &Plane, n: usize) -> Plane {
    let mut sorted = p.data.clone();
    sorted.sort_by(f32::total_cmp);
    let thresholds: Vec<f32> = (1..n).map(|k| sorted[k * sorted.len() / n]).collect();
    let region = |v: f32| thresholds.iter().take_while(|&&t| v >= t).count();
    let mut sums = vec![(0.0f64, 0usize); n];
    for &v in &p.data {
        let r = region(v);
        sums[r].0 += v as f64;
        sums[r].1 += 1;
    }
    let means: Vec<f32> = sums.iter().map(|&(s, c)| if c == 0 { 0.0 } else { (s / c as f64) as f32 }).collect();
    Plane::new(p.height, p.width, p.data.iter().map(|&v| means[region(v)]).collect())
}

/// Apply one spec to every frame of an episode; frame `i` uses seed
/// `spec.seed ^ splitmix64(i)`.
pub fn distort_batch(imgs: &[ImageBuf], spec: &DistortionSpec) -> Result<Vec<ImageBuf>, DistortionError> {
    if imgs.is_empty() {
        return Err(DistortionError::EmptyBatch);
    }
    imgs.iter()
        .enumerate()
        .map(|(i, img)| apply_distortion(img, &frame_spec(spec, i as u64)))
        .collect()
}

/// The spec used for frame `index` of a batch.
pub fn frame_spec(spec: &DistortionSpec, index: u64) -> DistortionSpec {
    DistortionSpec {
        seed: frame_seed(spec.seed, index),
        ..*spec
    }
}

#[cfg(test)]
mod tests;
