use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::Rng as _;

use super::*;

/// Independent PSNR on 8-bit-equivalent `[0, 1]` data.
fn psnr(a: &ImageBuf, b: &ImageBuf) -> f64 {
    let mse: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
        .sum::<f64>()
        / a.data().len() as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

/// Procedural photo-like image: smooth gradient, a few discs, stripes and
/// fine texture.
fn corpus_image(seed: u64, side: usize) -> ImageBuf {
    let mut r = rng(seed);
    let base: [f32; 3] = [r.gen_range(0.2..0.8), r.gen_range(0.2..0.8), r.gen_range(0.2..0.8)];
    let grad: [f32; 3] = [r.gen_range(-0.3..0.3), r.gen_range(-0.3..0.3), r.gen_range(-0.3..0.3)];
    let discs: Vec<(f32, f32, f32, [f32; 3])> = (0..4)
        .map(|_| {
            (
                r.gen_range(0.0..side as f32),
                r.gen_range(0.0..side as f32),
                r.gen_range(4.0..side as f32 / 4.0),
                [r.gen(), r.gen(), r.gen()],
            )
        })
        .collect();
    let freq = r.gen_range(0.2..0.6f32);
    let mut data = Vec::with_capacity(side * side * 3);
    for y in 0..side {
        for x in 0..side {
            let t = (x + y) as f32 / (2 * side) as f32;
            let mut px = [0.0f32; 3];
            for c in 0..3 {
                px[c] = base[c] + grad[c] * t + 0.08 * ((x as f32 * freq).sin() * (y as f32 * freq * 0.7).cos());
            }
            for &(cy, cx, rad, col) in &discs {
                if (y as f32 - cy).powi(2) + (x as f32 - cx).powi(2) < rad * rad {
                    px = col;
                }
            }
            data.extend(px.map(|v| v + r.gen_range(-0.03..0.03f32)));
        }
    }
    ImageBuf::from_unclamped(side, side, data)
}

fn corpus() -> Vec<ImageBuf> {
    (0..10).map(|i| corpus_image(1000 + i, 128)).collect()
}

#[test]
fn catalog_has_25_kinds_in_7_categories() {
    let cat = list_kinds();
    assert_eq!(cat.len(), 25);
    let mut by_cat: BTreeMap<Category, Vec<&str>> = BTreeMap::new();
    for e in &cat {
        assert_eq!(e.category, e.kind.category());
        by_cat.entry(e.category).or_default().push(e.kind.title());
    }
    assert_eq!(by_cat.len(), 7);
    let sizes: Vec<usize> = Category::ALL.iter().map(|c| by_cat[c].len()).collect();
    assert_eq!(sizes, vec![3, 5, 2, 5, 3, 5, 2]);
    assert_eq!(
        by_cat[&Category::Noise],
        vec!["White noise", "Color noise", "Impulse noise", "Multiplicative noise", "Gaussian Denoise"]
    );
    assert_eq!(by_cat[&Category::Compression], vec!["JPEG2000 compression", "JPEG compression"]);
    assert_eq!(list_kinds(), cat);
}

#[test]
fn names_round_trip() {
    for k in DistortionKind::ALL {
        assert_eq!(k.name().parse::<DistortionKind>().unwrap(), k);
        let json = serde_json::to_string(&k).unwrap();
        assert_eq!(json, format!("\"{}\"", k.name()));
    }
    assert_eq!("Gaussian Blur".parse::<DistortionKind>().unwrap(), DistortionKind::GaussianBlur);
    assert!("fisheye".parse::<DistortionKind>().is_err());
    assert_eq!(serde_json::to_string(&Category::Noise).unwrap(), "\"D.4\"");
}

#[test]
fn level_table_examples() {
    assert_eq!(level_params(DistortionKind::WhiteNoise, 1).unwrap(), LevelParams::NoiseSigma(0.02));
    assert_eq!(level_params(DistortionKind::Pixelate, 5).unwrap(), LevelParams::BlockSize(16));
    for k in DistortionKind::ALL {
        assert_eq!(level_params(k, 3).unwrap(), level_params(k, 3).unwrap());
        assert_eq!(level_params(k, 0), Err(DistortionError::Level(0)));
        assert_eq!(level_params(k, 6), Err(DistortionError::Level(6)));
    }
}

/// Scalar severity of a level record, oriented so that larger is harsher.
fn severity(p: LevelParams) -> f64 {
    use LevelParams as P;
    match p {
        P::BlurSigma(v) | P::DiskRadius(v) | P::ChromaSigma(v) | P::WaveletStep(v) | P::JpegTableScale(v) => v,
        P::NoiseSigma(v) | P::ImpulseProbability(v) | P::Offset(v) | P::SharpenAmount(v) => v,
        P::LineLength(v) | P::BlockSize(v) => v as f64,
        P::ChannelOffset(v) | P::Displacement(v) => v as f64,
        P::LevelsPerChannel(v) | P::Regions(v) => -(v as f64),
        P::DenoiseSigma { noise, .. } => noise,
        P::PatchShift { max_shift, .. } => max_shift as f64,
        P::Rectangles { count, .. } => count as f64,
        P::ContrastScale(v) => -v,
        // Distance from the identity in either direction.
        P::SaturationScale(v) | P::Gamma(v) => v.ln().abs(),
    }
}

#[test]
fn severity_parameters_strictly_monotone() {
    for k in DistortionKind::ALL {
        let s: Vec<f64> = (1..=5).map(|l| severity(level_params(k, l).unwrap())).collect();
        assert!(s.windows(2).all(|w| w[1] > w[0]), "{k}: {s:?}");
    }
}

#[test]
fn every_kind_is_deterministic_shape_preserving_and_in_range() {
    let img = corpus_image(5, 40);
    for k in DistortionKind::ALL {
        for level in 1..=5 {
            let spec = DistortionSpec::new(k, level, 99).unwrap();
            let a = apply_distortion(&img, &spec).unwrap();
            let b = apply_distortion(&img, &spec).unwrap();
            assert_eq!((a.height(), a.width()), (40, 40));
            assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()), "{k}");
            assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)), "{k}");
        }
    }
}

#[test]
fn stochastic_kinds_depend_on_seed_and_others_do_not() {
    let img = corpus_image(6, 48);
    for k in DistortionKind::ALL {
        let a = apply_distortion(&img, &DistortionSpec::new(k, 3, 1).unwrap()).unwrap();
        let b = apply_distortion(&img, &DistortionSpec::new(k, 3, 2).unwrap()).unwrap();
        assert_eq!(a != b, k.is_stochastic(), "{k}");
    }
}

#[test]
fn brightness_examples() {
    let white = ImageBuf::filled(16, 16, [1.0; 3]);
    for level in 1..=5 {
        let out = apply_distortion(&white, &DistortionSpec::new(DistortionKind::Darken, level, 0).unwrap()).unwrap();
        assert!(out.data().iter().all(|&v| v == 1.0));
    }
    let grey = ImageBuf::filled(16, 16, [0.9; 3]);
    assert_eq!(level_params(DistortionKind::MeanShift, 4).unwrap(), LevelParams::Offset(0.2));
    let out = apply_distortion(&grey, &DistortionSpec::new(DistortionKind::MeanShift, 4, 0).unwrap()).unwrap();
    assert!(out.data().iter().all(|&v| v == 1.0));
}

#[test]
fn too_small_images_are_rejected() {
    let img = ImageBuf::filled(8, 8, [0.5; 3]);
    let err = apply_distortion(&img, &DistortionSpec::new(DistortionKind::Pixelate, 5, 0).unwrap()).unwrap_err();
    assert!(matches!(err, DistortionError::TooSmall { min: 16, .. }));
    let err = apply_distortion(&img, &DistortionSpec::new(DistortionKind::NonEccentricityPatch, 1, 0).unwrap());
    assert!(err.is_err());
    assert!(apply_distortion(&img, &DistortionSpec::new(DistortionKind::Pixelate, 4, 0).unwrap()).is_ok());
}

#[test]
fn white_noise_level_one_beats_level_five() {
    let img = corpus_image(11, 128);
    let out = |l| apply_distortion(&img, &DistortionSpec::new(DistortionKind::WhiteNoise, l, 3).unwrap()).unwrap();
    assert!(psnr(&img, &out(1)) > psnr(&img, &out(5)));
}

#[test]
fn monotone_families_lose_psnr_with_level() {
    let corpus = corpus();
    for k in DistortionKind::MONOTONE {
        let means: Vec<f64> = (1..=5)
            .map(|level| {
                corpus
                    .iter()
                    .enumerate()
                    .map(|(i, img)| {
                        let spec = DistortionSpec::new(k, level, 7 + i as u64).unwrap();
                        psnr(img, &apply_distortion(img, &spec).unwrap())
                    })
                    .sum::<f64>()
                    / corpus.len() as f64
            })
            .collect();
        assert!(means.windows(2).all(|w| w[1] <= w[0]), "{k}: {means:?}");
    }
}

#[test]
fn batch_seed_rule() {
    let img = corpus_image(3, 32);
    let imgs = vec![img.clone(), img.clone(), img.clone()];
    let blur = DistortionSpec::new(DistortionKind::GaussianBlur, 2, 5).unwrap();
    let out = distort_batch(&imgs, &blur).unwrap();
    assert!(out[0] == out[1] && out[1] == out[2]);

    let noise = DistortionSpec::new(DistortionKind::WhiteNoise, 2, 5).unwrap();
    let out = distort_batch(&imgs, &noise).unwrap();
    assert!(out[0] != out[1] && out[1] != out[2] && out[0] != out[2]);
    assert_eq!(out, distort_batch(&imgs, &noise).unwrap());
    for (i, o) in out.iter().enumerate() {
        let seed = 5 ^ crate::rng::splitmix64(i as u64);
        let spec = DistortionSpec { seed, ..noise };
        assert_eq!(o, &apply_distortion(&img, &spec).unwrap());
    }
    assert_eq!(distort_batch(&[], &noise), Err(DistortionError::EmptyBatch));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn outputs_stay_finite_and_bounded(seed in any::<u64>(), kind in 0usize..25, level in 1u8..=5, side in 28usize..48) {
        let img = corpus_image(seed, side);
        let spec = DistortionSpec::new(DistortionKind::ALL[kind], level, seed).unwrap();
        let out = apply_distortion(&img, &spec).unwrap();
        prop_assert_eq!((out.height(), out.width()), (side, side));
        prop_assert!(out.data().iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
    }
}
