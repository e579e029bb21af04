//! Planar filtering helpers with edge-replicating borders.

/// A single-channel plane.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Plane {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), height * width);
        Self { height, width, data }
    }

    #[inline]
    pub fn at_clamped(&self, y: isize, x: isize) -> f32 {
        let y = y.clamp(0, self.height as isize - 1) as usize;
        let x = x.clamp(0, self.width as isize - 1) as usize;
        self.data[y * self.width + x]
    }
}

/// Normalised 1-D Gaussian taps with radius `ceil(3 sigma)`.
pub fn gaussian_taps(sigma: f64) -> Vec<f32> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let taps: Vec<f64> = (-radius..=radius).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = taps.iter().sum();
    taps.iter().map(|t| (t / sum) as f32).collect()
}

/// Separable convolution with an odd-length symmetric kernel.
pub fn separable(p: &Plane, taps: &[f32]) -> Plane {
    let r = (taps.len() / 2) as isize;
    let (h, w) = (p.height, p.width);
    let mut tmp = vec![0.0f32; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                acc += t * p.at_clamped(y as isize, x as isize + k as isize - r);
            }
            tmp[y * w + x] = acc;
        }
    }
    let tmp = Plane::new(h, w, tmp);
    let mut out = vec![0.0f32; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                acc += t * tmp.at_clamped(y as isize + k as isize - r, x as isize);
            }
            out[y * w + x] = acc;
        }
    }
    Plane::new(h, w, out)
}

pub fn gaussian_blur(p: &Plane, sigma: f64) -> Plane {
    separable(p, &gaussian_taps(sigma))
}

/// Sparse 2-D kernel: `(dy, dx, weight)` taps.
pub type Kernel2d = Vec<(isize, isize, f32)>;

/// Uniform disk of the given radius.
pub fn disk_kernel(radius: f64) -> Kernel2d {
    let r = radius.ceil() as isize;
    let mut taps = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if ((dy * dy + dx * dx) as f64) <= radius * radius {
                taps.push((dy, dx, 1.0));
            }
        }
    }
    normalise(taps)
}

/// Line of `length` taps through the origin at `angle` radians.
pub fn line_kernel(length: usize, angle: f64) -> Kernel2d {
    let half = (length as f64 - 1.0) / 2.0;
    let mut taps: Kernel2d = Vec::new();
    for i in 0..length {
        let t = i as f64 - half;
        let dy = (t * angle.sin()).round() as isize;
        let dx = (t * angle.cos()).round() as isize;
        match taps.iter_mut().find(|(y, x, _)| *y == dy && *x == dx) {
            Some(tap) => tap.2 += 1.0,
            None => taps.push((dy, dx, 1.0)),
        }
    }
    normalise(taps)
}

fn normalise(mut taps: Kernel2d) -> Kernel2d {
    let sum: f32 = taps.iter().map(|t| t.2).sum();
    for t in &mut taps {
        t.2 /= sum;
    }
    taps
}

pub fn convolve(p: &Plane, kernel: &Kernel2d) -> Plane {
    let (h, w) = (p.height, p.width);
    let mut out = vec![0.0f32; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = kernel
                .iter()
                .map(|&(dy, dx, k)| k * p.at_clamped(y as isize + dy, x as isize + dx))
                .sum();
        }
    }
    Plane::new(h, w, out)
}

/// Copy of `p` with the sampling position shifted by `(dy, dx)`.
pub fn shift(p: &Plane, dy: isize, dx: isize) -> Plane {
    let (h, w) = (p.height, p.width);
    let data = (0..h * w)
        .map(|i| p.at_clamped((i / w) as isize - dy, (i % w) as isize - dx))
        .collect();
    Plane::new(h, w, data)
}

/// Pad to multiples of `block` by edge replication.
pub fn pad_to_multiple(p: &Plane, block: usize) -> Plane {
    let h = p.height.div_ceil(block) * block;
    let w = p.width.div_ceil(block) * block;
    let data = (0..h * w).map(|i| p.at_clamped((i / w) as isize, (i % w) as isize)).collect();
    Plane::new(h, w, data)
}

pub fn crop(p: &Plane, height: usize, width: usize) -> Plane {
    let mut data = Vec::with_capacity(height * width);
    for y in 0..height {
        data.extend_from_slice(&p.data[y * p.width..y * p.width + width]);
    }
    Plane::new(height, width, data)
}
