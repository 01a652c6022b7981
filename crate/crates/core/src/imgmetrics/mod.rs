//! Blur-residual sharpness of raster images.
//!
//! `sharpness(i) = sum (i - i*G)^2 / sum i^2`, pooled over every pixel and
//! channel, with `G` the normalized Gaussian of standard deviation 1
//! truncated at radius 3 and reflect-101 borders.

mod pnm;

pub use pnm::{decode_pnm, encode_pnm};

use crate::error::{Error, Result};

/// Row-major, channel-interleaved intensities in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image", "width and height must be positive"));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invalid("image", format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::invalid("image", "pixel buffer length does not match dimensions"));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid("image", format!("intensity {bad} outside [0, 1]")));
        }
        Ok(Image { width, height, channels, data })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let data = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        Image::new(width, height, 1, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Multiplies every intensity by `alpha` in [0, 1].
    pub fn scaled(&self, alpha: f64) -> Result<Image> {
        Image::new(self.width, self.height, self.channels, self.data.iter().map(|v| v * alpha).collect())
    }
}

/// Square filter of side `2 * radius + 1`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    pub radius: usize,
    pub weights: Vec<f64>,
}

impl Kernel {
    pub fn identity() -> Self {
        Kernel { radius: 0, weights: vec![1.0] }
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn at(&self, dx: isize, dy: isize) -> f64 {
        let r = self.radius as isize;
        self.weights[((dy + r) as usize) * self.side() + (dx + r) as usize]
    }
}

/// Normalized 2-D Gaussian truncated at `ceil(3 * sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Result<Kernel> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("sigma", "must be positive"));
    }
    let radius = (3.0 * sigma).ceil() as usize;
    let r = radius as isize;
    let mut weights: Vec<f64> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .map(|(dx, dy)| (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(Kernel { radius, weights })
}

/// Reflect-101 index: `-1 -> 1`, `n -> n - 2`. Repeats for offsets past the edge.
pub(crate) fn reflect101(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    (if m < n as isize { m } else { period - m }) as usize
}

/// `(i * k) - i` per sample, accumulated as `sum w * (neighbor - center)`.
///
/// Equal to the correlation minus the input when the weights sum to 1, and
/// exactly zero wherever the support is constant.
fn blur_residual(img: &Image, k: &Kernel) -> Vec<f64> {
    let (w, h, ch) = (img.width, img.height, img.channels);
    let r = k.radius as isize;
    let mut out = vec![0.0; img.data.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let center = img.data[(y * w + x) * ch + c];
                let mut acc = 0.0;
                for dy in -r..=r {
                    let sy = reflect101(y as isize + dy, h);
                    for dx in -r..=r {
                        let sx = reflect101(x as isize + dx, w);
                        acc += k.at(dx, dy) * (img.data[(sy * w + sx) * ch + c] - center);
                    }
                }
                out[(y * w + x) * ch + c] = acc;
            }
        }
    }
    out
}

/// Per-channel 2-D correlation with reflect-101 padding; same output size.
pub fn convolve(img: &Image, k: &Kernel) -> Image {
    let data = img.data.iter().zip(blur_residual(img, k)).map(|(v, r)| (v + r).clamp(0.0, 1.0)).collect();
    Image { width: img.width, height: img.height, channels: img.channels, data }
}

/// Energy of the blur residual relative to the image energy; 0 for a black image.
pub fn sharpness(img: &Image) -> f64 {
    let kernel = gaussian_kernel(1.0).expect("sigma 1 is valid");
    sharpness_with(img, &kernel)
}

pub fn sharpness_with(img: &Image, kernel: &Kernel) -> f64 {
    let denom: f64 = img.data.iter().map(|v| v * v).sum();
    if denom == 0.0 {
        return 0.0;
    }
    let num: f64 = blur_residual(img, kernel).iter().map(|r| r * r).sum();
    num / denom
}
