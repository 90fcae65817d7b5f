//! RGB image buffer and the geometric / photometric augmentation ops.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An RGB8 image with non-zero dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer(image::RgbImage);

impl ImageBuffer {
    pub fn from_rgb(img: image::RgbImage) -> Result<Self> {
        if img.width() == 0 || img.height() == 0 {
            return Err(Error::Image("zero-area image".into()));
        }
        Ok(Self(img))
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        let img = image::RgbImage::from_raw(width, height, data)
            .ok_or_else(|| Error::Image("pixel buffer does not match dimensions".into()))?;
        Self::from_rgb(img)
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> [u8; 3]) -> Result<Self> {
        Self::from_rgb(image::RgbImage::from_fn(width, height, |x, y| image::Rgb(f(x, y))))
    }

    /// Decodes PNG, JPEG or BMP bytes.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory(bytes).map_err(|e| Error::Image(e.to_string()))?;
        Self::from_rgb(img.to_rgb8())
    }

    pub fn open(path: &std::path::Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
        Self::from_rgb(img.to_rgb8())
    }

    pub fn encode_png(&self) -> Vec<u8> {
        let mut out = std::io::Cursor::new(Vec::new());
        self.0
            .write_to(&mut out, image::ImageFormat::Png)
            .expect("png encoding to memory");
        out.into_inner()
    }

    pub fn width(&self) -> u32 {
        self.0.width()
    }

    pub fn height(&self) -> u32 {
        self.0.height()
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        self.0.get_pixel(x, y).0
    }

    pub fn as_raw(&self) -> &[u8] {
        self.0.as_raw()
    }

    pub fn as_rgb(&self) -> &image::RgbImage {
        &self.0
    }

    fn map_pixels(&self, f: impl Fn(u32, u32) -> [u8; 3]) -> Self {
        Self(image::RgbImage::from_fn(self.width(), self.height(), |x, y| {
            image::Rgb(f(x, y))
        }))
    }

    /// Bilinear sample at pixel coordinates, replicating edge pixels.
    fn sample(&self, x: f64, y: f64) -> [u8; 3] {
        let (w, h) = (self.width() as f64, self.height() as f64);
        let x = x.clamp(0.0, w - 1.0);
        let y = y.clamp(0.0, h - 1.0);
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        let (x0, y0) = (x0 as u32, y0 as u32);
        let x1 = (x0 + 1).min(self.width() - 1);
        let y1 = (y0 + 1).min(self.height() - 1);
        let (p00, p10, p01, p11) = (
            self.pixel(x0, y0),
            self.pixel(x1, y0),
            self.pixel(x0, y1),
            self.pixel(x1, y1),
        );
        let mut out = [0u8; 3];
        for c in 0..3 {
            let top = f64::from(p00[c]) * (1.0 - fx) + f64::from(p10[c]) * fx;
            let bottom = f64::from(p01[c]) * (1.0 - fx) + f64::from(p11[c]) * fx;
            out[c] = to_u8(top * (1.0 - fy) + bottom * fy);
        }
        out
    }

    fn center(&self) -> (f64, f64) {
        (
            (self.width() as f64 - 1.0) / 2.0,
            (self.height() as f64 - 1.0) / 2.0,
        )
    }

    pub fn flip_horizontal(&self) -> Self {
        let w = self.width();
        self.map_pixels(|x, y| self.pixel(w - 1 - x, y))
    }

    /// Rotates about the image centre; uncovered corners replicate edges.
    pub fn rotate(&self, degrees: f64) -> Self {
        let (s, c) = degrees.to_radians().sin_cos();
        let (cx, cy) = self.center();
        self.map_pixels(|x, y| {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            self.sample(cx + dx * c + dy * s, cy - dx * s + dy * c)
        })
    }

    pub fn gaussian_blur(&self, sigma: f64) -> Self {
        let radius = (3.0 * sigma).ceil().max(1.0) as i64;
        let mut kernel: Vec<f64> = (-radius..=radius)
            .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
            .collect();
        let total: f64 = kernel.iter().sum();
        kernel.iter_mut().for_each(|k| *k /= total);

        let (w, h) = (self.width() as i64, self.height() as i64);
        let src: Vec<f64> = self.as_raw().iter().map(|&v| f64::from(v)).collect();
        let mut tmp = vec![0.0; src.len()];
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    tmp[((y * w + x) * 3 + c) as usize] = kernel
                        .iter()
                        .enumerate()
                        .map(|(k, wt)| {
                            let sx = (x + k as i64 - radius).clamp(0, w - 1);
                            wt * src[((y * w + sx) * 3 + c) as usize]
                        })
                        .sum();
                }
            }
        }
        let mut out = Vec::with_capacity(src.len());
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    let v: f64 = kernel
                        .iter()
                        .enumerate()
                        .map(|(k, wt)| {
                            let sy = (y + k as i64 - radius).clamp(0, h - 1);
                            wt * tmp[((sy * w + x) * 3 + c) as usize]
                        })
                        .sum();
                    out.push(to_u8(v));
                }
            }
        }
        Self::from_raw(self.width(), self.height(), out).expect("same dimensions")
    }

    /// Contrast-limited adaptive histogram equalisation of the luminance
    /// channel; the per-pixel luminance change is added to every channel.
    pub fn clahe(&self, tiles: u32, clip_limit: f64) -> Self {
        let (w, h) = (self.width(), self.height());
        let luma: Vec<f64> = self.0.pixels().map(|p| luminance(p.0)).collect();
        let quant: Vec<u8> = luma.iter().map(|&y| to_u8(y)).collect();
        let gx = tiles.min(w).max(1);
        let gy = tiles.min(h).max(1);
        let bounds = |i: u32, n: u32, g: u32| (i * n / g, (i + 1) * n / g);

        let mut luts = vec![[0u8; 256]; (gx * gy) as usize];
        for ty in 0..gy {
            for tx in 0..gx {
                let (x0, x1) = bounds(tx, w, gx);
                let (y0, y1) = bounds(ty, h, gy);
                let mut hist = [0u32; 256];
                for y in y0..y1 {
                    for x in x0..x1 {
                        hist[quant[(y * w + x) as usize] as usize] += 1;
                    }
                }
                luts[(ty * gx + tx) as usize] = clipped_equalization_lut(&hist, clip_limit);
            }
        }

        let tile_w = w as f64 / gx as f64;
        let tile_h = h as f64 / gy as f64;
        let coords = |p: u32, size: f64, g: u32| {
            let f = (p as f64 + 0.5) / size - 0.5;
            let lo = f.floor();
            let frac = f - lo;
            let clamp = |i: f64| i.clamp(0.0, g as f64 - 1.0) as u32;
            (clamp(lo), clamp(lo + 1.0), frac)
        };
        self.map_pixels(|x, y| {
            let idx = (y * w + x) as usize;
            let v = quant[idx] as usize;
            let (tx0, tx1, fx) = coords(x, tile_w, gx);
            let (ty0, ty1, fy) = coords(y, tile_h, gy);
            let lut = |tx: u32, ty: u32| f64::from(luts[(ty * gx + tx) as usize][v]);
            let top = lut(tx0, ty0) * (1.0 - fx) + lut(tx1, ty0) * fx;
            let bottom = lut(tx0, ty1) * (1.0 - fx) + lut(tx1, ty1) * fx;
            let new_luma = (top * (1.0 - fy) + bottom * fy).round();
            let delta = new_luma - luma[idx];
            let p = self.pixel(x, y);
            [
                to_u8(f64::from(p[0]) + delta),
                to_u8(f64::from(p[1]) + delta),
                to_u8(f64::from(p[2]) + delta),
            ]
        })
    }

    /// Warps the image by a displacement field interpolated from a
    /// `nodes x nodes` control grid. Offsets are fractions of the width and
    /// height respectively.
    pub fn grid_distort(&self, nodes: usize, offsets: &[(f64, f64)]) -> Self {
        assert_eq!(offsets.len(), nodes * nodes, "one offset per grid node");
        let (w, h) = (self.width() as f64, self.height() as f64);
        let cells = (nodes - 1) as f64;
        self.map_pixels(|x, y| {
            let gx = if w > 1.0 { x as f64 / (w - 1.0) * cells } else { 0.0 };
            let gy = if h > 1.0 { y as f64 / (h - 1.0) * cells } else { 0.0 };
            let (i0, j0) = (gx.floor().min(cells - 1.0), gy.floor().min(cells - 1.0));
            let (fx, fy) = (gx - i0, gy - j0);
            let (i0, j0) = (i0 as usize, j0 as usize);
            let node = |i: usize, j: usize| offsets[j * nodes + i];
            let lerp = |a: (f64, f64), b: (f64, f64), t: f64| {
                (a.0 * (1.0 - t) + b.0 * t, a.1 * (1.0 - t) + b.1 * t)
            };
            let top = lerp(node(i0, j0), node(i0 + 1, j0), fx);
            let bottom = lerp(node(i0, j0 + 1), node(i0 + 1, j0 + 1), fx);
            let (dx, dy) = lerp(top, bottom, fy);
            self.sample(x as f64 + dx * w, y as f64 + dy * h)
        })
    }

    /// Radial (barrel for positive `k`, pincushion for negative) distortion.
    pub fn optical_distort(&self, k: f64) -> Self {
        let (cx, cy) = self.center();
        let (sx, sy) = (cx.max(1.0), cy.max(1.0));
        self.map_pixels(|x, y| {
            let nx = (x as f64 - cx) / sx;
            let ny = (y as f64 - cy) / sy;
            let factor = 1.0 + k * (nx * nx + ny * ny);
            self.sample(cx + (x as f64 - cx) * factor, cy + (y as f64 - cy) * factor)
        })
    }
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn luminance(p: [u8; 3]) -> f64 {
    0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2])
}

/// Clips a 256-bin histogram at `max(1, floor(clip_limit * area / 256))`,
/// spreads the excess over all bins and returns the equalising lookup table.
fn clipped_equalization_lut(hist: &[u32; 256], clip_limit: f64) -> [u8; 256] {
    let area: u32 = hist.iter().sum();
    let mut lut = [0u8; 256];
    if area == 0 {
        return lut;
    }
    let clip = ((clip_limit * area as f64 / 256.0) as u32).max(1);
    let mut clipped = *hist;
    let mut excess = 0u32;
    for bin in clipped.iter_mut() {
        if *bin > clip {
            excess += *bin - clip;
            *bin = clip;
        }
    }
    let per_bin = excess / 256;
    let mut residual = excess - per_bin * 256;
    for bin in clipped.iter_mut() {
        *bin += per_bin;
    }
    if let Some(step) = 256u32.checked_div(residual) {
        let step = step.max(1) as usize;
        let mut i = 0;
        while i < 256 && residual > 0 {
            clipped[i] += 1;
            residual -= 1;
            i += step;
        }
    }
    let scale = 255.0 / area as f64;
    let mut cum = 0u32;
    for (out, bin) in lut.iter_mut().zip(clipped.iter()) {
        cum += bin;
        *out = to_u8(cum as f64 * scale);
    }
    lut
}

pub const CLAHE_TILES: u32 = 8;
pub const CLAHE_CLIP_LIMIT: f64 = 2.0;
pub const GRID_NODES: usize = 5;
pub const GRID_MAX_JITTER: f64 = 0.05;
pub const MAX_ROTATION_DEG: f64 = 15.0;
pub const BLUR_SIGMA_RANGE: (f64, f64) = (0.5, 1.5);
pub const OPTICAL_K_MAX: f64 = 0.05;

/// Per-op application probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImageOpProbs {
    pub flip: f64,
    pub rotate: f64,
    pub blur: f64,
    pub clahe: f64,
    pub grid: f64,
    pub optical: f64,
}

impl Default for ImageOpProbs {
    fn default() -> Self {
        Self {
            flip: 0.5,
            rotate: 0.3,
            blur: 0.3,
            clahe: 0.3,
            grid: 0.3,
            optical: 0.3,
        }
    }
}

impl ImageOpProbs {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("flip", self.flip),
            ("rotate", self.rotate),
            ("blur", self.blur),
            ("clahe", self.clahe),
            ("grid", self.grid),
            ("optical", self.optical),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("probability {name}={p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Concrete parameters of one image augmentation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImagePlan {
    pub flip: bool,
    pub rotate_deg: Option<f64>,
    pub blur_sigma: Option<f64>,
    pub clahe: bool,
    pub grid_offsets: Option<Vec<(f64, f64)>>,
    pub optical_k: Option<f64>,
}

impl ImagePlan {
    pub fn sample(probs: &ImageOpProbs, rng: &mut crate::rng::Rng) -> Self {
        let mut hit = |p: f64| rng.random::<f64>() < p;
        let flip = hit(probs.flip);
        let rotate = hit(probs.rotate);
        let blur = hit(probs.blur);
        let clahe = hit(probs.clahe);
        let grid = hit(probs.grid);
        let optical = hit(probs.optical);
        Self {
            flip,
            rotate_deg: rotate.then(|| rng.random_range(-MAX_ROTATION_DEG..=MAX_ROTATION_DEG)),
            blur_sigma: blur.then(|| rng.random_range(BLUR_SIGMA_RANGE.0..=BLUR_SIGMA_RANGE.1)),
            clahe,
            grid_offsets: grid.then(|| {
                (0..GRID_NODES * GRID_NODES)
                    .map(|_| {
                        (
                            rng.random_range(-GRID_MAX_JITTER..=GRID_MAX_JITTER),
                            rng.random_range(-GRID_MAX_JITTER..=GRID_MAX_JITTER),
                        )
                    })
                    .collect()
            }),
            optical_k: optical.then(|| rng.random_range(-OPTICAL_K_MAX..=OPTICAL_K_MAX)),
        }
    }

    pub fn apply(&self, img: &ImageBuffer) -> ImageBuffer {
        let mut out = img.clone();
        if self.flip {
            out = out.flip_horizontal();
        }
        if let Some(deg) = self.rotate_deg {
            out = out.rotate(deg);
        }
        if let Some(sigma) = self.blur_sigma {
            out = out.gaussian_blur(sigma);
        }
        if self.clahe {
            out = out.clahe(CLAHE_TILES, CLAHE_CLIP_LIMIT);
        }
        if let Some(offsets) = &self.grid_offsets {
            out = out.grid_distort(GRID_NODES, offsets);
        }
        if let Some(k) = self.optical_k {
            out = out.optical_distort(k);
        }
        out
    }
}

/// Samples and applies one augmentation.
pub fn augment_image(img: &ImageBuffer, probs: &ImageOpProbs, rng: &mut crate::rng::Rng) -> ImageBuffer {
    ImagePlan::sample(probs, rng).apply(img)
}
