//! Built-in appearance descriptor.
//!
//! Person patches are resized to 128x48 and described by per-block color
//! histograms plus gradient-orientation histograms. The descriptor is
//! deliberately simple; any external descriptor can be used instead through
//! the precomputed-feature path, so this one only has to be deterministic and
//! discriminative enough for end-to-end runs.

use crate::model::{FeatureVector, ModelError};

/// Target patch height after resizing.
pub const PATCH_HEIGHT: usize = 128;
/// Target patch width after resizing.
pub const PATCH_WIDTH: usize = 48;
/// Block grid: 6 rows by 2 columns.
pub const BLOCK_ROWS: usize = 6;
pub const BLOCK_COLS: usize = 2;
/// Color histogram bins per channel.
pub const COLOR_BINS: usize = 8;
/// Gradient orientation bins over [0, 180) degrees of edge orientation.
pub const GRADIENT_BINS: usize = 9;

/// Descriptor length: 12 blocks x (3 x 8 color bins) + 12 blocks x 9 gradient bins.
pub const BUILTIN_DIM: usize =
    BLOCK_ROWS * BLOCK_COLS * (3 * COLOR_BINS) + BLOCK_ROWS * BLOCK_COLS * GRADIENT_BINS;

pub const BUILTIN_DESCRIPTOR_ID: &str = "builtin-colorgrad-v1";

/// RGB image patch with channel values in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePatch {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[f32; 3]>,
}

impl ImagePatch {
    pub fn new(width: usize, height: usize, pixels: Vec<[f32; 3]>) -> Self {
        assert_eq!(pixels.len(), width * height, "pixel buffer size mismatch");
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn filled(width: usize, height: usize, value: [f32; 3]) -> Self {
        Self::new(width, height, vec![value; width * height])
    }

    fn at(&self, x: usize, y: usize) -> [f32; 3] {
        self.pixels[y * self.width + x]
    }
}

/// Extracts descriptors from image patches.
pub trait FeatureExtractor {
    fn descriptor_id(&self) -> &str;
    fn extract(&self, patch: &ImagePatch) -> Result<FeatureVector, ModelError>;
}

/// The built-in color + gradient histogram descriptor.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinDescriptor;

impl FeatureExtractor for BuiltinDescriptor {
    fn descriptor_id(&self) -> &str {
        BUILTIN_DESCRIPTOR_ID
    }

    fn extract(&self, patch: &ImagePatch) -> Result<FeatureVector, ModelError> {
        extract_builtin_descriptor(patch)
    }
}

fn bilinear_resize(patch: &ImagePatch, out_w: usize, out_h: usize) -> ImagePatch {
    let mut pixels = Vec::with_capacity(out_w * out_h);
    let sx = patch.width as f64 / out_w as f64;
    let sy = patch.height as f64 / out_h as f64;
    for oy in 0..out_h {
        let fy = ((oy as f64 + 0.5) * sy - 0.5).clamp(0.0, (patch.height - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(patch.height - 1);
        let wy = fy - y0 as f64;
        for ox in 0..out_w {
            let fx = ((ox as f64 + 0.5) * sx - 0.5).clamp(0.0, (patch.width - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(patch.width - 1);
            let wx = fx - x0 as f64;
            let mut px = [0.0f32; 3];
            for (c, out) in px.iter_mut().enumerate() {
                let top = patch.at(x0, y0)[c] as f64 * (1.0 - wx) + patch.at(x1, y0)[c] as f64 * wx;
                let bot = patch.at(x0, y1)[c] as f64 * (1.0 - wx) + patch.at(x1, y1)[c] as f64 * wx;
                *out = (top * (1.0 - wy) + bot * wy) as f32;
            }
            pixels.push(px);
        }
    }
    ImagePatch::new(out_w, out_h, pixels)
}

fn l2_normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 1e-12 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

fn block_bounds(total: usize, blocks: usize, idx: usize) -> (usize, usize) {
    let lo = idx * total / blocks;
    let hi = (idx + 1) * total / blocks;
    (lo, hi)
}

/// Edge orientation in degrees `[0, 180)` and magnitude of the intensity
/// gradient at `(x, y)`, from central differences with replicated borders.
pub fn gradient_at(gray: &[f64], width: usize, height: usize, x: usize, y: usize) -> (f64, f64) {
    let xm = x.saturating_sub(1);
    let xp = (x + 1).min(width - 1);
    let ym = y.saturating_sub(1);
    let yp = (y + 1).min(height - 1);
    let gx = (gray[y * width + xp] - gray[y * width + xm]) / 2.0;
    let gy = (gray[yp * width + x] - gray[ym * width + x]) / 2.0;
    let mag = (gx * gx + gy * gy).sqrt();
    let mut orient = gy.atan2(gx).to_degrees() + 90.0;
    while orient < 0.0 {
        orient += 180.0;
    }
    while orient >= 180.0 {
        orient -= 180.0;
    }
    (orient, mag)
}

/// Resizes to 128x48 and emits per-block color histograms followed by
/// per-block gradient-orientation histograms, each block L2-normalized.
pub fn extract_builtin_descriptor(patch: &ImagePatch) -> Result<FeatureVector, ModelError> {
    if patch.width == 0 || patch.height == 0 || patch.pixels.is_empty() {
        return Err(ModelError::EmptyPatch);
    }
    let resized = bilinear_resize(patch, PATCH_WIDTH, PATCH_HEIGHT);
    let gray: Vec<f64> = resized
        .pixels
        .iter()
        .map(|p| (p[0] as f64 + p[1] as f64 + p[2] as f64) / 3.0)
        .collect();

    let mut color_part = Vec::with_capacity(BLOCK_ROWS * BLOCK_COLS * 3 * COLOR_BINS);
    let mut grad_part = Vec::with_capacity(BLOCK_ROWS * BLOCK_COLS * GRADIENT_BINS);
    for br in 0..BLOCK_ROWS {
        let (y0, y1) = block_bounds(PATCH_HEIGHT, BLOCK_ROWS, br);
        for bc in 0..BLOCK_COLS {
            let (x0, x1) = block_bounds(PATCH_WIDTH, BLOCK_COLS, bc);
            let mut color = vec![0.0f64; 3 * COLOR_BINS];
            let mut grad = vec![0.0f64; GRADIENT_BINS];
            for y in y0..y1 {
                for x in x0..x1 {
                    let px = resized.at(x, y);
                    for c in 0..3 {
                        let bin = ((px[c] as f64 * COLOR_BINS as f64) as usize)
                            .min(COLOR_BINS - 1);
                        color[c * COLOR_BINS + bin] += 1.0;
                    }
                    let (orient, mag) = gradient_at(&gray, PATCH_WIDTH, PATCH_HEIGHT, x, y);
                    let bin = ((orient / 180.0 * GRADIENT_BINS as f64) as usize)
                        .min(GRADIENT_BINS - 1);
                    grad[bin] += mag;
                }
            }
            l2_normalize(&mut color);
            l2_normalize(&mut grad);
            color_part.extend(color);
            grad_part.extend(grad);
        }
    }
    let mut values = color_part;
    values.extend(grad_part);
    debug_assert_eq!(values.len(), BUILTIN_DIM);
    Ok(FeatureVector::new(values, BUILTIN_DESCRIPTOR_ID))
}
