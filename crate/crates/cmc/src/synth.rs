//! Synthetic cell images: random non-overlapping ellipses on a dark canvas.
//!
//! For every image the generator returns a raw intensity image (bright
//! interiors), a boundary map (outer outlines blurred with a 3x3 binomial kernel,
//! so it is exactly zero more than one pixel away from an outline when noise
//! is off) and the ground-truth labels `1..=n_cells`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use cmc_core::{BoundaryMap, LabelImage, Raster};

pub const CANVAS: u32 = 128;
pub const CELL_INTENSITY: f64 = 0.7;
pub const BACKGROUND_INTENSITY: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub width: u32,
    pub height: u32,
    pub n_cells: usize,
    pub noise_level: f64,
    /// Semi-axis range in pixels.
    pub min_axis: f64,
    pub max_axis: f64,
    /// Minimum number of background pixels between two cells.
    pub gap: u32,
    /// Straight false boundaries drawn through each cell, splitting it into
    /// several superpixels.
    pub internal_cuts: usize,
    pub max_retries: usize,
}

impl SynthParams {
    pub fn new(n_cells: usize, noise_level: f64) -> Self {
        SynthParams {
            width: CANVAS,
            height: CANVAS,
            n_cells,
            noise_level,
            min_axis: 7.0,
            max_axis: 14.0,
            gap: 3,
            internal_cuts: 0,
            max_retries: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticImage {
    pub raw: Raster,
    pub boundary: BoundaryMap,
    pub gt: LabelImage,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("placed only {placed} of {requested} cells without overlap")]
    PlacementFailure { placed: usize, requested: usize },
    #[error("noise level must be in [0, 1], got {0}")]
    InvalidNoise(f64),
    #[error("semi-axes must satisfy 1 <= min <= max and fit the canvas")]
    InvalidAxes,
}

/// `n_images` images with default geometry.
pub fn generate_synthetic(
    n_images: usize,
    n_cells: usize,
    noise_level: f64,
    rng_seed: u64,
) -> Result<Vec<SyntheticImage>, SynthError> {
    generate_synthetic_with(&SynthParams::new(n_cells, noise_level), n_images, rng_seed)
}

pub fn generate_synthetic_with(
    params: &SynthParams,
    n_images: usize,
    rng_seed: u64,
) -> Result<Vec<SyntheticImage>, SynthError> {
    if !(0.0..=1.0).contains(&params.noise_level) {
        return Err(SynthError::InvalidNoise(params.noise_level));
    }
    let fits = 2.0 * params.max_axis + 2.0 < params.width.min(params.height) as f64;
    if !(params.min_axis >= 1.0 && params.min_axis <= params.max_axis && fits) {
        return Err(SynthError::InvalidAxes);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    (0..n_images)
        .map(|_| generate_one(params, &mut rng))
        .collect()
}

struct Ellipse {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    cos: f64,
    sin: f64,
}

impl Ellipse {
    fn contains(&self, row: u32, col: u32) -> bool {
        let (dx, dy) = (col as f64 - self.cx, row as f64 - self.cy);
        let u = (dx * self.cos + dy * self.sin) / self.a;
        let v = (-dx * self.sin + dy * self.cos) / self.b;
        u * u + v * v <= 1.0
    }
}

fn generate_one<R: Rng>(p: &SynthParams, rng: &mut R) -> Result<SyntheticImage, SynthError> {
    let (w, h) = (p.width as usize, p.height as usize);
    let mut gt = vec![0u32; w * h];
    let mut cut = vec![false; w * h];
    // pixels within `gap` of a placed cell
    let mut blocked = vec![false; w * h];
    let margin = p.max_axis + 1.0;
    for label in 1..=p.n_cells as u32 {
        let mut placed = None;
        for _ in 0..p.max_retries {
            let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
            let e = Ellipse {
                cx: rng.random_range(margin..p.width as f64 - margin),
                cy: rng.random_range(margin..p.height as f64 - margin),
                a: rng.random_range(p.min_axis..=p.max_axis),
                b: rng.random_range(p.min_axis..=p.max_axis),
                cos: angle.cos(),
                sin: angle.sin(),
            };
            let pixels: Vec<usize> = (0..w * h)
                .filter(|&i| e.contains((i / w) as u32, (i % w) as u32))
                .collect();
            if !pixels.is_empty() && pixels.iter().all(|&i| !blocked[i]) {
                placed = Some((e, pixels));
                break;
            }
        }
        let Some((e, pixels)) = placed else {
            return Err(SynthError::PlacementFailure {
                placed: label as usize - 1,
                requested: p.n_cells,
            });
        };
        let g = p.gap as i64;
        for &i in &pixels {
            gt[i] = label;
            let (r, c) = ((i / w) as i64, (i % w) as i64);
            for rr in (r - g).max(0)..=(r + g).min(h as i64 - 1) {
                for cc in (c - g).max(0)..=(c + g).min(w as i64 - 1) {
                    blocked[rr as usize * w + cc as usize] = true;
                }
            }
        }
        for _ in 0..p.internal_cuts {
            let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
            let (nx, ny) = (angle.cos(), angle.sin());
            let offset = rng.random_range(-0.3..=0.3) * e.a.min(e.b);
            for &i in &pixels {
                let (dx, dy) = ((i % w) as f64 - e.cx, (i / w) as f64 - e.cy);
                if (dx * nx + dy * ny - offset).abs() <= 0.5 {
                    cut[i] = true;
                }
            }
        }
    }

    // outlines: background pixels with a 4-neighbor inside a cell, plus cuts
    let mut outline = cut;
    for i in 0..w * h {
        if gt[i] != 0 {
            continue;
        }
        let (r, c) = (i / w, i % w);
        let inside = |j: usize| gt[j] != 0;
        if (r > 0 && inside(i - w))
            || (c > 0 && inside(i - 1))
            || (c + 1 < w && inside(i + 1))
            || (r + 1 < h && inside(i + w))
        {
            outline[i] = true;
        }
    }

    // 3x3 binomial blur, scaled so that a straight outline keeps value 1
    const KERNEL: [f64; 3] = [1.0, 2.0, 1.0];
    let mut boundary = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (dr, kr) in KERNEL.iter().enumerate() {
                for (dc, kc) in KERNEL.iter().enumerate() {
                    let (rr, cc) = (r as i64 + dr as i64 - 1, c as i64 + dc as i64 - 1);
                    if rr >= 0
                        && cc >= 0
                        && (rr as usize) < h
                        && (cc as usize) < w
                        && outline[rr as usize * w + cc as usize]
                    {
                        acc += kr * kc;
                    }
                }
            }
            boundary[r * w + c] = (acc / 8.0).min(1.0);
        }
    }
    let mut raw: Vec<f64> = gt
        .iter()
        .map(|&l| {
            if l == 0 {
                BACKGROUND_INTENSITY
            } else {
                CELL_INTENSITY
            }
        })
        .collect();

    if p.noise_level > 0.0 {
        let noise = Normal::new(0.0, p.noise_level).expect("noise level is finite and positive");
        for v in raw.iter_mut().chain(boundary.iter_mut()) {
            *v = (*v + noise.sample(rng)).clamp(0.0, 1.0);
        }
    }
    Ok(SyntheticImage {
        raw: Raster::new_unit(p.width, p.height, raw).expect("values are clamped"),
        boundary: Raster::new_unit(p.width, p.height, boundary).expect("values are clamped"),
        gt: LabelImage::new(p.width, p.height, gt).expect("sizes agree"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use cmc_core::hierarchy::seeded_watershed;

    #[test]
    fn empty_canvas() {
        let imgs = generate_synthetic(2, 0, 0.1, 3).unwrap();
        for img in imgs {
            assert!(img.gt.as_slice().iter().all(|&l| l == 0));
        }
    }

    #[test]
    fn clean_boundary_is_zero_away_from_outlines() {
        let img = &generate_synthetic(1, 3, 0.0, 5).unwrap()[0];
        let (w, h) = (CANVAS as usize, CANVAS as usize);
        let gt = img.gt.as_slice();
        let b = img.boundary.as_slice();
        // an outline pixel is a background pixel with a labeled 4-neighbor
        let is_outline = |r: usize, c: usize| {
            gt[r * w + c] == 0
                && [(0i64, 1i64), (0, -1), (1, 0), (-1, 0)]
                    .iter()
                    .any(|&(dr, dc)| {
                        let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                        rr >= 0
                            && cc >= 0
                            && rr < h as i64
                            && cc < w as i64
                            && gt[rr as usize * w + cc as usize] != 0
                    })
        };
        for r in 0..h {
            for c in 0..w {
                let near = (r.saturating_sub(1)..=(r + 1).min(h - 1)).any(|rr| {
                    (c.saturating_sub(1)..=(c + 1).min(w - 1)).any(|cc| is_outline(rr, cc))
                });
                if near {
                    assert!(b[r * w + c] > 0.0);
                } else {
                    assert_eq!(b[r * w + c], 0.0);
                }
            }
        }
        let sp = seeded_watershed(&img.boundary, 0.3).unwrap();
        assert!(sp.max_label() >= 3);
        assert_eq!(img.gt.max_label(), 3);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_synthetic(2, 5, 0.1, 17).unwrap();
        let b = generate_synthetic(2, 5, 0.1, 17).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(2, 5, 0.1, 18).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn cells_keep_their_distance() {
        let img = &generate_synthetic(1, 8, 0.0, 2).unwrap()[0];
        let gt = img.gt.as_slice();
        let w = CANVAS as usize;
        for i in 0..gt.len() {
            let (r, c) = (i / w, i % w);
            for (rr, cc) in [(r + 1, c), (r, c + 1), (r + 1, c + 1)] {
                if rr < w && cc < w {
                    let (a, b) = (gt[i], gt[rr * w + cc]);
                    assert!(a == 0 || b == 0 || a == b);
                }
            }
        }
    }

    #[test]
    fn cuts_split_cells() {
        let mut params = SynthParams::new(4, 0.0);
        params.internal_cuts = 2;
        let img = &generate_synthetic_with(&params, 1, 9).unwrap()[0];
        let sp = seeded_watershed(&img.boundary, 0.3).unwrap();
        // each cell holds several superpixels, plus the background
        assert!(sp.max_label() as usize > 4 + 1);
    }

    #[test]
    fn placement_and_argument_errors() {
        assert!(matches!(
            generate_synthetic(1, 500, 0.0, 1),
            Err(SynthError::PlacementFailure { placed, requested: 500 }) if placed > 0 && placed < 500
        ));
        assert_eq!(
            generate_synthetic(1, 1, 1.5, 1),
            Err(SynthError::InvalidNoise(1.5))
        );
        let mut params = SynthParams::new(1, 0.0);
        params.max_axis = 100.0;
        assert_eq!(
            generate_synthetic_with(&params, 1, 1),
            Err(SynthError::InvalidAxes)
        );
    }
}
