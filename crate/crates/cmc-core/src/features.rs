//! Node and edge feature vectors.
//!
//! Node features: size, circularity, eccentricity, a 16-bin contour angle
//! histogram, then intensity statistics (sum, mean, variance, skewness,
//! excess kurtosis, a 20-bin histogram over `[0, 1]` and 7 quantiles) of the
//! raw and boundary images, each over the whole region and over its contour.
//!
//! Edge features: contact area and mean/variance/skewness of the interface
//! intensities, then `|u-v|`, `min`, `max` and `u+v` of every node feature
//! of the two endpoints.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use crate::crag::{Crag, Edge};
use crate::image::{BoundaryMap, Grid, Raster};
use crate::stats::{moments, quantiles, unit_histogram};

pub const ANGLE_BINS: usize = 16;
pub const INTENSITY_BINS: usize = 20;
pub const QUANTILES: [f64; 7] = [0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95];

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureError {
    EmptyRegion,
    PixelOutOfBounds(usize),
    NotAnEdge(Edge),
    DimensionMismatch,
    /// Node feature vectors do not match the node schema.
    SchemaMismatch {
        expected: usize,
        got: usize,
    },
}

impl fmt::Display for FeatureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureError::EmptyRegion => write!(f, "region has no pixels"),
            FeatureError::PixelOutOfBounds(p) => {
                write!(f, "pixel index {p} lies outside the image")
            }
            FeatureError::NotAnEdge(e) => write!(f, "{e} is not an adjacency edge"),
            FeatureError::DimensionMismatch => write!(f, "raw, boundary and CRAG sizes differ"),
            FeatureError::SchemaMismatch { expected, got } => {
                write!(f, "feature vector has length {got}, schema has {expected}")
            }
        }
    }
}

impl core::error::Error for FeatureError {}

fn stat_names(prefix: &str) -> Vec<String> {
    let mut names: Vec<String> = ["sum", "mean", "variance", "skewness", "kurtosis"]
        .iter()
        .map(|s| format!("{prefix}_{s}"))
        .collect();
    names.extend((0..INTENSITY_BINS).map(|k| format!("{prefix}_hist_{k}")));
    names.extend(
        QUANTILES
            .iter()
            .map(|q| format!("{prefix}_q{:02}", (q * 100.0 + 0.5) as u32)),
    );
    names
}

/// Ordered node feature names.
pub fn node_schema() -> Vec<String> {
    let mut names: Vec<String> = vec!["size".into(), "circularity".into(), "eccentricity".into()];
    names.extend((0..ANGLE_BINS).map(|k| format!("contour_angle_{k}")));
    for src in ["raw", "boundary"] {
        for set in ["region", "contour"] {
            names.extend(stat_names(&format!("{src}_{set}")));
        }
    }
    names
}

/// Ordered edge feature names.
pub fn edge_schema() -> Vec<String> {
    let mut names: Vec<String> = [
        "contact_area",
        "interface_mean",
        "interface_variance",
        "interface_skewness",
    ]
    .iter()
    .map(|s| String::from(*s))
    .collect();
    for n in node_schema() {
        for op in ["absdiff", "min", "max", "sum"] {
            names.push(format!("{op}_{n}"));
        }
    }
    names
}

/// Region mask over the bounding box of a pixel set.
struct Mask {
    top: usize,
    left: usize,
    h: usize,
    w: usize,
    bits: Vec<bool>,
}

impl Mask {
    fn new(grid: Grid, pixels: &[usize]) -> Self {
        let gw = grid.width as usize;
        let (mut top, mut left, mut bottom, mut right) = (usize::MAX, usize::MAX, 0, 0);
        for &p in pixels {
            let (r, c) = (p / gw, p % gw);
            top = top.min(r);
            left = left.min(c);
            bottom = bottom.max(r);
            right = right.max(c);
        }
        let (h, w) = (bottom - top + 1, right - left + 1);
        let mut bits = vec![false; h * w];
        for &p in pixels {
            bits[(p / gw - top) * w + (p % gw - left)] = true;
        }
        Mask {
            top,
            left,
            h,
            w,
            bits,
        }
    }

    fn get(&self, r: isize, c: isize) -> bool {
        r >= 0
            && c >= 0
            && (r as usize) < self.h
            && (c as usize) < self.w
            && self.bits[r as usize * self.w + c as usize]
    }

    fn local(&self, p: usize, gw: usize) -> (isize, isize) {
        ((p / gw - self.top) as isize, (p % gw - self.left) as isize)
    }
}

const STEPS4: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
// clockwise starting west (row grows downwards)
const STEPS8: [(isize, isize); 8] = [
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
];

fn eight_connected(mask: &Mask) -> bool {
    let total = mask.bits.iter().filter(|&&b| b).count();
    let Some(start) = mask.bits.iter().position(|&b| b) else {
        return false;
    };
    let mut seen = vec![false; mask.bits.len()];
    let mut stack = vec![start];
    seen[start] = true;
    let mut count = 0;
    while let Some(i) = stack.pop() {
        count += 1;
        let (r, c) = ((i / mask.w) as isize, (i % mask.w) as isize);
        for (dr, dc) in STEPS8 {
            let (nr, nc) = (r + dr, c + dc);
            if mask.get(nr, nc) {
                let j = nr as usize * mask.w + nc as usize;
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    count == total
}

/// Moore-neighbor tracing of the outer contour, stopping when the start pixel
/// is re-entered from the initial backtrack position. Returns local coords.
fn moore_trace(mask: &Mask) -> Vec<(isize, isize)> {
    let Some(first) = mask.bits.iter().position(|&b| b) else {
        return Vec::new();
    };
    let start = ((first / mask.w) as isize, (first % mask.w) as isize);
    let start_back = (start.0, start.1 - 1);
    let mut contour = vec![start];
    let (mut p, mut back) = (start, start_back);
    let limit = 4 * mask.bits.len() + 16;
    for _ in 0..limit {
        let k = STEPS8
            .iter()
            .position(|&d| (p.0 + d.0, p.1 + d.1) == back)
            .unwrap_or(0);
        let mut moved = false;
        for i in 1..=8 {
            let d = STEPS8[(k + i) % 8];
            let c = (p.0 + d.0, p.1 + d.1);
            if mask.get(c.0, c.1) {
                let prev = STEPS8[(k + i - 1) % 8];
                back = (p.0 + prev.0, p.1 + prev.1);
                p = c;
                moved = true;
                break;
            }
        }
        if !moved || (p == start && back == start_back) {
            break;
        }
        contour.push(p);
    }
    contour
}

fn angle_histogram(mask: &Mask, size: usize) -> [f64; ANGLE_BINS] {
    let mut hist = [0.0; ANGLE_BINS];
    if size < 2 || !eight_connected(mask) {
        return hist;
    }
    let contour = moore_trace(mask);
    if contour.len() < 2 {
        return hist;
    }
    let width = 2.0 * PI / ANGLE_BINS as f64;
    for k in 0..contour.len() {
        let (a, b) = (contour[k], contour[(k + 1) % contour.len()]);
        let mut angle = libm::atan2((b.0 - a.0) as f64, (b.1 - a.1) as f64);
        if angle < 0.0 {
            angle += 2.0 * PI;
        }
        let bin = ((angle / width + 1e-9) as usize) % ANGLE_BINS;
        hist[bin] += 1.0;
    }
    hist
}

fn push_intensity(out: &mut Vec<f64>, values: &[f64]) {
    let m = moments(values);
    out.extend_from_slice(&[m.sum, m.mean, m.variance, m.skewness, m.kurtosis]);
    out.extend(unit_histogram(values, INTENSITY_BINS));
    out.extend(quantiles(values, &QUANTILES));
}

/// Features of an arbitrary pixel set (linear indices into `raw`'s grid).
pub fn region_features(
    pixels: &[usize],
    raw: &Raster,
    boundary: &BoundaryMap,
) -> Result<Vec<f64>, FeatureError> {
    if pixels.is_empty() {
        return Err(FeatureError::EmptyRegion);
    }
    if raw.width() != boundary.width() || raw.height() != boundary.height() {
        return Err(FeatureError::DimensionMismatch);
    }
    let grid = Grid::new(raw.width(), raw.height());
    if let Some(&p) = pixels.iter().find(|&&p| p >= grid.len()) {
        return Err(FeatureError::PixelOutOfBounds(p));
    }
    let gw = grid.width as usize;
    let mask = Mask::new(grid, pixels);
    let size = pixels.len();

    let mut faces = 0usize;
    let mut contour = Vec::new();
    let (mut sr, mut sc) = (0.0, 0.0);
    for &p in pixels {
        let (r, c) = mask.local(p, gw);
        let open = STEPS4
            .iter()
            .filter(|(dr, dc)| !mask.get(r + dr, c + dc))
            .count();
        faces += open;
        if open > 0 {
            contour.push(p);
        }
        sr += r as f64;
        sc += c as f64;
    }
    let n = size as f64;
    let circularity = 4.0 * PI * n / (faces * faces) as f64;

    let (mr, mc) = (sr / n, sc / n);
    let (mut crr, mut ccc, mut crc) = (0.0, 0.0, 0.0);
    for &p in pixels {
        let (r, c) = mask.local(p, gw);
        let (dr, dc) = (r as f64 - mr, c as f64 - mc);
        crr += dr * dr;
        ccc += dc * dc;
        crc += dr * dc;
    }
    let (crr, ccc, crc) = (crr / n, ccc / n, crc / n);
    let half_trace = (crr + ccc) / 2.0;
    let disc = libm::sqrt(((crr - ccc) / 2.0) * ((crr - ccc) / 2.0) + crc * crc);
    let (lmax, lmin) = (half_trace + disc, (half_trace - disc).max(0.0));
    let eccentricity = if lmax <= 1e-12 {
        0.0
    } else {
        libm::sqrt((1.0 - lmin / lmax).max(0.0))
    };

    let mut out = Vec::with_capacity(node_schema().len());
    out.extend_from_slice(&[n, circularity, eccentricity]);
    out.extend_from_slice(&angle_histogram(&mask, size));
    for img in [raw, boundary] {
        let region: Vec<f64> = pixels.iter().map(|&p| img.at(p)).collect();
        let rim: Vec<f64> = contour.iter().map(|&p| img.at(p)).collect();
        push_intensity(&mut out, &region);
        push_intensity(&mut out, &rim);
    }
    Ok(out)
}

/// Features of candidate `i` of a CRAG.
pub fn node_features(
    crag: &Crag,
    i: usize,
    raw: &Raster,
    boundary: &BoundaryMap,
) -> Result<Vec<f64>, FeatureError> {
    if raw.width() != crag.width() || raw.height() != crag.height() {
        return Err(FeatureError::DimensionMismatch);
    }
    let pixels: Vec<usize> = crag.pixels(i).collect();
    region_features(&pixels, raw, boundary)
}

/// Interface intensities `max(boundary[p], boundary[q])` over all 4-neighbor
/// pairs across the two candidates.
pub fn interface_values(crag: &Crag, u: usize, v: usize, boundary: &BoundaryMap) -> Vec<f64> {
    let (small, other) = if crag.size(u) <= crag.size(v) {
        (u, v)
    } else {
        (v, u)
    };
    let grid = crag.grid();
    let mut out = Vec::new();
    for p in crag.pixels(small) {
        for q in grid.neighbors4(p) {
            if crag.covers_pixel(other, q) {
                out.push(boundary.at(p).max(boundary.at(q)));
            }
        }
    }
    out
}

/// Edge features from the interface and the endpoint node features
/// (`node_feats` indexed by candidate).
pub fn edge_features(
    crag: &Crag,
    edge: Edge,
    boundary: &BoundaryMap,
    node_feats: &[Vec<f64>],
) -> Result<Vec<f64>, FeatureError> {
    let e = crag.edge_index(edge).ok_or(FeatureError::NotAnEdge(edge))?;
    let (u, v) = crag.endpoints(e);
    let (fu, fv) = (&node_feats[u], &node_feats[v]);
    if fu.len() != fv.len() {
        return Err(FeatureError::SchemaMismatch {
            expected: fu.len(),
            got: fv.len(),
        });
    }
    let values = interface_values(crag, u, v, boundary);
    let m = moments(&values);
    let mut out = Vec::with_capacity(4 + 4 * fu.len());
    out.extend_from_slice(&[values.len() as f64, m.mean, m.variance, m.skewness]);
    for (&a, &b) in fu.iter().zip(fv) {
        out.extend_from_slice(&[libm::fabs(a - b), a.min(b), a.max(b), a + b]);
    }
    Ok(out)
}

/// Features of every candidate and every adjacency edge of one CRAG.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub node_schema: Vec<String>,
    pub edge_schema: Vec<String>,
    /// Indexed by candidate.
    pub nodes: Vec<Vec<f64>>,
    /// Indexed by adjacency edge.
    pub edges: Vec<Vec<f64>>,
}

pub fn compute_features(
    crag: &Crag,
    raw: &Raster,
    boundary: &BoundaryMap,
) -> Result<FeatureSet, FeatureError> {
    if boundary.width() != crag.width() || boundary.height() != crag.height() {
        return Err(FeatureError::DimensionMismatch);
    }
    let nodes = (0..crag.num_candidates())
        .map(|i| node_features(crag, i, raw, boundary))
        .collect::<Result<Vec<_>, _>>()?;
    let edges = crag
        .edges()
        .iter()
        .map(|&e| edge_features(crag, e, boundary, &nodes))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FeatureSet {
        node_schema: node_schema(),
        edge_schema: edge_schema(),
        nodes,
        edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crag::{build_crag, CandidateId, CandidateSpec};

    fn idx(name: &str) -> usize {
        node_schema().iter().position(|n| n == name).unwrap()
    }

    fn square(top: usize, left: usize, side: usize, gw: usize) -> Vec<usize> {
        (top..top + side)
            .flat_map(|r| (left..left + side).map(move |c| r * gw + c))
            .collect()
    }

    #[test]
    fn schema_lengths() {
        assert_eq!(node_schema().len(), 3 + 16 + 4 * (5 + 20 + 7));
        assert_eq!(edge_schema().len(), 4 + 4 * node_schema().len());
        assert!(node_schema().contains(&String::from("boundary_contour_q95")));
    }

    #[test]
    fn single_pixel_on_constant_image() {
        let raw = Raster::constant(3, 3, 0.6);
        let b = Raster::constant(3, 3, 0.2);
        let f = region_features(&[4], &raw, &b).unwrap();
        assert_eq!(f[idx("size")], 1.0);
        assert_eq!(f[idx("raw_region_mean")], 0.6);
        assert_eq!(f[idx("raw_region_variance")], 0.0);
        assert_eq!(f[idx("raw_region_skewness")], 0.0);
        assert_eq!(f[idx("raw_region_kurtosis")], 0.0);
        assert_eq!(f[idx("eccentricity")], 0.0);
        assert!((0..16).all(|k| f[idx(&format!("contour_angle_{k}"))] == 0.0));
        assert_eq!(
            region_features(&[], &raw, &b),
            Err(FeatureError::EmptyRegion)
        );
    }

    #[test]
    fn solid_square_circularity() {
        let raw = Raster::constant(12, 12, 0.5);
        let f = region_features(&square(1, 1, 10, 12), &raw, &raw).unwrap();
        assert_eq!(f[idx("size")], 100.0);
        assert!((f[idx("circularity")] - 4.0 * PI * 100.0 / 1600.0).abs() < 1e-12);
        assert!((f[idx("circularity")] - core::f64::consts::FRAC_PI_4).abs() < 1e-6);
        assert!(f[idx("eccentricity")].abs() < 1e-12);
        // 36 contour pixels traced, 9 steps along each side
        let angles: f64 = (0..16).map(|k| f[idx(&format!("contour_angle_{k}"))]).sum();
        assert_eq!(angles, 36.0);
        assert_eq!(f[idx("contour_angle_0")], 9.0);
        assert_eq!(f[idx("contour_angle_4")], 9.0);
        assert_eq!(f[idx("contour_angle_8")], 9.0);
        assert_eq!(f[idx("contour_angle_12")], 9.0);
        // whole-region histogram counts every pixel
        let hist: f64 = (0..20)
            .map(|k| f[idx(&format!("raw_region_hist_{k}"))])
            .sum();
        assert_eq!(hist, 100.0);
        let rim: f64 = (0..20)
            .map(|k| f[idx(&format!("raw_contour_hist_{k}"))])
            .sum();
        assert_eq!(rim, 36.0);
    }

    #[test]
    fn elongated_region_is_eccentric() {
        let raw = Raster::constant(10, 3, 0.5);
        let line: Vec<usize> = (0..10).map(|c| 10 + c).collect();
        let f = region_features(&line, &raw, &raw).unwrap();
        assert!((f[idx("eccentricity")] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disconnected_region_has_no_angle_histogram() {
        let raw = Raster::constant(5, 1, 0.5);
        let f = region_features(&[0, 4], &raw, &raw).unwrap();
        assert!((0..16).all(|k| f[idx(&format!("contour_angle_{k}"))] == 0.0));
    }

    #[test]
    fn translation_invariant() {
        let (w, h) = (16u32, 16u32);
        let ramp = |dr: u32, dc: u32| {
            let v = (0..h)
                .flat_map(|r| (0..w).map(move |c| (r, c)))
                .map(|(r, c)| (((r + 3 * c + 100 - dr - 3 * dc) % 17) as f64) / 16.0)
                .collect();
            Raster::new_unit(w, h, v).unwrap()
        };
        let shape = |dr: usize, dc: usize| -> Vec<usize> {
            [(0, 0), (0, 1), (1, 1), (1, 2), (2, 1), (3, 1), (3, 0)]
                .iter()
                .map(|&(r, c)| (r + 2 + dr) * w as usize + (c + 2 + dc))
                .collect()
        };
        let a = region_features(&shape(0, 0), &ramp(0, 0), &ramp(0, 0)).unwrap();
        let b = region_features(&shape(5, 7), &ramp(5, 7), &ramp(5, 7)).unwrap();
        assert_eq!(a, b);
    }

    fn two_pixel_crag() -> Crag {
        build_crag(
            vec![
                CandidateSpec::leaf(1, vec![(0, 0)]),
                CandidateSpec::leaf(2, vec![(0, 1)]),
            ],
            &[(CandidateId(1), CandidateId(2))],
            &[],
            2,
            1,
        )
        .unwrap()
    }

    #[test]
    fn edge_between_single_pixels() {
        let crag = two_pixel_crag();
        let raw = Raster::new_unit(2, 1, vec![0.2, 0.8]).unwrap();
        let b = Raster::new_unit(2, 1, vec![0.1, 0.4]).unwrap();
        let fs = compute_features(&crag, &raw, &b).unwrap();
        assert_eq!(fs.edges[0][0], 1.0);
        assert_eq!(fs.edges[0][1], 0.4);
        assert_eq!(fs.edges[0].len(), edge_schema().len());
        let missing = Edge::new(CandidateId(1), CandidateId(7));
        assert_eq!(
            edge_features(&crag, missing, &b, &fs.nodes),
            Err(FeatureError::NotAnEdge(missing))
        );
    }

    #[test]
    fn identical_endpoints_give_zero_differences() {
        let crag = two_pixel_crag();
        let c = Raster::constant(2, 1, 0.5);
        let fs = compute_features(&crag, &c, &c).unwrap();
        let u = &fs.nodes[0];
        assert_eq!(u, &fs.nodes[1]);
        for (k, &val) in u.iter().enumerate() {
            let base = 4 + 4 * k;
            assert_eq!(fs.edges[0][base], 0.0);
            assert_eq!(fs.edges[0][base + 3], 2.0 * val);
        }
    }

    #[test]
    fn interface_statistics() {
        // left column vs right column, interface maxima 0.2, 0.4, 0.6
        let crag = build_crag(
            vec![
                CandidateSpec::leaf(1, vec![(0, 0), (1, 0), (2, 0)]),
                CandidateSpec::leaf(2, vec![(0, 1), (1, 1), (2, 1)]),
            ],
            &[(CandidateId(1), CandidateId(2))],
            &[],
            2,
            3,
        )
        .unwrap();
        let b = Raster::new_unit(2, 3, vec![0.0, 0.2, 0.4, 0.0, 0.0, 0.6]).unwrap();
        let raw = Raster::constant(2, 3, 0.5);
        let fs = compute_features(&crag, &raw, &b).unwrap();
        let e = &fs.edges[0];
        assert_eq!(e[0], 3.0);
        assert!((e[1] - 0.4).abs() < 1e-12);
        assert!((e[2] - 0.02666666666).abs() < 1e-9);
        assert!(e[3].abs() < 1e-9);
    }
}
