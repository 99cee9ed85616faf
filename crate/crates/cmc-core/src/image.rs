//! Dense 2D rasters: integer label images and real-valued maps.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// A pixel coordinate, `(row, col)`.
pub type Pixel = (u32, u32);

#[derive(Debug, Clone, PartialEq)]
pub enum ImageError {
    /// Buffer length does not equal `width * height`.
    SizeMismatch { expected: usize, got: usize },
    /// A value is NaN, infinite or outside `[0, 1]`.
    ValueOutOfRange { index: usize, value: f64 },
}

impl fmt::Display for ImageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImageError::SizeMismatch { expected, got } => {
                write!(f, "image buffer has {got} values, expected {expected}")
            }
            ImageError::ValueOutOfRange { index, value } => {
                write!(
                    f,
                    "value {value} at index {index} is not a finite number in [0, 1]"
                )
            }
        }
    }
}

impl core::error::Error for ImageError {}

/// Row-major raster of non-negative region labels. Label 0 is background.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelImage {
    width: u32,
    height: u32,
    labels: Vec<u32>,
}

impl LabelImage {
    pub fn new(width: u32, height: u32, labels: Vec<u32>) -> Result<Self, ImageError> {
        let expected = width as usize * height as usize;
        if labels.len() != expected {
            return Err(ImageError::SizeMismatch {
                expected,
                got: labels.len(),
            });
        }
        Ok(LabelImage {
            width,
            height,
            labels,
        })
    }

    pub fn background(width: u32, height: u32) -> Self {
        LabelImage {
            width,
            height,
            labels: vec![0; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, row: u32, col: u32) -> u32 {
        self.labels[row as usize * self.width as usize + col as usize]
    }

    pub fn set(&mut self, row: u32, col: u32, label: u32) {
        self.labels[row as usize * self.width as usize + col as usize] = label;
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.labels
    }

    pub fn as_mut_slice(&mut self) -> &mut [u32] {
        &mut self.labels
    }

    pub fn into_vec(self) -> Vec<u32> {
        self.labels
    }

    pub fn max_label(&self) -> u32 {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    pub fn same_shape<T>(&self, other: &Raster<T>) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Row-major raster of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T = f64> {
    width: u32,
    height: u32,
    values: Vec<T>,
}

/// Per-pixel boundary evidence in `[0, 1]`; 1 is a strong boundary.
pub type BoundaryMap = Raster<f64>;

impl Raster<f64> {
    /// Builds a map whose values are all finite and inside `[0, 1]`.
    pub fn new_unit(width: u32, height: u32, values: Vec<f64>) -> Result<Self, ImageError> {
        let expected = width as usize * height as usize;
        if values.len() != expected {
            return Err(ImageError::SizeMismatch {
                expected,
                got: values.len(),
            });
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(ImageError::ValueOutOfRange { index, value });
        }
        Ok(Raster {
            width,
            height,
            values,
        })
    }

    pub fn constant(width: u32, height: u32, value: f64) -> Self {
        Raster {
            width,
            height,
            values: vec![value; width as usize * height as usize],
        }
    }
}

impl<T: Copy> Raster<T> {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, row: u32, col: u32) -> T {
        self.values[row as usize * self.width as usize + col as usize]
    }

    pub fn at(&self, index: usize) -> T {
        self.values[index]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }
}

/// Linear pixel index helpers shared by the region code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub width: u32,
    pub height: u32,
}

impl Grid {
    pub fn new(width: u32, height: u32) -> Self {
        Grid { width, height }
    }

    pub fn len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, (row, col): Pixel) -> usize {
        row as usize * self.width as usize + col as usize
    }

    pub fn pixel(&self, index: usize) -> Pixel {
        let w = self.width as usize;
        ((index / w) as u32, (index % w) as u32)
    }

    pub fn contains(&self, (row, col): Pixel) -> bool {
        row < self.height && col < self.width
    }

    /// 4-neighbors of a linear index, in N, W, E, S order.
    pub fn neighbors4(&self, index: usize) -> impl Iterator<Item = usize> {
        let w = self.width as usize;
        let h = self.height as usize;
        let (r, c) = (index / w, index % w);
        let up = (r > 0).then(|| index - w);
        let left = (c > 0).then(|| index - 1);
        let right = (c + 1 < w).then(|| index + 1);
        let down = (r + 1 < h).then(|| index + w);
        [up, left, right, down].into_iter().flatten()
    }

    /// Right and down neighbors only; visits every unordered 4-neighbor pair once.
    pub fn forward_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width as usize;
        let h = self.height as usize;
        (0..w * h).flat_map(move |i| {
            let (r, c) = (i / w, i % w);
            let right = (c + 1 < w).then_some((i, i + 1));
            let down = (r + 1 < h).then_some((i, i + w));
            [right, down].into_iter().flatten()
        })
    }
}
