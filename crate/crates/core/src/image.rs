//! Multispectral image model: grids, bands, stacked images, volumes and label maps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rectangular pixel grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
}

impl Grid {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "grid must be at least 1x1, got {width}x{height}"
            )));
        }
        Ok(Grid { width, height })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }
}

/// One normalized intensity band; every value lies in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    grid: Grid,
    values: Vec<f64>,
}

impl Band {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "band has {} values for a {}x{} grid",
                values.len(),
                grid.width,
                grid.height
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!(
                "band value {v} outside [0, 1]"
            )));
        }
        Ok(Band { grid, values })
    }

    pub fn filled(grid: Grid, value: f64) -> Result<Self> {
        Band::new(grid, vec![value; grid.len()])
    }

    /// Builds a band by clamping arbitrary reals into `[0, 1]`; NaN maps to 0.
    pub fn from_clamped(grid: Grid, values: Vec<f64>) -> Result<Self> {
        let values = values
            .into_iter()
            .map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) })
            .collect();
        Band::new(grid, values)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[self.grid.index(x, y)]
    }
}

/// `n` co-registered bands; pixel `u` carries the condition vector `(f_1(u), ..., f_n(u))`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultispectralImage {
    grid: Grid,
    bands: Vec<Band>,
    b_values: Vec<f64>,
}

impl MultispectralImage {
    /// Stacks bands acquired at the given diffusion exponents (s/mm²).
    pub fn stack(bands: Vec<Band>, b_values: Vec<f64>) -> Result<Self> {
        let first = bands
            .first()
            .ok_or_else(|| Error::InvalidParameter("at least one band is required".into()))?;
        let grid = first.grid();
        if bands.iter().any(|b| b.grid() != grid) {
            return Err(Error::DimensionMismatch(
                "all bands must share one grid".into(),
            ));
        }
        if b_values.len() != bands.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} bands but {} b-values",
                bands.len(),
                b_values.len()
            )));
        }
        validate_b_values(&b_values)?;
        Ok(MultispectralImage {
            grid,
            bands,
            b_values,
        })
    }

    /// Wraps one feature band (e.g. an ADC map) as a 1-band image with `b = 0`.
    pub fn single(band: Band) -> Self {
        MultispectralImage {
            grid: band.grid(),
            bands: vec![band],
            b_values: vec![0.0],
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn band_count(&self) -> usize {
        self.bands.len()
    }

    pub fn b_values(&self) -> &[f64] {
        &self.b_values
    }

    pub fn pixel_count(&self) -> usize {
        self.grid.len()
    }

    /// Condition vector of the pixel at flat index `idx`.
    pub fn pixel(&self, idx: usize) -> Vec<f64> {
        self.bands.iter().map(|b| b.values[idx]).collect()
    }

    pub fn pixel_into(&self, idx: usize, out: &mut [f64]) {
        for (o, b) in out.iter_mut().zip(&self.bands) {
            *o = b.values[idx];
        }
    }

    /// All condition vectors in raster order.
    pub fn condition_vectors(&self) -> Vec<Vec<f64>> {
        (0..self.pixel_count()).map(|i| self.pixel(i)).collect()
    }
}

pub(crate) fn validate_b_values(b_values: &[f64]) -> Result<()> {
    if b_values.iter().any(|b| !b.is_finite() || *b < 0.0) {
        return Err(Error::InvalidParameter(
            "b-values must be finite and nonnegative".into(),
        ));
    }
    if b_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "b-values must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Ordered stack of structurally identical slices.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    slices: Vec<MultispectralImage>,
}

impl Volume {
    pub fn new(slices: Vec<MultispectralImage>) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::InvalidParameter("volume needs at least one slice".into()))?;
        let ok = slices.iter().all(|s| {
            s.grid() == first.grid()
                && s.band_count() == first.band_count()
                && s.b_values() == first.b_values()
        });
        if !ok {
            return Err(Error::DimensionMismatch(
                "volume slices must share grid and b-values".into(),
            ));
        }
        Ok(Volume { slices })
    }

    pub fn slices(&self) -> &[MultispectralImage] {
        &self.slices
    }

    pub fn slice_count(&self) -> usize {
        self.slices.len()
    }

    pub fn grid(&self) -> Grid {
        self.slices[0].grid()
    }

    pub fn b_values(&self) -> &[f64] {
        self.slices[0].b_values()
    }

    pub fn into_slices(self) -> Vec<MultispectralImage> {
        self.slices
    }
}

/// Per-pixel class indices in `0..class_count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    grid: Grid,
    labels: Vec<u32>,
    class_count: u32,
}

impl LabelMap {
    pub fn new(grid: Grid, labels: Vec<u32>, class_count: u32) -> Result<Self> {
        if labels.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "label map has {} labels for {} pixels",
                labels.len(),
                grid.len()
            )));
        }
        if class_count == 0 {
            return Err(Error::InvalidParameter(
                "class count must be positive".into(),
            ));
        }
        if let Some(l) = labels.iter().find(|l| **l >= class_count) {
            return Err(Error::InvalidParameter(format!(
                "label {l} not below class count {class_count}"
            )));
        }
        Ok(LabelMap {
            grid,
            labels,
            class_count,
        })
    }

    /// Builds a map whose class count is one past the largest label present.
    pub fn from_labels(grid: Grid, labels: Vec<u32>) -> Result<Self> {
        let m = labels.iter().copied().max().map_or(1, |l| l + 1);
        LabelMap::new(grid, labels, m)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn class_count(&self) -> u32 {
        self.class_count
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[self.grid.index(x, y)]
    }

    /// Sorted distinct labels present in the map.
    pub fn distinct_labels(&self) -> Vec<u32> {
        let mut seen = vec![false; self.class_count as usize];
        for &l in &self.labels {
            seen[l as usize] = true;
        }
        seen.iter()
            .enumerate()
            .filter(|(_, s)| **s)
            .map(|(i, _)| i as u32)
            .collect()
    }

    /// Pixel count per class.
    pub fn histogram(&self) -> Vec<usize> {
        let mut h = vec![0usize; self.class_count as usize];
        for &l in &self.labels {
            h[l as usize] += 1;
        }
        h
    }

    /// Labels scaled to `[0, 1]` as `label / (m - 1)` (all zeros when `m = 1`).
    pub fn to_band(&self) -> Band {
        let denom = (self.class_count.max(2) - 1) as f64;
        let values = self.labels.iter().map(|&l| l as f64 / denom).collect();
        Band::new(self.grid, values).expect("scaled labels lie in [0, 1]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(w: usize, h: usize) -> Grid {
        Grid::new(w, h).unwrap()
    }

    #[test]
    fn zero_sized_grid_rejected() {
        assert!(Grid::new(0, 3).is_err());
        assert!(Grid::new(3, 0).is_err());
    }

    #[test]
    fn band_rejects_out_of_range() {
        assert!(Band::new(grid(2, 1), vec![0.0, 1.1]).is_err());
        assert!(Band::new(grid(2, 1), vec![0.0]).is_err());
    }

    #[test]
    fn stack_three_bands() {
        let g = grid(64, 64);
        let bands = vec![Band::filled(g, 0.5).unwrap(); 3];
        let img = MultispectralImage::stack(bands, vec![0.0, 500.0, 1000.0]).unwrap();
        assert_eq!(img.band_count(), 3);
        assert_eq!(img.pixel(17), vec![0.5, 0.5, 0.5]);
    }

    #[test]
    fn stack_single_band() {
        let g = grid(4, 4);
        let img =
            MultispectralImage::stack(vec![Band::filled(g, 0.1).unwrap()], vec![0.0]).unwrap();
        assert_eq!(img.band_count(), 1);
    }

    #[test]
    fn stack_grid_mismatch() {
        let a = Band::filled(grid(4, 4), 0.0).unwrap();
        let b = Band::filled(grid(4, 5), 0.0).unwrap();
        assert!(matches!(
            MultispectralImage::stack(vec![a, b], vec![0.0, 500.0]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn stack_count_mismatch_and_order() {
        let a = Band::filled(grid(4, 4), 0.0).unwrap();
        assert!(MultispectralImage::stack(vec![a.clone(), a.clone()], vec![0.0]).is_err());
        assert!(MultispectralImage::stack(vec![a.clone(), a], vec![500.0, 500.0]).is_err());
    }

    #[test]
    fn label_map_bounds() {
        assert!(LabelMap::new(grid(2, 1), vec![0, 3], 3).is_err());
        let m = LabelMap::new(grid(2, 2), vec![0, 2, 2, 0], 3).unwrap();
        assert_eq!(m.distinct_labels(), vec![0, 2]);
        assert_eq!(m.histogram(), vec![2, 0, 2]);
        assert_eq!(m.to_band().values(), &[0.0, 1.0, 1.0, 0.0]);
    }
}
