//! Binary mathematical morphology with 3×3 digital discs: erosion, dilation,
//! j-openings and j-closings, granulometry, pattern spectra, the morphological
//! similarity index and Wang's fidelity index.
//!
//! Pixels outside the grid are background (0) for every operator.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::image::{Band, Grid, LabelMap};
use crate::pgm::{self, PgmRaster};

/// 3×3 digital disc centered at offset (1, 1) of its mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StructuringElement {
    #[default]
    Square3,
    Cross3,
}

const SQUARE: [(isize, isize); 9] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (0, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];
const CROSS: [(isize, isize); 5] = [(0, -1), (-1, 0), (0, 0), (1, 0), (0, 1)];

impl StructuringElement {
    /// Offsets `(dx, dy)` of the mask relative to its origin.
    pub fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            StructuringElement::Square3 => &SQUARE,
            StructuringElement::Cross3 => &CROSS,
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "square" | "square3" => Ok(StructuringElement::Square3),
            "cross" | "cross3" => Ok(StructuringElement::Cross3),
            other => Err(Error::InvalidParameter(format!(
                "unknown structuring element {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    grid: Grid,
    bits: Vec<bool>,
}

impl BinaryImage {
    pub fn new(grid: Grid, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} bits for {} pixels",
                bits.len(),
                grid.len()
            )));
        }
        Ok(BinaryImage { grid, bits })
    }

    pub fn empty(grid: Grid) -> Self {
        BinaryImage {
            grid,
            bits: vec![false; grid.len()],
        }
    }

    /// Builds from rows of `0`/`1` characters; handy for fixtures.
    pub fn from_ascii(rows: &[&str]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        let grid = Grid::new(width, height)?;
        let mut bits = Vec::with_capacity(grid.len());
        for r in rows {
            if r.len() != width {
                return Err(Error::DimensionMismatch("ragged fixture rows".into()));
            }
            bits.extend(r.bytes().map(|b| b == b'1'));
        }
        BinaryImage::new(grid, bits)
    }

    /// Mask of pixels carrying `class`.
    pub fn from_class(map: &LabelMap, class: u32) -> Self {
        BinaryImage {
            grid: map.grid(),
            bits: map.labels().iter().map(|&l| l == class).collect(),
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[self.grid.index(x, y)]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        let i = self.grid.index(x, y);
        self.bits[i] = v;
    }

    pub fn count_ones(&self) -> u64 {
        self.bits.iter().filter(|b| **b).count() as u64
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    /// `self ≤ other` pointwise.
    pub fn is_subset_of(&self, other: &BinaryImage) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }

    #[inline]
    fn at(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.grid.width
            && (y as usize) < self.grid.height
            && self.bits[y as usize * self.grid.width + x as usize]
    }

    fn neighborhood_map(&self, se: StructuringElement, exec: Execution, all: bool) -> BinaryImage {
        let mut bits = vec![false; self.grid.len()];
        let offs = se.offsets();
        exec.fill_rows(&mut bits, self.grid.width, |y, row| {
            for (x, out) in row.iter_mut().enumerate() {
                let (x, y) = (x as isize, y as isize);
                *out = if all {
                    offs.iter().all(|(dx, dy)| self.at(x + dx, y + dy))
                } else {
                    offs.iter().any(|(dx, dy)| self.at(x - dx, y - dy))
                };
            }
        });
        BinaryImage {
            grid: self.grid,
            bits,
        }
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let raster = PgmRaster {
            grid: self.grid,
            maxval: 255,
            samples: self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        };
        pgm::write_atomic(path, &pgm::encode(&raster))
    }

    /// Any nonzero sample is foreground.
    pub fn read_pgm(path: &Path) -> Result<Self> {
        let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let raster = pgm::decode(&data)?;
        BinaryImage::new(
            raster.grid,
            raster.samples.iter().map(|&s| s != 0).collect(),
        )
    }
}

pub fn erode(img: &BinaryImage, se: StructuringElement) -> BinaryImage {
    erode_with(img, se, Execution::default())
}

pub fn erode_with(img: &BinaryImage, se: StructuringElement, exec: Execution) -> BinaryImage {
    img.neighborhood_map(se, exec, true)
}

pub fn dilate(img: &BinaryImage, se: StructuringElement) -> BinaryImage {
    dilate_with(img, se, Execution::default())
}

pub fn dilate_with(img: &BinaryImage, se: StructuringElement, exec: Execution) -> BinaryImage {
    img.neighborhood_map(se, exec, false)
}

fn iterate(
    img: &BinaryImage,
    times: usize,
    f: impl Fn(&BinaryImage) -> BinaryImage,
) -> BinaryImage {
    (0..times).fold(img.clone(), |acc, _| f(&acc))
}

/// `j` erosions followed by `j` dilations; `j = 0` is the identity.
pub fn open_j(img: &BinaryImage, se: StructuringElement, j: usize) -> BinaryImage {
    let eroded = iterate(img, j, |i| erode(i, se));
    iterate(&eroded, j, |i| dilate(i, se))
}

/// `j` dilations followed by `j` erosions; `j = 0` is the identity.
pub fn close_j(img: &BinaryImage, se: StructuringElement, j: usize) -> BinaryImage {
    let dilated = iterate(img, j, |i| dilate(i, se));
    iterate(&dilated, j, |i| erode(i, se))
}

/// `V(k)`: number of foreground pixels that survive the k-opening.
pub fn granulometric_volume(img: &BinaryImage, se: StructuringElement, k: usize) -> u64 {
    open_j(img, se, k).count_ones()
}

/// Granulometric size distribution of a binary image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSpectrum {
    /// `V(k)` for `k = 0..=k_max`, with `V(k_max) = 0`.
    pub volumes: Vec<u64>,
    /// `Ξ[k] = 1 - V(k) / V(0)`, `k = 0..=k_max`.
    pub cumulative: Vec<f64>,
    /// `ξ[k] = Ξ[k+1] - Ξ[k]`, `k = 0..k_max`.
    pub density: Vec<f64>,
}

impl PatternSpectrum {
    pub fn k_max(&self) -> usize {
        self.volumes.len() - 1
    }

    /// CSV with header `k,V,Xi,xi`; the `xi` column is empty on the last row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,V,Xi,xi\n");
        for (k, (v, xi_cum)) in self.volumes.iter().zip(&self.cumulative).enumerate() {
            let xi = self
                .density
                .get(k)
                .map(|d| d.to_string())
                .unwrap_or_default();
            let _ = writeln!(out, "{k},{v},{xi_cum},{xi}");
        }
        out
    }
}

/// Computes `V`, `Ξ` and `ξ` up to the first size that empties the image.
pub fn pattern_spectrum(img: &BinaryImage, se: StructuringElement) -> Result<PatternSpectrum> {
    pattern_spectrum_with(img, se, Execution::default())
}

pub fn pattern_spectrum_with(
    img: &BinaryImage,
    se: StructuringElement,
    exec: Execution,
) -> Result<PatternSpectrum> {
    let v0 = img.count_ones();
    if v0 == 0 {
        return Err(Error::UndefinedSpectrum);
    }
    let mut volumes = vec![v0];
    let mut eroded = img.clone();
    for k in 1.. {
        eroded = erode_with(&eroded, se, exec);
        if eroded.is_empty() {
            volumes.push(0);
            break;
        }
        let opened = iterate(&eroded, k, |i| dilate_with(i, se, exec));
        volumes.push(opened.count_ones());
    }
    let cumulative: Vec<f64> = volumes
        .iter()
        .map(|v| 1.0 - *v as f64 / v0 as f64)
        .collect();
    let density = cumulative.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(PatternSpectrum {
        volumes,
        cumulative,
        density,
    })
}

/// `Q_M(f, g) = exp(-sqrt(Σ (ξ_f - ξ_g)² / Σ ξ_g²))`, spectra zero-padded to a
/// common length. Not symmetric: `g` is the reference.
pub fn morphological_similarity(
    f: &BinaryImage,
    g: &BinaryImage,
    se: StructuringElement,
) -> Result<f64> {
    let sf = pattern_spectrum(f, se)?;
    let sg = pattern_spectrum(g, se)?;
    Ok(spectrum_similarity(&sf.density, &sg.density))
}

/// Q_M from two precomputed pattern spectra.
pub fn spectrum_similarity(xi_f: &[f64], xi_g: &[f64]) -> f64 {
    let n = xi_f.len().max(xi_g.len());
    let at = |s: &[f64], k: usize| s.get(k).copied().unwrap_or(0.0);
    let num: f64 = (0..n).map(|k| (at(xi_f, k) - at(xi_g, k)).powi(2)).sum();
    let den: f64 = xi_g.iter().map(|v| v * v).sum();
    (-(num / den).sqrt()).exp()
}

/// Wang's fidelity index `4 μ_f μ_g σ_fg / ((μ_f² + μ_g²)(σ_f² + σ_g²))`.
pub fn wang_fidelity(f: &Band, g: &Band) -> Result<f64> {
    if f.grid() != g.grid() {
        return Err(Error::DimensionMismatch(
            "images must share one grid".into(),
        ));
    }
    let n = f.values().len() as f64;
    let mf = f.values().iter().sum::<f64>() / n;
    let mg = g.values().iter().sum::<f64>() / n;
    let (mut vf, mut vg, mut cov) = (0.0, 0.0, 0.0);
    for (a, b) in f.values().iter().zip(g.values()) {
        let (da, db) = (a - mf, b - mg);
        vf += da * da;
        vg += db * db;
        cov += da * db;
    }
    let (vf, vg, cov) = (vf / n, vg / n, cov / n);
    let den = (mf * mf + mg * mg) * (vf + vg);
    if den == 0.0 {
        return Err(Error::Degenerate(
            "fidelity index undefined for these means and variances".into(),
        ));
    }
    Ok(4.0 * mf * mg * cov / den)
}

/// 1 where `value >= threshold`.
pub fn binarize(band: &Band, threshold: f64) -> Result<BinaryImage> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidParameter(format!(
            "threshold {threshold} outside [0, 1]"
        )));
    }
    BinaryImage::new(
        band.grid(),
        band.values().iter().map(|v| *v >= threshold).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SE: [StructuringElement; 2] = [StructuringElement::Square3, StructuringElement::Cross3];

    fn square4() -> BinaryImage {
        BinaryImage::from_ascii(&[
            "00000000", "01111000", "01111000", "01111000", "01111000", "00000000",
        ])
        .unwrap()
    }

    fn pixel() -> BinaryImage {
        BinaryImage::from_ascii(&["000", "010", "000"]).unwrap()
    }

    /// Brute-force erosion: every mask offset must land on a foreground pixel.
    fn brute_erode(img: &BinaryImage, se: StructuringElement) -> BinaryImage {
        let g = img.grid();
        let mut out = BinaryImage::empty(g);
        for y in 0..g.height {
            for x in 0..g.width {
                let mut ok = true;
                for &(dx, dy) in se.offsets() {
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    let inside =
                        nx >= 0 && ny >= 0 && nx < g.width as isize && ny < g.height as isize;
                    ok &= inside && img.get(nx as usize, ny as usize);
                }
                out.set(x, y, ok);
            }
        }
        out
    }

    #[test]
    fn erode_solid_5x5() {
        let img = BinaryImage::from_ascii(&["11111"; 5]).unwrap();
        let e = erode(&img, StructuringElement::Square3);
        let expected =
            BinaryImage::from_ascii(&["00000", "01110", "01110", "01110", "00000"]).unwrap();
        assert_eq!(e, expected);
        assert_eq!(e, brute_erode(&img, StructuringElement::Square3));
    }

    #[test]
    fn dilate_cases() {
        let empty = BinaryImage::empty(Grid::new(5, 5).unwrap());
        assert_eq!(dilate(&empty, StructuringElement::Square3), empty);
        let p = pixel();
        assert_eq!(
            dilate(&p, StructuringElement::Cross3),
            BinaryImage::from_ascii(&["010", "111", "010"]).unwrap()
        );
    }

    #[test]
    fn openings_of_square() {
        let sq = square4();
        assert_eq!(open_j(&sq, StructuringElement::Square3, 0), sq);
        assert_eq!(open_j(&sq, StructuringElement::Square3, 1), sq);
        assert!(open_j(&sq, StructuringElement::Square3, 2).is_empty());
        assert_eq!(close_j(&sq, StructuringElement::Square3, 0), sq);
    }

    #[test]
    fn volumes() {
        let sq = square4();
        let v: Vec<u64> = (0..3)
            .map(|k| granulometric_volume(&sq, StructuringElement::Square3, k))
            .collect();
        assert_eq!(v, vec![16, 16, 0]);
        let empty = BinaryImage::empty(Grid::new(4, 4).unwrap());
        assert!((0..4).all(|k| granulometric_volume(&empty, StructuringElement::Cross3, k) == 0));
    }

    #[test]
    fn spectra() {
        let s = pattern_spectrum(&square4(), StructuringElement::Square3).unwrap();
        assert_eq!(s.density, vec![0.0, 1.0]);
        let s = pattern_spectrum(&pixel(), StructuringElement::Square3).unwrap();
        assert_eq!(s.density, vec![1.0]);
        let mixed = BinaryImage::from_ascii(&[
            "00000000", "01111000", "01111000", "01111000", "01111000", "00000000", "00000010",
            "00000000",
        ])
        .unwrap();
        let s = pattern_spectrum(&mixed, StructuringElement::Square3).unwrap();
        assert_eq!(s.volumes, vec![17, 16, 0]);
        assert!((s.density[0] - 1.0 / 17.0).abs() < 1e-15);
        assert!((s.density[1] - 16.0 / 17.0).abs() < 1e-15);
        assert!(matches!(
            pattern_spectrum(
                &BinaryImage::empty(Grid::new(3, 3).unwrap()),
                StructuringElement::Cross3
            ),
            Err(Error::UndefinedSpectrum)
        ));
    }

    #[test]
    fn spectrum_csv() {
        let csv = pattern_spectrum(&square4(), StructuringElement::Square3)
            .unwrap()
            .to_csv();
        assert_eq!(csv, "k,V,Xi,xi\n0,16,0,0\n1,16,0,1\n2,0,1,\n");
    }

    #[test]
    fn similarity_cases() {
        let sq = square4();
        assert_eq!(
            morphological_similarity(&sq, &sq, StructuringElement::Square3).unwrap(),
            1.0
        );
        let q = morphological_similarity(&sq, &pixel(), StructuringElement::Square3).unwrap();
        assert!((q - (-(2f64).sqrt()).exp()).abs() < 1e-12);
        assert!((q - 0.24312).abs() < 1e-5);
    }

    #[test]
    fn wang_cases() {
        let g = Grid::new(4, 1).unwrap();
        let f = Band::new(g, vec![0.1, 0.4, 0.6, 0.9]).unwrap();
        assert!((wang_fidelity(&f, &f).unwrap() - 1.0).abs() < 1e-12);
        // mirror about the mean: same mean and variance, perfectly anti-correlated
        let anti = Band::new(g, f.values().iter().map(|v| 1.0 - v).collect()).unwrap();
        assert!((wang_fidelity(&f, &anti).unwrap() + 1.0).abs() < 1e-12);
        let flat = Band::filled(g, 0.5).unwrap();
        assert_eq!(wang_fidelity(&flat, &f).unwrap(), 0.0);
        let zero = Band::filled(g, 0.0).unwrap();
        assert!(wang_fidelity(&zero, &zero).is_err());
    }

    #[test]
    fn binarize_cases() {
        let g = Grid::new(3, 1).unwrap();
        let b = Band::new(g, vec![0.39, 0.40, 0.41]).unwrap();
        assert_eq!(binarize(&b, 0.4).unwrap().bits(), &[false, true, true]);
        assert!(binarize(&b, 0.0).unwrap().bits().iter().all(|v| *v));
        assert!(binarize(&b, 0.411).unwrap().is_empty());
    }

    #[test]
    fn pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bin.pgm");
        square4().write_pgm(&p).unwrap();
        assert_eq!(BinaryImage::read_pgm(&p).unwrap(), square4());
    }

    fn random_image() -> impl Strategy<Value = BinaryImage> {
        proptest::collection::vec(proptest::bool::weighted(0.6), 12 * 10)
            .prop_map(|bits| BinaryImage::new(Grid::new(12, 10).unwrap(), bits).unwrap())
    }

    proptest! {
        #[test]
        fn erosion_matches_brute_force(img in random_image(), cross in any::<bool>()) {
            let se = SE[cross as usize];
            prop_assert_eq!(erode(&img, se), brute_erode(&img, se));
            prop_assert_eq!(erode_with(&img, se, Execution::Sequential), erode_with(&img, se, Execution::Parallel));
        }

        #[test]
        fn adjunction_sandwich(img in random_image(), cross in any::<bool>()) {
            let se = SE[cross as usize];
            prop_assert!(erode(&img, se).is_subset_of(&img));
            prop_assert!(img.is_subset_of(&dilate(&img, se)));
        }

        #[test]
        fn spectrum_is_a_distribution(img in random_image(), cross in any::<bool>()) {
            prop_assume!(!img.is_empty());
            let s = pattern_spectrum(&img, SE[cross as usize]).unwrap();
            prop_assert!(s.volumes.windows(2).all(|w| w[1] <= w[0]));
            prop_assert!(s.density.iter().all(|d| *d >= 0.0));
            prop_assert!((s.density.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert_eq!(*s.cumulative.last().unwrap(), 1.0);
        }
    }
}
