//! Synthetic diffusion-weighted phantoms with ground truth, and noise injection.
//!
//! Noiseless signal at a voxel of tissue τ in band i follows the mono-exponential
//! model `K · ρ_τ · exp(-TE / T2_τ) · exp(-b_i · D_τ)`, clamped to `[0, 1]`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{validate_b_values, Band, Grid, LabelMap, MultispectralImage, Volume};

/// Tissue parameters. `label` is the ground-truth class the tissue belongs to;
/// several tissues may share one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tissue {
    pub name: String,
    pub label: u32,
    /// Spin density, unitless in `[0, 1]`.
    pub rho: f64,
    /// Transverse relaxation time, ms.
    pub t2_ms: f64,
    /// Diffusion coefficient, mm²/s.
    pub d_mm2_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// Pixel `(x, y)` is inside when `((x-cx)/rx)² + ((y-cy)/ry)² <= 1`.
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64 },
    /// Half-open pixel rectangle `x0 <= x < x1`, `y0 <= y < y1`.
    Rectangle {
        x0: usize,
        y0: usize,
        x1: usize,
        y1: usize,
    },
}

impl Shape {
    fn contains(&self, x: usize, y: usize) -> bool {
        match *self {
            Shape::Ellipse { cx, cy, rx, ry } => {
                let dx = (x as f64 - cx) / rx;
                let dy = (y as f64 - cy) / ry;
                dx * dx + dy * dy <= 1.0
            }
            Shape::Rectangle { x0, y0, x1, y1 } => x >= x0 && x < x1 && y >= y0 && y < y1,
        }
    }

    fn fits(&self, grid: Grid) -> bool {
        let (w, h) = (grid.width as f64, grid.height as f64);
        match *self {
            Shape::Ellipse { cx, cy, rx, ry } => {
                rx > 0.0
                    && ry > 0.0
                    && cx - rx >= 0.0
                    && cy - ry >= 0.0
                    && cx + rx <= w
                    && cy + ry <= h
            }
            Shape::Rectangle { x0, y0, x1, y1 } => {
                x0 < x1 && y0 < y1 && x1 <= grid.width && y1 <= grid.height
            }
        }
    }
}

/// A geometry painted with one tissue over slices `z_start..z_end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub shape: Shape,
    pub z_start: usize,
    pub z_end: usize,
    pub tissue: usize,
}

/// Full phantom description. Tissue 0 fills every pixel no region covers;
/// later regions paint over earlier ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub grid: Grid,
    pub slice_count: usize,
    pub tissues: Vec<Tissue>,
    pub regions: Vec<Region>,
    /// Proportionality constant, unitless.
    pub k: f64,
    /// Echo time, ms.
    pub te_ms: f64,
    /// Diffusion exponents, s/mm².
    pub b_values: Vec<f64>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        Grid::new(self.grid.width, self.grid.height)?;
        if self.slice_count == 0 {
            return bad("slice_count must be positive".into());
        }
        if self.tissues.is_empty() {
            return bad("at least one tissue is required".into());
        }
        if !(0.0..=1.0).contains(&self.k) {
            return bad(format!("K = {} outside [0, 1]", self.k));
        }
        if !(self.te_ms >= 0.0) {
            return bad("TE must be nonnegative".into());
        }
        if !(self.noise_sigma >= 0.0) {
            return bad("noise_sigma must be nonnegative".into());
        }
        if self.b_values.is_empty() {
            return bad("at least one b-value is required".into());
        }
        validate_b_values(&self.b_values)?;
        for t in &self.tissues {
            if !(0.0..=1.0).contains(&t.rho) {
                return bad(format!("tissue {}: rho outside [0, 1]", t.name));
            }
            if !(t.t2_ms > 0.0) {
                return bad(format!("tissue {}: T2 must be positive", t.name));
            }
            if !(t.d_mm2_s >= 0.0) {
                return bad(format!("tissue {}: D must be nonnegative", t.name));
            }
        }
        for (i, r) in self.regions.iter().enumerate() {
            if r.tissue >= self.tissues.len() {
                return bad(format!("region {i}: unknown tissue {}", r.tissue));
            }
            if !r.shape.fits(self.grid) {
                return bad(format!("region {i}: geometry outside the grid"));
            }
            if r.z_start >= r.z_end || r.z_end > self.slice_count {
                return bad(format!(
                    "region {i}: bad z-range {}..{}",
                    r.z_start, r.z_end
                ));
            }
        }
        Ok(())
    }

    pub fn class_count(&self) -> u32 {
        self.tissues.iter().map(|t| t.label).max().unwrap_or(0) + 1
    }

    /// Noiseless signal of `tissue` in every band.
    pub fn tissue_signal(&self, tissue: usize) -> Vec<f64> {
        let t = &self.tissues[tissue];
        let amplitude = self.k * t.rho * (-self.te_ms / t.t2_ms).exp();
        self.b_values
            .iter()
            .map(|b| (amplitude * (-b * t.d_mm2_s).exp()).clamp(0.0, 1.0))
            .collect()
    }

    /// Tissue index per pixel of slice `z`.
    pub fn tissue_map(&self, z: usize) -> Vec<usize> {
        let g = self.grid;
        let mut out = vec![0usize; g.len()];
        for r in self
            .regions
            .iter()
            .filter(|r| (r.z_start..r.z_end).contains(&z))
        {
            for y in 0..g.height {
                for x in 0..g.width {
                    if r.shape.contains(x, y) {
                        out[g.index(x, y)] = r.tissue;
                    }
                }
            }
        }
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: PhantomSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Phantom volume with one ground-truth label map per slice.
#[derive(Debug, Clone)]
pub struct Phantom {
    pub volume: Volume,
    pub truth: Vec<LabelMap>,
}

/// Renders the phantom; noise (if any) is seeded per slice from `spec.seed`.
pub fn synthesize_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let signals: Vec<Vec<f64>> = (0..spec.tissues.len())
        .map(|t| spec.tissue_signal(t))
        .collect();
    let m = spec.class_count();
    let mut slices = Vec::with_capacity(spec.slice_count);
    let mut truth = Vec::with_capacity(spec.slice_count);
    for z in 0..spec.slice_count {
        let tissues = spec.tissue_map(z);
        let bands = (0..spec.b_values.len())
            .map(|i| Band::new(spec.grid, tissues.iter().map(|&t| signals[t][i]).collect()))
            .collect::<Result<Vec<_>>>()?;
        let image = MultispectralImage::stack(bands, spec.b_values.clone())?;
        let image = add_noise(&image, spec.noise_sigma, slice_seed(spec.seed, z));
        slices.push(image);
        let labels = tissues.iter().map(|&t| spec.tissues[t].label).collect();
        truth.push(LabelMap::new(spec.grid, labels, m)?);
    }
    Ok(Phantom {
        volume: Volume::new(slices)?,
        truth,
    })
}

/// Per-slice noise seed derived from the phantom seed.
pub fn slice_seed(seed: u64, slice: usize) -> u64 {
    seed ^ (slice as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Adds i.i.d. `N(0, sigma²)` to every sample and clamps to `[0, 1]`.
pub fn add_noise(image: &MultispectralImage, sigma: f64, seed: u64) -> MultispectralImage {
    if sigma <= 0.0 {
        return image.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma is positive and finite");
    let bands = image
        .bands()
        .iter()
        .map(|b| {
            let vals = b
                .values()
                .iter()
                .map(|v| v + normal.sample(&mut rng))
                .collect();
            Band::from_clamped(b.grid(), vals).expect("grid unchanged")
        })
        .collect();
    MultispectralImage::stack(bands, image.b_values().to_vec()).expect("structure unchanged")
}

/// Class labels used by [`default_brain_phantom`].
pub mod classes {
    pub const BACKGROUND: u32 = 0;
    pub const CSF: u32 = 1;
    pub const GRAY_MATTER: u32 = 2;
    pub const WHITE_MATTER: u32 = 3;
}

/// Nested-ellipse axial brain: background, skull ring, CSF rim, gray-matter
/// rim, white-matter core and CSF ventricles in the interior slices.
/// Cortical bone carries no signal and is labeled as background.
pub fn default_brain_phantom(size: usize, slices: usize) -> Result<PhantomSpec> {
    if size < 32 {
        return Err(Error::InvalidParameter(format!(
            "phantom size must be at least 32, got {size}"
        )));
    }
    if slices == 0 {
        return Err(Error::InvalidParameter(
            "slice count must be positive".into(),
        ));
    }
    let s = size as f64;
    let c = s / 2.0;
    let tissue = |name: &str, label, rho, t2_ms, d_mm2_s| Tissue {
        name: name.into(),
        label,
        rho,
        t2_ms,
        d_mm2_s,
    };
    let tissues = vec![
        tissue("background", classes::BACKGROUND, 0.0, 1.0, 0.0),
        tissue("skull", classes::BACKGROUND, 0.0, 40.0, 0.0001),
        tissue("csf", classes::CSF, 1.0, 2000.0, 0.003),
        tissue("gray_matter", classes::GRAY_MATTER, 0.85, 100.0, 0.0009),
        tissue("white_matter", classes::WHITE_MATTER, 0.7, 80.0, 0.0007),
    ];
    let ellipse = |rx: f64, ry: f64| Shape::Ellipse {
        cx: c,
        cy: c,
        rx: rx * s,
        ry: ry * s,
    };
    let all = |shape, tissue| Region {
        shape,
        z_start: 0,
        z_end: slices,
        tissue,
    };
    let (lo, hi) = if slices >= 3 {
        (slices / 4, slices - slices / 4)
    } else {
        (0, slices)
    };
    let interior = |shape, tissue| Region {
        shape,
        z_start: lo,
        z_end: hi,
        tissue,
    };
    let ventricle = |dx: f64| Shape::Ellipse {
        cx: c + dx * s,
        cy: c,
        rx: 0.045 * s,
        ry: 0.12 * s,
    };
    let regions = vec![
        all(ellipse(0.45, 0.48), 1),
        all(ellipse(0.40, 0.43), 2),
        all(ellipse(0.37, 0.40), 3),
        all(ellipse(0.22, 0.25), 4),
        interior(ellipse(0.27, 0.30), 4),
        interior(ventricle(-0.08), 2),
        interior(ventricle(0.08), 2),
    ];
    Ok(PhantomSpec {
        grid: Grid::new(size, size)?,
        slice_count: slices,
        tissues,
        regions,
        k: 1.0,
        te_ms: 90.0,
        b_values: vec![0.0, 500.0, 1000.0],
        noise_sigma: 0.0,
        seed: 1,
    })
}
