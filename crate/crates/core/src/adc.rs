//! Apparent diffusion coefficient maps.
//!
//! `raw(u) = Σ_{i≥2} (C / b_i) · ln(max(f_1(u), ε) / max(f_i(u), ε))`, with the first
//! band as the `b = 0` reference. For ideal mono-exponential data this sums
//! `n - 1` independent estimates of `D`, so three bands give `2·C·D`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::image::{Band, MultispectralImage};
use crate::phantom::{add_noise, synthesize_phantom, PhantomSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdcConfig {
    /// Proportionality constant `C`.
    pub c: f64,
    /// Floor applied to band values before taking logarithms.
    pub epsilon: f64,
    /// Raw ADC value that maps to 1.0 in the stored band.
    pub output_scale: f64,
}

impl Default for AdcConfig {
    fn default() -> Self {
        AdcConfig {
            c: 1.0,
            epsilon: 1.0 / 65535.0,
            output_scale: 0.008,
        }
    }
}

impl AdcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(Error::InvalidParameter("C must be positive".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter("epsilon must lie in (0, 1)".into()));
        }
        if !(self.output_scale > 0.0) {
            return Err(Error::InvalidParameter(
                "output_scale must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn check_image(image: &MultispectralImage) -> Result<()> {
    if image.band_count() < 2 {
        return Err(Error::InvalidParameter(
            "ADC needs a reference band and at least one weighted band".into(),
        ));
    }
    let b = image.b_values();
    if b[0] != 0.0 {
        return Err(Error::InvalidParameter("first b-value must be 0".into()));
    }
    if b[1..].iter().any(|v| *v <= 0.0) {
        return Err(Error::InvalidParameter(
            "weighted bands need positive b-values".into(),
        ));
    }
    Ok(())
}

/// Unscaled ADC per pixel.
pub fn compute_adc_raw(
    image: &MultispectralImage,
    cfg: &AdcConfig,
    exec: Execution,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    check_image(image)?;
    let bands = image.bands();
    let b = image.b_values();
    let eps = cfg.epsilon;
    Ok(exec.map_range(image.pixel_count(), |u| {
        let reference = bands[0].values()[u].max(eps);
        bands[1..]
            .iter()
            .zip(&b[1..])
            .map(|(band, bi)| cfg.c / bi * (reference / band.values()[u].max(eps)).ln())
            .sum()
    }))
}

/// ADC band: `clamp(raw / output_scale, 0, 1)`.
pub fn compute_adc(image: &MultispectralImage, cfg: &AdcConfig) -> Result<Band> {
    compute_adc_with(image, cfg, Execution::default())
}

pub fn compute_adc_with(
    image: &MultispectralImage,
    cfg: &AdcConfig,
    exec: Execution,
) -> Result<Band> {
    let raw = compute_adc_raw(image, cfg, exec)?;
    Band::from_clamped(
        image.grid(),
        raw.into_iter().map(|r| r / cfg.output_scale).collect(),
    )
}

/// ADC maps of one phantom slice before and after noise.
#[derive(Debug, Clone)]
pub struct AdcArtifact {
    pub noiseless: Band,
    pub noisy: Band,
    /// Pixels whose tissue carries no signal (`ρ = 0`).
    pub background: Vec<bool>,
}

impl AdcArtifact {
    fn background_mean(&self, band: &Band) -> f64 {
        let (sum, n) = band
            .values()
            .iter()
            .zip(&self.background)
            .filter(|(_, bg)| **bg)
            .fold((0.0, 0usize), |(s, n), (v, _)| (s + v.abs(), n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    pub fn background_mean_noiseless(&self) -> f64 {
        self.background_mean(&self.noiseless)
    }

    pub fn background_mean_noisy(&self) -> f64 {
        self.background_mean(&self.noisy)
    }
}

/// Shows how noise turns empty background into apparent diffusion.
/// Uses the middle slice of the phantom with the default [`AdcConfig`].
pub fn adc_artifact_demo(spec: &PhantomSpec, sigma: f64, seed: u64) -> Result<AdcArtifact> {
    let mut clean_spec = spec.clone();
    clean_spec.noise_sigma = 0.0;
    let z = spec.slice_count / 2;
    let background: Vec<bool> = clean_spec
        .tissue_map(z)
        .iter()
        .map(|&t| clean_spec.tissues[t].rho == 0.0)
        .collect();
    if !background.iter().any(|b| *b) {
        return Err(Error::InvalidParameter(
            "phantom needs a zero-density background region".into(),
        ));
    }
    let phantom = synthesize_phantom(&clean_spec)?;
    let clean = &phantom.volume.slices()[z];
    let noisy = add_noise(clean, sigma, seed);
    let cfg = AdcConfig::default();
    Ok(AdcArtifact {
        noiseless: compute_adc(clean, &cfg)?,
        noisy: compute_adc(&noisy, &cfg)?,
        background,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Grid;
    use crate::phantom::default_brain_phantom;

    fn image(vals: &[f64], b: &[f64]) -> MultispectralImage {
        let g = Grid::new(1, 1).unwrap();
        let bands = vals.iter().map(|v| Band::filled(g, *v).unwrap()).collect();
        MultispectralImage::stack(bands, b.to_vec()).unwrap()
    }

    #[test]
    fn identical_bands_give_zero() {
        let img = image(&[0.4, 0.4, 0.4], &[0.0, 500.0, 1000.0]);
        let raw = compute_adc_raw(&img, &AdcConfig::default(), Execution::Sequential).unwrap();
        assert_eq!(raw, vec![0.0]);
    }

    #[test]
    fn hand_evaluated_three_band() {
        let img = image(
            &[1.0, (-1.5f64).exp(), (-3.0f64).exp()],
            &[0.0, 500.0, 1000.0],
        );
        let raw = compute_adc_raw(&img, &AdcConfig::default(), Execution::Sequential).unwrap();
        assert!((raw[0] - 0.006).abs() < 1e-15);
    }

    #[test]
    fn zero_band_is_clamped() {
        let img = image(&[1.0, 0.0], &[0.0, 500.0]);
        let raw = compute_adc_raw(&img, &AdcConfig::default(), Execution::Sequential).unwrap();
        assert!((raw[0] - 65535f64.ln() / 500.0).abs() < 1e-15);
        assert!(raw[0].is_finite());
    }

    #[test]
    fn scale_consistency() {
        let img = image(&[0.9, 0.5, 0.3], &[0.0, 500.0, 1000.0]);
        let base = compute_adc_raw(&img, &AdcConfig::default(), Execution::Sequential).unwrap()[0];
        let cfg = AdcConfig {
            c: 3.0,
            ..AdcConfig::default()
        };
        let scaled = compute_adc_raw(&img, &cfg, Execution::Sequential).unwrap()[0];
        assert!((scaled - 3.0 * base).abs() < 1e-15);
    }

    #[test]
    fn preconditions() {
        let cfg = AdcConfig::default();
        assert!(compute_adc(&image(&[0.5], &[0.0]), &cfg).is_err());
        assert!(compute_adc(&image(&[0.5, 0.4], &[100.0, 500.0]), &cfg).is_err());
        let bad = AdcConfig {
            epsilon: 0.0,
            ..cfg
        };
        assert!(compute_adc(&image(&[0.5, 0.4], &[0.0, 500.0]), &bad).is_err());
    }

    #[test]
    fn artifact_demo_noiseless_background_is_zero() {
        let spec = default_brain_phantom(64, 3).unwrap();
        let demo = adc_artifact_demo(&spec, 0.0, 1).unwrap();
        assert_eq!(demo.background_mean_noiseless(), 0.0);
        assert_eq!(demo.background_mean_noisy(), 0.0);
    }

    #[test]
    fn artifact_demo_noise_creates_background_signal() {
        let spec = default_brain_phantom(64, 3).unwrap();
        let a = adc_artifact_demo(&spec, 0.05, 1).unwrap();
        let b = adc_artifact_demo(&spec, 0.05, 2).unwrap();
        assert!(a.background_mean_noisy() > a.background_mean_noiseless());
        assert_ne!(a.noisy, b.noisy);
        let (ma, mb) = (a.background_mean_noisy(), b.background_mean_noisy());
        assert!((ma - mb).abs() / ma.max(mb) < 0.2, "{ma} vs {mb}");
    }
}
