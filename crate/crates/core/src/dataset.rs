//! On-disk volumes: a directory of `slice{s:02}_band{i}.pgm` files plus `manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{LabelMap, MultispectralImage, Volume};
use crate::pgm::{self, BitDepth};

pub const MANIFEST: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub width: usize,
    pub height: usize,
    pub slices: usize,
    pub bands: usize,
    pub b_values: Vec<f64>,
    pub bit_depth: BitDepth,
    /// Whether `truth_slice{s:02}.pgm` label maps accompany the bands.
    #[serde(default)]
    pub has_truth: bool,
}

pub fn band_file_name(slice: usize, band: usize) -> String {
    format!("slice{slice:02}_band{band}.pgm")
}

pub fn truth_file_name(slice: usize) -> String {
    format!("truth_slice{slice:02}.pgm")
}

/// Writes every band of every slice, optional truth maps, and the manifest.
pub fn write_volume(
    dir: &Path,
    volume: &Volume,
    truth: Option<&[LabelMap]>,
    bit_depth: BitDepth,
) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (s, slice) in volume.slices().iter().enumerate() {
        for (i, band) in slice.bands().iter().enumerate() {
            pgm::write_band(band, &dir.join(band_file_name(s, i)), bit_depth)?;
        }
    }
    if let Some(maps) = truth {
        if maps.len() != volume.slice_count() {
            return Err(Error::DimensionMismatch(
                "one truth map per slice is required".into(),
            ));
        }
        for (s, map) in maps.iter().enumerate() {
            pgm::write_label_map(map, &dir.join(truth_file_name(s)))?;
        }
    }
    let grid = volume.grid();
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        width: grid.width,
        height: grid.height,
        slices: volume.slice_count(),
        bands: volume.slices()[0].band_count(),
        b_values: volume.b_values().to_vec(),
        bit_depth,
        has_truth: truth.is_some(),
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    pgm::write_atomic(&dir.join(MANIFEST), text.as_bytes())?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: Manifest = serde_json::from_str(&text)?;
    if m.version != MANIFEST_VERSION {
        return Err(Error::InvalidParameter(format!(
            "unsupported manifest version {}",
            m.version
        )));
    }
    Ok(m)
}

pub fn read_volume(dir: &Path) -> Result<(Manifest, Volume)> {
    let m = read_manifest(dir)?;
    let mut slices = Vec::with_capacity(m.slices);
    for s in 0..m.slices {
        let bands = (0..m.bands)
            .map(|i| pgm::read_band(&dir.join(band_file_name(s, i)), m.bit_depth))
            .collect::<Result<Vec<_>>>()?;
        if bands
            .iter()
            .any(|b| b.grid().width != m.width || b.grid().height != m.height)
        {
            return Err(Error::DimensionMismatch(format!(
                "slice {s} does not match manifest dimensions"
            )));
        }
        slices.push(MultispectralImage::stack(bands, m.b_values.clone())?);
    }
    Ok((m, Volume::new(slices)?))
}

/// Truth maps stored next to a volume, one per slice.
pub fn read_truth(dir: &Path, slices: usize) -> Result<Vec<LabelMap>> {
    (0..slices)
        .map(|s| pgm::read_label_map(&dir.join(truth_file_name(s))))
        .collect()
}

pub fn truth_paths(dir: &Path, slices: usize) -> Vec<PathBuf> {
    (0..slices).map(|s| dir.join(truth_file_name(s))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{default_brain_phantom, synthesize_phantom};

    #[test]
    fn volume_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = default_brain_phantom(32, 2).unwrap();
        let p = synthesize_phantom(&spec).unwrap();
        let m = write_volume(dir.path(), &p.volume, Some(&p.truth), BitDepth::Sixteen).unwrap();
        assert!(dir.path().join("slice01_band2.pgm").exists());
        let (m2, vol) = read_volume(dir.path()).unwrap();
        assert_eq!(m, m2);
        assert_eq!(vol.slice_count(), 2);
        let truth = read_truth(dir.path(), 2).unwrap();
        assert_eq!(truth[1].labels(), p.truth[1].labels());
        for (a, b) in vol.slices()[0].bands()[1]
            .values()
            .iter()
            .zip(p.volume.slices()[0].bands()[1].values())
        {
            assert!((a - b).abs() <= 0.5 / 65535.0);
        }
    }
}
