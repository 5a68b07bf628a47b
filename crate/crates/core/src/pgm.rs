//! Binary PGM (P5) encoding for bands and label maps.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Band, Grid, LabelMap};

/// Sample depth of a PGM file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum BitDepth {
    #[default]
    #[serde(rename = "8")]
    Eight,
    #[serde(rename = "16")]
    Sixteen,
}

impl BitDepth {
    pub fn maxval(self) -> u32 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }

    pub fn from_bits(bits: u32) -> Result<Self> {
        match bits {
            8 => Ok(BitDepth::Eight),
            16 => Ok(BitDepth::Sixteen),
            other => Err(Error::InvalidParameter(format!(
                "bit depth must be 8 or 16, got {other}"
            ))),
        }
    }
}

/// Raw decoded P5 raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PgmRaster {
    pub grid: Grid,
    pub maxval: u32,
    pub samples: Vec<u16>,
}

fn next_token<'a>(data: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < data.len() && data[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < data.len() && data[*pos] == b'#' {
            while *pos < data.len() && data[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < data.len() && !data[*pos].is_ascii_whitespace() && data[*pos] != b'#' {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::MalformedHeader("unexpected end of header".into()));
    }
    Ok(&data[start..*pos])
}

fn parse_number(tok: &[u8], what: &str) -> Result<usize> {
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .ok_or_else(|| Error::MalformedHeader(format!("bad {what}")))
}

/// Decodes a P5 byte stream.
pub fn decode(data: &[u8]) -> Result<PgmRaster> {
    let mut pos = 0;
    let magic = next_token(data, &mut pos)?;
    if magic != b"P5" {
        return Err(Error::MalformedHeader(format!(
            "unsupported magic {:?}",
            String::from_utf8_lossy(magic)
        )));
    }
    let width = parse_number(next_token(data, &mut pos)?, "width")?;
    let height = parse_number(next_token(data, &mut pos)?, "height")?;
    let maxval = parse_number(next_token(data, &mut pos)?, "maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::MalformedHeader(format!(
            "maxval {maxval} out of range"
        )));
    }
    let grid = Grid::new(width, height).map_err(|e| Error::MalformedHeader(e.to_string()))?;
    // exactly one whitespace byte separates header and raster
    if pos >= data.len() || !data[pos].is_ascii_whitespace() {
        return Err(Error::MalformedHeader("missing raster separator".into()));
    }
    pos += 1;
    let bytes_per = if maxval < 256 { 1 } else { 2 };
    let expected = grid.len() * bytes_per;
    let payload = &data[pos..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::DimensionMismatch(format!(
            "payload has {} bytes, header declares {expected}",
            payload.len()
        )));
    }
    let samples = if bytes_per == 1 {
        payload.iter().map(|&b| b as u16).collect()
    } else {
        payload
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    Ok(PgmRaster {
        grid,
        maxval: maxval as u32,
        samples,
    })
}

/// Encodes samples as a P5 byte stream.
pub fn encode(raster: &PgmRaster) -> Vec<u8> {
    let mut out = format!(
        "P5\n{} {}\n{}\n",
        raster.grid.width, raster.grid.height, raster.maxval
    )
    .into_bytes();
    if raster.maxval < 256 {
        out.extend(raster.samples.iter().map(|&s| s as u8));
    } else {
        for s in &raster.samples {
            out.extend_from_slice(&s.to_be_bytes());
        }
    }
    out
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParameter(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn read_raster(path: &Path) -> Result<PgmRaster> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&data)
}

/// Quantizes `v ∈ [0,1]` with round-half-up.
pub fn quantize(v: f64, maxval: u32) -> u16 {
    let m = maxval as f64;
    (v.clamp(0.0, 1.0) * m + 0.5).floor().min(m) as u16
}

/// Band from a P5 byte stream whose maxval must match `bit_depth`.
pub fn decode_band(data: &[u8], bit_depth: BitDepth) -> Result<Band> {
    let raster = decode(data)?;
    if raster.maxval != bit_depth.maxval() {
        return Err(Error::MalformedHeader(format!(
            "maxval {} does not match requested bit depth (maxval {})",
            raster.maxval,
            bit_depth.maxval()
        )));
    }
    let m = raster.maxval as f64;
    let values = raster.samples.iter().map(|&s| s as f64 / m).collect();
    Band::new(raster.grid, values)
}

pub fn encode_band(band: &Band, bit_depth: BitDepth) -> Vec<u8> {
    let maxval = bit_depth.maxval();
    encode(&PgmRaster {
        grid: band.grid(),
        maxval,
        samples: band.values().iter().map(|&v| quantize(v, maxval)).collect(),
    })
}

/// Reads a P5 file into a band scaled by `1 / maxval`.
pub fn read_band(path: &Path, bit_depth: BitDepth) -> Result<Band> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_band(&data, bit_depth)
}

/// Writes a band as P5, encoding `v` as `round(v * maxval)`.
pub fn write_band(band: &Band, path: &Path, bit_depth: BitDepth) -> Result<()> {
    write_atomic(path, &encode_band(band, bit_depth))
}

/// Label maps are stored as raw 8-bit indices with maxval 255.
pub fn write_label_map(map: &LabelMap, path: &Path) -> Result<()> {
    if map.class_count() > 256 {
        return Err(Error::InvalidParameter(format!(
            "{} classes do not fit 8-bit label storage",
            map.class_count()
        )));
    }
    let raster = PgmRaster {
        grid: map.grid(),
        maxval: 255,
        samples: map.labels().iter().map(|&l| l as u16).collect(),
    };
    write_atomic(path, &encode(&raster))
}

pub fn read_label_map(path: &Path) -> Result<LabelMap> {
    let raster = read_raster(path)?;
    if raster.maxval != 255 {
        return Err(Error::MalformedHeader(
            "label maps must be 8-bit (maxval 255)".into(),
        ));
    }
    LabelMap::from_labels(
        raster.grid,
        raster.samples.iter().map(|&s| s as u32).collect(),
    )
}
