//! Binary PGM (`P5`) images.
//!
//! Writing always produces 16-bit big-endian samples with maxval 65535.
//! Reading also accepts 8-bit files (maxval below 256).

use std::fs;
use std::path::Path;

use cmc_core::{BoundaryMap, LabelImage, Raster};

use crate::error::{Error, Result, Stage};

pub const MAXVAL: u16 = u16::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: u32,
    pub height: u32,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

impl Pgm {
    pub fn decode(bytes: &[u8]) -> Result<Self, String> {
        let mut pos = 0;
        let mut token = || -> Result<&[u8], String> {
            loop {
                match bytes.get(pos) {
                    Some(b'#') => {
                        while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                            pos += 1;
                        }
                    }
                    Some(b) if b.is_ascii_whitespace() => pos += 1,
                    Some(_) => break,
                    None => return Err("truncated header".into()),
                }
            }
            let start = pos;
            while bytes.get(pos).is_some_and(|b| !b.is_ascii_whitespace()) {
                pos += 1;
            }
            Ok(&bytes[start..pos])
        };
        if token()? != b"P5" {
            return Err("not a binary PGM (expected P5)".into());
        }
        let mut number = |what: &str| -> Result<u32, String> {
            let t = token()?;
            std::str::from_utf8(t)
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| format!("bad {what}"))
        };
        let width = number("width")?;
        let height = number("height")?;
        let maxval = number("maxval")?;
        if maxval == 0 || maxval > 65535 {
            return Err(format!("maxval {maxval} out of range"));
        }
        // exactly one whitespace byte separates the header from the samples
        pos += 1;
        let n = width as usize * height as usize;
        let wide = maxval > 255;
        let need = if wide { 2 * n } else { n };
        let data = bytes.get(pos..).unwrap_or(&[]);
        if data.len() < need {
            return Err(format!(
                "expected {need} bytes of samples, found {}",
                data.len()
            ));
        }
        let samples: Vec<u16> = if wide {
            data[..need]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]))
                .collect()
        } else {
            data[..need].iter().map(|&b| b as u16).collect()
        };
        if let Some(s) = samples.iter().find(|&&s| s as u32 > maxval) {
            return Err(format!("sample {s} exceeds maxval {maxval}"));
        }
        Ok(Pgm {
            width,
            height,
            maxval: maxval as u16,
            samples,
        })
    }

    /// 16-bit encoding; `maxval` is written as stored.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, self.maxval).into_bytes();
        out.reserve(self.samples.len() * 2);
        if self.maxval > 255 {
            for s in &self.samples {
                out.extend_from_slice(&s.to_be_bytes());
            }
        } else {
            out.extend(self.samples.iter().map(|&s| s as u8));
        }
        out
    }

    pub fn read(path: &Path, stage: Stage) -> Result<Self> {
        let bytes = fs::read(path).map_err(|source| Error::Io {
            stage,
            path: path.into(),
            source,
        })?;
        Pgm::decode(&bytes).map_err(|message| Error::Format {
            stage,
            path: path.into(),
            message,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()).map_err(|source| Error::Io {
            stage: Stage::Output,
            path: path.into(),
            source,
        })
    }
}

pub fn labels_to_pgm(img: &LabelImage) -> Result<Pgm, String> {
    let samples = img
        .as_slice()
        .iter()
        .map(|&l| u16::try_from(l).map_err(|_| format!("label {l} does not fit in 16 bits")))
        .collect::<Result<_, _>>()?;
    Ok(Pgm {
        width: img.width(),
        height: img.height(),
        maxval: MAXVAL,
        samples,
    })
}

pub fn pgm_to_labels(pgm: &Pgm) -> LabelImage {
    let labels = pgm.samples.iter().map(|&s| s as u32).collect();
    LabelImage::new(pgm.width, pgm.height, labels).expect("sample count matches the header")
}

/// Values in `[0, 1]` scaled to `0..=65535` and rounded.
pub fn raster_to_pgm(img: &Raster) -> Pgm {
    let samples = img
        .as_slice()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * MAXVAL as f64).round() as u16)
        .collect();
    Pgm {
        width: img.width(),
        height: img.height(),
        maxval: MAXVAL,
        samples,
    }
}

/// Samples divided by the file's maxval.
pub fn pgm_to_raster(pgm: &Pgm) -> Raster {
    let scale = pgm.maxval as f64;
    let values = pgm.samples.iter().map(|&s| s as f64 / scale).collect();
    Raster::new_unit(pgm.width, pgm.height, values).expect("samples are within maxval")
}

pub fn read_labels(path: &Path, stage: Stage) -> Result<LabelImage> {
    Ok(pgm_to_labels(&Pgm::read(path, stage)?))
}

pub fn write_labels(path: &Path, img: &LabelImage) -> Result<()> {
    let pgm = labels_to_pgm(img).map_err(|message| Error::Format {
        stage: Stage::Output,
        path: path.into(),
        message,
    })?;
    pgm.write(path)
}

pub fn read_raster(path: &Path, stage: Stage) -> Result<BoundaryMap> {
    Ok(pgm_to_raster(&Pgm::read(path, stage)?))
}

pub fn write_raster(path: &Path, img: &Raster) -> Result<()> {
    raster_to_pgm(img).write(path)
}
