//! Rasterize beat segments into 128×128 grayscale images and read/write
//! them as binary PGM (`P5`), the project's canonical image format.

use std::fs;

use std::path::Path;

use thiserror::Error;

use crate::segment::BeatSegment;
use crate::Label;

/// Pipeline image side length.
pub const IMAGE_SIZE: usize = 128;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("segment too short: {0} samples, need at least {IMAGE_SIZE}")]
    SegmentTooShort(usize),
    #[error("malformed pgm: {0}")]
    MalformedPgm(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Grayscale raster with class label and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct EcgImage {
    pub width: usize,
    pub height: usize,
    /// Row-major intensities, `height × width`.
    pub pixels: Vec<u8>,
    pub label: Label,
    pub provenance: String,
}

impl EcgImage {
    pub fn new(width: usize, height: usize, label: Label, provenance: String) -> EcgImage {
        EcgImage {
            width,
            height,
            pixels: vec![0; width * height],
            label,
            provenance,
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: u8) {
        self.pixels[row * self.width + col] = v;
    }
}

/// Render a segment as a 128×128 white-on-black trace.
///
/// Amplitude is min–max normalized: `row(v) = round((v_max − v) /
/// (v_max − v_min) × 127)` (row 0 = maximum, top); a constant segment maps
/// to row 64. Time: `column(t) = floor(t × 128 / L)`. Within each column
/// the span between that column's min and max rows is filled at 255, and
/// consecutive columns are joined by filling the vertical gap between
/// their adjacent endpoint rows.
pub fn render(segment: &BeatSegment) -> Result<EcgImage, RasterError> {
    let samples = &segment.samples;
    let len = samples.len();
    if len < IMAGE_SIZE {
        return Err(RasterError::SegmentTooShort(len));
    }
    let v_min = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let v_max = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let flat = v_max == v_min;
    let row_of = |v: f64| -> usize {
        if flat {
            64
        } else {
            ((v_max - v) / (v_max - v_min) * 127.0).round() as usize
        }
    };

    let provenance = format!("{}:{}", segment.source_record, segment.start_index);
    let mut img = EcgImage::new(IMAGE_SIZE, IMAGE_SIZE, segment.label, provenance);

    // Per column: min/max row over its samples, plus first/last sample rows
    // for joining to the neighbors.
    let mut spans = vec![(usize::MAX, 0usize, 0usize, 0usize); IMAGE_SIZE];
    for (t, &v) in samples.iter().enumerate() {
        let col = t * IMAGE_SIZE / len;
        let row = row_of(v);
        let (lo, hi, first, last) = &mut spans[col];
        if *lo == usize::MAX {
            *first = row;
        }
        *lo = (*lo).min(row);
        *hi = (*hi).max(row);
        *last = row;
    }

    for (col, &(lo, hi, _, _)) in spans.iter().enumerate() {
        if lo == usize::MAX {
            continue; // cannot happen for len >= 128, kept for safety
        }
        for row in lo..=hi {
            img.set(row, col, 255);
        }
    }
    // Join adjacent columns through the endpoint rows.
    for col in 1..IMAGE_SIZE {
        let prev_last = spans[col - 1].3;
        let cur_first = spans[col].2;
        let (a, b) = (prev_last.min(cur_first), prev_last.max(cur_first));
        for row in a..=b {
            img.set(row, col, 255);
        }
    }
    Ok(img)
}

/// Write binary PGM: `P5\n<w> <h>\n255\n` followed by row-major bytes.
pub fn write_pgm(image: &EcgImage, dest: &mut dyn std::io::Write) -> Result<(), RasterError> {
    write!(dest, "P5\n{} {}\n255\n", image.width, image.height)?;
    dest.write_all(&image.pixels)?;
    Ok(())
}

/// Read a binary PGM written by [`write_pgm`] (whitespace and `#` comments
/// tolerated in the header).
pub fn read_pgm(bytes: &[u8], label: Label, provenance: String) -> Result<EcgImage, RasterError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(RasterError::MalformedPgm(format!(
            "wrong magic {:?}",
            String::from_utf8_lossy(&bytes[..bytes.len().min(2)])
        )));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // Skip whitespace and comments.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(RasterError::MalformedPgm("truncated header".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|e| RasterError::MalformedPgm(format!("bad header field: {e}")))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(RasterError::MalformedPgm(format!("maxval {maxval} != 255")));
    }
    if width == 0 || height == 0 {
        return Err(RasterError::MalformedPgm("zero dimension".into()));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(RasterError::MalformedPgm("missing raster separator".into()));
    }
    pos += 1;
    let n = width * height;
    if bytes.len() < pos + n {
        return Err(RasterError::MalformedPgm(format!(
            "raster truncated: need {n} bytes, got {}",
            bytes.len() - pos
        )));
    }
    Ok(EcgImage {
        width,
        height,
        pixels: bytes[pos..pos + n].to_vec(),
        label,
        provenance,
    })
}

/// Write an image set to `dir`: `img<i>.pgm` files plus an `index.tsv` of
/// `file<TAB>label<TAB>provenance` lines.
pub fn write_image_set(dir: &Path, images: &[EcgImage]) -> Result<(), RasterError> {
    fs::create_dir_all(dir)?;
    let mut index = String::new();
    for (i, img) in images.iter().enumerate() {
        let name = format!("img{i:06}.pgm");
        let mut f = fs::File::create(dir.join(&name))?;
        write_pgm(img, &mut f)?;
        index.push_str(&format!("{name}\t{}\t{}\n", img.label.as_str(), img.provenance));
    }
    fs::write(dir.join("index.tsv"), index)?;
    Ok(())
}

/// Read an image set written by [`write_image_set`].
pub fn read_image_set(dir: &Path) -> Result<Vec<EcgImage>, RasterError> {
    let index = fs::read_to_string(dir.join("index.tsv"))?;
    let mut images = Vec::new();
    for line in index.lines() {
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 3 {
            return Err(RasterError::MalformedPgm(format!("bad index line {line:?}")));
        }
        let label = Label::from_str_loose(parts[1])
            .ok_or_else(|| RasterError::MalformedPgm(format!("bad label {:?}", parts[1])))?;
        let bytes = fs::read(dir.join(parts[0]))?;
        images.push(read_pgm(&bytes, label, parts[2].to_string())?);
    }
    Ok(images)
}
