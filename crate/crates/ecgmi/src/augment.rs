//! Nine-crop data augmentation: nine 75%-size sub-images on a 3×3 offset
//! grid, each resized back to 128×128 by bilinear interpolation, growing
//! the dataset tenfold (originals included).

use thiserror::Error;

use crate::raster::EcgImage;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("wrong dimensions: {width}x{height}, expected square with side a positive multiple of 8")]
    WrongDimensions { width: usize, height: usize },
}

/// Crop side: 75% of 128.
pub const CROP_SIZE: usize = 96;

/// Top-left (row, col) origins of the nine crops: four corners, center,
/// left/right center, top/bottom center.
pub const CROP_ORIGINS: [(usize, usize); 9] = [
    (0, 0),
    (0, 32),
    (32, 0),
    (32, 32),
    (16, 16),
    (16, 0),
    (16, 32),
    (0, 16),
    (32, 16),
];

/// Bilinear resize with corner-aligned mapping `src = dst × (sw−1)/(dw−1)`,
/// rounded to the nearest integer intensity.
pub fn resize_bilinear(img: &EcgImage, dst_w: usize, dst_h: usize) -> EcgImage {
    let mut out = EcgImage::new(dst_w, dst_h, img.label, img.provenance.clone());
    let sx = (img.width - 1) as f64 / (dst_w - 1) as f64;
    let sy = (img.height - 1) as f64 / (dst_h - 1) as f64;
    for r in 0..dst_h {
        let fy = r as f64 * sy;
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(img.height - 1);
        let wy = fy - y0 as f64;
        for c in 0..dst_w {
            let fx = c as f64 * sx;
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(img.width - 1);
            let wx = fx - x0 as f64;
            let top = img.get(y0, x0) as f64 * (1.0 - wx) + img.get(y0, x1) as f64 * wx;
            let bot = img.get(y1, x0) as f64 * (1.0 - wx) + img.get(y1, x1) as f64 * wx;
            let v = top * (1.0 - wy) + bot * wy;
            out.set(r, c, v.round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}

fn crop(img: &EcgImage, origin: (usize, usize), size: usize) -> EcgImage {
    let mut out = EcgImage::new(size, size, img.label, img.provenance.clone());
    for r in 0..size {
        for c in 0..size {
            out.set(r, c, img.get(origin.0 + r, origin.1 + c));
        }
    }
    out
}

/// Produce the nine 75%-side crops of a square image, each resized back
/// to the original side. For 128×128 inputs this is exactly the 96×96
/// crop family on the {0, 16, 32}² origin grid; smaller square sides (a
/// multiple of 8, e.g. 32 for scaled-down runs) use the same geometry
/// proportionally. Labels and provenance propagate.
pub fn nine_crops(image: &EcgImage) -> Result<Vec<EcgImage>, AugmentError> {
    let side = image.width;
    if image.height != side || side == 0 || side % 8 != 0 {
        return Err(AugmentError::WrongDimensions {
            width: image.width,
            height: image.height,
        });
    }
    let crop_size = side * 3 / 4;
    let m = side - crop_size;
    let origins = [
        (0, 0),
        (0, m),
        (m, 0),
        (m, m),
        (m / 2, m / 2),
        (m / 2, 0),
        (m / 2, m),
        (0, m / 2),
        (m, m / 2),
    ];
    Ok(origins
        .iter()
        .map(|&origin| resize_bilinear(&crop(image, origin, crop_size), side, side))
        .collect())
}

/// Augment a dataset: each original followed by its nine crops, in input
/// order — exactly 10× the input length. Disabled → identity.
pub fn augment_dataset(images: &[EcgImage], enabled: bool) -> Result<Vec<EcgImage>, AugmentError> {
    if !enabled {
        return Ok(images.to_vec());
    }
    let mut out = Vec::with_capacity(10 * images.len());
    for img in images {
        out.push(img.clone());
        out.extend(nine_crops(img)?);
    }
    Ok(out)
}
