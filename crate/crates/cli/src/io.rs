//! File formats.
//!
//! `COROSA-F64`: ASCII header line `COROSA-F64 <width> <height>` then little-endian
//! `f64` samples, row-major. `COROSA-C64` has the same layout with interleaved
//! real and imaginary parts. Grayscale PGM/PNG images are read as `[0, 1]`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use corosa::{ComplexImage, Image};
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, GrayImage, ImageEncoder, ImageReader};
use num_complex::Complex64;

use crate::error::{CliError, CliResult};

const F64_MAGIC: &str = "COROSA-F64";
const C64_MAGIC: &str = "COROSA-C64";

fn header(bytes: &[u8], magic: &str) -> Result<(usize, usize, usize), String> {
    let end = bytes.iter().position(|&b| b == b'\n').ok_or("missing header line")?;
    let line = std::str::from_utf8(&bytes[..end]).map_err(|_| "header is not ASCII")?;
    let mut parts = line.split_whitespace();
    if parts.next() != Some(magic) {
        return Err(format!("expected a {magic} header"));
    }
    let mut dim = || -> Result<usize, String> {
        parts
            .next()
            .and_then(|v| v.parse().ok())
            .filter(|&v: &usize| v > 0)
            .ok_or_else(|| "bad dimensions in header".to_string())
    };
    let (w, h) = (dim()?, dim()?);
    Ok((w, h, end + 1))
}

fn samples(body: &[u8], count: usize) -> Result<Vec<f64>, String> {
    if body.len() != count * 8 {
        return Err(format!("expected {} payload bytes, found {}", count * 8, body.len()));
    }
    Ok(body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

pub fn encode_f64(img: &Image) -> Vec<u8> {
    let mut out = format!("{F64_MAGIC} {} {}\n", img.width(), img.height()).into_bytes();
    for v in img.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_f64(bytes: &[u8]) -> Result<Image, String> {
    let (w, h, start) = header(bytes, F64_MAGIC)?;
    Image::new(w, h, samples(&bytes[start..], w * h)?).map_err(|e| e.to_string())
}

pub fn encode_c64(img: &ComplexImage) -> Vec<u8> {
    let mut out = format!("{C64_MAGIC} {} {}\n", img.width(), img.height()).into_bytes();
    for c in img.data() {
        out.extend_from_slice(&c.re.to_le_bytes());
        out.extend_from_slice(&c.im.to_le_bytes());
    }
    out
}

pub fn decode_c64(bytes: &[u8]) -> Result<ComplexImage, String> {
    let (w, h, start) = header(bytes, C64_MAGIC)?;
    let flat = samples(&bytes[start..], 2 * w * h)?;
    let data = flat.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
    ComplexImage::new(w, h, data).map_err(|e| e.to_string())
}

fn is_raw(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("f64"))
}

/// Reads a real image: `COROSA-F64` for `.f64` paths, otherwise a grayscale
/// PGM/PNG normalized by its bit depth.
pub fn read_image(path: &Path) -> CliResult<Image> {
    if is_raw(path) {
        let bytes = fs::read(path).map_err(|e| CliError::input(path, e))?;
        return decode_f64(&bytes).map_err(|e| CliError::input(path, e));
    }
    let dynamic = ImageReader::open(path)
        .and_then(|r| r.with_guessed_format())
        .map_err(|e| CliError::input(path, e))?
        .decode()
        .map_err(|e| CliError::input(path, e))?;
    let gray = dynamic.into_luma16();
    let (w, h) = gray.dimensions();
    let data = gray.into_raw().into_iter().map(|v| f64::from(v) / 65535.0).collect();
    Image::new(w as usize, h as usize, data).map_err(|e| CliError::input(path, e))
}

pub fn read_complex(path: &Path) -> CliResult<ComplexImage> {
    let bytes = fs::read(path).map_err(|e| CliError::input(path, e))?;
    decode_c64(&bytes).map_err(|e| CliError::input(path, e))
}

/// Binary mask from an 8-bit image; samples above mid-gray are kept.
pub fn read_mask(path: &Path) -> CliResult<Image> {
    let img = read_image(path)?;
    Ok(img.map(|v| if v > 0.5 { 1.0 } else { 0.0 }))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let file = fs::File::create(path).map_err(|e| CliError::output(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(bytes).and_then(|_| w.flush()).map_err(|e| CliError::output(path, e))
}

pub fn write_f64(path: &Path, img: &Image) -> CliResult<()> {
    write_bytes(path, &encode_f64(img))
}

pub fn write_c64(path: &Path, img: &ComplexImage) -> CliResult<()> {
    write_bytes(path, &encode_c64(img))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    write_bytes(path, text.as_bytes())
}

fn to_gray8(img: &Image, lo: f64, hi: f64) -> GrayImage {
    let span = if hi > lo { hi - lo } else { 1.0 };
    let px = img
        .data()
        .iter()
        .map(|&v| (((v - lo) / span).clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    GrayImage::from_raw(img.width() as u32, img.height() as u32, px).expect("buffer size")
}

/// 8-bit PNG preview mapping `[lo, hi]` to the full gray range.
pub fn write_png(path: &Path, img: &Image, lo: f64, hi: f64) -> CliResult<()> {
    to_gray8(img, lo, hi).save(path).map_err(|e| CliError::output(path, e))
}

/// Mask as an 8-bit PGM with values 0 and 255.
pub fn write_mask(path: &Path, mask: &Image) -> CliResult<()> {
    let gray = to_gray8(mask, 0.0, 1.0);
    let file = fs::File::create(path).map_err(|e| CliError::output(path, e))?;
    let mut w = BufWriter::new(file);
    PnmEncoder::new(&mut w)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(gray.as_raw(), gray.width(), gray.height(), ExtendedColorType::L8)
        .map_err(|e| CliError::output(path, e))?;
    w.flush().map_err(|e| CliError::output(path, e))
}
