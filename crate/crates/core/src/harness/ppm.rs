//! Binary PPM (`P6`, maxval 255) color images.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::RgbImage;

use super::io::{read_bytes, write_atomic};

/// Quantize a `[0, 1]` value to a byte, rounding half away from zero.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn encode(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.data.iter().map(|&v| quantize(v)));
    out
}

pub fn encode_bytes(width: usize, height: usize, rgb: &[u8]) -> Result<Vec<u8>> {
    if rgb.len() != 3 * width * height {
        return Err(Error::contract("pixel buffer does not match dimensions"));
    }
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(rgb);
    Ok(out)
}

fn token(bytes: &[u8], pos: &mut usize) -> Result<(usize, String)> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::format(start, "truncated header"));
    }
    Ok((start, String::from_utf8_lossy(&bytes[start..*pos]).into_owned()))
}

pub fn decode(bytes: &[u8]) -> Result<RgbImage> {
    let mut pos = 0;
    let (_, magic) = token(bytes, &mut pos)?;
    if magic != "P6" {
        return Err(Error::format(0, format!("bad magic {magic:?}")));
    }
    let mut num = |name: &str| -> Result<usize> {
        let (at, t) = token(bytes, &mut pos)?;
        t.parse::<usize>()
            .ok()
            .filter(|v| *v > 0)
            .ok_or_else(|| Error::format(at, format!("bad {name} {t:?}")))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if maxval != 255 {
        return Err(Error::format(pos, format!("maxval {maxval} unsupported (need 255)")));
    }
    if pos >= bytes.len() {
        return Err(Error::format(pos, "truncated header"));
    }
    pos += 1;
    let need = 3 * width * height;
    let data = &bytes[pos..];
    if data.len() < need {
        return Err(Error::format(bytes.len(), format!("expected {need} pixel bytes, found {}", data.len())));
    }
    if data.len() > need {
        return Err(Error::format(pos + need, "trailing bytes after pixels"));
    }
    RgbImage::from_vec(width, height, data.iter().map(|&b| b as f64 / 255.0).collect())
}

pub fn write(path: &Path, img: &RgbImage) -> Result<()> {
    write_atomic(path, &encode(img))
}

pub fn read(path: &Path) -> Result<RgbImage> {
    decode(&read_bytes(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_half_away_from_zero() {
        assert_eq!(quantize(0.5), 128); // 127.5
        assert_eq!(quantize(1.0), 255);
        assert_eq!(quantize(-0.1), 0);
        assert_eq!(quantize(1.7), 255);
    }

    #[test]
    fn round_trip_and_errors() {
        let img = RgbImage::from_vec(2, 1, vec![0.0, 1.0, 128.0 / 255.0, 0.2, 0.4, 0.6]).unwrap();
        let b = encode(&img);
        let back = decode(&b).unwrap();
        for (a, c) in img.data.iter().zip(&back.data) {
            assert!((a - c).abs() <= 0.5 / 255.0 + 1e-12);
        }
        assert!(decode(&b[..b.len() - 2]).is_err());
        let bad = String::from_utf8_lossy(&b[..11]).replace("255", "65535");
        assert!(matches!(decode(bad.as_bytes()), Err(Error::Format { .. })));
        assert!(matches!(decode(b"P3\n1 1\n255\n"), Err(Error::Format { offset: 0, .. })));
    }
}
