//! Single-channel PFM (`Pf`) depth maps: little-endian `f32`, rows stored
//! bottom to top.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::ScalarMap;

use super::io::{read_bytes, write_atomic};

pub fn encode(map: &ScalarMap) -> Result<Vec<u8>> {
    let mut out = format!("Pf\n{} {}\n-1.0\n", map.width, map.height).into_bytes();
    out.reserve(4 * map.data.len());
    for y in (0..map.height).rev() {
        for x in 0..map.width {
            let v = map.get(x, y) as f32;
            if !v.is_finite() {
                return Err(Error::Domain(format!("non-finite depth at ({x}, {y})")));
            }
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Read one whitespace-delimited header token starting at `*pos`.
fn token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::format(start, "truncated header"));
    }
    std::str::from_utf8(&bytes[start..*pos]).map_err(|_| Error::format(start, "header is not ASCII"))
}

pub fn decode(bytes: &[u8]) -> Result<ScalarMap> {
    let mut pos = 0;
    let magic = token(bytes, &mut pos)?;
    match magic {
        "Pf" => {}
        "PF" => return Err(Error::format(0, "three-channel PFM (PF) is not a depth map")),
        _ => return Err(Error::format(0, format!("bad magic {magic:?}"))),
    }
    let mut dim = |name: &str| -> Result<usize> {
        let at = pos;
        let t = token(bytes, &mut pos)?;
        t.parse::<usize>()
            .ok()
            .filter(|v| *v > 0)
            .ok_or_else(|| Error::format(at, format!("bad {name} {t:?}")))
    };
    let width = dim("width")?;
    let height = dim("height")?;
    let at = pos;
    let scale_tok = token(bytes, &mut pos)?;
    let scale: f64 = scale_tok
        .parse()
        .map_err(|_| Error::format(at, format!("bad scale {scale_tok:?}")))?;
    if !(scale < 0.0) {
        return Err(Error::format(at, "only little-endian (negative scale) PFM is supported"));
    }
    // exactly one whitespace byte separates the header from the data
    if pos >= bytes.len() {
        return Err(Error::format(pos, "truncated header"));
    }
    pos += 1;
    let need = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format(pos, "dimensions overflow"))?;
    let data = &bytes[pos..];
    if data.len() < need {
        return Err(Error::format(bytes.len(), format!("expected {need} data bytes, found {}", data.len())));
    }
    if data.len() > need {
        return Err(Error::format(pos + need, "trailing bytes after data"));
    }
    let mut map = ScalarMap::zeros(width, height);
    for (k, chunk) in data.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
        if !v.is_finite() {
            return Err(Error::format(pos + 4 * k, "non-finite value"));
        }
        let (x, row) = (k % width, k / width);
        map.set(x, height - 1 - row, v as f64);
    }
    Ok(map)
}

pub fn write(path: &Path, map: &ScalarMap) -> Result<()> {
    write_atomic(path, &encode(map)?)
}

pub fn read(path: &Path) -> Result<ScalarMap> {
    decode(&read_bytes(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_row_order() {
        let m = ScalarMap::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = encode(&m).unwrap();
        assert!(b.starts_with(b"Pf\n2 2\n-1.0\n"));
        let body = &b[b.len() - 16..];
        // bottom row (3, 4) comes first
        assert_eq!(f32::from_le_bytes(body[0..4].try_into().unwrap()), 3.0);
        assert_eq!(decode(&b).unwrap(), m);
    }

    #[test]
    fn rejects_malformed() {
        let m = ScalarMap::from_vec(2, 1, vec![1.5, 2.5]).unwrap();
        let b = encode(&m).unwrap();
        assert!(matches!(decode(&b[..b.len() - 1]), Err(Error::Format { .. })));
        let mut extra = b.clone();
        extra.push(0);
        assert!(matches!(decode(&extra), Err(Error::Format { .. })));
        let pf3 = String::from_utf8_lossy(&b).replacen("Pf", "PF", 1);
        assert!(matches!(decode(pf3.as_bytes()), Err(Error::Format { offset: 0, .. })));
        let mut big = b"Pf\n2 1\n1.0\n".to_vec();
        big.extend_from_slice(&b[b.len() - 8..]);
        assert!(matches!(decode(&big), Err(Error::Format { .. })));
        let mut nan = b"Pf\n1 1\n-1.0\n".to_vec();
        nan.extend_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode(&nan), Err(Error::Format { offset: 12, .. })));
    }
}
