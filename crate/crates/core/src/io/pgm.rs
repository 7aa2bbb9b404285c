//! Binary PGM (P5). Depth maps are 16-bit big-endian millimeters with 0 for
//! invalid pixels; instance masks are 8-bit ids with 0 for background.

use std::path::Path;

use super::{io_error, write_bytes};
use crate::error::{Error, Result};
use crate::render::{DepthMap, IdMap};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// Row-major samples.
    pub data: Vec<u16>,
}

impl PgmImage {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, self.maxval).into_bytes();
        if self.maxval > 255 {
            out.extend(self.data.iter().flat_map(|v| v.to_be_bytes()));
        } else {
            out.extend(self.data.iter().map(|&v| v as u8));
        }
        out
    }

    /// Decodes a P5 image; `path` labels diagnostics. Header lines are
    /// counted for error positions; pixel errors point past the header.
    pub fn decode(bytes: &[u8], path: &Path) -> Result<PgmImage> {
        let err = |line: usize, message: &str| Error::Parse { path: path.to_path_buf(), line, message: message.into() };
        let mut pos = 0;
        let mut line = 1;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            // skip whitespace and comments
            while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
                if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                    continue;
                }
                if bytes[pos] == b'\n' {
                    line += 1;
                }
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(err(line, "truncated header"));
            }
            fields.push((std::str::from_utf8(&bytes[start..pos]).unwrap_or(""), line));
        }
        if fields[0].0 != "P5" {
            return Err(err(fields[0].1, "not a binary PGM (expected `P5`)"));
        }
        let num = |(s, l): (&str, usize), what: &str| -> Result<usize> {
            s.parse::<usize>().map_err(|_| err(l, &format!("bad {what} `{s}`")))
        };
        let width = num(fields[1], "width")?;
        let height = num(fields[2], "height")?;
        let maxval = num(fields[3], "maxval")?;
        if width == 0 || height == 0 {
            return Err(err(fields[1].1, "image must be non-empty"));
        }
        if maxval == 0 || maxval > 65535 {
            return Err(err(fields[3].1, "maxval must lie in 1..=65535"));
        }
        // exactly one whitespace byte separates the header from the pixels
        if pos >= bytes.len() {
            return Err(err(line, "missing pixel data"));
        }
        if bytes[pos] == b'\n' {
            line += 1;
        }
        pos += 1;
        let bpp = if maxval > 255 { 2 } else { 1 };
        let n = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(bpp))
            .ok_or_else(|| err(fields[1].1, "image too large"))?;
        let body = &bytes[pos..];
        if body.len() != n {
            return Err(err(line, &format!("expected {n} bytes of pixel data, found {}", body.len())));
        }
        let data: Vec<u16> = if bpp == 2 {
            body.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
        } else {
            body.iter().map(|&b| b as u16).collect()
        };
        if let Some(i) = data.iter().position(|&v| v as usize > maxval) {
            return Err(err(line, &format!("pixel {i} exceeds maxval {maxval}")));
        }
        Ok(PgmImage { width, height, maxval: maxval as u16, data })
    }
}

pub fn read_pgm(path: &Path) -> Result<PgmImage> {
    let bytes = std::fs::read(path).map_err(|e| io_error(path, e))?;
    PgmImage::decode(&bytes, path)
}

pub fn write_pgm(path: &Path, image: &PgmImage) -> Result<()> {
    write_bytes(path, &image.encode())
}

/// Depth in millimeters, rounded; valid depths never encode as 0 and
/// saturate at 65535.
pub fn depth_to_pgm(depth: &DepthMap) -> PgmImage {
    let data =
        depth.values.iter().map(|&d| if d > 0.0 { (d * 1e3).round().clamp(1.0, 65535.0) as u16 } else { 0 }).collect();
    PgmImage { width: depth.width, height: depth.height, maxval: 65535, data }
}

pub fn mask_to_pgm(mask: &IdMap) -> PgmImage {
    PgmImage { width: mask.width, height: mask.height, maxval: 255, data: mask.ids.iter().map(|&v| v as u16).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_both_depths() {
        let img = PgmImage { width: 3, height: 2, maxval: 65535, data: vec![0, 1, 256, 65535, 10, 32768] };
        assert_eq!(PgmImage::decode(&img.encode(), Path::new("d.pgm")).unwrap(), img);
        let mask = PgmImage { width: 2, height: 2, maxval: 255, data: vec![0, 1, 2, 255] };
        let bytes = mask.encode();
        assert_eq!(&bytes[..11], b"P5\n2 2\n255\n");
        assert_eq!(PgmImage::decode(&bytes, Path::new("m.pgm")).unwrap(), mask);
    }

    #[test]
    fn depth_encoding() {
        let d = DepthMap { width: 4, height: 1, values: vec![0.0, 0.0004, 1.2345, 100.0] };
        assert_eq!(depth_to_pgm(&d).data, vec![0, 1, 1235, 65535]);
    }

    #[test]
    fn malformed_inputs() {
        let p = Path::new("x.pgm");
        assert!(PgmImage::decode(b"P2\n1 1\n255\n0", p).is_err());
        assert!(PgmImage::decode(b"P5\n2 2\n255\n\x00", p).is_err());
        assert!(PgmImage::decode(b"P5\n2", p).is_err());
        assert!(PgmImage::decode(b"P5\n1 1\n0\n\x00", p).is_err());
        match PgmImage::decode(b"P5\n# c\n1 x\n255\n\x00", p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
