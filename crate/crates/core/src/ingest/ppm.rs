use std::path::{Path, PathBuf};

use super::IngestError;

/// 8-bit interleaved RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self { width, height, data }
    }

    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let i = 3 * (row * self.width + col);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn put(&mut self, row: usize, col: usize, rgb: [u8; 3]) {
        let i = 3 * (row * self.width + col);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }
}

/// Binary PPM (P6, maxval 255).
pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

fn fmt_err(reason: impl Into<String>) -> IngestError {
    IngestError::Format { what: "PPM", reason: reason.into() }
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage, IngestError> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        // whitespace and comments between header tokens
        while pos < bytes.len() {
            match bytes[pos] {
                b'#' => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(fmt_err("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| fmt_err("non-ASCII header"))?);
    }
    if fields[0] != "P6" {
        return Err(fmt_err(format!("magic {:?}, expected P6", fields[0])));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| fmt_err(format!("bad header number {s:?}")));
    let (width, height, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
    if maxval != 255 {
        return Err(fmt_err(format!("maxval {maxval}, only 255 is supported")));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(fmt_err("missing raster separator"));
    }
    pos += 1;
    let len = width * height * 3;
    if bytes.len() - pos != len {
        return Err(fmt_err(format!("raster has {} bytes, expected {len}", bytes.len() - pos)));
    }
    Ok(RgbImage { width, height, data: bytes[pos..].to_vec() })
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:06}.ppm")
}

pub fn read_ppm(path: &Path) -> Result<RgbImage, IngestError> {
    let bytes = std::fs::read(path).map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
    decode_ppm(&bytes)
}

pub fn write_ppm(path: &Path, img: &RgbImage) -> Result<(), IngestError> {
    std::fs::write(path, encode_ppm(img)).map_err(|source| IngestError::Io { path: path.display().to_string(), source })
}

/// Consecutive `frame_%06d.ppm` files in `dir`, starting at index 0.
pub fn read_frame_dir(dir: &Path) -> Result<Vec<RgbImage>, IngestError> {
    let mut frames = Vec::new();
    loop {
        let p: PathBuf = dir.join(frame_file_name(frames.len()));
        if !p.exists() {
            break;
        }
        frames.push(read_ppm(&p)?);
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let img = RgbImage::filled(2, 1, [1, 2, 3]);
        assert_eq!(encode_ppm(&img), b"P6\n2 1\n255\n\x01\x02\x03\x01\x02\x03".to_vec());
    }

    #[test]
    fn comments_in_header() {
        let bytes = b"P6 # made by hand\n1 1\n# max\n255\n\x0a\x0b\x0c";
        let img = decode_ppm(bytes).unwrap();
        assert_eq!(img.pixel(0, 0), [10, 11, 12]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(decode_ppm(b"P3\n1 1\n255\n1 2 3").is_err());
        assert!(decode_ppm(b"P6\n1 1\n65535\n\0\0\0\0\0\0").is_err());
        assert!(decode_ppm(b"P6\n2 1\n255\n\0\0\0").is_err());
        assert!(decode_ppm(b"P6\n1").is_err());
    }

    #[test]
    fn frame_names() {
        assert_eq!(frame_file_name(42), "frame_000042.ppm");
    }

    proptest! {
        #[test]
        fn ppm_roundtrip(w in 1usize..16, h in 1usize..16, seed in any::<u64>()) {
            let data: Vec<u8> = (0..w * h * 3).map(|i| (seed.rotate_left(i as u32 % 64) ^ i as u64) as u8).collect();
            let img = RgbImage { width: w, height: h, data };
            prop_assert_eq!(decode_ppm(&encode_ppm(&img)).unwrap(), img);
        }
    }
}
