use crate::{Error, Result};

/// Linear RGB image with components in `[0, 1]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f64; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        RgbImage { width, height, data: vec![[0.0; 3]; width * height] }
    }

    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.data[y * self.width + x]
    }

    /// Row-major `h × w × 3` values.
    pub fn flat(&self) -> Vec<f64> {
        self.data.iter().flatten().copied().collect()
    }
}

fn quantize8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Binary P6 with maxval 255.
pub fn encode_ppm(width: usize, height: usize, rgb: &[[f64; 3]]) -> Vec<u8> {
    assert_eq!(rgb.len(), width * height, "pixel count");
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.reserve(rgb.len() * 3);
    for px in rgb {
        out.extend(px.iter().map(|&c| quantize8(c)));
    }
    out
}

/// Binary P5 with maxval 65535; samples are big-endian.
pub fn encode_pgm16(width: usize, height: usize, values: &[f64]) -> Vec<u8> {
    assert_eq!(values.len(), width * height, "pixel count");
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    out.reserve(values.len() * 2);
    for &v in values {
        let q = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    out
}

/// Reads a binary P6 with maxval up to 255.
pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage> {
    let bad = |msg: &str| Error::Format { what: "PPM image", msg: msg.to_string() };
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header is not ASCII"))?);
    }
    if fields[0] != "P6" {
        return Err(bad("only binary P6 is supported"));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let (width, height, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(bad("maxval must be in 1..=255"));
    }
    pos += 1;
    let payload = bytes.get(pos..pos + width * height * 3).ok_or_else(|| bad("truncated pixel data"))?;
    let scale = maxval as f64;
    let data = payload
        .chunks_exact(3)
        .map(|c| [c[0] as f64 / scale, c[1] as f64 / scale, c[2] as f64 / scale])
        .collect();
    Ok(RgbImage { width, height, data })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_roundtrip_on_quantized_values() {
        let rgb = vec![[0.0, 0.5, 1.0], [1.0, 0.0, 128.0 / 255.0]];
        let bytes = encode_ppm(2, 1, &rgb);
        assert!(bytes.starts_with(b"P6\n2 1\n255\n"));
        let img = decode_ppm(&bytes).unwrap();
        assert_eq!(img.width, 2);
        assert_eq!(img.data[0], [0.0, 128.0 / 255.0, 1.0]);
        assert_eq!(img.data[1], [1.0, 0.0, 128.0 / 255.0]);
    }

    #[test]
    fn pgm_is_big_endian_16_bit() {
        let bytes = encode_pgm16(2, 1, &[1.0, 0.5]);
        let header = b"P5\n2 1\n65535\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], &[0xff, 0xff, 0x80, 0x00]);
    }

    #[test]
    fn decode_rejects_other_formats() {
        assert!(decode_ppm(b"P3\n1 1\n255\n0 0 0").is_err());
        assert!(decode_ppm(b"P6\n2 2\n255\n\x00\x00").is_err());
    }
}
