//! 8-bit image decoding (PNG, binary PPM and PGM) and PPM encoding.
//!
//! Decoded pixels are scaled to `[0, 1]` by `v / 255`; grayscale images are
//! expanded to three identical channels.

use std::io::Cursor;
use std::path::Path;

use weldcnn_core::Tensor;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Png8,
    PpmP6,
    PgmP5,
}

impl ImageFormat {
    /// Format implied by a file extension (case-insensitive).
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "png" => Some(Self::Png8),
            "ppm" => Some(Self::PpmP6),
            "pgm" => Some(Self::PgmP5),
            _ => None,
        }
    }

    /// Format implied by the leading magic bytes.
    pub fn sniff(bytes: &[u8]) -> Option<Self> {
        if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
            Some(Self::Png8)
        } else if bytes.starts_with(b"P6") {
            Some(Self::PpmP6)
        } else if bytes.starts_with(b"P5") {
            Some(Self::PgmP5)
        } else {
            None
        }
    }
}

pub fn decode_image(bytes: &[u8], format: ImageFormat) -> Result<Tensor> {
    match format {
        ImageFormat::Png8 => decode_png(bytes),
        ImageFormat::PpmP6 => decode_pnm(bytes, b"P6", 3),
        ImageFormat::PgmP5 => decode_pnm(bytes, b"P5", 1),
    }
}

/// Reads a file and decodes it according to its magic bytes.
pub fn read_image(path: &Path) -> Result<Tensor> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let format = ImageFormat::sniff(&bytes).ok_or_else(|| {
        Error::UnsupportedFormat(format!(
            "{} is not PNG, PPM (P6) or PGM (P5)",
            path.display()
        ))
    })?;
    decode_image(&bytes, format)
}

fn to_tensor(h: usize, w: usize, channels: usize, raw: &[u8]) -> Result<Tensor> {
    let data: Vec<f64> = match channels {
        3 => raw.iter().map(|&v| f64::from(v) / 255.0).collect(),
        1 => raw
            .iter()
            .flat_map(|&v| [f64::from(v) / 255.0; 3])
            .collect(),
        _ => unreachable!("only gray and RGB are decoded"),
    };
    Ok(Tensor::from_vec(&[h, w, 3], data)?)
}

fn decode_png(bytes: &[u8]) -> Result<Tensor> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Decode(format!("png: {e}")))?;
    let info = reader.info();
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedFormat(format!(
            "png bit depth {:?}; only 8-bit is supported",
            info.bit_depth
        )));
    }
    if info.interlaced {
        return Err(Error::UnsupportedFormat("interlaced png".into()));
    }
    let channels = match info.color_type {
        png::ColorType::Rgb => 3,
        png::ColorType::Grayscale => 1,
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "png color type {other:?}; only RGB and grayscale are supported"
            )))
        }
    };
    let (w, h) = (info.width as usize, info.height as usize);
    let mut buf = vec![0; h * w * channels];
    reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Decode(format!("png: {e}")))?;
    to_tensor(h, w, channels, &buf)
}

struct PnmHeader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PnmHeader<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&b| b != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Decode(format!(
                "missing or malformed {what} in header"
            )));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Decode(format!("{what} out of range")))
    }
}

fn decode_pnm(bytes: &[u8], magic: &[u8; 2], channels: usize) -> Result<Tensor> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(Error::Decode(format!(
            "expected magic {:?}",
            std::str::from_utf8(magic).unwrap_or_default()
        )));
    }
    let mut header = PnmHeader { bytes, pos: 2 };
    let w = header.number("width")?;
    let h = header.number("height")?;
    let maxval = header.number("maxval")?;
    if w == 0 || h == 0 {
        return Err(Error::Decode(format!("degenerate image size {w}×{h}")));
    }
    if maxval != 255 {
        return Err(Error::UnsupportedFormat(format!(
            "maxval {maxval}; only 8-bit (255) images are supported"
        )));
    }
    if !bytes.get(header.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Decode("header not terminated by whitespace".into()));
    }
    let start = header.pos + 1;
    let needed = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| Error::Decode("image dimensions overflow".into()))?;
    let raw = bytes.get(start..start + needed).ok_or_else(|| {
        Error::Decode(format!(
            "pixel data truncated: need {needed} bytes, have {}",
            bytes.len().saturating_sub(start)
        ))
    })?;
    to_tensor(h, w, channels, raw)
}

/// Binary PPM (P6, maxval 255) of an `H × W × 3` image; values are clamped to
/// `[0, 1]` and rounded to the nearest level.
pub fn encode_ppm(img: &Tensor) -> Result<Vec<u8>> {
    let &[h, w, 3] = img.shape() else {
        return Err(weldcnn_core::Error::Shape(format!(
            "PPM export needs an H×W×3 image, got {:?}",
            img.shape()
        ))
        .into());
    };
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.extend(
        img.data()
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    Ok(out)
}

pub fn write_ppm(path: &Path, img: &Tensor) -> Result<()> {
    std::fs::write(path, encode_ppm(img)?).map_err(|e| Error::io(path, e))
}
