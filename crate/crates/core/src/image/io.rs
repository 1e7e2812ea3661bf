//! Binary PGM (P5) reading and writing, plus optional 8-bit PNG input.

use std::fs;
use std::path::{Path, PathBuf};

use super::{quantize, Image, MultiChannelImage};
use crate::error::{Error, Result};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Loads a binary PGM (P5, 8-bit) or grayscale PNG.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.starts_with(b"P5") {
        decode_pgm(&bytes)
    } else if bytes.starts_with(b"\x89PNG") {
        decode_png(&bytes)
    } else {
        Err(Error::Format(format!("{}: not a P5 PGM or PNG", path.display())))
    }
}

/// Writes a binary PGM; values are rounded and clamped to `[0, 255]`.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(img)).map_err(io_err(path))
}

/// Dumps every channel as `<stem>_c<k>.pgm`, mapping `[0, 1]` to `[0, 255]`.
pub fn save_channels(img: &MultiChannelImage, dir: impl AsRef<Path>, stem: &str) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    (0..img.channels())
        .map(|c| {
            let path = dir.join(format!("{stem}_c{c}.pgm"));
            let channel = img.channel_image(c).map(|v| v * 255.0)?;
            save_image(&channel, &path)?;
            Ok(path)
        })
        .collect()
}

pub(crate) fn encode_pgm(img: &Image) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.data().iter().map(|&v| quantize(v)));
    out
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("bad PGM header number".into()))
    }
}

pub(crate) fn decode_pgm(bytes: &[u8]) -> Result<Image> {
    if !bytes.starts_with(b"P5") {
        return Err(Error::Format("missing P5 magic".into()));
    }
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.number()?;
    let height = cur.number()?;
    let maxval = cur.number()?;
    // Exactly one whitespace byte separates the header from the raster.
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(Error::Format("truncated PGM header".into()));
    }
    cur.pos += 1;
    if width == 0 || height == 0 {
        return Err(Error::Dimensions { width, height });
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!("unsupported PGM maxval {maxval}")));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Format("PGM dimensions overflow".into()))?;
    let raster = bytes
        .get(cur.pos..cur.pos + n)
        .ok_or_else(|| Error::Format("truncated PGM raster".into()))?;
    let scale = 255.0 / maxval as f64;
    let data = raster
        .iter()
        .map(|&b| {
            if maxval == 255 {
                b as f64
            } else {
                (b as f64 * scale).min(255.0)
            }
        })
        .collect();
    Image::new(width, height, data)
}

fn decode_png(bytes: &[u8]) -> Result<Image> {
    let decoded = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::Format(format!("png: {e}")))?;
    if decoded.color() != image::ColorType::L8 {
        return Err(Error::Format(format!(
            "png must be 8-bit grayscale, got {:?}",
            decoded.color()
        )));
    }
    let gray = decoded.into_luma8();
    let (w, h) = gray.dimensions();
    Image::new(
        w as usize,
        h as usize,
        gray.into_raw().into_iter().map(f64::from).collect(),
    )
}
