//! File formats: raw tensor/mask dumps ("DT1"/"DM1") and binary PGM/PPM
//! images.
//!
//! A DT1 file is one ASCII header line `DT1 <N> <I_1> ... <I_N>\n` followed
//! by `Π I_n` little-endian 64-bit floats in the global first-index-fastest
//! linearization. DM1 is the analogous mask dump with one 0/1 byte per
//! entry. Images are the binary netpbm forms: P5 (grayscale) loads as an
//! order-2 tensor, P6 (color) as order-3 with the channel extent last;
//! samples are scaled to `[0, 1]` and only `maxval` 255 is accepted.
//!
//! Every parser takes untrusted bytes and fails with
//! [`Error::MalformedInput`] instead of panicking; allocations are bounded
//! by the input size because the declared element count is checked against
//! the actual payload length before any buffer is built.

use std::path::Path;

use crate::error::{Error, Result};
use crate::mask::ObservationMask;
use crate::tensor::DenseTensor;

/// Longest accepted header line for the dump formats.
const MAX_HEADER_BYTES: usize = 4096;

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedInput(msg.into())
}

/// Splits off and decodes the `<magic> <N> <dims...>` header line; returns
/// the extents and the payload after the newline.
fn parse_dump_header<'a>(bytes: &'a [u8], magic: &str) -> Result<(Vec<usize>, &'a [u8])> {
    let nl = bytes[..bytes.len().min(MAX_HEADER_BYTES)]
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| malformed(format!("{magic} header line missing or too long")))?;
    let header = std::str::from_utf8(&bytes[..nl])
        .map_err(|_| malformed(format!("{magic} header is not ASCII")))?;
    let mut tokens = header.split_ascii_whitespace();
    if tokens.next() != Some(magic) {
        return Err(malformed(format!("expected {magic} magic")));
    }
    let order: usize = tokens
        .next()
        .ok_or_else(|| malformed("missing tensor order"))?
        .parse()
        .map_err(|_| malformed("tensor order is not an integer"))?;
    if order == 0 {
        return Err(malformed("tensor order must be >= 1"));
    }
    let mut dims = Vec::new();
    for _ in 0..order {
        let extent: usize = tokens
            .next()
            .ok_or_else(|| malformed(format!("header declares {order} extents but lists fewer")))?
            .parse()
            .map_err(|_| malformed("extent is not an integer"))?;
        if extent == 0 {
            return Err(malformed("extents must be >= 1"));
        }
        dims.push(extent);
    }
    if tokens.next().is_some() {
        return Err(malformed("trailing tokens in header"));
    }
    Ok((dims, &bytes[nl + 1..]))
}

fn checked_element_count(dims: &[usize]) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| malformed("element count overflows"))
}

/// Decodes a DT1 tensor dump.
pub fn parse_dt1(bytes: &[u8]) -> Result<DenseTensor> {
    let (dims, payload) = parse_dump_header(bytes, "DT1")?;
    let count = checked_element_count(&dims)?;
    let want = count
        .checked_mul(8)
        .ok_or_else(|| malformed("payload size overflows"))?;
    if payload.len() != want {
        return Err(malformed(format!(
            "expected {want} payload bytes for shape {dims:?}, got {}",
            payload.len()
        )));
    }
    let data: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DenseTensor::from_vec(&dims, data)
}

/// Encodes a tensor as DT1 bytes.
pub fn encode_dt1(t: &DenseTensor) -> Vec<u8> {
    let mut out = format!(
        "DT1 {} {}\n",
        t.order(),
        t.dims()
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    )
    .into_bytes();
    out.reserve(t.len() * 8);
    for v in t.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Decodes a DM1 observation-mask dump.
pub fn parse_dm1(bytes: &[u8]) -> Result<ObservationMask> {
    let (dims, payload) = parse_dump_header(bytes, "DM1")?;
    let count = checked_element_count(&dims)?;
    if payload.len() != count {
        return Err(malformed(format!(
            "expected {count} payload bytes for shape {dims:?}, got {}",
            payload.len()
        )));
    }
    let known: Vec<bool> = payload
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(malformed(format!("mask byte must be 0 or 1, got {other}"))),
        })
        .collect::<Result<_>>()?;
    ObservationMask::from_vec(&dims, known)
}

/// Encodes a mask as DM1 bytes.
pub fn encode_dm1(m: &ObservationMask) -> Vec<u8> {
    let mut out = format!(
        "DM1 {} {}\n",
        m.dims().len(),
        m.dims()
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    )
    .into_bytes();
    out.extend(m.as_slice().iter().map(|&k| k as u8));
    out
}

/// Byte cursor over a netpbm header: whitespace-separated tokens with
/// `#`-to-end-of-line comments.
struct PnmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PnmCursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\r' | b'\n' => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(malformed("unexpected end of image header"));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| malformed(format!("{what} is not a decimal integer")))
    }
}

/// Decodes a binary PGM (P5) or PPM (P6) image into a `[0, 1]`-scaled
/// tensor: `(rows, cols)` for grayscale, `(rows, cols, 3)` for color.
pub fn parse_image(bytes: &[u8]) -> Result<DenseTensor> {
    let mut cur = PnmCursor { bytes, pos: 0 };
    let magic = cur.token()?;
    let channels = match magic {
        b"P5" => 1usize,
        b"P6" => 3usize,
        _ => return Err(malformed("expected binary netpbm magic P5 or P6")),
    };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    if width == 0 || height == 0 {
        return Err(malformed("image dimensions must be >= 1"));
    }
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(malformed(format!("only maxval 255 is supported, got {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(malformed("missing separator before the raster"));
    }
    let raster = &bytes[cur.pos + 1..];
    let want = width
        .checked_mul(height)
        .and_then(|p| p.checked_mul(channels))
        .ok_or_else(|| malformed("raster size overflows"))?;
    if raster.len() != want {
        return Err(malformed(format!(
            "expected {want} raster bytes for {width}x{height}, got {}",
            raster.len()
        )));
    }
    // The file is row-major with interleaved channels; the tensor is
    // first-index-fastest with a trailing planar channel mode.
    let mut data = vec![0.0f64; want];
    for r in 0..height {
        for c in 0..width {
            for ch in 0..channels {
                data[r + c * height + ch * height * width] =
                    raster[(r * width + c) * channels + ch] as f64 / 255.0;
            }
        }
    }
    let dims: &[usize] = if channels == 1 {
        &[height, width]
    } else {
        &[height, width, 3]
    };
    DenseTensor::from_vec(dims, data)
}

/// Encodes a tensor as a binary PGM (order 2) or PPM (order 3 with three
/// channels), rounding to the nearest byte after clamping to `[0, 1]`.
pub fn encode_image(t: &DenseTensor) -> Result<Vec<u8>> {
    let dims = t.dims();
    let channels = match dims.len() {
        2 => 1usize,
        3 if dims[2] == 3 => 3usize,
        _ => {
            return Err(Error::InvalidArgument(format!(
                "image writer needs shape (rows, cols) or (rows, cols, 3), got {dims:?}"
            )))
        }
    };
    let (height, width) = (dims[0], dims[1]);
    let magic = if channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{width} {height}\n255\n").into_bytes();
    let data = t.as_slice();
    for r in 0..height {
        for c in 0..width {
            for ch in 0..channels {
                let v = data[r + c * height + ch * height * width];
                out.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
    }
    Ok(out)
}

/// Tags an I/O failure with the path it happened on.
fn with_path(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(
        e.kind(),
        format!("{}: {e}", path.display()),
    ))
}

/// Reads a whole file, reporting the path on failure.
pub fn read_bytes(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    std::fs::read(path).map_err(|e| with_path(path, e))
}

/// Writes a whole file, reporting the path on failure.
pub fn write_bytes(path: impl AsRef<Path>, bytes: impl AsRef<[u8]>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, bytes).map_err(|e| with_path(path, e))
}

pub fn load_dt1(path: impl AsRef<Path>) -> Result<DenseTensor> {
    parse_dt1(&read_bytes(path)?)
}

pub fn save_dt1(t: &DenseTensor, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path, encode_dt1(t))
}

pub fn load_dm1(path: impl AsRef<Path>) -> Result<ObservationMask> {
    parse_dm1(&read_bytes(path)?)
}

pub fn save_dm1(m: &ObservationMask, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path, encode_dm1(m))
}

pub fn load_image(path: impl AsRef<Path>) -> Result<DenseTensor> {
    parse_image(&read_bytes(path)?)
}

pub fn save_image(t: &DenseTensor, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path, encode_image(t)?)
}
