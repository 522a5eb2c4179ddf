//! Portable float map: text header, 32-bit float raster stored bottom row first.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfmHeader {
    /// 1 for "Pf", 3 for "PF".
    pub bands: usize,
    pub width: usize,
    pub height: usize,
    /// Negative means little-endian payload.
    pub scale: f32,
}

impl PfmHeader {
    pub fn little_endian(&self) -> bool {
        self.scale < 0.0
    }

    fn value_count(&self) -> usize {
        self.width * self.height * self.bands
    }
}

/// Decoded raster, rows top to bottom, bands interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct Pfm {
    pub header: PfmHeader,
    pub data: Vec<f32>,
}

impl Pfm {
    pub fn new(width: usize, height: usize, bands: usize, data: Vec<f32>) -> Result<Self> {
        if bands != 1 && bands != 3 {
            return Err(Error::InvalidArgument(format!("PFM supports 1 or 3 bands, got {bands}")));
        }
        if data.len() != width * height * bands {
            return Err(Error::shape(format!("{width}x{height}x{bands}"), format!("{} values", data.len())));
        }
        Ok(Pfm {
            header: PfmHeader {
                bands,
                width,
                height,
                scale: -1.0,
            },
            data,
        })
    }

    /// Bit-level equality, so NaN payloads compare equal to themselves.
    pub fn bitwise_eq(&self, other: &Pfm) -> bool {
        self.header.width == other.header.width
            && self.header.height == other.header.height
            && self.header.bands == other.header.bands
            && self.data.len() == other.data.len()
            && self.data.iter().zip(&other.data).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn token(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format(start as u64, format!("expected {what}, found end of file")));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::format(start as u64, format!("{what} is not ASCII")))?;
        Ok((start, text))
    }
}

fn parse_dim(cur: &mut Cursor, what: &str) -> Result<usize> {
    let (at, tok) = cur.token(what)?;
    match tok.parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(Error::format(at as u64, format!("invalid {what} `{tok}`"))),
    }
}

/// Parses a PFM byte stream.
pub fn decode_pfm(bytes: &[u8]) -> Result<Pfm> {
    let mut cur = Cursor { bytes, pos: 0 };
    let (at, magic) = cur.token("magic")?;
    let bands = match magic {
        "Pf" => 1,
        "PF" => 3,
        _ => return Err(Error::format(at as u64, format!("bad magic `{magic}`, expected Pf or PF"))),
    };
    let width = parse_dim(&mut cur, "width")?;
    let height = parse_dim(&mut cur, "height")?;
    let (at, tok) = cur.token("scale")?;
    let scale: f32 = tok
        .parse()
        .map_err(|_| Error::format(at as u64, format!("invalid scale `{tok}`")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::format(at as u64, "scale must be finite and nonzero"));
    }
    // Exactly one whitespace byte separates the header from the payload.
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(Error::format(cur.pos as u64, "missing separator after scale"));
    }
    let start = cur.pos + 1;

    let header = PfmHeader {
        bands,
        width,
        height,
        scale,
    };
    let n = header.value_count();
    let expected = n
        .checked_mul(4)
        .ok_or_else(|| Error::format(start as u64, "raster size overflows"))?;
    let payload = &bytes[start..];
    if payload.len() < expected {
        return Err(Error::format(
            (start + payload.len()) as u64,
            format!("truncated payload: expected {expected} bytes, found {}", payload.len()),
        ));
    }
    if payload.len() > expected {
        return Err(Error::format(
            (start + expected) as u64,
            format!("{} trailing bytes after payload", payload.len() - expected),
        ));
    }

    let little = header.little_endian();
    let row = width * bands;
    let mut data = vec![0.0f32; n];
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
        // File rows run bottom to top.
        let (file_row, col) = (i / row, i % row);
        data[(height - 1 - file_row) * row + col] = v;
    }
    Ok(Pfm { header, data })
}

/// Serializes with a `-1.0` (little-endian) or `1.0` (big-endian) scale.
pub fn encode_pfm(pfm: &Pfm, little_endian: bool) -> Vec<u8> {
    let h = &pfm.header;
    let magic = if h.bands == 3 { "PF" } else { "Pf" };
    let scale = if little_endian { "-1.0" } else { "1.0" };
    let mut out = format!("{magic}\n{} {}\n{scale}\n", h.width, h.height).into_bytes();
    out.reserve(pfm.data.len() * 4);
    let row = h.width * h.bands;
    for r in (0..h.height).rev() {
        for v in &pfm.data[r * row..(r + 1) * row] {
            if little_endian {
                out.extend_from_slice(&v.to_le_bytes());
            } else {
                out.extend_from_slice(&v.to_be_bytes());
            }
        }
    }
    out
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<Pfm> {
    decode_pfm(&fs::read(path)?)
}

/// Writes little-endian.
pub fn write_pfm(path: impl AsRef<Path>, pfm: &Pfm) -> Result<()> {
    fs::write(path, encode_pfm(pfm, true))?;
    Ok(())
}
