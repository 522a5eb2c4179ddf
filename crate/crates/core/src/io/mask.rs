//! 8-bit grayscale PNG masks and RGB display images.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use crate::bridgemath::Image;
use crate::error::{Error, Result};
use crate::lgi::{MaskKind, ShadowMask};

fn encode(width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
    enc.set_color(color);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc
        .write_header()
        .map_err(|e| Error::InvalidArgument(format!("png: {e}")))?;
    writer
        .write_image_data(data)
        .map_err(|e| Error::InvalidArgument(format!("png: {e}")))?;
    writer
        .finish()
        .map_err(|e| Error::InvalidArgument(format!("png: {e}")))?;
    Ok(out)
}

/// Mask values quantized to `round(255 v)`. Exact for hard masks.
pub fn encode_mask_png(mask: &ShadowMask) -> Result<Vec<u8>> {
    let bytes: Vec<u8> = mask
        .values
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    encode(mask.width, mask.height, png::ColorType::Grayscale, &bytes)
}

/// Reads an 8-bit grayscale PNG. Masks holding only 0 and 255 come back as hard masks.
pub fn decode_mask_png(bytes: &[u8]) -> Result<ShadowMask> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::format(0, format!("png: {e}")))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::format(
            0,
            format!("expected 8-bit grayscale, found {:?} {:?}", info.color_type, info.bit_depth),
        ));
    }
    let (width, height) = (info.width as usize, info.height as usize);
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(width * height)];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::format(0, format!("png: {e}")))?;
    let line = frame.line_size;
    let mut raw = Vec::with_capacity(width * height);
    for y in 0..height {
        raw.extend_from_slice(&buf[y * line..y * line + width]);
    }
    let kind = if raw.iter().all(|b| *b == 0 || *b == 255) {
        MaskKind::Hard
    } else {
        MaskKind::Soft
    };
    let values = raw.iter().map(|b| *b as f64 / 255.0).collect();
    ShadowMask::new(width, height, values, kind)
}

pub fn read_mask_png(path: impl AsRef<Path>) -> Result<ShadowMask> {
    decode_mask_png(&fs::read(path)?)
}

pub fn write_mask_png(path: impl AsRef<Path>, mask: &ShadowMask) -> Result<()> {
    fs::write(path, encode_mask_png(mask)?)?;
    Ok(())
}

/// Clamps a three-channel image to `[0, 1]` and encodes 8-bit RGB.
pub fn encode_display_png(image: &Image) -> Result<Vec<u8>> {
    if image.channels != 3 {
        return Err(Error::shape("3 channels", image.channels));
    }
    let bytes: Vec<u8> = image
        .clamped()
        .data
        .iter()
        .map(|v| (v * 255.0).round() as u8)
        .collect();
    encode(image.width, image.height, png::ColorType::Rgb, &bytes)
}

pub fn write_display_png(path: impl AsRef<Path>, image: &Image) -> Result<()> {
    fs::write(path, encode_display_png(image)?)?;
    Ok(())
}
