//! Binary PGM (P5) and PPM (P6) with maxval 255.

use std::path::Path;

use super::ImageTensor;
use crate::error::{Error, Result};

fn parse_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        message: message.into(),
    }
}

struct Header {
    channels: usize,
    width: usize,
    height: usize,
    data_start: usize,
}

fn skip_whitespace_and_comments(buf: &[u8], mut pos: usize) -> usize {
    loop {
        while pos < buf.len() && buf[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < buf.len() && buf[pos] == b'#' {
            while pos < buf.len() && buf[pos] != b'\n' {
                pos += 1;
            }
        } else {
            return pos;
        }
    }
}

fn read_uint(buf: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    *pos = skip_whitespace_and_comments(buf, *pos);
    let start = *pos;
    while *pos < buf.len() && buf[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if start == *pos {
        return Err(parse_err(start, format!("expected {what}")));
    }
    if *pos - start > 9 {
        return Err(parse_err(start, format!("{what} too large")));
    }
    let text = std::str::from_utf8(&buf[start..*pos]).expect("ascii digits");
    Ok(text.parse().expect("at most nine ascii digits"))
}

fn parse_header(buf: &[u8]) -> Result<Header> {
    if buf.len() < 2 || buf[0] != b'P' {
        return Err(parse_err(0, "missing P5/P6 magic"));
    }
    let channels = match buf[1] {
        b'5' => 1,
        b'6' => 3,
        _ => return Err(parse_err(1, "unsupported netpbm variant (need P5 or P6)")),
    };
    let mut pos = 2;
    if pos >= buf.len() || !(buf[pos].is_ascii_whitespace() || buf[pos] == b'#') {
        return Err(parse_err(pos, "expected whitespace after magic"));
    }
    let width = read_uint(buf, &mut pos, "width")?;
    let height = read_uint(buf, &mut pos, "height")?;
    let maxval_at = skip_whitespace_and_comments(buf, pos);
    let maxval = read_uint(buf, &mut pos, "maxval")?;
    if width == 0 || height == 0 {
        return Err(parse_err(2, "zero dimensions"));
    }
    if maxval != 255 {
        return Err(parse_err(maxval_at, format!("unsupported maxval {maxval} (need 255)")));
    }
    if pos >= buf.len() || !buf[pos].is_ascii_whitespace() {
        return Err(parse_err(pos, "expected single whitespace before raster"));
    }
    Ok(Header {
        channels,
        width,
        height,
        data_start: pos + 1,
    })
}

pub fn decode_pnm(buf: &[u8]) -> Result<ImageTensor> {
    let h = parse_header(buf)?;
    let n = h
        .width
        .checked_mul(h.height)
        .and_then(|v| v.checked_mul(h.channels))
        .ok_or_else(|| parse_err(2, "dimensions overflow"))?;
    let payload = &buf[h.data_start..];
    if payload.len() < n {
        return Err(parse_err(
            buf.len(),
            format!("truncated payload: expected {n} bytes, found {}", payload.len()),
        ));
    }
    if payload.len() > n {
        return Err(parse_err(h.data_start + n, "trailing bytes after raster"));
    }
    let samples = payload.iter().map(|&b| b as f64 / 255.0).collect();
    ImageTensor::new(h.height, h.width, h.channels, samples)
}

/// Canonical encoding `P5\n<w> <h>\n255\n<raster>`; samples are clamped to
/// `[0, 1]` and rounded to the nearest 8-bit level.
pub fn encode_pnm(image: &ImageTensor) -> Vec<u8> {
    let magic = if image.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.samples().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

pub fn load_pnm(path: &Path) -> Result<ImageTensor> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pnm(&buf)
}

pub fn save_pnm(image: &ImageTensor, path: &Path) -> Result<()> {
    std::fs::write(path, encode_pnm(image)).map_err(|e| Error::io(path, e))
}
