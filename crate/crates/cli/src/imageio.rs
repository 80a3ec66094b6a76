//! PGM and raw float64 image files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use tvdeblur_core::Image;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Pgm,
    Raw,
}

impl Format {
    pub fn of(path: &Path) -> Result<Format, CliError> {
        match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()) {
            Some(e) if e == "pgm" => Ok(Format::Pgm),
            Some(e) if e == "raw" || e == "f64" => Ok(Format::Raw),
            _ => Err(CliError::Usage(format!(
                "cannot tell the image format of {} (use .pgm, .raw or .f64)",
                path.display()
            ))),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RawHeader {
    rows: usize,
    cols: usize,
    dtype: String,
    order: String,
}

/// `image.raw` -> `image.raw.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Write through a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| CliError::Data(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Data(format!("cannot encode {}: {e}", path.display())))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_image(path: &Path) -> Result<Image, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let bad = |msg: String| CliError::Data(format!("{}: {msg}", path.display()));
    match Format::of(path)? {
        Format::Pgm => decode_pgm(&bytes).map_err(bad),
        Format::Raw => {
            let side = sidecar_path(path);
            let text = fs::read_to_string(&side)
                .map_err(|e| CliError::Data(format!("cannot read sidecar {}: {e}", side.display())))?;
            let header: RawHeader = serde_json::from_str(&text)
                .map_err(|e| CliError::Data(format!("bad sidecar {}: {e}", side.display())))?;
            if header.dtype != "f64" || header.order != "little" {
                return Err(bad(format!("unsupported raw layout {}/{}", header.dtype, header.order)));
            }
            if bytes.len() != header.rows * header.cols * 8 {
                return Err(bad(format!(
                    "expected {} bytes for {}x{}, found {}",
                    header.rows * header.cols * 8,
                    header.rows,
                    header.cols,
                    bytes.len()
                )));
            }
            let values = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Image::from_shape_vec(header.rows, header.cols, values).map_err(|e| bad(e.to_string()))
        }
    }
}

pub fn write_image(path: &Path, image: &Image) -> Result<(), CliError> {
    match Format::of(path)? {
        Format::Pgm => write_atomic(path, &encode_pgm(image, 65535)),
        Format::Raw => {
            let mut bytes = Vec::with_capacity(image.len() * 8);
            for v in image.view().iter() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            write_atomic(path, &bytes)?;
            let header = RawHeader {
                rows: image.rows(),
                cols: image.cols(),
                dtype: "f64".into(),
                order: "little".into(),
            };
            write_json(&sidecar_path(path), &header)
        }
    }
}

struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self) -> Result<usize, String> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| format!("expected a number at byte {start}"))
    }
}

/// Decode P2 or P5, mapping samples linearly onto [0, 1].
pub fn decode_pgm(bytes: &[u8]) -> Result<Image, String> {
    if bytes.len() < 2 || bytes[0] != b'P' || !matches!(bytes[1], b'2' | b'5') {
        return Err("not a P2/P5 PGM file".into());
    }
    let binary = bytes[1] == b'5';
    let mut t = Tokens { bytes, pos: 2 };
    let cols = t.number()?;
    let rows = t.number()?;
    let maxval = t.number()?;
    if rows == 0 || cols == 0 {
        return Err("empty image".into());
    }
    if maxval == 0 || maxval > 65535 {
        return Err(format!("maxval {maxval} out of range"));
    }
    let n = rows * cols;
    let mut values = Vec::with_capacity(n);
    if binary {
        // exactly one whitespace byte after maxval
        let start = t.pos + 1;
        let width = if maxval < 256 { 1 } else { 2 };
        let data = bytes.get(start..start + n * width).ok_or("truncated pixel data")?;
        for c in data.chunks_exact(width) {
            let s = if width == 1 { c[0] as usize } else { u16::from_be_bytes([c[0], c[1]]) as usize };
            values.push(s);
        }
    } else {
        for _ in 0..n {
            values.push(t.number()?);
        }
    }
    if let Some(s) = values.iter().find(|&&s| s > maxval) {
        return Err(format!("sample {s} exceeds maxval {maxval}"));
    }
    let scale = maxval as f64;
    let data = Array2::from_shape_vec((rows, cols), values.into_iter().map(|s| s as f64 / scale).collect())
        .map_err(|e| e.to_string())?;
    Image::new(data).map_err(|e| e.to_string())
}

/// Binary PGM, values clamped to [0, 1] and rounded onto `0..=maxval`.
pub fn encode_pgm(image: &Image, maxval: u16) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", image.cols(), image.rows(), maxval).into_bytes();
    for &v in image.view().iter() {
        let s = (v.clamp(0.0, 1.0) * maxval as f64).round() as u16;
        if maxval < 256 {
            out.push(s as u8);
        } else {
            out.extend_from_slice(&s.to_be_bytes());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_with_comments() {
        let img = decode_pgm(b"P2\n# hi\n3 2\n# again\n255\n0 255 51\n102 0 255\n").unwrap();
        assert_eq!(img.dim(), (2, 3));
        assert_eq!(img.get(0, 1), 1.0);
        assert!((img.get(0, 2) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn binary_round_trips() {
        let img = Image::from_shape_vec(2, 2, vec![0.0, 0.25, 1.0, 0.5]).unwrap();
        for maxval in [255u16, 65535] {
            let back = decode_pgm(&encode_pgm(&img, maxval)).unwrap();
            assert!(back.max_abs_diff(&img) <= 0.5 / maxval as f64 + 1e-15);
        }
    }

    #[test]
    fn clamps_on_export() {
        let img = Image::from_shape_vec(2, 2, vec![-0.5, 3.0, 0.0, 1.0]).unwrap();
        assert_eq!(&encode_pgm(&img, 255)[11..], &[0u8, 255, 0, 255]);
    }

    #[test]
    fn rejects_garbage() {
        assert!(decode_pgm(b"P6\n1 1\n255\n").is_err());
        assert!(decode_pgm(b"P5\n2 2\n255\n\x00").is_err());
        assert!(decode_pgm(b"P2\n1 1\n10\n11\n").is_err());
    }
}
