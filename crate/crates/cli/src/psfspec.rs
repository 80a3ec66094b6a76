//! PSF spec strings and PSF text files.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use tvdeblur_core::harness::{gaussian_psf, motion_psf};
use tvdeblur_core::Psf;

use crate::CliError;

/// `delta`, `gaussian:hsize=9,delta=2` or `motion:length=9,angle=30`.
pub fn parse_spec(spec: &str) -> Result<Psf, CliError> {
    let usage = |msg: String| CliError::Usage(format!("bad PSF spec '{spec}': {msg}"));
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let mut args = HashMap::new();
    for part in rest.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| usage(format!("expected key=value, got '{part}'")))?;
        let v: f64 = v.trim().parse().map_err(|_| usage(format!("'{v}' is not a number")))?;
        args.insert(k.trim().to_string(), v);
    }
    let mut take = |key: &str| args.remove(key).ok_or_else(|| usage(format!("missing {key}")));
    let psf = match kind.trim() {
        "delta" => Ok(Psf::delta()),
        "gaussian" => {
            let hsize = take("hsize")?;
            let delta = take("delta")?;
            if hsize.fract() != 0.0 || hsize < 1.0 {
                return Err(usage("hsize must be a positive integer".into()));
            }
            gaussian_psf(hsize as usize, delta)
        }
        "motion" => {
            let length = take("length")?;
            let angle = take("angle")?;
            if length.fract() != 0.0 || length < 2.0 {
                return Err(usage("length must be an integer of at least 2".into()));
            }
            motion_psf(length as usize, angle)
        }
        other => return Err(usage(format!("unknown kind '{other}'"))),
    }
    .map_err(|e| usage(e.to_string()))?;
    if let Some(k) = args.keys().next() {
        return Err(usage(format!("unexpected key '{k}'")));
    }
    Ok(psf)
}

/// Whitespace-separated rows with an optional `# center r c` line (zero-based).
pub fn parse_file_text(text: &str) -> Result<Psf, String> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut center = None;
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(comment) = line.strip_prefix('#') {
            let words: Vec<&str> = comment.split_whitespace().collect();
            if let ["center", r, c] = words.as_slice() {
                let r = r.parse().map_err(|_| format!("line {}: bad center row", no + 1))?;
                let c = c.parse().map_err(|_| format!("line {}: bad center column", no + 1))?;
                center = Some((r, c));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|w| w.parse::<f64>().map_err(|_| format!("line {}: '{w}' is not a number", no + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    let ncols = rows.first().map(Vec::len).ok_or("no PSF values")?;
    if rows.iter().any(|r| r.len() != ncols) {
        return Err("ragged PSF rows".into());
    }
    let weights = Array2::from_shape_vec((rows.len(), ncols), rows.concat()).map_err(|e| e.to_string())?;
    match center {
        Some(c) => Psf::new(weights, c),
        None => Psf::with_default_center(weights),
    }
    .map_err(|e| e.to_string())
}

pub fn read_file(path: &Path) -> Result<Psf, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    parse_file_text(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}
