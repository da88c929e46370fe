use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};
use thiserror::Error;

use super::{Layer, NetworkLayout, NetworkParams};

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("checkpoint parse error: {0}")]
    Parse(String),
}

/// Formats with 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Text checkpoint: a header with the layer sizes, then for each layer the
/// weight matrix row-major (one row per line) followed by the bias line.
/// All entries carry 17 significant digits, so save/load is lossless.
pub fn save_checkpoint(path: &Path, params: &NetworkParams) -> Result<(), CheckpointError> {
    let layout = params.layout();
    let mut out = String::new();
    out.push_str("network-checkpoint v1\n");
    out.push_str("sizes:");
    for s in &layout.sizes {
        let _ = write!(out, " {s}");
    }
    out.push('\n');
    for layer in &params.layers {
        for row in layer.w.outer_iter() {
            let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        let line: Vec<String> = layer.b.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    crate::output::write_atomic(path, out.as_bytes())?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<NetworkParams, CheckpointError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("network-checkpoint v1") => {}
        other => {
            return Err(CheckpointError::Parse(format!(
                "unexpected header {other:?}"
            )))
        }
    }
    let sizes_line = lines
        .next()
        .ok_or_else(|| CheckpointError::Parse("missing sizes line".into()))?;
    let sizes: Vec<usize> = sizes_line
        .strip_prefix("sizes:")
        .ok_or_else(|| CheckpointError::Parse("missing sizes prefix".into()))?
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|e| CheckpointError::Parse(format!("bad size {t:?}: {e}")))
        })
        .collect::<Result<_, _>>()?;
    let layout =
        NetworkLayout::new(sizes).map_err(|e| CheckpointError::Parse(e.to_string()))?;

    let mut parse_row = |width: usize| -> Result<Vec<f64>, CheckpointError> {
        let line = lines
            .next()
            .ok_or_else(|| CheckpointError::Parse("truncated checkpoint".into()))?;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| CheckpointError::Parse(format!("bad value {t:?}: {e}")))
            })
            .collect::<Result<_, _>>()?;
        if row.len() != width {
            return Err(CheckpointError::Parse(format!(
                "expected {width} entries, got {}",
                row.len()
            )));
        }
        Ok(row)
    };

    let mut layers = Vec::new();
    for pair in layout.sizes.windows(2) {
        let (n_in, n_out) = (pair[0], pair[1]);
        let mut w = Array2::zeros((n_out, n_in));
        for j in 0..n_out {
            let row = parse_row(n_in)?;
            for (k, v) in row.into_iter().enumerate() {
                w[[j, k]] = v;
            }
        }
        let b = Array1::from_vec(parse_row(n_out)?);
        layers.push(Layer { w, b });
    }
    Ok(NetworkParams { layers })
}
