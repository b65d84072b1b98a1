//! State-file serialization: UTF-8 JSON objects
//! `{"kind": "ket"|"density", "labels": [...], "dims": [...], "data": [[re,im],...]}`
//! with row-major matrix order for densities. The writer emits 17
//! significant digits so values round-trip exactly.

use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;

use super::{ComplexMatrix, DensityMatrix, Ket, SystemLayout};
use crate::error::TelecapError;
use crate::tolerance::Tolerances;
use crate::Result;

/// A state read back from disk.
#[derive(Clone, Debug)]
pub enum LoadedState {
    Ket(Ket),
    Density(DensityMatrix),
}

impl LoadedState {
    pub fn layout(&self) -> &SystemLayout {
        match self {
            LoadedState::Ket(k) => k.layout(),
            LoadedState::Density(d) => d.layout(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LoadedState::Ket(_) => "ket",
            LoadedState::Density(_) => "density",
        }
    }

    /// View as a density matrix, promoting a ket to its projector.
    pub fn to_density(&self) -> DensityMatrix {
        match self {
            LoadedState::Ket(k) => k.to_density(),
            LoadedState::Density(d) => d.clone(),
        }
    }
}

#[derive(Deserialize)]
struct FileState {
    kind: String,
    labels: Vec<String>,
    dims: Vec<usize>,
    data: Vec<[f64; 2]>,
}

fn push_complex(out: &mut String, z: Complex64) {
    // 17 significant digits: enough to reproduce any f64 exactly.
    out.push('[');
    out.push_str(&format!("{:.16e}", z.re));
    out.push(',');
    out.push_str(&format!("{:.16e}", z.im));
    out.push(']');
}

fn header_json(kind: &str, layout: &SystemLayout) -> String {
    let labels = layout
        .labels()
        .iter()
        .map(|l| serde_json::to_string(l).expect("label serializes"))
        .collect::<Vec<_>>()
        .join(",");
    let dims = layout
        .dims()
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(",");
    format!("{{\"kind\":\"{kind}\",\"labels\":[{labels}],\"dims\":[{dims}],\"data\":[")
}

/// Serialize a ket to the state-file JSON format.
pub fn ket_to_json_string(ket: &Ket) -> String {
    let mut out = header_json("ket", ket.layout());
    for (i, &z) in ket.amplitudes().iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        push_complex(&mut out, z);
    }
    out.push_str("]}\n");
    out
}

/// Serialize a density matrix to the state-file JSON format (row-major).
pub fn density_to_json_string(rho: &DensityMatrix) -> String {
    let mut out = header_json("density", rho.layout());
    for (i, &z) in rho.matrix().entries().iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        push_complex(&mut out, z);
    }
    out.push_str("]}\n");
    out
}

/// Serialize either kind of state.
pub fn state_to_json_string(state: &LoadedState) -> String {
    match state {
        LoadedState::Ket(k) => ket_to_json_string(k),
        LoadedState::Density(d) => density_to_json_string(d),
    }
}

/// Parse and fully validate a state from its JSON text.
pub fn parse_state_json(text: &str, tol: &Tolerances) -> Result<LoadedState> {
    let file: FileState =
        serde_json::from_str(text).map_err(|e| TelecapError::Parse(format!("state file: {e}")))?;
    let layout = SystemLayout::new_with(file.labels, file.dims, tol)?;
    let dim = layout.total_dim();
    let data: Vec<Complex64> = file
        .data
        .iter()
        .map(|[re, im]| Complex64::new(*re, *im))
        .collect();
    match file.kind.as_str() {
        "ket" => {
            if data.len() != dim {
                return Err(TelecapError::Parse(format!(
                    "ket data length {} does not match total dimension {dim}",
                    data.len()
                )));
            }
            Ok(LoadedState::Ket(Ket::new_with(layout, data, tol)?))
        }
        "density" => {
            if data.len() != dim * dim {
                return Err(TelecapError::Parse(format!(
                    "density data length {} does not match {dim}×{dim}",
                    data.len()
                )));
            }
            let matrix = ComplexMatrix::from_data(dim, dim, data)?;
            Ok(LoadedState::Density(DensityMatrix::new_with(
                layout, matrix, tol,
            )?))
        }
        other => Err(TelecapError::Parse(format!(
            "unknown state kind {other:?} (expected \"ket\" or \"density\")"
        ))),
    }
}

/// Read and validate a state file.
pub fn read_state_file(path: impl AsRef<Path>, tol: &Tolerances) -> Result<LoadedState> {
    let text = std::fs::read_to_string(path)?;
    parse_state_json(&text, tol)
}

/// Write a state file (non-atomic; the CLI wraps this with a
/// temp-file-and-rename for atomicity).
pub fn write_state_file(path: impl AsRef<Path>, state: &LoadedState) -> Result<()> {
    std::fs::write(path, state_to_json_string(state))?;
    Ok(())
}
