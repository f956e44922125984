//! Bit-exact file formats for views, datasets and model parameters.
//!
//! View file (`.shv`): bytes 0-3 magic `"SHV1"`, bytes 4-7 reserved zero,
//! bytes 8-11 row count (u32 little endian), bytes 12-15 column count (u32
//! little endian), followed by `rows * cols` IEEE-754 binary64 values, little
//! endian, row major. Every float survives a write/read round trip bit for
//! bit.
//!
//! A dataset manifest is a JSON document `{"views": ["a.shv", ...]}` whose
//! paths are resolved relative to the manifest file itself.
//!
//! Parameters are stored as a single JSON document with keys `direction`,
//! `matrices` (list of nested row-major arrays) and `noise_vars`. serde_json
//! emits shortest round-trip decimal literals, so floats survive the JSON
//! round trip exactly as well.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{Direction, ModelParams, MultiViewData};
use crate::error::{Result, ShicaError};
use crate::linalg::Matrix;

const MAGIC: [u8; 4] = *b"SHV1";
const HEADER_LEN: usize = 16;

/// Reads a `.shv` view file.
pub fn read_view_file(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let mut file = fs::File::open(path).map_err(|e| ShicaError::io(path, e))?;
    let mut header = [0u8; HEADER_LEN];
    file.read_exact(&mut header)
        .map_err(|_| ShicaError::Format(format!("{}: truncated header", path.display())))?;
    if header[0..4] != MAGIC {
        return Err(ShicaError::Format(format!(
            "{}: bad magic bytes {:02x?}",
            path.display(),
            &header[0..4]
        )));
    }
    let rows = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| ShicaError::Format(format!("{}: dimension overflow", path.display())))?;
    let mut payload = vec![0u8; count * 8];
    file.read_exact(&mut payload)
        .map_err(|_| ShicaError::Format(format!("{}: truncated payload", path.display())))?;
    let mut trailing = [0u8; 1];
    if file.read(&mut trailing).map_err(|e| ShicaError::io(path, e))? != 0 {
        return Err(ShicaError::Format(format!(
            "{}: trailing bytes after payload",
            path.display()
        )));
    }
    let mut values = Vec::with_capacity(count);
    for chunk in payload.chunks_exact(8) {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(ShicaError::Data(format!(
                "{}: non-finite value in payload",
                path.display()
            )));
        }
        values.push(v);
    }
    Ok(Matrix::from_row_slice(rows, cols, &values))
}

/// Writes a matrix as a `.shv` view file, replacing any existing file.
pub fn write_view_file(mat: &Matrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if !mat.iter().all(|v| v.is_finite()) {
        return Err(ShicaError::Data(
            "refusing to write non-finite matrix".into(),
        ));
    }
    let mut buf = Vec::with_capacity(HEADER_LEN + mat.len() * 8);
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&[0u8; 4]);
    buf.extend_from_slice(&(mat.nrows() as u32).to_le_bytes());
    buf.extend_from_slice(&(mat.ncols() as u32).to_le_bytes());
    for i in 0..mat.nrows() {
        for j in 0..mat.ncols() {
            buf.extend_from_slice(&mat[(i, j)].to_le_bytes());
        }
    }
    let mut file = fs::File::create(path).map_err(|e| ShicaError::io(path, e))?;
    file.write_all(&buf).map_err(|e| ShicaError::io(path, e))?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestDoc {
    views: Vec<String>,
}

/// Loads a dataset from a JSON manifest listing view files in order.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<MultiViewData> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| ShicaError::io(path, e))?;
    let doc: ManifestDoc = serde_json::from_str(&text)
        .map_err(|e| ShicaError::Format(format!("{}: {e}", path.display())))?;
    if doc.views.is_empty() {
        return Err(ShicaError::Format(format!(
            "{}: manifest lists no views",
            path.display()
        )));
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let views = doc
        .views
        .iter()
        .map(|rel| read_view_file(base.join(rel)))
        .collect::<Result<Vec<_>>>()?;
    MultiViewData::new(views)
}

/// Writes view files `view_<k>.shv` plus a manifest into `dir`; returns the
/// manifest path.
pub fn save_dataset(data: &MultiViewData, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| ShicaError::io(dir, e))?;
    let mut names = Vec::with_capacity(data.m());
    for (k, view) in data.views().iter().enumerate() {
        let name = format!("view_{k:03}.shv");
        write_view_file(view, dir.join(&name))?;
        names.push(name);
    }
    let manifest = dir.join("manifest.json");
    let doc = ManifestDoc { views: names };
    let text = serde_json::to_string_pretty(&doc).expect("manifest serialization");
    fs::write(&manifest, text).map_err(|e| ShicaError::io(&manifest, e))?;
    Ok(manifest)
}

#[derive(Debug, Serialize, Deserialize)]
struct ParamsDoc {
    direction: Direction,
    matrices: Vec<Vec<Vec<f64>>>,
    noise_vars: Vec<Vec<f64>>,
}

/// Writes model parameters as a JSON document.
pub fn write_params(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let matrices = params
        .matrices
        .iter()
        .map(|m| {
            (0..m.nrows())
                .map(|i| m.row(i).iter().copied().collect())
                .collect()
        })
        .collect();
    let doc = ParamsDoc {
        direction: params.direction,
        matrices,
        noise_vars: params.noise_vars.clone(),
    };
    let text = serde_json::to_string_pretty(&doc).expect("params serialization");
    fs::write(path, text).map_err(|e| ShicaError::io(path, e))
}

/// Reads model parameters back, validating the structural invariants.
pub fn read_params(path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| ShicaError::io(path, e))?;
    let doc: ParamsDoc = serde_json::from_str(&text)
        .map_err(|e| ShicaError::Format(format!("{}: {e}", path.display())))?;
    let mut matrices = Vec::with_capacity(doc.matrices.len());
    for (k, rows) in doc.matrices.iter().enumerate() {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(ShicaError::Shape(format!(
                "{}: ragged rows in matrix {k}",
                path.display()
            )));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        matrices.push(Matrix::from_row_slice(nrows, ncols, &flat));
    }
    let params = ModelParams::new(doc.direction, matrices, doc.noise_vars);
    params.validate()?;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use tempfile::tempdir;

    #[test]
    fn round_trip_small_matrix() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.shv");
        let m = Matrix::from_row_slice(2, 3, &[1.0, -2.5, 3.25, 0.0, 1e-300, 4.75]);
        write_view_file(&m, &path).unwrap();
        let back = read_view_file(&path).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn file_size_is_header_plus_payload() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("one.shv");
        write_view_file(&Matrix::from_row_slice(1, 1, &[0.0]), &path).unwrap();
        // 4 magic + 4 reserved + 4 rows + 4 cols + 8 payload
        assert_eq!(fs::metadata(&path).unwrap().len(), 24);
    }

    #[test]
    fn bad_magic_is_format_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.shv");
        write_view_file(&Matrix::from_row_slice(1, 1, &[1.0]), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        fs::write(&path, bytes).unwrap();
        assert!(matches!(
            read_view_file(&path).unwrap_err(),
            ShicaError::Format(_)
        ));
    }

    #[test]
    fn truncated_payload_is_format_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.shv");
        write_view_file(&Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(
            read_view_file(&path).unwrap_err(),
            ShicaError::Format(_)
        ));
    }

    #[test]
    fn nan_payload_is_data_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.shv");
        write_view_file(&Matrix::from_row_slice(1, 1, &[1.0]), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[16..24].copy_from_slice(&f64::NAN.to_le_bytes());
        fs::write(&path, bytes).unwrap();
        assert!(matches!(
            read_view_file(&path).unwrap_err(),
            ShicaError::Data(_)
        ));
    }

    #[test]
    fn overwrite_replaces_content() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.shv");
        write_view_file(&Matrix::from_row_slice(1, 2, &[1.0, 2.0]), &path).unwrap();
        let second = Matrix::from_row_slice(1, 1, &[9.0]);
        write_view_file(&second, &path).unwrap();
        assert_eq!(read_view_file(&path).unwrap(), second);
    }

    #[test]
    fn manifest_preserves_view_order_and_shape() {
        let dir = tempdir().unwrap();
        let views: Vec<Matrix> = (0..3)
            .map(|k| Matrix::from_fn(4, 10, |i, j| (k * 100 + i * 10 + j) as f64))
            .collect();
        let data = MultiViewData::new(views.clone()).unwrap();
        let manifest = save_dataset(&data, dir.path()).unwrap();
        let back = load_manifest(&manifest).unwrap();
        assert_eq!(back.m(), 3);
        for k in 0..3 {
            assert_eq!(back.view(k), &views[k]);
        }
    }

    #[test]
    fn manifest_with_mismatched_views_is_shape_error() {
        let dir = tempdir().unwrap();
        write_view_file(&Matrix::zeros(4, 100), dir.path().join("a.shv")).unwrap();
        write_view_file(&Matrix::zeros(4, 99), dir.path().join("b.shv")).unwrap();
        let manifest = dir.path().join("manifest.json");
        fs::write(&manifest, r#"{"views": ["a.shv", "b.shv"]}"#).unwrap();
        assert!(matches!(
            load_manifest(&manifest).unwrap_err(),
            ShicaError::Shape(_)
        ));
    }

    #[test]
    fn empty_manifest_is_format_error() {
        let dir = tempdir().unwrap();
        let manifest = dir.path().join("manifest.json");
        fs::write(&manifest, r#"{"views": []}"#).unwrap();
        assert!(matches!(
            load_manifest(&manifest).unwrap_err(),
            ShicaError::Format(_)
        ));
    }

    #[test]
    fn missing_view_file_is_io_error() {
        let dir = tempdir().unwrap();
        let manifest = dir.path().join("manifest.json");
        fs::write(&manifest, r#"{"views": ["nope.shv"]}"#).unwrap();
        assert!(matches!(
            load_manifest(&manifest).unwrap_err(),
            ShicaError::Io { .. }
        ));
    }

    #[test]
    fn params_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("params.json");
        let params = ModelParams::new(
            Direction::Unmixing,
            vec![Matrix::from_row_slice(2, 2, &[1.5, 0.25, -0.125, 2.0])],
            vec![vec![0.5, 1.25]],
        );
        write_params(&params, &path).unwrap();
        let back = read_params(&path).unwrap();
        assert_eq!(back.direction, Direction::Unmixing);
        assert_eq!(back.matrices, params.matrices);
        assert_eq!(back.noise_vars, params.noise_vars);
    }

    proptest! {
        #[test]
        fn view_round_trip_is_identity(
            rows in 1usize..6,
            cols in 1usize..6,
            raw in proptest::collection::vec(-1e12f64..1e12, 36),
        ) {
            let dir = tempdir().unwrap();
            let path = dir.path().join("rt.shv");
            let m = Matrix::from_fn(rows, cols, |i, j| raw[i * cols + j]);
            write_view_file(&m, &path).unwrap();
            let back = read_view_file(&path).unwrap();
            prop_assert_eq!(m, back);
        }
    }
}
