//! `EMB1` embedding files with their manifest and label sidecars.
//!
//! For `dir/x.emb` the sidecars are `dir/x.manifest` and `dir/x.labels.tsv`.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use super::{dim_u32, fnv1a64, read_file, read_text, write_atomic, Cursor, Dtype};
use crate::embedding::{EmbeddingMatrix, Group, LabelRecord};
use crate::error::{Error, Result};

pub const EMB_MAGIC: [u8; 4] = *b"EMB1";
pub const FORMAT_VERSION: u32 = 1;
/// magic + version + dtype + d + n + checksum.
pub const EMB_HEADER_LEN: usize = 4 + 4 + 4 + 4 + 4 + 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub format_version: u32,
    pub dtype: Dtype,
    pub d: usize,
    pub n: usize,
    /// Relative to the manifest's directory.
    pub label_file: String,
    pub checksum: u64,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        format!(
            "format_version={}\ndtype={}\nd={}\nn={}\nlabel_file={}\nchecksum={:016x}\n",
            self.format_version, self.dtype, self.d, self.n, self.label_file, self.checksum
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut version = None;
        let mut dtype = None;
        let mut d = None;
        let mut n = None;
        let mut label_file = None;
        let mut checksum = None;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::format("manifest", format!("expected key=value, got {line:?}")))?;
            let bad = |e: &dyn std::fmt::Display| Error::format("manifest", format!("{key}: {e}"));
            match key.trim() {
                "format_version" => version = Some(value.parse::<u32>().map_err(|e| bad(&e))?),
                "dtype" => dtype = Some(value.parse::<Dtype>()?),
                "d" => d = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
                "n" => n = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
                "label_file" => label_file = Some(value.to_string()),
                "checksum" => checksum = Some(u64::from_str_radix(value, 16).map_err(|e| bad(&e))?),
                // unknown keys are tolerated so writers can add fields
                _ => {}
            }
        }
        let missing = |k: &str| Error::format("manifest", format!("missing key {k}"));
        Ok(Manifest {
            format_version: version.ok_or_else(|| missing("format_version"))?,
            dtype: dtype.ok_or_else(|| missing("dtype"))?,
            d: d.ok_or_else(|| missing("d"))?,
            n: n.ok_or_else(|| missing("n"))?,
            label_file: label_file.ok_or_else(|| missing("label_file"))?,
            checksum: checksum.ok_or_else(|| missing("checksum"))?,
        })
    }
}

pub fn manifest_path(path: &Path) -> PathBuf {
    path.with_extension("manifest")
}

pub fn labels_path(path: &Path) -> PathBuf {
    path.with_extension("labels.tsv")
}

fn encode_values(m: &DMatrix<f64>, dtype: Dtype) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(m.len() * dtype.width());
    for (j, col) in m.column_iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            match dtype {
                Dtype::F64 => out.extend_from_slice(&v.to_le_bytes()),
                Dtype::F32 => {
                    let narrow = v as f32;
                    // finite f64 values can still overflow f32
                    if !narrow.is_finite() {
                        return Err(Error::NonFinite { column: j, row: i });
                    }
                    out.extend_from_slice(&narrow.to_le_bytes());
                }
            }
        }
    }
    Ok(out)
}

/// Writes `m` as `EMB1` plus manifest and label sidecars.
pub fn write_embeddings(m: &EmbeddingMatrix, path: &Path, dtype: Dtype) -> Result<Manifest> {
    crate::embedding::check_finite(m.values())?;
    let payload = encode_values(m.values(), dtype)?;
    let checksum = fnv1a64(&payload);

    let mut bytes = Vec::with_capacity(EMB_HEADER_LEN + payload.len());
    bytes.extend_from_slice(&EMB_MAGIC);
    bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&dtype.code().to_le_bytes());
    bytes.extend_from_slice(&dim_u32("embedding dimension", m.dim())?.to_le_bytes());
    bytes.extend_from_slice(&dim_u32("embedding count", m.len())?.to_le_bytes());
    bytes.extend_from_slice(&checksum.to_le_bytes());
    bytes.extend_from_slice(&payload);

    let labels = labels_path(path);
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        dtype,
        d: m.dim(),
        n: m.len(),
        label_file: labels
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        checksum,
    };
    let label_text = labels_to_text(m.labels())?;
    write_atomic(path, &bytes)?;
    write_atomic(&labels, label_text.as_bytes())?;
    write_atomic(&manifest_path(path), manifest.to_text().as_bytes())?;
    Ok(manifest)
}

/// Reads an `EMB1` file and, when present, its sidecars.
pub fn read_embeddings(path: &Path) -> Result<EmbeddingMatrix> {
    read_embeddings_with_dtype(path).map(|(m, _)| m)
}

/// Like [`read_embeddings`] but also reports the on-disk dtype. `f32` values are widened exactly.
pub fn read_embeddings_with_dtype(path: &Path) -> Result<(EmbeddingMatrix, Dtype)> {
    let bytes = read_file(path)?;
    let (values, dtype, checksum) = decode(&bytes)?;

    let manifest_file = manifest_path(path);
    let labels_file = if manifest_file.exists() {
        let manifest = read_manifest(&manifest_file)?;
        if manifest.checksum != checksum {
            return Err(Error::ChecksumMismatch {
                expected: manifest.checksum,
                actual: checksum,
            });
        }
        if manifest.d != values.nrows() || manifest.n != values.ncols() || manifest.dtype != dtype {
            return Err(Error::format(
                "manifest",
                format!(
                    "manifest says {}x{} {} but file holds {}x{} {}",
                    manifest.d,
                    manifest.n,
                    manifest.dtype,
                    values.nrows(),
                    values.ncols(),
                    dtype
                ),
            ));
        }
        Some(path.with_file_name(&manifest.label_file))
    } else {
        Some(labels_path(path)).filter(|p| p.exists())
    };

    let m = match labels_file {
        Some(lp) => {
            let labels = read_labels(&lp)?;
            EmbeddingMatrix::new(values, labels)?
        }
        None => EmbeddingMatrix::unlabeled(values)?,
    };
    Ok((m, dtype))
}

/// Header checks run in order: length, magic, version, dtype, payload size, checksum.
fn decode(bytes: &[u8]) -> Result<(DMatrix<f64>, Dtype, u64)> {
    if bytes.len() < EMB_HEADER_LEN {
        return Err(Error::Truncated {
            expected: EMB_HEADER_LEN,
            found: bytes.len(),
        });
    }
    let mut c = Cursor::new(bytes);
    let magic: [u8; 4] = c.take(4)?.try_into().expect("4 bytes");
    if magic != EMB_MAGIC {
        return Err(Error::BadMagic {
            expected: EMB_MAGIC,
            found: magic,
        });
    }
    let version = c.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            expected: FORMAT_VERSION,
            found: version,
        });
    }
    let code = c.u32()?;
    let dtype = Dtype::from_code(code)
        .ok_or_else(|| Error::format("EMB1 header", format!("unknown dtype code {code}")))?;
    let d = c.u32()? as usize;
    let n = c.u32()? as usize;
    let checksum = c.u64()?;
    if d == 0 {
        return Err(Error::format("EMB1 header", "dimension d must be positive"));
    }
    let expected = d
        .checked_mul(n)
        .and_then(|x| x.checked_mul(dtype.width()))
        .ok_or_else(|| Error::format("EMB1 header", format!("{d}x{n} overflows")))?;
    let found = c.remaining();
    if found < expected {
        return Err(Error::Truncated {
            expected: EMB_HEADER_LEN + expected,
            found: bytes.len(),
        });
    }
    if found > expected {
        return Err(Error::format(
            "EMB1 payload",
            format!("{} trailing bytes after {d}x{n} values", found - expected),
        ));
    }
    let payload = c.take(expected)?;
    let actual = fnv1a64(payload);
    if actual != checksum {
        return Err(Error::ChecksumMismatch {
            expected: checksum,
            actual,
        });
    }
    let values: Vec<f64> = match dtype {
        Dtype::F64 => payload
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect(),
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes(b.try_into().expect("4 bytes"))))
            .collect(),
    };
    let m = DMatrix::from_vec(d, n, values);
    crate::embedding::check_finite(&m)?;
    Ok((m, dtype, checksum))
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    Manifest::parse(&read_text(path)?)
}

fn labels_to_text(labels: &[LabelRecord]) -> Result<String> {
    let mut out = String::new();
    for (j, l) in labels.iter().enumerate() {
        if l.source_id.contains(['\t', '\n', '\r']) {
            return Err(Error::format(
                "label file",
                format!("source_id of column {j} contains a tab or newline"),
            ));
        }
        out.push_str(&l.source_id);
        out.push('\t');
        out.push_str(l.group.as_str());
        out.push('\t');
        if let Some(a) = l.attribute {
            out.push_str(&a.to_string());
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_labels(labels: &[LabelRecord], path: &Path) -> Result<()> {
    write_atomic(path, labels_to_text(labels)?.as_bytes())
}

/// One `source_id<TAB>group<TAB>attribute` line per column; the attribute may be empty.
pub fn read_labels(path: &Path) -> Result<Vec<LabelRecord>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::format(
                "label file",
                format!("line {}: expected 3 tab-separated fields, got {}", lineno + 1, fields.len()),
            ));
        }
        let group: Group = fields[1].parse()?;
        let mut record = LabelRecord::new(fields[0], group);
        if !fields[2].is_empty() {
            let a: f64 = fields[2].parse().map_err(|e| {
                Error::format("label file", format!("line {}: attribute: {e}", lineno + 1))
            })?;
            if !a.is_finite() {
                return Err(Error::format(
                    "label file",
                    format!("line {}: attribute must be finite", lineno + 1),
                ));
            }
            record = record.with_attribute(a);
        }
        out.push(record);
    }
    Ok(out)
}
