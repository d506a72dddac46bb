//! Subspace, projector and policy files, plus plain-text score dumps.
//!
//! Container: `magic[4] | u32 version | u64 checksum | u64 body_len | body`, with the
//! FNV-1a checksum taken over the body. Numbers in the body are always `f64`.

use std::path::Path;

use nalgebra::DMatrix;

use super::{dim_u32, fnv1a64, read_file, read_text, write_atomic, Cursor, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::selection::{LambdaSide, SelectionPolicy, SkewNormalParams, SolveMethod};
use crate::subspace::{BiasSubspace, Projector, ProjectorKind, Provenance};

pub const SUBSPACE_MAGIC: [u8; 4] = *b"SUB1";
pub const PROJECTOR_MAGIC: [u8; 4] = *b"PRJ1";
pub const POLICY_MAGIC: [u8; 4] = *b"POL1";

const CONTAINER_HEADER: usize = 4 + 4 + 8 + 8;

fn write_container(path: &Path, magic: [u8; 4], body: &[u8]) -> Result<()> {
    let mut bytes = Vec::with_capacity(CONTAINER_HEADER + body.len());
    bytes.extend_from_slice(&magic);
    bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&fnv1a64(body).to_le_bytes());
    bytes.extend_from_slice(&(body.len() as u64).to_le_bytes());
    bytes.extend_from_slice(body);
    write_atomic(path, &bytes)
}

fn open_container(bytes: &[u8], magic: [u8; 4]) -> Result<&[u8]> {
    if bytes.len() < CONTAINER_HEADER {
        return Err(Error::Truncated {
            expected: CONTAINER_HEADER,
            found: bytes.len(),
        });
    }
    let mut c = Cursor::new(bytes);
    let found: [u8; 4] = c.take(4)?.try_into().expect("4 bytes");
    if found != magic {
        return Err(Error::BadMagic {
            expected: magic,
            found,
        });
    }
    let version = c.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            expected: FORMAT_VERSION,
            found: version,
        });
    }
    let checksum = c.u64()?;
    let len = usize::try_from(c.u64()?).map_err(|_| Error::format("container", "body length overflows"))?;
    if c.remaining() < len {
        return Err(Error::Truncated {
            expected: CONTAINER_HEADER + len,
            found: bytes.len(),
        });
    }
    if c.remaining() > len {
        return Err(Error::format("container", format!("{} trailing bytes", c.remaining() - len)));
    }
    let body = c.take(len)?;
    let actual = fnv1a64(body);
    if actual != checksum {
        return Err(Error::ChecksumMismatch {
            expected: checksum,
            actual,
        });
    }
    Ok(body)
}

fn push_f64s<'a>(out: &mut Vec<u8>, values: impl IntoIterator<Item = &'a f64>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn push_str(out: &mut Vec<u8>, s: &str) -> Result<()> {
    out.extend_from_slice(&dim_u32("string length", s.len())?.to_le_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

fn read_f64s(c: &mut Cursor<'_>, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| c.f64()).collect()
}

fn read_str(c: &mut Cursor<'_>) -> Result<String> {
    let len = c.u32()? as usize;
    String::from_utf8(c.take(len)?.to_vec()).map_err(|e| Error::format("string field", e.to_string()))
}

fn finish(c: &Cursor<'_>, what: &'static str) -> Result<()> {
    if c.remaining() != 0 {
        return Err(Error::format(what, format!("{} unread bytes", c.remaining())));
    }
    Ok(())
}

/// Malformed bodies that passed the checksum surface as format errors, not truncation.
fn body_error(what: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Truncated { .. } => Error::format(what, "body ends early"),
        other => other,
    }
}

/// Body: `u32 d | u32 k | U (d·k, column-major) | σ (k)`.
pub fn write_subspace(s: &BiasSubspace, path: &Path) -> Result<()> {
    let mut body = Vec::new();
    body.extend_from_slice(&dim_u32("subspace dimension", s.dim())?.to_le_bytes());
    body.extend_from_slice(&dim_u32("subspace rank", s.k())?.to_le_bytes());
    push_f64s(&mut body, s.basis().iter());
    push_f64s(&mut body, s.singular_values());
    write_container(path, SUBSPACE_MAGIC, &body)
}

pub fn read_subspace(path: &Path) -> Result<BiasSubspace> {
    let bytes = read_file(path)?;
    let body = open_container(&bytes, SUBSPACE_MAGIC)?;
    let parse = || -> Result<BiasSubspace> {
        let mut c = Cursor::new(body);
        let d = c.u32()? as usize;
        let k = c.u32()? as usize;
        let basis = DMatrix::from_vec(d, k, read_f64s(&mut c, d * k)?);
        let sv = read_f64s(&mut c, k)?;
        finish(&c, "subspace file")?;
        BiasSubspace::from_basis(basis, sv)
    };
    parse().map_err(body_error("subspace file"))
}

/// Body: `u32 d | u8 kind | u64 source checksum | params | P (d·d, column-major)`.
pub fn write_projector(p: &Projector, path: &Path) -> Result<()> {
    let mut body = Vec::new();
    body.extend_from_slice(&dim_u32("projector dimension", p.dim())?.to_le_bytes());
    body.push(match p.kind() {
        ProjectorKind::Orthogonal => 0,
        ProjectorKind::Calibrated => 1,
    });
    body.extend_from_slice(&p.provenance().source_checksum.to_le_bytes());
    push_str(&mut body, &p.provenance().params)?;
    push_f64s(&mut body, p.matrix().iter());
    write_container(path, PROJECTOR_MAGIC, &body)
}

pub fn read_projector(path: &Path) -> Result<Projector> {
    let bytes = read_file(path)?;
    let body = open_container(&bytes, PROJECTOR_MAGIC)?;
    let parse = || -> Result<Projector> {
        let mut c = Cursor::new(body);
        let d = c.u32()? as usize;
        let kind = match c.u8()? {
            0 => ProjectorKind::Orthogonal,
            1 => ProjectorKind::Calibrated,
            other => return Err(Error::format("projector file", format!("unknown kind {other}"))),
        };
        let source_checksum = c.u64()?;
        let params = read_str(&mut c)?;
        let matrix = DMatrix::from_vec(d, d, read_f64s(&mut c, d * d)?);
        finish(&c, "projector file")?;
        Projector::from_parts(
            matrix,
            kind,
            Provenance {
                source_checksum,
                params,
            },
        )
    };
    parse().map_err(body_error("projector file"))
}

fn side_code(s: LambdaSide) -> u8 {
    match s {
        LambdaSide::WeightsExplicit => 0,
        LambdaSide::WeightsNeutral => 1,
    }
}

fn method_code(m: SolveMethod) -> u8 {
    match m {
        SolveMethod::Newton => 0,
        SolveMethod::Bracketed => 1,
        SolveMethod::GoldenSection => 2,
        SolveMethod::Boundary => 3,
    }
}

/// Body: `neutral (ξ, ω, α) | explicit (ξ, ω, α) | δ_c | λ_c | u32 score_dim | u8 side | u8 method`.
pub fn write_policy(p: &SelectionPolicy, path: &Path) -> Result<()> {
    let mut body = Vec::new();
    for t in [&p.neutral, &p.explicit] {
        push_f64s(&mut body, [&t.location, &t.scale, &t.shape]);
    }
    push_f64s(&mut body, [&p.delta_c, &p.lambda_c]);
    body.extend_from_slice(&dim_u32("score dimension", p.score_dim)?.to_le_bytes());
    body.push(side_code(p.lambda_side));
    body.push(method_code(p.method));
    write_container(path, POLICY_MAGIC, &body)
}

pub fn read_policy(path: &Path) -> Result<SelectionPolicy> {
    let bytes = read_file(path)?;
    let body = open_container(&bytes, POLICY_MAGIC)?;
    let parse = || -> Result<SelectionPolicy> {
        let mut c = Cursor::new(body);
        let n = read_f64s(&mut c, 3)?;
        let e = read_f64s(&mut c, 3)?;
        let delta_c = c.f64()?;
        let lambda_c = c.f64()?;
        let score_dim = c.u32()? as usize;
        let lambda_side = match c.u8()? {
            0 => LambdaSide::WeightsExplicit,
            1 => LambdaSide::WeightsNeutral,
            other => return Err(Error::format("policy file", format!("unknown lambda side {other}"))),
        };
        let method = match c.u8()? {
            0 => SolveMethod::Newton,
            1 => SolveMethod::Bracketed,
            2 => SolveMethod::GoldenSection,
            3 => SolveMethod::Boundary,
            other => return Err(Error::format("policy file", format!("unknown method {other}"))),
        };
        finish(&c, "policy file")?;
        if delta_c.is_nan() || delta_c < 0.0 {
            return Err(Error::format("policy file", format!("bad threshold {delta_c}")));
        }
        Ok(SelectionPolicy {
            neutral: SkewNormalParams::new(n[0], n[1], n[2])?,
            explicit: SkewNormalParams::new(e[0], e[1], e[2])?,
            delta_c,
            lambda_c,
            score_dim,
            lambda_side,
            method,
        })
    };
    parse().map_err(body_error("policy file"))
}

/// One value per line, shortest round-trip formatting.
pub fn write_scores(scores: &[f64], path: &Path) -> Result<()> {
    let mut text = String::with_capacity(scores.len() * 20);
    for s in scores {
        text.push_str(&s.to_string());
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

pub fn read_scores(path: &Path) -> Result<Vec<f64>> {
    read_text(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.trim()
                .parse()
                .map_err(|e| Error::format("score file", format!("line {}: {e}", i + 1)))
        })
        .collect()
}
