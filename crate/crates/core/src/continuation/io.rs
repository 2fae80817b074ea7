//! Branch files: JSON summary, binary state sidecar and diagram CSV.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::branch::{Branch, BranchPointEvent, ContinuationSettings, Parent, Termination};
use super::grid::{Grid, Measures, StateVector};
use crate::error::{Error, Result};
use crate::params::ModelParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchMeta {
    pub params: ModelParams,
    pub settings: ContinuationSettings,
    pub n: usize,
    pub ell: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub d: f64,
    pub measures: Measures,
    pub unstable_count: usize,
    pub unstable_complex: usize,
    pub negative: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchFile {
    pub meta: BranchMeta,
    pub id: usize,
    pub parent: Parent,
    pub termination: Termination,
    pub points: Vec<PointRecord>,
    pub events: Vec<BranchPointEvent>,
    /// Nodal states in point order, when embedded rather than in a sidecar.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<StateVector>>,
}

impl BranchFile {
    pub fn new(branch: &Branch, p: &ModelParams, g: &Grid, settings: &ContinuationSettings, embed_states: bool) -> Self {
        Self {
            meta: BranchMeta { params: *p, settings: *settings, n: g.n, ell: g.ell },
            id: branch.id,
            parent: branch.parent,
            termination: branch.termination,
            points: branch
                .points
                .iter()
                .map(|pt| PointRecord {
                    d: pt.d,
                    measures: pt.measures,
                    unstable_count: pt.unstable_count,
                    unstable_complex: pt.unstable_complex,
                    negative: pt.negative,
                })
                .collect(),
            events: branch.events.clone(),
            states: embed_states.then(|| branch.points.iter().map(|pt| pt.state.clone()).collect()),
        }
    }
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`,
/// so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().ok_or_else(|| Error::InvalidParams(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = name.to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_branch_json(path: &Path, file: &BranchFile) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(file)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_branch_json(path: &Path) -> Result<BranchFile> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

/// Header `n, count` as little-endian `u64`, then `count` rows of
/// `[u_0 … u_{n−1}, v_0 … v_{n−1}]` as little-endian `f64`.
pub fn encode_states(states: &[StateVector]) -> Result<Vec<u8>> {
    let n = states.first().map_or(0, StateVector::len);
    let mut out = Vec::with_capacity(16 + states.len() * 16 * n);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(states.len() as u64).to_le_bytes());
    for s in states {
        if s.u.len() != n || s.v.len() != n {
            return Err(Error::Dimension { expected: n, got: s.u.len().max(s.v.len()) });
        }
        for x in s.u.iter().chain(&s.v) {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_states(mut bytes: &[u8]) -> Result<Vec<StateVector>> {
    let mut word = [0u8; 8];
    let mut next = |b: &mut &[u8]| -> Result<[u8; 8]> {
        b.read_exact(&mut word)?;
        Ok(word)
    };
    let n = u64::from_le_bytes(next(&mut bytes)?) as usize;
    let count = u64::from_le_bytes(next(&mut bytes)?) as usize;
    if bytes.len() != count * 16 * n {
        return Err(Error::Dimension { expected: count * 16 * n, got: bytes.len() });
    }
    let values: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    Ok(values.chunks_exact((2 * n).max(1)).take(count).map(|row| StateVector { u: row[..n].to_vec(), v: row[n..].to_vec() }).collect())
}

pub fn write_states(path: &Path, states: &[StateVector]) -> Result<()> {
    write_atomic(path, &encode_states(states)?)
}

pub fn read_states(path: &Path) -> Result<Vec<StateVector>> {
    decode_states(&fs::read(path)?)
}

/// `branch_id,d,v0,stable`, one row per point, branches in the given order.
pub fn diagram_csv(branches: &[&Branch]) -> String {
    let mut out = String::from("branch_id,d,v0,stable\n");
    for b in branches {
        for pt in &b.points {
            out.push_str(&format!("{},{:.16e},{:.16e},{}\n", b.id, pt.d, pt.measures.v0, u8::from(pt.unstable_count == 0)));
        }
    }
    out
}
