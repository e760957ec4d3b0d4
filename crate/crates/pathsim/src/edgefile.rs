//! Edge file format: binary little-endian 2x64-bit vertex ids per edge,
//! with a `<path>.meta` text sidecar carrying the vertex count, edge count
//! and generator parameters as `key = value` lines.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{SimError, SimResult};
use crate::rmat::RmatParams;

/// Sidecar contents.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFileMeta {
    pub nvertices: u64,
    pub nedges: u64,
    pub params: Option<RmatParams>,
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".meta");
    PathBuf::from(os)
}

/// Write edges and sidecar. Edges are written in the order given, so a
/// canonical edge list produces byte-identical files across runs.
pub fn write_edges(path: &Path, meta: &EdgeFileMeta, edges: &[(u64, u64)]) -> SimResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for &(i, j) in edges {
        w.write_all(&i.to_le_bytes())?;
        w.write_all(&j.to_le_bytes())?;
    }
    w.flush()?;

    let mut side = String::new();
    side.push_str(&format!("nvertices = {}\n", meta.nvertices));
    side.push_str(&format!("nedges = {}\n", meta.nedges));
    if let Some(p) = &meta.params {
        side.push_str(&format!("scale = {}\n", p.scale));
        side.push_str(&format!("edgefactor = {}\n", p.edgefactor));
        side.push_str(&format!("a = {}\n", p.a));
        side.push_str(&format!("b = {}\n", p.b));
        side.push_str(&format!("c = {}\n", p.c));
        side.push_str(&format!("d = {}\n", p.d));
        side.push_str(&format!("seed = {}\n", p.seed));
    }
    std::fs::write(meta_path(path), side)?;
    Ok(())
}

/// Read edges plus sidecar back.
pub fn read_edges(path: &Path) -> SimResult<(EdgeFileMeta, Vec<(u64, u64)>)> {
    let meta = read_meta(path)?;
    let mut r = BufReader::new(File::open(path)?);
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() % 16 != 0 {
        return Err(SimError::InvalidArgument(format!(
            "{}: edge file length {} is not a multiple of 16",
            path.display(),
            buf.len()
        )));
    }
    let mut edges = Vec::with_capacity(buf.len() / 16);
    for rec in buf.chunks_exact(16) {
        let i = u64::from_le_bytes(rec[..8].try_into().unwrap());
        let j = u64::from_le_bytes(rec[8..].try_into().unwrap());
        if i >= meta.nvertices || j >= meta.nvertices {
            return Err(SimError::InvalidArgument(format!(
                "{}: edge ({i}, {j}) out of range for {} vertices",
                path.display(),
                meta.nvertices
            )));
        }
        edges.push((i, j));
    }
    if edges.len() as u64 != meta.nedges {
        return Err(SimError::InvalidArgument(format!(
            "{}: sidecar says {} edges, file holds {}",
            path.display(),
            meta.nedges,
            edges.len()
        )));
    }
    Ok((meta, edges))
}

fn read_meta(path: &Path) -> SimResult<EdgeFileMeta> {
    let side = meta_path(path);
    let text = std::fs::read_to_string(&side).map_err(|e| {
        SimError::InvalidArgument(format!("missing sidecar {}: {e}", side.display()))
    })?;
    let mut nvertices = None;
    let mut nedges = None;
    let mut scale = None;
    let mut edgefactor = None;
    let mut probs = [None::<f64>; 4];
    let mut seed = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            SimError::InvalidArgument(format!("{}: expected key = value", side.display()))
        })?;
        let (k, v) = (k.trim(), v.trim());
        fn parse<T: std::str::FromStr>(side: &Path, k: &str, v: &str) -> SimResult<T> {
            v.parse::<T>().map_err(|_| {
                SimError::InvalidArgument(format!("{}: bad value for {k}", side.display()))
            })
        }
        match k {
            "nvertices" => nvertices = Some(parse::<u64>(&side, k, v)?),
            "nedges" => nedges = Some(parse::<u64>(&side, k, v)?),
            "scale" => scale = Some(parse::<u32>(&side, k, v)?),
            "edgefactor" => edgefactor = Some(parse::<u64>(&side, k, v)?),
            "a" => probs[0] = Some(parse::<f64>(&side, k, v)?),
            "b" => probs[1] = Some(parse::<f64>(&side, k, v)?),
            "c" => probs[2] = Some(parse::<f64>(&side, k, v)?),
            "d" => probs[3] = Some(parse::<f64>(&side, k, v)?),
            "seed" => seed = Some(parse::<u64>(&side, k, v)?),
            _ => {}
        }
    }
    let nvertices = nvertices.ok_or_else(|| {
        SimError::InvalidArgument(format!("{}: missing nvertices", side.display()))
    })?;
    let nedges = nedges
        .ok_or_else(|| SimError::InvalidArgument(format!("{}: missing nedges", side.display())))?;
    let params = match (scale, edgefactor, seed) {
        (Some(s), Some(ef), Some(sd)) => Some(RmatParams {
            scale: s,
            edgefactor: ef,
            a: probs[0].unwrap_or(0.57),
            b: probs[1].unwrap_or(0.19),
            c: probs[2].unwrap_or(0.19),
            d: probs[3].unwrap_or(0.05),
            seed: sd,
        }),
        _ => None,
    };
    Ok(EdgeFileMeta {
        nvertices,
        nedges,
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rmat;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.edges");
        let params = RmatParams::new(6, 4, 11);
        let edges = rmat::canonicalize(&rmat::generate_edges(&params).unwrap());
        let meta = EdgeFileMeta {
            nvertices: params.nvertices(),
            nedges: edges.len() as u64,
            params: Some(params),
        };
        write_edges(&path, &meta, &edges).unwrap();
        let (meta2, edges2) = read_edges(&path).unwrap();
        assert_eq!(meta2, meta);
        assert_eq!(edges2, edges);
    }

    #[test]
    fn byte_identical_across_writes() {
        let dir = tempfile::tempdir().unwrap();
        let params = RmatParams::new(5, 4, 3);
        let edges = rmat::canonicalize(&rmat::generate_edges(&params).unwrap());
        let meta = EdgeFileMeta {
            nvertices: params.nvertices(),
            nedges: edges.len() as u64,
            params: Some(params),
        };
        let p1 = dir.path().join("a.edges");
        let p2 = dir.path().join("b.edges");
        write_edges(&p1, &meta, &edges).unwrap();
        write_edges(&p2, &meta, &edges).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        assert_eq!(
            std::fs::read(meta_path(&p1)).unwrap(),
            std::fs::read(meta_path(&p2)).unwrap()
        );
    }

    #[test]
    fn missing_sidecar_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("orphan.edges");
        std::fs::write(&path, [0u8; 16]).unwrap();
        assert!(read_edges(&path).is_err());
    }
}
