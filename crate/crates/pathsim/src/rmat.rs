//! Reproducible recursive-matrix (R-MAT) edge generation and
//! canonicalization into an undirected simple edge set.

use serde::Serialize;

use crate::error::{SimError, SimResult};

/// Generator parameters. `scale` is the log2 of the vertex count,
/// `edgefactor` the number of generated edges per vertex. The quadrant
/// probabilities default to (0.57, 0.19, 0.19, 0.05) and must sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RmatParams {
    pub scale: u32,
    pub edgefactor: u64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub seed: u64,
}

impl RmatParams {
    pub fn new(scale: u32, edgefactor: u64, seed: u64) -> RmatParams {
        RmatParams {
            scale,
            edgefactor,
            a: 0.57,
            b: 0.19,
            c: 0.19,
            d: 0.05,
            seed,
        }
    }

    pub fn validated(self) -> SimResult<RmatParams> {
        if self.scale < 1 {
            return Err(SimError::InvalidArgument("scale must be >= 1".into()));
        }
        if self.scale >= 63 {
            return Err(SimError::InvalidArgument(
                "scale too large: 2^scale overflows the index type".into(),
            ));
        }
        if self.edgefactor < 1 {
            return Err(SimError::InvalidArgument("edgefactor must be >= 1".into()));
        }
        for (name, p) in [("a", self.a), ("b", self.b), ("c", self.c), ("d", self.d)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::InvalidArgument(format!(
                    "probability {name} = {p} outside [0, 1]"
                )));
            }
        }
        let sum = self.a + self.b + self.c + self.d;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SimError::InvalidArgument(format!(
                "quadrant probabilities sum to {sum}, expected 1"
            )));
        }
        self.raw_edge_count()?;
        Ok(self)
    }

    pub fn nvertices(&self) -> u64 {
        1u64 << self.scale
    }

    /// Number of raw tuples the generator emits: edgefactor * 2^scale.
    pub fn raw_edge_count(&self) -> SimResult<u64> {
        self.edgefactor
            .checked_shl(self.scale)
            .filter(|&n| n >> self.scale == self.edgefactor)
            .ok_or_else(|| {
                SimError::InvalidArgument(
                    "edgefactor * 2^scale overflows the index type".into(),
                )
            })
    }
}

/// Counter-based pseudo-random draw: one draw per (edge, level), so
/// generation is order-independent and seed-stable. The mixer is the
/// splitmix64 finalizer applied to a combination of seed, edge index and
/// recursion level.
fn quadrant_draw(seed: u64, edge: u64, level: u32) -> f64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    let x = splitmix(seed ^ splitmix(edge) ^ splitmix(0x5851_F42D_4C95_7F2D ^ level as u64));
    // 53 high bits -> [0, 1)
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Generate exactly `edgefactor * 2^scale` (i, j) tuples, each endpoint in
/// `[0, 2^scale)`. Identical parameters give identical output.
pub fn generate_edges(params: &RmatParams) -> SimResult<Vec<(u64, u64)>> {
    let params = params.validated()?;
    let count = params.raw_edge_count()?;
    if count > (usize::MAX / 16) as u64 {
        return Err(SimError::InvalidArgument(
            "edge list would not fit in memory".into(),
        ));
    }
    let ab = params.a + params.b;
    let abc = ab + params.c;
    let mut edges = Vec::with_capacity(count as usize);
    for e in 0..count {
        let mut i = 0u64;
        let mut j = 0u64;
        for level in 0..params.scale {
            let u = quadrant_draw(params.seed, e, level);
            let (bi, bj) = if u < params.a {
                (0, 0)
            } else if u < ab {
                (0, 1)
            } else if u < abc {
                (1, 0)
            } else {
                (1, 1)
            };
            i = (i << 1) | bi;
            j = (j << 1) | bj;
        }
        edges.push((i, j));
    }
    Ok(edges)
}

/// Canonicalize a raw tuple list into an undirected simple edge set:
/// self-loops removed, each unordered pair kept once as (min, max), output
/// sorted lexicographically. Idempotent.
pub fn canonicalize(edges: &[(u64, u64)]) -> Vec<(u64, u64)> {
    let mut canon: Vec<(u64, u64)> = edges
        .iter()
        .filter(|(i, j)| i != j)
        .map(|&(i, j)| (i.min(j), i.max(j)))
        .collect();
    canon.sort_unstable();
    canon.dedup();
    canon
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn raw_count_matches_formula() {
        for (scale, ef) in [(1u32, 1u64), (4, 3), (10, 16), (12, 8)] {
            let p = RmatParams::new(scale, ef, 42);
            let edges = generate_edges(&p).unwrap();
            assert_eq!(edges.len() as u64, ef << scale);
            assert!(edges.iter().all(|&(i, j)| i < (1 << scale) && j < (1 << scale)));
        }
        // The scale-25, edgefactor-16 configuration: count checked by
        // arithmetic only.
        let p = RmatParams::new(25, 16, 1);
        assert_eq!(p.raw_edge_count().unwrap(), 536_870_912);
    }

    #[test]
    fn scale_one_edgefactor_one() {
        let p = RmatParams::new(1, 1, 7);
        let edges = generate_edges(&p).unwrap();
        assert_eq!(edges.len(), 2);
        assert!(edges.iter().all(|&(i, j)| i < 2 && j < 2));
    }

    #[test]
    fn determinism_same_seed() {
        let p = RmatParams::new(10, 16, 123);
        assert_eq!(generate_edges(&p).unwrap(), generate_edges(&p).unwrap());
        let q = RmatParams { seed: 124, ..p };
        assert_ne!(generate_edges(&p).unwrap(), generate_edges(&q).unwrap());
    }

    #[test]
    fn overflow_guard() {
        assert!(RmatParams::new(64, 16, 1).validated().is_err());
        assert!(RmatParams::new(62, 16, 1).validated().is_err());
        assert!(RmatParams::new(0, 16, 1).validated().is_err());
    }

    #[test]
    fn bad_probabilities_rejected() {
        let mut p = RmatParams::new(4, 4, 1);
        p.a = 0.9;
        assert!(p.validated().is_err());
        let mut p = RmatParams::new(4, 4, 1);
        p.a = 1.3;
        p.b = -0.3;
        assert!(p.validated().is_err());
    }

    #[test]
    fn canonicalize_examples() {
        assert_eq!(
            canonicalize(&[(1, 2), (2, 1), (1, 2), (3, 3)]),
            vec![(1, 2)]
        );
        assert_eq!(canonicalize(&[]), vec![]);
    }

    #[test]
    fn canonicalize_matches_hash_set_oracle() {
        let p = RmatParams::new(10, 16, 99);
        let raw = generate_edges(&p).unwrap();
        let canon = canonicalize(&raw);

        let oracle: HashSet<(u64, u64)> = raw
            .iter()
            .filter(|(i, j)| i != j)
            .map(|&(i, j)| (i.min(j), i.max(j)))
            .collect();
        assert_eq!(canon.len(), oracle.len());
        assert!(canon.iter().all(|e| oracle.contains(e)));
    }

    #[test]
    fn canonical_properties() {
        let p = RmatParams::new(8, 8, 5);
        let raw = generate_edges(&p).unwrap();
        let canon = canonicalize(&raw);
        // Every pair is (i, j) with i < j, sorted and unique.
        assert!(canon.iter().all(|&(i, j)| i < j));
        assert!(canon.windows(2).all(|w| w[0] < w[1]));
        // Bounded by the raw count and by C(n, 2).
        let n = p.nvertices();
        assert!(canon.len() as u64 <= p.raw_edge_count().unwrap());
        assert!((canon.len() as u64) <= n * (n - 1) / 2);
        // Idempotent.
        assert_eq!(canonicalize(&canon), canon);
    }
}
