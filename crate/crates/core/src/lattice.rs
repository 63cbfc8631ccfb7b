use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    Equidistant,
    Perturbed,
}

/// Strictly increasing sample abscissas `x_0 < x_1 < ... < x_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    points: Vec<f64>,
    kind: LatticeKind,
}

const EQUIDISTANT_REL_TOL: f64 = 1e-12;
const HASH_QUANTUM: f64 = (1u64 << 36) as f64;

impl Lattice {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidLattice(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        if let Some(bad) = points.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidLattice(format!("point {bad} is not finite")));
        }
        if let Some(i) = points.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidLattice(format!(
                "points must be strictly increasing (x[{}] = {} >= x[{}] = {})",
                i,
                points[i],
                i + 1,
                points[i + 1]
            )));
        }
        let kind = classify(&points);
        Ok(Lattice { points, kind })
    }

    /// The integer lattice `{0, 1, ..., upper}`.
    pub fn equidistant(upper: usize) -> Result<Self> {
        Lattice::new((0..=upper).map(|j| j as f64).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Upper index `N`; the lattice has `N + 1` points.
    pub fn upper(&self) -> usize {
        self.points.len() - 1
    }

    /// Affine map of `[x_0, x_N]` onto `[-1, 1]`, endpoints exact.
    pub fn normalize(&self) -> Result<Lattice> {
        let x0 = self.points[0];
        let xn = self.points[self.upper()];
        let span = xn - x0;
        if span == 0.0 {
            return Err(Error::InvalidLattice("x_N equals x_0".into()));
        }
        let last = self.upper();
        let points = self
            .points
            .iter()
            .enumerate()
            .map(|(j, &x)| match j {
                0 => -1.0,
                j if j == last => 1.0,
                _ => 2.0 * (x - x0) / span - 1.0,
            })
            .collect();
        Ok(Lattice {
            points,
            kind: self.kind,
        })
    }

    /// Content hash of the normalized lattice. Two lattices related by an
    /// affine change of variable share the same orthonormal basis and hash.
    pub fn shape_hash(&self) -> u64 {
        let normalized = self.normalize().expect("valid lattice has positive span");
        let mut hasher = Sha256::new();
        hasher.update((normalized.len() as u64).to_le_bytes());
        // Quantize so that affinely equivalent inputs agree despite rounding
        // in the normalization.
        for x in normalized.points() {
            let q = (x * HASH_QUANTUM).round() as i64;
            hasher.update(q.to_le_bytes());
        }
        let digest = hasher.finalize();
        let mut head = [0u8; 8];
        head.copy_from_slice(&digest[..8]);
        u64::from_le_bytes(head)
    }
}

fn classify(points: &[f64]) -> LatticeKind {
    let span = points[points.len() - 1] - points[0];
    let step = span / (points.len() - 1) as f64;
    let uniform = points
        .windows(2)
        .all(|w| ((w[1] - w[0]) - step).abs() <= EQUIDISTANT_REL_TOL * step.abs());
    if uniform {
        LatticeKind::Equidistant
    } else {
        LatticeKind::Perturbed
    }
}
