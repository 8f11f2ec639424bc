use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::sum::compensated_sum;

use super::ModelKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    /// {-1,+1}^X; digit 0 is +1, digit 1 is -1.
    Spins,
    /// {0,1}^E.
    Edges,
    /// {0,1,2}^E parity classes.
    Parity,
}

/// A finite product configuration space.
///
/// Configuration index `i` has digit `(i / r^p) % r` at position `p`, so
/// position 0 varies fastest; for radix 2 this is bit `p`. Tables are stored
/// and emitted in ascending index order. Configuration strings list
/// positions 0, 1, ... left to right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Space {
    pub kind: SpaceKind,
    pub dims: usize,
}

impl Space {
    pub fn spins(n: usize) -> Self {
        Space {
            kind: SpaceKind::Spins,
            dims: n,
        }
    }

    pub fn edges(m: usize) -> Self {
        Space {
            kind: SpaceKind::Edges,
            dims: m,
        }
    }

    pub fn parity(m: usize) -> Self {
        Space {
            kind: SpaceKind::Parity,
            dims: m,
        }
    }

    pub fn radix(&self) -> usize {
        match self.kind {
            SpaceKind::Parity => 3,
            _ => 2,
        }
    }

    /// Number of configurations, or None past `usize` range.
    pub fn size(&self) -> Option<usize> {
        (self.radix() as u64)
            .checked_pow(self.dims as u32)
            .and_then(|s| usize::try_from(s).ok())
    }

    pub fn digits(&self, mut index: usize) -> Vec<u8> {
        let r = self.radix();
        (0..self.dims)
            .map(|_| {
                let d = (index % r) as u8;
                index /= r;
                d
            })
            .collect()
    }

    pub fn index_of(&self, digits: &[u8]) -> Result<usize> {
        if digits.len() != self.dims {
            return Err(LabError::contract(format!(
                "configuration of length {} in a space of dimension {}",
                digits.len(),
                self.dims
            )));
        }
        let r = self.radix();
        let mut index = 0usize;
        for &d in digits.iter().rev() {
            if d as usize >= r {
                return Err(LabError::contract(format!("digit {d} outside radix {r}")));
            }
            index = index * r + d as usize;
        }
        Ok(index)
    }

    pub fn config_string(&self, index: usize) -> String {
        self.digits(index)
            .into_iter()
            .map(|d| char::from(b'0' + d))
            .collect()
    }

    pub fn parse_config(&self, s: &str) -> Result<usize> {
        let digits = s
            .bytes()
            .map(|b| {
                b.checked_sub(b'0')
                    .filter(|&d| (d as usize) < self.radix())
                    .ok_or_else(|| LabError::validation("config", format!("bad digit in {s:?}")))
            })
            .collect::<Result<Vec<u8>>>()?;
        self.index_of(&digits)
    }
}

/// Explicit probability table over a finite configuration space.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution {
    space: Space,
    model: Option<ModelKind>,
    probs: Vec<f64>,
    weights: Vec<f64>,
    z: f64,
    /// Per-edge open probabilities when this is a product measure on edges.
    product: Option<Vec<f64>>,
}

impl FiniteDistribution {
    /// Normalizes unnormalized weights; `z` is their compensated sum.
    pub fn from_weights(space: Space, model: Option<ModelKind>, weights: Vec<f64>) -> Result<Self> {
        if Some(weights.len()) != space.size() {
            return Err(LabError::contract(format!(
                "{} weights for a space of size {:?}",
                weights.len(),
                space.size()
            )));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(LabError::Numerical(format!(
                "weight {} at configuration {} is not a finite nonnegative number",
                weights[i],
                space.config_string(i)
            )));
        }
        let z = compensated_sum(weights.iter().copied());
        if !(z > 0.0) {
            return Err(LabError::Numerical("total weight is zero".into()));
        }
        let probs = weights.iter().map(|w| w / z).collect();
        Ok(FiniteDistribution {
            space,
            model,
            probs,
            weights,
            z,
            product: None,
        })
    }

    /// A table that is already a probability vector (Z = 1).
    pub fn from_probabilities(space: Space, model: Option<ModelKind>, probs: Vec<f64>) -> Result<Self> {
        let mut d = Self::from_weights(space, model, probs)?;
        d.z = 1.0;
        d.weights = d.probs.clone();
        Ok(d)
    }

    /// Product measure on edges with per-edge open probability `p`.
    pub fn product(p: &[f64], model: Option<ModelKind>) -> Result<Self> {
        let space = Space::edges(p.len());
        for (e, &pe) in p.iter().enumerate() {
            if !(0.0..=1.0).contains(&pe) {
                return Err(LabError::contract(format!("p[{e}] = {pe} is not a probability")));
            }
        }
        let size = space.size().ok_or(LabError::Capacity {
            what: "product table",
            needed: 2f64.powi(p.len() as i32),
            limit: super::MAX_EDGE_CONFIGS as f64,
        })?;
        let probs: Vec<f64> = (0..size)
            .map(|mask| {
                p.iter()
                    .enumerate()
                    .map(|(e, &pe)| if mask >> e & 1 == 1 { pe } else { 1.0 - pe })
                    .product()
            })
            .collect();
        Ok(FiniteDistribution {
            space,
            model,
            weights: probs.clone(),
            probs,
            z: 1.0,
            product: Some(p.to_vec()),
        })
    }

    /// Point mass at `index`.
    pub fn point_mass(space: Space, index: usize) -> Result<Self> {
        let size = space
            .size()
            .ok_or_else(|| LabError::contract("space too large"))?;
        if index >= size {
            return Err(LabError::contract("index outside space"));
        }
        let mut p = vec![0.0; size];
        p[index] = 1.0;
        Self::from_probabilities(space, None, p)
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn model(&self) -> Option<ModelKind> {
        self.model
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.probs[index]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Normalization constant (sum of unnormalized weights).
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn product_marginals(&self) -> Option<&[f64]> {
        self.product.as_deref()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.probs.iter().copied())
    }

    /// Σ_i p_i f(i), compensated, in index order.
    pub fn expectation(&self, f: impl Fn(usize) -> f64) -> f64 {
        compensated_sum(self.probs.iter().enumerate().map(|(i, &p)| p * f(i)))
    }

    /// Law of `map(config)` in `target`.
    pub fn push_forward(&self, target: Space, model: Option<ModelKind>, map: impl Fn(usize) -> usize) -> Result<Self> {
        let size = target
            .size()
            .ok_or_else(|| LabError::contract("target space too large"))?;
        let mut acc = vec![crate::sum::Accumulator::new(); size];
        let mut wacc = vec![crate::sum::Accumulator::new(); size];
        for i in 0..self.len() {
            let j = map(i);
            acc[j].add(self.probs[i]);
            wacc[j].add(self.weights[i]);
        }
        Ok(FiniteDistribution {
            space: target,
            model,
            probs: acc.iter().map(|a| a.value()).collect(),
            weights: wacc.iter().map(|a| a.value()).collect(),
            z: self.z,
            product: None,
        })
    }

    pub(crate) fn from_raw(space: Space, model: Option<ModelKind>, probs: Vec<f64>, weights: Vec<f64>, z: f64) -> Self {
        FiniteDistribution {
            space,
            model,
            probs,
            weights,
            z,
            product: None,
        }
    }

    /// CSV dump: a JSON header line, a column line, then one row per
    /// configuration in index order.
    pub fn write_dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(self.dump_string().as_bytes())
    }

    pub fn dump_string(&self) -> String {
        let header = DumpHeader {
            space: self.space.kind,
            dims: self.space.dims,
            model: self.model,
            z: self.z,
        };
        let mut s = serde_json::to_string(&header).expect("header serializes");
        s.push('\n');
        s.push_str("config,probability,weight\n");
        for i in 0..self.len() {
            let _ = writeln!(
                s,
                "{},{},{}",
                self.space.config_string(i),
                self.probs[i],
                self.weights[i]
            );
        }
        s
    }

    /// Parses a dump produced by [`FiniteDistribution::write_dump`].
    pub fn read_dump<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, Ok(l))) => Ok((i + 1, l)),
                Some((i, Err(e))) => Err(LabError::validation(format!("line {}", i + 1), e.to_string())),
                None => Err(LabError::validation("dump", format!("missing {what}"))),
            }
        };
        let (_, head) = next("header")?;
        let header: DumpHeader = serde_json::from_str(&head)
            .map_err(|e| LabError::validation("line 1", e.to_string()))?;
        if !(header.z.is_finite() && header.z > 0.0) {
            return Err(LabError::validation("line 1", "z must be positive"));
        }
        let space = Space {
            kind: header.space,
            dims: header.dims,
        };
        let size = space
            .size()
            .filter(|&s| s <= super::MAX_EDGE_CONFIGS.max(super::MAX_PARITY_CONFIGS))
            .ok_or_else(|| LabError::validation("line 1", "space too large"))?;
        let (ln, cols) = next("column line")?;
        if cols.trim() != "config,probability,weight" {
            return Err(LabError::validation(format!("line {ln}"), "expected column line"));
        }
        let mut probs = vec![0.0; size];
        let mut weights = vec![0.0; size];
        for i in 0..size {
            let (ln, row) = next("row")?;
            let field = format!("line {ln}");
            let mut parts = row.split(',');
            let (Some(c), Some(p), Some(w), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
                return Err(LabError::validation(field, "expected 3 columns"));
            };
            if space.parse_config(c).map_err(|_| LabError::validation(&field, "bad configuration"))? != i {
                return Err(LabError::validation(field, "rows out of order"));
            }
            let parse = |v: &str| -> Result<f64> {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite() && *x >= 0.0)
                    .ok_or_else(|| LabError::validation(&field, format!("bad number {v:?}")))
            };
            probs[i] = parse(p)?;
            weights[i] = parse(w)?;
        }
        let total = compensated_sum(probs.iter().copied());
        if (total - 1.0).abs() > 1e-9 {
            return Err(LabError::validation("dump", format!("probabilities sum to {total}")));
        }
        Ok(FiniteDistribution::from_raw(space, header.model, probs, weights, header.z))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DumpHeader {
    space: SpaceKind,
    dims: usize,
    model: Option<ModelKind>,
    z: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digit_order_is_position_zero_fastest() {
        let s = Space::parity(3);
        assert_eq!(s.size(), Some(27));
        assert_eq!(s.config_string(1), "100");
        assert_eq!(s.config_string(3), "010");
        assert_eq!(s.parse_config("012").unwrap(), 1 * 3 + 2 * 9);
        assert!(s.parse_config("013").is_err());
        assert!(s.parse_config("01").is_err());
    }

    #[test]
    fn product_measure_table() {
        let d = FiniteDistribution::product(&[0.25, 0.5], None).unwrap();
        assert_eq!(d.probs(), &[0.375, 0.125, 0.375, 0.125]);
        assert!(FiniteDistribution::product(&[1.5], None).is_err());
    }

    #[test]
    fn dump_roundtrip() {
        let d = FiniteDistribution::from_weights(Space::parity(2), Some(ModelKind::CurrentParity), (0..9).map(|i| i as f64 * 0.1 + 0.05).collect()).unwrap();
        let text = d.dump_string();
        assert!(text.starts_with('{'));
        let back = FiniteDistribution::read_dump(text.as_bytes()).unwrap();
        assert_eq!(back.probs(), d.probs());
        assert_eq!(back.z(), d.z());
        assert_eq!(back.model(), Some(ModelKind::CurrentParity));
        assert_eq!(back.dump_string(), text);
    }

    #[test]
    fn dump_rejects_garbage() {
        assert!(FiniteDistribution::read_dump(&b""[..]).is_err());
        assert!(FiniteDistribution::read_dump(&b"{\"space\":\"edges\",\"dims\":1,\"model\":null,\"z\":1}\nconfig,probability,weight\n0,0.5,0.5\n"[..]).is_err());
        assert!(FiniteDistribution::read_dump(&b"{\"space\":\"edges\",\"dims\":1,\"model\":null,\"z\":1}\nconfig,probability,weight\n1,0.5,0.5\n0,0.5,0.5\n"[..]).is_err());
        assert!(FiniteDistribution::read_dump(&b"{\"space\":\"edges\",\"dims\":99,\"model\":null,\"z\":1}\n"[..]).is_err());
    }
}
