//! Binary model format, version 1.0. All integers and floats little-endian.
//!
//! ```text
//! magic            8 bytes   "CRGBDT\0\0"
//! major, minor     u16, u16  a reader rejects any major it does not know
//! fingerprint      u64       schema fingerprint rows must carry
//! n_features       u32
//!   per feature:   name_len u32, name utf-8 bytes, monotone i8 (+1 / -1 / 0)
//! params:          n_trees u32, learning_rate f64, max_leaves u32,
//!                  min_samples_leaf u32, l2_leaf_penalty f64, n_bins u32, seed u64
//! base_score       f64       prior log-odds
//! tree_count       u32
//!   per tree:      node_count u32, then nodes (node 0 is the root):
//!     tag u8 = 0   leaf:  value f64
//!     tag u8 = 1   split: feature u32, threshold f64, default_left u8,
//!                         left u32, right u32, gain f64
//! ```
//!
//! Prediction: start at node 0; at a split take `left` when the value is
//! `NaN` and `default_left == 1`, or when `value <= threshold`; otherwise
//! `right`. The score is `sigmoid(base_score + learning_rate * sum(leaves))`.

use std::path::Path;

use crate::params::{GbdtParams, Monotone, SchemaInfo};
use crate::tree::{Node, Tree};
use crate::{GbdtError, GbdtModel};

const MAGIC: &[u8; 8] = b"CRGBDT\0\0";
pub const FORMAT_MAJOR: u16 = 1;
pub const FORMAT_MINOR: u16 = 0;

impl GbdtModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Vec::new();
        w.extend_from_slice(MAGIC);
        w.extend_from_slice(&FORMAT_MAJOR.to_le_bytes());
        w.extend_from_slice(&FORMAT_MINOR.to_le_bytes());
        w.extend_from_slice(&self.schema.fingerprint.to_le_bytes());
        put_u32(&mut w, self.schema.len());
        for (name, m) in self.schema.feature_names.iter().zip(&self.schema.monotone) {
            put_u32(&mut w, name.len());
            w.extend_from_slice(name.as_bytes());
            w.push(m.as_i8() as u8);
        }
        let p = &self.params;
        put_u32(&mut w, p.n_trees);
        w.extend_from_slice(&p.learning_rate.to_le_bytes());
        put_u32(&mut w, p.max_leaves);
        put_u32(&mut w, p.min_samples_leaf);
        w.extend_from_slice(&p.l2_leaf_penalty.to_le_bytes());
        put_u32(&mut w, p.n_bins);
        w.extend_from_slice(&p.seed.to_le_bytes());
        w.extend_from_slice(&self.base_score.to_le_bytes());
        put_u32(&mut w, self.trees.len());
        for tree in &self.trees {
            put_u32(&mut w, tree.nodes.len());
            for node in &tree.nodes {
                match node {
                    Node::Leaf { value } => {
                        w.push(0);
                        w.extend_from_slice(&value.to_le_bytes());
                    }
                    Node::Split {
                        feature,
                        threshold,
                        default_left,
                        left,
                        right,
                        gain,
                    } => {
                        w.push(1);
                        w.extend_from_slice(&feature.to_le_bytes());
                        w.extend_from_slice(&threshold.to_le_bytes());
                        w.push(*default_left as u8);
                        w.extend_from_slice(&left.to_le_bytes());
                        w.extend_from_slice(&right.to_le_bytes());
                        w.extend_from_slice(&gain.to_le_bytes());
                    }
                }
            }
        }
        w
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, GbdtError> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(GbdtError::Corrupt("bad magic".into()));
        }
        let major = r.u16()?;
        let minor = r.u16()?;
        if major != FORMAT_MAJOR {
            return Err(GbdtError::Version {
                major,
                minor,
                supported: FORMAT_MAJOR,
            });
        }
        let fingerprint = r.u64()?;
        let n_features = r.u32()? as usize;
        let mut names = Vec::with_capacity(n_features.min(4096));
        let mut monotone = Vec::with_capacity(n_features.min(4096));
        for _ in 0..n_features {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| GbdtError::Corrupt("feature name is not utf-8".into()))?;
            names.push(name.to_string());
            let m = r.u8()? as i8;
            monotone.push(
                Monotone::from_i8(m)
                    .ok_or_else(|| GbdtError::Corrupt(format!("bad monotone flag {m}")))?,
            );
        }
        let params = GbdtParams {
            n_trees: r.u32()? as usize,
            learning_rate: r.f64()?,
            max_leaves: r.u32()? as usize,
            min_samples_leaf: r.u32()? as usize,
            l2_leaf_penalty: r.f64()?,
            n_bins: r.u32()? as usize,
            monotone: monotone.clone(),
            seed: r.u64()?,
        };
        let base_score = r.f64()?;
        let n_trees = r.u32()? as usize;
        let mut trees = Vec::with_capacity(n_trees.min(1 << 16));
        for _ in 0..n_trees {
            let n_nodes = r.u32()? as usize;
            let mut nodes = Vec::with_capacity(n_nodes.min(1 << 16));
            for _ in 0..n_nodes {
                let node = match r.u8()? {
                    0 => Node::Leaf { value: r.f64()? },
                    1 => Node::Split {
                        feature: r.u32()?,
                        threshold: r.f64()?,
                        default_left: r.u8()? != 0,
                        left: r.u32()?,
                        right: r.u32()?,
                        gain: r.f64()?,
                    },
                    t => return Err(GbdtError::Corrupt(format!("unknown node tag {t}"))),
                };
                nodes.push(node);
            }
            validate_tree(&nodes, n_features)?;
            trees.push(Tree { nodes });
        }
        if r.pos != bytes.len() {
            return Err(GbdtError::Corrupt(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        let schema = SchemaInfo {
            fingerprint,
            feature_names: names,
            monotone,
        };
        Ok(GbdtModel {
            schema,
            base_score,
            params,
            trees,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GbdtError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GbdtError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn put_u32(w: &mut Vec<u8>, v: usize) {
    w.extend_from_slice(&(v as u32).to_le_bytes());
}

fn validate_tree(nodes: &[Node], n_features: usize) -> Result<(), GbdtError> {
    if nodes.is_empty() {
        return Err(GbdtError::Corrupt("empty tree".into()));
    }
    for (i, node) in nodes.iter().enumerate() {
        if let Node::Split {
            feature,
            left,
            right,
            ..
        } = node
        {
            // Children always follow their parent, so traversal terminates.
            let ok = (*feature as usize) < n_features
                && (*left as usize) > i
                && (*right as usize) > i
                && (*left as usize) < nodes.len()
                && (*right as usize) < nodes.len();
            if !ok {
                return Err(GbdtError::Corrupt(format!("invalid split node {i}")));
            }
        }
    }
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], GbdtError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| {
                GbdtError::Corrupt(format!("truncated at byte {} (wanted {n} more)", self.pos))
            })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, GbdtError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, GbdtError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, GbdtError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, GbdtError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, GbdtError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
