//! Test-only reader for the model file format, written from the layout
//! documented in `io.rs` and sharing no code with the library.

#![allow(dead_code)]

pub struct NaiveModel {
    pub names: Vec<String>,
    pub learning_rate: f64,
    pub base_score: f64,
    pub trees: Vec<Vec<NaiveNode>>,
}

pub enum NaiveNode {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        default_left: bool,
        left: usize,
        right: usize,
        gain: f64,
    },
}

struct Cursor<'a>(&'a [u8]);

impl Cursor<'_> {
    fn bytes(&mut self, n: usize) -> Vec<u8> {
        let (h, t) = self.0.split_at(n);
        self.0 = t;
        h.to_vec()
    }
    fn u8(&mut self) -> u8 {
        self.bytes(1)[0]
    }
    fn u16(&mut self) -> u16 {
        let b = self.bytes(2);
        b[0] as u16 | (b[1] as u16) << 8
    }
    fn u32(&mut self) -> u32 {
        let b = self.bytes(4);
        (0..4).map(|i| (b[i] as u32) << (8 * i)).sum()
    }
    fn u64(&mut self) -> u64 {
        let b = self.bytes(8);
        (0..8).map(|i| (b[i] as u64) << (8 * i)).sum()
    }
    fn f64(&mut self) -> f64 {
        f64::from_bits(self.u64())
    }
}

pub fn parse(bytes: &[u8]) -> NaiveModel {
    let mut c = Cursor(bytes);
    assert_eq!(c.bytes(8), b"CRGBDT\0\0");
    assert_eq!(c.u16(), 1);
    let _minor = c.u16();
    let _fingerprint = c.u64();
    let n_features = c.u32() as usize;
    let mut names = Vec::new();
    for _ in 0..n_features {
        let len = c.u32() as usize;
        names.push(String::from_utf8(c.bytes(len)).unwrap());
        let _monotone = c.u8();
    }
    let _n_trees = c.u32();
    let learning_rate = c.f64();
    let _max_leaves = c.u32();
    let _min_leaf = c.u32();
    let _l2 = c.f64();
    let _n_bins = c.u32();
    let _seed = c.u64();
    let base_score = c.f64();
    let tree_count = c.u32() as usize;
    let mut trees = Vec::new();
    for _ in 0..tree_count {
        let n_nodes = c.u32() as usize;
        let mut nodes = Vec::new();
        for _ in 0..n_nodes {
            match c.u8() {
                0 => nodes.push(NaiveNode::Leaf(c.f64())),
                1 => nodes.push(NaiveNode::Split {
                    feature: c.u32() as usize,
                    threshold: c.f64(),
                    default_left: c.u8() == 1,
                    left: c.u32() as usize,
                    right: c.u32() as usize,
                    gain: c.f64(),
                }),
                t => panic!("bad tag {t}"),
            }
        }
        trees.push(nodes);
    }
    assert!(c.0.is_empty());
    NaiveModel {
        names,
        learning_rate,
        base_score,
        trees,
    }
}

impl NaiveModel {
    fn walk(nodes: &[NaiveNode], at: usize, x: &[f64]) -> f64 {
        match &nodes[at] {
            NaiveNode::Leaf(v) => *v,
            NaiveNode::Split {
                feature,
                threshold,
                default_left,
                left,
                right,
                ..
            } => {
                let v = x[*feature];
                let next = if v.is_nan() {
                    if *default_left {
                        *left
                    } else {
                        *right
                    }
                } else if v <= *threshold {
                    *left
                } else {
                    *right
                };
                Self::walk(nodes, next, x)
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut raw = self.base_score;
        for t in &self.trees {
            raw += self.learning_rate * Self::walk(t, 0, x);
        }
        1.0 / (1.0 + (-raw).exp())
    }

    /// (split_count, total_gain) per feature.
    pub fn importance(&self) -> Vec<(usize, f64)> {
        let mut out = vec![(0usize, 0.0f64); self.names.len()];
        for t in &self.trees {
            for n in t {
                if let NaiveNode::Split { feature, gain, .. } = n {
                    out[*feature].0 += 1;
                    out[*feature].1 += gain;
                }
            }
        }
        out
    }
}
