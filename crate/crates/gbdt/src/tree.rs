/// One node of a regression tree, stored in a flat arena.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: u32,
        /// Values `<= threshold` go left.
        threshold: f64,
        /// Where `NaN` values go.
        default_left: bool,
        left: u32,
        right: u32,
        /// Loss reduction achieved by this split during training.
        gain: f64,
    },
    Leaf {
        /// Raw (unshrunk) log-odds contribution.
        value: f64,
    },
}

/// A regression tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut idx = 0usize;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    default_left,
                    left,
                    right,
                    ..
                } => {
                    let v = x[*feature as usize];
                    let go_left = if v.is_nan() {
                        *default_left
                    } else {
                        v <= *threshold
                    };
                    idx = if go_left { *left } else { *right } as usize;
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn splits(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, gain, .. } => Some((*feature, *gain)),
            Node::Leaf { .. } => None,
        })
    }
}
