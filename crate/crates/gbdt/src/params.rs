use crate::GbdtError;

/// Direction a prediction is forced to move in as a feature grows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Monotone {
    Increasing,
    Decreasing,
    #[default]
    None,
}

impl Monotone {
    pub fn as_i8(self) -> i8 {
        match self {
            Monotone::Increasing => 1,
            Monotone::Decreasing => -1,
            Monotone::None => 0,
        }
    }

    pub fn from_i8(v: i8) -> Option<Self> {
        match v {
            1 => Some(Monotone::Increasing),
            -1 => Some(Monotone::Decreasing),
            0 => Some(Monotone::None),
            _ => None,
        }
    }
}

/// The column layout a model is trained under.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaInfo {
    pub fingerprint: u64,
    pub feature_names: Vec<String>,
    pub monotone: Vec<Monotone>,
}

impl SchemaInfo {
    /// Builds a schema whose fingerprint is derived from names and flags.
    pub fn new(feature_names: Vec<String>, monotone: Vec<Monotone>) -> Self {
        assert_eq!(feature_names.len(), monotone.len());
        // FNV-1a over "name:flag;" records. Callers with their own
        // fingerprint scheme set the field directly.
        let mut h: u64 = 0xcbf29ce484222325;
        for (n, m) in feature_names.iter().zip(&monotone) {
            for b in n.bytes().chain([b':', m.as_i8() as u8, b';']) {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        SchemaInfo {
            fingerprint: h,
            feature_names,
            monotone,
        }
    }

    pub fn len(&self) -> usize {
        self.feature_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.feature_names.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbdtParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_leaves: usize,
    pub min_samples_leaf: usize,
    /// L2 penalty on leaf values (lambda).
    pub l2_leaf_penalty: f64,
    /// Maximum number of histogram bins per feature, excluding the missing bin.
    pub n_bins: usize,
    pub monotone: Vec<Monotone>,
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            n_trees: 200,
            learning_rate: 0.1,
            max_leaves: 31,
            min_samples_leaf: 20,
            l2_leaf_penalty: 1.0,
            n_bins: 64,
            monotone: Vec::new(),
            seed: 0,
        }
    }
}

impl GbdtParams {
    /// Defaults with monotone flags copied from `schema`.
    pub fn for_schema(schema: &SchemaInfo) -> Self {
        GbdtParams {
            monotone: schema.monotone.clone(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), GbdtError> {
        let bad = |m: &str| Err(GbdtError::InvalidParams(m.to_string()));
        if self.n_trees < 1 {
            return bad("n_trees must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if self.max_leaves < 2 {
            return bad("max_leaves must be >= 2");
        }
        if self.n_bins < 2 || self.n_bins > u16::MAX as usize - 1 {
            return bad("n_bins must lie in [2, 65534]");
        }
        if self.min_samples_leaf < 1 {
            return bad("min_samples_leaf must be >= 1");
        }
        if !(self.l2_leaf_penalty >= 0.0) {
            return bad("l2_leaf_penalty must be >= 0");
        }
        Ok(())
    }
}
