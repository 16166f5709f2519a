use collrec_gbdt::{Monotone, SchemaInfo};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::FeatureError;
use crate::marketplace::MealShift;

pub const POPULARITY_BY_SHIFT: &str = "popularity_by_shift";
pub const IS_DISH_COLLECTION: &str = "is_dish_collection";
pub const FREE_DELIVERY_ORDER_FRACTION: &str = "free_delivery_order_fraction";
pub const SHIFT_SPECIFICITY: &str = "shift_specificity";
pub const COLLECTION_SIZE: &str = "collection_size";
pub const MEAN_DELIVERY_FEE: &str = "mean_delivery_fee";
pub const ORDER_POPULARITY: &str = "order_popularity";
pub const SIMILARITY: [&str; 3] = ["similarity_1", "similarity_2", "similarity_3"];
pub const ORDERS_IN_COLLECTION_RESTAURANTS: &str = "orders_in_collection_restaurants";
pub const VEGAN_MATCH: &str = "vegan_match";
pub const SHIFT_ORDERS_PER_RESTAURANT: &str = "shift_orders_per_restaurant";

/// Name of the one-hot column for `shift`.
pub fn shift_feature(shift: MealShift) -> String {
    format!("shift_{}", shift.name())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FeatureGroup {
    Collection,
    UserCollection,
    Context,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// `NaN` marks "no information" and is routed by the model.
    Allowed,
    Never,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDef {
    pub name: String,
    pub group: FeatureGroup,
    #[serde(with = "monotone_flag")]
    pub monotone: Monotone,
    pub missing: MissingPolicy,
    /// Not part of the canonical set; can be ablated.
    #[serde(default)]
    pub extension: bool,
}

/// Ordered feature layout. The fingerprint covers names, groups, flags and
/// order, so any change produces a different fingerprint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<FeatureDef>,
}

mod monotone_flag {
    use collrec_gbdt::Monotone;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &Monotone, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i8(m.as_i8())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Monotone, D::Error> {
        let v = i8::deserialize(d)?;
        Monotone::from_i8(v).ok_or_else(|| serde::de::Error::custom(format!("bad monotone flag {v}")))
    }
}

fn def(name: &str, group: FeatureGroup, monotone: Monotone, missing: MissingPolicy, extension: bool) -> FeatureDef {
    FeatureDef {
        name: name.to_string(),
        group,
        monotone,
        missing,
        extension,
    }
}

impl FeatureSchema {
    /// The full feature set, optionally without the extension columns.
    pub fn canonical(extensions: bool) -> Self {
        use FeatureGroup::*;
        use MissingPolicy::*;
        use Monotone::{Decreasing as Dec, Increasing as Inc, None as Free};
        let mut features = vec![
            def(POPULARITY_BY_SHIFT, Collection, Inc, Allowed, false),
            def(IS_DISH_COLLECTION, Collection, Free, Never, false),
            def(FREE_DELIVERY_ORDER_FRACTION, Collection, Inc, Allowed, false),
            def(SHIFT_SPECIFICITY, Collection, Inc, Allowed, false),
            def(COLLECTION_SIZE, Collection, Free, Never, true),
            def(MEAN_DELIVERY_FEE, Collection, Dec, Never, true),
            def(ORDER_POPULARITY, Collection, Inc, Never, true),
        ];
        for s in SIMILARITY {
            features.push(def(s, UserCollection, Inc, Allowed, false));
        }
        features.extend([
            def(ORDERS_IN_COLLECTION_RESTAURANTS, UserCollection, Inc, Never, false),
            def(VEGAN_MATCH, UserCollection, Inc, Never, false),
            def(SHIFT_ORDERS_PER_RESTAURANT, UserCollection, Inc, Never, false),
        ]);
        for s in MealShift::ALL {
            features.push(def(&shift_feature(s), Context, Free, Never, false));
        }
        if !extensions {
            features.retain(|f| !f.extension);
        }
        FeatureSchema { features }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// First 8 bytes (little-endian) of SHA-256 over the canonical JSON.
    pub fn fingerprint(&self) -> u64 {
        let digest = Sha256::digest(self.to_json().as_bytes());
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("schema serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, FeatureError> {
        let schema: FeatureSchema = serde_json::from_str(s).map_err(|e| FeatureError::Parse(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        let mut names = std::collections::HashSet::new();
        for f in &self.features {
            if !names.insert(f.name.as_str()) {
                return Err(FeatureError::Parse(format!("duplicate feature name {}", f.name)));
            }
        }
        Ok(())
    }

    /// The sub-schema holding `names` (in this schema's order) and the column
    /// index of each kept feature.
    pub fn project(&self, names: &[String]) -> Result<(FeatureSchema, Vec<usize>), FeatureError> {
        for n in names {
            if self.index_of(n).is_none() {
                return Err(FeatureError::UnknownFeature(n.clone()));
            }
        }
        let columns: Vec<usize> = (0..self.len())
            .filter(|&i| names.contains(&self.features[i].name))
            .collect();
        let features = columns.iter().map(|&i| self.features[i].clone()).collect();
        Ok((FeatureSchema { features }, columns))
    }

    /// Layout description for the boosting library.
    pub fn gbdt_schema(&self) -> SchemaInfo {
        SchemaInfo {
            fingerprint: self.fingerprint(),
            feature_names: self.names(),
            monotone: self.features.iter().map(|f| f.monotone).collect(),
        }
    }
}
