use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DatasetError, LabeledDataset, LabeledPair, Provenance};
use crate::features::{read_matrix, write_matrix, FeatureSchema};
use crate::marketplace::{CollectionId, Context, HomeId, MealShift, RegionId, UserId};

pub const SCHEMA_FILE: &str = "schema.json";
pub const MATRIX_FILE: &str = "features.csv";
pub const PAIRS_FILE: &str = "pairs.csv";

/// One line of the pair index.
#[derive(Debug, Serialize, Deserialize)]
struct PairRecord {
    pair: usize,
    session: u64,
    user: u32,
    home: u16,
    region: u16,
    meal_shift: MealShift,
    timestamp: i64,
    positive: u32,
    negative: u32,
    provenance: Provenance,
    positive_row: usize,
    negative_row: usize,
}

/// Writes the schema, the feature matrix (leading `pair,label` columns) and
/// the pair index into `dir`. Returns the paths written.
pub fn write_dataset(dir: &Path, ds: &LabeledDataset) -> Result<Vec<std::path::PathBuf>, DatasetError> {
    std::fs::create_dir_all(dir)?;
    let schema_path = dir.join(SCHEMA_FILE);
    std::fs::write(&schema_path, ds.schema.to_json())?;

    let matrix_path = dir.join(MATRIX_FILE);
    let rows = ds
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| (vec![(i / 2).to_string(), LabeledDataset::label(i).to_string()], r.clone()));
    write_matrix(BufWriter::new(File::create(&matrix_path)?), &ds.schema, &["pair", "label"], rows)?;

    let pairs_path = dir.join(PAIRS_FILE);
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&pairs_path)?));
    for (k, p) in ds.pairs.iter().enumerate() {
        w.serialize(PairRecord {
            pair: k,
            session: p.session,
            user: p.user_id.0,
            home: p.home_id.0,
            region: p.context.region_id.0,
            meal_shift: p.context.meal_shift,
            timestamp: p.context.timestamp,
            positive: p.positive.0,
            negative: p.negative.0,
            provenance: p.provenance,
            positive_row: 2 * k,
            negative_row: 2 * k + 1,
        })?;
    }
    w.flush()?;
    Ok(vec![schema_path, matrix_path, pairs_path])
}

pub fn read_dataset(dir: &Path) -> Result<LabeledDataset, DatasetError> {
    let schema = FeatureSchema::from_json(&std::fs::read_to_string(dir.join(SCHEMA_FILE))?)?;
    let matrix = read_matrix(File::open(dir.join(MATRIX_FILE))?, &schema, 2)?;
    let mut pairs = Vec::new();
    for (k, rec) in csv::Reader::from_reader(File::open(dir.join(PAIRS_FILE))?)
        .deserialize::<PairRecord>()
        .enumerate()
    {
        let r = rec?;
        if r.pair != k || r.positive_row != 2 * k || r.negative_row != 2 * k + 1 {
            return Err(DatasetError::Parse(format!("pair index line {k} is out of order")));
        }
        pairs.push(LabeledPair {
            session: r.session,
            user_id: UserId(r.user),
            context: Context {
                meal_shift: r.meal_shift,
                home_id: HomeId(r.home),
                region_id: RegionId(r.region),
                timestamp: r.timestamp,
            },
            positive: CollectionId(r.positive),
            negative: CollectionId(r.negative),
            home_id: HomeId(r.home),
            provenance: r.provenance,
        });
    }
    if matrix.len() != 2 * pairs.len() {
        return Err(DatasetError::Parse(format!(
            "{} feature rows for {} pairs",
            matrix.len(),
            pairs.len()
        )));
    }
    for (i, (lead, _)) in matrix.iter().enumerate() {
        let expected = [(i / 2).to_string(), LabeledDataset::label(i).to_string()];
        if lead[..] != expected[..] {
            return Err(DatasetError::Parse(format!("feature row {i} has leading fields {lead:?}")));
        }
    }
    Ok(LabeledDataset {
        schema,
        pairs,
        rows: matrix.into_iter().map(|(_, r)| r).collect(),
    })
}
