use std::io::{Read, Write};

use super::{FeatureError, FeatureSchema, FeatureVector};

const NA: &str = "NA";

fn header(schema: &FeatureSchema) -> Vec<String> {
    schema
        .features
        .iter()
        .map(|f| format!("{}@{:+}", f.name, f.monotone.as_i8()))
        .collect()
}

/// Writes one row per vector, preceded by `extra` leading columns (for
/// example ids and labels). Column headers are `name@flag` with the
/// monotone flag signed (`@+1`, `@-1`, `@+0`); missing values are `NA`.
pub fn write_matrix<W: Write>(
    w: W,
    schema: &FeatureSchema,
    extra: &[&str],
    rows: impl IntoIterator<Item = (Vec<String>, FeatureVector)>,
) -> Result<(), FeatureError> {
    let mut out = csv::Writer::from_writer(w);
    let mut head: Vec<String> = extra.iter().map(|s| s.to_string()).collect();
    head.extend(header(schema));
    out.write_record(&head)?;
    for (lead, row) in rows {
        row.check(schema)?;
        if lead.len() != extra.len() {
            return Err(FeatureError::Parse(format!(
                "row has {} leading fields, header has {}",
                lead.len(),
                extra.len()
            )));
        }
        let mut rec = lead;
        rec.extend(row.values.iter().map(|v| if v.is_nan() { NA.to_string() } else { v.to_string() }));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a matrix written by [`write_matrix`] with `n_extra` leading
/// columns, checking the header against `schema`.
#[allow(clippy::type_complexity)]
pub fn read_matrix<R: Read>(
    r: R,
    schema: &FeatureSchema,
    n_extra: usize,
) -> Result<Vec<(Vec<String>, FeatureVector)>, FeatureError> {
    let mut input = csv::Reader::from_reader(r);
    let head: Vec<String> = input.headers()?.iter().skip(n_extra).map(str::to_string).collect();
    if head != header(schema) {
        return Err(FeatureError::Parse(format!("header {head:?} does not match schema")));
    }
    let fingerprint = schema.fingerprint();
    let mut rows = Vec::new();
    for rec in input.records() {
        let rec = rec?;
        let lead = rec.iter().take(n_extra).map(str::to_string).collect();
        let values = rec
            .iter()
            .skip(n_extra)
            .map(|s| {
                if s == NA {
                    Ok(f64::NAN)
                } else {
                    s.parse::<f64>().map_err(|e| FeatureError::Parse(format!("{s:?}: {e}")))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((lead, FeatureVector { fingerprint, values }));
    }
    Ok(rows)
}
