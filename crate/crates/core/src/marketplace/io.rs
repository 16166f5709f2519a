use std::io::{BufRead, Write};

use super::types::SessionEvent;
use super::{MarketError, Marketplace};

/// One JSON object per line, in session order.
pub fn write_events<W: Write>(mut w: W, events: &[SessionEvent]) -> Result<(), MarketError> {
    for e in events {
        serde_json::to_writer(&mut w, e).map_err(|e| MarketError::Parse(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_events<R: BufRead>(r: R) -> Result<Vec<SessionEvent>, MarketError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: SessionEvent = serde_json::from_str(&line)
            .map_err(|e| MarketError::Parse(format!("line {}: {e}", i + 1)))?;
        if let Some(c) = e.purchased_collection_id {
            if !e.displayed_collection_ids.contains(&c) {
                return Err(MarketError::Parse(format!(
                    "line {}: purchased collection {c} was not displayed",
                    i + 1
                )));
            }
        }
        out.push(e);
    }
    Ok(out)
}

impl Marketplace {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("marketplace serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, MarketError> {
        let m: Marketplace = serde_json::from_str(s).map_err(|e| MarketError::Parse(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }
}
