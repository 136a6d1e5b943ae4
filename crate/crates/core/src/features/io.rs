use serde::{Deserialize, Serialize};

use super::{FeatureConfig, FeatureError, Segment, Which};

/// Feature matrix with one row per patch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureTable {
    pub ids: Vec<String>,
    pub labels: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureTable {
    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn push(&mut self, id: impl Into<String>, label: usize, row: Vec<f64>) -> Result<(), FeatureError> {
        if !self.rows.is_empty() && row.len() != self.dim() {
            return Err(FeatureError::Format(format!(
                "row has {} features, table has {}",
                row.len(),
                self.dim()
            )));
        }
        self.ids.push(id.into());
        self.labels.push(label);
        self.rows.push(row);
        Ok(())
    }
}

/// Descriptor settings written next to a feature CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSidecar {
    pub which: Which,
    pub config: FeatureConfig,
    pub layout: Vec<Segment>,
    pub dim: usize,
}

/// CSV with header `id,label,f0,…,f{N-1}`.
pub fn write_feature_csv(table: &FeatureTable) -> Result<Vec<u8>, FeatureError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id".to_string(), "label".to_string()];
    header.extend((0..table.dim()).map(|i| format!("f{i}")));
    w.write_record(&header)?;
    for ((id, label), row) in table.ids.iter().zip(&table.labels).zip(&table.rows) {
        let mut rec = vec![id.clone(), label.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| FeatureError::Format(e.to_string()))
}

pub fn parse_feature_csv(bytes: &[u8]) -> Result<FeatureTable, FeatureError> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let header = rdr.headers()?.clone();
    let ok = header.len() >= 2
        && &header[0] == "id"
        && &header[1] == "label"
        && header
            .iter()
            .skip(2)
            .enumerate()
            .all(|(i, h)| h.strip_prefix('f') == Some(i.to_string().as_str()));
    if !ok {
        return Err(FeatureError::Format("feature header must be id,label,f0,f1,…".into()));
    }
    let dim = header.len() - 2;
    let mut table = FeatureTable::default();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let label = rec[1]
            .parse()
            .map_err(|_| FeatureError::Format(format!("row {}: bad label {:?}", line + 1, &rec[1])))?;
        let row = rec
            .iter()
            .skip(2)
            .map(|v| match v.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(FeatureError::Format(format!(
                    "row {}: bad feature value {v:?}",
                    line + 1
                ))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        debug_assert_eq!(row.len(), dim);
        table.push(&rec[0], label, row)?;
    }
    Ok(table)
}
