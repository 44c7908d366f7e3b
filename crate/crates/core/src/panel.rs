//! Two-period panel data with attrition: unit records, cell bookkeeping,
//! and CSV load/save with an explicit column mapping.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A (group, response) cell of the two-by-two design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub g: u8,
    pub r: u8,
}

impl Cell {
    pub const TREAT_RESP: Cell = Cell { g: 1, r: 1 };
    pub const TREAT_ATTR: Cell = Cell { g: 1, r: 0 };
    pub const CONTROL_RESP: Cell = Cell { g: 0, r: 1 };
    pub const CONTROL_ATTR: Cell = Cell { g: 0, r: 0 };

    pub const ALL: [Cell; 4] = [
        Cell::TREAT_RESP,
        Cell::TREAT_ATTR,
        Cell::CONTROL_RESP,
        Cell::CONTROL_ATTR,
    ];
}

/// Which outcome column a subsample query pulls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeField {
    Baseline,
    FollowUp,
}

/// One unit of the panel. The follow-up outcome is present exactly when
/// the unit responded (r = 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRecord {
    pub id: String,
    pub g: u8,
    pub r: u8,
    pub y0: f64,
    pub y1: Option<f64>,
    pub cluster: Option<String>,
}

impl UnitRecord {
    pub fn cell(&self) -> Cell {
        Cell { g: self.g, r: self.r }
    }

    fn validate(&self, row: usize) -> Result<()> {
        let bad = |column: &str, message: String| Error::MalformedRow {
            row,
            column: column.to_string(),
            message,
        };
        if self.g > 1 {
            return Err(bad("g", format!("non-binary group indicator {}", self.g)));
        }
        if self.r > 1 {
            return Err(bad("r", format!("non-binary response indicator {}", self.r)));
        }
        if !self.y0.is_finite() {
            return Err(bad("y0", format!("non-finite baseline outcome {}", self.y0)));
        }
        match (self.r, self.y1) {
            (0, Some(_)) => return Err(bad("y1", "y1 present with r=0".to_string())),
            (1, None) => return Err(bad("y1", "y1 missing with r=1".to_string())),
            (1, Some(v)) if !v.is_finite() => {
                return Err(bad("y1", format!("non-finite follow-up outcome {v}")))
            }
            _ => {}
        }
        Ok(())
    }
}

/// Column-name mapping for CSV interchange. Defaults follow the shipped
/// header convention id,g,r,y0,y1,cluster; the cluster column is optional.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvSchema {
    pub id: String,
    pub g: String,
    pub r: String,
    pub y0: String,
    pub y1: String,
    pub cluster: Option<String>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            id: "id".into(),
            g: "g".into(),
            r: "r".into(),
            y0: "y0".into(),
            y1: "y1".into(),
            cluster: Some("cluster".into()),
        }
    }
}

/// An immutable validated sample with derived cell counts.
#[derive(Debug, Clone)]
pub struct PanelSample {
    records: Vec<UnitRecord>,
    counts: BTreeMap<(u8, u8), usize>,
}

impl PanelSample {
    pub fn new(records: Vec<UnitRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptySample);
        }
        for (i, rec) in records.iter().enumerate() {
            rec.validate(i + 1)?;
        }
        let mut counts = BTreeMap::new();
        for cell in Cell::ALL {
            counts.insert((cell.g, cell.r), 0usize);
        }
        for rec in &records {
            *counts.get_mut(&(rec.g, rec.r)).unwrap() += 1;
        }
        Ok(PanelSample { records, counts })
    }

    pub fn records(&self) -> &[UnitRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn cell_count(&self, cell: Cell) -> usize {
        self.counts[&(cell.g, cell.r)]
    }

    /// P(G=g, R=r) as the exact count ratio.
    pub fn cell_probability(&self, cell: Cell) -> f64 {
        self.cell_count(cell) as f64 / self.len() as f64
    }

    /// All values of the chosen outcome field among records in cell (g, r),
    /// in record order.
    pub fn subsample(&self, cell: Cell, field: OutcomeField) -> Result<Vec<f64>> {
        if field == OutcomeField::FollowUp && cell.r == 0 {
            return Err(Error::Y1ForAttritors { g: cell.g });
        }
        if self.cell_count(cell) == 0 {
            return Err(Error::EmptyCell { cell, needed_by: "subsample" });
        }
        Ok(self
            .records
            .iter()
            .filter(|rec| rec.cell() == cell)
            .map(|rec| match field {
                OutcomeField::Baseline => rec.y0,
                OutcomeField::FollowUp => rec.y1.unwrap(),
            })
            .collect())
    }

    pub fn require_cell(&self, cell: Cell, needed_by: &'static str) -> Result<()> {
        if self.cell_count(cell) == 0 {
            return Err(Error::EmptyCell { cell, needed_by });
        }
        Ok(())
    }

    pub fn attrition_summary(&self) -> AttritionSummary {
        let arm_total = |g: u8| {
            self.cell_count(Cell { g, r: 1 }) + self.cell_count(Cell { g, r: 0 })
        };
        let arm_rate = |g: u8| {
            let total = arm_total(g);
            if total == 0 {
                f64::NAN
            } else {
                self.cell_count(Cell { g, r: 0 }) as f64 / total as f64
            }
        };
        let attritors = self.cell_count(Cell::TREAT_ATTR) + self.cell_count(Cell::CONTROL_ATTR);
        let mut baseline_means = BTreeMap::new();
        for cell in Cell::ALL {
            let n = self.cell_count(cell);
            if n > 0 {
                let sum: f64 = self
                    .records
                    .iter()
                    .filter(|rec| rec.cell() == cell)
                    .map(|rec| rec.y0)
                    .sum();
                baseline_means.insert((cell.g, cell.r), sum / n as f64);
            }
        }
        AttritionSummary {
            overall: attritors as f64 / self.len() as f64,
            treatment: arm_rate(1),
            control: arm_rate(0),
            baseline_means,
        }
    }

    pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<PanelSample> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file, schema)
    }

    pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<PanelSample> {
        let (records, mut violations) = Self::parse_csv(reader, schema, false)?;
        if let Some((_, err)) = violations.pop() {
            return Err(err);
        }
        PanelSample::new(records)
    }

    /// Lenient pass over a CSV: structural problems (unreadable input,
    /// missing columns) are still fatal, but per-row violations are
    /// collected with their row numbers and valid rows are kept.
    pub fn scan_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<CsvScan> {
        let (records, violations) = Self::parse_csv(reader, schema, true)?;
        let sample = PanelSample::new(records.clone()).ok();
        Ok(CsvScan {
            rows_read: records.len() + violations.len(),
            sample,
            violations: violations
                .into_iter()
                .map(|(row, err)| (row, err.to_string()))
                .collect(),
        })
    }

    fn parse_csv<R: Read>(
        reader: R,
        schema: &CsvSchema,
        lenient: bool,
    ) -> Result<(Vec<UnitRecord>, Vec<(usize, Error)>)> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        let ix = (
            col(&schema.id)?,
            col(&schema.g)?,
            col(&schema.r)?,
            col(&schema.y0)?,
            col(&schema.y1)?,
            match &schema.cluster {
                Some(name) => headers.iter().position(|h| h == name.as_str()),
                None => None,
            },
        );

        let mut records = Vec::new();
        let mut violations = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let row_no = i + 1;
            let row = row?;
            match Self::parse_row(&row, row_no, ix, schema) {
                Ok(rec) => records.push(rec),
                Err(err) if lenient => violations.push((row_no, err)),
                Err(err) => return Ok((records, vec![(row_no, err)])),
            }
        }
        Ok((records, violations))
    }

    fn parse_row(
        row: &csv::StringRecord,
        row_no: usize,
        ix: (usize, usize, usize, usize, usize, Option<usize>),
        schema: &CsvSchema,
    ) -> Result<UnitRecord> {
        let (id_ix, g_ix, r_ix, y0_ix, y1_ix, cluster_ix) = ix;
        let field = |ix: usize, column: &str| -> Result<&str> {
            row.get(ix).ok_or_else(|| Error::MalformedRow {
                row: row_no,
                column: column.to_string(),
                message: "missing field".to_string(),
            })
        };
        let parse_binary = |ix: usize, column: &str| -> Result<u8> {
            let raw = field(ix, column)?;
            match raw {
                "0" => Ok(0),
                "1" => Ok(1),
                other => Err(Error::MalformedRow {
                    row: row_no,
                    column: column.to_string(),
                    message: format!("expected 0 or 1, got '{other}'"),
                }),
            }
        };
        let parse_real = |raw: &str, column: &str| -> Result<f64> {
            raw.parse::<f64>().map_err(|_| Error::MalformedRow {
                row: row_no,
                column: column.to_string(),
                message: format!("expected a real number, got '{raw}'"),
            })
        };
        let y1_raw = field(y1_ix, &schema.y1)?;
        let y1 = if y1_raw.is_empty() {
            None
        } else {
            Some(parse_real(y1_raw, &schema.y1)?)
        };
        let rec = UnitRecord {
            id: field(id_ix, &schema.id)?.to_string(),
            g: parse_binary(g_ix, &schema.g)?,
            r: parse_binary(r_ix, &schema.r)?,
            y0: parse_real(field(y0_ix, &schema.y0)?, &schema.y0)?,
            y1,
            cluster: cluster_ix
                .and_then(|ix| row.get(ix))
                .filter(|s| !s.is_empty())
                .map(str::to_string),
        };
        rec.validate(row_no)?;
        Ok(rec)
    }

    pub fn save_csv(&self, path: &Path, schema: &CsvSchema) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(file, schema)
    }

    pub fn write_csv<W: Write>(&self, writer: W, schema: &CsvSchema) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let cluster_name = schema.cluster.clone().unwrap_or_else(|| "cluster".into());
        wtr.write_record([
            schema.id.as_str(),
            schema.g.as_str(),
            schema.r.as_str(),
            schema.y0.as_str(),
            schema.y1.as_str(),
            cluster_name.as_str(),
        ])?;
        for rec in &self.records {
            wtr.write_record([
                rec.id.clone(),
                rec.g.to_string(),
                rec.r.to_string(),
                format!("{}", rec.y0),
                rec.y1.map(|v| format!("{v}")).unwrap_or_default(),
                rec.cluster.clone().unwrap_or_default(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Result of a lenient CSV scan: valid rows become a sample (when any
/// exist), invalid rows become (row number, message) pairs.
#[derive(Debug, Clone)]
pub struct CsvScan {
    pub rows_read: usize,
    pub sample: Option<PanelSample>,
    pub violations: Vec<(usize, String)>,
}

/// Attrition rates plus mean baseline outcome per (g, r) cell.
#[derive(Debug, Clone, Serialize)]
pub struct AttritionSummary {
    pub overall: f64,
    pub treatment: f64,
    pub control: f64,
    /// Mean y0 keyed by (g, r); cells with no units are absent.
    /// Serialized with "g=_,r=_" string keys so the map survives JSON.
    #[serde(serialize_with = "serialize_cell_map")]
    pub baseline_means: BTreeMap<(u8, u8), f64>,
}

fn serialize_cell_map<S: serde::Serializer>(
    map: &BTreeMap<(u8, u8), f64>,
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    serializer.collect_map(map.iter().map(|(&(g, r), v)| (format!("g={g},r={r}"), v)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, g: u8, r: u8, y0: f64, y1: Option<f64>) -> UnitRecord {
        UnitRecord {
            id: id.into(),
            g,
            r,
            y0,
            y1,
            cluster: None,
        }
    }

    #[test]
    fn parses_basic_csv() {
        let csv = "id,g,r,y0,y1,cluster\na,1,1,1.0,2.0,\nb,0,0,0.5,,\n";
        let sample = PanelSample::read_csv(csv.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(sample.len(), 2);
        assert_eq!(sample.cell_count(Cell::TREAT_RESP), 1);
        assert_eq!(sample.cell_count(Cell::CONTROL_ATTR), 1);
    }

    #[test]
    fn rejects_y1_with_r0() {
        let csv = "id,g,r,y0,y1\na,0,0,0.5,3.0\n";
        let schema = CsvSchema { cluster: None, ..CsvSchema::default() };
        let err = PanelSample::read_csv(csv.as_bytes(), &schema).unwrap_err();
        match err {
            Error::MalformedRow { row, column, message } => {
                assert_eq!(row, 1);
                assert_eq!(column, "y1");
                assert!(message.contains("y1 present with r=0"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_non_binary_group() {
        let csv = "id,g,r,y0,y1\na,2,1,0.5,1.0\n";
        let schema = CsvSchema { cluster: None, ..CsvSchema::default() };
        assert!(PanelSample::read_csv(csv.as_bytes(), &schema).is_err());
    }

    #[test]
    fn rejects_missing_y0() {
        let csv = "id,g,r,y0,y1\na,1,1,,1.0\n";
        let schema = CsvSchema { cluster: None, ..CsvSchema::default() };
        assert!(PanelSample::read_csv(csv.as_bytes(), &schema).is_err());
    }

    #[test]
    fn subsample_queries() {
        let sample = PanelSample::new(vec![
            rec("a", 1, 1, 1.0, Some(5.0)),
            rec("b", 1, 0, 2.0, None),
        ])
        .unwrap();
        assert_eq!(
            sample.subsample(Cell::TREAT_RESP, OutcomeField::FollowUp).unwrap(),
            vec![5.0]
        );
        assert_eq!(
            sample.subsample(Cell::TREAT_ATTR, OutcomeField::Baseline).unwrap(),
            vec![2.0]
        );
        assert!(matches!(
            sample.subsample(Cell::CONTROL_RESP, OutcomeField::FollowUp),
            Err(Error::EmptyCell { .. })
        ));
        assert!(matches!(
            sample.subsample(Cell::TREAT_ATTR, OutcomeField::FollowUp),
            Err(Error::Y1ForAttritors { g: 1 })
        ));
    }

    #[test]
    fn cell_probabilities_sum_to_one() {
        let sample = PanelSample::new(vec![
            rec("a", 1, 1, 1.0, Some(5.0)),
            rec("b", 1, 0, 2.0, None),
            rec("c", 0, 1, 0.0, Some(1.0)),
        ])
        .unwrap();
        let total: f64 = Cell::ALL.iter().map(|&c| sample.cell_probability(c)).sum();
        assert_eq!(total, 1.0);
    }

    #[test]
    fn attrition_rates() {
        let sample = PanelSample::new(vec![
            rec("a", 1, 1, 1.0, Some(5.0)),
            rec("b", 1, 1, 2.0, Some(4.0)),
            rec("c", 0, 1, 0.0, Some(1.0)),
            rec("d", 0, 0, 3.0, None),
        ])
        .unwrap();
        let summary = sample.attrition_summary();
        assert_eq!(summary.overall, 0.25);
        assert_eq!(summary.treatment, 0.0);
        assert_eq!(summary.control, 0.5);
        assert_eq!(summary.baseline_means[&(1, 1)], 1.5);
    }

    #[test]
    fn csv_round_trip_preserves_records() {
        let sample = PanelSample::new(vec![
            rec("a", 1, 1, 1.25, Some(2.5)),
            rec("b", 0, 0, -0.125, None),
            UnitRecord {
                id: "c".into(),
                g: 0,
                r: 1,
                y0: 0.1,
                y1: Some(0.3),
                cluster: Some("v1".into()),
            },
        ])
        .unwrap();
        let mut buf = Vec::new();
        sample.write_csv(&mut buf, &CsvSchema::default()).unwrap();
        let reloaded = PanelSample::read_csv(buf.as_slice(), &CsvSchema::default()).unwrap();
        assert_eq!(sample.records(), reloaded.records());
    }
}
