use std::collections::{BTreeSet, HashMap};
use std::io;

use serde::{Deserialize, Serialize};

use super::schema::{normalize_name, ColumnKind, ColumnSchema, TARGET};
use super::DataError;

/// Column storage; `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Column {
    Numeric(Vec<Option<f64>>),
    Text(Vec<Option<String>>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            Column::Numeric(v) => v[row].is_none(),
            Column::Text(v) => v[row].is_none(),
        }
    }

    pub fn missing_count(&self) -> usize {
        (0..self.len()).filter(|&r| self.is_missing(r)).count()
    }

    pub fn as_numeric(&self) -> Option<&[Option<f64>]> {
        match self {
            Column::Numeric(v) => Some(v),
            Column::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&[Option<String>]> {
        match self {
            Column::Text(v) => Some(v),
            Column::Numeric(_) => None,
        }
    }

    fn select(&self, rows: &[usize]) -> Column {
        match self {
            Column::Numeric(v) => Column::Numeric(rows.iter().map(|&r| v[r]).collect()),
            Column::Text(v) => Column::Text(rows.iter().map(|&r| v[r].clone()).collect()),
        }
    }
}

/// A typed table with one designated numeric target column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    schema: Vec<ColumnSchema>,
    columns: Vec<Column>,
    target: String,
}

impl Dataset {
    pub fn new(schema: Vec<ColumnSchema>, columns: Vec<Column>, target: &str) -> Result<Self, DataError> {
        if schema.len() != columns.len() {
            return Err(DataError::Invalid(format!("{} schema entries for {} columns", schema.len(), columns.len())));
        }
        let rows = columns.first().map_or(0, Column::len);
        for (s, c) in schema.iter().zip(&columns) {
            if c.len() != rows {
                return Err(DataError::Invalid(format!("column {:?} has {} rows, expected {rows}", s.name, c.len())));
            }
            let numeric = matches!(s.kind, ColumnKind::Numerical { .. });
            if numeric != matches!(c, Column::Numeric(_)) {
                return Err(DataError::Invalid(format!("column {:?} storage does not match its kind", s.name)));
            }
            if let (Some((lo, hi)), Column::Numeric(v)) = (s.bounds(), c) {
                if let Some(x) = v.iter().flatten().find(|x| !(lo..=hi).contains(*x)) {
                    return Err(DataError::Invalid(format!("column {:?} value {x} outside [{lo}, {hi}]", s.name)));
                }
            }
        }
        let t = schema
            .iter()
            .position(|s| s.name == target)
            .ok_or_else(|| DataError::MissingColumn(target.to_string()))?;
        if !matches!(columns[t], Column::Numeric(_)) {
            return Err(DataError::Invalid(format!("target {target:?} must be numeric")));
        }
        if columns[t].missing_count() > 0 {
            return Err(DataError::Invalid(format!("target {target:?} has missing cells")));
        }
        Ok(Self {
            schema,
            columns,
            target: target.to_string(),
        })
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Column::len)
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn target_name(&self) -> &str {
        &self.target
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|s| s.name == name)
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.index_of(name).map(|i| &self.columns[i])
    }

    pub fn target(&self) -> Vec<f64> {
        let v = self.column(&self.target).and_then(Column::as_numeric).expect("target column");
        v.iter().map(|x| x.expect("target observed")).collect()
    }

    /// Every column except the target, in order.
    pub fn feature_names(&self) -> Vec<String> {
        self.schema.iter().filter(|s| s.name != self.target).map(|s| s.name.clone()).collect()
    }

    pub fn missing_cells(&self) -> usize {
        self.columns.iter().map(Column::missing_count).sum()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Self {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            target: self.target.clone(),
        }
    }

    pub(crate) fn into_parts(self) -> (Vec<ColumnSchema>, Vec<Column>, String) {
        (self.schema, self.columns, self.target)
    }

    /// Writes a header row and one line per row; missing cells are empty.
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<(), DataError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.schema.iter().map(|s| s.name.as_str()))?;
        let mut record = Vec::with_capacity(self.columns.len());
        for r in 0..self.rows() {
            record.clear();
            for c in &self.columns {
                record.push(match c {
                    Column::Numeric(v) => v[r].map(format_number).unwrap_or_default(),
                    Column::Text(v) => v[r].clone().unwrap_or_default(),
                });
            }
            out.write_record(&record)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Shortest text that parses back to the same value.
pub fn format_number(v: f64) -> String {
    format!("{v}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    /// 1-based data row (the header is row 0).
    pub row: usize,
    pub column: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct ParseOutcome {
    pub dataset: Dataset,
    pub rejections: Vec<Rejection>,
    /// Non-target cells that were present but unparseable or out of bounds.
    pub invalid_cells: usize,
}

pub fn write_rejections<W: io::Write>(rejections: &[Rejection], w: W) -> Result<(), DataError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["row", "column", "reason"])?;
    for r in rejections {
        out.write_record([r.row.to_string(), r.column.clone(), r.reason.clone()])?;
    }
    out.flush()?;
    Ok(())
}

fn is_placeholder(cell: &str) -> bool {
    matches!(cell.to_ascii_lowercase().as_str(), "" | "na" | "n/a" | "nan" | "null" | "?")
}

fn parse_number(cell: &str) -> Option<f64> {
    let cleaned: String = cell.chars().filter(|c| !matches!(c, '$' | ',' | '+' | ' ')).collect();
    cleaned.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a headed CSV. Lines starting with `#` are comments. Header names
/// are matched to the schema ignoring case, spacing and punctuation; extra
/// columns are ignored. Target cells that are missing, unparseable or out of
/// bounds reject their row; other bad cells become missing.
pub fn parse_records<R: io::Read>(input: R, schema: &[ColumnSchema]) -> Result<ParseOutcome, DataError> {
    let target_schema = schema
        .iter()
        .find(|s| s.name == TARGET)
        .or_else(|| schema.iter().find(|s| !s.nullable && s.is_numerical()))
        .ok_or_else(|| DataError::Invalid("schema has no target column".into()))?;
    let target = target_schema.name.clone();
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(input);
    let header = reader.headers()?.clone();
    let by_name: HashMap<String, usize> = header.iter().enumerate().map(|(i, h)| (normalize_name(h), i)).collect();
    let mut positions = Vec::with_capacity(schema.len());
    let mut kept = Vec::with_capacity(schema.len());
    for s in schema {
        match by_name.get(&normalize_name(&s.name)) {
            Some(&p) => {
                positions.push(p);
                kept.push(s.clone());
            }
            None if s.kind == ColumnKind::Date => {}
            None => return Err(DataError::MissingColumn(s.name.clone())),
        }
    }
    let mut columns: Vec<Column> = kept
        .iter()
        .map(|s| if s.is_numerical() { Column::Numeric(vec![]) } else { Column::Text(vec![]) })
        .collect();
    let mut rejections = vec![];
    let mut invalid_cells = 0;
    let mut row_cells: Vec<Option<Result<f64, String>>> = Vec::with_capacity(kept.len());
    for (idx, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = idx + 1;
        row_cells.clear();
        let mut reject = None;
        for (s, &p) in kept.iter().zip(&positions) {
            let raw = rec.get(p).unwrap_or("");
            let missing = is_placeholder(raw);
            let parsed = match s.bounds() {
                Some((lo, hi)) if !missing => match parse_number(raw) {
                    Some(v) if (lo..=hi).contains(&v) => Some(Ok(v)),
                    Some(v) => Some(Err(format!("value {v} outside bounds [{lo}, {hi}]"))),
                    None => Some(Err(format!("unparseable number {raw:?}"))),
                },
                _ => None,
            };
            if s.name == target {
                let why = match (&parsed, missing) {
                    (_, true) => Some("missing value".to_string()),
                    (Some(Err(e)), _) => Some(e.clone()),
                    _ => None,
                };
                if let Some(reason) = why {
                    reject = Some(Rejection {
                        row,
                        column: s.name.clone(),
                        reason,
                    });
                    break;
                }
            }
            row_cells.push(parsed);
        }
        if let Some(r) = reject {
            rejections.push(r);
            continue;
        }
        for ((c, s), (parsed, &p)) in columns.iter_mut().zip(&kept).zip(row_cells.iter().zip(&positions)) {
            let raw = rec.get(p).unwrap_or("");
            match c {
                Column::Numeric(v) => v.push(match parsed {
                    Some(Ok(x)) => Some(*x),
                    Some(Err(_)) => {
                        invalid_cells += 1;
                        None
                    }
                    None => None,
                }),
                Column::Text(v) => {
                    let value = if is_placeholder(raw) {
                        None
                    } else if s.kind == ColumnKind::Logical {
                        match raw.to_ascii_uppercase().as_str() {
                            "Y" | "YES" | "TRUE" | "1" => Some("Y".to_string()),
                            "N" | "NO" | "FALSE" | "0" => Some("N".to_string()),
                            _ => {
                                invalid_cells += 1;
                                None
                            }
                        }
                    } else {
                        Some(raw.to_string())
                    };
                    v.push(value);
                }
            }
        }
    }
    for (s, c) in kept.iter_mut().zip(&columns) {
        if let (ColumnKind::Categorical { categories }, Column::Text(v)) = (&mut s.kind, c) {
            *categories = observed_categories(v);
        }
    }
    if columns.first().map_or(0, Column::len) == 0 {
        return Err(DataError::Empty(format!("no rows accepted ({} rejected)", rejections.len())));
    }
    let dataset = Dataset::new(kept, columns, &target)?;
    Ok(ParseOutcome {
        dataset,
        rejections,
        invalid_cells,
    })
}

pub(crate) fn observed_categories(v: &[Option<String>]) -> Vec<String> {
    v.iter().flatten().cloned().collect::<BTreeSet<_>>().into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::sparcs_schema;

    fn small_schema() -> Vec<ColumnSchema> {
        vec![
            ColumnSchema::categorical("Gender"),
            ColumnSchema::numerical("Total Costs", 100.0, 2e5),
            ColumnSchema::logical("Emergency Department Indicator"),
            {
                let mut c = ColumnSchema::numerical(TARGET, 0.0, 140.0);
                c.nullable = false;
                c
            },
        ]
    }

    #[test]
    fn well_formed_file() {
        let csv = "Gender,Total Costs,Emergency Department Indicator,Length Of Stay\nF,1200,Y,3\nM,\"$5,400.50\",N,7\nU,900,Y,0\n";
        let out = parse_records(csv.as_bytes(), &small_schema()).unwrap();
        assert_eq!(out.dataset.rows(), 3);
        assert!(out.rejections.is_empty());
        assert_eq!(out.dataset.column("Total Costs").unwrap().as_numeric().unwrap()[1], Some(5400.5));
        assert_eq!(out.dataset.target(), vec![3.0, 7.0, 0.0]);
        match &out.dataset.schema()[0].kind {
            ColumnKind::Categorical { categories } => assert_eq!(categories, &["F", "M", "U"]),
            k => panic!("{k:?}"),
        }
    }

    #[test]
    fn long_stay_is_rejected_with_reason() {
        let csv = "Length Of Stay,Gender,Total Costs,Emergency Department Indicator\n150,F,1000,N\n4,M,1000,N\n";
        let out = parse_records(csv.as_bytes(), &small_schema()).unwrap();
        assert_eq!(out.dataset.rows(), 1);
        assert_eq!(out.rejections.len(), 1);
        let r = &out.rejections[0];
        assert_eq!((r.row, r.column.as_str()), (1, TARGET));
        assert!(r.reason.contains("140"), "{}", r.reason);
    }

    #[test]
    fn empty_cells_become_missing() {
        let csv = "gender,total_costs,emergency department indicator,length of stay\n,50,Y,2\nF,abc,maybe,3\n";
        let out = parse_records(csv.as_bytes(), &small_schema()).unwrap();
        let ds = &out.dataset;
        assert!(ds.column("Gender").unwrap().is_missing(0));
        assert!(ds.column("Total Costs").unwrap().is_missing(0));
        assert!(ds.column("Total Costs").unwrap().is_missing(1));
        assert!(ds.column("Emergency Department Indicator").unwrap().is_missing(1));
        assert_eq!(out.invalid_cells, 3);
    }

    #[test]
    fn missing_required_column_errors() {
        let csv = "Gender,Length Of Stay\nF,2\n";
        let err = parse_records(csv.as_bytes(), &sparcs_schema()).unwrap_err();
        assert!(matches!(err, DataError::MissingColumn(_)), "{err}");
    }

    #[test]
    fn comments_and_round_trip() {
        let csv = "# seed=1\nGender,Total Costs,Emergency Department Indicator,Length Of Stay\nF,1234.5,Y,3\n,,N,8\n";
        let ds = parse_records(csv.as_bytes(), &small_schema()).unwrap().dataset;
        let mut buf = vec![];
        ds.write_csv(&mut buf).unwrap();
        let again = parse_records(buf.as_slice(), &small_schema()).unwrap().dataset;
        assert_eq!(again, ds);
    }
}
