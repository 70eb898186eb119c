//! Canonical in-memory table and the CSV loader that produces it.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{ColumnKind, Schema};

/// One cell. Categories are stored as indices into the column vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Number(f64),
    Category(u32),
}

impl Value {
    pub fn as_number(&self) -> Option<f64> {
        match *self {
            Value::Number(v) => Some(v),
            Value::Category(_) => None,
        }
    }

    pub fn as_category(&self) -> Option<usize> {
        match *self {
            Value::Category(c) => Some(c as usize),
            Value::Number(_) => None,
        }
    }
}

pub type Row = Vec<Value>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MissingValues {
    /// Discard every row holding the sentinel in any column.
    DropIncomplete,
    /// Keep rows; a sentinel in a categorical column becomes an ordinary category.
    KeepAsCategory,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CleaningPolicy {
    pub missing: MissingValues,
    pub sentinel: String,
    /// First non-comment record is a header naming the columns.
    pub has_header: bool,
    /// Allow categories missing from a declared vocabulary (appended in sorted order).
    pub extend_vocabulary: bool,
    /// Normalize label variants such as `>50K.` to `>50K`.
    pub strip_trailing_period: bool,
}

impl Default for CleaningPolicy {
    fn default() -> Self {
        CleaningPolicy {
            missing: MissingValues::DropIncomplete,
            sentinel: "?".into(),
            has_header: true,
            extend_vocabulary: false,
            strip_trailing_period: true,
        }
    }
}

/// Rows conforming to a schema whose categorical vocabularies are all populated.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    schema: Schema,
    rows: Vec<Row>,
}

impl Table {
    /// Build a table from already-typed rows, checking shape and vocabulary bounds.
    pub fn new(schema: Schema, rows: Vec<Row>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(Error::Schema(format!(
                    "row {i} has {} cells, schema has {} columns",
                    row.len(),
                    schema.len()
                )));
            }
            for (cell, col) in row.iter().zip(schema.columns()) {
                let ok = match (cell, col.kind) {
                    (Value::Number(v), ColumnKind::Numeric) => !v.is_nan(),
                    (Value::Category(c), ColumnKind::Categorical) => {
                        (*c as usize) < col.vocabulary.len()
                    }
                    _ => false,
                };
                if !ok {
                    return Err(Error::Schema(format!(
                        "row {i}: invalid cell {cell:?} for column `{}`",
                        col.name
                    )));
                }
            }
        }
        Ok(Table { schema, rows })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn numeric_column(&self, col: usize) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r[col].as_number().expect("numeric column"))
            .collect()
    }

    pub fn category_codes(&self, col: usize) -> Vec<usize> {
        self.rows
            .iter()
            .map(|r| r[col].as_category().expect("categorical column"))
            .collect()
    }

    pub fn category_name(&self, col: usize, code: usize) -> &str {
        &self.schema.column(col).vocabulary[code]
    }

    /// Keep only the rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Table {
        Table {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    pub fn head(&self, n: usize) -> Table {
        Table {
            schema: self.schema.clone(),
            rows: self.rows.iter().take(n).cloned().collect(),
        }
    }

    /// Write the table as CSV with a header row. Integer columns are printed
    /// without a fractional part.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().from_writer(out);
        let wrap = |e: csv::Error| Error::io("writing csv", std::io::Error::other(e));
        w.write_record(self.schema.names()).map_err(wrap)?;
        let mut record = Vec::with_capacity(self.schema.len());
        for row in &self.rows {
            record.clear();
            for (cell, col) in row.iter().zip(self.schema.columns()) {
                record.push(match *cell {
                    Value::Number(v) if col.integer => format!("{}", v.round() as i64),
                    Value::Number(v) => format!("{v}"),
                    Value::Category(c) => col.vocabulary[c as usize].clone(),
                });
            }
            w.write_record(&record).map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::io("writing csv", e))?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)
            .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Load and clean a comma-delimited file against `schema`.
///
/// Blank lines and lines starting with `|` are skipped. Categorical
/// vocabularies come from the schema when declared; otherwise they are fitted
/// from the surviving rows and sorted lexicographically.
pub fn load_table(csv_path: &Path, schema: &Schema, policy: &CleaningPolicy) -> Result<Table> {
    let file = std::fs::File::open(csv_path)
        .map_err(|e| Error::io(format!("opening {}", csv_path.display()), e))?;
    load_table_from_reader(std::io::BufReader::new(file), csv_path, schema, policy)
}

pub fn load_table_from_reader<R: std::io::Read>(
    reader: R,
    source: &Path,
    schema: &Schema,
    policy: &CleaningPolicy,
) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'|'))
        .trim(csv::Trim::All)
        .from_reader(reader);

    let data_err = |line: u64, message: String| Error::Data {
        path: source.to_path_buf(),
        line,
        message,
    };

    // file position -> schema column
    let mut order: Option<Vec<usize>> = if policy.has_header {
        None
    } else {
        Some((0..schema.len()).collect())
    };

    let mut raw_rows: Vec<(u64, Vec<String>)> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            data_err(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if order.is_none() {
            order = Some(header_order(&record, schema, source)?);
            continue;
        }
        if record.len() != schema.len() {
            return Err(data_err(
                line,
                format!("expected {} fields, found {}", schema.len(), record.len()),
            ));
        }
        let order = order.as_ref().expect("order resolved");
        let mut fields = vec![String::new(); schema.len()];
        for (pos, field) in record.iter().enumerate() {
            fields[order[pos]] = field.to_string();
        }
        raw_rows.push((line, fields));
    }
    if order.is_none() {
        return Err(Error::Header {
            path: source.to_path_buf(),
            message: "file is empty; expected a header row".into(),
        });
    }

    let sentinel = policy.sentinel.as_str();
    if policy.missing == MissingValues::DropIncomplete {
        raw_rows.retain(|(_, fields)| !fields.iter().any(|f| f == sentinel));
    }
    if policy.strip_trailing_period {
        for (_, fields) in &mut raw_rows {
            for (field, col) in fields.iter_mut().zip(schema.columns()) {
                if col.is_categorical() && field.len() > 1 && field.ends_with('.') {
                    field.pop();
                }
            }
        }
    }

    let mut schema = schema.clone();
    for (ci, col) in schema.columns_mut().iter_mut().enumerate() {
        if !col.is_categorical() {
            continue;
        }
        let observed: BTreeSet<&str> = raw_rows.iter().map(|(_, f)| f[ci].as_str()).collect();
        if col.vocabulary.is_empty() {
            col.vocabulary = observed.into_iter().map(str::to_string).collect();
        } else {
            let unknown: Vec<&str> = observed
                .into_iter()
                .filter(|v| !col.vocabulary.iter().any(|d| d == v))
                .collect();
            if !unknown.is_empty() {
                if !policy.extend_vocabulary {
                    let (line, _) = raw_rows
                        .iter()
                        .find(|(_, f)| f[ci] == unknown[0])
                        .expect("unknown category came from a row");
                    return Err(data_err(
                        *line,
                        format!("unknown category `{}` in column `{}`", unknown[0], col.name),
                    ));
                }
                col.vocabulary.extend(unknown.into_iter().map(str::to_string));
            }
        }
    }

    let mut rows = Vec::with_capacity(raw_rows.len());
    for (line, fields) in &raw_rows {
        let mut row = Vec::with_capacity(schema.len());
        for (field, col) in fields.iter().zip(schema.columns()) {
            row.push(match col.kind {
                ColumnKind::Numeric => {
                    let v: f64 = field.parse().map_err(|_| {
                        data_err(
                            *line,
                            format!("unparseable numeric `{field}` in column `{}`", col.name),
                        )
                    })?;
                    if !v.is_finite() {
                        return Err(data_err(
                            *line,
                            format!("non-finite numeric in column `{}`", col.name),
                        ));
                    }
                    Value::Number(v)
                }
                ColumnKind::Categorical => Value::Category(
                    col.category_index(field).expect("vocabulary covers observed values") as u32,
                ),
            });
        }
        rows.push(row);
    }
    Ok(Table { schema, rows })
}

fn header_order(record: &csv::StringRecord, schema: &Schema, source: &Path) -> Result<Vec<usize>> {
    let mismatch = |message: String| Error::Header {
        path: source.to_path_buf(),
        message,
    };
    if record.len() != schema.len() {
        return Err(mismatch(format!(
            "header has {} fields, schema has {} columns",
            record.len(),
            schema.len()
        )));
    }
    let mut order = Vec::with_capacity(record.len());
    let mut seen = vec![false; schema.len()];
    for name in record.iter() {
        let idx = schema
            .index_of(name)
            .ok_or_else(|| mismatch(format!("column `{name}` is not in the schema")))?;
        if seen[idx] {
            return Err(mismatch(format!("column `{name}` appears twice")));
        }
        seen[idx] = true;
        order.push(idx);
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::ColumnSpec;

    fn schema3() -> Schema {
        Schema::new(vec![
            ColumnSpec::numeric("age", true, Some((17.0, 90.0))),
            ColumnSpec::categorical("sex", vec![]),
            ColumnSpec::categorical("income", vec![]),
        ])
        .unwrap()
    }

    fn load(text: &str, policy: &CleaningPolicy) -> Result<Table> {
        load_table_from_reader(text.as_bytes(), Path::new("fixture.csv"), &schema3(), policy)
    }

    #[test]
    fn drops_incomplete_rows() {
        let text = "age,sex,income\n39, Male, <=50K\n50, ?, >50K\n28, Female, <=50K\n";
        let t = load(text, &CleaningPolicy::default()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.rows()[1][0], Value::Number(28.0));
    }

    #[test]
    fn keep_policy_turns_sentinel_into_category() {
        let policy = CleaningPolicy {
            missing: MissingValues::KeepAsCategory,
            ..CleaningPolicy::default()
        };
        let text = "age,sex,income\n39, Male, <=50K\n50, ?, >50K\n";
        let t = load(text, &policy).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.schema().column(1).vocabulary, ["?", "Male"]);
    }

    #[test]
    fn strips_label_period_and_sorts_vocabulary() {
        let text = "age,sex,income\n39, Male, >50K.\n50, Female, <=50K\n";
        let t = load(text, &CleaningPolicy::default()).unwrap();
        let income = t.schema().column(2);
        assert_eq!(income.vocabulary, ["<=50K", ">50K"]);
        assert_eq!(t.category_name(2, t.rows()[0][2].as_category().unwrap()), ">50K");
        assert_eq!(t.schema().column(1).vocabulary, ["Female", "Male"]);
    }

    #[test]
    fn header_is_order_insensitive() {
        let text = "income,age,sex\n<=50K,39,Male\n";
        let t = load(text, &CleaningPolicy::default()).unwrap();
        assert_eq!(t.rows()[0][0], Value::Number(39.0));
    }

    #[test]
    fn header_mismatch_and_bad_numbers() {
        let err = load("age,gender,income\n1,a,b\n", &CleaningPolicy::default()).unwrap_err();
        assert!(matches!(err, Error::Header { .. }));
        let err = load("age,sex,income\nold,Male,>50K\n", &CleaningPolicy::default()).unwrap_err();
        assert!(err.to_string().contains("unparseable numeric"), "{err}");
    }

    #[test]
    fn positional_mode_and_comment_lines() {
        let policy = CleaningPolicy {
            has_header: false,
            ..CleaningPolicy::default()
        };
        let text = "|1x3 Cross validator\n25, Male, <=50K.\n\n38, Female, >50K.\n";
        let t = load(text, &policy).unwrap();
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn declared_vocabulary_rejects_unknown_unless_extended() {
        let mut schema = schema3();
        schema.columns_mut()[1].vocabulary = vec!["Male".into(), "Female".into()];
        let text = "age,sex,income\n39,Other,>50K\n";
        let err = load_table_from_reader(
            text.as_bytes(),
            Path::new("f"),
            &schema,
            &CleaningPolicy::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("unknown category"), "{err}");
        let policy = CleaningPolicy {
            extend_vocabulary: true,
            ..CleaningPolicy::default()
        };
        let t = load_table_from_reader(text.as_bytes(), Path::new("f"), &schema, &policy).unwrap();
        assert_eq!(t.schema().column(1).vocabulary, ["Male", "Female", "Other"]);
    }

    #[test]
    fn csv_writer_round_trips() {
        let text = "age,sex,income\n39,Male,>50K\n50,Female,<=50K\n";
        let t = load(text, &CleaningPolicy::default()).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), text);
        let schema = t.schema().clone();
        let again =
            load_table_from_reader(&buf[..], Path::new("f"), &schema, &CleaningPolicy::default())
                .unwrap();
        assert_eq!(again, t);
    }
}
