//! A DP's local table: a flat CSV file with a header row.

use std::path::Path;

use thiserror::Error;
use veriquery::query::Filter;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("reading table: {0}")]
    Csv(#[from] csv::Error),
    #[error("unknown attribute '{0}'")]
    UnknownAttribute(String),
    #[error("row {row}: '{value}' in column '{column}' is not a number")]
    NotNumeric { row: usize, column: String, value: String },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn load(path: &Path) -> Result<Self, DataError> {
        Table::from_reader(std::fs::File::open(path).map_err(csv::Error::from)?)
    }

    pub fn from_reader<R: std::io::Read>(r: R) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = rdr.headers()?.iter().map(str::to_string).collect();
        let rows = rdr
            .records()
            .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<Result<_, _>>()?;
        Ok(Table { headers, rows })
    }

    /// Numeric table with the given column names.
    pub fn numeric(headers: &[&str], rows: &[Vec<f64>]) -> Self {
        Table {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: rows
                .iter()
                .map(|r| r.iter().map(|x| x.to_string()).collect())
                .collect(),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), DataError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.headers)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    fn column(&self, name: &str) -> Result<usize, DataError> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::UnknownAttribute(name.to_string()))
    }

    /// The `attributes` columns of every row passing `filter`, parsed as numbers.
    pub fn select(&self, attributes: &[String], filter: Option<&Filter>) -> Result<Vec<Vec<f64>>, DataError> {
        let cols = attributes
            .iter()
            .map(|a| self.column(a))
            .collect::<Result<Vec<_>, _>>()?;
        let fcol = filter.map(|f| self.column(&f.attribute)).transpose()?;
        let mut out = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            if let (Some(f), Some(c)) = (filter, fcol) {
                if !f.matches(&row[c]) {
                    continue;
                }
            }
            let rec = cols
                .iter()
                .map(|&c| {
                    row[c].parse::<f64>().map_err(|_| DataError::NotNumeric {
                        row: i,
                        column: self.headers[c].clone(),
                        value: row[c].clone(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            out.push(rec);
        }
        Ok(out)
    }
}
