//! Diagnostics CSV: one row per record, shortest round-trip decimals, empty
//! cells for absent values.

use ks_core::diagnostics::DiagRecord;
use std::io::{Read, Write};

pub const HEADER: [&str; 14] = [
    "step",
    "time",
    "mass",
    "min_rho",
    "max_rho",
    "energy",
    "d_energy",
    "diss_rho",
    "diss_c_grad",
    "diss_c",
    "l2_rho",
    "l4_rho",
    "linf_rho",
    "dc_dt_l2",
];

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("unexpected header {0:?}")]
    BadHeader(Vec<String>),
    #[error("row {row}, column {column}: cannot parse {value:?}")]
    BadValue { row: usize, column: &'static str, value: String },
    #[error("row {row}: column {column} must not be empty")]
    Missing { row: usize, column: &'static str },
}

/// Shortest decimal that parses back to exactly `v`.
pub fn format_f64(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || !a.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

pub fn record_row(r: &DiagRecord) -> [String; 14] {
    [
        r.n.to_string(),
        format_f64(r.t),
        format_f64(r.mass),
        format_f64(r.min_rho),
        format_f64(r.max_rho),
        cell(r.energy),
        cell(r.d_energy),
        cell(r.diss_rho),
        cell(r.diss_c_grad),
        cell(r.diss_c),
        format_f64(r.l2_rho),
        format_f64(r.l4_rho),
        format_f64(r.linf_rho),
        cell(r.dc_dt_l2),
    ]
}

/// Streams records to `out`, flushing after every row so an aborted run
/// leaves a readable prefix.
pub struct DiagWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> DiagWriter<W> {
    pub fn new(out: W) -> Result<Self, CsvError> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(HEADER)?;
        inner.flush().map_err(csv::Error::from)?;
        Ok(DiagWriter { inner })
    }

    pub fn append(&mut self, r: &DiagRecord) -> Result<(), CsvError> {
        self.inner.write_record(record_row(r))?;
        self.inner.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.inner.into_inner().unwrap_or_else(|e| panic!("flushed writer failed: {e}"))
    }
}

pub fn write_diag_csv(records: &[DiagRecord]) -> Vec<u8> {
    let mut w = DiagWriter::new(Vec::new()).expect("writing to memory");
    for r in records {
        w.append(r).expect("writing to memory");
    }
    w.into_inner()
}

pub fn read_diag_csv<R: Read>(input: R) -> Result<Vec<DiagRecord>, CsvError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(String::from).collect();
    if header != HEADER {
        return Err(CsvError::BadHeader(header));
    }
    let mut out = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let opt = |k: usize| -> Result<Option<f64>, CsvError> {
            let s = &rec[k];
            if s.is_empty() {
                return Ok(None);
            }
            s.parse().map(Some).map_err(|_| CsvError::BadValue {
                row,
                column: HEADER[k],
                value: s.to_string(),
            })
        };
        let req = |k: usize| -> Result<f64, CsvError> {
            opt(k)?.ok_or(CsvError::Missing { row, column: HEADER[k] })
        };
        let n = rec[0].parse().map_err(|_| CsvError::BadValue {
            row,
            column: HEADER[0],
            value: rec[0].to_string(),
        })?;
        out.push(DiagRecord {
            n,
            t: req(1)?,
            mass: req(2)?,
            min_rho: req(3)?,
            max_rho: req(4)?,
            energy: opt(5)?,
            d_energy: opt(6)?,
            diss_rho: opt(7)?,
            diss_c_grad: opt(8)?,
            diss_c: opt(9)?,
            l2_rho: req(10)?,
            l4_rho: req(11)?,
            linf_rho: req(12)?,
            dc_dt_l2: opt(13)?,
        });
    }
    Ok(out)
}
