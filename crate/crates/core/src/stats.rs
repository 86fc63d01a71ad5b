//! Nearest-rank percentiles and fixed-range histograms.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Element at rank `ceil(q * N)` (1-based) of the ascending sort.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    percentile_sorted(&sorted, q)
}

pub fn percentile_sorted(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "percentile level {q} not in (0, 1]"
        )));
    }
    // q * N can land just above an integer in floating point (0.95 * 100).
    let rank = (q * sorted.len() as f64 - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[rank.min(sorted.len()) - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
}

/// Equal-width bins over `[0, 1]`; values equal to 1 fall in the last bin.
/// An overflow bin `(1, 2]` is appended only when some value exceeds 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bins: Vec<Bin>,
}

impl Histogram {
    pub fn unit_range(values: &[f64], bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::InvalidArgument("bin count must be positive".into()));
        }
        let mut counts = vec![0u64; bins];
        let mut overflow = 0u64;
        for &x in values {
            if x > 1.0 {
                overflow += 1;
            } else {
                let k = ((x.max(0.0) * bins as f64) as usize).min(bins - 1);
                counts[k] += 1;
            }
        }
        let width = 1.0 / bins as f64;
        let mut out: Vec<Bin> = counts
            .into_iter()
            .enumerate()
            .map(|(k, count)| Bin {
                lo: k as f64 * width,
                hi: if k + 1 == bins {
                    1.0
                } else {
                    (k + 1) as f64 * width
                },
                count,
            })
            .collect();
        if overflow > 0 {
            out.push(Bin {
                lo: 1.0,
                hi: 2.0,
                count: overflow,
            });
        }
        Ok(Self { bins: out })
    }

    pub fn total(&self) -> u64 {
        self.bins.iter().map(|b| b.count).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_lo,bin_hi,count\n");
        for b in &self.bins {
            s.push_str(&format!("{},{},{}\n", b.lo, b.hi, b.count));
        }
        s
    }

    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let rows = read_numeric_csv(reader, &["bin_lo", "bin_hi", "count"])?;
        let bins = rows
            .into_iter()
            .enumerate()
            .map(|(k, r)| {
                if r[2] < 0.0 || r[2].fract() != 0.0 {
                    return Err(Error::MalformedRow {
                        line: k as u64 + 2,
                        reason: format!("count {} is not a non-negative integer", r[2]),
                    });
                }
                Ok(Bin {
                    lo: r[0],
                    hi: r[1],
                    count: r[2] as u64,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { bins })
    }
}

/// Reads a headed all-numeric CSV, checking the header matches `columns`.
pub fn read_numeric_csv<R: Read>(reader: R, columns: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = csv
        .headers()
        .map_err(|e| Error::MalformedRow {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    if header.iter().ne(columns.iter().copied()) {
        return Err(Error::MalformedRow {
            line: 1,
            reason: format!(
                "expected header {:?}, found {:?}",
                columns.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut rows = Vec::new();
    for (k, record) in csv.records().enumerate() {
        let line = k as u64 + 2;
        let record = record.map_err(|e| Error::MalformedRow {
            line,
            reason: e.to_string(),
        })?;
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|_| Error::MalformedRow {
                    line,
                    reason: format!("not a number: {field:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}
