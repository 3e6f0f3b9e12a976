//! Downstream application: impute a class for each contribution record and
//! aggregate each class's share of total donated dollars, optionally per
//! year.
//!
//! Hard (argmax) imputation is the default construction: each record gets
//! exactly one label and shares are sums of whole amounts. Soft mode
//! weights each record's amount by its full probability vector instead —
//! a probabilistic extension of that table, not a reproduction of it.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{LabelSet, NameRecord};
use crate::error::{Error, Result};
use crate::model_io::ModelContainer;
use crate::nn::predict_proba_threaded;
use crate::textprep::encode_record;

/// One donation row: name, dollars, and an optional year.
#[derive(Debug, Clone, PartialEq)]
pub struct ContributionRecord {
    pub last_name: String,
    pub first_name: Option<String>,
    pub amount: f64,
    pub year: Option<i32>,
}

/// Column names for a contributions CSV. `first_name`/`year` may be absent
/// from the file entirely.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContributionSchema {
    pub last_name: String,
    pub first_name: Option<String>,
    pub amount: String,
    pub year: Option<String>,
}

impl Default for ContributionSchema {
    fn default() -> Self {
        Self {
            last_name: "last_name".into(),
            first_name: Some("first_name".into()),
            amount: "amount".into(),
            year: Some("year".into()),
        }
    }
}

/// A record with its imputed label and the full probability vector behind
/// it.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputedRecord {
    pub record: ContributionRecord,
    pub label: String,
    pub probs: Vec<f64>,
}

/// Imputation output: scored records plus how many were skipped because
/// their name normalized to empty.
#[derive(Debug, Clone)]
pub struct Imputation {
    pub records: Vec<ImputedRecord>,
    pub skipped: usize,
}

/// How amounts are attributed to classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShareMode {
    /// Whole amount to the argmax label.
    Hard,
    /// Amount split across labels by predicted probability.
    Soft,
}

/// Per-class share of the total amount within one group of records.
#[derive(Debug, Clone, PartialEq)]
pub struct ShareTable {
    pub shares: BTreeMap<String, f64>,
    pub total_amount: f64,
    pub n_records: usize,
}

/// Grouping key for per-year tables: years ascending, then the records
/// that carry no year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum YearGroup {
    Year(i32),
    Unspecified,
}

impl fmt::Display for YearGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            YearGroup::Year(y) => write!(f, "{y}"),
            YearGroup::Unspecified => write!(f, "unspecified"),
        }
    }
}

/// Index of the largest probability; ties break to the lowest class index.
pub fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (k, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = k;
        }
    }
    best
}

/// Read a contributions CSV. Amounts must be finite and non-negative; blank
/// year cells mean "no year".
pub fn load_contributions_csv(
    path: &Path,
    schema: &ContributionSchema,
) -> Result<Vec<ContributionRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers().map_err(csv_err)?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn {
                column: name.to_string(),
                path: path.to_path_buf(),
            })
    };
    let last_col = find(&schema.last_name)?;
    let first_col = schema.first_name.as_deref().map(find).transpose()?;
    let amount_col = find(&schema.amount)?;
    let year_col = schema.year.as_deref().map(find).transpose()?;

    let mut records = Vec::new();
    for (row_idx, row) in reader.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let invalid = |field: &str, reason: String| Error::InvalidField {
            field: field.to_string(),
            path: path.to_path_buf(),
            row: row_idx + 2,
            reason,
        };
        let amount_cell = row.get(amount_col).unwrap_or("").trim();
        let amount: f64 = amount_cell
            .parse()
            .map_err(|_| invalid(&schema.amount, format!("{amount_cell:?} is not a number")))?;
        if !amount.is_finite() || amount < 0.0 {
            return Err(invalid(
                &schema.amount,
                format!("amount {amount} must be finite and non-negative"),
            ));
        }
        let year = match year_col {
            Some(col) => {
                let cell = row.get(col).unwrap_or("").trim();
                if cell.is_empty() {
                    None
                } else {
                    Some(cell.parse::<i32>().map_err(|_| {
                        invalid(
                            schema.year.as_deref().unwrap_or("year"),
                            format!("{cell:?} is not a year"),
                        )
                    })?)
                }
            }
            None => None,
        };
        records.push(ContributionRecord {
            last_name: row.get(last_col).unwrap_or("").trim().to_string(),
            first_name: first_col
                .and_then(|c| row.get(c))
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string),
            amount,
            year,
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyContributions);
    }
    Ok(records)
}

/// Score every record with the container's model, preprocessing names
/// exactly as training did (stored PrepConfig and vocabulary). Records
/// whose name normalizes to empty are skipped and counted, never scored.
pub fn impute(
    records: &[ContributionRecord],
    container: &ModelContainer,
    threads: usize,
) -> Result<Imputation> {
    if records.is_empty() {
        return Err(Error::EmptyContributions);
    }
    container.validate()?;

    let mut kept = Vec::new();
    let mut encoded: Vec<Vec<usize>> = Vec::new();
    for (pos, record) in records.iter().enumerate() {
        let as_name = NameRecord {
            last_name: record.last_name.clone(),
            first_name: record.first_name.clone(),
            label: String::new(),
        };
        if let Some(seq) = encode_record(&as_name, &container.vocabulary, &container.prep) {
            kept.push(pos);
            encoded.push(seq.indices);
        }
    }
    let skipped = records.len() - kept.len();
    let probs = predict_proba_threaded(&encoded, &container.params, &container.model, threads)?;

    let imputed = kept
        .into_iter()
        .zip(probs)
        .map(|(pos, p)| ImputedRecord {
            record: records[pos].clone(),
            label: container.labels.label(argmax(&p)).to_string(),
            probs: p,
        })
        .collect();
    Ok(Imputation {
        records: imputed,
        skipped,
    })
}

/// Aggregate one group of imputed records into per-class amount shares.
/// Every label of the set appears in the table, zero when unrepresented.
pub fn shares(imputed: &[ImputedRecord], labels: &LabelSet, mode: ShareMode) -> Result<ShareTable> {
    if imputed.is_empty() {
        return Err(Error::EmptyContributions);
    }
    let total: f64 = imputed.iter().map(|r| r.record.amount).sum();
    if total <= 0.0 {
        return Err(Error::ZeroTotalAmount);
    }
    let mut sums: BTreeMap<String, f64> =
        labels.labels().iter().map(|l| (l.clone(), 0.0)).collect();
    match mode {
        ShareMode::Hard => {
            for r in imputed {
                let slot = sums.get_mut(&r.label).ok_or_else(|| Error::UnknownLabel {
                    label: r.label.clone(),
                })?;
                *slot += r.record.amount;
            }
        }
        ShareMode::Soft => {
            for r in imputed {
                if r.probs.len() != labels.len() {
                    return Err(Error::LengthMismatch {
                        what: "probability entries",
                        expected: labels.len(),
                        got: r.probs.len(),
                    });
                }
                for (k, &p) in r.probs.iter().enumerate() {
                    *sums.get_mut(labels.label(k)).expect("label present") += r.record.amount * p;
                }
            }
        }
    }
    let shares = sums.into_iter().map(|(l, s)| (l, s / total)).collect();
    Ok(ShareTable {
        shares,
        total_amount: total,
        n_records: imputed.len(),
    })
}

/// Group records by year (records without one form the trailing
/// "unspecified" group) and compute each group's share table.
pub fn shares_by_year(
    imputed: &[ImputedRecord],
    labels: &LabelSet,
    mode: ShareMode,
) -> Result<BTreeMap<YearGroup, ShareTable>> {
    let mut groups: BTreeMap<YearGroup, Vec<ImputedRecord>> = BTreeMap::new();
    for r in imputed {
        let key = match r.record.year {
            Some(y) => YearGroup::Year(y),
            None => YearGroup::Unspecified,
        };
        groups.entry(key).or_default().push(r.clone());
    }
    groups
        .into_iter()
        .map(|(k, rs)| Ok((k, shares(&rs, labels, mode)?)))
        .collect()
}

/// Write share tables as CSV: one row per (year group, label).
pub fn write_share_csv(tables: &BTreeMap<YearGroup, ShareTable>, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    })?;
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    writer
        .write_record(["year", "label", "share", "total_amount", "n_records"])
        .map_err(csv_err)?;
    for (group, table) in tables {
        for (label, share) in &table.shares {
            writer
                .write_record([
                    group.to_string(),
                    label.clone(),
                    share.to_string(),
                    table.total_amount.to_string(),
                    table.n_records.to_string(),
                ])
                .map_err(csv_err)?;
        }
    }
    writer.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}
