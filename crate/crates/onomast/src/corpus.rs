//! Labeled name ingestion, census-aggregate expansion, and seeded splits.
//!
//! All sampling here is deterministic given (inputs, seed); see [`crate::rng`]
//! for the generator contract.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, WeightedChoice};

/// One labeled observation: a raw last name, an optional first name, and its
/// class label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameRecord {
    pub last_name: String,
    pub first_name: Option<String>,
    pub label: String,
}

/// The distinct class labels of a corpus, lexicographically ordered so class
/// index `k` is deterministic across runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    labels: Vec<String>,
}

impl LabelSet {
    /// Build from any label iterator; duplicates collapse, order is sorted.
    pub fn from_labels<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        labels.sort();
        labels.dedup();
        Self { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.binary_search_by(|l| l.as_str().cmp(label)).ok()
    }

    pub fn require(&self, label: &str) -> Result<usize> {
        self.index_of(label).ok_or_else(|| Error::UnknownLabel {
            label: label.to_string(),
        })
    }
}

/// Column names for a labeled CSV. `first_name: None` means the file has no
/// first-name column at all.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvSchema {
    pub last_name: String,
    pub first_name: Option<String>,
    pub label: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            last_name: "last_name".into(),
            first_name: Some("first_name".into()),
            label: "label".into(),
        }
    }
}

/// A loaded labeled corpus plus how many rows were dropped for having an
/// empty last name or label.
#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub records: Vec<NameRecord>,
    pub label_set: LabelSet,
    pub dropped: usize,
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, source: csv::Error) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn find_column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn {
            column: name.to_string(),
            path: path.to_path_buf(),
        })
}

/// Read a labeled CSV (UTF-8, comma-delimited, header row, RFC 4180 quoting).
/// Rows with an empty last name or empty label are dropped and counted; the
/// label set is built from the labels actually observed.
pub fn load_labeled_csv(path: &Path, schema: &CsvSchema) -> Result<LoadedCorpus> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);

    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    let last_col = find_column(&headers, &schema.last_name, path)?;
    let first_col = match &schema.first_name {
        Some(name) => Some(find_column(&headers, name, path)?),
        None => None,
    };
    let label_col = find_column(&headers, &schema.label, path)?;

    let mut records = Vec::new();
    let mut dropped = 0usize;
    for row in reader.records() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let last = row.get(last_col).unwrap_or("").trim();
        let label = row.get(label_col).unwrap_or("").trim();
        if last.is_empty() || label.is_empty() {
            dropped += 1;
            continue;
        }
        let first = first_col
            .and_then(|c| row.get(c))
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string);
        records.push(NameRecord {
            last_name: last.to_string(),
            first_name: first,
            label: label.to_string(),
        });
    }

    if records.is_empty() {
        return Err(Error::EmptyCorpus {
            path: path.to_path_buf(),
        });
    }
    let label_set = LabelSet::from_labels(records.iter().map(|r| r.label.clone()));
    Ok(LoadedCorpus {
        records,
        label_set,
        dropped,
    })
}

/// Write records back out with the schema's column names. Inverse of
/// [`load_labeled_csv`] up to whitespace trimming.
pub fn write_labeled_csv(records: &[NameRecord], path: &Path, schema: &CsvSchema) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header = vec![schema.last_name.as_str()];
    if let Some(first) = &schema.first_name {
        header.push(first);
    }
    header.push(&schema.label);
    writer.write_record(&header).map_err(|e| csv_err(path, e))?;
    for r in records {
        let mut row = vec![r.last_name.as_str()];
        if schema.first_name.is_some() {
            row.push(r.first_name.as_deref().unwrap_or(""));
        }
        row.push(&r.label);
        writer.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    writer.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

/// One census surname aggregate: bearer count plus per-class percentages.
#[derive(Debug, Clone, PartialEq)]
pub struct CensusAggregateRow {
    pub surname: String,
    pub count: u64,
    /// Class label → percentage in [0, 100]. A `BTreeMap` so iteration order
    /// (and therefore sampling order) is the lexicographic label order.
    pub race_percentages: BTreeMap<String, f64>,
}

impl CensusAggregateRow {
    fn validate_ranges(&self) -> Result<()> {
        for (label, &pct) in &self.race_percentages {
            if !(0.0..=100.0).contains(&pct) {
                return Err(Error::PercentageOutOfRange {
                    surname: self.surname.clone(),
                    label: label.clone(),
                    value: pct,
                });
            }
        }
        Ok(())
    }

    /// Full invariant check for rows read from source files: every
    /// percentage in [0, 100] and their sum at most 100.5 (tables rounded to
    /// one decimal carry slack). Rows built in memory are only range-checked
    /// at expansion time, since flooring makes mild over-sums harmless.
    pub fn validate(&self) -> Result<()> {
        self.validate_ranges()?;
        let sum: f64 = self.race_percentages.values().sum();
        if sum > 100.5 {
            return Err(Error::PercentageSumTooLarge {
                surname: self.surname.clone(),
                sum,
            });
        }
        Ok(())
    }
}

/// Column names for a census aggregate CSV: the surname and count columns
/// plus one `(column, class label)` pair per percentage column.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CensusSchema {
    pub surname: String,
    pub count: String,
    pub percentage_columns: Vec<(String, String)>,
}

/// Read a census aggregate CSV. Blank percentage cells count as 0.
pub fn load_census_csv(path: &Path, schema: &CensusSchema) -> Result<Vec<CensusAggregateRow>> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);

    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    let surname_col = find_column(&headers, &schema.surname, path)?;
    let count_col = find_column(&headers, &schema.count, path)?;
    let mut pct_cols = Vec::with_capacity(schema.percentage_columns.len());
    for (column, label) in &schema.percentage_columns {
        pct_cols.push((find_column(&headers, column, path)?, label.clone()));
    }

    let mut rows = Vec::new();
    for (row_idx, row) in reader.records().enumerate() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let surname = row.get(surname_col).unwrap_or("").trim().to_string();
        if surname.is_empty() {
            continue;
        }
        let count_field = row.get(count_col).unwrap_or("").trim();
        let count: u64 = count_field.parse().map_err(|_| Error::InvalidField {
            field: schema.count.clone(),
            path: path.to_path_buf(),
            row: row_idx + 2,
            reason: format!("{count_field:?} is not a non-negative integer"),
        })?;
        let mut race_percentages = BTreeMap::new();
        for (col, label) in &pct_cols {
            let cell = row.get(*col).unwrap_or("").trim();
            let pct: f64 = if cell.is_empty() {
                0.0
            } else {
                cell.parse().map_err(|_| Error::InvalidField {
                    field: label.clone(),
                    path: path.to_path_buf(),
                    row: row_idx + 2,
                    reason: format!("{cell:?} is not a percentage"),
                })?
            };
            race_percentages.insert(label.clone(), pct);
        }
        let parsed = CensusAggregateRow {
            surname,
            count,
            race_percentages,
        };
        parsed.validate()?;
        rows.push(parsed);
    }
    if rows.is_empty() {
        return Err(Error::EmptyCorpus {
            path: path.to_path_buf(),
        });
    }
    Ok(rows)
}

/// Expand surname aggregates into record-level data.
///
/// Draws `n_samples` surnames with replacement, weighted by bearer count.
/// Each draw then samples a label from the categorical distribution whose
/// class-`c` probability is `floor(pct_c) / 100`; draws landing in the
/// leftover mass produce no record, so the output can be slightly shorter
/// than `n_samples`.
pub fn expand_census_aggregate(
    rows: &[CensusAggregateRow],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<NameRecord>> {
    for row in rows {
        row.validate_ranges()?;
    }
    let chooser =
        WeightedChoice::new(rows.iter().map(|r| r.count)).ok_or(Error::ZeroCensusWeight)?;

    // Per-row cumulative floored thresholds, label order fixed by the BTreeMap.
    let thresholds: Vec<Vec<(f64, &str)>> = rows
        .iter()
        .map(|row| {
            let mut cum = 0.0;
            row.race_percentages
                .iter()
                .map(|(label, &pct)| {
                    cum += pct.floor() / 100.0;
                    (cum, label.as_str())
                })
                .collect()
        })
        .collect();

    let mut rng = rng::seeded(seed);
    let mut records = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let row_idx = chooser.draw(&mut rng);
        let u: f64 = rng.random();
        if let Some(&(_, label)) = thresholds[row_idx].iter().find(|&&(cum, _)| u < cum) {
            records.push(NameRecord {
                last_name: rows[row_idx].surname.clone(),
                first_name: None,
                label: label.to_string(),
            });
        }
    }
    Ok(records)
}

/// Deterministic stratified split. The test set gets `round(test_fraction·N)`
/// records overall, allocated to classes by largest remainder so every class
/// lands within one record of `test_fraction · class size`.
pub fn split_train_test(
    records: &[NameRecord],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<NameRecord>, Vec<NameRecord>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "test_fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let n = records.len();
    let n_test = (test_fraction * n as f64).round() as usize;
    if n_test == 0 {
        return Err(Error::DegenerateSplit {
            n,
            fraction: test_fraction,
            side: "test",
        });
    }
    if n_test >= n {
        return Err(Error::DegenerateSplit {
            n,
            fraction: test_fraction,
            side: "train",
        });
    }

    // group record indices by label, in lexicographic label order
    let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_label.entry(r.label.as_str()).or_default().push(i);
    }

    // largest-remainder allocation of the test quota across classes
    let mut base_total = 0usize;
    let mut alloc: Vec<(&str, usize, f64)> = Vec::with_capacity(by_label.len());
    for (label, idxs) in &by_label {
        let quota = test_fraction * idxs.len() as f64;
        let base = (quota.floor() as usize).min(idxs.len());
        base_total += base;
        alloc.push((label, base, quota - base as f64));
    }
    let mut leftover = n_test.saturating_sub(base_total);
    // ties: larger remainder first, then label order
    let mut order: Vec<usize> = (0..alloc.len()).collect();
    order.sort_by(|&a, &b| {
        alloc[b]
            .2
            .partial_cmp(&alloc[a].2)
            .unwrap()
            .then_with(|| alloc[a].0.cmp(alloc[b].0))
    });
    let mut extra = vec![0usize; alloc.len()];
    let mut cursor = 0usize;
    while leftover > 0 {
        let i = order[cursor % order.len()];
        cursor += 1;
        let (label, base, _) = alloc[i];
        if base + extra[i] < by_label[label].len() {
            extra[i] += 1;
            leftover -= 1;
        }
    }

    let mut rng = rng::seeded(seed);
    let mut train = Vec::with_capacity(n - n_test);
    let mut test = Vec::with_capacity(n_test);
    for (i, (label, idxs)) in by_label.iter().enumerate() {
        debug_assert_eq!(*label, alloc[i].0);
        let take = alloc[i].1 + extra[i];
        let mut idxs = idxs.clone();
        rng::shuffle(&mut idxs, &mut rng);
        for (pos, &record_idx) in idxs.iter().enumerate() {
            if pos < take {
                test.push(records[record_idx].clone());
            } else {
                train.push(records[record_idx].clone());
            }
        }
    }
    Ok((train, test))
}

/// Uniform sample of `n` records without replacement.
pub fn sample_records(records: &[NameRecord], n: usize, seed: u64) -> Result<Vec<NameRecord>> {
    if n > records.len() {
        return Err(Error::SampleTooLarge {
            requested: n,
            available: records.len(),
        });
    }
    let mut rng = rng::seeded(seed);
    let picked = rng::sample_indices(records.len(), n, &mut rng);
    Ok(picked.into_iter().map(|i| records[i].clone()).collect())
}

/// Drop repeated `(last name, first name)` pairs, keeping first occurrences.
/// Off by default everywhere; meant for unique-name corpora only.
pub fn dedup_records(records: &[NameRecord]) -> Vec<NameRecord> {
    let mut seen = std::collections::HashSet::new();
    records
        .iter()
        .filter(|r| seen.insert((r.last_name.clone(), r.first_name.clone())))
        .cloned()
        .collect()
}

/// Convenience used by error paths that need the offending path.
pub fn path_buf(path: &Path) -> PathBuf {
    path.to_path_buf()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    fn rec(last: &str, label: &str) -> NameRecord {
        NameRecord {
            last_name: last.into(),
            first_name: None,
            label: label.into(),
        }
    }

    #[test]
    fn load_labeled_csv_reads_rows_and_sorts_labels() {
        let f = write_temp("last_name,first_name,label\nsmith,john,nh white\ngarcia,maria,hispanic\n");
        let loaded = load_labeled_csv(f.path(), &CsvSchema::default()).unwrap();
        assert_eq!(loaded.records.len(), 2);
        assert_eq!(loaded.dropped, 0);
        assert_eq!(loaded.label_set.labels(), ["hispanic", "nh white"]);
        assert_eq!(loaded.records[0].first_name.as_deref(), Some("john"));
    }

    #[test]
    fn load_labeled_csv_drops_and_counts_bad_rows() {
        let f = write_temp("last_name,first_name,label\n,john,a\nsmith,,a\nbrown,x,\n");
        let loaded = load_labeled_csv(f.path(), &CsvSchema::default()).unwrap();
        assert_eq!(loaded.records.len(), 1);
        assert_eq!(loaded.dropped, 2);
        assert_eq!(loaded.records[0].last_name, "smith");
        assert_eq!(loaded.records[0].first_name, None);
    }

    #[test]
    fn load_labeled_csv_label_indices_are_sorted_ranks() {
        let mut content = String::from("last_name,first_name,label\n");
        let labels = ["mid", "aaa", "zzz", "mid", "aaa", "mid", "zzz", "aaa", "mid", "zzz"];
        for (i, l) in labels.iter().enumerate() {
            content.push_str(&format!("name{i},,{l}\n"));
        }
        let f = write_temp(&content);
        let loaded = load_labeled_csv(f.path(), &CsvSchema::default()).unwrap();
        assert_eq!(loaded.label_set.len(), 3);
        assert_eq!(loaded.label_set.index_of("aaa"), Some(0));
        assert_eq!(loaded.label_set.index_of("mid"), Some(1));
        assert_eq!(loaded.label_set.index_of("zzz"), Some(2));
    }

    #[test]
    fn load_labeled_csv_missing_column_errors() {
        let f = write_temp("surname,label\nsmith,a\n");
        match load_labeled_csv(f.path(), &CsvSchema::default()) {
            Err(Error::MissingColumn { column, .. }) => assert_eq!(column, "last_name"),
            other => panic!("expected MissingColumn, got {other:?}"),
        }
    }

    #[test]
    fn load_labeled_csv_zero_valid_rows_errors() {
        let f = write_temp("last_name,first_name,label\n,x,\n");
        assert!(matches!(
            load_labeled_csv(f.path(), &CsvSchema::default()),
            Err(Error::EmptyCorpus { .. })
        ));
    }

    #[test]
    fn labeled_csv_roundtrips() {
        let f = write_temp("last_name,first_name,label\nsmith,john,a\n\"de la cruz\",ana,b\nlee,,a\n");
        let loaded = load_labeled_csv(f.path(), &CsvSchema::default()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_labeled_csv(&loaded.records, out.path(), &CsvSchema::default()).unwrap();
        let reloaded = load_labeled_csv(out.path(), &CsvSchema::default()).unwrap();
        assert_eq!(loaded.records, reloaded.records);
    }

    fn census_row(surname: &str, count: u64, pcts: &[(&str, f64)]) -> CensusAggregateRow {
        CensusAggregateRow {
            surname: surname.into(),
            count,
            race_percentages: pcts.iter().map(|(l, p)| (l.to_string(), *p)).collect(),
        }
    }

    #[test]
    fn census_expansion_degenerate_distribution() {
        // 2,442,977 bearers, 100% one class: every draw lands.
        let rows = vec![census_row("Smith", 2_442_977, &[("white", 100.0)])];
        let records = expand_census_aggregate(&rows, 5, 1).unwrap();
        assert_eq!(records.len(), 5);
        assert!(records
            .iter()
            .all(|r| r.last_name == "Smith" && r.label == "white"));
    }

    #[test]
    fn census_expansion_matches_floored_percentages() {
        let rows = vec![census_row("X", 10, &[("black", 49.9), ("white", 50.9)])];
        let n = 100_000;
        let records = expand_census_aggregate(&rows, n, 42).unwrap();
        let white = records.iter().filter(|r| r.label == "white").count() as f64 / n as f64;
        let black = records.iter().filter(|r| r.label == "black").count() as f64 / n as f64;
        let dropped = 1.0 - records.len() as f64 / n as f64;
        assert!((white - 0.50).abs() < 0.01, "white = {white}");
        assert!((black - 0.49).abs() < 0.01, "black = {black}");
        assert!((dropped - 0.01).abs() < 0.005, "dropped = {dropped}");
    }

    #[test]
    fn census_expansion_weights_surnames_by_count() {
        let rows = vec![
            census_row("Big", 900, &[("a", 100.0)]),
            census_row("Small", 100, &[("a", 100.0)]),
        ];
        let n = 100_000;
        let records = expand_census_aggregate(&rows, n, 7).unwrap();
        let big = records.iter().filter(|r| r.last_name == "Big").count() as f64 / n as f64;
        assert!((big - 0.9).abs() < 0.01, "big = {big}");
    }

    #[test]
    fn census_expansion_rejects_bad_inputs() {
        let rows = vec![census_row("X", 0, &[("a", 100.0)])];
        assert!(matches!(
            expand_census_aggregate(&rows, 10, 1),
            Err(Error::ZeroCensusWeight)
        ));
        let rows = vec![census_row("X", 5, &[("a", 101.0)])];
        assert!(matches!(
            expand_census_aggregate(&rows, 10, 1),
            Err(Error::PercentageOutOfRange { .. })
        ));
        // over-sum is a file invariant, not an expansion error: flooring
        // keeps mild over-sums harmless, so only full validation rejects it
        let row = census_row("X", 5, &[("a", 60.0), ("b", 41.0)]);
        assert!(matches!(
            row.validate(),
            Err(Error::PercentageSumTooLarge { .. })
        ));
        assert!(expand_census_aggregate(&[row], 10, 1).is_ok());
    }

    #[test]
    fn census_expansion_is_deterministic() {
        let rows = vec![census_row("X", 10, &[("a", 50.0), ("b", 49.0)])];
        let a = expand_census_aggregate(&rows, 1000, 5).unwrap();
        let b = expand_census_aggregate(&rows, 1000, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn load_census_csv_parses_blank_cells_as_zero() {
        let f = write_temp("name,count,pctwhite,pctblack\nSMITH,2442977,70.9,23.11\nJONES,10,,100\n");
        let schema = CensusSchema {
            surname: "name".into(),
            count: "count".into(),
            percentage_columns: vec![
                ("pctwhite".into(), "white".into()),
                ("pctblack".into(), "black".into()),
            ],
        };
        let rows = load_census_csv(f.path(), &schema).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].race_percentages["white"], 70.9);
        assert_eq!(rows[1].race_percentages["white"], 0.0);
        assert_eq!(rows[1].race_percentages["black"], 100.0);
    }

    #[test]
    fn split_is_exactly_stratified_on_balanced_classes() {
        let mut records = Vec::new();
        for i in 0..5 {
            records.push(rec(&format!("a{i}"), "a"));
            records.push(rec(&format!("b{i}"), "b"));
        }
        let (train, test) = split_train_test(&records, 0.2, 9).unwrap();
        assert_eq!(train.len(), 8);
        assert_eq!(test.len(), 2);
        assert_eq!(test.iter().filter(|r| r.label == "a").count(), 1);
        assert_eq!(test.iter().filter(|r| r.label == "b").count(), 1);
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let records: Vec<NameRecord> = (0..37)
            .map(|i| rec(&format!("n{i}"), if i % 3 == 0 { "a" } else { "b" }))
            .collect();
        let (train1, test1) = split_train_test(&records, 0.25, 4).unwrap();
        let (train2, test2) = split_train_test(&records, 0.25, 4).unwrap();
        assert_eq!(train1, train2);
        assert_eq!(test1, test2);

        // train ∪ test is the input multiset, train ∩ test empty
        let mut all: Vec<String> = train1.iter().chain(&test1).map(|r| r.last_name.clone()).collect();
        all.sort();
        let mut expected: Vec<String> = records.iter().map(|r| r.last_name.clone()).collect();
        expected.sort();
        assert_eq!(all, expected);
    }

    #[test]
    fn split_test_size_matches_rounded_fraction() {
        // a 20% holdout of 197,562 records rounds to 39,512
        let records: Vec<NameRecord> = (0..197_562)
            .map(|i| rec(&format!("n{i}"), ["a", "b", "c", "d"][i % 4]))
            .collect();
        let (_, test) = split_train_test(&records, 0.2, 1).unwrap();
        assert!(
            (test.len() as i64 - 39_512).abs() <= 1,
            "test size = {}",
            test.len()
        );
    }

    #[test]
    fn split_rejects_degenerate_fractions() {
        let records = vec![rec("a", "x"), rec("b", "x")];
        assert!(split_train_test(&records, 0.1, 1).is_err()); // empty test
        let one = vec![rec("a", "x")];
        assert!(split_train_test(&one, 0.9, 1).is_err()); // empty train
    }

    #[test]
    fn sample_all_is_a_permutation() {
        let records: Vec<NameRecord> = (0..10).map(|i| rec(&format!("n{i}"), "a")).collect();
        let sampled = sample_records(&records, 10, 3).unwrap();
        let mut a: Vec<_> = sampled.iter().map(|r| &r.last_name).collect();
        let mut b: Vec<_> = records.iter().map(|r| &r.last_name).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_one_is_deterministic() {
        let records = vec![rec("a", "x"), rec("b", "x"), rec("c", "x")];
        let first = sample_records(&records, 1, 11).unwrap();
        let second = sample_records(&records, 1, 11).unwrap();
        assert_eq!(first, second);
        assert!(matches!(
            sample_records(&records, 4, 1),
            Err(Error::SampleTooLarge { .. })
        ));
    }

    #[test]
    fn sample_balance_tracks_hypergeometric_expectation() {
        let mut records = Vec::new();
        for i in 0..500 {
            records.push(rec(&format!("a{i}"), "a"));
            records.push(rec(&format!("b{i}"), "b"));
        }
        let sampled = sample_records(&records, 500, 21).unwrap();
        let a_frac = sampled.iter().filter(|r| r.label == "a").count() as f64 / 500.0;
        assert!((a_frac - 0.5).abs() < 0.05, "a_frac = {a_frac}");
    }

    #[test]
    fn dedup_keeps_first_occurrence() {
        let records = vec![
            NameRecord { last_name: "a".into(), first_name: Some("x".into()), label: "1".into() },
            NameRecord { last_name: "a".into(), first_name: Some("x".into()), label: "2".into() },
            NameRecord { last_name: "a".into(), first_name: None, label: "3".into() },
        ];
        let deduped = dedup_records(&records);
        assert_eq!(deduped.len(), 2);
        assert_eq!(deduped[0].label, "1");
    }
}
