//! Alarm-log records, CSV ingestion, calendar feature extraction, and
//! categorical encoding with a reserved UNKNOWN code per feature.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Datelike, TimeZone, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feature columns of the canonical encoded schema, in fixed order.
pub const FEATURE_NAMES: [&str; 10] = [
    "severity",
    "alarm_type",
    "site_code",
    "city",
    "domain",
    "segment_name",
    "management_system",
    "port_type",
    "equipment_type",
    "hour",
];

/// Extra calendar columns appended by the extended transform.
pub const EXTENDED_FEATURE_NAMES: [&str; 5] = ["day", "weekday", "month", "season", "year"];

/// Six-level ordinal severity scale used when none is configured, lowest first.
pub const DEFAULT_SEVERITY_SCALE: [&str; 6] = [
    "cleared",
    "indeterminate",
    "warning",
    "minor",
    "major",
    "critical",
];

/// One alarm-log row. Timestamps are seconds since the Unix epoch, UTC.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlarmRecord {
    pub report_time: i64,
    pub clear_time: Option<i64>,
    pub severity: String,
    pub alarm_type: String,
    pub site_code: String,
    pub city: String,
    pub domain: String,
    pub segment_name: String,
    pub management_system: String,
    pub port_type: String,
    pub equipment_type: String,
    /// 1 = anomaly, 0 = normal.
    pub label: u8,
}

/// Calendar decomposition of a report time. `hour` is shifted to [1,24].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeFeatures {
    pub hour: u32,
    pub day: u32,
    pub weekday: u32,
    pub month: u32,
    pub season: u32,
    pub year: i32,
}

/// Derive calendar features from a record's report time.
///
/// Weekday is ISO (Monday = 1, Sunday = 7). Season groups months so that
/// {Dec, Jan, Feb} = 1, {Mar, Apr, May} = 2, {Jun, Jul, Aug} = 3,
/// {Sep, Oct, Nov} = 4.
pub fn extract_time_features(record: &AlarmRecord) -> TimeFeatures {
    let dt: DateTime<Utc> = Utc
        .timestamp_opt(record.report_time, 0)
        .single()
        .expect("epoch seconds representable");
    let month = dt.month();
    TimeFeatures {
        hour: dt.hour() + 1,
        day: dt.day(),
        weekday: dt.weekday().number_from_monday(),
        month,
        season: (month % 12) / 3 + 1,
        year: dt.year(),
    }
}

/// One alarm-type rewrite rule. Exact rules compare the full string;
/// prefix rules compare case-insensitively against the start.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingRule {
    pub pattern: String,
    pub category: String,
    pub prefix: bool,
}

/// Ordered alarm-type rewrite rules; first match wins, no match keeps the
/// original string.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlarmTypeMapping {
    pub rules: Vec<MappingRule>,
}

impl AlarmTypeMapping {
    /// Parse one `pattern => category` rule per line. A `prefix:` marker in
    /// front of the pattern makes it a prefix rule. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rules = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (lhs, rhs) = line.split_once("=>").ok_or_else(|| {
                Error::InvalidArgument(format!("mapping line {}: missing `=>`", idx + 1))
            })?;
            let mut pattern = lhs.trim();
            let category = rhs.trim();
            if pattern.is_empty() || category.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "mapping line {}: empty pattern or category",
                    idx + 1
                )));
            }
            let prefix = if let Some(rest) = pattern.strip_prefix("prefix:") {
                pattern = rest.trim();
                true
            } else {
                false
            };
            rules.push(MappingRule {
                pattern: pattern.to_string(),
                category: category.to_string(),
                prefix,
            });
        }
        Ok(Self { rules })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut text = String::new();
        std::fs::File::open(path)?.read_to_string(&mut text)?;
        Self::parse(&text)
    }

    /// Rewrite an alarm type through the rule list.
    pub fn apply<'a>(&self, alarm_type: &'a str) -> std::borrow::Cow<'a, str> {
        for rule in &self.rules {
            let hit = if rule.prefix {
                alarm_type.len() >= rule.pattern.len()
                    && alarm_type[..rule.pattern.len()].eq_ignore_ascii_case(&rule.pattern)
            } else {
                alarm_type == rule.pattern
            };
            if hit {
                return std::borrow::Cow::Owned(rule.category.clone());
            }
        }
        std::borrow::Cow::Borrowed(alarm_type)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FeatureVocab {
    name: String,
    /// Value with code `i + 1`; code 0 is the reserved UNKNOWN everywhere.
    values: Vec<String>,
    #[serde(skip)]
    code_of: HashMap<String, u32>,
}

impl FeatureVocab {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            values: Vec::new(),
            code_of: HashMap::new(),
        }
    }

    fn from_values(name: &str, values: Vec<String>) -> Self {
        let mut v = Self {
            name: name.to_string(),
            values,
            code_of: HashMap::new(),
        };
        v.rebuild_index();
        v
    }

    fn rebuild_index(&mut self) {
        self.code_of = self
            .values
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32 + 1))
            .collect();
    }

    fn insert(&mut self, value: &str) {
        if !self.code_of.contains_key(value) {
            self.values.push(value.to_string());
            self.code_of
                .insert(value.to_string(), self.values.len() as u32);
        }
    }

    fn code(&self, value: &str) -> u32 {
        self.code_of.get(value).copied().unwrap_or(0)
    }

    /// Distinct codes including the reserved UNKNOWN.
    fn cardinality(&self) -> u32 {
        self.values.len() as u32 + 1
    }
}

/// Fitted per-feature vocabularies. Codes run 1..card per feature; 0 is the
/// reserved UNKNOWN and is never assigned at fit time.
#[derive(Debug, Clone)]
pub struct VocabularyEncoder {
    features: Vec<FeatureVocab>,
    severity_scale: Vec<String>,
    mapping: AlarmTypeMapping,
    year_vocab: Vec<i32>,
}

/// Build an encoder from training records.
///
/// The alarm-type mapping is applied before vocabulary construction. Nominal
/// features get codes by first occurrence in record order; severity codes come
/// from the scale position plus one so the configured intensity order is
/// preserved; hour is its own code with a fixed 24-value vocabulary.
pub fn fit_encoder(
    records: &[AlarmRecord],
    mapping: &AlarmTypeMapping,
    severity_scale: &[String],
) -> Result<VocabularyEncoder> {
    if severity_scale.is_empty() {
        return Err(Error::InvalidArgument("severity scale is empty".into()));
    }
    let scale_pos: HashMap<&str, u32> = severity_scale
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i as u32 + 1))
        .collect();

    let mut features: Vec<FeatureVocab> = FEATURE_NAMES.iter().map(|n| FeatureVocab::new(n)).collect();
    features[0] = FeatureVocab::from_values("severity", severity_scale.to_vec());
    features[9] = FeatureVocab::from_values("hour", (1..=24).map(|h| h.to_string()).collect());

    let mut years: Vec<i32> = Vec::new();
    for rec in records {
        if !scale_pos.contains_key(rec.severity.as_str()) {
            return Err(Error::UnknownSeverity(rec.severity.clone()));
        }
        let mapped = mapping.apply(&rec.alarm_type);
        features[1].insert(&mapped);
        features[2].insert(&rec.site_code);
        features[3].insert(&rec.city);
        features[4].insert(&rec.domain);
        features[5].insert(&rec.segment_name);
        features[6].insert(&rec.management_system);
        features[7].insert(&rec.port_type);
        features[8].insert(&rec.equipment_type);
        let year = extract_time_features(rec).year;
        if !years.contains(&year) {
            years.push(year);
        }
    }
    years.sort_unstable();

    Ok(VocabularyEncoder {
        features,
        severity_scale: severity_scale.to_vec(),
        mapping: mapping.clone(),
        year_vocab: years,
    })
}

impl VocabularyEncoder {
    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    /// Per-feature cardinalities including the UNKNOWN code.
    pub fn cardinalities(&self) -> Vec<u32> {
        self.features.iter().map(|f| f.cardinality()).collect()
    }

    pub fn mapping(&self) -> &AlarmTypeMapping {
        &self.mapping
    }

    pub fn severity_scale(&self) -> &[String] {
        &self.severity_scale
    }

    /// String behind a code, or None for UNKNOWN / out-of-range codes.
    pub fn decode(&self, feature: usize, code: u32) -> Option<&str> {
        if code == 0 {
            return None;
        }
        self.features[feature]
            .values
            .get(code as usize - 1)
            .map(|s| s.as_str())
    }

    fn encode_record(&self, rec: &AlarmRecord, mapping: &AlarmTypeMapping, out: &mut Vec<u32>) {
        let tf = extract_time_features(rec);
        out.push(self.features[0].code(&rec.severity));
        out.push(self.features[1].code(&mapping.apply(&rec.alarm_type)));
        out.push(self.features[2].code(&rec.site_code));
        out.push(self.features[3].code(&rec.city));
        out.push(self.features[4].code(&rec.domain));
        out.push(self.features[5].code(&rec.segment_name));
        out.push(self.features[6].code(&rec.management_system));
        out.push(self.features[7].code(&rec.port_type));
        out.push(self.features[8].code(&rec.equipment_type));
        out.push(tf.hour);
    }
}

/// Integer-coded dataset: row-major codes, one column per feature, plus the
/// label vector and UNKNOWN-inclusive per-column cardinalities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedDataset {
    codes: Vec<u32>,
    n_rows: usize,
    feature_names: Vec<String>,
    cards: Vec<u32>,
    labels: Vec<u8>,
}

impl EncodedDataset {
    pub fn new(
        codes: Vec<u32>,
        n_rows: usize,
        feature_names: Vec<String>,
        cards: Vec<u32>,
        labels: Vec<u8>,
    ) -> Self {
        assert_eq!(codes.len(), n_rows * feature_names.len());
        assert_eq!(labels.len(), n_rows);
        assert_eq!(cards.len(), feature_names.len());
        Self {
            codes,
            n_rows,
            feature_names,
            cards,
            labels,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn cardinalities(&self) -> &[u32] {
        &self.cards
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[u32] {
        let f = self.n_features();
        &self.codes[i * f..(i + 1) * f]
    }

    pub fn code(&self, row: usize, feature: usize) -> u32 {
        self.codes[row * self.n_features() + feature]
    }

    /// New dataset holding the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let f = self.n_features();
        let mut codes = Vec::with_capacity(rows.len() * f);
        let mut labels = Vec::with_capacity(rows.len());
        for &r in rows {
            codes.extend_from_slice(self.row(r));
            labels.push(self.labels[r]);
        }
        Self {
            codes,
            n_rows: rows.len(),
            feature_names: self.feature_names.clone(),
            cards: self.cards.clone(),
            labels,
        }
    }

    /// New dataset keeping only the given feature columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Self {
        let mut codes = Vec::with_capacity(self.n_rows * columns.len());
        for i in 0..self.n_rows {
            let row = self.row(i);
            codes.extend(columns.iter().map(|&c| row[c]));
        }
        Self {
            codes,
            n_rows: self.n_rows,
            feature_names: columns.iter().map(|&c| self.feature_names[c].clone()).collect(),
            cards: columns.iter().map(|&c| self.cards[c]).collect(),
            labels: self.labels.clone(),
        }
    }
}

/// Encode records against a fitted encoder. Unknown strings map to code 0;
/// column order is the fixed canonical order.
pub fn transform(
    records: &[AlarmRecord],
    encoder: &VocabularyEncoder,
    mapping: &AlarmTypeMapping,
) -> EncodedDataset {
    let f = encoder.features.len();
    let mut codes = Vec::with_capacity(records.len() * f);
    let mut labels = Vec::with_capacity(records.len());
    for rec in records {
        encoder.encode_record(rec, mapping, &mut codes);
        labels.push(rec.label);
    }
    EncodedDataset::new(
        codes,
        records.len(),
        encoder.feature_names(),
        encoder.cardinalities(),
        labels,
    )
}

/// Like `transform` but with day, weekday, month, season, and year columns
/// appended for feature-ranking work.
pub fn transform_extended(
    records: &[AlarmRecord],
    encoder: &VocabularyEncoder,
    mapping: &AlarmTypeMapping,
) -> EncodedDataset {
    let f = encoder.features.len() + EXTENDED_FEATURE_NAMES.len();
    let mut codes = Vec::with_capacity(records.len() * f);
    let mut labels = Vec::with_capacity(records.len());
    for rec in records {
        encoder.encode_record(rec, mapping, &mut codes);
        let tf = extract_time_features(rec);
        codes.push(tf.day);
        codes.push(tf.weekday);
        codes.push(tf.month);
        codes.push(tf.season);
        let year_code = encoder
            .year_vocab
            .iter()
            .position(|&y| y == tf.year)
            .map(|p| p as u32 + 1)
            .unwrap_or(0);
        codes.push(year_code);
        labels.push(rec.label);
    }
    let mut names = encoder.feature_names();
    names.extend(EXTENDED_FEATURE_NAMES.iter().map(|s| s.to_string()));
    let mut cards = encoder.cardinalities();
    cards.extend_from_slice(&[32, 8, 13, 5, encoder.year_vocab.len() as u32 + 1]);
    EncodedDataset::new(codes, records.len(), names, cards, labels)
}

/// Mapping from record fields to CSV column names. `clear_time` may be None
/// when the column is absent from the file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvSchema {
    pub report_time: String,
    pub clear_time: Option<String>,
    pub severity: String,
    pub alarm_type: String,
    pub site_code: String,
    pub city: String,
    pub domain: String,
    pub segment_name: String,
    pub management_system: String,
    pub port_type: String,
    pub equipment_type: String,
    pub label: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            report_time: "report_time".into(),
            clear_time: Some("clear_time".into()),
            severity: "severity".into(),
            alarm_type: "alarm_type".into(),
            site_code: "site_code".into(),
            city: "city".into(),
            domain: "domain".into(),
            segment_name: "segment_name".into(),
            management_system: "management_system".into(),
            port_type: "port_type".into(),
            equipment_type: "equipment_type".into(),
            label: "label".into(),
        }
    }
}

/// A data row that could not become a record, with its 1-based position
/// among the data rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowIssue {
    pub row: usize,
    pub message: String,
}

/// Outcome of CSV ingestion: parsed records plus per-row rejects.
#[derive(Debug, Clone)]
pub struct IngestResult {
    pub records: Vec<AlarmRecord>,
    pub rejected: Vec<RowIssue>,
}

#[derive(Clone, Copy, PartialEq)]
enum TsFormat {
    Epoch,
    Rfc3339,
}

fn detect_ts_format(value: &str) -> TsFormat {
    let body = value.strip_prefix('-').unwrap_or(value);
    if !body.is_empty() && body.bytes().all(|b| b.is_ascii_digit()) {
        TsFormat::Epoch
    } else {
        TsFormat::Rfc3339
    }
}

fn parse_ts(value: &str, fmt: TsFormat) -> std::result::Result<i64, String> {
    match fmt {
        TsFormat::Epoch => value
            .parse::<i64>()
            .map_err(|_| format!("bad epoch timestamp `{value}`")),
        TsFormat::Rfc3339 => DateTime::parse_from_rfc3339(value)
            .map(|dt| dt.timestamp())
            .map_err(|_| format!("bad RFC 3339 timestamp `{value}`")),
    }
}

/// Read alarm records from a headered CSV file.
///
/// Timestamp format (epoch seconds vs RFC 3339) is detected per column from
/// its first non-empty value. Rows with unparseable timestamps, labels
/// outside {0,1}, or clear_time before report_time are collected in
/// `rejected` with their row numbers; file-level problems are errors.
pub fn ingest_csv(path: &Path, schema: &CsvSchema) -> Result<IngestResult> {
    let mut reader = csv::ReaderBuilder::new().from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };

    let idx_report = col(&schema.report_time)?;
    let idx_clear = match &schema.clear_time {
        Some(name) => Some(col(name)?),
        None => None,
    };
    let idx_severity = col(&schema.severity)?;
    let idx_alarm = col(&schema.alarm_type)?;
    let idx_site = col(&schema.site_code)?;
    let idx_city = col(&schema.city)?;
    let idx_domain = col(&schema.domain)?;
    let idx_segment = col(&schema.segment_name)?;
    let idx_mgmt = col(&schema.management_system)?;
    let idx_port = col(&schema.port_type)?;
    let idx_equip = col(&schema.equipment_type)?;
    let idx_label = col(&schema.label)?;

    let mut report_fmt: Option<TsFormat> = None;
    let mut clear_fmt: Option<TsFormat> = None;
    let mut records = Vec::new();
    let mut rejected = Vec::new();

    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row?;
        let field = |idx: usize| row.get(idx).unwrap_or("").trim();

        let report_raw = field(idx_report);
        let fmt = *report_fmt.get_or_insert_with(|| detect_ts_format(report_raw));
        let report_time = match parse_ts(report_raw, fmt) {
            Ok(t) => t,
            Err(msg) => {
                rejected.push(RowIssue { row: row_no, message: msg });
                continue;
            }
        };

        let clear_time = match idx_clear {
            Some(idx) => {
                let raw = field(idx);
                if raw.is_empty() {
                    None
                } else {
                    let fmt = *clear_fmt.get_or_insert_with(|| detect_ts_format(raw));
                    match parse_ts(raw, fmt) {
                        Ok(t) => Some(t),
                        Err(msg) => {
                            rejected.push(RowIssue { row: row_no, message: msg });
                            continue;
                        }
                    }
                }
            }
            None => None,
        };
        if let Some(ct) = clear_time {
            if ct < report_time {
                rejected.push(RowIssue {
                    row: row_no,
                    message: "clear_time before report_time".into(),
                });
                continue;
            }
        }

        let label = match field(idx_label) {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                rejected.push(RowIssue {
                    row: row_no,
                    message: format!("label `{other}` outside {{0,1}}"),
                });
                continue;
            }
        };

        records.push(AlarmRecord {
            report_time,
            clear_time,
            severity: field(idx_severity).to_string(),
            alarm_type: field(idx_alarm).to_string(),
            site_code: field(idx_site).to_string(),
            city: field(idx_city).to_string(),
            domain: field(idx_domain).to_string(),
            segment_name: field(idx_segment).to_string(),
            management_system: field(idx_mgmt).to_string(),
            port_type: field(idx_port).to_string(),
            equipment_type: field(idx_equip).to_string(),
            label,
        });
    }
    Ok(IngestResult { records, rejected })
}

fn rfc3339(t: i64) -> String {
    Utc.timestamp_opt(t, 0)
        .single()
        .expect("epoch seconds representable")
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Write records as CSV with the default column names; timestamps as
/// RFC 3339 so files stay readable.
pub fn write_csv(records: &[AlarmRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let schema = CsvSchema::default();
    w.write_record([
        schema.report_time.as_str(),
        schema.clear_time.as_deref().unwrap_or("clear_time"),
        &schema.severity,
        &schema.alarm_type,
        &schema.site_code,
        &schema.city,
        &schema.domain,
        &schema.segment_name,
        &schema.management_system,
        &schema.port_type,
        &schema.equipment_type,
        &schema.label,
    ])?;
    for rec in records {
        w.write_record([
            rfc3339(rec.report_time).as_str(),
            &rec.clear_time.map(rfc3339).unwrap_or_default(),
            &rec.severity,
            &rec.alarm_type,
            &rec.site_code,
            &rec.city,
            &rec.domain,
            &rec.segment_name,
            &rec.management_system,
            &rec.port_type,
            &rec.equipment_type,
            &rec.label.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

const ENCODER_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct EncoderDoc {
    format_version: u32,
    features: Vec<FeatureVocab>,
    severity_scale: Vec<String>,
    mapping_rules: Vec<MappingRule>,
    year_vocab: Vec<i32>,
}

/// Encoder as its versioned JSON document value.
pub fn encoder_to_value(encoder: &VocabularyEncoder) -> Result<serde_json::Value> {
    let doc = EncoderDoc {
        format_version: ENCODER_FORMAT_VERSION,
        features: encoder.features.clone(),
        severity_scale: encoder.severity_scale.clone(),
        mapping_rules: encoder.mapping.rules.clone(),
        year_vocab: encoder.year_vocab.clone(),
    };
    Ok(serde_json::to_value(&doc)?)
}

/// Rebuild an encoder from its JSON document value.
pub fn encoder_from_value(value: serde_json::Value) -> Result<VocabularyEncoder> {
    let doc: EncoderDoc = serde_json::from_value(value)?;
    if doc.format_version != ENCODER_FORMAT_VERSION {
        return Err(Error::FormatVersion {
            found: doc.format_version,
            expected: ENCODER_FORMAT_VERSION,
        });
    }
    let mut features = doc.features;
    for f in &mut features {
        f.rebuild_index();
    }
    Ok(VocabularyEncoder {
        features,
        severity_scale: doc.severity_scale,
        mapping: AlarmTypeMapping {
            rules: doc.mapping_rules,
        },
        year_vocab: doc.year_vocab,
    })
}

/// Persist an encoder as versioned JSON. Output bytes depend only on the
/// encoder contents.
pub fn save_encoder(encoder: &VocabularyEncoder, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&encoder_to_value(encoder)?)?;
    let mut file = std::fs::File::create(path)?;
    file.write_all(text.as_bytes())?;
    file.write_all(b"\n")?;
    Ok(())
}

pub fn load_encoder(path: &Path) -> Result<VocabularyEncoder> {
    let file = std::fs::File::open(path)?;
    let value: serde_json::Value = serde_json::from_reader(std::io::BufReader::new(file))?;
    encoder_from_value(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(report_time: i64) -> AlarmRecord {
        AlarmRecord {
            report_time,
            clear_time: None,
            severity: "critical".into(),
            alarm_type: "LOS".into(),
            site_code: "S001".into(),
            city: "metro-1".into(),
            domain: "transmission".into(),
            segment_name: "seg-a".into(),
            management_system: "nms-1".into(),
            port_type: "optical".into(),
            equipment_type: "router".into(),
            label: 0,
        }
    }

    fn scale() -> Vec<String> {
        DEFAULT_SEVERITY_SCALE.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn midnight_maps_to_hour_one() {
        // 2020-08-08T00:00:00Z
        let tf = extract_time_features(&record(1596844800));
        assert_eq!(tf.hour, 1);
        assert_eq!(tf.month, 8);
        assert_eq!(tf.season, 3);
        assert_eq!(tf.day, 8);
        assert_eq!(tf.year, 2020);
        assert_eq!(tf.weekday, 6);
    }

    #[test]
    fn last_hour_maps_to_twenty_four() {
        // 2021-01-20T23:15:00Z
        let tf = extract_time_features(&record(1611184500));
        assert_eq!(tf.hour, 24);
        assert_eq!(tf.month, 1);
        assert_eq!(tf.season, 1);
        assert_eq!(tf.year, 2021);
    }

    #[test]
    fn extraction_is_deterministic() {
        let r = record(1600000000);
        assert_eq!(extract_time_features(&r), extract_time_features(&r));
    }

    #[test]
    fn mapping_first_match_wins_and_prefix_ignores_case() {
        let m = AlarmTypeMapping::parse(
            "# vendor rules\nLOS => link-down\nprefix:pow => power\nprefix:POWER => other\n",
        )
        .unwrap();
        assert_eq!(m.apply("LOS"), "link-down");
        assert_eq!(m.apply("PoWeR FAIL"), "power");
        assert_eq!(m.apply("unmapped"), "unmapped");
    }

    #[test]
    fn mapping_rejects_malformed_line() {
        assert!(AlarmTypeMapping::parse("no separator here").is_err());
        assert!(AlarmTypeMapping::parse(" => cat").is_err());
    }

    #[test]
    fn empty_mapping_is_valid() {
        let m = AlarmTypeMapping::parse("").unwrap();
        assert!(m.rules.is_empty());
        assert_eq!(m.apply("X"), "X");
    }

    #[test]
    fn severity_codes_follow_scale_positions() {
        let mut records = vec![record(1600000000), record(1600000001), record(1600000002)];
        records[1].severity = "minor".into();
        let enc = fit_encoder(&records, &AlarmTypeMapping::default(), &scale()).unwrap();
        let ds = transform(&records, &enc, &AlarmTypeMapping::default());
        assert_eq!(ds.code(0, 0), 6);
        assert_eq!(ds.code(1, 0), 4);
        assert_eq!(enc.cardinalities()[0], 7);
    }

    #[test]
    fn unseen_severity_at_fit_time_errors() {
        let mut records = vec![record(1600000000)];
        records[0].severity = "catastrophic".into();
        let err = fit_encoder(&records, &AlarmTypeMapping::default(), &scale());
        assert!(matches!(err, Err(Error::UnknownSeverity(_))));
    }

    #[test]
    fn single_record_vocabularies() {
        let records = vec![record(1600000000)];
        let enc = fit_encoder(&records, &AlarmTypeMapping::default(), &scale()).unwrap();
        let cards = enc.cardinalities();
        // nominal features saw one value each
        for f in [1, 2, 3, 4, 5, 6, 7, 8] {
            assert_eq!(cards[f], 2, "feature {f}");
        }
        // severity and hour vocabularies are fixed
        assert_eq!(cards[0], 7);
        assert_eq!(cards[9], 25);
        let ds = transform(&records, &enc, &AlarmTypeMapping::default());
        for f in [1, 2, 3, 4, 5, 6, 7, 8] {
            assert_eq!(ds.code(0, f), 1);
        }
    }

    #[test]
    fn transform_on_fit_set_has_no_unknown_codes() {
        let mut records = Vec::new();
        for i in 0..40 {
            let mut r = record(1600000000 + i * 3600);
            r.city = format!("city-{}", i % 7);
            r.site_code = format!("s-{}", i % 11);
            records.push(r);
        }
        let enc = fit_encoder(&records, &AlarmTypeMapping::default(), &scale()).unwrap();
        let ds = transform(&records, &enc, &AlarmTypeMapping::default());
        for i in 0..ds.n_rows() {
            for f in 0..ds.n_features() {
                assert!(ds.code(i, f) > 0);
                assert!(ds.code(i, f) < ds.cardinalities()[f]);
            }
        }
    }

    #[test]
    fn novel_value_encodes_to_zero_only_there() {
        let records = vec![record(1600000000)];
        let enc = fit_encoder(&records, &AlarmTypeMapping::default(), &scale()).unwrap();
        let mut novel = record(1600000000);
        novel.city = "brand-new-city".into();
        let ds = transform(&[novel], &enc, &AlarmTypeMapping::default());
        assert_eq!(ds.code(0, 3), 0);
        for f in [0, 1, 2, 4, 5, 6, 7, 8, 9] {
            assert!(ds.code(0, f) > 0, "feature {f}");
        }
    }

    #[test]
    fn empty_transform_keeps_cardinalities() {
        let records = vec![record(1600000000)];
        let enc = fit_encoder(&records, &AlarmTypeMapping::default(), &scale()).unwrap();
        let ds = transform(&[], &enc, &AlarmTypeMapping::default());
        assert_eq!(ds.n_rows(), 0);
        assert_eq!(ds.cardinalities(), enc.cardinalities().as_slice());
    }

    #[test]
    fn decode_round_trips_in_vocab_values() {
        let mut records = vec![record(1600000000), record(1600000100)];
        records[1].equipment_type = "switch".into();
        let enc = fit_encoder(&records, &AlarmTypeMapping::default(), &scale()).unwrap();
        let ds = transform(&records, &enc, &AlarmTypeMapping::default());
        assert_eq!(enc.decode(8, ds.code(1, 8)), Some("switch"));
        assert_eq!(enc.decode(8, 0), None);
    }

    #[test]
    fn extended_transform_appends_calendar_columns() {
        let records = vec![record(1596844800)];
        let enc = fit_encoder(&records, &AlarmTypeMapping::default(), &scale()).unwrap();
        let ds = transform_extended(&records, &enc, &AlarmTypeMapping::default());
        assert_eq!(ds.n_features(), 15);
        let names = ds.feature_names();
        assert_eq!(names[10], "day");
        assert_eq!(names[14], "year");
        assert_eq!(ds.code(0, 10), 8);
        assert_eq!(ds.code(0, 13), 3);
        assert_eq!(ds.code(0, 14), 1);
    }

    #[test]
    fn ingest_empty_csv_yields_no_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        std::fs::write(
            &path,
            "report_time,clear_time,severity,alarm_type,site_code,city,domain,segment_name,management_system,port_type,equipment_type,label\n",
        )
        .unwrap();
        let out = ingest_csv(&path, &CsvSchema::default()).unwrap();
        assert!(out.records.is_empty());
        assert!(out.rejected.is_empty());
    }

    #[test]
    fn ingest_rejects_inverted_clear_time_with_row_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        std::fs::write(
            &path,
            "report_time,clear_time,severity,alarm_type,site_code,city,domain,segment_name,management_system,port_type,equipment_type,label\n\
             1600000000,1600000100,critical,LOS,s,c,d,g,m,p,e,0\n\
             1600000000,1599999999,critical,LOS,s,c,d,g,m,p,e,0\n\
             1600000000,,critical,LOS,s,c,d,g,m,p,e,2\n",
        )
        .unwrap();
        let out = ingest_csv(&path, &CsvSchema::default()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.rejected.len(), 2);
        assert_eq!(out.rejected[0].row, 2);
        assert!(out.rejected[0].message.contains("clear_time"));
        assert_eq!(out.rejected[1].row, 3);
        assert!(out.rejected[1].message.contains("label"));
    }

    #[test]
    fn ingest_round_trips_written_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("round.csv");
        let mut records = vec![record(1596844800), record(1600000000), record(1611184500)];
        records[1].clear_time = Some(1600000500);
        records[2].label = 1;
        write_csv(&records, &path).unwrap();
        let out = ingest_csv(&path, &CsvSchema::default()).unwrap();
        assert!(out.rejected.is_empty());
        assert_eq!(out.records, records);
    }

    #[test]
    fn ingest_missing_column_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.csv");
        std::fs::write(&path, "report_time,severity\n").unwrap();
        let err = ingest_csv(&path, &CsvSchema::default());
        assert!(matches!(err, Err(Error::MissingColumn(_))));
    }

    #[test]
    fn encoder_persistence_round_trip_is_byte_stable() {
        let mapping = AlarmTypeMapping::parse("prefix:LOS => link\n").unwrap();
        let records = vec![record(1600000000)];
        let enc = fit_encoder(&records, &mapping, &scale()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("enc1.json");
        let p2 = dir.path().join("enc2.json");
        save_encoder(&enc, &p1).unwrap();
        let loaded = load_encoder(&p1).unwrap();
        save_encoder(&loaded, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        assert_eq!(loaded.cardinalities(), enc.cardinalities());
        let ds = transform(&records, &loaded, loaded.mapping());
        assert!(ds.code(0, 1) > 0);
    }
}
