//! CSV ingestion, schema-driven preprocessing and random splits.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Column roles for one CSV layout, read from a TOML file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSchema {
    #[serde(default)]
    pub name: String,
    pub label: String,
    /// Label value mapped to `y = 1`.
    pub label_positive: String,
    /// If set, the only other accepted label value; otherwise anything else is `y = 0`.
    #[serde(default)]
    pub label_negative: Option<String>,
    pub protected: String,
    /// Protected value mapped to `a = 1`.
    pub protected_positive: String,
    /// If non-empty, rows whose protected value is not listed are dropped.
    #[serde(default)]
    pub protected_keep: Vec<String>,
    #[serde(default)]
    pub categorical: Vec<String>,
    #[serde(default)]
    pub numeric: Vec<String>,
    #[serde(default)]
    pub drop: Vec<String>,
    /// Cell values treated as missing; rows containing one are dropped.
    #[serde(default)]
    pub missing: Vec<String>,
    #[serde(default)]
    pub expected_rows: Option<usize>,
    /// Number of non-protected feature columns.
    #[serde(default)]
    pub expected_features: Option<usize>,
}

impl DatasetSchema {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let schema: DatasetSchema = toml::from_str(s).map_err(|e| Error::Schema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        let roles = [&self.label, &self.protected]
            .into_iter()
            .chain(&self.categorical)
            .chain(&self.numeric)
            .chain(&self.drop);
        for col in roles {
            if !seen.insert(col.as_str()) {
                return Err(Error::Schema(format!("column `{col}` has more than one role")));
            }
        }
        if let Some(expected) = self.expected_features {
            let actual = self.categorical.len() + self.numeric.len();
            if actual != expected {
                return Err(Error::Schema(format!(
                    "expected {expected} feature columns, schema lists {actual}"
                )));
            }
        }
        if self.label_negative.as_deref() == Some(self.label_positive.as_str()) {
            return Err(Error::Schema("label_positive and label_negative are equal".into()));
        }
        Ok(())
    }
}

/// Parsed but untransformed rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RawData {
    pub schema: DatasetSchema,
    /// Row-major, `schema.numeric.len()` values per row.
    pub numeric: Vec<f64>,
    /// Row-major, `schema.categorical.len()` values per row.
    pub categorical: Vec<String>,
    pub groups: Vec<u8>,
    pub labels: Vec<u8>,
    pub dropped_missing: usize,
    pub dropped_filtered: usize,
}

impl RawData {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> RawData {
        let nn = self.schema.numeric.len();
        let nc = self.schema.categorical.len();
        let mut numeric = Vec::with_capacity(idx.len() * nn);
        let mut categorical = Vec::with_capacity(idx.len() * nc);
        for &i in idx {
            numeric.extend_from_slice(&self.numeric[i * nn..(i + 1) * nn]);
            categorical.extend_from_slice(&self.categorical[i * nc..(i + 1) * nc]);
        }
        RawData {
            schema: self.schema.clone(),
            numeric,
            categorical,
            groups: idx.iter().map(|&i| self.groups[i]).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            dropped_missing: 0,
            dropped_filtered: 0,
        }
    }
}

fn column_index(headers: &HashMap<&str, usize>, name: &str) -> Result<usize> {
    headers
        .get(name)
        .copied()
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

/// Loads a labelled CSV.
pub fn load_csv(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<RawData> {
    load_csv_with(path, schema, true)
}

/// With `require_label = false` a missing label column is allowed and every
/// label is set to zero; used for scoring unlabelled files.
pub fn load_csv_with(path: impl AsRef<Path>, schema: &DatasetSchema, require_label: bool) -> Result<RawData> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let raw = read_csv(file, schema, require_label)?;
    if raw.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    if let Some(expected) = schema.expected_rows {
        if raw.len() != expected {
            log::warn!("{}: {} rows after filtering, schema expects {expected}", path.display(), raw.len());
        }
    }
    Ok(raw)
}

/// Parses CSV text from any reader; an empty result is not an error here.
pub fn read_csv<R: std::io::Read>(reader: R, schema: &DatasetSchema, require_label: bool) -> Result<RawData> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header_row = rdr.headers()?.clone();
    let headers: HashMap<&str, usize> = header_row.iter().enumerate().map(|(i, h)| (h, i)).collect();

    let label_col = match column_index(&headers, &schema.label) {
        Ok(i) => Some(i),
        Err(e) if require_label => return Err(e),
        Err(_) => None,
    };
    let prot_col = column_index(&headers, &schema.protected)?;
    let num_cols = schema
        .numeric
        .iter()
        .map(|c| column_index(&headers, c))
        .collect::<Result<Vec<_>>>()?;
    let cat_cols = schema
        .categorical
        .iter()
        .map(|c| column_index(&headers, c))
        .collect::<Result<Vec<_>>>()?;

    let is_missing = |v: &str| schema.missing.iter().any(|m| m == v);
    let mut out = RawData {
        schema: schema.clone(),
        numeric: Vec::new(),
        categorical: Vec::new(),
        groups: Vec::new(),
        labels: Vec::new(),
        dropped_missing: 0,
        dropped_filtered: 0,
    };

    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        // 1-based data row, header excluded
        let row = i + 1;
        let field = |col: usize| record.get(col).unwrap_or("");
        let used = label_col.iter().chain([&prot_col]).chain(&num_cols).chain(&cat_cols);
        if used.clone().any(|&c| is_missing(field(c))) {
            out.dropped_missing += 1;
            continue;
        }
        let prot = field(prot_col);
        if !schema.protected_keep.is_empty() && !schema.protected_keep.iter().any(|k| k == prot) {
            out.dropped_filtered += 1;
            continue;
        }
        let label = match label_col {
            None => 0,
            Some(c) => {
                let v = field(c);
                if v == schema.label_positive {
                    1
                } else if schema.label_negative.as_deref().is_none_or(|neg| neg == v) {
                    0
                } else {
                    return Err(Error::BadValue {
                        row,
                        column: schema.label.clone(),
                        value: v.to_string(),
                    });
                }
            }
        };
        for (&c, name) in num_cols.iter().zip(&schema.numeric) {
            let v = field(c);
            match v.parse::<f64>() {
                Ok(x) if x.is_finite() => out.numeric.push(x),
                _ => {
                    return Err(Error::BadValue {
                        row,
                        column: name.clone(),
                        value: v.to_string(),
                    })
                }
            }
        }
        out.categorical.extend(cat_cols.iter().map(|&c| field(c).to_string()));
        out.groups.push(u8::from(prot == schema.protected_positive));
        out.labels.push(label);
    }
    if out.dropped_missing > 0 {
        log::info!("dropped {} rows with missing values", out.dropped_missing);
    }
    if out.dropped_filtered > 0 {
        log::info!("dropped {} rows outside the protected filter", out.dropped_filtered);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericStat {
    pub column: String,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalStat {
    pub column: String,
    /// Sorted categories seen in the training split; one indicator each.
    pub categories: Vec<String>,
}

/// Training-split statistics needed to transform new rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessStats {
    pub schema: DatasetSchema,
    /// Kept numeric columns; constant ones are left out.
    pub numeric: Vec<NumericStat>,
    pub categorical: Vec<CategoricalStat>,
}

impl PreprocessStats {
    /// Names of the non-bias features in model order.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.numeric.iter().map(|s| s.column.clone()).collect();
        for c in &self.categorical {
            names.extend(c.categories.iter().map(|v| format!("{}={v}", c.column)));
        }
        names.push(self.schema.protected.clone());
        names
    }

    pub fn width(&self) -> usize {
        self.numeric.len() + self.categorical.iter().map(|c| c.categories.len()).sum::<usize>() + 1
    }
}

/// Fits standardization and one-hot statistics on `train`.
pub fn fit(train: &RawData) -> Result<PreprocessStats> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("cannot fit preprocessing on zero rows".into()));
    }
    let n = train.len() as f64;
    let nn = train.schema.numeric.len();
    let mut numeric = Vec::with_capacity(nn);
    for (j, column) in train.schema.numeric.iter().enumerate() {
        let values = train.numeric.iter().skip(j).step_by(nn);
        let mean = values.clone().sum::<f64>() / n;
        let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        if std <= 1e-12 * mean.abs().max(1.0) {
            log::warn!("numeric column `{column}` is constant on the training split; dropped");
            continue;
        }
        numeric.push(NumericStat {
            column: column.clone(),
            mean,
            std,
        });
    }
    let nc = train.schema.categorical.len();
    let mut categorical = Vec::with_capacity(nc);
    for (j, column) in train.schema.categorical.iter().enumerate() {
        let cats: BTreeSet<&String> = train.categorical.iter().skip(j).step_by(nc).collect();
        if cats.len() < 2 {
            log::warn!("categorical column `{column}` is constant on the training split; dropped");
            continue;
        }
        categorical.push(CategoricalStat {
            column: column.clone(),
            categories: cats.into_iter().cloned().collect(),
        });
    }
    Ok(PreprocessStats {
        schema: train.schema.clone(),
        numeric,
        categorical,
    })
}

/// Transforms rows with previously fitted statistics.
pub fn apply(stats: &PreprocessStats, raw: &RawData) -> Result<Dataset> {
    if raw.schema.numeric != stats.schema.numeric || raw.schema.categorical != stats.schema.categorical {
        return Err(Error::Schema("data columns differ from the fitted schema".into()));
    }
    let nn = raw.schema.numeric.len();
    let nc = raw.schema.categorical.len();
    let num_idx: Vec<usize> = stats
        .numeric
        .iter()
        .map(|s| raw.schema.numeric.iter().position(|c| *c == s.column).unwrap_or(usize::MAX))
        .collect();
    let cat_idx: Vec<(usize, HashMap<&str, usize>)> = stats
        .categorical
        .iter()
        .map(|s| {
            let pos = raw.schema.categorical.iter().position(|c| *c == s.column).unwrap_or(usize::MAX);
            let lookup = s.categories.iter().enumerate().map(|(k, v)| (v.as_str(), k)).collect();
            (pos, lookup)
        })
        .collect();
    if num_idx.iter().chain(cat_idx.iter().map(|(p, _)| p)).any(|&p| p == usize::MAX) {
        return Err(Error::Schema("fitted column missing from data".into()));
    }

    let width = stats.width();
    let mut flat = Vec::with_capacity(raw.len() * width);
    for i in 0..raw.len() {
        let nums = &raw.numeric[i * nn..(i + 1) * nn];
        for (s, &j) in stats.numeric.iter().zip(&num_idx) {
            flat.push((nums[j] - s.mean) / s.std);
        }
        let cats = &raw.categorical[i * nc..(i + 1) * nc];
        for (s, (j, lookup)) in stats.categorical.iter().zip(&cat_idx) {
            let start = flat.len();
            flat.resize(start + s.categories.len(), 0.0);
            if let Some(&k) = lookup.get(cats[*j].as_str()) {
                flat[start + k] = 1.0;
            }
        }
        flat.push(f64::from(raw.groups[i]));
    }
    Dataset::from_flat(flat, width, raw.groups.clone(), raw.labels.clone(), stats.feature_names())
}

pub fn fit_transform(train: &RawData) -> Result<(Dataset, PreprocessStats)> {
    let stats = fit(train)?;
    let data = apply(&stats, train)?;
    Ok((data, stats))
}

/// Seeded random partition of `0..n` into `ceil(fraction * n)` and the rest.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("split fraction {fraction} outside (0, 1)")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    // the small offset keeps exact products such as 0.7 * 10 from rounding up
    let n_train = ((fraction * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n);
    let test = idx.split_off(n_train);
    Ok((idx, test))
}

pub fn split(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (a, b) = split_indices(data.len(), fraction, seed)?;
    Ok((data.subset(&a), data.subset(&b)))
}

pub fn split_raw(data: &RawData, fraction: f64, seed: u64) -> Result<(RawData, RawData)> {
    let (a, b) = split_indices(data.len(), fraction, seed)?;
    Ok((data.subset(&a), data.subset(&b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCHEMA: &str = r#"
        label = "y"
        label_positive = "yes"
        protected = "g"
        protected_positive = "m"
        categorical = ["c"]
        numeric = ["n"]
        missing = ["?"]
    "#;

    fn raw(text: &str) -> Result<RawData> {
        read_csv(text.as_bytes(), &DatasetSchema::from_toml_str(SCHEMA).unwrap(), true)
    }

    #[test]
    fn loads_and_maps() {
        let r = raw("n,c,g,y,extra\n1.5,a,m,yes,z\n2,b,f,no,z\n?,a,m,no,z\n").unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r.dropped_missing, 1);
        assert_eq!(r.groups, vec![1, 0]);
        assert_eq!(r.labels, vec![1, 0]);
        assert_eq!(r.numeric, vec![1.5, 2.0]);
    }

    #[test]
    fn errors() {
        assert!(matches!(raw("n,c,g\n1,a,m\n"), Err(Error::MissingColumn(c)) if c == "y"));
        let err = raw("n,c,g,y\n1,a,m,yes\nx,a,m,no\n").unwrap_err();
        assert!(matches!(err, Error::BadValue { row: 2, ref column, .. } if column == "n"));
        let schema = DatasetSchema::from_toml_str(SCHEMA).unwrap();
        let r = read_csv("n,c,g\n1,a,m\n".as_bytes(), &schema, false).unwrap();
        assert_eq!(r.labels, vec![0]);
    }

    #[test]
    fn schema_validation() {
        let dup = SCHEMA.replace("numeric = [\"n\"]", "numeric = [\"c\"]");
        assert!(DatasetSchema::from_toml_str(&dup).is_err());
        let counted = format!("{SCHEMA}\nexpected_features = 3\n");
        assert!(DatasetSchema::from_toml_str(&counted).is_err());
        assert!(DatasetSchema::from_toml_str("label = 1").is_err());
    }

    #[test]
    fn z_score_and_one_hot() {
        let train = raw("n,c,g,y\n8,a,m,yes\n12,b,f,no\n").unwrap();
        let (d, stats) = fit_transform(&train).unwrap();
        assert_eq!(stats.numeric[0].mean, 10.0);
        assert_eq!(stats.numeric[0].std, 2.0);
        assert_eq!(d.row(0), &[-1.0, 1.0, 0.0, 1.0, 1.0]);
        assert_eq!(stats.feature_names(), vec!["n", "c=a", "c=b", "g"]);

        let test = raw("n,c,g,y\n14,zz,f,no\n").unwrap();
        let t = apply(&stats, &test).unwrap();
        assert_eq!(t.row(0), &[2.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(apply(&stats, &train).unwrap(), d);
    }

    #[test]
    fn constant_columns_are_dropped() {
        let train = raw("n,c,g,y\n3,a,m,yes\n3,a,f,no\n").unwrap();
        let stats = fit(&train).unwrap();
        assert!(stats.numeric.is_empty() && stats.categorical.is_empty());
        assert_eq!(apply(&stats, &train).unwrap().dim(), 2);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let (a, b) = split_indices(10, 0.7, 3).unwrap();
        assert_eq!((a.len(), b.len()), (7, 3));
        assert_eq!(split_indices(10, 0.7, 3).unwrap(), (a, b));
        let (x, _) = split_indices(200, 0.5, 1).unwrap();
        let (y, _) = split_indices(200, 0.5, 2).unwrap();
        assert_ne!(x, y);
        assert!(split_indices(10, 1.0, 0).is_err());
    }
}
