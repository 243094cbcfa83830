use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::str::FromStr;

use super::config::TrainingMode;
use crate::attack::AttackMode;
use crate::error::{Error, Result};

pub const RESULT_HEADER: [&str; 10] = [
    "dataset",
    "training_mode",
    "n_clients",
    "attack_mode",
    "batch_size",
    "seed",
    "target_train_acc",
    "target_test_acc",
    "attack_accuracy",
    "advantage",
];

/// One measured cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub dataset: String,
    pub training_mode: TrainingMode,
    pub attack_mode: AttackMode,
    pub seed: u64,
    pub target_train_acc: f64,
    pub target_test_acc: f64,
    pub attack_accuracy: f64,
    /// Batch-wise accuracy minus the matching sample-wise accuracy.
    pub advantage: Option<f64>,
}

fn fixed(v: f64) -> String {
    format!("{v:.6}")
}

impl ResultRow {
    fn fields(&self) -> [String; 10] {
        [
            self.dataset.clone(),
            self.training_mode.name().to_string(),
            self.training_mode.n_clients().to_string(),
            match self.attack_mode {
                AttackMode::SampleWise => "samplewise".into(),
                AttackMode::BatchWise(_) => "batchwise".into(),
            },
            self.attack_mode
                .batch_size()
                .map(|b| b.to_string())
                .unwrap_or_default(),
            self.seed.to_string(),
            fixed(self.target_train_acc),
            fixed(self.target_test_acc),
            fixed(self.attack_accuracy),
            self.advantage.map(fixed).unwrap_or_default(),
        ]
    }
}

pub fn write_results<W: Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RESULT_HEADER)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn results_to_string(rows: &[ResultRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_results(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

fn field<T: FromStr>(rec: &csv::StringRecord, i: usize, line: usize) -> Result<T> {
    rec[i].parse().map_err(|_| {
        Error::format(
            format!("line {line}, column {}", RESULT_HEADER[i]),
            format!("cannot parse `{}`", &rec[i]),
        )
    })
}

/// Parses a results CSV written by [`write_results`].
pub fn read_results<R: Read>(reader: R) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(RESULT_HEADER.iter().copied()) {
        return Err(Error::format("header", "not a results CSV"));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let n_clients: usize = field(&rec, 2, line)?;
        let training_mode = match &rec[1] {
            "centralized" => TrainingMode::Centralized,
            "federated" => TrainingMode::Federated(n_clients),
            other => {
                return Err(Error::format(
                    format!("line {line}, column training_mode"),
                    format!("unknown mode `{other}`"),
                ))
            }
        };
        let attack_mode = match &rec[3] {
            "samplewise" => AttackMode::SampleWise,
            "batchwise" => AttackMode::BatchWise(field(&rec, 4, line)?),
            other => {
                return Err(Error::format(
                    format!("line {line}, column attack_mode"),
                    format!("unknown mode `{other}`"),
                ))
            }
        };
        let advantage = if rec[9].is_empty() {
            None
        } else {
            Some(field(&rec, 9, line)?)
        };
        rows.push(ResultRow {
            dataset: rec[0].to_string(),
            training_mode,
            attack_mode,
            seed: field(&rec, 5, line)?,
            target_train_acc: field(&rec, 6, line)?,
            target_test_acc: field(&rec, 7, line)?,
            attack_accuracy: field(&rec, 8, line)?,
            advantage,
        });
    }
    Ok(rows)
}

/// Column a summary can group by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKey {
    Dataset,
    TrainingMode,
    NClients,
    AttackMode,
    BatchSize,
    Seed,
}

impl GroupKey {
    pub fn column(self) -> &'static str {
        match self {
            GroupKey::Dataset => "dataset",
            GroupKey::TrainingMode => "training_mode",
            GroupKey::NClients => "n_clients",
            GroupKey::AttackMode => "attack_mode",
            GroupKey::BatchSize => "batch_size",
            GroupKey::Seed => "seed",
        }
    }

    fn value(self, row: &ResultRow) -> GroupValue {
        match self {
            GroupKey::Dataset => GroupValue::Text(row.dataset.clone()),
            GroupKey::TrainingMode => GroupValue::Text(row.training_mode.name().into()),
            GroupKey::NClients => GroupValue::Int(row.training_mode.n_clients() as u64),
            GroupKey::AttackMode => GroupValue::Text(
                match row.attack_mode {
                    AttackMode::SampleWise => "samplewise",
                    AttackMode::BatchWise(_) => "batchwise",
                }
                .into(),
            ),
            GroupKey::BatchSize => row
                .attack_mode
                .batch_size()
                .map_or(GroupValue::Missing, |b| GroupValue::Int(b as u64)),
            GroupKey::Seed => GroupValue::Int(row.seed),
        }
    }
}

impl FromStr for GroupKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "dataset" => GroupKey::Dataset,
            "training_mode" => GroupKey::TrainingMode,
            "n_clients" => GroupKey::NClients,
            "attack_mode" => GroupKey::AttackMode,
            "batch_size" => GroupKey::BatchSize,
            "seed" => GroupKey::Seed,
            other => return Err(Error::config(format!("unknown group key `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum GroupValue {
    Missing,
    Int(u64),
    Text(String),
}

impl std::fmt::Display for GroupValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GroupValue::Missing => Ok(()),
            GroupValue::Int(v) => write!(f, "{v}"),
            GroupValue::Text(s) => f.write_str(s),
        }
    }
}

/// Mean and sample standard deviation of one group.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub key: Vec<GroupValue>,
    pub count: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    /// Over the rows of the group that carry an advantage.
    pub advantage_mean: Option<f64>,
    pub advantage_std: Option<f64>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups `rows` by `keys` and aggregates attack accuracy and advantage.
/// Groups come out in ascending key order.
pub fn summarize(rows: &[ResultRow], keys: &[GroupKey]) -> Result<Vec<SummaryRow>> {
    if rows.is_empty() {
        return Err(Error::input("nothing to summarize"));
    }
    let mut groups: BTreeMap<Vec<GroupValue>, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        let key = keys.iter().map(|k| k.value(r)).collect();
        groups.entry(key).or_default().push(r);
    }
    Ok(groups
        .into_iter()
        .map(|(key, members)| {
            let accs: Vec<f64> = members.iter().map(|r| r.attack_accuracy).collect();
            let advs: Vec<f64> = members.iter().filter_map(|r| r.advantage).collect();
            let (accuracy_mean, accuracy_std) = mean_std(&accs);
            let adv = (!advs.is_empty()).then(|| mean_std(&advs));
            SummaryRow {
                key,
                count: members.len(),
                accuracy_mean,
                accuracy_std,
                advantage_mean: adv.map(|a| a.0),
                advantage_std: adv.map(|a| a.1),
            }
        })
        .collect())
}

pub fn write_summary<W: Write>(keys: &[GroupKey], summary: &[SummaryRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = keys.iter().map(|k| k.column()).collect();
    header.extend([
        "count",
        "attack_accuracy_mean",
        "attack_accuracy_std",
        "advantage_mean",
        "advantage_std",
    ]);
    w.write_record(&header)?;
    for s in summary {
        let mut row: Vec<String> = s.key.iter().map(|v| v.to_string()).collect();
        row.push(s.count.to_string());
        row.push(fixed(s.accuracy_mean));
        row.push(fixed(s.accuracy_std));
        row.push(s.advantage_mean.map(fixed).unwrap_or_default());
        row.push(s.advantage_std.map(fixed).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
