//! Result rows and their CSV / JSON encodings.
//!
//! CSV header (fixed order):
//! `experiment,nt,k,t,l,snr_db,modulation,method,metric,value,stderr,trials,seed`.
//! Real values are written with 9 significant digits; `NaN` is written as
//! `nan` in CSV and `null` in JSON.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::SimError;

pub const CSV_HEADER: [&str; 13] = [
    "experiment", "nt", "k", "t", "l", "snr_db", "modulation", "method", "metric", "value", "stderr", "trials", "seed",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub experiment: String,
    pub nt: usize,
    pub k: usize,
    pub t: usize,
    pub l: usize,
    pub snr_db: f64,
    pub modulation: String,
    pub method: String,
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
    pub trials: usize,
    pub seed: u64,
}

impl MetricRecord {
    pub fn summary(&self) -> String {
        format!(
            "{} nt={} k={} t={} l={} snr_db={} {} {} {}={} ± {} (n={})",
            self.experiment,
            self.nt,
            self.k,
            self.t,
            self.l,
            fmt_sig(self.snr_db),
            self.modulation,
            self.method,
            self.metric,
            fmt_sig(self.value),
            fmt_sig(self.stderr),
            self.trials
        )
    }
}

/// Mean and standard error (`sample sd / √n`) of per-trial samples,
/// reduced in index order.
pub fn mean_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// 9 significant digits, `%g` style: fixed notation for moderate
/// exponents, scientific otherwise, trailing zeros trimmed.
pub fn fmt_sig(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub fn write_csv<W: Write>(records: &[MetricRecord], out: W) -> Result<(), SimError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.experiment.clone(),
            r.nt.to_string(),
            r.k.to_string(),
            r.t.to_string(),
            r.l.to_string(),
            fmt_sig(r.snr_db),
            r.modulation.clone(),
            r.method.clone(),
            r.metric.clone(),
            fmt_sig(r.value),
            fmt_sig(r.stderr),
            r.trials.to_string(),
            r.seed.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(records: &[MetricRecord], mut out: W) -> Result<(), SimError> {
    serde_json::to_writer_pretty(&mut out, records).map_err(|e| SimError::Io(e.into()))?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<MetricRecord>, SimError> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(SimError::Parse("unexpected CSV header".into()));
    }
    let real = |s: &str| -> Result<f64, SimError> {
        match s {
            "nan" => Ok(f64::NAN),
            "inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            _ => s.parse().map_err(|_| SimError::Parse(format!("bad number `{s}`"))),
        }
    };
    let int = |s: &str| -> Result<u64, SimError> { s.parse().map_err(|_| SimError::Parse(format!("bad integer `{s}`"))) };
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row.map_err(csv_err)?;
        if row.len() != CSV_HEADER.len() {
            return Err(SimError::Parse("wrong number of columns".into()));
        }
        out.push(MetricRecord {
            experiment: row[0].to_string(),
            nt: int(&row[1])? as usize,
            k: int(&row[2])? as usize,
            t: int(&row[3])? as usize,
            l: int(&row[4])? as usize,
            snr_db: real(&row[5])?,
            modulation: row[6].to_string(),
            method: row[7].to_string(),
            metric: row[8].to_string(),
            value: real(&row[9])?,
            stderr: real(&row[10])?,
            trials: int(&row[11])? as usize,
            seed: int(&row[12])?,
        });
    }
    Ok(out)
}

fn csv_err(e: csv::Error) -> SimError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => SimError::Io(io),
        other => SimError::Parse(format!("{other:?}")),
    }
}
