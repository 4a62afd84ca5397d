//! Experiment configuration and its validation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::SimError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    MseSweep,
    SerSweep,
    SigmaQ,
    Lemma1,
    Lemma2,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::MseSweep => "mse-sweep",
            Self::SerSweep => "ser-sweep",
            Self::SigmaQ => "sigma-q",
            Self::Lemma1 => "lemma1",
            Self::Lemma2 => "lemma2",
        }
    }
}

macro_rules! named_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub fn name(self) -> &'static str {
                match self {
                    $(Self::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($text => Ok(Self::$variant),)+
                    other => Err(format!("unknown value `{other}`")),
                }
            }
        }
    };
}

named_enum!(Receiver { Ml => "ml", Zf => "zf" });
named_enum!(Estimator { Ml => "ml", Zf => "zf", Perfect => "perfect" });
named_enum!(TrainingKind { Random => "random", Dft => "dft" });
named_enum!(SigmaMode { Data => "data", Train => "train" });

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub nt: usize,
    pub k: usize,
    pub m: usize,
    /// Coherence block length; `None` means `2·max(T) + 256`.
    pub l: Option<usize>,
    pub t_list: Vec<usize>,
    pub k_list: Vec<usize>,
    pub snr_db_list: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub receiver: Receiver,
    pub estimators: Vec<Estimator>,
    pub training: TrainingKind,
    pub sigma_mode: SigmaMode,
    pub samples: usize,
    pub workers: usize,
}

impl ExperimentSpec {
    /// Defaults for `kind`: `Nt = 4`, 8PSK, 10⁴ trials, seed 1.
    pub fn new(kind: ExperimentKind) -> Self {
        let estimators = match kind {
            ExperimentKind::SerSweep => vec![Estimator::Perfect, Estimator::Zf],
            _ => vec![Estimator::Zf, Estimator::Ml],
        };
        Self {
            kind,
            nt: 4,
            k: 32,
            m: 8,
            l: None,
            t_list: vec![8, 16, 32, 64, 128, 256, 512],
            k_list: vec![8, 32, 128, 512],
            snr_db_list: vec![10.0],
            trials: 10_000,
            seed: 1,
            receiver: Receiver::Zf,
            estimators,
            training: TrainingKind::Random,
            sigma_mode: SigmaMode::Data,
            samples: 1_000_000,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }

    pub fn block_length(&self) -> usize {
        self.l
            .unwrap_or_else(|| 2 * self.t_list.iter().copied().max().unwrap_or(0) + 256)
    }

    /// Checks every field relevant to `kind`; the error lists all violations.
    pub fn validate(&self) -> Result<(), SimError> {
        let mut bad = Vec::new();
        if self.nt == 0 {
            bad.push("nt: must be at least 1".to_string());
        }
        if self.m < 2 {
            bad.push("m: constellation order must be at least 2".to_string());
        }
        if self.trials == 0 {
            bad.push("trials: must be at least 1".to_string());
        }
        if self.workers == 0 {
            bad.push("workers: must be at least 1".to_string());
        }
        if self.snr_db_list.is_empty() || self.snr_db_list.iter().any(|v| !v.is_finite()) {
            bad.push("snr_db: need at least one finite SNR".to_string());
        }
        let mse_like = matches!(self.kind, ExperimentKind::MseSweep | ExperimentKind::SerSweep);
        if mse_like {
            if self.t_list.is_empty() || self.t_list.contains(&0) {
                bad.push("t_list: need positive training lengths".to_string());
            }
            if self.estimators.is_empty() {
                bad.push("estimators: need at least one estimator".to_string());
            }
        }
        match self.kind {
            ExperimentKind::MseSweep => {
                if self.estimators.contains(&Estimator::Perfect) {
                    bad.push("estimators: `perfect` has no channel-estimation error to measure".to_string());
                }
            }
            ExperimentKind::SerSweep => {
                let l = self.block_length();
                if let Some(&t) = self.t_list.iter().find(|&&t| t >= l) {
                    bad.push(format!("t: training length {t} must be shorter than the block length l={l}"));
                }
                if self.receiver != Receiver::Zf {
                    bad.push("receiver: SER sweeps use the zf receiver".to_string());
                }
                if self.k < self.nt {
                    bad.push("k: zero-forcing needs at least nt receive nodes".to_string());
                }
            }
            ExperimentKind::SigmaQ => {
                if self.samples < 10_000 {
                    bad.push("samples: need at least 10000".to_string());
                }
            }
            ExperimentKind::Lemma1 | ExperimentKind::Lemma2 => {
                if self.k_list.is_empty() || self.k_list.contains(&0) {
                    bad.push("k_list: need positive node counts".to_string());
                }
                if self.kind == ExperimentKind::Lemma2 && self.k_list.iter().any(|&k| k < self.nt) {
                    bad.push("k_list: zero-forcing needs at least nt receive nodes".to_string());
                }
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(SimError::Validation(bad))
        }
    }
}

/// `ρ = 10^(dB/10)`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
