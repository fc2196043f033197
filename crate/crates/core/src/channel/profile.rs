//! Power-delay profiles loaded from `delay_ns,power_db` CSV tables.

use super::ChannelError;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One profile entry as stored on disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRecord {
    pub delay_ns: f64,
    pub power_db: f64,
}

/// A delay profile with linear tap powers normalized to sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayProfile {
    name: String,
    delays_ns: Vec<f64>,
    powers: Vec<f64>,
}

const EPA: &str = include_str!("../../data/profiles/epa.csv");
const EVA: &str = include_str!("../../data/profiles/eva.csv");
const ETU: &str = include_str!("../../data/profiles/etu.csv");

impl DelayProfile {
    pub fn from_records(name: impl Into<String>, mut records: Vec<ProfileRecord>) -> Result<Self, ChannelError> {
        let name = name.into();
        if records.is_empty() {
            return Err(ChannelError::EmptyProfile(name));
        }
        if let Some(bad) = records
            .iter()
            .find(|r| !(r.delay_ns.is_finite() && r.delay_ns >= 0.0 && r.power_db.is_finite()))
        {
            return Err(ChannelError::BadProfile(format!(
                "{name}: invalid record delay_ns={} power_db={}",
                bad.delay_ns, bad.power_db
            )));
        }
        records.sort_by(|a, b| a.delay_ns.total_cmp(&b.delay_ns));
        let linear: Vec<f64> = records.iter().map(|r| 10f64.powf(r.power_db / 10.0)).collect();
        let total: f64 = linear.iter().sum();
        Ok(DelayProfile {
            name,
            delays_ns: records.iter().map(|r| r.delay_ns).collect(),
            powers: linear.iter().map(|p| p / total).collect(),
        })
    }

    pub fn from_csv_str(name: impl Into<String>, text: &str) -> Result<Self, ChannelError> {
        let name = name.into();
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let records = reader
            .deserialize()
            .collect::<Result<Vec<ProfileRecord>, _>>()
            .map_err(|e| ChannelError::BadProfile(format!("{name}: {e}")))?;
        DelayProfile::from_records(name, records)
    }

    pub fn from_csv_file(path: &Path) -> Result<Self, ChannelError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ChannelError::BadProfile(format!("{}: {e}", path.display())))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().to_uppercase())
            .unwrap_or_default();
        DelayProfile::from_csv_str(name, &text)
    }

    /// Built-in 3GPP extended profiles: `EPA`, `EVA`, `ETU` (case-insensitive).
    pub fn builtin(name: &str) -> Result<Self, ChannelError> {
        let upper = name.to_ascii_uppercase();
        let text = match upper.as_str() {
            "EPA" => EPA,
            "EVA" => EVA,
            "ETU" => ETU,
            _ => return Err(ChannelError::UnknownProfile(name.to_string())),
        };
        DelayProfile::from_csv_str(upper, text)
    }

    /// Resolves a built-in name, falling back to a CSV path.
    pub fn resolve(name_or_path: &str) -> Result<Self, ChannelError> {
        match DelayProfile::builtin(name_or_path) {
            Err(ChannelError::UnknownProfile(_)) if Path::new(name_or_path).is_file() => {
                DelayProfile::from_csv_file(Path::new(name_or_path))
            }
            other => other,
        }
    }

    /// Single unit-power path at zero delay.
    pub fn flat() -> Self {
        DelayProfile {
            name: "FLAT".into(),
            delays_ns: vec![0.0],
            powers: vec![1.0],
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn delays_ns(&self) -> &[f64] {
        &self.delays_ns
    }

    /// Normalized linear powers, in delay order.
    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn max_delay_ns(&self) -> f64 {
        self.delays_ns.last().copied().unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_normalize_to_unit_power() {
        for name in ["epa", "EVA", "Etu"] {
            let p = DelayProfile::builtin(name).unwrap();
            assert!((p.powers().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(DelayProfile::builtin("EVA").unwrap().max_delay_ns(), 2510.0);
        assert_eq!(DelayProfile::builtin("ETU").unwrap().max_delay_ns(), 5000.0);
        assert_eq!(DelayProfile::builtin("EPA").unwrap().delays_ns().len(), 7);
    }

    #[test]
    fn record_order_is_irrelevant() {
        let a = DelayProfile::from_csv_str("x", "delay_ns,power_db\n0,0\n100,-3\n").unwrap();
        let b = DelayProfile::from_csv_str("x", "delay_ns,power_db\n100,-3\n0,0\n").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            DelayProfile::builtin("XYZ"),
            Err(ChannelError::UnknownProfile(_))
        ));
        assert!(matches!(
            DelayProfile::from_csv_str("e", "delay_ns,power_db\n"),
            Err(ChannelError::EmptyProfile(_))
        ));
        assert!(DelayProfile::from_csv_str("e", "delay_ns,power_db\n-5,0\n").is_err());
    }
}
