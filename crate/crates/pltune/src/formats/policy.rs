//! Threshold policy documents.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use pltune_core::threshold::{Beta, BetaSettings, Method, ThresholdPolicy, Thresholds};
use pltune_core::ClassId;

use super::read_json;

/// One class: `tau` alone, or `tau_h` with `tau_l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyEntry {
    pub class_id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_l: Option<f64>,
}

impl PolicyEntry {
    pub fn new(class: ClassId, t: &Thresholds) -> Self {
        let (tau, tau_h, tau_l) = match *t {
            Thresholds::Single { tau } => (Some(tau), None, None),
            Thresholds::Dual { tau_h, tau_l } => (None, Some(tau_h), Some(tau_l)),
        };
        Self {
            class_id: class.0,
            tau,
            tau_h,
            tau_l,
        }
    }

    pub fn thresholds(&self) -> Result<Thresholds> {
        let t = match (self.tau, self.tau_h, self.tau_l) {
            (Some(tau), None, None) => Thresholds::Single { tau },
            (None, Some(tau_h), Some(tau_l)) => Thresholds::Dual { tau_h, tau_l },
            _ => bail!("expected either `tau` or both `tau_h` and `tau_l`"),
        };
        t.validate()?;
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyDocument {
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_single: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_high: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_low: Option<f64>,
    pub entries: Vec<PolicyEntry>,
}

impl PolicyDocument {
    pub fn from_policy(p: &ThresholdPolicy) -> Self {
        let (beta_single, beta_high, beta_low) = match p.betas {
            None => (None, None, None),
            Some(BetaSettings::Single(b)) => (Some(b.value()), None, None),
            Some(BetaSettings::Dual { high, low }) => (None, Some(high.value()), Some(low.value())),
        };
        Self {
            method: p.method.as_str().to_string(),
            beta_single,
            beta_high,
            beta_low,
            entries: p
                .entries()
                .iter()
                .map(|(c, t)| PolicyEntry::new(*c, t))
                .collect(),
        }
    }

    pub fn to_policy(&self) -> Result<ThresholdPolicy> {
        let method = Method::parse(&self.method)
            .with_context(|| format!("method: unknown method {:?}", self.method))?;
        let beta = |v: f64, field: &str| Beta::new(v).with_context(|| field.to_string());
        let betas = match (self.beta_single, self.beta_high, self.beta_low) {
            (None, None, None) => None,
            (Some(b), None, None) => Some(BetaSettings::Single(beta(b, "beta_single")?)),
            (None, Some(h), Some(l)) => Some(BetaSettings::Dual {
                high: beta(h, "beta_high")?,
                low: beta(l, "beta_low")?,
            }),
            _ => bail!("beta_single: give either beta_single or both beta_high and beta_low"),
        };
        let mut policy = ThresholdPolicy::new(method, betas);
        for (i, e) in self.entries.iter().enumerate() {
            let t = e.thresholds().with_context(|| format!("entries[{i}]"))?;
            if policy.get(ClassId(e.class_id)).is_some() {
                bail!("entries[{i}].class_id: class {} listed twice", e.class_id);
            }
            policy.insert(ClassId(e.class_id), t)?;
        }
        Ok(policy)
    }
}

pub fn load_policy(path: &Path) -> Result<ThresholdPolicy> {
    let doc: PolicyDocument = read_json(path)?;
    doc.to_policy().with_context(|| path.display().to_string())
}

/// Tab-separated `class_id tau_h tau_l`; single thresholds repeat in both
/// columns.
pub fn policy_tsv(p: &ThresholdPolicy) -> String {
    let mut out = String::from("class_id\ttau_h\ttau_l\n");
    for (c, t) in p.entries() {
        out.push_str(&format!("{}\t{}\t{}\n", c.0, t.high(), t.low()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_both_modes() {
        let mut p = ThresholdPolicy::new(
            Method::FmaxDs,
            Some(BetaSettings::Dual {
                high: Beta::HALF,
                low: Beta::TWO,
            }),
        );
        p.insert(
            ClassId(1),
            Thresholds::Dual {
                tau_h: 0.8,
                tau_l: 0.3,
            },
        )
        .unwrap();
        p.insert(
            ClassId(4),
            Thresholds::Dual {
                tau_h: 1.0,
                tau_l: 1.0,
            },
        )
        .unwrap();
        let doc = PolicyDocument::from_policy(&p);
        let text = serde_json::to_string(&doc).unwrap();
        let back: PolicyDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_policy().unwrap(), p);

        let single =
            ThresholdPolicy::uniform(Method::Grid, [ClassId(2)], Thresholds::Single { tau: 0.5 })
                .unwrap();
        assert_eq!(
            PolicyDocument::from_policy(&single).to_policy().unwrap(),
            single
        );
    }

    #[test]
    fn rejects_malformed_entries() {
        let parse = |s: &str| {
            serde_json::from_str::<PolicyDocument>(s)
                .map_err(anyhow::Error::from)
                .and_then(|d| d.to_policy())
        };
        assert!(
            parse(r#"{"method":"manual","entries":[{"class_id":1,"tau":0.5,"tau_h":0.6}]}"#)
                .is_err()
        );
        assert!(
            parse(r#"{"method":"manual","entries":[{"class_id":1,"tau_h":0.2,"tau_l":0.6}]}"#)
                .is_err()
        );
        assert!(parse(r#"{"method":"manual","entries":[{"class_id":1,"tau":1.5}]}"#).is_err());
        assert!(parse(r#"{"method":"magic","entries":[]}"#).is_err());
        assert!(parse(r#"{"method":"manual","beta_high":0.5,"entries":[]}"#).is_err());
        let dup = parse(
            r#"{"method":"manual","entries":[{"class_id":1,"tau":0.5},{"class_id":1,"tau":0.6}]}"#,
        );
        assert!(format!("{:#}", dup.unwrap_err()).contains("entries[1]"));
    }
}
