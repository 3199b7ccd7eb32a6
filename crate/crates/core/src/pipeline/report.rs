use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::Error;
use crate::suspension::NormReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Not meaningful for this input (e.g. a ratio with zero denominator).
    Degenerate,
}

mod nullable_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub module: String,
    pub status: CheckStatus,
    /// `null` in JSON when not finite.
    #[serde(with = "nullable_f64")]
    pub measured: f64,
    #[serde(with = "nullable_f64")]
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    /// Pass iff `measured <= threshold`; NaN fails.
    pub fn at_most(module: &str, name: &str, measured: f64, threshold: f64) -> Check {
        let status = if measured <= threshold {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        Check {
            name: name.to_string(),
            module: module.to_string(),
            status,
            measured,
            threshold,
            detail: None,
        }
    }

    /// A boolean outcome; `measured` is 1 on success.
    pub fn holds(module: &str, name: &str, ok: bool) -> Check {
        Check {
            name: name.to_string(),
            module: module.to_string(),
            status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
            measured: if ok { 1.0 } else { 0.0 },
            threshold: 1.0,
            detail: None,
        }
    }

    pub fn degenerate(module: &str, name: &str, detail: &str) -> Check {
        Check {
            name: name.to_string(),
            module: module.to_string(),
            status: CheckStatus::Degenerate,
            measured: f64::NAN,
            threshold: f64::NAN,
            detail: Some(detail.to_string()),
        }
    }

    /// A check whose computation itself failed.
    pub fn errored(module: &str, name: &str, err: &Error) -> Check {
        Check {
            name: name.to_string(),
            module: module.to_string(),
            status: CheckStatus::Fail,
            measured: f64::NAN,
            threshold: f64::NAN,
            detail: Some(err.to_string()),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Check {
        self.detail = Some(detail.into());
        self
    }
}

/// Build facts only; no clock, host name or path, so reports are
/// reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentStamp {
    pub package: String,
    pub version: String,
    pub target_arch: String,
    pub target_os: String,
    pub float: String,
}

impl EnvironmentStamp {
    pub fn current() -> Self {
        EnvironmentStamp {
            package: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            target_arch: std::env::consts::ARCH.to_string(),
            target_os: std::env::consts::OS.to_string(),
            float: "IEEE-754 binary64".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub command: String,
    pub overall: CheckStatus,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norms: Option<NormReport>,
    /// First stage error, when the run stopped early.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub environment: EnvironmentStamp,
    pub config: ExperimentConfig,
}

impl VerificationReport {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        VerificationReport {
            command: command.to_string(),
            overall: CheckStatus::Pass,
            checks: Vec::new(),
            norms: None,
            failure: None,
            environment: EnvironmentStamp::current(),
            config: config.clone(),
        }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
        self.refresh();
    }

    pub fn extend(&mut self, checks: impl IntoIterator<Item = Check>) {
        self.checks.extend(checks);
        self.refresh();
    }

    pub fn fail_with(&mut self, err: &Error) {
        self.failure = Some(err.to_string());
        self.overall = CheckStatus::Fail;
    }

    /// Pass iff every non-degenerate check passes and nothing stopped the run.
    fn refresh(&mut self) {
        let failed = self.failure.is_some()
            || self.checks.iter().any(|c| c.status == CheckStatus::Fail);
        self.overall = if failed {
            CheckStatus::Fail
        } else {
            CheckStatus::Pass
        };
    }

    pub fn passed(&self) -> bool {
        self.overall == CheckStatus::Pass
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> crate::error::Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// One line per check: `status module/name measured threshold`.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let status = match c.status {
                CheckStatus::Pass => "pass",
                CheckStatus::Fail => "FAIL",
                CheckStatus::Degenerate => "degenerate",
            };
            out.push_str(&format!(
                "{status:<10} {}/{} measured={:.3e} threshold={:.3e}",
                c.module, c.name, c.measured, c.threshold
            ));
            if let Some(d) = &c.detail {
                out.push_str(&format!(" ({d})"));
            }
            out.push('\n');
        }
        if let Some(f) = &self.failure {
            out.push_str(&format!("stopped: {f}\n"));
        }
        out.push_str(&format!(
            "overall: {}\n",
            if self.passed() { "pass" } else { "FAIL" }
        ));
        out
    }
}
