use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Singular value profiles of the synthetic test matrices.
#[derive(Clone, Debug, PartialEq)]
pub enum SpectrumSpec {
    /// `10^{−4(i−1)/19}` for `i ≤ 20`, then `10^{−4}/(i−20)^{1/10}`.
    Type1,
    /// `i^{−2}`
    Type2,
    /// `i^{−3}`
    Type3,
    /// `e^{−i/7}`
    Type4,
    /// `10^{−i/10}`
    Type5,
    /// Explicit non-increasing, non-negative values; zero past the end.
    Custom(Vec<f64>),
}

impl SpectrumSpec {
    pub fn custom(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain("custom singular values must be finite and non-negative".into()));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Domain("custom singular values must be non-increasing".into()));
        }
        Ok(SpectrumSpec::Custom(values))
    }

    /// First `count` values.
    pub fn values(&self, count: usize) -> Vec<f64> {
        (1..=count)
            .map(|i| spectrum_value(self, i).expect("indices start at 1"))
            .collect()
    }
}

/// `σ_i` for `i ≥ 1`.
pub fn spectrum_value(spec: &SpectrumSpec, i: usize) -> Result<f64> {
    if i < 1 {
        return Err(Error::Domain("singular value indices start at 1".into()));
    }
    let x = i as f64;
    Ok(match spec {
        SpectrumSpec::Type1 if i <= 20 => 10f64.powf(-4.0 * (x - 1.0) / 19.0),
        SpectrumSpec::Type1 => 1e-4 / (x - 20.0).powf(0.1),
        SpectrumSpec::Type2 => x.powi(-2),
        SpectrumSpec::Type3 => x.powi(-3),
        SpectrumSpec::Type4 => (-x / 7.0).exp(),
        SpectrumSpec::Type5 => 10f64.powf(-x / 10.0),
        SpectrumSpec::Custom(v) => v.get(i - 1).copied().unwrap_or(0.0),
    })
}

impl fmt::Display for SpectrumSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectrumSpec::Type1 => f.write_str("type1"),
            SpectrumSpec::Type2 => f.write_str("type2"),
            SpectrumSpec::Type3 => f.write_str("type3"),
            SpectrumSpec::Type4 => f.write_str("type4"),
            SpectrumSpec::Type5 => f.write_str("type5"),
            SpectrumSpec::Custom(v) => {
                f.write_str("custom:")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{x:?}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for SpectrumSpec {
    type Err = Error;

    /// `type1` … `type5` (case-insensitive, `1` … `5` also accepted) or
    /// `custom:3,2,1`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        if let Some(list) = lower.strip_prefix("custom:") {
            let values = list
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad singular value '{t}' in '{s}'")))
                })
                .collect::<Result<Vec<_>>>()?;
            return SpectrumSpec::custom(values).map_err(|e| Error::Config(e.to_string()));
        }
        match lower.trim_start_matches("type") {
            "1" => Ok(SpectrumSpec::Type1),
            "2" => Ok(SpectrumSpec::Type2),
            "3" => Ok(SpectrumSpec::Type3),
            "4" => Ok(SpectrumSpec::Type4),
            "5" => Ok(SpectrumSpec::Type5),
            _ => Err(Error::Config(format!(
                "unknown spectrum '{s}', expected type1..type5 or custom:v1,v2,..."
            ))),
        }
    }
}
