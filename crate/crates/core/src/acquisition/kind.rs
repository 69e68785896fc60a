use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Which acquisition function drives destination selection.
///
/// String form: `US`, `US-IW`, `US-LW`, `IVR`, `IVR-IW`, `IVR-LW`, `FLAT`, and
/// `UCB:<kappa>`, `PI:<kappa>`, `EI:<kappa>` for the classic criteria.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AcquisitionKind {
    Us,
    UsIw,
    UsLw,
    Ivr,
    IvrIw,
    IvrLw,
    Ucb { kappa: f64 },
    Pi { kappa: f64 },
    Ei { kappa: f64 },
    /// Constant utility; every candidate ties.
    Flat,
}

impl AcquisitionKind {
    pub const VARIANCE_KINDS: [AcquisitionKind; 6] = [
        AcquisitionKind::Us,
        AcquisitionKind::UsIw,
        AcquisitionKind::UsLw,
        AcquisitionKind::Ivr,
        AcquisitionKind::IvrIw,
        AcquisitionKind::IvrLw,
    ];

    pub fn kappa(self) -> Option<f64> {
        match self {
            AcquisitionKind::Ucb { kappa }
            | AcquisitionKind::Pi { kappa }
            | AcquisitionKind::Ei { kappa } => Some(kappa),
            _ => None,
        }
    }

    /// Needs a likelihood weight refreshed every epoch.
    pub fn is_likelihood_weighted(self) -> bool {
        matches!(self, AcquisitionKind::UsLw | AcquisitionKind::IvrLw)
    }

    pub fn is_input_weighted(self) -> bool {
        matches!(self, AcquisitionKind::UsIw | AcquisitionKind::IvrIw)
    }

    pub fn is_ivr(self) -> bool {
        matches!(
            self,
            AcquisitionKind::Ivr | AcquisitionKind::IvrIw | AcquisitionKind::IvrLw
        )
    }

    pub fn is_classic(self) -> bool {
        self.kappa().is_some()
    }

    /// Lowercase, filesystem-safe label.
    pub fn slug(self) -> String {
        self.to_string().to_ascii_lowercase().replace([':', '.'], "-")
    }
}

impl fmt::Display for AcquisitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AcquisitionKind::Us => write!(f, "US"),
            AcquisitionKind::UsIw => write!(f, "US-IW"),
            AcquisitionKind::UsLw => write!(f, "US-LW"),
            AcquisitionKind::Ivr => write!(f, "IVR"),
            AcquisitionKind::IvrIw => write!(f, "IVR-IW"),
            AcquisitionKind::IvrLw => write!(f, "IVR-LW"),
            AcquisitionKind::Ucb { kappa } => write!(f, "UCB:{kappa}"),
            AcquisitionKind::Pi { kappa } => write!(f, "PI:{kappa}"),
            AcquisitionKind::Ei { kappa } => write!(f, "EI:{kappa}"),
            AcquisitionKind::Flat => write!(f, "FLAT"),
        }
    }
}

impl FromStr for AcquisitionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let upper = s.trim().to_ascii_uppercase().replace('_', "-");
        let (tag, kappa) = match upper.split_once(':') {
            Some((t, k)) => {
                let k: f64 = k
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad kappa in acquisition `{s}`")))?;
                if !(k >= 0.0 && k.is_finite()) {
                    return Err(Error::Config(format!("kappa must be finite and nonnegative in `{s}`")));
                }
                (t.trim().to_string(), Some(k))
            }
            None => (upper, None),
        };
        let kind = match (tag.as_str(), kappa) {
            ("US", None) => AcquisitionKind::Us,
            ("US-IW", None) => AcquisitionKind::UsIw,
            ("US-LW", None) => AcquisitionKind::UsLw,
            ("IVR", None) => AcquisitionKind::Ivr,
            ("IVR-IW", None) => AcquisitionKind::IvrIw,
            ("IVR-LW", None) => AcquisitionKind::IvrLw,
            ("FLAT", None) => AcquisitionKind::Flat,
            ("UCB", Some(kappa)) => AcquisitionKind::Ucb { kappa },
            ("PI", Some(kappa)) => AcquisitionKind::Pi { kappa },
            ("EI", Some(kappa)) => AcquisitionKind::Ei { kappa },
            ("UCB" | "PI" | "EI", None) => {
                return Err(Error::Config(format!("acquisition `{s}` needs a kappa, e.g. `{tag}:1000`")))
            }
            (_, Some(_)) => {
                return Err(Error::Config(format!("acquisition `{s}` does not take a kappa")))
            }
            _ => return Err(Error::Config(format!("unknown acquisition `{s}`"))),
        };
        Ok(kind)
    }
}

impl TryFrom<String> for AcquisitionKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self, Error> {
        s.parse()
    }
}

impl From<AcquisitionKind> for String {
    fn from(k: AcquisitionKind) -> String {
        k.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_strings() {
        let kinds = [
            AcquisitionKind::Us,
            AcquisitionKind::UsIw,
            AcquisitionKind::UsLw,
            AcquisitionKind::Ivr,
            AcquisitionKind::IvrIw,
            AcquisitionKind::IvrLw,
            AcquisitionKind::Flat,
            AcquisitionKind::Ucb { kappa: 1000.0 },
            AcquisitionKind::Pi { kappa: 0.5 },
            AcquisitionKind::Ei { kappa: 1e6 },
        ];
        for k in kinds {
            assert_eq!(k.to_string().parse::<AcquisitionKind>().unwrap(), k);
        }
        assert_eq!("ivr_lw".parse::<AcquisitionKind>().unwrap(), AcquisitionKind::IvrLw);
    }

    #[test]
    fn kappa_only_for_classic() {
        assert!("UCB".parse::<AcquisitionKind>().is_err());
        assert!("US:3".parse::<AcquisitionKind>().is_err());
        assert!("EI:-1".parse::<AcquisitionKind>().is_err());
        assert!("nope".parse::<AcquisitionKind>().is_err());
    }

    #[test]
    fn slugs_are_file_safe() {
        assert_eq!(AcquisitionKind::IvrLw.slug(), "ivr-lw");
        assert_eq!(AcquisitionKind::Ucb { kappa: 0.5 }.slug(), "ucb-0-5");
    }
}
