//! Text form `family(param=value,...)` for distributions.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::{DistributionError, DistributionSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("malformed distribution spec near `{token}`: expected family(param=value,...)")]
    Syntax { token: String },
    #[error("unknown distribution family `{token}`")]
    UnknownFamily { token: String },
    #[error("unknown parameter `{token}` for {family}")]
    UnknownParam { family: &'static str, token: String },
    #[error("missing parameter `{param}` for {family}")]
    MissingParam { family: &'static str, param: &'static str },
    #[error("duplicate parameter `{token}`")]
    DuplicateParam { token: String },
    #[error("cannot parse `{token}` as a number")]
    BadNumber { token: String },
    #[error("invalid {family}: {source}")]
    Invalid {
        family: &'static str,
        #[source]
        source: DistributionError,
    },
}

fn number(token: &str) -> Result<f64, ParseError> {
    let t = token.trim();
    match t {
        "inf" | "+inf" | "infinity" => return Ok(f64::INFINITY),
        _ => {}
    }
    t.parse::<f64>().map_err(|_| ParseError::BadNumber { token: t.to_string() })
}

struct Params<'a> {
    family: &'static str,
    map: BTreeMap<&'a str, &'a str>,
}

impl<'a> Params<'a> {
    fn take(&mut self, name: &'static str) -> Result<&'a str, ParseError> {
        self.map.remove(name).ok_or(ParseError::MissingParam {
            family: self.family,
            param: name,
        })
    }

    fn num(&mut self, name: &'static str) -> Result<f64, ParseError> {
        number(self.take(name)?)
    }

    fn finish(self) -> Result<(), ParseError> {
        match self.map.keys().next() {
            Some(k) => Err(ParseError::UnknownParam {
                family: self.family,
                token: k.to_string(),
            }),
            None => Ok(()),
        }
    }
}

impl FromStr for DistributionSpec {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let open = s.find('(').ok_or_else(|| ParseError::Syntax { token: s.to_string() })?;
        if !s.ends_with(')') {
            return Err(ParseError::Syntax {
                token: s[open..].to_string(),
            });
        }
        let name = s[..open].trim();
        let body = &s[open + 1..s.len() - 1];
        let family: &'static str = match name.to_ascii_lowercase().as_str() {
            "point" | "pointmass" => "point",
            "uniform" => "uniform",
            "exp" | "exponential" => "exp",
            "weibull" => "weibull",
            "equalrev" | "equalrevenue" => "equalrev",
            "empirical" => "empirical",
            _ => return Err(ParseError::UnknownFamily { token: name.to_string() }),
        };
        let mut map = BTreeMap::new();
        for part in body.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| ParseError::Syntax { token: part.to_string() })?;
            let k = k.trim();
            if map.insert(k, v.trim()).is_some() {
                return Err(ParseError::DuplicateParam { token: k.to_string() });
            }
        }
        let mut p = Params { family, map };
        let invalid = |source| ParseError::Invalid { family, source };
        let d = match family {
            "point" => DistributionSpec::point_mass(p.num("a")?).map_err(invalid)?,
            "uniform" => {
                let a = p.num("a")?;
                let b = p.num("b")?;
                DistributionSpec::uniform(a, b).map_err(invalid)?
            }
            "exp" => DistributionSpec::exponential(p.num("rate")?).map_err(invalid)?,
            "weibull" => {
                let shape = p.num("shape")?;
                let scale = p.num("scale")?;
                DistributionSpec::weibull(shape, scale).map_err(invalid)?
            }
            "equalrev" => DistributionSpec::equal_revenue(p.num("cap")?).map_err(invalid)?,
            _ => {
                let raw = p.take("values")?;
                let values = raw
                    .split(';')
                    .map(str::trim)
                    .filter(|t| !t.is_empty())
                    .map(number)
                    .collect::<Result<Vec<_>, _>>()?;
                DistributionSpec::empirical(values).map_err(invalid)?
            }
        };
        p.finish()?;
        Ok(d)
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PointMass { at } => write!(f, "point(a={at})"),
            Self::Uniform { lo, hi } => write!(f, "uniform(a={lo},b={hi})"),
            Self::Exponential { rate } => write!(f, "exp(rate={rate})"),
            Self::Weibull { shape, scale } => write!(f, "weibull(shape={shape},scale={scale})"),
            Self::EqualRevenueTruncated { cap } => write!(f, "equalrev(cap={cap})"),
            Self::Empirical { values } => {
                write!(f, "empirical(values=")?;
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, ")")
            }
        }
    }
}
