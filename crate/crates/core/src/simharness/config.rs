//! `key = value` experiment files.
//!
//! ```text
//! # power table for Σ₂ at desk scale
//! experiment = power
//! scale = desk
//! sigma_id = 2
//! p = 200
//! n1 = 50
//! n2 = 50
//! alternatives = 1, 2
//! sparsities = 0.01, 0.05, 0.25, 0.5, 0.75
//! seed = 2024
//! ```
//!
//! `scale` fills in `runs`, `m` and `K`; explicit keys override it wherever
//! they appear in the file. Other keys apply in file order, so a
//! `projection` line filters the RAPTT entries of any earlier `methods` line.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::procedure::{KChoice, RapttConfig};
use crate::projections::ProjectionKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Raptt(ProjectionKind),
    Cq,
    Sd,
    Bs,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Raptt(ProjectionKind::Haar),
        Method::Raptt(ProjectionKind::Block),
        Method::Cq,
        Method::Sd,
        Method::Bs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Raptt(ProjectionKind::Haar) => "RAPTT-haar",
            Method::Raptt(ProjectionKind::Block) => "RAPTT-block",
            Method::Cq => "CQ",
            Method::Sd => "SD",
            Method::Bs => "BS",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        Ok(match t.as_str() {
            "raptt-haar" | "raptt-r1" | "haar" => Method::Raptt(ProjectionKind::Haar),
            "raptt-block" | "raptt-r2" | "block" => Method::Raptt(ProjectionKind::Block),
            "cq" => Method::Cq,
            "sd" => Method::Sd,
            "bs" => Method::Bs,
            _ => return Err(Error::Config(format!("unknown method {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Desk,
    Full,
}

impl Scale {
    /// `(runs, m, K)`.
    pub fn defaults(self) -> (usize, usize, usize) {
        match self {
            Scale::Desk => (300, 500, 2000),
            Scale::Full => (1000, 5000, 10000),
        }
    }
}

/// Null distribution used for the RAPTT cutoffs of a power table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CalibrationMode {
    /// Sufficient statistics under `Σ = I` (the core calibrator).
    #[default]
    Identity,
    /// Full datasets under the experiment's own covariance.
    Matched,
    /// Equal shares of full datasets under every structure defined at `p`.
    Pooled,
}

impl CalibrationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CalibrationMode::Identity => "identity",
            CalibrationMode::Matched => "matched",
            CalibrationMode::Pooled => "pooled",
        }
    }
}

impl fmt::Display for CalibrationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CalibrationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "identity" => Ok(CalibrationMode::Identity),
            "matched" => Ok(CalibrationMode::Matched),
            "pooled" => Ok(CalibrationMode::Pooled),
            _ => Err(Error::Config(format!("bad calibration mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Power,
    KRatio,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub scale: Scale,
    pub sigma_id: u8,
    pub p: usize,
    pub n1: usize,
    pub n2: usize,
    pub runs: usize,
    pub m: usize,
    pub big_k: usize,
    pub alpha: f64,
    pub seed: u64,
    pub k: KChoice,
    pub methods: Vec<Method>,
    pub alternatives: Vec<u8>,
    pub sparsities: Vec<f64>,
    pub include_null: bool,
    pub fixed_alternative: bool,
    pub calibration: CalibrationMode,
    /// Projection family for the single-projection k-ratio study.
    pub projection: ProjectionKind,
    pub k_grid: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let (runs, m, big_k) = Scale::Desk.defaults();
        Self {
            experiment: ExperimentKind::Power,
            scale: Scale::Desk,
            sigma_id: 1,
            p: 200,
            n1: 50,
            n2: 50,
            runs,
            m,
            big_k,
            alpha: 0.05,
            seed: 0,
            k: KChoice::Auto,
            methods: Method::ALL.to_vec(),
            alternatives: vec![1, 2],
            sparsities: vec![0.01, 0.05, 0.25, 0.5, 0.75],
            include_null: true,
            fixed_alternative: false,
            calibration: CalibrationMode::Identity,
            projection: ProjectionKind::Haar,
            k_grid: vec![10, 20, 30, 43, 60, 80],
        }
    }
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::Config(format!("bad entry {s:?} for {key}")))
        })
        .collect()
}

fn scalar<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("bad value {v:?} for {key}")))
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean {v:?} for {key}"))),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut cfg = Self::default();
        if let Some((_, v)) = pairs.iter().find(|(k, _)| k == "scale") {
            cfg.scale = match v.to_ascii_lowercase().as_str() {
                "desk" => Scale::Desk,
                "full" => Scale::Full,
                _ => return Err(Error::Config(format!("bad scale {v:?}"))),
            };
            (cfg.runs, cfg.m, cfg.big_k) = cfg.scale.defaults();
        }
        for (key, v) in &pairs {
            let v = v.as_str();
            match key.as_str() {
                "scale" => {}
                "experiment" => {
                    cfg.experiment = match v.to_ascii_lowercase().as_str() {
                        "power" => ExperimentKind::Power,
                        "k-ratio" | "kratio" | "k_ratio" => ExperimentKind::KRatio,
                        _ => return Err(Error::Config(format!("bad experiment {v:?}"))),
                    }
                }
                "sigma_id" | "sigma" => cfg.sigma_id = scalar(key, v)?,
                "p" => cfg.p = scalar(key, v)?,
                "n1" => cfg.n1 = scalar(key, v)?,
                "n2" => cfg.n2 = scalar(key, v)?,
                "runs" => cfg.runs = scalar(key, v)?,
                "m" => cfg.m = scalar(key, v)?,
                "K" => cfg.big_k = scalar(key, v)?,
                "alpha" => cfg.alpha = scalar(key, v)?,
                "seed" => cfg.seed = scalar(key, v)?,
                "k" => cfg.k = v.parse()?,
                "methods" => cfg.methods = list(key, v)?,
                "projection" => {
                    let kinds: Vec<ProjectionKind> = if v.eq_ignore_ascii_case("both") {
                        ProjectionKind::ALL.to_vec()
                    } else {
                        list(key, v)?
                    };
                    cfg.projection = *kinds
                        .first()
                        .ok_or_else(|| Error::Config("projection needs a value".into()))?;
                    cfg.methods.retain(|m| match m {
                        Method::Raptt(kind) => kinds.contains(kind),
                        _ => true,
                    });
                }
                "alternatives" => cfg.alternatives = list(key, v)?,
                "sparsities" => cfg.sparsities = list(key, v)?,
                "null" => cfg.include_null = boolean(key, v)?,
                "fixed_alternative" => cfg.fixed_alternative = boolean(key, v)?,
                "calibration" => cfg.calibration = v.parse()?,
                "k_grid" => cfg.k_grid = list(key, v)?,
                other => return Err(Error::Config(format!("unknown key {other:?}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.n1 < 2 || self.n2 < 2 {
            return Err(Error::Config("n1 and n2 must be at least 2".into()));
        }
        if self.alternatives.iter().any(|&a| a != 1 && a != 2) {
            return Err(Error::Config("alternatives must be 1 or 2".into()));
        }
        if self.experiment == ExperimentKind::KRatio && self.k_grid.is_empty() {
            return Err(Error::Config("k-ratio experiment needs a nonempty k_grid".into()));
        }
        self.raptt(ProjectionKind::Haar).validate()
    }

    pub fn raptt(&self, kind: ProjectionKind) -> RapttConfig {
        RapttConfig {
            m: self.m,
            k: self.k,
            kind,
            alpha: self.alpha,
            seed: self.seed,
        }
    }
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

/// Writes a file that parses back to the same configuration.
impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let experiment = match self.experiment {
            ExperimentKind::Power => "power",
            ExperimentKind::KRatio => "k-ratio",
        };
        let scale = match self.scale {
            Scale::Desk => "desk",
            Scale::Full => "full",
        };
        writeln!(f, "experiment = {experiment}")?;
        writeln!(f, "scale = {scale}")?;
        writeln!(f, "sigma_id = {}", self.sigma_id)?;
        writeln!(f, "p = {}", self.p)?;
        writeln!(f, "n1 = {}", self.n1)?;
        writeln!(f, "n2 = {}", self.n2)?;
        writeln!(f, "runs = {}", self.runs)?;
        writeln!(f, "m = {}", self.m)?;
        writeln!(f, "K = {}", self.big_k)?;
        writeln!(f, "alpha = {}", self.alpha)?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "k = {}", self.k)?;
        writeln!(f, "projection = {}", self.projection)?;
        writeln!(f, "methods = {}", join(&self.methods))?;
        writeln!(f, "alternatives = {}", join(&self.alternatives))?;
        writeln!(f, "sparsities = {}", join(&self.sparsities))?;
        writeln!(f, "null = {}", self.include_null)?;
        writeln!(f, "fixed_alternative = {}", self.fixed_alternative)?;
        writeln!(f, "calibration = {}", self.calibration)?;
        write!(f, "k_grid = {}", join(&self.k_grid))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_echo_round_trip() {
        let text = "# comment\nscale = full\nsigma_id = 2\nm = 50 # override\ncalibration = pooled\nmethods = raptt-haar, cq, bs\nsparsities = 0.5\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!((cfg.runs, cfg.m, cfg.big_k), (1000, 50, 10000));
        assert_eq!(cfg.calibration, CalibrationMode::Pooled);
        assert_eq!(cfg.methods, vec![Method::Raptt(ProjectionKind::Haar), Method::Cq, Method::Bs]);
        let again = ExperimentConfig::parse(&cfg.to_string()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn projection_filters_raptt_methods() {
        let cfg = ExperimentConfig::parse("projection = block").unwrap();
        assert!(!cfg.methods.contains(&Method::Raptt(ProjectionKind::Haar)));
        assert!(cfg.methods.contains(&Method::Raptt(ProjectionKind::Block)));
        assert_eq!(cfg.projection, ProjectionKind::Block);
    }

    #[test]
    fn bad_files() {
        assert!(ExperimentConfig::parse("nonsense").is_err());
        assert!(ExperimentConfig::parse("colour = red").is_err());
        assert!(ExperimentConfig::parse("runs = 0").is_err());
        assert!(ExperimentConfig::parse("methods = xyz").is_err());
        assert!(ExperimentConfig::parse("experiment = k-ratio\nk_grid = ").is_err());
    }
}
