//! Flat TOML experiment configuration.

use std::path::PathBuf;

use fpp_core::PassageLaw;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("config key `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key, reason: reason.into() }
}

/// Keys as written in the file; everything optional.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub law: Option<String>,
    pub d: Option<usize>,
    pub n: Option<Vec<i64>>,
    pub n_min: Option<i64>,
    pub n_max: Option<i64>,
    pub dyadic: Option<bool>,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub c3: Option<f64>,
    pub out: Option<PathBuf>,
    pub x: Option<Vec<i32>>,
    pub window: Option<i32>,
    pub k: Option<usize>,
    pub n1: Option<i32>,
    pub h_n: Option<i32>,
    pub h_cap: Option<i32>,
    pub mu_n: Option<i64>,
    pub mu_samples: Option<u64>,
    pub geodesics: Option<u64>,
    pub m_max: Option<i32>,
    pub grid_min: Option<f64>,
    pub grid_max: Option<f64>,
    pub grid_count: Option<usize>,
    pub a_max: Option<f64>,
    pub dump_skeletons: Option<bool>,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub samples: Option<u64>,
    pub law: Option<String>,
    pub d: Option<usize>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

/// A validated configuration with every default filled in.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub law: PassageLaw,
    pub d: usize,
    pub n: Vec<i32>,
    pub samples: u64,
    pub seed: u64,
    pub workers: usize,
    pub c3: f64,
    pub out: PathBuf,
    pub x: Vec<i32>,
    pub window: i32,
    pub k: usize,
    pub n1: Option<i32>,
    pub h_n: Option<i32>,
    pub h_cap: i32,
    pub mu_n: i32,
    pub mu_samples: u64,
    pub geodesics: u64,
    pub m_max: i32,
    pub grid_min: Option<f64>,
    pub grid_max: Option<f64>,
    pub grid_count: usize,
    pub a_max: f64,
    pub dump_skeletons: bool,
}

pub fn parse_config(text: &str) -> Result<ConfigFile, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))
}

pub fn load_config(path: &std::path::Path) -> Result<ConfigFile, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
    parse_config(&text)
}

fn even_length(key: &'static str, v: i64) -> Result<i32, ConfigError> {
    let n = i32::try_from(v).map_err(|_| invalid(key, format!("{v} is out of range")))?;
    if n < 2 || n % 2 != 0 {
        return Err(invalid(key, format!("n={n} must be a positive even integer")));
    }
    Ok(n)
}

impl ConfigFile {
    pub fn resolve(self, over: &Overrides, env_workers: Option<&str>) -> Result<ExperimentConfig, ConfigError> {
        let law_text = over.law.clone().or(self.law).unwrap_or_else(|| "exp:rate=1".into());
        let law: PassageLaw = law_text.parse().map_err(|e: fpp_core::LawError| invalid("law", e.to_string()))?;
        let d = over.d.or(self.d).unwrap_or(1);
        if !(1..=fpp_core::field::MAX_FIELD_DIM).contains(&d) {
            return Err(invalid("d", format!("d={d} must be between 1 and {}", fpp_core::field::MAX_FIELD_DIM)));
        }
        let n = match self.n {
            Some(list) => {
                if self.n_min.is_some() || self.n_max.is_some() {
                    return Err(invalid("n", "give either `n` or `n_min`/`n_max`, not both"));
                }
                if list.is_empty() {
                    return Err(invalid("n", "list is empty"));
                }
                list.into_iter().map(|v| even_length("n", v)).collect::<Result<Vec<_>, _>>()?
            }
            None => {
                let lo = even_length("n_min", self.n_min.unwrap_or(8))?;
                let hi = even_length("n_max", self.n_max.unwrap_or(256))?;
                if hi < lo {
                    return Err(invalid("n_max", format!("{hi} is below n_min={lo}")));
                }
                let mut out = vec![lo];
                if self.dyadic.unwrap_or(true) {
                    while let Some(next) = out.last().unwrap().checked_mul(2).filter(|v| *v <= hi) {
                        out.push(next);
                    }
                } else {
                    out = (lo..=hi).step_by(2).collect();
                }
                out
            }
        };
        let samples = over.samples.or(self.samples).unwrap_or(1000);
        if samples < 1 {
            return Err(invalid("samples", "must be at least 1"));
        }
        let env = match env_workers {
            Some(s) => Some(s.trim().parse::<usize>().map_err(|_| invalid("workers", format!("FPP_WORKERS={s:?} is not a count")))?),
            None => None,
        };
        let workers = over.workers.or(self.workers).or(env).unwrap_or(1);
        if workers < 1 {
            return Err(invalid("workers", "must be at least 1"));
        }
        let c3 = self.c3.unwrap_or(1.0);
        if !(c3 > 0.0 && c3.is_finite()) {
            return Err(invalid("c3", format!("{c3} must be positive")));
        }
        let x = self.x.unwrap_or_else(|| vec![0; d]);
        if x.len() != d {
            return Err(invalid("x", format!("has {} coordinates, d={d}", x.len())));
        }
        let window = self.window.unwrap_or(16);
        if window < 0 {
            return Err(invalid("window", "must be nonnegative"));
        }
        let k = self.k.unwrap_or(32);
        if k < 1 {
            return Err(invalid("k", "must be at least 1"));
        }
        if let Some(n1) = self.n1 {
            if n1 <= 0 || n1 % 2 != 0 {
                return Err(invalid("n1", format!("{n1} must be a positive even integer")));
            }
        }
        if let Some(h) = self.h_n {
            if h < 0 {
                return Err(invalid("h_n", "must be nonnegative"));
            }
        }
        let max_n = *n.iter().max().unwrap();
        let h_cap = self.h_cap.unwrap_or(n[0]);
        if h_cap < 0 {
            return Err(invalid("h_cap", "must be nonnegative"));
        }
        let mu_n = even_length("mu_n", self.mu_n.unwrap_or(2 * i64::from(max_n)))?;
        let mu_samples = self.mu_samples.unwrap_or(samples);
        if mu_samples < 2 {
            return Err(invalid("mu_samples", "must be at least 2"));
        }
        let m_max = self.m_max.unwrap_or(8);
        if !(1..=12).contains(&m_max) {
            return Err(invalid("m_max", format!("{m_max} must lie in 1..=12 for enumeration")));
        }
        let grid_count = self.grid_count.unwrap_or(200);
        if grid_count < 2 {
            return Err(invalid("grid_count", "must be at least 2"));
        }
        if let (Some(a), Some(b)) = (self.grid_min, self.grid_max) {
            if !(a < b) {
                return Err(invalid("grid_max", format!("{b} must exceed grid_min={a}")));
            }
        }
        let a_max = self.a_max.unwrap_or(fpp_core::nearly_gamma::DEFAULT_A_MAX);
        if !(a_max > 0.0) {
            return Err(invalid("a_max", "must be positive"));
        }
        Ok(ExperimentConfig {
            law,
            d,
            n,
            samples,
            seed: over.seed.or(self.seed).unwrap_or(0),
            workers,
            c3,
            out: over.out.clone().or(self.out).unwrap_or_else(|| PathBuf::from("fpp-out")),
            x,
            window,
            k,
            n1: self.n1,
            h_n: self.h_n,
            h_cap,
            mu_n,
            mu_samples,
            geodesics: self.geodesics.unwrap_or(100),
            m_max,
            grid_min: self.grid_min,
            grid_max: self.grid_max,
            grid_count,
            a_max,
            dump_skeletons: self.dump_skeletons.unwrap_or(false),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(text: &str) -> Result<ExperimentConfig, ConfigError> {
        parse_config(text)?.resolve(&Overrides::default(), None)
    }

    #[test]
    fn minimal_document_gets_defaults() {
        let c = resolve("").unwrap();
        assert_eq!(c.n, vec![8, 16, 32, 64, 128, 256]);
        assert_eq!((c.d, c.samples, c.seed, c.workers), (1, 1000, 0, 1));
        assert_eq!(c.law, PassageLaw::exponential(1.0));
        assert_eq!(c.mu_n, 512);
    }

    #[test]
    fn errors_name_the_key() {
        let e = resolve("n = [8, 9]").unwrap_err().to_string();
        assert!(e.contains("`n`") && e.contains("even"), "{e}");
        let e = resolve("law = \"exp:rate=-1\"").unwrap_err().to_string();
        assert!(e.contains("`law`"), "{e}");
        let e = resolve("bogus = 1").unwrap_err().to_string();
        assert!(e.contains("bogus"), "{e}");
        assert!(resolve("d = 2\nx = [1]").is_err());
        assert!(resolve("n_min = 7").is_err());
    }

    #[test]
    fn overrides_win() {
        let over = Overrides { seed: Some(9), workers: Some(3), law: Some("const:value=1".into()), ..Default::default() };
        let c = parse_config("seed = 1\nworkers = 2").unwrap().resolve(&over, Some("5")).unwrap();
        assert_eq!((c.seed, c.workers), (9, 3));
        let c = parse_config("").unwrap().resolve(&Overrides::default(), Some("5")).unwrap();
        assert_eq!(c.workers, 5);
        let c = parse_config("n_min = 4\nn_max = 10\ndyadic = false").unwrap().resolve(&Overrides::default(), None).unwrap();
        assert_eq!(c.n, vec![4, 6, 8, 10]);
    }
}
