//! INI layering, value parsing and the canonical config hash.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use decoupling_core::caps::{DyadicRational, FamilyKind};
use decoupling_core::harness::{Ensemble, RhsWeight};
use ini::Ini;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Values from the config file: the unnamed section first, then the
/// section named after the command.
#[derive(Debug, Default)]
pub struct Layer {
    values: BTreeMap<String, String>,
}

impl Layer {
    pub fn load(path: Option<&Path>, section: &str) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Layer::default());
        };
        let ini = Ini::load_from_file(path).map_err(|e| match e {
            ini::Error::Io(io) => CliError::io(path, io),
            ini::Error::Parse(p) => CliError::Config(format!("{}: {p}", path.display())),
        })?;
        let mut values = BTreeMap::new();
        for sec in [None, Some(section)] {
            if let Some(props) = ini.section(sec) {
                for (k, v) in props.iter() {
                    values.insert(k.trim().to_ascii_lowercase().replace('-', "_"), v.trim().to_string());
                }
            }
        }
        Ok(Layer { values })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(&key.to_ascii_lowercase()).map(String::as_str)
    }

    /// Flag value if given, else the file value, else `None`.
    pub fn pick<'a>(&'a self, flag: &'a Option<String>, key: &str) -> Option<&'a str> {
        flag.as_deref().or_else(|| self.get(key))
    }

    pub fn flag(&self, flag: bool, key: &str) -> CliResult<bool> {
        if flag {
            return Ok(true);
        }
        match self.get(key) {
            None => Ok(false),
            Some(v) => match v.to_ascii_lowercase().as_str() {
                "1" | "true" | "yes" | "on" => Ok(true),
                "0" | "false" | "no" | "off" => Ok(false),
                _ => Err(CliError::Config(format!("{key}: expected a boolean, got '{v}'"))),
            },
        }
    }
}

fn bad(key: &str, v: &str, what: &str) -> CliError {
    CliError::Config(format!("{key}: '{v}' is not {what}"))
}

/// `256` or `2^8`.
pub fn parse_u64(key: &str, v: &str) -> CliResult<u64> {
    let v = v.trim();
    if let Some((b, e)) = v.split_once('^') {
        let b: u64 = b.trim().parse().map_err(|_| bad(key, v, "an integer"))?;
        let e: u32 = e.trim().parse().map_err(|_| bad(key, v, "an integer"))?;
        return b.checked_pow(e).ok_or_else(|| bad(key, v, "a representable integer"));
    }
    v.parse().map_err(|_| bad(key, v, "an integer"))
}

pub fn parse_usize(key: &str, v: &str) -> CliResult<usize> {
    parse_u64(key, v).map(|x| x as usize)
}

/// `3.5` or a fraction such as `10/3`.
pub fn parse_f64(key: &str, v: &str) -> CliResult<f64> {
    let v = v.trim();
    let x = match v.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad(key, v, "a number"))?;
            let b: f64 = b.trim().parse().map_err(|_| bad(key, v, "a number"))?;
            a / b
        }
        None => v.parse().map_err(|_| bad(key, v, "a number"))?,
    };
    if x.is_finite() {
        Ok(x)
    } else {
        Err(bad(key, v, "a finite number"))
    }
}

/// A power of two given as `1/4`, `0.25` or `2^-2`.
pub fn parse_dyadic(key: &str, v: &str) -> CliResult<DyadicRational> {
    let t = v.trim();
    let x = match t.strip_prefix("2^") {
        Some(e) => 2f64.powi(e.trim().parse().map_err(|_| bad(key, v, "a power of two"))?),
        None => parse_f64(key, t)?,
    };
    let e = x.log2().round();
    if x > 0.0 && 2f64.powi(e as i32) == x {
        Ok(DyadicRational::pow2(e as i32))
    } else {
        Err(bad(key, v, "a power of two"))
    }
}

/// Split on commas or semicolons outside parentheses and brackets.
pub fn split_list(v: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in v.chars() {
        match ch {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            _ => {}
        }
        if (ch == ',' || ch == ';') && depth == 0 {
            out.push(std::mem::take(&mut cur));
        } else {
            cur.push(ch);
        }
    }
    out.push(cur);
    out.into_iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

pub fn parse_list<T>(key: &str, v: &str, f: impl Fn(&str, &str) -> CliResult<T>) -> CliResult<Vec<T>> {
    let items = split_list(v);
    if items.is_empty() {
        return Err(CliError::Config(format!("{key}: empty list")));
    }
    items.iter().map(|s| f(key, s)).collect()
}

pub fn parse_kind(v: &str) -> CliResult<FamilyKind> {
    Ok(FamilyKind::parse(v)?)
}

pub fn parse_ensembles(v: &str) -> CliResult<Vec<Ensemble>> {
    parse_list("ensembles", v, |_, s| Ensemble::parse(s, 0).map_err(Into::into))
}

pub fn parse_weight(v: &str) -> CliResult<RhsWeight> {
    Ok(RhsWeight::parse(v)?)
}

/// First 16 hex digits of the SHA-256 of the canonical JSON form.
pub fn config_hash<T: Serialize>(command: &str, cfg: &T) -> String {
    let text = canonical_json(command, cfg);
    let digest = Sha256::digest(text.as_bytes());
    hex::encode(digest)[..16].to_string()
}

pub fn canonical_json<T: Serialize>(command: &str, cfg: &T) -> String {
    #[derive(Serialize)]
    struct Tagged<'a, T> {
        command: &'a str,
        config: &'a T,
    }
    serde_json::to_string(&Tagged { command, config: cfg }).expect("config serializes")
}

/// `--out` if given, else `<root>/<hash>` with the root from
/// `--results-dir`, `DECOUP_RESULTS_DIR` or `results`.
pub fn output_dir(out: Option<&Path>, results_root: Option<&Path>, hash: &str) -> PathBuf {
    if let Some(o) = out {
        return o.to_path_buf();
    }
    let root = results_root
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os("DECOUP_RESULTS_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"));
    root.join(hash)
}
