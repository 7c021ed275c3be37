//! Flat `key = value` configuration files with bracketed section headers.
//! Nested structure is spelled with dotted keys (`factor1.kind = cantor`),
//! keeping the parser dependency-free and the diffs reviewable.

use fractint_core::construct::{Construction, SurfaceKind};
use fractint_core::mapspec::PhiFamily;
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "config line {}: {}", n, self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: Option<usize>, message: impl Into<String>) -> ConfigError {
    ConfigError { line, message: message.into() }
}

/// Parsed config: sections of key/value pairs, in canonical order.
#[derive(Debug, Clone, Default)]
pub struct Config {
    sections: BTreeMap<String, BTreeMap<String, (usize, String)>>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let mut cfg = Config::default();
        let mut current = String::from("run");
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| err(Some(line_no), "unterminated section header"))?;
                current = name.trim().to_string();
                cfg.sections.entry(current.clone()).or_default();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(Some(line_no), "expected `key = value`"))?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(err(Some(line_no), "empty key"));
            }
            let section = cfg.sections.entry(current.clone()).or_default();
            if section.insert(key.clone(), (line_no, value)).is_some() {
                return Err(err(Some(line_no), format!("duplicate key `{key}`")));
            }
        }
        Ok(cfg)
    }

    /// Canonical text form used for hashing: sorted sections and keys.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (name, section) in &self.sections {
            out.push_str(&format!("[{name}]\n"));
            for (key, (_, value)) in section {
                out.push_str(&format!("{key} = {value}\n"));
            }
        }
        out
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(|(_, v)| v.as_str())
    }

    fn line_of(&self, section: &str, key: &str) -> Option<usize> {
        self.sections.get(section)?.get(key).map(|(n, _)| *n)
    }

    pub fn require(&self, section: &str, key: &str) -> Result<&str, ConfigError> {
        self.get(section, key)
            .ok_or_else(|| err(None, format!("missing `{key}` in section [{section}]")))
    }

    pub fn parse_num<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let raw = self.require(section, key)?;
        raw.parse::<T>()
            .map_err(|e| err(self.line_of(section, key), format!("field `{key}`: {e}")))
    }

    pub fn parse_num_or<T: std::str::FromStr>(
        &self,
        section: &str,
        key: &str,
        default: T,
    ) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.get(section, key) {
            None => Ok(default),
            Some(raw) => raw
                .parse::<T>()
                .map_err(|e| err(self.line_of(section, key), format!("field `{key}`: {e}"))),
        }
    }

    /// Integer list: either `a..b` (inclusive) or a comma list.
    pub fn parse_u32_list(&self, section: &str, key: &str) -> Result<Vec<u32>, ConfigError> {
        let raw = self.require(section, key)?;
        let line = self.line_of(section, key);
        if let Some((a, b)) = raw.split_once("..") {
            let a: u32 = a.trim().parse().map_err(|e| err(line, format!("`{key}`: {e}")))?;
            let b: u32 = b.trim().parse().map_err(|e| err(line, format!("`{key}`: {e}")))?;
            if b < a {
                return Err(err(line, format!("`{key}`: empty range {a}..{b}")));
            }
            return Ok((a..=b).collect());
        }
        raw.split(',')
            .map(|t| t.trim().parse::<u32>().map_err(|e| err(line, format!("`{key}`: {e}"))))
            .collect()
    }

    /// A construction described by a section: `kind = ...` plus its
    /// parameters; products use dotted `factorN.` keys.
    pub fn parse_construction(&self, section: &str) -> Result<Construction, ConfigError> {
        let kind = self.require(section, "kind")?;
        self.construction_of(section, kind, "")
    }

    fn construction_of(
        &self,
        section: &str,
        kind: &str,
        prefix: &str,
    ) -> Result<Construction, ConfigError> {
        let num = |key: &str| -> Result<u32, ConfigError> {
            self.parse_num::<u32>(section, &format!("{prefix}{key}"))
        };
        let real = |key: &str| -> Result<f64, ConfigError> {
            self.parse_num::<f64>(section, &format!("{prefix}{key}"))
        };
        Ok(match kind {
            "cantor" => Construction::Cantor { p: num("p")?, n: num("n")? },
            "cantor-union" => Construction::CantorUnion { p: num("p")?, n: num("n")? },
            "lattice" => Construction::LatticeThickening { q: num("q")?, s: real("s")? },
            "paraboloid-lattice" => Construction::ParaboloidLattice { q: num("q")?, s: real("s")? },
            "sphere" => Construction::Surface(SurfaceKind::Sphere),
            "paraboloid-graph" => Construction::Surface(SurfaceKind::ParaboloidGraph),
            "superellipsoid" => Construction::Surface(SurfaceKind::Superellipsoid(num("m")?)),
            "hyperplane-patch" => Construction::Surface(SurfaceKind::HyperplanePatch),
            "box" => Construction::Box,
            "interval" => Construction::Interval,
            "product" => {
                let mut factors = Vec::new();
                for i in 1..=3 {
                    let key = format!("factor{i}.kind");
                    match self.get(section, &key) {
                        None => break,
                        Some(fkind) => {
                            factors.push(self.construction_of(
                                section,
                                fkind,
                                &format!("factor{i}."),
                            )?);
                        }
                    }
                }
                if factors.is_empty() {
                    return Err(err(None, format!("[{section}]: product needs factor1.kind")));
                }
                Construction::Product { factors }
            }
            other => return Err(err(None, format!("[{section}]: unknown kind `{other}`"))),
        })
    }

    /// A defining-function family named in `params`.
    pub fn parse_phi(&self, key: &str) -> Result<PhiFamily, ConfigError> {
        let raw = self.get("params", key).unwrap_or("distance");
        Ok(match raw {
            "distance" => PhiFamily::Distance,
            "dot" => PhiFamily::DotProduct,
            "paraboloid-offset" => PhiFamily::ParaboloidOffset,
            other => match other.strip_prefix("lm-norm-") {
                Some(m) => PhiFamily::LmNorm(
                    m.parse::<u32>()
                        .map_err(|e| err(None, format!("field `{key}`: {e}")))?,
                ),
                None => return Err(err(None, format!("field `{key}`: unknown family `{other}`"))),
            },
        })
    }

    /// Real-valued list: `a,b,c`.
    pub fn parse_f64_list(&self, section: &str, key: &str) -> Result<Vec<f64>, ConfigError> {
        let raw = self.require(section, key)?;
        let line = self.line_of(section, key);
        raw.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| err(line, format!("`{key}`: {e}"))))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_dotted_keys() {
        let text = "\n[run]\nexperiment = dims\nseed = 7\n\n[a]\nkind = product\nfactor1.kind = interval\nfactor2.kind = cantor\nfactor2.p = 2\nfactor2.n = 5\n";
        let cfg = Config::parse(text).unwrap();
        assert_eq!(cfg.get("run", "experiment"), Some("dims"));
        let c = cfg.parse_construction("a").unwrap();
        assert_eq!(
            c,
            Construction::Product {
                factors: vec![
                    Construction::Interval,
                    Construction::Cantor { p: 2, n: 5 }
                ]
            }
        );
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(Config::parse("[run\n").is_err());
        assert!(Config::parse("just words\n").is_err());
        let e = Config::parse("[run]\nx = 1\nx = 2\n").unwrap_err();
        assert_eq!(e.line, Some(3));
    }

    #[test]
    fn canonical_is_order_independent() {
        let a = Config::parse("[run]\nb = 2\na = 1\n").unwrap();
        let b = Config::parse("[run]\na = 1\nb = 2\n").unwrap();
        assert_eq!(a.canonical(), b.canonical());
    }

    #[test]
    fn ranges_and_lists() {
        let cfg = Config::parse("[params]\nladder = 4..8\nqs = 8,16,32\n").unwrap();
        assert_eq!(cfg.parse_u32_list("params", "ladder").unwrap(), vec![4, 5, 6, 7, 8]);
        assert_eq!(cfg.parse_u32_list("params", "qs").unwrap(), vec![8, 16, 32]);
    }
}
