//! Layered configuration: a TOML file, then command-line flags on top.

use std::path::Path;

use anticonc::distributions::DistributionSpec;
use anticonc::{Error, Result};
use serde::de::DeserializeOwned;
use toml::{Table, Value};

/// The config table of a run, built from an optional file and flag overrides.
#[derive(Debug, Default)]
pub struct Layers {
    table: Table,
}

impl Layers {
    pub fn from_file(path: Option<&Path>) -> Result<Layers> {
        let Some(path) = path else {
            return Ok(Layers::default());
        };
        let text = read(path)?;
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config(anticonc::distributions::toml_error_path(&e), e.message().to_string()))?;
        Ok(Layers { table })
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.table.insert(key.to_string(), value.into());
    }

    pub fn set_opt<T: Into<Value>>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.set(key, v);
        }
    }

    pub fn set_table(&mut self, key: &str, table: Table) {
        self.table.insert(key.to_string(), Value::Table(table));
    }

    /// `key.sub = value` inside a nested table.
    pub fn set_nested(&mut self, key: &str, sub: &str, value: impl Into<Value>) {
        let entry = self.table.entry(key.to_string()).or_insert_with(|| Value::Table(Table::new()));
        if let Value::Table(t) = entry {
            t.insert(sub.to_string(), value.into());
        }
    }

    /// Deserializes with unknown keys rejected; errors carry the key path.
    pub fn resolve<T: DeserializeOwned>(self) -> Result<T> {
        serde_path_to_error::deserialize(Value::Table(self.table)).map_err(|e| {
            let mut path = e.path().to_string();
            let msg = e.inner().message().to_string();
            // internally tagged enums stop the path at the enum; the message names the key
            if let Some(k) = backticked(&msg) {
                if !path.ends_with(&k) && msg.starts_with("unknown field") {
                    path = if path == "." { k } else { format!("{path}.{k}") };
                }
            }
            Error::config(path, msg)
        })
    }
}

fn backticked(msg: &str) -> Option<String> {
    let start = msg.find('`')?;
    let len = msg[start + 1..].find('`')?;
    Some(msg[start + 1..start + 1 + len].to_string())
}

pub fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::config(path.display().to_string(), format!("cannot read: {e}")))
}

/// `1,2,3` inline, or `@path` to a file with one decimal per line.
pub fn vector(flag: &str, text: &str) -> Result<Vec<f64>> {
    if let Some(path) = text.strip_prefix('@') {
        let v = anticonc::CoefficientVector::parse(&read(Path::new(path))?).map_err(|e| prefix(flag, e))?;
        return Ok(v.entries().to_vec());
    }
    text.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .enumerate()
        .map(|(i, s)| {
            s.parse()
                .map_err(|_| Error::config(format!("{flag}[{i}]"), format!("not a real number: {s:?}")))
        })
        .collect()
}

fn prefix(flag: &str, e: Error) -> Error {
    match e {
        Error::Config { path, reason } => Error::config(format!("{flag}:{path}"), reason),
        other => other,
    }
}

pub fn vector_value(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| Value::Float(x)).collect())
}

/// A family name with default parameters, or a path to a TOML file holding
/// a distribution table.
pub fn dist_table(text: &str) -> Result<Table> {
    let spec = match text {
        "rademacher" => DistributionSpec::Rademacher,
        "gaussian" => DistributionSpec::gaussian(1.0),
        "laplace" => DistributionSpec::laplace(1.0),
        "uniform" => DistributionSpec::Uniform {
            lo: -3f64.sqrt(),
            hi: 3f64.sqrt(),
        },
        path => {
            let text = read(Path::new(path))?;
            return text.parse().map_err(|e: toml::de::Error| {
                Error::config(
                    format!("dist.{}", anticonc::distributions::toml_error_path(&e)),
                    e.message().to_string(),
                )
            });
        }
    };
    match Value::try_from(&spec) {
        Ok(Value::Table(t)) => Ok(t),
        _ => Err(Error::Numeric("distribution did not serialize to a table".into())),
    }
}

/// `NAME=VALUE` constant overrides.
pub fn constant(text: &str) -> Result<(String, f64)> {
    let (k, v) = text
        .split_once('=')
        .ok_or_else(|| Error::config("const", format!("expected NAME=VALUE, got {text:?}")))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("constants.{}", k.trim()), format!("not a real number: {v:?}")))?;
    Ok((k.trim().to_string(), v))
}

/// Re-validates a distribution after deserialization, prefixing key paths.
pub fn check_dist(spec: &DistributionSpec) -> Result<()> {
    spec.validate().map_err(|e| match e {
        Error::Config { path, reason } => Error::config(format!("dist.{path}"), reason),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, serde::Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Probe {
        a: f64,
        #[serde(default)]
        inner: Option<Inner>,
    }

    #[derive(Debug, serde::Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Inner {
        k: f64,
    }

    #[test]
    fn later_layers_win() {
        let mut l = Layers::default();
        l.set("a", 1.0);
        l.set("a", 2.0);
        l.set_nested("inner", "k", 3.0);
        let p: Probe = l.resolve().unwrap();
        assert_eq!(p.a, 2.0);
        assert_eq!(p.inner.unwrap().k, 3.0);
    }

    #[test]
    fn errors_carry_key_paths() {
        let mut l = Layers::default();
        l.set("a", 1.0);
        l.set_nested("inner", "j", 3.0);
        match l.resolve::<Probe>() {
            Err(Error::Config { path, .. }) => assert_eq!(path, "inner.j"),
            other => panic!("{other:?}"),
        }
        let mut l = Layers::default();
        l.set("a", "x");
        match l.resolve::<Probe>() {
            Err(Error::Config { path, .. }) => assert_eq!(path, "a"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn vectors_and_constants_parse() {
        assert_eq!(vector("alpha", "1, -2.5,3e-1").unwrap(), vec![1.0, -2.5, 0.3]);
        assert!(matches!(vector("beta", "1,,z"), Err(Error::Config { path, .. }) if path == "beta[1]"));
        assert_eq!(constant("C_conj = 0.5").unwrap(), ("C_conj".to_string(), 0.5));
        assert!(constant("C").is_err());
    }

    #[test]
    fn shorthand_distributions_are_valid() {
        for name in ["rademacher", "gaussian", "laplace", "uniform"] {
            let t = dist_table(name).unwrap();
            let spec: DistributionSpec = Value::Table(t).try_into().unwrap();
            check_dist(&spec).unwrap();
        }
    }
}
