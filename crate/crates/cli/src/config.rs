//! Config loading: a TOML file overlaid with `--key value` flags.

use std::path::Path;

use anyhow::{bail, Context, Result};
use stts_core::ExperimentConfig;
use toml::{Table, Value};

/// Values of `p` that mean "uniform", i.e. `1 / num_arms`.
const UNIFORM_P: [&str; 3] = ["uniform", "none", "u"];

/// Parses trailing `--key value` / `--key=value` pairs. Dashes in keys become
/// underscores, so `--num-arms 20` and `--num_arms 20` are the same flag.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            bail!("expected a `--key value` override, found `{arg}`");
        };
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it.next().with_context(|| format!("flag `--{flag}` needs a value"))?;
                (flag.to_string(), v.clone())
            }
        };
        out.push((key.replace('-', "_"), value));
    }
    Ok(out)
}

/// Reads a bare override value as TOML (numbers, booleans, arrays), falling
/// back to a plain string.
fn override_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

pub fn apply_override(table: &mut Table, key: &str, raw: &str) {
    if key == "p" && UNIFORM_P.contains(&raw.to_ascii_lowercase().as_str()) {
        table.remove("p");
        return;
    }
    table.insert(key.to_string(), override_value(raw));
}

pub fn load_table(path: Option<&Path>) -> Result<Table> {
    match path {
        None => Ok(Table::new()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            text.parse::<Table>()
                .with_context(|| format!("parsing {}", p.display()))
        }
    }
}

/// Converts through JSON so integer literals are accepted for real-valued keys.
pub fn table_to_config(table: &Table) -> Result<ExperimentConfig> {
    let json = serde_json::to_value(table).context("converting config")?;
    let cfg: ExperimentConfig = serde_json::from_value(json).context("invalid config")?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: Option<&Path>, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let mut table = load_table(path)?;
    for (k, v) in overrides {
        apply_override(&mut table, k, v);
    }
    table_to_config(&table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use stts_core::{Algorithm, Scenario};

    fn args(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn overrides_both_spellings() {
        let o = parse_overrides(&args(&["--num-arms", "20", "--delta=0.05", "--algorithm", "vtts"])).unwrap();
        let cfg = load_config(None, &o).unwrap();
        assert_eq!(cfg.num_arms, 20);
        assert_eq!(cfg.delta, 0.05);
        assert_eq!(cfg.algorithm, Algorithm::Vtts);
    }

    #[test]
    fn integer_literal_for_real_key() {
        let o = parse_overrides(&args(&["--sigma0", "1", "--gap", "3"])).unwrap();
        let cfg = load_config(None, &o).unwrap();
        assert_eq!(cfg.sigma0, 1.0);
        assert_eq!(cfg.gap, 3.0);
    }

    #[test]
    fn uniform_p_clears_file_value() {
        let mut t: Table = "p = 0.7\nscenario = \"gaussian_u\"\nmu0 = 5".parse().unwrap();
        apply_override(&mut t, "p", "uniform");
        let cfg = table_to_config(&t).unwrap();
        assert_eq!(cfg.p, None);
        assert_eq!(cfg.scenario, Scenario::GaussianU);
        assert_eq!(cfg.mu0, 5.0);
    }

    #[test]
    fn unknown_key_and_bad_flag_rejected() {
        assert!(load_config(None, &[("num_armz".into(), "3".into())]).is_err());
        assert!(parse_overrides(&args(&["num_arms", "3"])).is_err());
        assert!(parse_overrides(&args(&["--num_arms"])).is_err());
    }

    #[test]
    fn invalid_value_rejected() {
        assert!(load_config(None, &[("delta".into(), "1.5".into())]).is_err());
    }
}
