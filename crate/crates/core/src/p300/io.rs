//! Plain-text export of calibration data and trained classifiers.

use std::path::Path;

use super::eeg::{EegEpoch, Label};
use super::swlda::{CalibStats, SwldaModel};
use crate::error::{Error, Result};

/// One row per epoch: `label` (1 target, 0 non-target) followed by
/// electrode-major samples `e{i}_s{j}`.
pub fn write_calibration(path: impl AsRef<Path>, data: &[EegEpoch]) -> Result<()> {
    let first = data.first().ok_or_else(|| Error::Parse("no epochs to write".into()))?;
    let mut w = csv::Writer::from_path(path.as_ref())?;
    let mut header = vec!["label".to_string()];
    for e in 0..first.n_electrodes {
        for s in 0..first.window_len {
            header.push(format!("e{e}_s{s}"));
        }
    }
    w.write_record(&header)?;
    for ep in data {
        if ep.values.len() != first.values.len() {
            return Err(Error::DimensionMismatch {
                expected: first.values.len(),
                got: ep.values.len(),
            });
        }
        let mut row = Vec::with_capacity(ep.values.len() + 1);
        row.push(if ep.label == Label::Target {
            "1".to_string()
        } else {
            "0".to_string()
        });
        row.extend(ep.values.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))
}

pub fn read_calibration(path: impl AsRef<Path>) -> Result<Vec<EegEpoch>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    let header = r.headers()?.clone();
    let mut n_electrodes = 0;
    let mut window_len = 0;
    for h in header.iter().skip(1) {
        let (e, s) = parse_feature_name(h)?;
        n_electrodes = n_electrodes.max(e + 1);
        window_len = window_len.max(s + 1);
    }
    if n_electrodes * window_len != header.len() - 1 {
        return Err(Error::Parse(
            "calibration header is not a full electrode x sample grid".into(),
        ));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let label = match rec.get(0) {
            Some("1") => Label::Target,
            Some("0") => Label::NonTarget,
            other => return Err(Error::Parse(format!("bad label {other:?}"))),
        };
        let values = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().map_err(|e| Error::Parse(format!("{v}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        out.push(EegEpoch {
            values,
            n_electrodes,
            window_len,
            label,
        });
    }
    Ok(out)
}

fn parse_feature_name(h: &str) -> Result<(usize, usize)> {
    let bad = || Error::Parse(format!("bad column name {h:?}"));
    let rest = h.strip_prefix('e').ok_or_else(bad)?;
    let (e, s) = rest.split_once("_s").ok_or_else(bad)?;
    Ok((e.parse().map_err(|_| bad())?, s.parse().map_err(|_| bad())?))
}

/// Rows of `(term, electrode, sample, value)`. `term` is `weight` for
/// selected features and names a scalar otherwise.
pub fn write_model(path: impl AsRef<Path>, model: &SwldaModel) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["term", "electrode", "sample", "value"])?;
    let shape = [
        "shape".to_string(),
        model.n_electrodes.to_string(),
        model.window_len.to_string(),
        String::new(),
    ];
    w.write_record(&shape)?;
    for (&(e, s), wt) in model.selected.iter().zip(&model.weights) {
        w.write_record(["weight".to_string(), e.to_string(), s.to_string(), wt.to_string()])?;
    }
    let c = &model.calib_stats;
    let scalars = [
        ("intercept", model.intercept),
        ("target_mean", c.target_mean),
        ("target_var", c.target_var),
        ("nontarget_mean", c.nontarget_mean),
        ("nontarget_var", c.nontarget_var),
        ("n_target", c.n_target as f64),
        ("n_nontarget", c.n_nontarget as f64),
    ];
    for (name, v) in scalars {
        w.write_record([name, "", "", &v.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))
}

pub fn read_model(path: impl AsRef<Path>) -> Result<SwldaModel> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    let mut model = SwldaModel {
        n_electrodes: 0,
        window_len: 0,
        selected: Vec::new(),
        weights: Vec::new(),
        intercept: 0.0,
        calib_stats: CalibStats {
            target_mean: 0.0,
            target_var: 0.0,
            nontarget_mean: 0.0,
            nontarget_var: 0.0,
            n_target: 0,
            n_nontarget: 0,
        },
    };
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s}: {e}")));
    let idx = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(format!("{s}: {e}")));
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let c = &mut model.calib_stats;
        match field(0) {
            "shape" => {
                model.n_electrodes = idx(field(1))?;
                model.window_len = idx(field(2))?;
            }
            "weight" => {
                model.selected.push((idx(field(1))?, idx(field(2))?));
                model.weights.push(num(field(3))?);
            }
            "intercept" => model.intercept = num(field(3))?,
            "target_mean" => c.target_mean = num(field(3))?,
            "target_var" => c.target_var = num(field(3))?,
            "nontarget_mean" => c.nontarget_mean = num(field(3))?,
            "nontarget_var" => c.nontarget_var = num(field(3))?,
            "n_target" => c.n_target = num(field(3))? as usize,
            "n_nontarget" => c.n_nontarget = num(field(3))? as usize,
            other => return Err(Error::Parse(format!("unknown model term {other:?}"))),
        }
    }
    if model.n_electrodes == 0 || model.window_len == 0 {
        return Err(Error::Parse("model file lacks a shape row".into()));
    }
    if model
        .selected
        .iter()
        .any(|&(e, s)| e >= model.n_electrodes || s >= model.window_len)
    {
        return Err(Error::Parse("selected feature outside the epoch shape".into()));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::p300::{train_swlda, EegConfig, EegSimulator, SwldaParams};
    use crate::rng::RngStream;

    #[test]
    fn calibration_and_model_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = EegConfig {
            n_electrodes: 4,
            window_len: 10,
            ..Default::default()
        };
        let sim = EegSimulator::new(cfg).unwrap();
        let mut rng = RngStream::from_seed(1);
        let data = sim.generate_calibration(60, 120, &mut rng).unwrap();
        let cpath = dir.path().join("calib.csv");
        write_calibration(&cpath, &data).unwrap();
        assert_eq!(read_calibration(&cpath).unwrap(), data);

        let model = train_swlda(&data, &SwldaParams::default(), &mut rng).unwrap();
        let mpath = dir.path().join("model.csv");
        write_model(&mpath, &model).unwrap();
        assert_eq!(read_model(&mpath).unwrap(), model);
    }

    #[test]
    fn malformed_files_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "term,electrode,sample,value\nbogus,,,1\n").unwrap();
        assert!(read_model(&p).is_err());
        std::fs::write(&p, "label,e0_s0,e0_s1\n2,0.1,0.2\n").unwrap();
        assert!(read_calibration(&p).is_err());
    }
}
