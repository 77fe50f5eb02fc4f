//! Config-file overlay and small parsers shared by the subcommands.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::args::{
    FitEnsembleArgs, FitSingleArgs, ImbalanceArgs, LocalizeArgs, MwAngleArgs, SimulateArgs,
};
use crate::error::{CliError, Result};

/// One optional section per subcommand.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub simulate: Option<SimulateArgs>,
    pub fit_ensemble: Option<FitEnsembleArgs>,
    pub fit_single: Option<FitSingleArgs>,
    pub imbalance: Option<ImbalanceArgs>,
    pub localize: Option<LocalizeArgs>,
    pub mw_angle: Option<MwAngleArgs>,
}

pub fn load(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    toml::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: e.span().map(|s| text[..s.start].lines().count()).unwrap_or(0),
        message: e.message().to_string(),
    })
}

/// Fill unset CLI fields from the config-file section.
macro_rules! overlay {
    ($cli:expr, $file:expr, [$($field:ident),* $(,)?]) => {
        if let Some(file) = $file {
            $(
                if $cli.$field.is_none() {
                    $cli.$field = file.$field.clone();
                }
            )*
        }
    };
}
pub(crate) use overlay;

/// Default output directory for relative paths (NVCHARGE_OUT_DIR).
pub fn resolve_out_path(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os("NVCHARGE_OUT_DIR") {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

pub fn parse_grid(spec: &str) -> Result<nvcharge::FrequencyGrid> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Usage(format!(
            "grid must be start:stop:points, got '{spec}'"
        )));
    }
    let start: f64 = parse_num(parts[0], "grid start")?;
    let stop: f64 = parse_num(parts[1], "grid stop")?;
    let points: usize = parts[2]
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("grid points must be an integer, got '{}'", parts[2])))?;
    Ok(nvcharge::FrequencyGrid::new(start, stop, points)?)
}

pub fn parse_realizations(spec: &str) -> Result<(usize, usize)> {
    let parse = |s: &str| -> Result<usize> {
        s.trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("realization count must be an integer, got '{s}'")))
    };
    match spec.split_once(['x', 'X']) {
        Some((a, b)) => Ok((parse(a)?, parse(b)?)),
        None => {
            let n = parse(spec)?;
            Ok((n, n))
        }
    }
}

/// A scan grid: either "lo:hi:count" (linear, inclusive) or a comma list.
pub fn parse_scan_grid(spec: &str) -> Result<Vec<f64>> {
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::Usage(format!(
                "scan grid must be lo:hi:count or a comma list, got '{spec}'"
            )));
        }
        let lo: f64 = parse_num(parts[0], "scan lo")?;
        let hi: f64 = parse_num(parts[1], "scan hi")?;
        let count: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("scan count must be an integer, got '{}'", parts[2])))?;
        if count < 2 || !(hi > lo) {
            return Err(CliError::Usage(format!("scan grid '{spec}' is not increasing")));
        }
        let step = (hi - lo) / (count - 1) as f64;
        Ok((0..count).map(|i| lo + step * i as f64).collect())
    } else {
        spec.split(',').map(|s| parse_num(s, "scan value")).collect()
    }
}

pub fn parse_num(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("{what} must be a number, got '{s}'")))
}

/// "VALUE" or "VALUE,SIGMA".
pub fn parse_measured(spec: &str, what: &str) -> Result<nvcharge::localize::Measured> {
    match spec.split_once(',') {
        Some((v, s)) => Ok(nvcharge::localize::Measured::new(
            parse_num(v, what)?,
            parse_num(s, what)?,
        )),
        None => Ok(nvcharge::localize::Measured::exact(parse_num(spec, what)?)),
    }
}

pub fn parse_triple(spec: &str, what: &str) -> Result<nalgebra::Vector3<f64>> {
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() != 3 {
        return Err(CliError::Usage(format!(
            "{what} must be three comma-separated numbers, got '{spec}'"
        )));
    }
    Ok(nalgebra::Vector3::new(
        parse_num(parts[0], what)?,
        parse_num(parts[1], what)?,
        parse_num(parts[2], what)?,
    ))
}

pub fn parse_hyperfine(spec: &str) -> Result<nvcharge::synth::HyperfineInclude> {
    match spec {
        "n14" | "n14_three_lines" => Ok(nvcharge::synth::HyperfineInclude::N14ThreeLines),
        "none" => Ok(nvcharge::synth::HyperfineInclude::None),
        other => Err(CliError::Usage(format!(
            "hyperfine must be 'n14' or 'none', got '{other}'"
        ))),
    }
}

pub fn parse_nv_axis(spec: &str) -> Result<nvcharge::localize::NvAxis> {
    use nvcharge::localize::NvAxis;
    match spec {
        "111" => Ok(NvAxis::Axis111),
        "-1-11" => Ok(NvAxis::AxisM1M11),
        "-11-1" => Ok(NvAxis::AxisM11M1),
        "1-1-1" => Ok(NvAxis::Axis1M1M1),
        other => Err(CliError::Usage(format!(
            "nv-axis must be one of 111, -1-11, -11-1, 1-1-1; got '{other}'"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_and_lists() {
        let g = parse_grid("2860:2880:201").unwrap();
        assert_eq!((g.start, g.stop, g.n_points), (2860.0, 2880.0, 201));
        assert!(parse_grid("1:2").is_err());
        assert_eq!(parse_realizations("400x100").unwrap(), (400, 100));
        assert_eq!(parse_realizations("250").unwrap(), (250, 250));
        assert_eq!(parse_scan_grid("1:3:3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(parse_scan_grid("4,5.5").unwrap(), vec![4.0, 5.5]);
    }

    #[test]
    fn measured_values() {
        let m = parse_measured("0.65,0.01", "pi").unwrap();
        assert_eq!((m.value, m.sigma), (0.65, 0.01));
        let m = parse_measured("0.65", "pi").unwrap();
        assert_eq!((m.value, m.sigma), (0.65, 0.0));
    }

    #[test]
    fn out_dir_applies_to_relative_paths() {
        std::env::set_var("NVCHARGE_OUT_DIR", "/tmp/nvout");
        assert_eq!(
            resolve_out_path(Path::new("a.csv")),
            PathBuf::from("/tmp/nvout/a.csv")
        );
        assert_eq!(
            resolve_out_path(Path::new("/abs/a.csv")),
            PathBuf::from("/abs/a.csv")
        );
        std::env::remove_var("NVCHARGE_OUT_DIR");
    }
}
