//! Versioned CSV formats: spectra, imbalance curves, confidence clouds and
//! tidy plot data. All files are plain numeric CSV with `#` comment lines;
//! the first comment carries the schema tag, later ones the provenance.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nvcharge::localize::{ConfidenceCloud, ImbalanceCurve};
use nvcharge::spectrum::{FrequencyGrid, Spectrum};

use crate::error::{CliError, Result};

pub const SPECTRUM_SCHEMA: &str = "nvcharge-spectrum";
pub const CURVE_SCHEMA: &str = "nvcharge-curve";
pub const CLOUD_SCHEMA: &str = "nvcharge-cloud";
pub const PLOT_SCHEMA: &str = "nvcharge-plot";
pub const SCHEMA_MAJOR: u32 = 1;

fn schema_line(kind: &str) -> String {
    format!("# {kind} v{SCHEMA_MAJOR}\n")
}

/// Reject files written by a newer major schema version.
fn check_schema(path: &Path, kind: &str, first_line: &str) -> Result<()> {
    let Some(rest) = first_line.trim().strip_prefix('#') else {
        return Ok(()); // Unversioned file: treated as v1.
    };
    let rest = rest.trim();
    let Some(version) = rest.strip_prefix(kind).map(str::trim) else {
        // A comment, but not a schema tag for this kind.
        if rest.starts_with("nvcharge-") {
            return Err(CliError::Schema {
                path: path.to_path_buf(),
                found: rest.to_string(),
                supported: SCHEMA_MAJOR,
            });
        }
        return Ok(());
    };
    let major: u32 = version
        .strip_prefix('v')
        .and_then(|v| v.split('.').next())
        .and_then(|v| v.parse().ok())
        .unwrap_or(0);
    if major > SCHEMA_MAJOR {
        return Err(CliError::Schema {
            path: path.to_path_buf(),
            found: rest.to_string(),
            supported: SCHEMA_MAJOR,
        });
    }
    Ok(())
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(CliError::io(path))?;
        }
    }
    fs::write(path, contents).map_err(CliError::io(path))
}

pub fn write_spectrum(path: &Path, spectrum: &Spectrum, provenance: &str) -> Result<()> {
    let mut out = schema_line(SPECTRUM_SCHEMA);
    for line in provenance.lines() {
        let _ = writeln!(out, "# {line}");
    }
    let has_sigma = spectrum.sigma.is_some();
    out.push_str(if has_sigma {
        "frequency_mhz,contrast,sigma\n"
    } else {
        "frequency_mhz,contrast\n"
    });
    for i in 0..spectrum.grid.n_points {
        let _ = write!(out, "{},{}", spectrum.grid.value(i), spectrum.contrast[i]);
        if let Some(sigma) = &spectrum.sigma {
            let _ = write!(out, ",{}", sigma[i]);
        }
        out.push('\n');
    }
    write_atomic(path, &out)
}

struct CsvTable {
    header: Vec<String>,
    rows: Vec<(usize, Vec<f64>)>,
}

fn read_table(path: &Path, kind: &str) -> Result<CsvTable> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    let mut first_comment_checked = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if !first_comment_checked {
                check_schema(path, kind, line)?;
                first_comment_checked = true;
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if header.is_none() {
            header = Some(fields.iter().map(|s| s.to_string()).collect());
            continue;
        }
        let mut values = Vec::with_capacity(fields.len());
        for (col, field) in fields.iter().enumerate() {
            values.push(field.parse::<f64>().map_err(|_| CliError::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("column {} has a non-numeric value '{field}'", col + 1),
            })?);
        }
        rows.push((line_no, values));
    }
    let header = header.ok_or_else(|| CliError::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: "file has no header row".into(),
    })?;
    if rows.is_empty() {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "file has no data rows".into(),
        });
    }
    Ok(CsvTable { header, rows })
}

fn required_column(table: &CsvTable, path: &Path, name: &str) -> Result<usize> {
    table
        .header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!(
                "missing required column '{name}' (found: {})",
                table.header.join(", ")
            ),
        })
}

fn column(table: &CsvTable, path: &Path, index: usize) -> Result<Vec<f64>> {
    table
        .rows
        .iter()
        .map(|(line, values)| {
            values.get(index).copied().ok_or_else(|| CliError::Parse {
                path: path.to_path_buf(),
                line: *line,
                message: format!("row has {} columns, expected {}", values.len(), index + 1),
            })
        })
        .collect()
}

/// Read a spectrum CSV. `invert_contrast` maps raw fluorescence contrast
/// (dips below baseline) onto the dip-positive convention.
pub fn read_spectrum(path: &Path, invert_contrast: bool) -> Result<Spectrum> {
    let table = read_table(path, SPECTRUM_SCHEMA)?;
    let f_idx = required_column(&table, path, "frequency_mhz")?;
    let c_idx = required_column(&table, path, "contrast")?;
    let freqs = column(&table, path, f_idx)?;
    let mut contrast = column(&table, path, c_idx)?;
    let sigma = table
        .header
        .iter()
        .position(|h| h == "sigma")
        .map(|i| column(&table, path, i))
        .transpose()?;

    let n = freqs.len();
    if n < 2 {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "need at least two frequency points".into(),
        });
    }
    let spacing = (freqs[n - 1] - freqs[0]) / (n - 1) as f64;
    for (k, w) in freqs.windows(2).enumerate() {
        if ((w[1] - w[0]) - spacing).abs() > 1e-6 * spacing.abs().max(1e-12) {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                line: table.rows[k + 1].0,
                message: "frequency grid is not uniformly spaced".into(),
            });
        }
    }
    if invert_contrast {
        let max = contrast.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for c in &mut contrast {
            *c = max - *c;
        }
    }
    let grid = FrequencyGrid::new(freqs[0], freqs[n - 1], n).map_err(nvcharge::Error::from)?;
    let mut spectrum = Spectrum::new(grid, contrast).map_err(nvcharge::Error::from)?;
    if let Some(sigma) = sigma {
        spectrum = spectrum.with_sigma(sigma).map_err(nvcharge::Error::from)?;
    }
    Ok(spectrum)
}

pub fn read_curve(path: &Path) -> Result<ImbalanceCurve> {
    let table = read_table(path, CURVE_SCHEMA)?;
    let p_idx = required_column(&table, path, "phi_mw_deg")?;
    let i_idx = required_column(&table, path, "imbalance")?;
    let phi = column(&table, path, p_idx)?;
    let imb = column(&table, path, i_idx)?;
    let mut curve = ImbalanceCurve::new(phi, imb).map_err(nvcharge::Error::from)?;
    if let Some(idx) = table.header.iter().position(|h| h == "sigma") {
        curve = curve
            .with_sigma(column(&table, path, idx)?)
            .map_err(nvcharge::Error::from)?;
    }
    Ok(curve)
}

/// Sampled charge positions with the smallest confidence level holding each.
pub fn write_cloud(path: &Path, cloud: &ConfidenceCloud, provenance: &str) -> Result<()> {
    let mut out = schema_line(CLOUD_SCHEMA);
    for line in provenance.lines() {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str("x_nm,y_nm,z_nm,confidence_level\n");
    for (pos, &label) in cloud.positions.iter().zip(&cloud.labels) {
        let level = cloud
            .levels
            .get(label)
            .map(|l| l.to_string())
            .unwrap_or_else(|| "outside".into());
        let _ = writeln!(out, "{},{},{},{level}", pos.x, pos.y, pos.z);
    }
    write_atomic(path, &out)
}

/// Tidy long-format plot data: one (series, x, y) row per point.
pub fn write_plot_data(path: &Path, series: &[(&str, &[f64], &[f64])], provenance: &str) -> Result<()> {
    let mut out = schema_line(PLOT_SCHEMA);
    for line in provenance.lines() {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str("series,frequency_mhz,value\n");
    for (name, xs, ys) in series {
        for (x, y) in xs.iter().zip(*ys) {
            let _ = writeln!(out, "{name},{x},{y}");
        }
    }
    write_atomic(path, &out)
}
