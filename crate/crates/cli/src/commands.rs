//! Subcommand implementations. Each resolves its configuration (flags over
//! config file over defaults), optionally echoes it, runs the library call
//! and writes outputs with full provenance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::{Path, PathBuf};

use nvcharge::fit::{
    fit_high_field, fit_single_nv, fit_zero_field, EnsembleFitConfig, HighFieldFit,
    SingleNvFitConfig, SingleNvGuess, ZeroFieldFit,
};
use nvcharge::localize::{
    confidence_region, fit_imbalance_curve, localize_charge, mw_angle_uncertainty,
    reconstruct_field, microwave_polarization, EVector, Measured, NvOrientation, WireGeometry,
};
use nvcharge::presets::preset;
use nvcharge::synth::{
    ensemble_histogram, histogram_to_spectrum, single_nv_spectrum,
    EnsembleSimConfig, HyperfineModel, SingleNvConfig,
};
use nvcharge::FrequencyGrid;

use crate::args::*;
use crate::config::{self, overlay, FileConfig};
use crate::envelope::{read_payload, ResultEnvelope, Timing};
use crate::error::{CliError, Result};
use crate::io;

pub struct Ctx {
    pub file: FileConfig,
    pub print_config: bool,
    pub timing: bool,
}

impl Ctx {
    fn emit<C: Serialize, P: Serialize>(
        &self,
        command: &'static str,
        seed: u64,
        config: C,
        payload: P,
        out: &Path,
        started: std::time::Instant,
    ) -> Result<()> {
        let timing = self
            .timing
            .then(|| Timing {
                wall_seconds: started.elapsed().as_secs_f64(),
            });
        let envelope = ResultEnvelope::new(command, seed, config, payload).with_timing(timing);
        let path = config::resolve_out_path(out);
        envelope.write(&path)?;
        println!("wrote {}", path.display());
        Ok(())
    }

    /// Echo the resolved config as TOML and report whether to stop.
    fn maybe_print_config<C: Serialize>(&self, config: &C) -> bool {
        if self.print_config {
            print!(
                "{}",
                toml::to_string_pretty(config).expect("config serializes")
            );
        }
        self.print_config
    }
}

fn provenance<C: Serialize>(command: &str, seed: u64, config: &C) -> String {
    format!(
        "command: {command}\ntool_version: {}\nseed: {seed}\nconfig: {}",
        env!("CARGO_PKG_VERSION"),
        serde_json::to_string(config).expect("config serializes")
    )
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| CliError::Usage(format!("--{flag} is required (flag or config file)")))
}

// ── simulate ────────────────────────────────────────────────────────────

#[derive(Debug, Serialize)]
struct SimulateConfig {
    mode: &'static str,
    preset: Option<String>,
    rho_c: f64,
    rho_s: f64,
    gamma: f64,
    b_applied: f64,
    hyperfine: &'static str,
    grid: FrequencyGrid,
    charge_realizations: usize,
    spin_realizations: usize,
    seed: u64,
    noise: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    e_field_mv_per_m: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    phi_mw_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c13_mhz: Option<f64>,
    out: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    plot_data: Option<PathBuf>,
}

pub fn simulate(mut args: SimulateArgs, ctx: &Ctx) -> Result<()> {
    let started = std::time::Instant::now();
    overlay!(
        args,
        ctx.file.simulate.as_ref(),
        [
            preset,
            rho_c,
            rho_s,
            gamma,
            b_applied,
            hyperfine,
            grid,
            realizations,
            seed,
            noise,
            e_field,
            phi_mw,
            c13,
            out,
            plot_data
        ]
    );
    if !args.single_nv {
        if let Some(section) = &ctx.file.simulate {
            args.single_nv = section.single_nv;
        }
    }

    // Preset values fill anything not given explicitly.
    let preset_values = match &args.preset {
        Some(name) => Some(
            preset(name)
                .ok_or_else(|| CliError::Usage(format!("unknown preset '{name}' (S1..S6)")))?,
        ),
        None => None,
    };
    let rho_c = args.rho_c.or(preset_values.map(|p| p.rho_c)).unwrap_or(0.0);
    let rho_s = args.rho_s.or(preset_values.map(|p| p.rho_s)).unwrap_or(0.0);
    let gamma = args.gamma.or(preset_values.map(|p| p.gamma)).unwrap_or(0.1);

    let grid = config::parse_grid(args.grid.as_deref().unwrap_or("2858:2882:481"))?;
    let (n_charge, n_spin) = config::parse_realizations(
        args.realizations.as_deref().unwrap_or("1000x1000"),
    )?;
    let hyperfine = args.hyperfine.as_deref().unwrap_or("n14");
    let include = config::parse_hyperfine(hyperfine)?;
    let seed = args.seed.unwrap_or(1);
    let noise = args.noise.unwrap_or(0.0);
    let out = args.out.unwrap_or_else(|| PathBuf::from("spectrum.csv"));

    let e_field = args
        .e_field
        .as_deref()
        .map(|s| config::parse_triple(s, "e-field"))
        .transpose()?;
    if args.single_nv && e_field.is_none() {
        return Err(CliError::Usage(
            "--single-nv needs --e-field EX,EY,EZ (MV/m)".into(),
        ));
    }

    let resolved = SimulateConfig {
        mode: if args.single_nv { "single-nv" } else { "ensemble" },
        preset: args.preset.clone(),
        rho_c,
        rho_s,
        gamma,
        b_applied: args.b_applied.unwrap_or(0.0),
        hyperfine: if matches!(include, nvcharge::synth::HyperfineInclude::N14ThreeLines) {
            "n14"
        } else {
            "none"
        },
        grid,
        charge_realizations: n_charge,
        spin_realizations: n_spin,
        seed,
        noise,
        e_field_mv_per_m: e_field.map(|e| [e.x, e.y, e.z]),
        phi_mw_deg: args.single_nv.then(|| args.phi_mw.unwrap_or(0.0)),
        c13_mhz: args.c13,
        out: out.clone(),
        plot_data: args.plot_data.clone(),
    };
    if ctx.maybe_print_config(&resolved) {
        return Ok(());
    }

    let (mut spectrum, histogram) = if args.single_nv {
        let model = HyperfineModel {
            n14: matches!(include, nvcharge::synth::HyperfineInclude::N14ThreeLines),
            c13_coupling: args.c13,
        };
        let cfg = SingleNvConfig::default();
        let spec = single_nv_spectrum(
            &e_field.expect("checked above"),
            rho_s,
            gamma,
            resolved.phi_mw_deg.unwrap_or(0.0),
            &model,
            &cfg,
            &grid,
            seed,
        )?;
        (spec, None)
    } else {
        if gamma > 0.0 && grid.spacing() > gamma / 2.0 {
            return Err(nvcharge::Error::GridTooCoarse {
                spacing_mhz: grid.spacing(),
                gamma_mhz: gamma,
            }
            .into());
        }
        let cfg = EnsembleSimConfig {
            n_charge_realizations: n_charge,
            n_spin_realizations: n_spin,
            gamma,
            b_applied: resolved.b_applied,
            include_hyperfine: include,
            ..Default::default()
        };
        let hist = ensemble_histogram(rho_c, rho_s, &cfg, &grid, seed)?;
        let spec = histogram_to_spectrum(&hist, &cfg, &grid)?;
        (spec, Some(hist))
    };

    if noise > 0.0 {
        let depth = spectrum.contrast.iter().cloned().fold(0.0, f64::max);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX); // off the realization streams
        spectrum.add_noise(noise * depth, &mut rng);
    }

    let prov = provenance("simulate", seed, &resolved);
    let out_path = config::resolve_out_path(&out);
    io::write_spectrum(&out_path, &spectrum, &prov)?;
    println!("wrote {}", out_path.display());

    if let Some(plot) = &args.plot_data {
        let freqs = grid.values();
        let mut series: Vec<(&str, &[f64], &[f64])> =
            vec![("spectrum", &freqs, &spectrum.contrast)];
        let hist_norm: Vec<f64>;
        if let Some(hist) = &histogram {
            let total: u64 = hist.iter().sum();
            let norm = if total > 0 { 1.0 / total as f64 } else { 0.0 };
            hist_norm = hist.iter().map(|&c| c as f64 * norm).collect();
            series.push(("resonance_histogram", &freqs, &hist_norm));
        }
        let plot_path = config::resolve_out_path(plot);
        io::write_plot_data(&plot_path, &series, &prov)?;
        println!("wrote {}", plot_path.display());
    }
    log::debug!("simulate finished in {:.2?}", started.elapsed());
    Ok(())
}

// ── fit-ensemble ────────────────────────────────────────────────────────

#[derive(Debug, Serialize)]
struct FitEnsembleConfig {
    high_field: PathBuf,
    zero_field: PathBuf,
    b_applied: f64,
    rho_s_grid: Vec<f64>,
    rho_c_grid: Vec<f64>,
    hf_gamma: f64,
    gamma_bounds: (f64, f64),
    charge_realizations: usize,
    spin_realizations: usize,
    hf_spin_realizations: usize,
    hyperfine: String,
    max_center_shift: f64,
    invert_contrast: bool,
    seed: u64,
    out: PathBuf,
}

#[derive(Debug, Serialize)]
struct FitEnsemblePayload {
    high_field: HighFieldFit,
    zero_field: ZeroFieldFit,
}

pub fn fit_ensemble(mut args: FitEnsembleArgs, ctx: &Ctx) -> Result<()> {
    let started = std::time::Instant::now();
    overlay!(
        args,
        ctx.file.fit_ensemble.as_ref(),
        [
            high_field,
            zero_field,
            b_applied,
            rho_s_grid,
            rho_c_grid,
            hf_gamma,
            gamma_bounds,
            realizations,
            hf_realizations,
            hyperfine,
            max_center_shift,
            seed,
            out
        ]
    );
    if !args.invert_contrast {
        if let Some(section) = &ctx.file.fit_ensemble {
            args.invert_contrast = section.invert_contrast;
        }
    }

    let hf_path = require(args.high_field.clone(), "high-field")?;
    let zf_path = require(args.zero_field.clone(), "zero-field")?;
    let rho_s_grid = config::parse_scan_grid(&require(args.rho_s_grid.clone(), "rho-s-grid")?)?;
    let rho_c_grid = config::parse_scan_grid(&require(args.rho_c_grid.clone(), "rho-c-grid")?)?;
    let (n_charge, n_spin) =
        config::parse_realizations(args.realizations.as_deref().unwrap_or("1600x100"))?;
    let gamma_bounds = {
        let spec = args.gamma_bounds.as_deref().unwrap_or("0.02:8");
        let (lo, hi) = spec
            .split_once(':')
            .ok_or_else(|| CliError::Usage(format!("gamma-bounds must be lo:hi, got '{spec}'")))?;
        (
            config::parse_num(lo, "gamma lower bound")?,
            config::parse_num(hi, "gamma upper bound")?,
        )
    };
    let hyperfine = args.hyperfine.clone().unwrap_or_else(|| "n14".into());
    let include = config::parse_hyperfine(&hyperfine)?;
    let seed = args.seed.unwrap_or(1);
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("fit-ensemble.json"));

    let resolved = FitEnsembleConfig {
        high_field: hf_path.clone(),
        zero_field: zf_path.clone(),
        b_applied: args.b_applied.unwrap_or(126.0),
        rho_s_grid: rho_s_grid.clone(),
        rho_c_grid: rho_c_grid.clone(),
        hf_gamma: args.hf_gamma.unwrap_or(0.3),
        gamma_bounds,
        charge_realizations: n_charge,
        spin_realizations: n_spin,
        hf_spin_realizations: args.hf_realizations.unwrap_or(50_000),
        hyperfine,
        max_center_shift: args.max_center_shift.unwrap_or(2.0),
        invert_contrast: args.invert_contrast,
        seed,
        out: out.clone(),
    };
    if ctx.maybe_print_config(&resolved) {
        return Ok(());
    }

    let hf_data = io::read_spectrum(&hf_path, args.invert_contrast)?;
    let zf_data = io::read_spectrum(&zf_path, args.invert_contrast)?;

    let mut fit_cfg = EnsembleFitConfig {
        seed,
        max_center_shift: resolved.max_center_shift,
        gamma_bounds,
        ..Default::default()
    };
    fit_cfg.sim = EnsembleSimConfig {
        n_charge_realizations: n_charge,
        n_spin_realizations: n_spin,
        gamma: resolved.hf_gamma,
        b_applied: resolved.b_applied,
        include_hyperfine: include,
        ..Default::default()
    };
    let mut hf_cfg = fit_cfg;
    hf_cfg.sim.n_charge_realizations = 1;
    hf_cfg.sim.n_spin_realizations = resolved.hf_spin_realizations;

    let high = fit_high_field(&hf_data, &rho_s_grid, &hf_cfg)?;
    log::info!(
        "high-field step: rho_s = {:.3} [{:.3}, {:.3}] ppm",
        high.rho_s.best,
        high.rho_s.lower,
        high.rho_s.upper
    );
    let zero = fit_zero_field(&zf_data, high.rho_s.best, &rho_c_grid, &fit_cfg)?;
    log::info!(
        "zero-field step: rho_c = {:.4} ppm, gamma = {:.4} MHz",
        zero.rho_c.best,
        zero.gamma.best
    );

    ctx.emit(
        "fit-ensemble",
        seed,
        resolved,
        FitEnsemblePayload {
            high_field: high,
            zero_field: zero,
        },
        &out,
        started,
    )
}

// ── fit-single ──────────────────────────────────────────────────────────

#[derive(Debug, Serialize)]
struct FitSingleConfig {
    data: PathBuf,
    phi_mw_deg: f64,
    n14: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    c13_mhz: Option<f64>,
    d_gs_reference: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    init: Option<String>,
    invert_contrast: bool,
    seed: u64,
    out: PathBuf,
}

pub fn fit_single(mut args: FitSingleArgs, ctx: &Ctx) -> Result<()> {
    let started = std::time::Instant::now();
    overlay!(
        args,
        ctx.file.fit_single.as_ref(),
        [data, phi_mw, c13, d_gs_ref, init, seed, out]
    );
    if let Some(section) = &ctx.file.fit_single {
        args.no_n14 |= section.no_n14;
        args.invert_contrast |= section.invert_contrast;
    }

    let data_path = require(args.data.clone(), "data")?;
    let phi_mw = require(args.phi_mw, "phi-mw")?;
    let seed = args.seed.unwrap_or(1);
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("fit-single.json"));

    let resolved = FitSingleConfig {
        data: data_path.clone(),
        phi_mw_deg: phi_mw,
        n14: !args.no_n14,
        c13_mhz: args.c13,
        d_gs_reference: args.d_gs_ref.unwrap_or(2870.25),
        init: args.init.clone(),
        invert_contrast: args.invert_contrast,
        seed,
        out: out.clone(),
    };
    if ctx.maybe_print_config(&resolved) {
        return Ok(());
    }

    let data = io::read_spectrum(&data_path, args.invert_contrast)?;
    let hyperfine = HyperfineModel {
        n14: resolved.n14,
        c13_coupling: args.c13,
    };
    let cfg = SingleNvFitConfig {
        d_gs_reference: resolved.d_gs_reference,
        seed,
        ..Default::default()
    };
    let initial = args
        .init
        .as_deref()
        .map(|spec| -> Result<SingleNvGuess> {
            let parts: Vec<&str> = spec.split(',').collect();
            if parts.len() != 5 {
                return Err(CliError::Usage(
                    "init must be PI_PERP,PHI_E_DEG,PI_Z,RHO_S,GAMMA".into(),
                ));
            }
            Ok(SingleNvGuess {
                pi_perp: config::parse_num(parts[0], "init pi_perp")?,
                phi_e_deg: config::parse_num(parts[1], "init phi_e")?,
                pi_z: config::parse_num(parts[2], "init pi_z")?,
                rho_s: config::parse_num(parts[3], "init rho_s")?,
                gamma: config::parse_num(parts[4], "init gamma")?,
            })
        })
        .transpose()?;

    let fit = fit_single_nv(&data, phi_mw, &hyperfine, &cfg, initial)?;
    log::info!(
        "fit-single: E = ({:.2}, {:.2}, {:.1}) MV/m, rho_s = {:.3} ppm, gamma = {:.3} MHz",
        fit.e_x.best,
        fit.e_y.best,
        fit.e_z.best,
        fit.rho_s.best,
        fit.gamma.best
    );
    ctx.emit("fit-single", seed, resolved, fit, &out, started)
}

// ── imbalance ───────────────────────────────────────────────────────────

#[derive(Debug, Serialize)]
struct ImbalanceConfig {
    curve: PathBuf,
    seed: u64,
    out: PathBuf,
}

pub fn imbalance(mut args: ImbalanceArgs, ctx: &Ctx) -> Result<()> {
    let started = std::time::Instant::now();
    overlay!(args, ctx.file.imbalance.as_ref(), [curve, seed, out]);
    let curve_path = require(args.curve.clone(), "curve")?;
    let seed = args.seed.unwrap_or(1);
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("imbalance.json"));
    let resolved = ImbalanceConfig {
        curve: curve_path.clone(),
        seed,
        out: out.clone(),
    };
    if ctx.maybe_print_config(&resolved) {
        return Ok(());
    }
    let curve = io::read_curve(&curve_path)?;
    let fit = fit_imbalance_curve(&curve)?;
    log::info!(
        "imbalance: phi_E = {:.1} ± {:.1} deg, amplitude = {:.3} ± {:.3}",
        fit.phi_e.value,
        fit.phi_e.sigma,
        fit.amplitude.value,
        fit.amplitude.sigma
    );
    ctx.emit("imbalance", seed, resolved, fit, &out, started)
}

// ── localize ────────────────────────────────────────────────────────────

#[derive(Debug, Serialize)]
struct LocalizeConfig {
    pi_z: Measured,
    pi_perp: Measured,
    phi_e_deg: Measured,
    #[serde(skip_serializing_if = "Option::is_none")]
    from_imbalance: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    from_single: Option<PathBuf>,
    charge_sign: i8,
    n_mc: usize,
    levels: Vec<f64>,
    seed: u64,
    out: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    cloud: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct LocalizePayload {
    e_vector_mv_per_m: [f64; 3],
    e_sigma_mv_per_m: [f64; 3],
    distance_nm: f64,
    position_nm: [f64; 3],
    levels: Vec<f64>,
    samples_per_level: Vec<usize>,
    n_samples: usize,
}

fn measured_from_json(value: &serde_json::Value, path: &Path, key: &str) -> Result<Measured> {
    let node = value.get(key).ok_or_else(|| CliError::Usage(format!(
        "{} has no '{key}' field",
        path.display()
    )))?;
    let get = |k: &str| node.get(k).and_then(|v| v.as_f64());
    // Either {value, sigma} or a FitResult-style {best, lower, upper}.
    if let (Some(v), Some(s)) = (get("value"), get("sigma")) {
        return Ok(Measured::new(v, s));
    }
    if let (Some(best), Some(lower), Some(upper)) = (get("best"), get("lower"), get("upper")) {
        return Ok(Measured::new(best, (upper - lower) / 2.0));
    }
    Err(CliError::Usage(format!(
        "{}: '{key}' has neither value/sigma nor best/lower/upper",
        path.display()
    )))
}

pub fn localize(mut args: LocalizeArgs, ctx: &Ctx) -> Result<()> {
    let started = std::time::Instant::now();
    overlay!(
        args,
        ctx.file.localize.as_ref(),
        [
            pi_z,
            pi_perp,
            phi_e,
            from_imbalance,
            from_single,
            charge_sign,
            n_mc,
            levels,
            seed,
            out,
            cloud
        ]
    );
    let charge_sign = args.charge_sign.unwrap_or(1);
    if charge_sign != 1 && charge_sign != -1 {
        return Err(CliError::Usage(format!(
            "charge-sign must be +1 or -1, got {charge_sign}"
        )));
    }
    let n_mc = args.n_mc.unwrap_or(10_000);
    let seed = args.seed.unwrap_or(1);
    let levels: Vec<f64> = match args.levels.as_deref() {
        Some(spec) => spec
            .split(',')
            .map(|s| config::parse_num(s, "confidence level"))
            .collect::<Result<_>>()?,
        None => vec![0.68, 0.95],
    };
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("localize.json"));
    let nv_consts = nvcharge::NvConstants::default();
    let phys = nvcharge::PhysicalConstants::default();

    // Field either from a fit-single envelope or from the measured couplings.
    let (field, pi_z, pi_perp, phi_e) = if let Some(single) = &args.from_single {
        let payload = read_payload(single, "fit-single")?;
        let comp = |k: &str| measured_from_json(&payload, single, k);
        let (ex, ey, ez) = (comp("e_x")?, comp("e_y")?, comp("e_z")?);
        let field = EVector {
            e: nalgebra::Vector3::new(ex.value, ey.value, ez.value),
            sigma: nalgebra::Vector3::new(ex.sigma, ey.sigma, ez.sigma),
        };
        let pi_perp = Measured::exact((ex.value * nv_consts.d_perp).hypot(ey.value * nv_consts.d_perp));
        let pi_z = Measured::exact(ez.value * nv_consts.d_par);
        let phi_e = Measured::exact(ey.value.atan2(ex.value).to_degrees().rem_euclid(360.0));
        (field, pi_z, pi_perp, phi_e)
    } else {
        let phi_e = match &args.from_imbalance {
            Some(path) => {
                let payload = read_payload(path, "imbalance")?;
                measured_from_json(&payload, path, "phi_e")?
            }
            None => config::parse_measured(&require(args.phi_e.clone(), "phi-e")?, "phi-e")?,
        };
        let pi_z = config::parse_measured(&require(args.pi_z.clone(), "pi-z")?, "pi-z")?;
        let pi_perp = config::parse_measured(&require(args.pi_perp.clone(), "pi-perp")?, "pi-perp")?;
        let field = reconstruct_field(pi_z, pi_perp, phi_e, &nv_consts)?;
        (field, pi_z, pi_perp, phi_e)
    };

    let resolved = LocalizeConfig {
        pi_z,
        pi_perp,
        phi_e_deg: phi_e,
        from_imbalance: args.from_imbalance.clone(),
        from_single: args.from_single.clone(),
        charge_sign,
        n_mc,
        levels: levels.clone(),
        seed,
        out: out.clone(),
        cloud: args.cloud.clone(),
    };
    if ctx.maybe_print_config(&resolved) {
        return Ok(());
    }

    let position = localize_charge(&field.e, charge_sign, &phys)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cloud = confidence_region(&field, charge_sign, &levels, n_mc, &phys, &mut rng)?;
    let samples_per_level: Vec<usize> = (0..cloud.levels.len())
        .map(|k| cloud.labels.iter().filter(|&&l| l <= k).count())
        .collect();

    log::info!(
        "localize: d = {:.2} nm at ({:.2}, {:.2}, {:.2}) nm",
        position.distance_nm,
        position.position_nm.x,
        position.position_nm.y,
        position.position_nm.z
    );

    if let Some(cloud_path) = &args.cloud {
        let path = config::resolve_out_path(cloud_path);
        io::write_cloud(&path, &cloud, &provenance("localize", seed, &resolved))?;
        println!("wrote {}", path.display());
    }
    let payload = LocalizePayload {
        e_vector_mv_per_m: [field.e.x, field.e.y, field.e.z],
        e_sigma_mv_per_m: [field.sigma.x, field.sigma.y, field.sigma.z],
        distance_nm: position.distance_nm,
        position_nm: [
            position.position_nm.x,
            position.position_nm.y,
            position.position_nm.z,
        ],
        levels: cloud.levels.clone(),
        samples_per_level,
        n_samples: cloud.positions.len(),
    };
    ctx.emit("localize", seed, resolved, payload, &out, started)
}

// ── mw-angle ────────────────────────────────────────────────────────────

#[derive(Debug, Serialize)]
struct MwAngleConfig {
    wire: WireGeometry,
    nv_axis: String,
    n_mc: usize,
    seed: u64,
    out: PathBuf,
}

#[derive(Debug, Serialize)]
struct MwAnglePayload {
    phi_mw_deg: f64,
    mean_deg: f64,
    std_deg: f64,
    n_mc: usize,
}

pub fn mw_angle(mut args: MwAngleArgs, ctx: &Ctx) -> Result<()> {
    let started = std::time::Instant::now();
    overlay!(
        args,
        ctx.file.mw_angle.as_ref(),
        [phi_wire, height, height_sigma, distance, tilt_sigma, nv_axis, n_mc, seed, out]
    );
    let wire = WireGeometry {
        phi_wire_deg: args.phi_wire.unwrap_or(0.0),
        height_um: args.height.unwrap_or(550.0),
        height_sigma_um: args.height_sigma.unwrap_or(100.0),
        in_plane_distance_um: args.distance.unwrap_or(0.0),
        tilt_sigma_deg: args.tilt_sigma.unwrap_or(10.0),
    };
    let axis_name = args.nv_axis.clone().unwrap_or_else(|| "111".into());
    let axis = config::parse_nv_axis(&axis_name)?;
    let n_mc = args.n_mc.unwrap_or(2000);
    let seed = args.seed.unwrap_or(1);
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("mw-angle.json"));
    let resolved = MwAngleConfig {
        wire,
        nv_axis: axis_name,
        n_mc,
        seed,
        out: out.clone(),
    };
    if ctx.maybe_print_config(&resolved) {
        return Ok(());
    }

    let nv = NvOrientation::new(axis);
    let nominal = microwave_polarization(&wire, &nv)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = mw_angle_uncertainty(&wire, &nv, n_mc, &mut rng)?;
    log::info!(
        "mw-angle: phi_MW = {:.2} deg (mean {:.2} ± {:.2})",
        nominal,
        dist.mean_deg,
        dist.std_deg
    );
    let payload = MwAnglePayload {
        phi_mw_deg: nominal,
        mean_deg: dist.mean_deg,
        std_deg: dist.std_deg,
        n_mc,
    };
    ctx.emit("mw-angle", seed, resolved, payload, &out, started)
}
