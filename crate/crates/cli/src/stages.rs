use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use qpwave::creation::{infidelity_scan, CreationOperator};
use qpwave::detection::{calibrate_coefficients, resonance_lower_bound, Detector, EpsilonFunctional};
use qpwave::linalg::Vector;
use qpwave::model::{build_hamiltonian, Boundary};
use qpwave::pipeline::select_band;
use qpwave::scattering::*;
use qpwave::spectroscopy::{fourier_interpolate_dispersion, momentum, BandLabel, BlochBand, Dispersion, EigenMethod, SpectrumSolver};
use qpwave::tensor::{Mpo, Mps};
use qpwave::wannier::{minimize_spread, precompute_kspace_matrix};

use crate::checkpoint::*;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::{digest_json, Manifest};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Spectrum,
    Localize,
    Extract,
    Vacuum,
    Lightcone,
    Propagator,
    Scatter,
    Detect,
}

impl Stage {
    pub const PIPELINE: [Stage; 8] = [
        Stage::Spectrum,
        Stage::Localize,
        Stage::Extract,
        Stage::Vacuum,
        Stage::Lightcone,
        Stage::Propagator,
        Stage::Scatter,
        Stage::Detect,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Spectrum => "spectrum",
            Stage::Localize => "localize",
            Stage::Extract => "extract",
            Stage::Vacuum => "vacuum",
            Stage::Lightcone => "lightcone",
            Stage::Propagator => "propagator",
            Stage::Scatter => "scatter",
            Stage::Detect => "detect",
        }
    }

    pub fn upstream(self) -> &'static [Stage] {
        match self {
            Stage::Spectrum | Stage::Vacuum => &[],
            Stage::Localize => &[Stage::Spectrum],
            Stage::Extract => &[Stage::Spectrum, Stage::Localize],
            Stage::Lightcone | Stage::Propagator | Stage::Scatter => &[Stage::Spectrum, Stage::Localize, Stage::Extract, Stage::Vacuum],
            Stage::Detect => &[Stage::Spectrum, Stage::Localize, Stage::Extract, Stage::Vacuum, Stage::Scatter],
        }
    }
}

/// Digest of everything a stage's outputs depend on, including upstream keys.
pub fn stage_key(cfg: &RunConfig, stage: Stage) -> Result<String, CliError> {
    let lambda = cfg.lambda()?;
    let group = cfg.group()?.tag();
    let m = &cfg.model;
    let v = match stage {
        Stage::Spectrum => json!({"group": group, "lambda": lambda, "l": m.l_intermediate, "band": cfg.band}),
        Stage::Localize => json!({"up": stage_key(cfg, Stage::Spectrum)?, "wannier": cfg.wannier, "seed": cfg.seed}),
        Stage::Extract => json!({"up": stage_key(cfg, Stage::Localize)?, "creation": cfg.creation}),
        Stage::Vacuum => json!({"group": group, "lambda": lambda, "L": m.l_large, "boundary": m.boundary, "dmrg": cfg.dmrg_options()}),
        Stage::Lightcone => json!({"up": [stage_key(cfg, Stage::Extract)?, stage_key(cfg, Stage::Vacuum)?], "evolution": cfg.evolution, "lightcone": cfg.lightcone}),
        Stage::Propagator => json!({"up": [stage_key(cfg, Stage::Extract)?, stage_key(cfg, Stage::Vacuum)?], "evolution": cfg.evolution, "propagator": cfg.propagator}),
        Stage::Scatter => json!({"up": [stage_key(cfg, Stage::Extract)?, stage_key(cfg, Stage::Vacuum)?], "evolution": cfg.evolution, "scatter": cfg.scatter}),
        Stage::Detect => json!({"up": stage_key(cfg, Stage::Scatter)?, "detection": cfg.detection}),
    };
    digest_json(&v)
}

pub struct Context<'a> {
    pub out: &'a Path,
    pub cfg: &'a RunConfig,
    pub manifest: Manifest,
}

/// Files written by a stage, relative to the output directory.
struct Outputs {
    files: Vec<PathBuf>,
}

impl Outputs {
    fn new() -> Self {
        Outputs { files: Vec::new() }
    }

    fn path(&mut self, ctx: &Context, name: &str) -> PathBuf {
        self.files.push(PathBuf::from(name));
        ctx.out.join(name)
    }
}

fn fmt(x: f64) -> String {
    // shortest representation that round-trips
    format!("{x}")
}

fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), CliError> {
    fs::write(path, serde_json::to_string_pretty(v)?)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

pub fn run_stage(ctx: &mut Context, stage: Stage) -> Result<(), CliError> {
    let key = stage_key(ctx.cfg, stage)?;
    for &up in stage.upstream() {
        ctx.manifest.require(ctx.out, up.name(), &stage_key(ctx.cfg, up)?, stage.name())?;
    }
    log::info!("stage {}", stage.name());
    let start = Instant::now();
    let outputs = match stage {
        Stage::Spectrum => spectrum(ctx)?,
        Stage::Localize => localize(ctx)?,
        Stage::Extract => extract(ctx)?,
        Stage::Vacuum => vacuum(ctx)?,
        Stage::Lightcone => lightcone(ctx)?,
        Stage::Propagator => propagator(ctx)?,
        Stage::Scatter => scatter(ctx)?,
        Stage::Detect => detect(ctx)?,
    };
    let inputs = stage.upstream().iter().map(|s| s.name().to_string()).collect();
    let wall = start.elapsed().as_secs_f64();
    ctx.manifest.record(ctx.out, stage.name(), key, wall, inputs, &outputs.files)?;
    ctx.manifest.save(ctx.out)?;
    log::info!("stage {} done in {wall:.1}s", stage.name());
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct BandMeta {
    l: usize,
    name: String,
    c: i8,
    p: i8,
    index: usize,
    omega: Vec<f64>,
    vacuum_energy: f64,
    gauge_parity: i8,
}

#[derive(Serialize, Deserialize)]
struct DispersionMeta {
    v_max: f64,
    k0: f64,
    harmonics: Vec<(i64, f64, f64)>,
}

fn band_depth(name: &str) -> Result<usize, CliError> {
    name.strip_prefix("0_")
        .and_then(|s| s.split('^').next())
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| CliError::Config(format!("band name {name:?} is not of the form 0_n^PC")))
}

fn spectrum(ctx: &mut Context) -> Result<Outputs, CliError> {
    let cfg = ctx.cfg;
    let l = cfg.model.l_intermediate;
    let h = build_hamiltonian(cfg.group()?, cfg.lambda()?, l, Boundary::Periodic)?;
    let solver = SpectrumSolver::new(l)?;
    let depth = band_depth(&cfg.band.name)?.max(2);
    let spec = solver.spectrum(&h, depth, EigenMethod::Auto)?;
    let band = select_band(&spec, &cfg.band.name, depth)?;
    let disp = fourier_interpolate_dispersion(&band.omega);
    let mut out = Outputs::new();
    write_csv(
        &out.path(ctx, "spectrum.csv"),
        &["omega", "n", "k", "c", "parity", "sector_index", "residual"],
        spec.levels.iter().map(|s| {
            vec![
                fmt(s.omega - spec.vacuum_energy),
                s.n.to_string(),
                fmt(momentum(l, s.n)),
                s.c.to_string(),
                s.parity.map(fmt).unwrap_or_default(),
                s.band_index.to_string(),
                fmt(s.residual),
            ]
        }),
    )?;
    write_csv(
        &out.path(ctx, "band.csv"),
        &["n", "k", "omega"],
        band.omega.iter().enumerate().map(|(n, w)| vec![n.to_string(), fmt(momentum(l, n)), fmt(*w)]),
    )?;
    let meta = BandMeta {
        l,
        name: band.label.name(),
        c: band.label.c,
        p: band.label.p,
        index: band.label.index,
        omega: band.omega.clone(),
        vacuum_energy: spec.vacuum_energy,
        gauge_parity: band.gauge_parity,
    };
    write_json(&out.path(ctx, "band.json"), &meta)?;
    let dmeta = DispersionMeta { v_max: disp.v_max, k0: disp.k0, harmonics: disp.harmonics.iter().map(|&(m, c)| (m, c.re, c.im)).collect() };
    write_json(&out.path(ctx, "dispersion.json"), &dmeta)?;
    let mut vs: Vec<&Vector> = vec![&spec.vacuum];
    vs.extend(band.states.iter());
    write_vectors(&out.path(ctx, "band.bin"), &vs)?;
    Ok(out)
}

fn load_band(ctx: &Context) -> Result<(BlochBand, Vector, Dispersion), CliError> {
    let meta: BandMeta = read_json(&ctx.out.join("band.json"))?;
    let mut vs = read_vectors(&ctx.out.join("band.bin"))?;
    if vs.len() != meta.l + 1 {
        return Err(CliError::Checkpoint("band.bin has the wrong number of states".into()));
    }
    let vacuum = vs.remove(0);
    let band = BlochBand {
        l: meta.l,
        label: BandLabel { c: meta.c, p: meta.p, index: meta.index },
        omega: meta.omega,
        vacuum_energy: meta.vacuum_energy,
        states: vs,
        gauge_parity: meta.gauge_parity,
    };
    let disp = fourier_interpolate_dispersion(&band.omega);
    Ok((band, vacuum, disp))
}

#[derive(Serialize, Deserialize)]
struct WannierMeta {
    center: usize,
    spread2: f64,
    sigma: f64,
    grad_norm: f64,
    converged: bool,
    theta: Vec<f64>,
}

fn localize(ctx: &mut Context) -> Result<Outputs, CliError> {
    let cfg = ctx.cfg;
    let (band, _, _) = load_band(ctx)?;
    let h = build_hamiltonian(cfg.group()?, cfg.lambda()?, band.l, Boundary::Periodic)?;
    let m = precompute_kspace_matrix(&band, h.term(0))?;
    let w = minimize_spread(&band, &m, &cfg.wannier_options())?;
    if !w.converged {
        log::warn!("Wannier minimization stopped at gradient norm {:.2e}", w.grad_norm);
    }
    let mut out = Outputs::new();
    write_csv(
        &out.path(ctx, "wannier.csv"),
        &["j", "excess", "p"],
        (0..band.l).map(|j| vec![j.to_string(), fmt(w.excess[j]), fmt(w.distribution[j])]),
    )?;
    let meta = WannierMeta { center: w.center, spread2: w.spread2, sigma: w.sigma(), grad_norm: w.grad_norm, converged: w.converged, theta: w.theta.clone() };
    write_json(&out.path(ctx, "wannier.json"), &meta)?;
    write_vectors(&out.path(ctx, "mlwf.bin"), &[&w.state])?;
    Ok(out)
}

fn load_mlwf(ctx: &Context) -> Result<(Vector, usize), CliError> {
    let meta: WannierMeta = read_json(&ctx.out.join("wannier.json"))?;
    let v = read_vectors(&ctx.out.join("mlwf.bin"))?.into_iter().next().ok_or_else(|| CliError::Checkpoint("empty mlwf.bin".into()))?;
    Ok((v, meta.center))
}

#[derive(Serialize, Deserialize)]
struct CreationMeta {
    support: Vec<usize>,
    center: usize,
    fidelity: f64,
    infidelity: f64,
    singular_values: Vec<f64>,
    null_dim: usize,
}

fn extract(ctx: &mut Context) -> Result<Outputs, CliError> {
    let cfg = ctx.cfg;
    let (band, vacuum, _) = load_band(ctx)?;
    let (mlwf, center) = load_mlwf(ctx)?;
    let rows = infidelity_scan(cfg.group()?.tag(), &band.label.name(), cfg.lambda()?, &mlwf, &vacuum, band.l, center, &cfg.creation.scan)?;
    let op = CreationOperator::extract(&mlwf, &vacuum, band.l, center, cfg.creation.support)?;
    let mut out = Outputs::new();
    write_csv(
        &out.path(ctx, "infidelity.csv"),
        &["group", "band", "lambda", "support", "infidelity"],
        rows.iter().map(|r| vec![r.group.clone(), r.band.clone(), fmt(r.lambda), r.support.to_string(), fmt(r.infidelity)]),
    )?;
    let meta = CreationMeta {
        support: op.support.clone(),
        center: op.center,
        fidelity: op.fidelity,
        infidelity: op.infidelity(),
        singular_values: op.singular_values.clone(),
        null_dim: op.null_dim,
    };
    write_json(&out.path(ctx, "creation.json"), &meta)?;
    write_matrix(&out.path(ctx, "creation.bin"), &op.unitary)?;
    Ok(out)
}

fn load_creation(ctx: &Context) -> Result<CreationOperator, CliError> {
    let meta: CreationMeta = read_json(&ctx.out.join("creation.json"))?;
    let unitary = read_matrix(&ctx.out.join("creation.bin"))?;
    Ok(CreationOperator {
        support: meta.support,
        center: meta.center,
        unitary,
        fidelity: meta.fidelity,
        singular_values: meta.singular_values,
        null_dim: meta.null_dim,
    })
}

#[derive(Serialize, Deserialize)]
struct VacuumMeta {
    energy: f64,
    converged: bool,
    max_bond: usize,
    density: Vec<f64>,
}

fn vacuum(ctx: &mut Context) -> Result<Outputs, CliError> {
    let cfg = ctx.cfg;
    let sys = LargeSystem::new(cfg.group()?, cfg.lambda()?, cfg.model.l_large, &cfg.dmrg_options())?;
    let mut psi = sys.vacuum.clone();
    let entropy = psi.entropy_profile()?;
    let mut out = Outputs::new();
    write_csv(
        &out.path(ctx, "vacuum.csv"),
        &["j", "energy_density", "entropy"],
        (0..sys.length()).map(|j| vec![j.to_string(), fmt(sys.vacuum_density[j]), entropy.get(j).map(|s| fmt(*s)).unwrap_or_default()]),
    )?;
    let meta = VacuumMeta { energy: sys.vacuum_energy, converged: sys.dmrg_converged, max_bond: sys.vacuum.max_bond(), density: sys.vacuum_density.clone() };
    write_json(&out.path(ctx, "vacuum.json"), &meta)?;
    write_mps(&out.path(ctx, "vacuum.bin"), &sys.vacuum)?;
    Ok(out)
}

fn load_system(ctx: &Context) -> Result<LargeSystem, CliError> {
    let cfg = ctx.cfg;
    let meta: VacuumMeta = read_json(&ctx.out.join("vacuum.json"))?;
    let mut vacuum = read_mps(&ctx.out.join("vacuum.bin"))?;
    vacuum.canonicalize(0);
    let h = build_hamiltonian(cfg.group()?, cfg.lambda()?, cfg.model.l_large, Boundary::Open)?;
    let mpo = Mpo::from_local_hamiltonian(&h)?;
    Ok(LargeSystem { h, mpo, vacuum, vacuum_energy: meta.energy, vacuum_density: meta.density, dmrg_converged: meta.converged })
}

fn heatmap_rows(times: &[f64], values: &[Vec<f64>]) -> Vec<Vec<String>> {
    times
        .iter()
        .zip(values)
        .flat_map(|(t, row)| row.iter().enumerate().map(move |(j, v)| vec![fmt(*t), j.to_string(), fmt(*v)]))
        .collect()
}

fn lightcone(ctx: &mut Context) -> Result<Outputs, CliError> {
    let cfg = ctx.cfg;
    let (_, _, disp) = load_band(ctx)?;
    let op = load_creation(ctx)?;
    let sys = load_system(ctx)?;
    let l = sys.length();
    let j0 = cfg.lightcone.center.unwrap_or(l / 2);
    let evo = cfg.evolution.resolve(l, disp.v_max)?;
    let res = wannier_quench(&sys, &op, j0, &evo, false)?;
    let mut out = Outputs::new();
    write_csv(&out.path(ctx, "lightcone.csv"), &["t", "j", "value"], heatmap_rows(&res.times, &res.excess))?;
    let fit = front_speed(&res.times, &res.excess, j0, cfg.lightcone.threshold, 2);
    let summary = match &fit {
        Ok(f) => json!({
            "j0": j0, "dt": evo.dt, "t_max": evo.t_max, "threshold": cfg.lightcone.threshold,
            "front_speed": f.speed, "v_max": disp.v_max, "ratio": f.speed / disp.v_max,
            "intercept": f.intercept, "fit_times": f.times, "fit_half_widths": f.half_widths,
        }),
        Err(e) => {
            log::warn!("front fit failed: {e}");
            json!({"j0": j0, "dt": evo.dt, "t_max": evo.t_max, "threshold": cfg.lightcone.threshold, "front_speed": null, "v_max": disp.v_max, "error": e.to_string()})
        }
    };
    write_json(&out.path(ctx, "lightcone.json"), &summary)?;
    Ok(out)
}

fn propagator(ctx: &mut Context) -> Result<Outputs, CliError> {
    let cfg = ctx.cfg;
    let (band, _, disp) = load_band(ctx)?;
    let op = load_creation(ctx)?;
    let sys = load_system(ctx)?;
    let l = sys.length();
    let j0 = cfg.propagator.center.unwrap_or(l / 2);
    let evo = cfg.evolution.resolve(l, disp.v_max)?;
    let res = wannier_quench(&sys, &op, j0, &evo, true)?;
    let map = spectral_density(&res.delta, evo.dt, j0, cfg.propagator.pad)?;
    let mut out = Outputs::new();
    write_csv(
        &out.path(ctx, "propagator.csv"),
        &["t", "j", "re", "im"],
        res.times.iter().zip(&res.delta).flat_map(|(t, row)| {
            let valid = &res.valid;
            row.iter().enumerate().filter(move |(j, _)| valid[*j]).map(move |(j, z)| vec![fmt(*t), j.to_string(), fmt(z.re), fmt(z.im)])
        }),
    )?;
    write_csv(
        &out.path(ctx, "spectral.csv"),
        &["omega", "k", "magnitude"],
        map.omegas.iter().enumerate().flat_map(|(a, w)| map.ks.iter().enumerate().map(move |(b, k)| (a, b, *w, *k))).map(|(a, b, w, k)| vec![fmt(w), fmt(k), fmt(map.magnitude[a][b])]),
    )?;
    let ridge: Vec<(usize, f64, f64, f64)> = (0..band.l).map(|n| {
        let k = momentum(band.l, n);
        (n, k, band.omega[n], map.ridge(k))
    }).collect();
    write_csv(
        &out.path(ctx, "ridge.csv"),
        &["n", "k", "omega_ed", "omega_ridge", "offset_bins"],
        ridge.iter().map(|&(n, k, a, b)| vec![n.to_string(), fmt(k), fmt(a), fmt(b), fmt((b - a).abs() / map.omega_bin)]),
    )?;
    let worst = ridge.iter().map(|&(_, _, a, b)| (b - a).abs() / map.omega_bin).fold(0.0, f64::max);
    write_json(
        &out.path(ctx, "propagator.json"),
        &json!({"j0": j0, "dt": evo.dt, "t_max": evo.t_max, "pad": cfg.propagator.pad, "omega_bin": map.omega_bin, "k_bin": map.k_bin, "max_offset_bins": worst}),
    )?;
    Ok(out)
}

/// Two packets at `L/3` and `2L/3` heading toward each other at the momentum
/// of maximal group velocity.
pub fn default_packets(length: usize, disp: &Dispersion, sigma: f64) -> Vec<WavePacketSpec> {
    let k = if disp.derivative(disp.k0) >= 0.0 { disp.k0 } else { -disp.k0 };
    vec![
        WavePacketSpec { center: length as f64 / 3.0, k0: k, sigma },
        WavePacketSpec { center: 2.0 * length as f64 / 3.0, k0: -k, sigma },
    ]
}

#[derive(Serialize, Deserialize)]
struct ScatterMeta {
    packets: Vec<WavePacketSpec>,
    dt: f64,
    t_max: f64,
    vacuum_energy: f64,
    v_max: f64,
    /// `(step, time, file)` of the stored states.
    snapshots: Vec<(usize, f64, String)>,
    peak_mid_entropy: f64,
    peak_entropy: f64,
}

fn scatter(ctx: &mut Context) -> Result<Outputs, CliError> {
    let cfg = ctx.cfg;
    let (_, _, disp) = load_band(ctx)?;
    let op = load_creation(ctx)?;
    let sys = load_system(ctx)?;
    let l = sys.length();
    let sigma = cfg.scatter.sigma.unwrap_or(l as f64 / 30.0);
    let packets = cfg.scatter.packets.clone().unwrap_or_else(|| default_packets(l, &disp, sigma));
    let evo = cfg.evolution.resolve(l, disp.v_max)?;
    let radius = cfg.scatter.radius_sigmas.map(|r| r * sigma);
    let state = prepare_scattering_state(&sys, &op, &packets, radius, &evo.trunc)?;
    let mut out = Outputs::new();
    fs::create_dir_all(ctx.out.join("snapshots"))?;
    let steps = evo.steps();
    let every = cfg.scatter.checkpoint_every;
    let mut snapshots = Vec::new();
    let (rec, _) = run_scattering(&sys, state, &evo, |step, t, st| {
        if step % every == 0 || step == steps {
            let name = format!("snapshots/state_{step:05}.bin");
            write_mps(&ctx.out.join(&name), st).map_err(|e| qpwave::Error::InvalidParameter(e.to_string()))?;
            snapshots.push((step, t, name));
        }
        Ok(())
    })?;
    for (_, _, name) in &snapshots {
        out.files.push(PathBuf::from(name));
    }
    let times: Vec<f64> = rec.iter().map(|r| r.time).collect();
    let excess: Vec<Vec<f64>> = rec.iter().map(|r| r.excess.clone()).collect();
    let entropy: Vec<Vec<f64>> = rec.iter().map(|r| r.entropy.clone()).collect();
    write_csv(&out.path(ctx, "scatter_excess.csv"), &["t", "j", "value"], heatmap_rows(&times, &excess))?;
    write_csv(&out.path(ctx, "scatter_entropy.csv"), &["t", "bond", "value"], heatmap_rows(&times, &entropy))?;
    write_csv(
        &out.path(ctx, "scatter_energy.csv"),
        &["t", "energy", "max_bond", "discarded"],
        rec.iter().map(|r| vec![fmt(r.time), fmt(r.energy), r.max_bond.to_string(), fmt(r.discarded)]),
    )?;
    let mid = (l / 2).saturating_sub(1);
    let meta = ScatterMeta {
        packets,
        dt: evo.dt,
        t_max: evo.t_max,
        vacuum_energy: sys.vacuum_energy,
        v_max: disp.v_max,
        snapshots,
        peak_mid_entropy: rec.iter().map(|r| r.entropy[mid]).fold(0.0, f64::max),
        peak_entropy: rec.iter().flat_map(|r| r.entropy.iter().copied()).fold(0.0, f64::max),
    };
    write_json(&out.path(ctx, "scatter.json"), &meta)?;
    Ok(out)
}

fn detect(ctx: &mut Context) -> Result<Outputs, CliError> {
    let cfg = ctx.cfg;
    let (band, _, _) = load_band(ctx)?;
    let (mlwf, center) = load_mlwf(ctx)?;
    let sys = load_system(ctx)?;
    let meta: ScatterMeta = read_json(&ctx.out.join("scatter.json"))?;
    let width = cfg.detection.width;
    let species = band.label.name();
    let det = Detector::new(&species, &mlwf, band.l, center, width)?;
    let mut vac = sys.vacuum.clone();
    let ident = EpsilonFunctional::new(None, 1, &sys.h, &mut vac)?;
    let weighted = EpsilonFunctional::new(Some(&det.rho), width, &sys.h, &mut vac)?;
    let background = det.hs_profile(&mut vac)?;
    let mut hs_rows = Vec::new();
    let mut bound_rows = Vec::new();
    let mut calibration = None;
    let mut max_bound_later = f64::NEG_INFINITY;
    for (_, t, name) in &meta.snapshots {
        let mut psi: Mps = read_mps(&ctx.out.join(name))?;
        psi.canonicalize(0);
        let hs = det.hs_profile(&mut psi)?;
        for (j, (v, b)) in hs.iter().zip(&background).enumerate() {
            if let (Some(v), Some(b)) = (v, b) {
                hs_rows.push(vec![fmt(*t), j.to_string(), species.clone(), fmt(*v), fmt(v - b)]);
            }
        }
        let eps = ident.evaluate(&mut psi)?;
        let sig = weighted.evaluate(&mut psi)?;
        let cal = match &calibration {
            Some(c) => c,
            None => {
                let c = calibrate_coefficients(&eps, std::slice::from_ref(&sig))?;
                let peak = eps.iter().cloned().fold(0.0, f64::max);
                calibration = Some((c, peak));
                calibration.as_ref().unwrap()
            }
        };
        let bound = resonance_lower_bound(&eps, std::slice::from_ref(&sig), &cal.0.coefficients)?;
        max_bound_later = max_bound_later.max(bound.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        for (j, v) in bound.iter().enumerate() {
            bound_rows.push(vec![fmt(*t), j.to_string(), fmt(*v)]);
        }
    }
    let (cal, peak) = calibration.ok_or_else(|| CliError::Checkpoint("scatter stage stored no states".into()))?;
    let mut out = Outputs::new();
    write_csv(&out.path(ctx, "detection.csv"), &["t", "j", "species", "raw", "background_subtracted"], hs_rows)?;
    write_csv(&out.path(ctx, "resonance.csv"), &["t", "j", "value"], bound_rows)?;
    write_json(
        &out.path(ctx, "calibration.json"),
        &json!({
            "species": [species], "coefficients": cal.coefficients, "residual": cal.residual,
            "method": cal.method, "max_bound_initial": cal.max_bound, "max_excess_initial": peak,
            "relative_bound_initial": cal.max_bound / peak, "max_bound_all_times": max_bound_later,
            "relative_bound_all_times": max_bound_later / peak, "detector_purity": det.purity(),
        }),
    )?;
    Ok(out)
}
