//! `design` and `synth`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use spiralres_core::design::{design, solve_geometry};
use spiralres_core::resfit::S11Model;
use spiralres_core::sweeps::{zeeman_field, SweepKind, SweepRecord};
use spiralres_core::synth::{linewidth_grid, synth_sweep, synth_trace, GroundTruth, TlsLaw};
use spiralres_core::{validate_geometry, ComplexSpectrum, MaterialModel, SpiralGeometry};

use crate::error::{CliError, Result};
use crate::ingest::write_trace;
use crate::manifest::{KeyValues, FIELD_UNITS, FREQUENCY_UNITS, LENGTH_UNITS};
use crate::report::{Obj, Report};

fn missing(kv: &KeyValues, what: &str) -> CliError {
    CliError::Validation(format!("{}: missing {what}", kv.path().display()))
}

/// `design`: forward design of one spiral, or the turn count that best
/// reaches a target fundamental frequency.
pub fn design_report(path: &Path) -> Result<Report> {
    let kv = KeyValues::read(path)?;
    if kv.is_empty() {
        return Err(CliError::Validation(format!(
            "{}: configuration is empty",
            path.display()
        )));
    }
    let pitch = kv
        .quantity("pitch", &LENGTH_UNITS)?
        .ok_or_else(|| missing(&kv, "pitch"))?;
    let width = kv
        .quantity("wire_width", &LENGTH_UNITS)?
        .ok_or_else(|| missing(&kv, "wire_width"))?;
    let d_in = kv
        .quantity("inner_diameter", &LENGTH_UNITS)?
        .ok_or_else(|| missing(&kv, "inner_diameter"))?;
    let turns = kv.count("turns_count")?;
    let target = kv.quantity("target_fg", &FREQUENCY_UNITS)?;
    let mut m = MaterialModel::niobium(kv.number_or("tc_k", 8.0)?)
        .with_alpha(kv.number_or("alpha_dimensionless", 0.0)?);
    if let Some(e) = kv.number("eps_eff_dimensionless")? {
        m = m.with_eps_eff(e);
    }
    m.validate()?;
    kv.finish()?;

    let mut body = Obj::new().text("command", "design");
    let geometry = match (turns, target) {
        (Some(n), None) => {
            let n = u32::try_from(n)
                .map_err(|_| CliError::Validation(format!("turns_count {n} too large")))?;
            SpiralGeometry::new(pitch, width, n, d_in)?
        }
        (None, Some(t)) => {
            let sol = solve_geometry(t, pitch, width, d_in, &m)?;
            body = body.value(
                "solver",
                Obj::new()
                    .num("target_fg_hz", t)
                    .num("achieved_fg_hz", sol.achieved_fg)
                    .num("relative_miss_dimensionless", sol.relative_miss),
            );
            sol.geometry
        }
        _ => {
            return Err(CliError::Validation(format!(
                "{}: give exactly one of `turns_count` and `target_fg_*`",
                path.display()
            )))
        }
    };
    let g = validate_geometry(&geometry)?;
    let d = design(&geometry, &m)?;
    let body = body
        .value(
            "geometry",
            Obj::new()
                .num("pitch_m", g.pitch_m)
                .num("wire_width_m", g.wire_width_m)
                .num("gap_m", g.gap_m)
                .num("turns_count", g.turns_dimensionless as f64)
                .num("inner_diameter_m", g.inner_diameter_m)
                .num("outer_diameter_m", g.outer_diameter_m)
                .num("average_diameter_m", g.average_diameter_m)
                .num("fill_ratio_dimensionless", g.fill_ratio_dimensionless)
                .flag("accuracy_warning", g.accuracy_warning)
                .num("pitch_um", g.pitch_m * 1e6)
                .num("outer_diameter_um", g.outer_diameter_m * 1e6),
        )
        .value(
            "material",
            Obj::new()
                .num("tc_k", m.tc)
                .num("alpha_dimensionless", m.alpha)
                .num("eps_eff_dimensionless", m.eps_eff),
        )
        .value(
            "result",
            Obj::new()
                .num("lg_h", d.lg_h)
                .num("lk_h", d.lk_h)
                .num("fg_hz", d.fg_hz)
                .num("f0_predicted_hz", d.f0_predicted_hz)
                .num("zc_ohm", d.zc_ohm)
                .num("fg_ghz", d.fg_hz * 1e-9)
                .num("f0_predicted_ghz", d.f0_predicted_hz * 1e-9)
                .num("zc_kohm", d.zc_ohm * 1e-3),
        )
        .build();
    Ok(Report {
        body,
        plots: Vec::new(),
    })
}

/// Which dataset a synth configuration describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SynthKind {
    Trace,
    Sweep(SweepKind),
}

fn parse_law(s: &str, kv: &KeyValues) -> Result<TlsLaw> {
    match s {
        "saturation" => Ok(TlsLaw::Saturation),
        "power_law" => Ok(TlsLaw::PowerLaw),
        "off" => Ok(TlsLaw::Off),
        other => Err(CliError::Validation(format!(
            "{}: unknown tls_law `{other}` (saturation, power_law, off)",
            kv.path().display()
        ))),
    }
}

/// Sweep grid from an explicit list or a start/stop/count range.
fn read_grid(kv: &KeyValues, kind: SweepKind) -> Result<Vec<f64>> {
    let units: &[(&str, f64)] = match kind {
        SweepKind::Temperature => &[("_k", 1.0)],
        SweepKind::Power => &[("_dimensionless", 1.0)],
        SweepKind::Field => &FIELD_UNITS,
    };
    let mut list = None;
    for &(u, factor) in units {
        if let Some(v) = kv.numbers(&format!("grid{u}"))? {
            list = Some(v.into_iter().map(|x| x * factor).collect::<Vec<_>>());
        }
    }
    let start = kv.quantity("grid_start", units)?;
    let stop = kv.quantity("grid_stop", units)?;
    let count = kv.count("grid_points_count")?;
    let spacing = kv.text("grid_spacing").unwrap_or_else(|| "linear".into());
    let grid = match (list, start, stop, count) {
        (Some(v), None, None, None) => v,
        (None, Some(a), Some(b), Some(n)) if n >= 2 => match spacing.as_str() {
            "linear" => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
            "log" if a > 0.0 && b > 0.0 => (0..n).map(|i| a * (b / a).powf(i as f64 / (n - 1) as f64)).collect(),
            other => {
                return Err(CliError::Validation(format!(
                    "{}: grid_spacing `{other}` needs `linear`, or `log` with positive ends",
                    kv.path().display()
                )))
            }
        },
        _ => {
            return Err(CliError::Validation(format!(
                "{}: give either a `grid_*` list or `grid_start_*`, `grid_stop_*` and `grid_points_count` >= 2",
                kv.path().display()
            )))
        }
    };
    Ok(grid)
}

/// In-memory synthetic dataset; nothing touches the disk until
/// [`SynthOutput::write`].
#[derive(Debug)]
pub struct SynthOutput {
    files: Vec<(PathBuf, ComplexSpectrum)>,
    texts: Vec<(PathBuf, String)>,
}

impl SynthOutput {
    pub fn write(&self, out: &Path) -> Result<()> {
        let ensure_parent = |p: &Path| match p.parent() {
            Some(dir) => std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e)),
            None => Ok(()),
        };
        for (rel, spec) in &self.files {
            let p = out.join(rel);
            ensure_parent(&p)?;
            write_trace(&p, spec)?;
        }
        for (rel, text) in &self.texts {
            let p = out.join(rel);
            ensure_parent(&p)?;
            std::fs::write(&p, text).map_err(|e| CliError::io(&p, e))?;
        }
        Ok(())
    }

    /// Relative paths of the manifests written, in order.
    pub fn manifests(&self) -> Vec<&Path> {
        self.texts
            .iter()
            .map(|(p, _)| p.as_path())
            .filter(|p| p.file_name().is_some_and(|n| n == "manifest.txt"))
            .collect()
    }
}

fn point_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(i as u64)
}

fn truth_json(gt: &GroundTruth, kind: &str) -> String {
    let s = &gt.s11;
    let m = &gt.material;
    let t = &gt.tls;
    let f = &gt.field;
    let law = match gt.tls_law {
        TlsLaw::Saturation => "saturation",
        TlsLaw::PowerLaw => "power_law",
        TlsLaw::Off => "off",
    };
    let body = Obj::new()
        .text("sweep_kind", kind)
        .text("tls_law", law)
        .num("seed_count", gt.seed as f64)
        .num("f0_hz", s.f0)
        .num("q_int_dimensionless", s.q_int)
        .num("q_ext_dimensionless", s.q_ext)
        .num("phi_rad", s.phi)
        .num("a_dimensionless", s.a)
        .num("theta_rad", s.theta)
        .num("tau_s", s.tau)
        .num("tc_k", m.tc)
        .num("alpha_dimensionless", m.alpha)
        .num("gap_ratio_dimensionless", m.gap_ratio)
        .num("q_tls0_dimensionless", t.q_tls0)
        .num("n_c_dimensionless", t.n_c)
        .num("beta_dimensionless", t.beta)
        .num("d_dimensionless", t.d)
        .num("beta1_dimensionless", t.beta1)
        .num("beta2_dimensionless", t.beta2)
        .num("q_other_dimensionless", t.q_other)
        .num("c2_hz_per_t2", f.c2)
        .num("vortex_onset_t", f.vortex_onset)
        .num("collapse_rate_per_t", f.collapse_rate)
        .num("esr_g_dimensionless", f.esr_g)
        .num("esr_depth_dimensionless", f.esr_depth)
        .num("esr_width_t", f.esr_width)
        .num("esr_zeeman_field_t", zeeman_field(s.f0, f.esr_g))
        .num("trace_noise_sigma_dimensionless", gt.noise.complex_sigma)
        .num("q_int_rel_sigma_dimensionless", gt.noise.q_int_rel_sigma)
        .num("f0_rel_sigma_dimensionless", gt.noise.f0_rel_sigma)
        .num(
            "f0_shift_rel_sigma_dimensionless",
            gt.noise.f0_shift_rel_sigma,
        )
        .num("base_temperature_k", gt.base_temperature)
        .num("base_photons_dimensionless", gt.base_photons)
        .build();
    let mut s = serde_json::to_string_pretty(&body).expect("truth serializes");
    s.push('\n');
    s
}

struct DatasetOptions {
    device: String,
    attenuation_db: f64,
    /// Trace span in loaded linewidths either side of the resonance.
    linewidths: f64,
    points: usize,
}

fn sweep_manifest(
    gt: &GroundTruth,
    kind: SweepKind,
    records: &[SweepRecord],
    resonator: &str,
    grid: &DatasetOptions,
    dir: &Path,
) -> Result<(String, Vec<(PathBuf, ComplexSpectrum)>)> {
    let mut text = String::new();
    let mut files = Vec::with_capacity(records.len());
    let _ = writeln!(
        text,
        "# synthetic {} sweep, seed {}",
        kind.as_str(),
        gt.seed
    );
    let _ = writeln!(text, "device = {}", grid.device);
    let _ = writeln!(text, "resonator = {resonator}");
    let _ = writeln!(text, "sweep_kind = {}", kind.as_str());
    let _ = writeln!(text, "attenuation_db = {}", grid.attenuation_db);
    if kind != SweepKind::Temperature {
        let _ = writeln!(text, "temperature_k = {}", gt.base_temperature);
    }
    for (i, r) in records.iter().enumerate() {
        let mut point = *gt;
        point.s11.f0 = r.f0;
        point.s11.q_int = r.q_int;
        point.seed = point_seed(gt.seed, i);
        let freqs = linewidth_grid(&point.s11, grid.linewidths, grid.points);
        let spec = synth_trace(&point, &freqs)?;
        let name = format!("point_{i:04}.csv");
        files.push((dir.join(&name), spec));
        let _ = writeln!(text, "point.{i}.file = {name}");
        if kind == SweepKind::Temperature {
            let _ = writeln!(text, "point.{i}.temperature_k = {}", r.temperature);
        }
        if let Some(p) = r.drive_power_dbm {
            let _ = writeln!(
                text,
                "point.{i}.drive_power_dbm = {}",
                p + grid.attenuation_db
            );
        }
        if kind == SweepKind::Field {
            let _ = writeln!(text, "point.{i}.field_t = {}", r.field);
        }
    }
    Ok((text, files))
}

/// `synth`: builds a dataset from a ground-truth configuration. Keys not
/// given fall back to a representative overcoupled spiral.
pub fn synth(config: &Path, seed: Option<u64>) -> Result<SynthOutput> {
    let kv = KeyValues::read(config)?;
    if kv.is_empty() {
        return Err(CliError::Validation(format!(
            "{}: configuration is empty",
            config.display()
        )));
    }
    let kind = match kv.required_text("sweep_kind")?.as_str() {
        "trace" => SynthKind::Trace,
        other => SynthKind::Sweep(other.parse().map_err(|e: spiralres_core::Error| {
            CliError::Validation(format!("{}: {e}", config.display()))
        })?),
    };
    let seed = match (seed, kv.text("seed")) {
        (Some(s), _) => s,
        (None, Some(t)) => t.parse().map_err(|_| {
            CliError::Validation(format!(
                "{}: seed `{t}` is not an integer",
                config.display()
            ))
        })?,
        (None, None) => 0,
    };
    let device = kv.text("device").unwrap_or_else(|| "synthetic".into());
    let resonator = kv.text("resonator").unwrap_or_else(|| "r".into());

    let mut gt = GroundTruth::example(seed);
    let base = gt;
    let f0s = match (kv.numbers("f0_hz")?, kv.numbers("f0_ghz")?) {
        (Some(v), None) => v,
        (None, Some(v)) => v.into_iter().map(|x| x * 1e9).collect(),
        (None, None) => vec![base.s11.f0],
        _ => {
            return Err(CliError::Validation(format!(
                "{}: `f0` given more than once",
                config.display()
            )))
        }
    };
    gt.s11 = S11Model {
        q_int: kv.number_or("q_int_dimensionless", base.s11.q_int)?,
        q_ext: kv.number_or("q_ext_dimensionless", base.s11.q_ext)?,
        phi: kv.number_or("phi_rad", base.s11.phi)?,
        a: kv.number_or("a_dimensionless", base.s11.a)?,
        theta: kv.number_or("theta_rad", base.s11.theta)?,
        tau: kv.number_or("tau_s", base.s11.tau)?,
        ..base.s11
    };
    gt.material = MaterialModel {
        tc: kv.number_or("tc_k", base.material.tc)?,
        alpha: kv.number_or("alpha_dimensionless", base.material.alpha)?,
        gap_ratio: kv.number_or("gap_ratio_dimensionless", base.material.gap_ratio)?,
        ..base.material
    };
    if let Some(law) = kv.text("tls_law") {
        gt.tls_law = parse_law(&law, &kv)?;
    }
    let t = &mut gt.tls;
    t.q_tls0 = kv.number_or("q_tls0_dimensionless", t.q_tls0)?;
    t.n_c = kv.number_or("n_c_dimensionless", t.n_c)?;
    t.beta = kv.number_or("beta_dimensionless", t.beta)?;
    t.d = kv.number_or("d_dimensionless", t.d)?;
    t.beta1 = kv.number_or("beta1_dimensionless", t.beta1)?;
    t.beta2 = kv.number_or("beta2_dimensionless", t.beta2)?;
    t.q_other = kv.number_or("q_other_dimensionless", t.q_other)?;
    let f = &mut gt.field;
    f.c2 = kv.number_or("c2_hz_per_t2", f.c2)?;
    f.vortex_onset = kv
        .quantity("vortex_onset", &FIELD_UNITS)?
        .unwrap_or(f.vortex_onset);
    f.collapse_rate = kv.number_or("collapse_rate_per_t", f.collapse_rate)?;
    f.esr_g = kv.number_or("esr_g_dimensionless", f.esr_g)?;
    f.esr_depth = kv.number_or("esr_depth_dimensionless", f.esr_depth)?;
    f.esr_width = kv
        .quantity("esr_width", &FIELD_UNITS)?
        .unwrap_or(f.esr_width);
    let n = &mut gt.noise;
    n.complex_sigma = kv.number_or("trace_noise_sigma_dimensionless", 1e-3)?;
    n.q_int_rel_sigma = kv.number_or("q_int_rel_sigma_dimensionless", 0.0)?;
    n.f0_rel_sigma = kv.number_or("f0_rel_sigma_dimensionless", 0.0)?;
    n.f0_shift_rel_sigma = kv.number_or("f0_shift_rel_sigma_dimensionless", 0.0)?;
    gt.base_temperature = kv.number_or("base_temperature_k", base.base_temperature)?;
    gt.base_photons = kv.number_or("base_photons_dimensionless", base.base_photons)?;
    let trace_grid = DatasetOptions {
        device,
        attenuation_db: kv.number_or("attenuation_db", 60.0)?,
        linewidths: kv.number_or("trace_linewidths_dimensionless", 4.0)?,
        points: kv.count("trace_points_count")?.unwrap_or(801),
    };
    if trace_grid.points < 16 || trace_grid.linewidths.is_nan() || trace_grid.linewidths <= 0.0 {
        return Err(CliError::Validation(format!(
            "{}: traces need >= 16 points and a positive span",
            config.display()
        )));
    }
    let grid = match kind {
        SynthKind::Sweep(k) => Some(read_grid(&kv, k)?),
        SynthKind::Trace => None,
    };
    kv.finish()?;
    gt.material.validate()?;
    gt.tls.validate()?;
    if f0s.len() > 1 && kind != SynthKind::Sweep(SweepKind::Field) {
        return Err(CliError::Validation(format!(
            "{}: several f0 values are only supported for field sweeps",
            config.display()
        )));
    }

    let mut out = SynthOutput {
        files: Vec::new(),
        texts: Vec::new(),
    };
    match (kind, grid) {
        (SynthKind::Trace, _) => {
            gt.s11.f0 = f0s[0];
            gt.s11.validate()?;
            let freqs = linewidth_grid(&gt.s11, trace_grid.linewidths, trace_grid.points);
            out.files
                .push(("trace.csv".into(), synth_trace(&gt, &freqs)?));
            out.texts
                .push(("truth.json".into(), truth_json(&gt, "trace")));
        }
        (SynthKind::Sweep(k), Some(grid)) => {
            let several = f0s.len() > 1;
            for (j, &f0) in f0s.iter().enumerate() {
                let mut g = gt;
                g.s11.f0 = f0;
                g.seed = seed.wrapping_add(j as u64);
                g.s11.validate()?;
                let records = synth_sweep(&g, k, &grid)?;
                let dir = if several {
                    PathBuf::from(format!("resonator_{j}"))
                } else {
                    PathBuf::new()
                };
                let label = if several {
                    format!("{resonator}{j}")
                } else {
                    resonator.clone()
                };
                let (text, files) = sweep_manifest(&g, k, &records, &label, &trace_grid, &dir)?;
                out.files.extend(files);
                out.texts.push((dir.join("manifest.txt"), text));
                out.texts
                    .push((dir.join("truth.json"), truth_json(&g, k.as_str())));
            }
        }
        (SynthKind::Sweep(_), None) => unreachable!("sweep grids are read above"),
    }
    Ok(out)
}
