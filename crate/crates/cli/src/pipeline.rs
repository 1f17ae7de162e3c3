//! Manifest → trace fits → sweep records → sweep analyses.

use std::path::Path;

use rayon::prelude::*;
use serde_json::Value;
use spiralres_core::bcs::qp_shifts;
use spiralres_core::lm::LmOptions;
use spiralres_core::resfit::{fit_s11_with, s11_forward_many, S11Fit};
use spiralres_core::sweeps::{
    fit_combined, fit_field_quadratic, fit_power_sweep_tls, fit_temperature_sweep_qp, fit_zeeman,
    photon_number, sorted_sweep, EsrFeature, Onset, SweepKind, SweepRecord,
};
use spiralres_core::tls::{combined_loss_many, power_law_loss};
use spiralres_core::{ComplexSpectrum, Error as CoreError, FitResult, MaterialModel};

use crate::error::{is_fit_failure, CliError, Result};
use crate::ingest::ingest_trace;
use crate::manifest::{PointSpec, SweepManifest};
use crate::report::{band, comparison, fit_json, Obj, PlotTable, Report};

/// Largest tolerated fraction of failed trace fits in one sweep.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;

pub const ALPHA_BAND: (f64, f64) = (0.001, 0.08);
pub const TC_BAND: (f64, f64) = (2.1, 8.3);
pub const SINGLE_PHOTON_Q_BAND: (f64, f64) = (0.9e5, 2.1e5);
pub const Q_TLS0_BAND: (f64, f64) = (0.36e5, 7.4e5);
pub const G_BAND: (f64, f64) = (1.96, 1.98);

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Relative cost tolerance for the reflection fits.
    pub tolerance: Option<f64>,
}

impl RunOptions {
    fn lm(&self) -> LmOptions {
        let mut o = LmOptions::default();
        if let Some(t) = self.tolerance {
            o.ftol = t;
        }
        o
    }
}

#[derive(Debug)]
pub struct TraceOutcome {
    pub point: PointSpec,
    pub fit: std::result::Result<S11Fit, CoreError>,
    pub photon_number: Option<f64>,
}

#[derive(Debug)]
pub struct FittedSweep {
    pub manifest: SweepManifest,
    pub traces: Vec<TraceOutcome>,
    pub records: Vec<SweepRecord>,
}

fn file_label(manifest: &SweepManifest, p: &Path) -> String {
    let base = manifest.path.parent().unwrap_or(Path::new(""));
    p.strip_prefix(base).unwrap_or(p).display().to_string()
}

/// Fits one trace file.
pub fn fit_trace_file(path: &Path, opts: &RunOptions) -> Result<(ComplexSpectrum, S11Fit)> {
    let spec = ingest_trace(path)?;
    let fit = fit_s11_with(&spec, &opts.lm())?;
    Ok((spec, fit))
}

/// Reads every trace up front, so malformed inputs are reported before any
/// fitting, then fits them concurrently.
pub fn fit_sweep(manifest: SweepManifest, opts: &RunOptions) -> Result<FittedSweep> {
    let spectra: Vec<ComplexSpectrum> = manifest
        .points
        .iter()
        .map(|p| ingest_trace(&p.file))
        .collect::<Result<_>>()?;
    let lm = opts.lm();
    let fits: Vec<std::result::Result<S11Fit, CoreError>> =
        spectra.par_iter().map(|s| fit_s11_with(s, &lm)).collect();

    let mut traces = Vec::with_capacity(fits.len());
    let mut records = Vec::new();
    for (point, fit) in manifest.points.iter().zip(fits) {
        let photons = match (&fit, point.drive_power_dbm, manifest.attenuation_db) {
            (Ok(f), Some(p), Some(a)) => photon_number(p, a, f).ok(),
            _ => None,
        };
        if let Ok(f) = &fit {
            records.push(SweepRecord {
                kind: manifest.kind,
                temperature: point.temperature,
                drive_power_dbm: point
                    .drive_power_dbm
                    .zip(manifest.attenuation_db)
                    .map(|(p, a)| p - a),
                photon_number: photons,
                field: point.field,
                f0: f.model.f0,
                q_int: f.model.q_int,
                f0_sigma: f.fit.sigma("f0_hz"),
                q_int_sigma: f.fit.sigma("q_int_dimensionless"),
            });
        }
        traces.push(TraceOutcome {
            point: point.clone(),
            fit,
            photon_number: photons,
        });
    }
    let failed: Vec<String> = traces
        .iter()
        .filter_map(|t| {
            t.fit.as_ref().err().map(|e| {
                format!(
                    "  point {} ({}): {e}",
                    t.point.index,
                    file_label(&manifest, &t.point.file)
                )
            })
        })
        .collect();
    if !failed.is_empty() {
        log::warn!(
            "{}: {} of {} trace fits failed",
            manifest.path.display(),
            failed.len(),
            traces.len()
        );
    }
    if failed.len() as f64 > MAX_FAILURE_FRACTION * traces.len() as f64 {
        return Err(CliError::NonConvergence(format!(
            "{}: {} of {} trace fits failed\n{}",
            manifest.path.display(),
            failed.len(),
            traces.len(),
            failed.join("\n")
        )));
    }
    Ok(FittedSweep {
        manifest,
        traces,
        records,
    })
}

/// Maps fit failures to the non-convergence exit path.
fn analysis_error(what: &str, e: CoreError) -> CliError {
    if is_fit_failure(&e) {
        CliError::NonConvergence(format!("{what}: {e}"))
    } else {
        CliError::Core(e)
    }
}

pub fn s11_json(f: &S11Fit) -> Value {
    Obj::new()
        .value("fit", fit_json(&f.fit))
        .num("q_loaded_dimensionless", f.q_loaded())
        .num("q_coupling_dimensionless", f.model.q_coupling())
        .num("reference_frequency_hz", f.f_ref)
        .num("noise_sigma_dimensionless", f.noise_sigma)
        .num("phase_winding_rad", f.phase_winding)
        .num("durbin_watson_dimensionless", f.durbin_watson)
        .flag("winds_full_circle", f.winds_full_circle())
        .flag("overcoupled", f.model.overcoupled())
        .build()
}

pub fn trace_plot(name: &str, spec: &ComplexSpectrum, f: &S11Fit) -> PlotTable {
    let model = s11_forward_many(&f.model, spec.frequencies());
    PlotTable::new(name)
        .column("frequency_hz", spec.frequencies().to_vec())
        .column(
            "data_re_dimensionless",
            spec.values().iter().map(|z| z.re).collect(),
        )
        .column(
            "data_im_dimensionless",
            spec.values().iter().map(|z| z.im).collect(),
        )
        .column(
            "model_re_dimensionless",
            model.iter().map(|z| z.re).collect(),
        )
        .column(
            "model_im_dimensionless",
            model.iter().map(|z| z.im).collect(),
        )
}

/// `fit-trace`: one spectrum, no manifest.
pub fn trace_report(path: &Path, opts: &RunOptions) -> Result<Report> {
    let (spec, fit) = fit_trace_file(path, opts).map_err(|e| match e {
        CliError::Core(c) => analysis_error(&path.display().to_string(), c),
        other => other,
    })?;
    let plot = trace_plot("trace_model", &spec, &fit);
    let body = Obj::new()
        .text("command", "fit-trace")
        .text(
            "file",
            path.file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
        )
        .num("samples_count", spec.len() as f64)
        .value("trace", s11_json(&fit))
        .value("plot", plot.to_json())
        .build();
    Ok(Report {
        body,
        plots: vec![plot],
    })
}

fn traces_json(s: &FittedSweep) -> Value {
    let items = s
        .traces
        .iter()
        .map(|t| {
            let o = Obj::new()
                .num("index_count", t.point.index as f64)
                .text("file", file_label(&s.manifest, &t.point.file))
                .num("temperature_k", t.point.temperature)
                .opt_num("drive_power_dbm", t.point.drive_power_dbm)
                .num("field_t", t.point.field)
                .opt_num("photon_number_dimensionless", t.photon_number);
            match &t.fit {
                Ok(f) => o.value("result", s11_json(f)),
                Err(e) => o.text("error", e.to_string()),
            }
            .build()
        })
        .collect();
    Value::Array(items)
}

fn sweep_header(s: &FittedSweep) -> Obj {
    let failed = s.traces.iter().filter(|t| t.fit.is_err()).count();
    Obj::new()
        .text("device", s.manifest.device.clone())
        .text("resonator", s.manifest.resonator.clone())
        .text("sweep_kind", s.manifest.kind.as_str())
        .text(
            "manifest",
            s.manifest
                .path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
        )
        .opt_num("attenuation_db", s.manifest.attenuation_db)
        .num("traces_count", s.traces.len() as f64)
        .num("failed_traces_count", failed as f64)
        .value("traces", traces_json(s))
}

fn ensure_kind(s: &FittedSweep, kind: SweepKind) -> Result<()> {
    if s.manifest.kind != kind {
        return Err(CliError::Validation(format!(
            "{}: expected a {} sweep, manifest declares {}",
            s.manifest.path.display(),
            kind.as_str(),
            s.manifest.kind.as_str()
        )));
    }
    Ok(())
}

fn value_sigma(f: &FitResult, name: &str) -> (f64, f64) {
    (f.value(name), f.sigma(name))
}

/// Temperature sweep: both quasiparticle channels, their comparison and
/// model curves.
pub fn temperature_section(s: &FittedSweep, tag: &str) -> Result<(Value, PlotTable)> {
    ensure_kind(s, SweepKind::Temperature)?;
    let m0 = s.manifest.material;
    let fit = fit_temperature_sweep_qp(&s.records, &m0)
        .map_err(|e| analysis_error("temperature fit", e))?;
    let recs = sorted_sweep(&s.records, SweepKind::Temperature)?;
    let temps: Vec<f64> = recs.iter().map(|r| r.temperature).collect();
    let (fr, qr) = (&fit.frequency, &fit.quality);
    let (a, tc) = ("alpha_dimensionless", "tc_k");

    let at = |alpha: f64, tc: f64| MaterialModel { alpha, tc, ..m0 };
    let f00 = fr.value("f0_zero_hz");
    let f_model: Vec<f64> = qp_shifts(&at(fr.value(a), fr.value(tc)), f00, &temps)?
        .iter()
        .map(|sh| f00 * (1.0 + sh.df_over_f))
        .collect();
    let q0 = qr.value("q_int_zero_dimensionless");
    let q_model: Vec<f64> = qp_shifts(&at(qr.value(a), qr.value(tc)), recs[0].f0, &temps)?
        .iter()
        .map(|sh| 1.0 / (1.0 / q0 + sh.dq_inv))
        .collect();
    let plot = PlotTable::new(format!("{tag}_temperature_model"))
        .column("temperature_k", temps)
        .column("f0_data_hz", recs.iter().map(|r| r.f0).collect())
        .column("f0_model_hz", f_model)
        .column(
            "q_int_data_dimensionless",
            recs.iter().map(|r| r.q_int).collect(),
        )
        .column("q_int_model_dimensionless", q_model);

    let body = Obj::new()
        .value("frequency_channel", fit_json(fr))
        .value("quality_channel", fit_json(qr))
        .value(
            "dual_channel",
            Obj::new()
                .value(
                    "alpha",
                    comparison(
                        "alpha_dimensionless",
                        value_sigma(fr, a),
                        value_sigma(qr, a),
                    ),
                )
                .value(
                    "tc",
                    comparison("tc_k", value_sigma(fr, tc), value_sigma(qr, tc)),
                ),
        )
        .value(
            "plausibility",
            Obj::new()
                .value(
                    "frequency_channel_alpha",
                    band(a, fr.value(a), ALPHA_BAND.0, ALPHA_BAND.1),
                )
                .value(
                    "quality_channel_alpha",
                    band(a, qr.value(a), ALPHA_BAND.0, ALPHA_BAND.1),
                )
                .value(
                    "frequency_channel_tc",
                    band(tc, fr.value(tc), TC_BAND.0, TC_BAND.1),
                )
                .value(
                    "quality_channel_tc",
                    band(tc, qr.value(tc), TC_BAND.0, TC_BAND.1),
                ),
        )
        .value("plot", plot.to_json())
        .build();
    Ok((body, plot))
}

/// Power sweep: power-law TLS fit at the sweep temperature.
pub fn power_section(s: &FittedSweep, tag: &str) -> Result<(Value, PlotTable)> {
    ensure_kind(s, SweepKind::Power)?;
    let pf = fit_power_sweep_tls(&s.records, Some(&s.manifest.tls))
        .map_err(|e| analysis_error("power fit", e))?;
    let recs = sorted_sweep(&s.records, SweepKind::Power)?;
    let mut f0s: Vec<f64> = recs.iter().map(|r| r.f0).collect();
    f0s.sort_by(f64::total_cmp);
    let f0 = f0s[f0s.len() / 2];
    let n: Vec<f64> = recs
        .iter()
        .map(|r| r.photon_number.unwrap_or(f64::NAN))
        .collect();
    let q_model = n
        .iter()
        .map(|&x| power_law_loss(&pf.params, x, f0, pf.temperature).map(|l| 1.0 / l))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let plot = PlotTable::new(format!("{tag}_power_model"))
        .column("photon_number_dimensionless", n)
        .column(
            "q_int_data_dimensionless",
            recs.iter().map(|r| r.q_int).collect(),
        )
        .column("q_int_model_dimensionless", q_model);
    let q_tls0 = pf.params.q_tls0;
    let body = Obj::new()
        .value("fit", fit_json(&pf.fit))
        .num("temperature_k", pf.temperature)
        .num("single_photon_q_int_dimensionless", pf.single_photon_q_int)
        .value(
            "plausibility",
            Obj::new()
                .value(
                    "single_photon_q_int",
                    band(
                        "q_int_dimensionless",
                        pf.single_photon_q_int,
                        SINGLE_PHOTON_Q_BAND.0,
                        SINGLE_PHOTON_Q_BAND.1,
                    ),
                )
                .value(
                    "q_tls0",
                    band("q_tls0_dimensionless", q_tls0, Q_TLS0_BAND.0, Q_TLS0_BAND.1),
                ),
        )
        .value("plot", plot.to_json())
        .build();
    Ok((body, plot))
}

/// Joint TLS + quasiparticle fit of a temperature and a power sweep.
pub fn combined_section(
    temp: &FittedSweep,
    power: &FittedSweep,
    tag: &str,
) -> Result<(Value, PlotTable)> {
    ensure_kind(temp, SweepKind::Temperature)?;
    ensure_kind(power, SweepKind::Power)?;
    let cf = fit_combined(
        &temp.records,
        &power.records,
        &temp.manifest.material,
        &temp.manifest.tls,
    )
    .map_err(|e| analysis_error("combined fit", e))?;
    let (fr, qr) = (&cf.frequency, &cf.quality);
    let (a, tc, qt) = ("alpha_dimensionless", "tc_k", "q_tls0_dimensionless");

    let t_recs = sorted_sweep(&temp.records, SweepKind::Temperature)?;
    let p_recs = sorted_sweep(&power.records, SweepKind::Power)?;
    let all: Vec<&SweepRecord> = t_recs.iter().chain(&p_recs).collect();
    let points: Vec<(f64, f64)> = all
        .iter()
        .map(|r| (r.photon_number.unwrap_or(f64::NAN), r.temperature))
        .collect();
    let m0 = temp.manifest.material;
    let f00 = fr.value("f0_zero_hz");
    let freq_tls = spiralres_core::tls::TlsParams {
        q_tls0: fr.value(qt),
        ..temp.manifest.tls
    };
    let f_model: Vec<f64> = combined_loss_many(
        &MaterialModel {
            alpha: fr.value(a),
            tc: fr.value(tc),
            ..m0
        },
        &freq_tls,
        f00,
        &points,
    )?
    .iter()
    .map(|l| f00 * (1.0 + l.df_over_f))
    .collect();
    let qual_tls = spiralres_core::tls::TlsParams {
        q_tls0: qr.value(qt),
        d: qr.value("d_dimensionless"),
        beta1: qr.value("beta1_dimensionless"),
        beta2: qr.value("beta2_dimensionless"),
        q_other: qr.value("q_other_dimensionless"),
        ..temp.manifest.tls
    };
    let f_ref = t_recs.first().map_or(f00, |r| r.f0);
    let q_model: Vec<f64> = combined_loss_many(
        &MaterialModel {
            alpha: qr.value(a),
            tc: qr.value(tc),
            ..m0
        },
        &qual_tls,
        f_ref,
        &points,
    )?
    .iter()
    .map(|l| 1.0 / l.q_int_inv)
    .collect();
    let plot = PlotTable::new(format!("{tag}_combined_model"))
        .column("temperature_k", points.iter().map(|p| p.1).collect())
        .column(
            "photon_number_dimensionless",
            points.iter().map(|p| p.0).collect(),
        )
        .column("f0_data_hz", all.iter().map(|r| r.f0).collect())
        .column("f0_model_hz", f_model)
        .column(
            "q_int_data_dimensionless",
            all.iter().map(|r| r.q_int).collect(),
        )
        .column("q_int_model_dimensionless", q_model);
    let body = Obj::new()
        .value("frequency_channel", fit_json(fr))
        .value("quality_channel", fit_json(qr))
        .flag("identifiability_warning", cf.identifiability_warning)
        .value(
            "dual_channel",
            Obj::new()
                .value(
                    "alpha",
                    comparison(a, value_sigma(fr, a), value_sigma(qr, a)),
                )
                .value(
                    "tc",
                    comparison(tc, value_sigma(fr, tc), value_sigma(qr, tc)),
                )
                .value(
                    "q_tls0",
                    comparison(qt, value_sigma(fr, qt), value_sigma(qr, qt)),
                ),
        )
        .value(
            "plausibility",
            Obj::new()
                .value(
                    "frequency_channel_q_tls0",
                    band(qt, fr.value(qt), Q_TLS0_BAND.0, Q_TLS0_BAND.1),
                )
                .value(
                    "quality_channel_q_tls0",
                    band(qt, qr.value(qt), Q_TLS0_BAND.0, Q_TLS0_BAND.1),
                ),
        )
        .value("plot", plot.to_json())
        .build();
    Ok((body, plot))
}

fn esr_json(e: &EsrFeature) -> Value {
    Obj::new()
        .num("dip_field_t", e.b_dip)
        .num("f0_hz", e.f0)
        .num("dip_depth_dimensionless", e.dip_depth)
        .num("window_lower_t", e.window.0)
        .num("window_upper_t", e.window.1)
        .num(
            "single_resonator_g_dimensionless",
            spiralres_core::constants::H * e.f0 / (spiralres_core::constants::MU_B * e.b_dip),
        )
        .build()
}

/// Field sweep: quadratic pull, vortex onset and ESR dips.
pub fn field_section(s: &FittedSweep, tag: &str) -> Result<(Value, PlotTable, Vec<EsrFeature>)> {
    ensure_kind(s, SweepKind::Field)?;
    let fa = fit_field_quadratic(&s.records).map_err(|e| analysis_error("field fit", e))?;
    let recs = sorted_sweep(&s.records, SweepKind::Field)?;
    let b: Vec<f64> = recs.iter().map(|r| r.field).collect();
    let f_model: Vec<f64> = match &fa.quadratic {
        Some(q) => {
            let (f00, c2) = (q.value("f0_zero_hz"), q.value("c2_hz_per_t2"));
            b.iter().map(|x| f00 - c2 * x * x).collect()
        }
        None => vec![f64::NAN; b.len()],
    };
    let plot = PlotTable::new(format!("{tag}_field_model"))
        .column("field_t", b)
        .column("f0_data_hz", recs.iter().map(|r| r.f0).collect())
        .column("f0_model_hz", f_model)
        .column(
            "q_int_data_dimensionless",
            recs.iter().map(|r| r.q_int).collect(),
        );
    let onset = match fa.onset {
        Onset::Found { field, index } => Obj::new()
            .flag("found", true)
            .num("onset_field_t", field)
            .num("onset_index_count", index as f64),
        Onset::NotFound { sweep_max } => Obj::new()
            .flag("found", false)
            .num("sweep_max_field_t", sweep_max),
    };
    let features = fa.esr.clone();
    let body = Obj::new()
        .value(
            "quadratic",
            fa.quadratic.as_ref().map_or(Value::Null, fit_json),
        )
        .value("vortex_onset", onset)
        .num("prefix_count", fa.prefix_len as f64)
        .flag("prefix_too_short", fa.prefix_too_short)
        .opt_num("residual_blowup_dimensionless", fa.residual_blowup)
        .value(
            "esr_features",
            Value::Array(features.iter().map(esr_json).collect()),
        )
        .value("plot", plot.to_json())
        .build();
    Ok((body, plot, features))
}

/// Zeeman fit over ESR dips pooled from several resonators.
pub fn zeeman_section(features: &[EsrFeature]) -> Value {
    match fit_zeeman(features) {
        Ok(fit) => {
            let g = fit.value("g_dimensionless");
            Obj::new()
                .value("fit", fit_json(&fit))
                .num("features_count", features.len() as f64)
                .value(
                    "plausibility",
                    band("g_dimensionless", g, G_BAND.0, G_BAND.1),
                )
                .build()
        }
        Err(e) => Obj::new()
            .num("features_count", features.len() as f64)
            .text("error", e.to_string())
            .build(),
    }
}

/// Runs every applicable analysis: each sweep on its own, the joint fit
/// when a temperature and a power sweep are both present, and a Zeeman fit
/// when field sweeps provide two or more ESR dips.
pub fn analyze(command: &str, manifests: Vec<SweepManifest>, opts: &RunOptions) -> Result<Report> {
    if manifests.is_empty() {
        return Err(CliError::Validation("no manifests given".into()));
    }
    let sweeps: Vec<FittedSweep> = manifests
        .into_iter()
        .map(|m| fit_sweep(m, opts))
        .collect::<Result<_>>()?;
    let mut plots = Vec::new();
    let mut sections = Vec::new();
    let mut esr = Vec::new();
    for (i, s) in sweeps.iter().enumerate() {
        let tag = format!("sweep{i}");
        let analysis = match s.manifest.kind {
            SweepKind::Temperature => {
                let (v, p) = temperature_section(s, &tag)?;
                plots.push(p);
                v
            }
            SweepKind::Power => {
                let (v, p) = power_section(s, &tag)?;
                plots.push(p);
                v
            }
            SweepKind::Field => {
                let (v, p, f) = field_section(s, &tag)?;
                plots.push(p);
                esr.extend(f);
                v
            }
        };
        sections.push(sweep_header(s).value("analysis", analysis).build());
    }
    let mut body = Obj::new()
        .text("command", command)
        .text("tool_version", env!("CARGO_PKG_VERSION"))
        .value("sweeps", Value::Array(sections));

    let temp = sweeps
        .iter()
        .find(|s| s.manifest.kind == SweepKind::Temperature);
    let power = sweeps.iter().find(|s| s.manifest.kind == SweepKind::Power);
    if let (Some(t), Some(p)) = (temp, power) {
        let (v, plot) = combined_section(t, p, "combined")?;
        plots.push(plot);
        body = body.value("combined", v);
    }
    if sweeps.iter().any(|s| s.manifest.kind == SweepKind::Field) {
        body = body.value("zeeman", zeeman_section(&esr));
    }
    Ok(Report {
        body: body.build(),
        plots,
    })
}

/// Reads manifests, checking each declares the expected kind.
pub fn load_manifests(
    paths: &[std::path::PathBuf],
    kinds: Option<&[SweepKind]>,
) -> Result<Vec<SweepManifest>> {
    let manifests: Vec<SweepManifest> = paths
        .iter()
        .map(|p| SweepManifest::read(p))
        .collect::<Result<_>>()?;
    if let Some(allowed) = kinds {
        for m in &manifests {
            if !allowed.contains(&m.kind) {
                return Err(CliError::Validation(format!(
                    "{}: sweep kind {} not accepted here",
                    m.path.display(),
                    m.kind.as_str()
                )));
            }
        }
    }
    Ok(manifests)
}
