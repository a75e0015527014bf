//! Validation and execution of one scenario.

use catsim::analysis::{
    bitflip_scan, drive_calibration, drive_for_cat_size, fit_cat_size, fit_kappa2, husimi_imbalance, linear_fit,
    model_steady_state, parity_vs_detuning, phaseflip_scan, spec_at, steady_cat_size, wigner, wigner_at,
    wigner_max_radius, write_bitflip_csv, write_phaseflip_csv, BitflipOptions, FitResult, PhaseflipOptions,
};
use catsim::grid::Grid;
use catsim::hilbert::{cat_basis_state, mode_operator, CatKind, DensityMatrix, Ket, ModeOp, Operator};
use catsim::lindblad::{evolve, EvolutionSpec, Tolerances};
use catsim::models::{confinement_rate, frequency_match, kappa2_effective, ModelSpec, Rung};
use catsim::semiclassical::{fixed_points, grid_export, metastable_amplitude, FieldParams};
use num_complex::Complex64 as C64;
use serde_json::{json, Value};

use crate::config::{Scan, ScenarioConfig, StateChoice};
use crate::error::CliError;

/// What a run produces: the CSV body and a summary for the manifest.
pub struct Outcome {
    pub csv: Vec<u8>,
    pub results: Value,
}

/// A validated scenario, ready to run.
pub struct Plan {
    pub spec: ModelSpec,
    /// Drive α² per point, for the scans that have points.
    drives: Vec<f64>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn nonempty(name: &str, xs: &[f64]) -> Result<(), CliError> {
    if xs.is_empty() {
        return Err(invalid(format!("scan.{name} is empty")));
    }
    if let Some(x) = xs.iter().find(|x| !x.is_finite()) {
        return Err(invalid(format!("scan.{name} holds a non-finite value {x}")));
    }
    Ok(())
}

fn positive(name: &str, x: f64) -> Result<(), CliError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(invalid(format!("scan.{name} must be positive, got {x}")));
    }
    Ok(())
}

fn check_grid(spec: &ModelSpec, half: f64, resolution: usize) -> Result<Grid, CliError> {
    positive("half_extent", half)?;
    let grid = Grid::square(half, resolution)?;
    let corner = half * std::f64::consts::SQRT_2;
    let n = spec.truncations[0];
    if corner > wigner_max_radius(n) {
        return Err(invalid(format!(
            "grid corner |beta| = {corner:.3} exceeds 2*sqrt(N_a) = {:.3}; raise model.truncations",
            wigner_max_radius(n)
        )));
    }
    Ok(grid)
}

fn field_params(spec: &ModelSpec) -> Result<FieldParams, CliError> {
    let p = &spec.params;
    Ok(FieldParams::new(kappa2_effective(p.g2, p.kappa_b), spec.alpha())?
        .with_loss(p.kappa_a)
        .with_detuning(spec.detuning))
}

/// Checks every precondition the scan depends on without running it.
pub fn plan(cfg: &ScenarioConfig) -> Result<Plan, CliError> {
    let spec = cfg.model_spec()?;
    let mut drives = Vec::new();
    match &cfg.scan {
        Scan::Derived {} => {}
        Scan::Bitflip { alpha_sq, cat_size, horizon, samples, rel_step_tol, .. } => {
            drives = match (alpha_sq, cat_size) {
                (Some(a), None) => {
                    nonempty("alpha_sq", a)?;
                    a.clone()
                }
                (None, Some(s)) => {
                    nonempty("cat_size", s)?;
                    s.iter().map(|s| drive_for_cat_size(&spec, *s)).collect::<catsim::Result<_>>()?
                }
                _ => return Err(invalid("bitflip needs exactly one of scan.alpha_sq and scan.cat_size")),
            };
            positive("horizon", *horizon)?;
            if samples.is_some_and(|s| s < 5) {
                return Err(invalid("scan.samples must be at least 5"));
            }
            if let Some(t) = rel_step_tol {
                Tolerances { rel_step_tol: *t, ..Tolerances::default() }.validate()?;
            }
        }
        Scan::Phaseflip { cat_size, horizon, samples } => {
            nonempty("cat_size", cat_size)?;
            for s in cat_size {
                positive("cat_size", *s)?;
            }
            drives = cat_size.iter().map(|s| drive_for_cat_size(&spec, *s)).collect::<catsim::Result<_>>()?;
            if let Some(h) = horizon {
                positive("horizon", *h)?;
            }
            if samples.is_some_and(|s| s < 5) {
                return Err(invalid("scan.samples must be at least 5"));
            }
        }
        Scan::Kappa2Cal { deltas, fit_alpha_sq } => {
            if spec.rung != Rung::OneMode {
                return Err(invalid("kappa2_cal runs on the one_mode rung"));
            }
            nonempty("deltas", deltas)?;
            positive("model.alpha_sq", spec.alpha_sq)?;
            if let Some(a) = fit_alpha_sq {
                positive("fit_alpha_sq", *a)?;
            }
            let reach = deltas.iter().fold(0.0f64, |m, d| m.max(d.abs()));
            let window = kappa2_effective(spec.params.g2, spec.params.kappa_b) * spec.alpha_sq;
            if reach <= window {
                return Err(invalid(format!(
                    "scan.deltas reach {reach} MHz but must extend beyond kappa2*alpha^2 = {window:.4} MHz"
                )));
            }
        }
        Scan::DriveCal { alpha_sq, resolution } => {
            nonempty("alpha_sq", alpha_sq)?;
            if alpha_sq.len() < 2 {
                return Err(invalid("drive_cal needs at least two drives"));
            }
            for a in alpha_sq {
                positive("alpha_sq", *a)?;
            }
            if resolution.is_some_and(|r| r < 5) {
                return Err(invalid("scan.resolution must be at least 5"));
            }
            drives = alpha_sq.clone();
        }
        Scan::Wigner { half_extent, resolution, time, .. } => {
            check_grid(&spec, *half_extent, *resolution)?;
            if let Some(t) = time {
                positive("time", *t)?;
            }
        }
        Scan::Semiclassical { half_extent, resolution } => {
            positive("half_extent", *half_extent)?;
            Grid::square(*half_extent, *resolution)?;
            field_params(&spec)?;
        }
        Scan::Evolve { horizon, samples, observables, initial, .. } => {
            positive("horizon", *horizon)?;
            if *samples < 2 {
                return Err(invalid("scan.samples must be at least 2"));
            }
            if observables.is_empty() {
                return Err(invalid("scan.observables is empty"));
            }
            for o in observables {
                observable(&spec, o)?;
            }
            if *initial == StateChoice::Steady {
                return Err(invalid("evolve cannot start from `steady`"));
            }
        }
    }
    for d in &drives {
        spec_at(&spec, *d).validate()?;
    }
    Ok(Plan { spec, drives })
}

fn observable(spec: &ModelSpec, name: &str) -> Result<Operator, CliError> {
    let sig = spec.sig()?;
    let a = mode_operator(&sig, 0, ModeOp::Annihilation)?;
    Ok(match name {
        "a" => a,
        "a2" => &a * &a,
        "n" => mode_operator(&sig, 0, ModeOp::Number)?,
        "parity" => mode_operator(&sig, 0, ModeOp::Parity)?,
        "husimi" => husimi_imbalance(&sig, 0)?,
        "nb" if spec.rung != Rung::OneMode => mode_operator(&sig, 1, ModeOp::Number)?,
        "nq" if spec.rung == Rung::ThreeMode => mode_operator(&sig, 2, ModeOp::Number)?,
        other => {
            return Err(invalid(format!(
                "unknown observable `{other}` for {:?} (expected a, a2, n, parity, husimi, nb, nq)",
                spec.rung
            )))
        }
    })
}

fn initial_state(spec: &ModelSpec, choice: StateChoice, transmon_excited: bool) -> Result<DensityMatrix, CliError> {
    let n = spec.truncations[0];
    let alpha = C64::new(spec.alpha(), 0.0);
    let kind = match choice {
        StateChoice::Vacuum => {
            return Ok(spec.embed_cat_state(&Ket::coherent(n, C64::new(0.0, 0.0))?, transmon_excited)?)
        }
        StateChoice::Coherent => CatKind::Coherent,
        StateChoice::Plus => CatKind::Plus,
        StateChoice::Minus => CatKind::Minus,
        StateChoice::Zero => CatKind::Zero,
        StateChoice::One => CatKind::One,
        StateChoice::Steady => return Ok(model_steady_state(spec)?),
    };
    Ok(spec.embed_cat_state(&cat_basis_state(n, alpha, kind)?, transmon_excited)?)
}

fn fit_json(f: &FitResult) -> Value {
    serde_json::to_value(f).unwrap_or(Value::Null)
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    write(&mut out)?;
    Ok(out)
}

/// Slope of ln T against |α_∞|² over the points with a finite, positive T.
fn ln_t_slope(xs: &[f64], ts: &[f64]) -> Option<(f64, Option<f64>)> {
    let (x, y): (Vec<f64>, Vec<f64>) =
        xs.iter().zip(ts).filter(|(_, t)| t.is_finite() && **t > 0.0).map(|(x, t)| (*x, t.ln())).unzip();
    let fit = linear_fit(&x, &y).ok()?;
    Some((fit.get("slope")?, fit.stderr_of("slope")))
}

pub fn execute(cfg: &ScenarioConfig, plan: &Plan) -> Result<Outcome, CliError> {
    let spec = &plan.spec;
    match &cfg.scan {
        Scan::Derived {} => {
            let p = &spec.params;
            let k2 = kappa2_effective(p.g2, p.kappa_b);
            let (pump, drive) = frequency_match(p);
            let rows = [
                ("kappa2_mhz", k2),
                ("kappa2_rad_per_us", spec.kappa2()),
                ("kappa_c_mhz", confinement_rate(spec.alpha_sq, k2)),
                ("loss_offset_alpha_sq", p.kappa_a / (2.0 * k2)),
                ("pump_match_residual_mhz", pump),
                ("drive_match_residual_mhz", drive),
            ];
            let mut csv = String::from("quantity,value\n");
            for (k, v) in rows {
                csv.push_str(&format!("{k},{v:.16e}\n"));
            }
            let results: serde_json::Map<String, Value> = rows.iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
            Ok(Outcome { csv: csv.into_bytes(), results: Value::Object(results) })
        }
        Scan::Bitflip { horizon, samples, settle, husimi, rel_step_tol, .. } => {
            let mut opts = BitflipOptions::new(*horizon);
            if let Some(s) = samples {
                opts.samples = *s;
            }
            opts.settle = *settle;
            opts.husimi = *husimi;
            if let Some(t) = rel_step_tol {
                opts.tolerances.rel_step_tol = *t;
            }
            let pts = bitflip_scan(spec, &plan.drives, &opts)?;
            let sizes: Vec<f64> = pts.iter().map(|p| p.alpha_inf_sq).collect();
            let ts: Vec<f64> = pts.iter().map(|p| p.t_bitflip).collect();
            let slope = ln_t_slope(&sizes, &ts);
            let results = json!({
                "ln_t_slope": slope.map(|s| s.0),
                "ln_t_slope_stderr": slope.and_then(|s| s.1),
                "points": pts.iter().map(|p| json!({
                    "alpha_sq": p.alpha_sq,
                    "alpha_inf_sq": p.alpha_inf_sq,
                    "t_bitflip_us": p.t_bitflip,
                    "t_stderr_us": p.t_stderr,
                    "husimi_t_us": p.husimi_fit.as_ref().and_then(|f| f.get("T")),
                    "fit": fit_json(&p.fit),
                    "stats": p.stats,
                })).collect::<Vec<_>>(),
            });
            Ok(Outcome { csv: csv_bytes(|w| write_bitflip_csv(&pts, w))?, results })
        }
        Scan::Phaseflip { cat_size, horizon, samples } => {
            let mut opts = PhaseflipOptions { horizon: *horizon, ..PhaseflipOptions::default() };
            if let Some(s) = samples {
                opts.samples = *s;
            }
            let pts = phaseflip_scan(spec, cat_size, &opts)?;
            let xs: Vec<f64> = pts.iter().map(|p| p.alpha_sq).collect();
            let gs: Vec<f64> = pts.iter().map(|p| p.gamma).collect();
            let line = if xs.len() >= 2 { linear_fit(&xs, &gs).ok() } else { None };
            let results = json!({
                "gamma_slope_per_us": line.as_ref().and_then(|l| l.get("slope")),
                "gamma_intercept_per_us": line.as_ref().and_then(|l| l.get("intercept")),
                "two_kappa_a_per_us": 2.0 * catsim::models::units::to_angular(spec.params.kappa_a),
                "points": pts.iter().map(|p| json!({
                    "alpha_sq": p.alpha_sq,
                    "drive_alpha_sq": p.drive_alpha_sq,
                    "gamma_per_us": p.gamma,
                    "gamma_stderr": p.gamma_stderr,
                })).collect::<Vec<_>>(),
            });
            Ok(Outcome { csv: csv_bytes(|w| write_phaseflip_csv(&pts, w))?, results })
        }
        Scan::Kappa2Cal { deltas, fit_alpha_sq } => {
            let curve = parity_vs_detuning(spec, deltas)?;
            let fit = fit_kappa2(&curve, fit_alpha_sq.unwrap_or(spec.alpha_sq))?;
            let mut csv = String::from("delta_mhz,parity\n");
            for (d, p) in curve.deltas.iter().zip(&curve.parity) {
                csv.push_str(&format!("{d:.16e},{p:.16e}\n"));
            }
            let results = json!({
                "half_width_mhz": curve.half_width(),
                "kappa2_model_mhz": kappa2_effective(spec.params.g2, spec.params.kappa_b),
                "fit": fit_json(&fit),
            });
            Ok(Outcome { csv: csv.into_bytes(), results })
        }
        Scan::DriveCal { resolution, .. } => {
            let rows = plan
                .drives
                .iter()
                .map(|a2| steady_cat_size(spec, *a2, resolution.unwrap_or(61)).map(|(e, f)| (*a2, e, f)))
                .collect::<catsim::Result<Vec<_>>>()?;
            let pairs: Vec<(f64, f64)> = rows.iter().map(|(_, e, f)| (*e, f.get("alpha_inf_sq").unwrap_or(0.0))).collect();
            let cal = drive_calibration(&pairs)?;
            let mut csv = String::from("alpha_sq,eps_d_mhz,alpha_inf_sq\n");
            for ((a2, _, _), (e, s)) in rows.iter().zip(&pairs) {
                csv.push_str(&format!("{a2:.16e},{e:.16e},{s:.16e}\n"));
            }
            let k2 = kappa2_effective(spec.params.g2, spec.params.kappa_b);
            let results = json!({
                "fit": fit_json(&cal),
                "expected_offset": spec.params.kappa_a / (2.0 * k2),
                "expected_slope": 1.0 / spec.params.g2,
            });
            Ok(Outcome { csv: csv.into_bytes(), results })
        }
        Scan::Wigner { state, half_extent, resolution, time } => {
            let mut rho = initial_state(spec, *state, false)?;
            if let Some(t) = time {
                let (h, l) = spec.build()?;
                rho = evolve(&EvolutionSpec::new(h, l, vec![0.0, *t]), &rho)?.final_state;
            }
            if spec.rung != Rung::OneMode {
                rho = rho.partial_trace_keep(0)?;
            }
            let map = wigner(&rho, &Grid::square(*half_extent, *resolution)?)?;
            let cat = fit_cat_size(&map).ok();
            let results = json!({
                "w_origin": wigner_at(&rho, C64::new(0.0, 0.0))?,
                "riemann_sum": map.riemann_sum(),
                "max_abs": map.max_abs(),
                "cat_fit": cat.as_ref().map(fit_json),
            });
            Ok(Outcome { csv: csv_bytes(|w| map.write_csv(w))?, results })
        }
        Scan::Semiclassical { half_extent, resolution } => {
            let fp = field_params(spec)?;
            let field = grid_export(&fp, &Grid::square(*half_extent, *resolution)?)?;
            let results = json!({
                "units": "rates in MHz (nu convention), amplitudes dimensionless",
                "kappa_c_mhz": fp.kappa_c(),
                "metastable_amplitude": metastable_amplitude(&fp).ok(),
                "fixed_points": fixed_points(&fp).iter().map(|p| [p.x, p.y]).collect::<Vec<_>>(),
            });
            Ok(Outcome { csv: csv_bytes(|w| field.write_csv(w))?, results })
        }
        Scan::Evolve { initial, horizon, samples, observables, transmon_excited } => {
            let (h, l) = spec.build()?;
            let times: Vec<f64> = (0..*samples).map(|k| horizon * k as f64 / (*samples - 1) as f64).collect();
            let mut es = EvolutionSpec::new(h, l, times);
            for o in observables {
                es = es.observe(o, observable(spec, o)?);
            }
            let rho0 = initial_state(spec, *initial, *transmon_excited)?;
            let series = evolve(&es, &rho0)?;
            let results = json!({ "stats": series.stats });
            Ok(Outcome { csv: csv_bytes(|w| series.write_csv(w))?, results })
        }
    }
}
