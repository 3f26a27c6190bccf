use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;
use transverse_core::cartan::{cartan_project, dual_functional, phi_length, GroupElement, LinearFunctional, Word};
use transverse_core::flow::{
    invariance_residual, recurrence_diagnostic, sample_pairs, write_trajectories_csv, BmsAssembly, FlowError,
};
use transverse_core::orbit::{cached_ball, limit_set_sample, write_sphere_csv, WordBall};
use transverse_core::patterson::{
    calibrate_shadow_radius, check_exponent, conformality_check, patterson_measure, patterson_shell, Cells,
    HFunction, PattersonError, MASS_FLOOR,
};
use transverse_core::series::{
    critical_exponent_of_ball, divergence_type, entropy_drop_experiment, manhattan_experiment, SeriesEstimate,
};
use transverse_core::{presets, Functional, Preset};

use crate::config::{element_from_entries, parse_numbers, parse_theta, require_symmetric, ExperimentConfig};
use crate::{CliError, Command};

fn numeric(e: impl Display) -> CliError {
    CliError::Numeric(e.to_string())
}

fn patterson_err(e: PattersonError) -> CliError {
    match e {
        PattersonError::NoDomain(_) | PattersonError::BelowCritical { .. } => CliError::Config(e.to_string()),
        other => numeric(other),
    }
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

/// Collects the files of one run and writes the manifest at the end.
struct Run {
    dir: PathBuf,
    files: Vec<String>,
    start: Instant,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    options: serde_json::Value,
    config: &'a ExperimentConfig,
    versions: Versions,
    wall_clock_seconds: f64,
    outputs: &'a [String],
}

#[derive(Serialize)]
struct Versions {
    td: &'static str,
    transverse_core: &'static str,
}

impl Run {
    fn new(config: &ExperimentConfig) -> Result<Self, CliError> {
        fs::create_dir_all(&config.out)?;
        Ok(Run {
            dir: config.out.clone(),
            files: Vec::new(),
            start: Instant::now(),
        })
    }

    fn table<R: AsRef<[String]>>(&mut self, name: &str, header: &[&str], rows: &[R]) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r.as_ref())?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        self.file(name, &bytes)?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    fn file(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn finish(self, command: &str, options: serde_json::Value, config: &ExperimentConfig) -> Result<(), CliError> {
        let manifest = Manifest {
            command,
            options,
            config,
            versions: Versions {
                td: env!("CARGO_PKG_VERSION"),
                transverse_core: transverse_core::VERSION,
            },
            wall_clock_seconds: self.start.elapsed().as_secs_f64(),
            outputs: &self.files,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(self.dir.join("manifest.json"), text)?;
        Ok(())
    }
}

fn print(table: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    out.write_all(table.as_bytes())?;
    Ok(())
}

fn ball(preset: &Preset, config: &ExperimentConfig, radius: usize) -> Result<WordBall<f64>, CliError> {
    cached_ball(preset, radius, config.budget, &config.tolerances, None).map_err(numeric)
}

fn estimate(ball: &WordBall<f64>, phi: &Functional, config: &ExperimentConfig) -> Result<SeriesEstimate, CliError> {
    let mut radii = config.radii();
    radii.retain(|&r| r <= ball.radius());
    if radii.is_empty() {
        radii.push(ball.radius());
    }
    critical_exponent_of_ball(ball, phi, &radii).map_err(numeric)
}

fn max_radius(config: &ExperimentConfig) -> usize {
    config.radii().into_iter().chain([config.radius]).max().unwrap_or(config.radius)
}

pub fn dispatch(command: &Command, config: &ExperimentConfig) -> Result<(), CliError> {
    match command {
        Command::Presets => cmd_presets(config),
        Command::Ball => cmd_ball(config),
        Command::Kappa { matrix } => cmd_kappa(config, matrix.as_deref()),
        Command::Delta => cmd_delta(config),
        Command::Patterson { s, shell } => cmd_patterson(config, *s, *shell),
        Command::ShadowCheck {
            shadow_radius,
            declared_c,
        } => cmd_shadow_check(config, *shadow_radius, *declared_c),
        Command::Manhattan {
            lambdas,
            functional2,
            probe_words,
        } => cmd_manhattan(config, lambdas, functional2.as_deref(), *probe_words),
        Command::EntropyDrop { subgroup } => cmd_entropy_drop(config, subgroup),
        Command::Flow { horizon, samples } => cmd_flow(config, *horizon, *samples),
    }
}

fn cmd_presets(config: &ExperimentConfig) -> Result<(), CliError> {
    let mut run = Run::new(config)?;
    let mut rows = Vec::new();
    for name in presets::NAMES {
        let p = presets::by_name(name).map_err(numeric)?;
        rows.push(vec![
            name.to_string(),
            p.dim().to_string(),
            p.theta.to_string(),
            p.generators.len().to_string(),
            p.domain.map(|_| "klein-disk".to_string()).unwrap_or_default(),
            p.subgroups.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>().join(" "),
        ]);
    }
    let t = run.table("presets.csv", &["name", "dim", "theta", "generators", "domain", "subgroups"], &rows)?;
    print(&t)?;
    run.finish("presets", serde_json::json!({}), config)
}

fn cmd_ball(config: &ExperimentConfig) -> Result<(), CliError> {
    let preset = config.resolve_preset()?;
    let mut run = Run::new(config)?;
    let b = ball(&preset, config, config.radius)?;
    let mut buf = Vec::new();
    write_sphere_csv(&b, &preset.theta, &mut buf).map_err(numeric)?;
    run.file("spheres.csv", &buf)?;
    print(std::str::from_utf8(&buf).expect("utf-8"))?;
    run.finish("ball", serde_json::json!({ "elements": b.len() }), config)
}

fn kappa_row(label: String, g: &GroupElement<f64>, phi: &Functional) -> Result<Vec<String>, CliError> {
    let k = cartan_project(g).map_err(numeric)?;
    let w = k.weight_coords(&phi.theta);
    let mut row = vec![label];
    row.extend(k.to_f64_vec().into_iter().map(fmt));
    row.extend(phi.theta.indices().iter().map(|&j| fmt(w.get(j).expect("index in theta"))));
    row.push(fmt(phi.eval(&k)));
    // elements without a usable eigenvalue gap have no length
    row.push(phi_length(g, phi).map(fmt).unwrap_or_default());
    Ok(row)
}

fn kappa_header(d: usize, phi: &Functional) -> Vec<String> {
    let mut h = vec!["word".to_string()];
    h.extend((1..=d).map(|i| format!("kappa_{i}")));
    h.extend(phi.theta.indices().iter().map(|j| format!("omega_{j}")));
    h.push("phi_kappa".into());
    h.push("phi_length".into());
    h
}

fn cmd_kappa(config: &ExperimentConfig, matrix: Option<&str>) -> Result<(), CliError> {
    let mut run = Run::new(config)?;
    let (rows, header) = if let Some(m) = matrix {
        let g = element_from_entries(&parse_numbers(m)?, &config.tolerances)?;
        let d = g.dim();
        let theta = match &config.theta {
            Some(t) => parse_theta(d, t)?,
            None => transverse_core::cartan::RootSubset::full(d),
        };
        let phi = config.resolve_functional(&theta)?;
        (vec![kappa_row("matrix".into(), &g, &phi)?], kappa_header(d, &phi))
    } else {
        let preset = config.resolve_preset()?;
        let phi = config.resolve_functional(&preset.theta)?;
        let b = ball(&preset, config, config.radius)?;
        let rows = (0..b.len())
            .map(|i| kappa_row(b.word(i).to_string(), &b.element(i), &phi))
            .collect::<Result<Vec<_>, _>>()?;
        (rows, kappa_header(preset.dim(), &phi))
    };
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let t = run.table("kappa.csv", &header, &rows)?;
    print(&t)?;
    run.finish("kappa", serde_json::json!({ "matrix": matrix }), config)
}

fn cmd_delta(config: &ExperimentConfig) -> Result<(), CliError> {
    let preset = config.resolve_preset()?;
    let phi = config.resolve_functional(&preset.theta)?;
    let mut run = Run::new(config)?;
    let b = ball(&preset, config, max_radius(config))?;
    let e = estimate(&b, &phi, config)?;
    let per: Vec<Vec<String>> = e
        .per_radius
        .iter()
        .map(|r| {
            vec![
                r.radius.to_string(),
                fmt(r.complete_below),
                fmt(r.window.0),
                fmt(r.window.1),
                fmt(r.regression),
                fmt(r.bisection),
            ]
        })
        .collect();
    run.table(
        "delta_by_radius.csv",
        &["radius", "complete_below", "window_lo", "window_hi", "delta_regression", "delta_bisection"],
        &per,
    )?;
    let counts: Vec<Vec<String>> = e.counts.iter().map(|(t, n)| vec![fmt(*t), n.to_string()]).collect();
    run.table("counts.csv", &["T", "N_T"], &counts)?;
    let sums: Vec<Vec<String>> = e
        .partial_sums
        .iter()
        .map(|p| vec![fmt(p.s), p.radius.to_string(), fmt(p.partial_sum)])
        .collect();
    run.table("partial_sums.csv", &["s", "radius", "partial_sum"], &sums)?;
    let summary = vec![vec![
        fmt(e.delta_hat),
        fmt(e.band),
        format!("{:?}", divergence_type(&e)),
        e.possibly_infinite.to_string(),
    ]];
    let t = run.table(
        "delta.csv",
        &["delta_hat", "band", "divergence_type", "possibly_infinite"],
        &summary,
    )?;
    print(&t)?;
    run.finish("delta", serde_json::json!({}), config)
}

fn cmd_patterson(config: &ExperimentConfig, s: Option<f64>, shell: usize) -> Result<(), CliError> {
    let preset = config.resolve_preset()?;
    require_symmetric(&preset.theta)?;
    let phi = config.resolve_functional(&preset.theta)?;
    let mut run = Run::new(config)?;
    let b = ball(&preset, config, config.radius)?;
    let e = estimate(&b, &phi, config)?;
    let s = s.unwrap_or(e.delta_hat);
    check_exponent(s, e.delta_hat, e.band).map_err(patterson_err)?;
    let mu = if shell == 0 {
        patterson_measure(&b, &phi, s, HFunction::ConstantOne)
    } else {
        patterson_shell(&b, &phi, s, HFunction::ConstantOne, shell)
    }
    .map_err(patterson_err)?;
    let atoms: Vec<Vec<String>> = mu
        .atoms
        .iter()
        .map(|a| {
            vec![
                a.word.as_ref().map(|w| w.to_string()).unwrap_or_default(),
                fmt(a.weight),
                fmt(a.phi_value),
            ]
        })
        .collect();
    run.table("atoms.csv", &["word", "weight", "phi_kappa"], &atoms)?;
    run.file("measure.json", mu.to_json().map_err(patterson_err)?.as_bytes())?;

    let flags = mu.to_flags(&preset).map_err(patterson_err)?;
    let sample = limit_set_sample(&b, &preset.theta, 2).map_err(numeric)?;
    let cells = Cells::new(sample.flags.into_iter().map(|(_, f)| f).collect());
    let mut rows = Vec::new();
    for l in preset.letters() {
        let w = Word::letter(l);
        let rep = conformality_check(&flags, &preset.evaluate(&w), &cells, MASS_FLOOR).map_err(patterson_err)?;
        rows.push(vec![
            w.to_string(),
            fmt(rep.max_rel_error),
            rep.cells.len().to_string(),
            rep.skipped.len().to_string(),
        ]);
    }
    let t = run.table(
        "conformality.csv",
        &["generator", "conformality_residual", "cells", "skipped_cells"],
        &rows,
    )?;
    print(&t)?;
    run.finish("patterson", serde_json::json!({ "s": s, "shell": shell }), config)
}

const SHADOW_GRID: [f64; 6] = [0.01, 0.03, 0.1, 0.3, 1.0, 2.0];

fn cmd_shadow_check(config: &ExperimentConfig, shadow_radius: Option<f64>, declared_c: f64) -> Result<(), CliError> {
    let preset = config.resolve_preset()?;
    require_symmetric(&preset.theta)?;
    if preset.domain.is_none() {
        return Err(CliError::Config(format!("preset {} has no convex domain", preset.name)));
    }
    let phi = config.resolve_functional(&preset.theta)?;
    let mut run = Run::new(config)?;
    let b = ball(&preset, config, config.radius)?;
    let e = estimate(&b, &phi, config)?;
    let mu = patterson_shell(&b, &phi, e.delta_hat, HFunction::ConstantOne, 1)
        .and_then(|m| m.to_flags(&preset))
        .map_err(patterson_err)?;
    let top = 10.min(b.radius().saturating_sub(2)).max(1);
    let gammas: Vec<_> = (4.min(top)..=top).flat_map(|n| b.sphere(n)).map(|i| b.element(i)).collect();
    let sweep = calibrate_shadow_radius(&mu, &preset, &gammas, &SHADOW_GRID, declared_c).map_err(patterson_err)?;
    let rows: Vec<Vec<String>> = sweep.rows.iter().map(|(r, lo, hi)| vec![fmt(*r), fmt(*lo), fmt(*hi)]).collect();
    run.table("shadow_sweep.csv", &["shadow_radius", "min_ratio", "max_ratio"], &rows)?;
    let r = match (shadow_radius, sweep.r0) {
        (Some(r), _) => r,
        (None, Some(r0)) => r0 + 1.0,
        (None, None) => return Err(numeric("no shadow radius in the grid satisfies the declared constant")),
    };
    let rep = transverse_core::patterson::shadow_lemma_check(&mu, &preset, r, &gammas, declared_c)
        .map_err(patterson_err)?;
    let rows: Vec<Vec<String>> = rep
        .rows
        .iter()
        .map(|x| vec![x.word.clone(), x.length.to_string(), fmt(x.shadow_mass), fmt(x.ratio)])
        .collect();
    run.table("shadow.csv", &["word", "length", "shadow_mass", "ratio"], &rows)?;
    let t = run.table(
        "shadow_summary.csv",
        &["shadow_radius", "min_ratio", "max_ratio", "constant", "declared_c", "pass"],
        &[vec![
            fmt(rep.r),
            fmt(rep.min_ratio),
            fmt(rep.max_ratio),
            fmt(rep.constant),
            fmt(rep.declared_c),
            rep.pass.to_string(),
        ]],
    )?;
    print(&t)?;
    run.finish(
        "shadow-check",
        serde_json::json!({ "shadow_radius": shadow_radius, "declared_c": declared_c }),
        config,
    )
}

fn cmd_manhattan(
    config: &ExperimentConfig,
    lambdas: &[f64],
    functional2: Option<&str>,
    probe_words: usize,
) -> Result<(), CliError> {
    let preset = config.resolve_preset()?;
    let theta = &preset.theta;
    let phi1 = config.resolve_functional(theta)?;
    let phi2 = match functional2 {
        Some(s) => LinearFunctional::parse(theta, s).map_err(|e| CliError::Config(e.to_string()))?,
        None => LinearFunctional::omega(theta, *theta.indices().last().expect("non-empty theta"))
            .map_err(|e| CliError::Config(e.to_string()))?,
    };
    if lambdas.iter().any(|l| !(0.0..=1.0).contains(l)) {
        return Err(CliError::Config("lambdas must lie in [0, 1]".into()));
    }
    let mut run = Run::new(config)?;
    let b = ball(&preset, config, max_radius(config))?;
    let mut radii = config.radii();
    radii.retain(|&r| r <= b.radius());
    let table = manhattan_experiment(&b, &phi1, &phi2, lambdas, &radii, probe_words, config.seed).map_err(numeric)?;
    let rows: Vec<Vec<String>> =
        table.rows.iter().map(|r| vec![fmt(r.lambda), fmt(r.delta_hat), fmt(r.band)]).collect();
    let t = run.table("manhattan.csv", &["lambda", "delta_hat", "band"], &rows)?;
    run.table(
        "manhattan_summary.csv",
        &["delta_hat_phi1", "delta_hat_phi2", "below_one", "midpoint_concave", "length_probe", "probe_words"],
        &[vec![
            fmt(table.scale.0),
            fmt(table.scale.1),
            table.below_one.to_string(),
            table.midpoint_concave.to_string(),
            fmt(table.length_probe),
            table.probe_words.to_string(),
        ]],
    )?;
    print(&t)?;
    run.finish(
        "manhattan",
        serde_json::json!({ "lambdas": lambdas, "functional2": functional2, "probe_words": probe_words }),
        config,
    )
}

fn cmd_entropy_drop(config: &ExperimentConfig, subgroup: &str) -> Result<(), CliError> {
    let preset = config.resolve_preset()?;
    let phi = config.resolve_functional(&preset.theta)?;
    let words: Vec<Word> = match preset.named_subgroup(subgroup) {
        Some(w) => w.to_vec(),
        None => subgroup
            .split(',')
            .map(|w| Word::parse(w.trim()).map_err(|e| CliError::Config(format!("subgroup {subgroup:?}: {e}"))))
            .collect::<Result<_, _>>()?,
    };
    let mut run = Run::new(config)?;
    let r = entropy_drop_experiment(&preset, &words, &phi, config.radius, config.budget).map_err(numeric)?;
    let t = run.table(
        "entropy_drop.csv",
        &[
            "delta_hat_group",
            "band_group",
            "delta_hat_subgroup",
            "band_subgroup",
            "gap",
            "hausdorff_group_to_subgroup",
            "hausdorff_subgroup_to_group",
        ],
        &[vec![
            fmt(r.delta_group),
            fmt(r.band_group),
            fmt(r.delta_subgroup),
            fmt(r.band_subgroup),
            fmt(r.gap),
            fmt(r.hausdorff_group_to_sub),
            fmt(r.hausdorff_sub_to_group),
        ]],
    )?;
    print(&t)?;
    run.finish("entropy-drop", serde_json::json!({ "subgroup": subgroup }), config)
}

fn cmd_flow(config: &ExperimentConfig, horizon: usize, samples: usize) -> Result<(), CliError> {
    let preset = config.resolve_preset()?;
    require_symmetric(&preset.theta)?;
    let phi = config.resolve_functional(&preset.theta)?;
    let phibar = dual_functional(&phi).map_err(|e| CliError::Config(e.to_string()))?;
    let mut run = Run::new(config)?;
    let b = ball(&preset, config, config.radius)?;
    let e = estimate(&b, &phi, config)?;
    let shell = |f: &Functional| {
        patterson_shell(&b, f, e.delta_hat, HFunction::ConstantOne, 2)
            .and_then(|m| m.to_flags(&preset))
            .map_err(patterson_err)
    };
    let asm = BmsAssembly::new(shell(&phi)?, shell(&phibar)?).map_err(numeric)?;
    let r = b.radius();
    let pairs = sample_pairs(&asm, 400, Some(r.saturating_sub(1)..=r.saturating_sub(1)), config.seed);
    let mut rows = Vec::new();
    for l in preset.letters() {
        let w = Word::letter(l);
        let rep = invariance_residual(&asm, &w, &pairs);
        rows.push(vec![
            w.to_string(),
            fmt(rep.max_rel_error),
            rep.evaluated.to_string(),
            rep.skipped.to_string(),
        ]);
    }
    let t = run.table("invariance.csv", &["generator", "invariance_residual", "evaluated", "skipped"], &rows)?;
    match recurrence_diagnostic(&preset, &asm, horizon, samples, config.seed) {
        Ok((report, trajectories)) => {
            let mut buf = Vec::new();
            write_trajectories_csv(&trajectories, &mut buf)?;
            run.file("trajectories.csv", &buf)?;
            run.table(
                "recurrence.csv",
                &[
                    "horizon",
                    "cell_radius",
                    "visit_threshold",
                    "samples",
                    "recurrent_fraction",
                    "escape_fraction",
                    "mean_visits",
                    "reading",
                ],
                &[vec![
                    report.horizon.to_string(),
                    fmt(report.cell_radius),
                    report.visit_threshold.to_string(),
                    report.samples.to_string(),
                    fmt(report.recurrent_fraction),
                    fmt(report.escape_fraction),
                    fmt(report.mean_visits),
                    report.reading.clone(),
                ]],
            )?;
        }
        // invariance residuals do not need a domain; recurrence does
        Err(FlowError::NoDomain(_)) => {}
        Err(e) => return Err(numeric(e)),
    }
    print(&t)?;
    run.finish("flow", serde_json::json!({ "horizon": horizon, "samples": samples }), config)
}
