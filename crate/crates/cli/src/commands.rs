use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use polfiber_core::montecarlo::{Z_LIMIT, GAP_LIMIT};
use polfiber_core::qkd::QKD_CSV_HEADER;
use polfiber_core::scenario::{curve_plot_script, Scenario, CURVE_CSV_HEADER};

use crate::output::{csv, write_atomic};
use crate::{Command, Common, EXIT_ORACLE};

/// Simulated gates per setting for the visibility curve unless overridden.
const CURVE_GATES: u64 = 10_000_000;

struct Prepared {
    scn: Scenario,
    out: PathBuf,
    seed: u64,
    lengths: Vec<f64>,
}

fn prepare(common: &Common) -> Result<Prepared> {
    let (scn, warnings) = Scenario::load(&common.scenario)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let lengths = match &common.lengths {
        Some(list) => parse_lengths(list)?,
        None => scn.lengths_km.clone(),
    };
    let out = common
        .out
        .clone()
        .or_else(|| scn.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("polfiber-out").join(&scn.name));
    Ok(Prepared {
        seed: common.seed.unwrap_or(scn.seed),
        scn,
        out,
        lengths,
    })
}

fn parse_lengths(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let l: f64 = s.parse().with_context(|| format!("invalid length `{s}`"))?;
            if !(l >= 0.0 && l.is_finite()) {
                bail!("invalid length `{s}`");
            }
            Ok(l)
        })
        .collect()
}

pub fn run(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::VisibilityCurve { common } => visibility_curve(&common),
        Command::Tomography { common, repeats } => tomography(&common, repeats),
        Command::Keyrate { common } => keyrate(&common),
        Command::MaxDistance { common, threshold } => max_distance(&common, threshold),
        Command::OracleCheck {
            common,
            inject_transmission_scale,
        } => oracle_check(&common, inject_transmission_scale),
    }
}

fn visibility_curve(common: &Common) -> Result<ExitCode> {
    let ctx = prepare(common)?;
    let gates = common.gates.unwrap_or(CURVE_GATES);
    let rows = ctx.scn.visibility_curve(&ctx.lengths, gates, ctx.seed)?;
    for r in &rows {
        println!(
            "{:7.1} km  model {:.4}  raw {}  corrected {:.4}  rate {:.1} c/s",
            r.length_km,
            r.model_v,
            r.mc_raw_v.map_or("-".into(), |v| format!("{v:.4} ± {:.4}", r.mc_sigma.unwrap_or(0.0))),
            r.corrected_v,
            r.coincidence_rate_cps
        );
    }
    let path = ctx.out.join("visibility_curve.csv");
    write_atomic(&path, &csv(CURVE_CSV_HEADER, rows.iter().map(|r| r.csv_row())))?;
    write_atomic(
        &ctx.out.join("plot_visibility.py"),
        &curve_plot_script("visibility_curve.csv", &format!("{}: visibility against length", ctx.scn.name)),
    )?;
    eprintln!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn tomography(common: &Common, repeats: Option<u32>) -> Result<ExitCode> {
    let ctx = prepare(common)?;
    let repeats = repeats.unwrap_or(ctx.scn.measurement.tomography_repeats).max(1);
    let mut rows = Vec::new();
    for &l in &ctx.lengths {
        let t = ctx.scn.tomography_at(l, repeats, ctx.seed)?;
        println!(
            "{:7.1} km  E_N raw {:.3} ± {:.3}  corrected {:.3} ± {:.3}",
            l, t.log_negativity_raw_mean, t.log_negativity_raw_sd, t.log_negativity_corrected_mean, t.log_negativity_corrected_sd
        );
        let mut text = String::new();
        writeln!(text, "length {l} km, {repeats} simulated runs, background {:.4} c/s per setting", t.background_cps)?;
        writeln!(
            text,
            "E_N raw {:.4} ± {:.4}, corrected {:.4} ± {:.4}, transmitted state {:.4}",
            t.log_negativity_raw_mean,
            t.log_negativity_raw_sd,
            t.log_negativity_corrected_mean,
            t.log_negativity_corrected_sd,
            t.log_negativity_transmitted
        )?;
        writeln!(text, "\nfirst run:")?;
        text.push_str(&t.results[0].report());
        write_atomic(&ctx.out.join(format!("tomography_{l}km.txt")), &text)?;
        rows.push(format!(
            "{l:.3},{repeats},{:.6},{:.6},{:.6},{:.6},{:.6}",
            t.log_negativity_raw_mean,
            t.log_negativity_raw_sd,
            t.log_negativity_corrected_mean,
            t.log_negativity_corrected_sd,
            t.log_negativity_transmitted
        ));
    }
    write_atomic(
        &ctx.out.join("tomography.csv"),
        &csv(
            "length_km,repeats,en_raw_mean,en_raw_sd,en_corrected_mean,en_corrected_sd,en_transmitted",
            rows,
        ),
    )?;
    Ok(ExitCode::SUCCESS)
}

fn keyrate(common: &Common) -> Result<ExitCode> {
    let ctx = prepare(common)?;
    let mut rows = Vec::new();
    for &l in &ctx.lengths {
        let rep = ctx.scn.keyrate(l)?;
        println!("{}", rep.text());
        rows.push(rep.csv_row());
    }
    write_atomic(&ctx.out.join("keyrate.csv"), &csv(QKD_CSV_HEADER, rows))?;
    Ok(ExitCode::SUCCESS)
}

fn max_distance(common: &Common, threshold: Option<f64>) -> Result<ExitCode> {
    let mut ctx = prepare(common)?;
    if let (Some(t), Some(r)) = (threshold, ctx.scn.reach.as_mut()) {
        r.visibility_threshold = t;
    }
    let rep = ctx.scn.reach()?;
    println!(
        "visibility falls below {} at {:.1} km (V = {:.4}, {:.4} coincidences/s)",
        rep.reach.threshold, rep.reach.distance_km, rep.reach.visibility, rep.reach.rate_cps
    );
    let mut rows = vec![format!(
        "{},{:.1},{:.6},{:.6e}",
        rep.reach.threshold, rep.reach.distance_km, rep.reach.visibility, rep.reach.rate_cps
    )];
    for (t, r) in &rep.sensitivity {
        match r {
            Some(r) => {
                println!("  threshold {t}: {:.1} km", r.distance_km);
                rows.push(format!("{t},{:.1},{:.6},{:.6e}", r.distance_km, r.visibility, r.rate_cps));
            }
            None => {
                println!("  threshold {t}: not reached");
                rows.push(format!("{t},,,"));
            }
        }
    }
    write_atomic(&ctx.out.join("max_distance.csv"), &csv("threshold,distance_km,visibility,rate_cps", rows))?;
    Ok(ExitCode::SUCCESS)
}

fn oracle_check(common: &Common, scale: f64) -> Result<ExitCode> {
    let ctx = prepare(common)?;
    if !(scale > 0.0 && scale.is_finite()) {
        bail!("transmission scale must be positive");
    }
    let gates = common.gates.unwrap_or(ctx.scn.oracle.n_gates);
    let reports = ctx.scn.oracle_check(&ctx.lengths, gates, ctx.seed, scale)?;
    let mut rows = Vec::new();
    let mut all_pass = true;
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.6}"));
    for (l, r) in &reports {
        let pass = r.passed();
        all_pass &= pass;
        println!(
            "{:7.1} km  analytic {:.5}  simulated {}  z {}  {}",
            l,
            r.analytic_v,
            r.simulated_v.map_or("-".into(), |v| format!("{v:.5} ± {:.5}", r.sigma.unwrap_or(0.0))),
            r.z.map_or("-".into(), |z| format!("{z:+.2}")),
            if pass { "PASS" } else { "FAIL" }
        );
        for w in &r.warnings {
            println!("          warning: {w}");
        }
        rows.push(format!(
            "{l:.3},{gates},{:.6},{:.6},{},{},{},{},{:.6},{}",
            r.analytic_v,
            r.exact_v,
            opt(r.simulated_v),
            opt(r.sigma),
            opt(r.z),
            opt(r.gap),
            r.model_gap,
            pass
        ));
    }
    write_atomic(
        &ctx.out.join("oracle_check.csv"),
        &csv("length_km,n_gates,analytic_v,exact_v,simulated_v,sigma,z,gap,model_gap,pass", rows),
    )?;
    if all_pass {
        println!("oracle check passed (|z| < {Z_LIMIT}, model gap < {GAP_LIMIT})");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("oracle check FAILED");
        Ok(ExitCode::from(EXIT_ORACLE))
    }
}
