use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use cvqkd_coexist::allocator::{allocate, max_tolerable_power};
use cvqkd_coexist::estimation::{derive_seed, estimate_t_xi, simulate_homodyne_session};
use cvqkd_coexist::keyrate::{null_key_threshold, secret_key_rate, worst_case_xi, EstimatorAux};
use cvqkd_coexist::noise::{
    fit_raman_coefficient, read_measurements, scenario_key_rate, total_noise_budget, CoexistenceScenario,
};
use cvqkd_coexist::units::{FiberLink, PowerDbm, Reference, ShotNoiseUnits};
use rayon::prelude::*;

use crate::output::{csv_writer, finish, num, Report, Status};
use crate::scenario::{Loaded, SweepAxis};
use crate::Validation;

fn reference_label(r: Reference) -> &'static str {
    match r {
        Reference::AtAlice => "alice",
        Reference::AtBob => "bob",
    }
}

fn threshold(s: &CoexistenceScenario) -> Option<f64> {
    null_key_threshold(&s.system, s.channel_transmission()).ok().map(|t| t.value)
}

pub fn budget(loaded: &Loaded, reference: Reference) -> Result<Report> {
    let s = loaded.scenario()?;
    let b = total_noise_budget(&s, reference)?;
    let mut w = csv_writer();
    w.write_record(["source", "value_n0", "reference", "note"])?;
    let mut table = String::new();
    for e in &b.entries {
        // without classical channels only the system's own noise is meaningful
        if s.channels.is_empty() && e.source != "system" {
            continue;
        }
        w.write_record([e.source.as_str(), &num(e.value.value), reference_label(reference), e.note.as_str()])?;
        writeln!(table, "{:<10} {:>12.4e}", e.source, e.value.value)?;
    }
    w.write_record(["total", &num(b.total.value), reference_label(reference), ""])?;
    writeln!(table, "{:<10} {:>12.4e} N0 at {}", "total", b.total.value, reference_label(reference))?;
    for warn in &b.warnings {
        writeln!(table, "warning: {warn}")?;
    }
    Ok(Report::csv(finish(w)?, table, Status::Ok))
}

pub fn keyrate(loaded: &Loaded, finite_size: Option<u64>, sigmas: f64) -> Result<Report> {
    let s = loaded.scenario()?;
    let t = s.channel_transmission();
    let (budget, asymptotic) = scenario_key_rate(&s)?;
    let xi_used = match finite_size {
        Some(n) => worst_case_xi(budget.total.value, n, sigmas, &EstimatorAux::from_system(&s.system, t))?,
        None => budget.total.value,
    };
    let r = if finite_size.is_some() {
        secret_key_rate(&s.system, t, ShotNoiseUnits::at_alice(xi_used))?
    } else {
        asymptotic
    };
    let th = threshold(&s);
    let mut w = csv_writer();
    w.write_record([
        "distance_km",
        "transmission",
        "xi_total_n0",
        "xi_used_n0",
        "threshold_n0",
        "key_bits_per_pulse",
        "key_bits_per_s",
        "positive",
    ])?;
    w.write_record([
        num(s.link.length_km),
        num(t),
        num(budget.total.value),
        num(xi_used),
        th.map(num).unwrap_or_default(),
        num(r.key_bits_per_pulse),
        num(r.key_bits_per_second),
        r.positive.to_string(),
    ])?;
    let summary = format!(
        "{} km, T = {:.4}: xi = {:.4e} N0 (threshold {}), K = {:.4e} bits/pulse = {:.3} kb/s",
        s.link.length_km,
        t,
        xi_used,
        th.map(|v| format!("{v:.4e}")).unwrap_or_else(|| "none".into()),
        r.key_bits_per_pulse,
        r.key_bits_per_second / 1e3
    );
    let status = if r.positive { Status::Ok } else { Status::Infeasible };
    Ok(Report::csv(finish(w)?, summary, status))
}

struct SweepRow {
    x: f64,
    xi: f64,
    k: f64,
    k_s: f64,
    positive: bool,
    threshold: Option<f64>,
    null_power: Option<f64>,
}

pub fn sweep(loaded: &Loaded) -> Result<Report> {
    let spec = loaded
        .file
        .sweep
        .clone()
        .ok_or_else(|| Validation("scenario has no [sweep] section".into()))?;
    let grid = spec.grid()?;
    let base = loaded.scenario()?;
    if spec.axis == SweepAxis::Power {
        if base.channels.is_empty() {
            return Err(Validation("a power sweep needs at least one channel".into()).into());
        }
        if grid.iter().any(|&p| p < 0.0) {
            return Err(Validation("sweep powers are in mW and must be >= 0".into()).into());
        }
    } else if grid.iter().any(|&l| !(l > 0.0)) {
        return Err(Validation("sweep distances must be > 0 km".into()).into());
    }
    let null_power = |s: &CoexistenceScenario| {
        max_tolerable_power(s.link.length_km, spec.direction, s, spec.probe_index)
            .ok()
            .map(|p| p.power.value())
    };
    let fixed_null = match spec.axis {
        SweepAxis::Power => null_power(&base.with_channels(Vec::new())),
        SweepAxis::Distance => None,
    };
    let rows: Vec<SweepRow> = grid
        .par_iter()
        .map(|&x| {
            let s = match spec.axis {
                SweepAxis::Power => {
                    let dbm = if x > 0.0 { 10.0 * x.log10() } else { f64::NEG_INFINITY };
                    let channels = base
                        .channels
                        .iter()
                        .map(|c| {
                            let mut c = *c;
                            c.launch_power = PowerDbm(dbm);
                            c
                        })
                        .collect();
                    base.with_channels(channels)
                }
                SweepAxis::Distance => base.with_length(x),
            };
            let (b, r) = scenario_key_rate(&s)?;
            Ok(SweepRow {
                x,
                xi: b.total.value,
                k: r.key_bits_per_pulse,
                k_s: r.key_bits_per_second,
                positive: r.positive,
                threshold: threshold(&s),
                null_power: match spec.axis {
                    SweepAxis::Power => fixed_null,
                    SweepAxis::Distance => null_power(&s.with_channels(base.channels.clone())),
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut w = csv_writer();
    w.write_record([
        "x",
        "xi_total_n0",
        "key_bits_per_pulse",
        "key_bits_per_s",
        "positive",
        "threshold_n0",
        "null_key_power_mw",
    ])?;
    for r in &rows {
        w.write_record([
            num(r.x),
            num(r.xi),
            num(r.k),
            num(r.k_s),
            r.positive.to_string(),
            r.threshold.map(num).unwrap_or_default(),
            r.null_power.map(num).unwrap_or_default(),
        ])?;
    }
    let unit = match spec.axis {
        SweepAxis::Power => "mW",
        SweepAxis::Distance => "km",
    };
    let positive = rows.iter().filter(|r| r.positive).count();
    let summary = format!(
        "{} points over {}..{} {unit}; positive key at {positive}",
        rows.len(),
        spec.start,
        spec.stop
    );
    Ok(Report::csv(finish(w)?, summary, Status::Ok))
}

pub fn allocate_cmd(loaded: &Loaded) -> Result<Report> {
    let req = loaded.allocation_request()?;
    let r = allocate(&req)?;
    let mut body = Vec::new();
    r.write_csv(&mut body)?;
    let mut summary = format!(
        "{} step(s) placed ({} channels), final xi {:.4e} N0, K = {:.4e} bits/pulse, feasible {}",
        r.pairs_placed,
        r.chosen.len(),
        r.chosen.last().map_or(r.baseline_xi.value, |c| c.cumulative_xi.value),
        r.key_rate_final.key_bits_per_pulse,
        r.feasible
    );
    for warn in &r.warnings {
        write!(summary, "\nwarning: {warn}")?;
    }
    let status = if r.feasible { Status::Ok } else { Status::Infeasible };
    Ok(Report::csv(body, summary, status))
}

pub fn simulate(loaded: &Loaded, seed: u64, blocks: Option<&Path>) -> Result<Report> {
    let s = loaded.scenario()?;
    let sim = &loaded.file.simulation;
    if sim.runs == 0 {
        return Err(Validation("simulation.runs must be >= 1".into()).into());
    }
    let t = s.channel_transmission();
    let xi = total_noise_budget(&s, Reference::AtAlice)?.total.value;
    let cal = (&s.system).into();
    let runs: Vec<_> = (0..sim.runs)
        .into_par_iter()
        .map(|k| {
            let run_seed = derive_seed(seed, k);
            let session = simulate_homodyne_session(&s.system, t, xi, &sim.acquisition(run_seed))?;
            let est = estimate_t_xi(&session.blocks, &cal)?;
            Ok((k, run_seed, session, est))
        })
        .collect::<cvqkd_coexist::Result<Vec<_>>>()?;
    if let Some(path) = blocks {
        let mut buf = Vec::new();
        runs[0].2.write_csv(&mut buf)?;
        std::fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
    }
    let mut w = csv_writer();
    w.write_record([
        "run",
        "seed",
        "t_true",
        "t_hat",
        "xi_true_n0",
        "xi_hat_n0",
        "xi_hat_bob_n0",
        "n0_hat",
        "std_xi_n0",
        "t_above_one",
    ])?;
    for (k, run_seed, _, e) in &runs {
        w.write_record([
            k.to_string(),
            run_seed.to_string(),
            num(t),
            num(e.t_hat),
            num(xi),
            num(e.xi_hat),
            num(e.xi_hat_at_bob),
            num(e.n0_hat),
            num(e.std_xi),
            e.t_above_one.to_string(),
        ])?;
    }
    let mean = runs.iter().map(|r| r.3.xi_hat).sum::<f64>() / runs.len() as f64;
    let summary = format!(
        "{} run(s) of {} pulses, {:?} schedule: mean xi_hat {mean:.4e} N0 (true {xi:.4e}), T = {t:.4}",
        runs.len(),
        sim.n_total_pulses,
        sim.schedule
    );
    Ok(Report::csv(finish(w)?, summary, Status::Ok))
}

pub fn fit_raman(measurements: &Path, band_nm: f64, link: &FiberLink) -> Result<Report> {
    let file = std::fs::File::open(measurements).with_context(|| format!("reading {}", measurements.display()))?;
    let m = read_measurements(file)?;
    let profile = fit_raman_coefficient(&m, band_nm, link)?;
    let mut body = Vec::new();
    profile.write_csv(&mut body)?;
    let mut summary = format!("{} measurements, {} coefficient(s):", m.len(), profile.entries().len());
    for e in profile.entries() {
        write!(summary, "\n  {:.2} -> {:.2} nm: {:.4e} /(km·nm)", e.pump_nm, e.quantum_nm, e.beta_per_km_nm)?;
    }
    Ok(Report::csv(body, summary, Status::Ok))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    Sweep,
    Allocation,
    Budget,
    Simulate,
}

pub fn plot_script(input: &Path, kind: PlotKind) -> Report {
    let path = input.display().to_string().replace('\\', "/");
    let plot = match kind {
        PlotKind::Sweep => {
            "fig, ax = plt.subplots(2, 1, sharex=True)\n\
             ax[0].plot(df['x'], df['xi_total_n0'], label='total excess noise')\n\
             ax[0].plot(df['x'], df['threshold_n0'], '--', label='null-key threshold')\n\
             ax[0].set_ylabel('xi [N0]')\n\
             ax[0].legend()\n\
             ax[1].plot(df['x'], df['key_bits_per_s'] / 1e3)\n\
             ax[1].set_ylabel('key rate [kb/s]')\n\
             ax[1].set_xlabel('x')\n"
        }
        PlotKind::Allocation => {
            "colors = {'quantum': 'tab:red', 'fwd': 'tab:blue', 'bwd': 'tab:orange', 'unused': 'lightgray'}\n\
             fig, ax = plt.subplots()\n\
             for role, g in df.groupby('role'):\n\
             \x20   h = g['marginal_xi_n0'].fillna(0) if role in ('fwd', 'bwd') else [1e-6] * len(g)\n\
             \x20   ax.bar(g['wavelength_nm'], h, width=0.3, color=colors[role], label=role)\n\
             ax.set_yscale('log')\n\
             ax.set_xlabel('wavelength [nm]')\n\
             ax.set_ylabel('marginal xi [N0]')\n\
             ax.legend()\n"
        }
        PlotKind::Budget => {
            "df = df[df['source'] != 'total']\n\
             fig, ax = plt.subplots()\n\
             ax.barh(df['source'], df['value_n0'])\n\
             ax.set_xscale('log')\n\
             ax.set_xlabel('xi [N0]')\n"
        }
        PlotKind::Simulate => {
            "fig, ax = plt.subplots()\n\
             ax.hist(df['xi_hat_n0'], bins=30)\n\
             ax.axvline(df['xi_true_n0'].iloc[0], color='k', ls='--')\n\
             ax.set_xlabel('estimated xi [N0]')\n"
        }
    };
    let script = format!(
        "# plotting stub generated by {}\n\
         import matplotlib.pyplot as plt\n\
         import pandas as pd\n\n\
         df = pd.read_csv('{path}', comment='#')\n\
         {plot}\
         plt.tight_layout()\n\
         plt.show()\n",
        crate::output::TOOL
    );
    Report {
        body: script.into_bytes(),
        summary: String::new(),
        status: Status::Ok,
        metadata: false,
    }
}
