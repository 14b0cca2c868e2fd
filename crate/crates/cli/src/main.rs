//! `seqstab`: batch front end. Each command writes CSV data, a JSON summary,
//! the resolved configuration and a metadata file into the output directory.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 numerical
//! failure, 3 unstable verdict with `--fail-on-unstable`.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde_json::{json, Value as Json};
use seqstab::scanner::{self, ReplicationSettings, SagDepth, ScanBench, ScanPort};
use seqstab::stability::{bode_table, compare_sssi, BodeRow, SssiCase};
use seqstab::wcsim::{build_composite, grid_branches, z0e, zgne, zgpe};
use seqstab::{FreqExpr, FrequencyGrid, Sequence, SystemSpec};
use thiserror::Error;

use config::{Config, ConfigError};
use output::{svg, write_atomic, Cell, Csv, Panel, Series};

#[derive(Parser, Debug)]
#[command(name = "seqstab", version, about = "Sequence-impedance stability analysis of a wind power plant")]
struct Cli {
    /// Configuration file; omitted keys take their defaults.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "SEQSTAB_OUT", default_value = "seqstab-out")]
    out: PathBuf,
    /// Exit with code 3 when the verdict is unstable.
    #[arg(long, global = true)]
    fail_on_unstable: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// Logarithmic grid `f_min:f_max:points` in Hz.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(f64, f64, usize)>,
    /// Fault location along the 220 kV line, from the plant.
    #[arg(long)]
    alpha: Option<f64>,
    /// Leave the sequence networks uncoupled.
    #[arg(long)]
    no_sssi: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Uncoupled sequence impedance of the plant or the grid.
    Impedance {
        #[command(flatten)]
        common: Common,
        /// `wpp` or `grid`.
        #[arg(long, default_value = "wpp")]
        port: String,
        #[arg(long, default_value = "pos", value_parser = parse_seq)]
        seq: Sequence,
    },
    /// Grid impedance seen by the plant with the sequence networks coupled by the fault.
    Compose {
        #[command(flatten)]
        common: Common,
    },
    /// Bode data of the grid and plant impedances and their intersections.
    Bode {
        #[command(flatten)]
        common: Common,
    },
    /// Loop-gain Nyquist curve and winding-number verdict.
    Nyquist {
        #[command(flatten)]
        common: Common,
    },
    /// Time-domain frequency scan.
    Scan {
        #[command(flatten)]
        common: Common,
        /// `grid`, `wpp`, `fault` or `converter`.
        #[arg(long, default_value = "grid")]
        port: ScanPort,
        #[arg(long, default_value = "pos", value_parser = parse_seq)]
        seq: Sequence,
        /// Remove the converters from the plant.
        #[arg(long)]
        passive: bool,
    },
    /// Verdicts with and without the sequence coupling.
    CompareSssi {
        #[command(flatten)]
        common: Common,
    },
    /// Simulate a phase-A source sag and the fault at equal positive-sequence voltage.
    SagVsFault {
        #[arg(long)]
        alpha: Option<f64>,
        /// Fixed sag depth instead of matching the faulted voltage.
        #[arg(long)]
        sag_depth: Option<f64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Impedance { .. } => "impedance",
            Command::Compose { .. } => "compose",
            Command::Bode { .. } => "bode",
            Command::Nyquist { .. } => "nyquist",
            Command::Scan { .. } => "scan",
            Command::CompareSssi { .. } => "compare-sssi",
            Command::SagVsFault { .. } => "sag-vs-fault",
        }
    }

    fn common(&self) -> Common {
        match self {
            Command::Impedance { common, .. }
            | Command::Compose { common }
            | Command::Bode { common }
            | Command::Nyquist { common }
            | Command::Scan { common, .. }
            | Command::CompareSssi { common } => common.clone(),
            Command::SagVsFault { alpha, .. } => Common { alpha: *alpha, ..Common::default() },
        }
    }

    /// Arguments that are not part of the configuration.
    fn args_json(&self) -> Json {
        match self {
            Command::Impedance { port, seq, .. } => json!({ "port": port, "seq": seq.short_name() }),
            Command::Scan { port, seq, passive, .. } => {
                json!({ "port": port.name(), "seq": seq.short_name(), "passive": passive })
            }
            _ => json!({}),
        }
    }
}

fn parse_grid(s: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || format!("expected f_min:f_max:points, got `{s}`");
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo = parts[0].parse().map_err(|_| bad())?;
    let hi = parts[1].parse().map_err(|_| bad())?;
    let n = parts[2].parse().map_err(|_| bad())?;
    Ok((lo, hi, n))
}

fn parse_seq(s: &str) -> Result<Sequence, String> {
    s.parse().map_err(|e: seqstab::ParamError| e.to_string())
}

#[derive(Debug, Error)]
enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<seqstab::Error> for CliError {
    fn from(e: seqstab::Error) -> Self {
        match e {
            seqstab::Error::Param(p) => CliError::Config(p.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

/// What a command produced besides its data files.
struct Outcome {
    results: Json,
    unstable: bool,
    /// Points that failed; a non-empty list makes the run a numerical failure.
    failures: Vec<String>,
}

struct Run<'a> {
    cfg: &'a Config,
    sys: SystemSpec,
    out: PathBuf,
    files: Vec<String>,
}

impl Run<'_> {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = write_atomic(&self.out, name, bytes)?;
        log::info!("wrote {}", path.display());
        self.files.push(name.to_string());
        Ok(())
    }

    fn grid(&self) -> Result<FrequencyGrid, CliError> {
        self.sys.grid.log().map_err(|e| CliError::Config(format!("grid: {e}")))
    }

    fn sssi(&self) -> bool {
        self.cfg.variants.sssi
    }
}

fn bode_csv(rows: &[BodeRow]) -> Vec<u8> {
    let mut c = Csv::new("bode", &["f_hz", "re", "im", "mag", "mag_db", "phase_deg"]);
    for r in rows {
        let v = r.value.unwrap_or(Complex64::new(f64::NAN, f64::NAN));
        c.nums(&[r.f_hz, v.re, v.im, r.mag, r.mag_db, r.phase_deg]);
    }
    c.into_bytes()
}

fn pole_rows(name: &str, rows: &[BodeRow]) -> Vec<String> {
    rows.iter().filter(|r| r.value.is_none()).map(|r| format!("{name}: no value at {} Hz", r.f_hz)).collect()
}

fn nyquist_csv(case: &SssiCase) -> Vec<u8> {
    let mut c = Csv::new("nyquist", &["omega_rad_s", "re_l", "im_l"]);
    for (w, l) in case.winding.omegas.iter().zip(&case.winding.values) {
        c.nums(&[*w, l.re, l.im]);
    }
    c.into_bytes()
}

fn nyquist_panel<'a>(title: String, cases: Vec<(&'a str, &'a str, &'a SssiCase)>) -> Panel<'a> {
    // frame the neighbourhood of the critical point; far branches are clipped
    let mut lim: f64 = 2.0;
    for (_, _, c) in &cases {
        for l in &c.winding.values {
            if l.norm() <= 5.0 {
                lim = lim.max(l.re.abs()).max(l.im.abs());
            }
        }
    }
    let lim = 1.1 * lim;
    Panel {
        title,
        x_label: "Re L",
        y_label: "Im L",
        log_x: false,
        series: cases
            .into_iter()
            .map(|(label, color, c)| Series { label, color, points: c.winding.values.iter().map(|l| (l.re, l.im)).collect() })
            .collect(),
        x_range: Some((-lim, lim)),
        y_range: Some((-lim, lim)),
        marker: Some((-1.0, 0.0, "-1")),
    }
}

fn verdict_json(case: &SssiCase) -> Json {
    let v = &case.verdict;
    let min_pm = v.crossings.iter().map(|c| c.phase_margin_deg).fold(f64::INFINITY, f64::min);
    json!({
        "n": v.n,
        "declared_p": v.declared_p,
        "z": v.z,
        "stable": v.stable,
        "crossings": v.crossings,
        "min_phase_margin_deg": if min_pm.is_finite() { json!(min_pm) } else { Json::Null },
        "min_distance_to_critical": v.min_distance,
        "omega_at_min_rad_s": v.omega_at_min,
        "residual": v.residual,
        "closure": v.closure,
        "omega_max_rad_s": v.omega_max,
        "skipped_points": v.skipped,
        "assumption": v.assumption,
    })
}

fn impedance(run: &mut Run, port: &str, seq: Sequence) -> Result<Outcome, CliError> {
    let grid = run.grid()?;
    let sys = &run.sys;
    let fault = run.sssi().then_some(&sys.fault);
    let (expr, what): (FreqExpr, String) = match (port, seq) {
        ("wpp", Sequence::Zero) => {
            return Err(CliError::Config("the plant has no zero-sequence path to the collector (YNd units)".into()))
        }
        ("wpp", s) => {
            let op = sys.resolve_operating_point(fault)?;
            (sys.wpp_impedance(s, &op).map_err(seqstab::Error::from)?, format!("Z_w{}", &s.short_name()[..1]))
        }
        ("grid", Sequence::Zero) => {
            let g = grid_branches(sys, sys.fault.alpha).map_err(seqstab::Error::from)?;
            (z0e(&g.z_01, &g.z_02).map_err(seqstab::Error::from)?, "Z_0e".into())
        }
        ("grid", s) => {
            let g = grid_branches(sys, sys.fault.alpha).map_err(seqstab::Error::from)?;
            (g.z_g1.series(&g.z_g2), format!("Z_g{}", &s.short_name()[..1]))
        }
        (other, _) => return Err(CliError::Config(format!("unknown impedance port `{other}` (wpp, grid)"))),
    };
    let rows = bode_table(&expr, &grid);
    run.write("impedance.csv", &bode_csv(&rows))?;
    Ok(Outcome {
        results: json!({ "impedance": what, "port": port, "seq": seq.short_name(), "points": rows.len() }),
        unstable: false,
        failures: pole_rows(&what, &rows),
    })
}

fn compose(run: &mut Run) -> Result<Outcome, CliError> {
    let grid = run.grid()?;
    let model = build_composite(&run.sys, &run.sys.fault)?;
    let (zp, zn) = if run.sssi() {
        (zgpe(&model).map_err(seqstab::Error::from)?, zgne(&model).map_err(seqstab::Error::from)?)
    } else {
        (model.z_gp(), model.z_gn())
    };
    let (pos, neg) = (bode_table(&zp, &grid), bode_table(&zn, &grid));
    run.write("compose_zgpe.csv", &bode_csv(&pos))?;
    run.write("compose_zgne.csv", &bode_csv(&neg))?;
    let mut failures = pole_rows("Z_gpe", &pos);
    failures.extend(pole_rows("Z_gne", &neg));
    Ok(Outcome {
        results: json!({ "sssi": run.sssi(), "alpha": run.sys.fault.alpha, "points": pos.len() }),
        unstable: false,
        failures,
    })
}

fn bode(run: &mut Run) -> Result<Outcome, CliError> {
    let grid = run.grid()?;
    let cmp = compare_sssi(&run.sys, &run.sys.fault, &grid)?;
    let case = if run.sssi() { &cmp.with } else { &cmp.without };
    let name = if run.sssi() { "Z_gpe" } else { "Z_gp" };
    run.write("bode_zg.csv", &bode_csv(&case.grid_bode))?;
    run.write("bode_zwp.csv", &bode_csv(&cmp.wpp_bode))?;
    let curve = |rows: &[BodeRow], pick: fn(&BodeRow) -> f64| rows.iter().map(|r| (r.f_hz, pick(r))).collect::<Vec<_>>();
    let panels = [
        Panel {
            title: format!("|{name}| and |Z_wp|"),
            x_label: "f (Hz)",
            y_label: "magnitude (dB)",
            log_x: true,
            series: vec![
                Series { label: name, color: "blue", points: curve(&case.grid_bode, |r| r.mag_db) },
                Series { label: "Z_wp", color: "darkorange", points: curve(&cmp.wpp_bode, |r| r.mag_db) },
            ],
            x_range: None,
            y_range: None,
            marker: None,
        },
        Panel {
            title: "phase".into(),
            x_label: "f (Hz)",
            y_label: "phase (deg)",
            log_x: true,
            series: vec![
                Series { label: name, color: "blue", points: curve(&case.grid_bode, |r| r.phase_deg) },
                Series { label: "Z_wp", color: "darkorange", points: curve(&cmp.wpp_bode, |r| r.phase_deg) },
            ],
            x_range: None,
            y_range: Some((-180.0, 180.0)),
            marker: None,
        },
    ];
    run.write("bode.svg", svg(&panels).as_bytes())?;
    let min_margin = case.intersections.rows.iter().map(|r| r.margin_deg).fold(f64::INFINITY, f64::min);
    let mut failures = pole_rows(name, &case.grid_bode);
    failures.extend(pole_rows("Z_wp", &cmp.wpp_bode));
    Ok(Outcome {
        results: json!({
            "sssi": run.sssi(),
            "grid_impedance": name,
            "operating_point": cmp.operating_point,
            "intersections": case.intersections.rows,
            "min_intersection_margin_deg": if min_margin.is_finite() { json!(min_margin) } else { Json::Null },
        }),
        unstable: false,
        failures,
    })
}

fn nyquist(run: &mut Run) -> Result<Outcome, CliError> {
    let grid = run.grid()?;
    let cmp = compare_sssi(&run.sys, &run.sys.fault, &grid)?;
    let (case, name) = if run.sssi() { (&cmp.with, "L = Z_gpe / Z_wp") } else { (&cmp.without, "L = Z_gp / Z_wp") };
    run.write("nyquist.csv", &nyquist_csv(case))?;
    let panel = nyquist_panel(name.into(), vec![(name, "blue", case)]);
    run.write("nyquist.svg", svg(&[panel]).as_bytes())?;
    Ok(Outcome {
        results: json!({
            "sssi": run.sssi(),
            "loop_gain": name,
            "operating_point": cmp.operating_point,
            "verdict": verdict_json(case),
        }),
        unstable: !case.verdict.stable,
        failures: Vec::new(),
    })
}

fn compare(run: &mut Run) -> Result<Outcome, CliError> {
    let grid = run.grid()?;
    let cmp = compare_sssi(&run.sys, &run.sys.fault, &grid)?;
    run.write("nyquist_with.csv", &nyquist_csv(&cmp.with))?;
    run.write("nyquist_without.csv", &nyquist_csv(&cmp.without))?;
    run.write("bode_zgpe.csv", &bode_csv(&cmp.with.grid_bode))?;
    run.write("bode_zgp.csv", &bode_csv(&cmp.without.grid_bode))?;
    run.write("bode_zwp.csv", &bode_csv(&cmp.wpp_bode))?;
    let panel = nyquist_panel(
        "loop gain with and without sequence coupling".into(),
        vec![("with (Z_gpe)", "blue", &cmp.with), ("without (Z_gp)", "gray", &cmp.without)],
    );
    run.write("compare_sssi.svg", svg(&[panel]).as_bytes())?;
    Ok(Outcome {
        results: json!({
            "operating_point": cmp.operating_point,
            "with": verdict_json(&cmp.with),
            "without": verdict_json(&cmp.without),
            "n_with": cmp.with.verdict.n,
            "n_without": cmp.without.verdict.n,
            "magnitude_reduced": cmp.magnitude_reduced,
            "max_magnitude_ratio": cmp.max_magnitude_ratio,
            "max_phase_deviation_deg": cmp.max_phase_deviation_deg,
            "intersections_with": cmp.with.intersections.rows,
            "intersections_without": cmp.without.intersections.rows,
        }),
        unstable: !cmp.with.verdict.stable,
        failures: Vec::new(),
    })
}

fn scan(run: &mut Run, port: ScanPort, seq: Sequence, passive: bool) -> Result<Outcome, CliError> {
    let grid = run.grid()?;
    let sys = &run.sys;
    let settings = sys.scan;
    // the fault port replaces the fault branch, so the fault is never closed there
    let closed = run.sssi() && !sys.fault.branch.is_open() && matches!(port, ScanPort::Grid | ScanPort::Wpp);
    let bench = ScanBench::new(sys, port, !passive, closed)?;
    let f1 = bench.f1_hz();
    let mut freqs: Vec<f64> = Vec::new();
    let mut skipped = Vec::new();
    for &f in grid.freqs_hz() {
        match scanner::scan_frequency(f, f1, settings.window_s) {
            Ok(g) if freqs.last() != Some(&g) => freqs.push(g),
            Ok(_) => {}
            Err(e) => skipped.push(json!({ "f_hz": f, "reason": e.to_string() })),
        }
    }
    let rows = if freqs.is_empty() {
        Vec::new()
    } else {
        let g = FrequencyGrid::explicit(freqs).map_err(|e| CliError::Numerical(e.to_string()))?;
        scanner::scan(&bench, &g, seq, &settings).rows
    };
    let mut csv = Csv::new("scan", &["f_hz", "seq", "re_z", "im_z", "mag", "phase_deg", "amplitude", "leakage"]);
    let mut failures = Vec::new();
    for r in &rows {
        let z = r.z.unwrap_or(Complex64::new(f64::NAN, f64::NAN));
        csv.row(&[
            Cell::Num(r.f_hz),
            Cell::Text(seq.short_name()),
            Cell::Num(z.re),
            Cell::Num(z.im),
            Cell::Num(z.norm()),
            Cell::Num(z.arg().to_degrees()),
            Cell::Num(r.amplitude),
            Cell::Num(r.leakage.unwrap_or(f64::NAN)),
        ]);
        if let Some(e) = &r.error {
            failures.push(format!("{} Hz: {e}", seqstab::sig12(r.f_hz)));
        }
    }
    run.write("scan.csv", &csv.into_bytes())?;
    Ok(Outcome {
        results: json!({
            "port": port.name(),
            "seq": seq.short_name(),
            "converter": !passive,
            "fault_closed": closed,
            "settings": settings,
            "measured": rows.iter().filter(|r| r.error.is_none()).count(),
            "failed": rows.iter().filter(|r| r.error.is_some()).count(),
            "skipped": skipped,
        }),
        unstable: false,
        failures,
    })
}

fn sag_vs_fault(run: &mut Run) -> Result<Outcome, CliError> {
    let r = &run.cfg.replication;
    let rs = ReplicationSettings { t_event: r.t_event_s, t_end: r.t_end_s, ..ReplicationSettings::default() };
    let depth = r.sag_depth.map_or(SagDepth::Matched, SagDepth::Fixed);
    let rep = scanner::replicate_sag_vs_fault(&run.sys, &run.sys.fault, depth, &rs)?;
    let mut csv = Csv::new(
        "sag-vs-fault",
        &[
            "case",
            "class",
            "diverged",
            "growth_ratio",
            "early_rms",
            "late_rms",
            "dominant_hz",
            "vp_equilibrium_v",
            "vp_measured_v",
        ],
    );
    for (name, v, vp_eq, vp) in [
        ("sag", &rep.case_sag, rep.vp_sag_equilibrium, rep.vp_sag),
        ("fault", &rep.case_fault, rep.vp_fault_equilibrium, rep.vp_fault),
    ] {
        let class = v.label();
        csv.row(&[
            Cell::Text(name),
            Cell::Text(class),
            Cell::Text(if v.diverged { "true" } else { "false" }),
            Cell::Num(v.growth_ratio),
            Cell::Num(v.early_rms),
            Cell::Num(v.late_rms),
            Cell::Num(v.dominant_hz.unwrap_or(f64::NAN)),
            Cell::Num(vp_eq),
            Cell::Num(vp),
        ]);
    }
    run.write("sag_vs_fault.csv", &csv.into_bytes())?;
    Ok(Outcome {
        results: json!({ "report": rep, "replication": rs }),
        unstable: rep.case_fault.class == scanner::OscillationClass::Oscillating,
        failures: Vec::new(),
    })
}

fn execute(cli: &Cli) -> Result<bool, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let common = cli.command.common();
    if let Some(a) = common.alpha {
        cfg.fault.alpha = a;
    }
    if let Some((lo, hi, n)) = common.grid {
        cfg.grid.f_min_hz = lo;
        cfg.grid.f_max_hz = hi;
        cfg.grid.points = n;
    }
    if common.no_sssi {
        cfg.variants.sssi = false;
    }
    if let Command::SagVsFault { sag_depth: Some(d), .. } = cli.command {
        cfg.replication.sag_depth = Some(d);
    }
    let sys = cfg.system()?;
    let command = cli.command.name();
    let mut run = Run { cfg: &cfg, sys, out: cli.out.clone(), files: Vec::new() };
    let outcome = match &cli.command {
        Command::Impedance { port, seq, .. } => impedance(&mut run, port, *seq),
        Command::Compose { .. } => compose(&mut run),
        Command::Bode { .. } => bode(&mut run),
        Command::Nyquist { .. } => nyquist(&mut run),
        Command::Scan { port, seq, passive, .. } => scan(&mut run, *port, *seq, *passive),
        Command::CompareSssi { .. } => compare(&mut run),
        Command::SagVsFault { .. } => sag_vs_fault(&mut run),
    }?;

    let stem = command.replace('-', "_");
    let echo = cfg.echo();
    run.write(&format!("{stem}.config.toml"), echo.as_bytes())?;
    let mut files = run.files.clone();
    files.push(format!("{stem}.json"));
    files.push(format!("{stem}.meta.json"));
    let summary = json!({
        "schema": "seqgrid/summary/1",
        "command": command,
        "args": cli.command.args_json(),
        "versions": { "seqstab": seqstab::VERSION, "cli": env!("CARGO_PKG_VERSION"), "schema": 1 },
        "config": serde_json::to_value(&cfg).expect("config serializes"),
        "results": outcome.results,
        "unstable": outcome.unstable,
        "failures": outcome.failures,
        "files": files,
    });
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    run.write(&format!("{stem}.json"), text.as_bytes())?;
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let meta = json!({
        "command": command,
        "created_unix_s": stamp,
        "argv": std::env::args().collect::<Vec<_>>(),
        "versions": { "seqstab": seqstab::VERSION, "cli": env!("CARGO_PKG_VERSION") },
    });
    run.write(&format!("{stem}.meta.json"), (serde_json::to_string_pretty(&meta).unwrap() + "\n").as_bytes())?;

    if !outcome.failures.is_empty() {
        let mut report = format!("{} point(s) failed", outcome.failures.len());
        for f in &outcome.failures {
            report.push_str("\n  ");
            report.push_str(f);
        }
        return Err(CliError::Numerical(report));
    }
    Ok(outcome.unstable)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("verdict: unstable");
            if cli.fail_on_unstable {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                CliError::Config(_) => 1,
                CliError::Numerical(_) | CliError::Io(_) => 2,
            })
        }
    }
}
