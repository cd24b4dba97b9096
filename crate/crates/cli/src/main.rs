use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use moran_core::certificate::{spectrum_certificate, tile_certificate, verify_certificate, Certificate, Payload};
use moran_core::config::{GridSpec, SystemConfig};
use moran_core::existence::{existence_check, Existence, GeneralSystem};
use moran_core::fourier::{PhaseTable, TransformEvaluator};
use moran_core::spectra::{q_grid_check, unit_grid};
use moran_core::system::{CaseClass, Distinctness, Hypothesis};
use moran_core::{MoranError, MoranSystem, Result};

#[derive(Parser, Debug)]
#[command(name = "moran", version, about = "Integer tiles and spectra of Cantor-Moran measures")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// s-values, distinctness, case, normalization, existence and hypothesis.
    Analyze {
        config: PathBuf,
        /// Number of s-values to print.
        #[arg(long, default_value_t = 20)]
        window: usize,
        #[arg(long, default_value_t = 20)]
        depth: usize,
    },
    /// Tile certificate for the aggregate digit set at level k.
    Tile {
        config: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Nested spectrum levels with exact and certified checks.
    Spectrum {
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long)]
        depth: Option<usize>,
        /// Offset search window K.
        #[arg(long)]
        window: Option<i64>,
        /// Q-grid tolerance reported alongside the exact checks.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        grid: Option<GridSpec>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-verify a certificate against the config.
    Verify {
        config: PathBuf,
        certificate: PathBuf,
        /// Write the verification record here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// CSV rows `x,value[,err]`.
    PlotData {
        config: PathBuf,
        what: PlotKind,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long)]
        grid: Option<GridSpec>,
        #[arg(long, default_value_t = 40)]
        depth: usize,
        /// Level used for `q`.
        #[arg(long, default_value_t = 1)]
        levels: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum PlotKind {
    #[value(name = "mu_hat", alias = "mu-hat")]
    MuHat,
    #[value(name = "q", alias = "Q")]
    Q,
    #[value(name = "nu_tail", alias = "nu-tail")]
    NuTail,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(3),
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load(path: &Path) -> Result<(SystemConfig, MoranSystem)> {
    let cfg = SystemConfig::from_path(path)?;
    let sys = cfg.system()?;
    Ok((cfg, sys))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                so.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

fn out_path(flag: Option<PathBuf>, cfg: &SystemConfig) -> Option<PathBuf> {
    flag.or_else(|| cfg.options.out.as_ref().map(PathBuf::from))
}

fn run(cli: Cli) -> Result<u8> {
    match cli.cmd {
        Cmd::Analyze { config, window, depth } => analyze(&config, window, depth),
        Cmd::Tile { config, k, out } => {
            if k == 0 {
                return Err(MoranError::Domain("--k must be at least 1".into()));
            }
            let (cfg, sys) = load(&config)?;
            let cert = match tile_certificate(&sys, k, cfg.element_cap()) {
                Err(MoranError::Collision { i, j, value }) => {
                    eprintln!("not a tile at level {k}: s_{i} = s_{j} = {value}");
                    eprintln!("witness ({i}, {j})");
                    return Ok(1);
                }
                r => r?,
            };
            if let Payload::Tile { record } = &cert.payload {
                eprintln!(
                    "level {k}: |D| = {}, |L| = {}, modulus {}: tiling verified",
                    record.digits.len(),
                    record.complement.len(),
                    record.modulus
                );
            }
            emit(out_path(out, &cfg).as_deref(), &cert.to_json()?)?;
            Ok(0)
        }
        Cmd::Spectrum { config, levels, depth, window, tol, grid, out } => {
            let (cfg, sys) = load(&config)?;
            let mut params = cfg.build_params();
            if let Some(d) = depth {
                params.depth = d;
            }
            if let Some(w) = window {
                params.offset_window = w;
            }
            let cert = spectrum_certificate(&sys, levels, &params)?;
            let Payload::Spectrum { scale_exponent, run, .. } = &cert.payload else { unreachable!() };
            let grid = grid.or(cfg.options.grid).map(|g| g.points()).unwrap_or_else(|| unit_grid(1000));
            let (norm, _) = sys.normalize()?;
            eprintln!(
                "{:?}, m = {scale_exponent}, m0 = {}, alpha = {}, theta0 = sigma0 = {}",
                run.case, run.m0, run.alpha, run.sigma0
            );
            let mut all_ok = true;
            for l in &run.levels {
                let q = q_grid_check(&norm, &l.elements, l.k, &grid, tol)?;
                let ok = l.status.finite_spectrum && l.status.tail.ok && q.pass;
                all_ok &= ok;
                eprintln!(
                    "level {}: k = {}, |Lambda| = {}, exact spectrum {}, tail bound {:.6e}{}, max|Q-1| = {:.3e}{}",
                    l.level,
                    l.k,
                    l.elements.len(),
                    l.status.finite_spectrum,
                    l.status.tail.min_lower,
                    if l.status.tail.ok { "" } else { " (below epsilon0)" },
                    q.max_dev,
                    l.status.case2_min.map(|c| format!(", Case II tail factor min {c:.6e}")).unwrap_or_default(),
                );
            }
            emit(out_path(out, &cfg).as_deref(), &cert.to_json()?)?;
            Ok(if all_ok { 0 } else { 1 })
        }
        Cmd::Verify { config, certificate, out } => {
            let (_, sys) = load(&config)?;
            let cert = Certificate::from_json(&std::fs::read_to_string(&certificate)?)?;
            let rep = verify_certificate(&cert, &sys)?;
            for c in &rep.checks {
                let detail = c.detail.as_deref().map(|d| format!(" ({d})")).unwrap_or_default();
                println!("{} {}{}", if c.pass { "PASS" } else { "FAIL" }, c.name, detail);
            }
            match rep.first_failure() {
                None => println!("PASS"),
                Some(c) => {
                    println!("FAIL: {}{}", c.name, c.detail.as_deref().map(|d| format!(": {d}")).unwrap_or_default())
                }
            }
            if let Some(p) = out {
                std::fs::write(p, rep.verification_certificate(&sys).to_json()?)?;
            }
            Ok(if rep.pass { 0 } else { 1 })
        }
        Cmd::PlotData { config, what, k, grid, depth, levels, out } => {
            let (cfg, sys) = load(&config)?;
            let grid = grid.or(cfg.options.grid).map(|g| g.points()).unwrap_or_else(|| unit_grid(1000));
            let csv = plot_data(&sys, what, k, &grid, depth, levels, &cfg)?;
            emit(out.as_deref(), &csv)?;
            Ok(0)
        }
    }
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn plot_data(
    sys: &MoranSystem,
    what: PlotKind,
    k: usize,
    grid: &[f64],
    depth: usize,
    levels: usize,
    cfg: &SystemConfig,
) -> Result<String> {
    let mut out = String::new();
    match what {
        PlotKind::MuHat => {
            let ev = TransformEvaluator::new(sys)?;
            out.push_str("x,abs_mu_hat\n");
            for &x in grid {
                out.push_str(&format!("{},{}\n", fmt17(x), fmt17(ev.mu_hat_k(k, x)?.norm())));
            }
        }
        PlotKind::NuTail => {
            let ev = TransformEvaluator::new(sys)?;
            out.push_str("x,abs_nu_tail,err\n");
            for &x in grid {
                let v = ev.nu_hat_tail(k, x, depth)?;
                out.push_str(&format!("{},{},{}\n", fmt17(x), fmt17(v.abs()), fmt17(v.err)));
            }
        }
        PlotKind::Q => {
            // Q of a built level, in the normalized frame.
            let cert = spectrum_certificate(sys, levels.max(1), &cfg.build_params())?;
            let Payload::Spectrum { run, .. } = &cert.payload else { unreachable!() };
            let lvl = run.levels.last().expect("at least one level");
            let (norm, _) = sys.normalize()?;
            let table = PhaseTable::new(&norm, lvl.k, &lvl.elements)?;
            out.push_str("x,q\n");
            for &x in grid {
                let q: f64 = (0..table.len()).map(|i| table.mu_abs_sq(i, x)).sum();
                out.push_str(&format!("{},{}\n", fmt17(x), fmt17(q)));
            }
        }
    }
    Ok(out)
}

fn analyze(config: &Path, window: usize, depth: usize) -> Result<u8> {
    let (_, sys) = load(config)?;
    println!("system: {}", sys.canonical());
    let w = sys.horizon().map_or(window, |h| h.min(window));
    let s = sys.s_values(w)?;
    println!("s_1..s_{w}: {}", s.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "));
    let dwin = sys.collision_window().or(sys.horizon()).unwrap_or(w);
    let distinct = sys.distinctness_check(dwin)?;
    match &distinct {
        Distinctness::Distinct { certified, window } => {
            println!("distinct: yes ({}, window {window})", if *certified { "certified" } else { "uncertified" })
        }
        Distinctness::Collision { i, j, value } => println!("distinct: no, s_{i} = s_{j} = {value}"),
    }
    if distinct.is_distinct() {
        match sys.case_classify(dwin)? {
            CaseClass::CaseI { pattern } => {
                let bps = pattern.breakpoints_upto(pattern.start + 3 * pattern.period);
                println!(
                    "case: I, breakpoints {} ... (period {} from {})",
                    bps.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(" "),
                    pattern.period,
                    pattern.start
                );
            }
            CaseClass::CaseII { k0 } => println!("case: II, no breakpoints from k0 = {k0}"),
            CaseClass::Undetermined { observed, window } => {
                println!("case: undetermined, breakpoints seen within {window}: {observed:?}")
            }
        }
        if sys.drift().is_some() {
            println!("alpha: {}", sys.alpha()?);
        }
    }
    match sys.normalize() {
        Ok((_, m)) => println!("normalization: m = {m}"),
        Err(e) => println!("normalization: n/a ({e})"),
    }
    match existence_check(&GeneralSystem::from_system(&sys), depth)? {
        Existence::Converges { depth, partial_sum, tail_bound } => {
            println!("existence: converges (sum to {depth} = {:.12e}, tail = {tail_bound})", partial_sum.to_f64())
        }
        Existence::Diverges { witness_index, term } => {
            println!("existence: diverges (term {witness_index} = {term} repeats)")
        }
        Existence::Unknown { partial_sums } => println!(
            "existence: unknown for a finite prefix (partial sum {})",
            partial_sums.last().map_or_else(|| "0".to_string(), |s| s.to_string())
        ),
    }
    match sys.spectral_hypothesis_check()? {
        Hypothesis::Satisfied { m0 } => println!("hypothesis |b_k| > (N-1)|t_k|: holds for k >= {m0}"),
        Hypothesis::Violated { k, b, t } => {
            println!("hypothesis |b_k| > (N-1)|t_k|: violated at k = {k} (b_k = {b}, t_k = {t})")
        }
    }
    Ok(0)
}
