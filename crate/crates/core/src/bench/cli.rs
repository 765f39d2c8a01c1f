//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use super::{emit_plot_data, load_rows, load_sweep_config, run_sweep, write_sweep, PlotKind};
use crate::conditions::{audit_implications, Certifier, ConditionId, ConditionReport, Verdict};
use crate::dict::{
    generate_random_instance, load_dictionary, load_signal, random_signal_in_subspace, save_dictionary,
    save_signal, dictionary_to_json_string, InstanceParams, PartitionedDictionary, Representation,
};
use crate::error::{Error, Result};
use crate::pursuit::{bp_optimal_face_mass_on_outside, solve_bp_dict, solve_omp, OMP_RESIDUAL_TOL};
use crate::sparse::{coherence_implies_conditions, exact_recovery_condition, nsp_check_via_tudc, uniform_recovery_check};

#[derive(Parser)]
#[command(name = "spancert", version, about = "Subspace-preserving recovery with basis pursuit and OMP")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    /// Threshold below which a margin counts as marginal.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Exit with status 1 when a checked condition fails.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SparseCheck {
    Erc,
    Mc,
    Nsp,
    Uniform,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw a random dictionary (and optionally a signal in its subspace).
    Gen {
        #[arg(long)]
        ambient_dim: usize,
        #[arg(long)]
        subspace_dim: usize,
        #[arg(long)]
        num_inside: usize,
        #[arg(long)]
        num_outside: usize,
        /// Minimum angle in degrees between outside atoms and the subspace.
        #[arg(long, default_value_t = 0.0)]
        min_angle: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        signal_out: Option<PathBuf>,
        #[arg(long)]
        signal_seed: Option<u64>,
    },
    /// Basis pursuit over the whole dictionary.
    SolveBp {
        #[arg(long)]
        dict: PathBuf,
        #[arg(long)]
        signal: PathBuf,
    },
    /// Orthogonal matching pursuit over the whole dictionary.
    SolveOmp {
        #[arg(long)]
        dict: PathBuf,
        #[arg(long)]
        signal: PathBuf,
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Inradius, circumradius, covering radius and dual vertices of the inside atoms.
    Geometry {
        #[arg(long)]
        dict: PathBuf,
        /// Include the dual vertices.
        #[arg(long)]
        vertices: bool,
    },
    /// Check recovery conditions.
    Certify {
        #[arg(long)]
        dict: PathBuf,
        #[arg(long)]
        signal: Option<PathBuf>,
        /// `all` or a comma-separated list such as `T-IDC,UDC`.
        #[arg(long, default_value = "all")]
        conditions: String,
        #[arg(long, default_value_t = 1000)]
        urc_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Classical sparse-recovery checks.
    Sparse {
        /// Dictionary file; for erc and nsp its labels mark the support atoms.
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        d0: Option<usize>,
        #[arg(long, value_enum)]
        check: SparseCheck,
        #[arg(long, default_value_t = crate::sparse::DEFAULT_PARTITION_BUDGET)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Check every implication between conditions and against the pursuit algorithms.
    Audit {
        #[arg(long)]
        dict: PathBuf,
        #[arg(long)]
        signal: Option<PathBuf>,
        /// Random signals drawn from the subspace in addition to `--signal`.
        #[arg(long, default_value_t = 10)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a Monte-Carlo sweep from a TOML config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// CSV destination; overrides the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        parallelism: Option<usize>,
        /// Record wall-clock time per cell.
        #[arg(long)]
        timing: bool,
    },
    /// Chart sweep results.
    Plot {
        /// Sweep CSV or its JSON companion.
        #[arg(long)]
        input: PathBuf,
        /// condition_rates, recovery_rates or margins.
        #[arg(long, default_value = "condition_rates")]
        kind: String,
        #[arg(long)]
        out_svg: PathBuf,
        #[arg(long)]
        out_csv: PathBuf,
    },
}

struct Outcome {
    value: Value,
    any_fail: bool,
}

fn to_value<T: Serialize>(x: &T) -> Result<Value> {
    Ok(serde_json::to_value(x)?)
}

fn signal_of(path: &Path) -> Result<Vec<f64>> {
    Ok(load_signal(path)?.b)
}

fn outside_support(dict: &PartitionedDictionary, c: &[f64]) -> Result<(bool, Vec<usize>)> {
    dict.is_subspace_preserving(&Representation::new(c.to_vec()))
}

fn parse_conditions(list: &str, dict: &PartitionedDictionary, has_signal: bool) -> Result<Vec<ConditionId>> {
    if list.trim().eq_ignore_ascii_case("all") {
        let mut ids: Vec<ConditionId> = ConditionId::GENERAL
            .into_iter()
            .filter(|id| has_signal || !id.is_instance())
            .collect();
        if dict.num_atoms() >= 2 {
            ids.push(ConditionId::Mc);
        }
        if dict.num_inside() == dict.subspace_dim() {
            ids.push(ConditionId::Erc);
        }
        return Ok(ids);
    }
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

/// Notes recording what BP and OMP actually do on the whole dictionary.
fn ground_truth_notes(dict: &PartitionedDictionary, b: &[f64]) -> Result<(String, String)> {
    let omp = solve_omp(&dict.matrix(), b, None, OMP_RESIDUAL_TOL)?;
    let (preserving, bad) = outside_support(dict, &omp.coefficients.c)?;
    let selected: Vec<usize> = omp.steps.iter().map(|s| s.selected).collect();
    let omp_note = format!(
        "OMP ground truth: selected atoms {selected:?} in {} iterations, {}{}",
        omp.iterations(),
        if omp.converged { "converged" } else { "did not converge" },
        if preserving {
            ", final representation is subspace preserving".to_string()
        } else {
            format!(", final representation uses outside atoms {bad:?}")
        }
    );
    let mass = bp_optimal_face_mass_on_outside(dict, b)?;
    let bp_note = format!("BP ground truth: largest outside mass over optimal solutions {mass:.3e}");
    Ok((omp_note, bp_note))
}

fn certify(cli: &Cli, dict: &Path, signal: Option<&Path>, conditions: &str, urc_samples: usize, seed: u64) -> Result<Outcome> {
    let dict = load_dictionary(dict)?;
    let b = signal.map(signal_of).transpose()?;
    let ids = parse_conditions(conditions, &dict, b.is_some())?;
    let mut cert = Certifier::new(&dict);
    if let Some(t) = cli.tol {
        cert = cert.with_tol(t);
    }
    let notes = b.as_deref().map(|b| ground_truth_notes(&dict, b)).transpose()?;
    let mut reports: Vec<ConditionReport> = Vec::new();
    for id in ids {
        let mut r = match id {
            ConditionId::Urc => cert.urc_sampled(urc_samples, seed)?,
            _ => cert.certify(id, b.as_deref())?,
        };
        if let Some((omp, bp)) = &notes {
            match id {
                ConditionId::Irc | ConditionId::GIrc => r.notes.push(omp.clone()),
                ConditionId::TIdc | ConditionId::Idc | ConditionId::GIdc => r.notes.push(bp.clone()),
                _ => {}
            }
        }
        reports.push(r);
    }
    let any_fail = reports.iter().any(|r| r.verdict == Verdict::Fails);
    Ok(Outcome {
        value: to_value(&reports)?,
        any_fail,
    })
}

fn run(cli: &Cli) -> Result<Outcome> {
    let plain = |value: Value| Outcome { value, any_fail: false };
    match &cli.cmd {
        Cmd::Gen {
            ambient_dim,
            subspace_dim,
            num_inside,
            num_outside,
            min_angle,
            seed,
            out,
            signal_out,
            signal_seed,
        } => {
            let dict = generate_random_instance(&InstanceParams {
                ambient_dim: *ambient_dim,
                subspace_dim: *subspace_dim,
                num_inside: *num_inside,
                num_outside: *num_outside,
                min_outside_angle: *min_angle,
                seed: *seed,
            })?;
            if let Some(p) = signal_out {
                save_signal(&random_signal_in_subspace(&dict, signal_seed.unwrap_or(*seed)), p)?;
            }
            match out {
                Some(p) => {
                    save_dictionary(&dict, p)?;
                    Ok(plain(json!({ "written": p, "num_atoms": dict.num_atoms() })))
                }
                None => Ok(plain(serde_json::from_str(&dictionary_to_json_string(&dict))?)),
            }
        }
        Cmd::SolveBp { dict, signal } => {
            let dict = load_dictionary(dict)?;
            let b = signal_of(signal)?;
            let r = solve_bp_dict(&dict, &b)?;
            let (preserving, outside) = outside_support(&dict, &r.coefficients.c)?;
            let mut v = to_value(&r)?;
            v["subspace_preserving"] = json!(preserving);
            v["outside_atoms_used"] = json!(outside);
            if dict.distance_to_subspace(&b)? <= 1e-9 * crate::numkit::vector::norm2(&b).max(1.0) {
                v["optimal_face_outside_mass"] = json!(bp_optimal_face_mass_on_outside(&dict, &b)?);
            }
            Ok(Outcome {
                value: v,
                any_fail: !preserving,
            })
        }
        Cmd::SolveOmp { dict, signal, max_iters } => {
            let dict = load_dictionary(dict)?;
            let b = signal_of(signal)?;
            let t = solve_omp(&dict.matrix(), &b, *max_iters, OMP_RESIDUAL_TOL)?;
            let (preserving, outside) = outside_support(&dict, &t.coefficients.c)?;
            let mut v = to_value(&t)?;
            v["subspace_preserving"] = json!(preserving);
            v["outside_atoms_used"] = json!(outside);
            Ok(Outcome {
                value: v,
                any_fail: !preserving,
            })
        }
        Cmd::Geometry { dict, vertices } => {
            let dict = load_dictionary(dict)?;
            let cert = Certifier::new(&dict);
            let (poly, g) = cert.polar()?;
            let mut v = json!({
                "r0": g.r0,
                "R0": g.big_r0,
                "gamma0_deg": g.gamma0.to_degrees(),
                "gamma0_rad": g.gamma0,
                "num_dual_vertices": g.num_dual_vertices,
            });
            if *vertices {
                v["vertices"] = json!(poly.vertices());
            }
            Ok(plain(v))
        }
        Cmd::Certify {
            dict,
            signal,
            conditions,
            urc_samples,
            seed,
        } => certify(cli, dict, signal.as_deref(), conditions, *urc_samples, *seed),
        Cmd::Sparse {
            matrix,
            d0,
            check,
            budget,
            seed,
            samples,
        } => {
            let dict = load_dictionary(matrix)?;
            let d0 = d0.unwrap_or(dict.subspace_dim());
            let tol = cli.tol.unwrap_or(crate::conditions::EPS_STRICT);
            match check {
                SparseCheck::Erc => {
                    let r = exact_recovery_condition(&dict.inside_atoms(), &dict.outside_atoms())?.with_tol(tol);
                    Ok(Outcome {
                        any_fail: r.fails(),
                        value: to_value(&r)?,
                    })
                }
                SparseCheck::Nsp => {
                    let r = nsp_check_via_tudc(&dict.inside_atoms(), &dict.outside_atoms(), *samples, *seed)?
                        .with_tol(tol);
                    Ok(Outcome {
                        any_fail: r.fails(),
                        value: to_value(&r)?,
                    })
                }
                SparseCheck::Mc => {
                    let r = coherence_implies_conditions(dict.atoms(), d0, *budget, *seed)?;
                    Ok(Outcome {
                        any_fail: !r.applicable || !r.passed(),
                        value: to_value(&r)?,
                    })
                }
                SparseCheck::Uniform => {
                    let r = uniform_recovery_check(dict.atoms(), d0, *budget, *seed)?;
                    Ok(Outcome {
                        any_fail: r.verdict == Verdict::Fails,
                        value: to_value(&r)?,
                    })
                }
            }
        }
        Cmd::Audit {
            dict,
            signal,
            samples,
            seed,
        } => {
            let dict = load_dictionary(dict)?;
            let signals: Vec<Vec<f64>> = signal.iter().map(|p| signal_of(p)).collect::<Result<_>>()?;
            let report = audit_implications(&dict, &signals, *samples, *seed)?;
            let summary = json!({
                "edges_checked": report.edges_checked,
                "violations": report.violations,
                "universal": report.universal,
                "signals": report.instances.len(),
            });
            report.into_result()?;
            Ok(plain(summary))
        }
        Cmd::Sweep {
            config,
            out,
            parallelism,
            timing,
        } => {
            let mut cfg = load_sweep_config(config)?.with_env_overrides()?;
            if let Some(p) = parallelism {
                cfg.parallelism = *p;
            }
            cfg.record_timing |= *timing;
            let dest = out
                .clone()
                .or_else(|| cfg.output.clone())
                .ok_or_else(|| Error::InvalidParameter("no output path: pass --out or set `output`".into()))?;
            let result = run_sweep(&cfg)?;
            let json_path = write_sweep(&result, &dest)?;
            Ok(plain(json!({
                "csv": dest,
                "json": json_path,
                "rows": result.rows.len(),
                "skipped_cells": result.skipped.len(),
                "base_seed": cfg.base_seed,
            })))
        }
        Cmd::Plot {
            input,
            kind,
            out_svg,
            out_csv,
        } => {
            let kind: PlotKind = kind.parse()?;
            let rows = load_rows(input)?;
            emit_plot_data(&rows, kind, out_svg, out_csv)?;
            Ok(plain(json!({ "svg": out_svg, "csv": out_csv, "points": rows.len() })))
        }
    }
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "-".into(),
        other => other.to_string(),
    }
}

/// Arrays of objects become aligned columns of their scalar fields; objects become `key: value` lines.
fn render_table(v: &Value) -> String {
    match v {
        Value::Array(items) if items.iter().all(Value::is_object) && !items.is_empty() => {
            let keys: Vec<&String> = items[0]
                .as_object()
                .expect("checked")
                .iter()
                .filter(|(_, x)| !x.is_object() && !x.is_array())
                .map(|(k, _)| k)
                .collect();
            let cells: Vec<Vec<String>> = items
                .iter()
                .map(|it| keys.iter().map(|k| scalar_text(&it[k.as_str()])).collect())
                .collect();
            let widths: Vec<usize> = keys
                .iter()
                .enumerate()
                .map(|(i, k)| cells.iter().map(|r| r[i].len()).chain([k.len()]).max().unwrap_or(0))
                .collect();
            let line = |fields: Vec<String>| {
                fields
                    .iter()
                    .zip(&widths)
                    .map(|(f, w)| format!("{f:<w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
                    .trim_end()
                    .to_string()
            };
            let mut out = vec![line(keys.iter().map(|k| k.to_string()).collect())];
            out.extend(cells.into_iter().map(line));
            out.join("\n") + "\n"
        }
        Value::Object(map) => {
            let w = map.keys().map(String::len).max().unwrap_or(0);
            map.iter()
                .map(|(k, x)| format!("{k:<w$}  {}\n", scalar_text(x)))
                .collect()
        }
        other => format!("{}\n", scalar_text(other)),
    }
}

/// Parses `args`, runs the command and writes its output; returns the exit status.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match run(&cli) {
        Ok(outcome) => {
            let text = match cli.format {
                Format::Json => serde_json::to_string_pretty(&outcome.value).expect("values serialize") + "\n",
                Format::Table => render_table(&outcome.value),
            };
            let _ = out.write_all(text.as_bytes());
            if cli.strict && outcome.any_fail {
                1
            } else {
                0
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
    }
}

/// Runs the CLI on the process arguments and standard streams.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli(args, &mut stdout.lock(), &mut stderr.lock())
}
