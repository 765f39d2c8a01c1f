//! Monte-Carlo sweeps over random dictionaries.
//!
//! Each trial draws a dictionary and a handful of unit signals in `S₀`, runs
//! the implication audit, and tallies verdicts per condition. Trials run on a
//! rayon pool of the configured size; rows come out sorted by cell, so the
//! output bytes do not depend on the pool size.

mod cli;
mod plot;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::conditions::{audit_implications, ConditionId, ConditionReport, Verdict, EPS_STRICT};
use crate::dict::{generate_random_instance, InstanceParams};
use crate::error::{Error, Result};
use crate::sparse::mutual_coherence_condition;

pub use cli::{cli_main, run_cli};
pub use plot::{emit_plot_data, render_svg, PlotKind, Series};

/// Environment variable that replaces the configured base seed.
pub const SEED_ENV: &str = "SPANCERT_SEED";

fn default_conditions() -> Vec<ConditionId> {
    ConditionId::GENERAL.to_vec()
}

fn default_parallelism() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub ambient_dims: Vec<usize>,
    pub subspace_dims: Vec<usize>,
    pub num_inside: Vec<usize>,
    pub num_outside: Vec<usize>,
    /// Degrees.
    pub min_outside_angles: Vec<f64>,
    pub trials: usize,
    /// Random signals per trial.
    pub signals: usize,
    pub base_seed: u64,
    #[serde(default = "default_conditions")]
    pub conditions: Vec<ConditionId>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Fill `wall_ms`; off by default so outputs stay byte-identical.
    #[serde(default)]
    pub record_timing: bool,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("ambient_dims", self.ambient_dims.is_empty()),
            ("subspace_dims", self.subspace_dims.is_empty()),
            ("num_inside", self.num_inside.is_empty()),
            ("num_outside", self.num_outside.is_empty()),
            ("min_outside_angles", self.min_outside_angles.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::InvalidParameter(format!("sweep grid `{name}` is empty")));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if self.parallelism == 0 {
            return Err(Error::InvalidParameter("parallelism must be at least 1".into()));
        }
        if self.conditions.contains(&ConditionId::Erc) {
            return Err(Error::InvalidParameter(
                "ERC needs independent inside columns; use the sparse subcommand".into(),
            ));
        }
        if let Some(a) = self.min_outside_angles.iter().find(|a| !(0.0..90.0).contains(*a)) {
            return Err(Error::InvalidParameter(format!("angle {a} is outside [0, 90)")));
        }
        Ok(())
    }

    /// Applies `SPANCERT_SEED` when it is set.
    pub fn with_env_overrides(mut self) -> Result<Self> {
        if let Ok(s) = std::env::var(SEED_ENV) {
            self.base_seed = s
                .trim()
                .parse()
                .map_err(|e| Error::InvalidParameter(format!("{SEED_ENV}={s}: {e}")))?;
        }
        Ok(self)
    }

    /// Grid cells that describe a valid random model, in grid order.
    pub fn cells(&self) -> (Vec<Cell>, Vec<Cell>) {
        let mut ok = Vec::new();
        let mut skipped = Vec::new();
        for &d in &self.ambient_dims {
            for &d0 in &self.subspace_dims {
                for &n0 in &self.num_inside {
                    for &nm in &self.num_outside {
                        for &angle in &self.min_outside_angles {
                            let c = Cell {
                                ambient_dim: d,
                                subspace_dim: d0,
                                num_inside: n0,
                                num_outside: nm,
                                angle,
                            };
                            if c.is_valid() {
                                ok.push(c);
                            } else {
                                skipped.push(c);
                            }
                        }
                    }
                }
            }
        }
        (ok, skipped)
    }
}

pub fn sweep_config_from_toml_str(text: &str) -> Result<SweepConfig> {
    let cfg: SweepConfig = toml::from_str(text).map_err(|e| Error::Parse {
        location: e
            .span()
            .map(|s| {
                let line = text[..s.start].matches('\n').count() + 1;
                format!("line {line}")
            })
            .unwrap_or_else(|| "sweep config".into()),
        message: e.message().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_sweep_config(path: &Path) -> Result<SweepConfig> {
    sweep_config_from_toml_str(&std::fs::read_to_string(path)?)
}

/// One point of the parameter grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub ambient_dim: usize,
    pub subspace_dim: usize,
    pub num_inside: usize,
    pub num_outside: usize,
    pub angle: f64,
}

impl Cell {
    fn is_valid(&self) -> bool {
        self.subspace_dim >= 1
            && self.subspace_dim <= self.ambient_dim
            && self.num_inside >= self.subspace_dim
            && !(self.subspace_dim == self.ambient_dim && self.num_outside > 0)
            && self.subspace_dim <= crate::geometry::MAX_ENUM_DIM
    }

    fn sort_key(&self) -> (usize, usize, usize, usize, u64) {
        (
            self.ambient_dim,
            self.subspace_dim,
            self.num_inside,
            self.num_outside,
            self.angle.to_bits(),
        )
    }
}

/// `base_seed ⊕ SHA-256(cell, trial)`, truncated to 64 bits.
pub fn trial_seed(base_seed: u64, cell: &Cell, trial: usize) -> u64 {
    let mut h = Sha256::new();
    for x in [cell.ambient_dim, cell.subspace_dim, cell.num_inside, cell.num_outside, trial] {
        h.update((x as u64).to_le_bytes());
    }
    h.update(cell.angle.to_bits().to_le_bytes());
    let digest = h.finalize();
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    base_seed ^ u64::from_le_bytes(first)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConditionCounts {
    pub hold: usize,
    pub fail: usize,
    pub marginal: usize,
    /// Mean margin over all evaluations.
    pub mean_margin: f64,
}

impl ConditionCounts {
    pub fn total(&self) -> usize {
        self.hold + self.fail + self.marginal
    }

    pub fn hold_rate(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.hold as f64 / self.total() as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cell: Cell,
    pub trials: usize,
    pub signals: usize,
    /// In the configured condition order.
    pub counts: Vec<(ConditionId, ConditionCounts)>,
    pub bp_recovery_rate: f64,
    pub omp_recovery_rate: f64,
    pub wall_ms: u64,
}

impl SweepRow {
    pub fn counts_for(&self, id: ConditionId) -> Option<&ConditionCounts> {
        self.counts.iter().find(|(c, _)| *c == id).map(|(_, c)| c)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    /// Grid cells with no valid random model.
    pub skipped: Vec<Cell>,
}

struct TrialResult {
    verdicts: BTreeMap<ConditionId, Vec<(Verdict, f64)>>,
    bp_ok: usize,
    omp_ok: usize,
    signals: usize,
    wall_ms: u64,
}

fn run_trial(cfg: &SweepConfig, cell: &Cell, trial: usize) -> Result<TrialResult> {
    let start = Instant::now();
    let seed = trial_seed(cfg.base_seed, cell, trial);
    let dict = generate_random_instance(&InstanceParams {
        ambient_dim: cell.ambient_dim,
        subspace_dim: cell.subspace_dim,
        num_inside: cell.num_inside,
        num_outside: cell.num_outside,
        min_outside_angle: cell.angle,
        seed,
    })?;
    let audit = audit_implications(&dict, &[], cfg.signals, seed.rotate_left(17)).map_err(|e| {
        Error::AuditViolation(format!("cell {cell:?} trial {trial}: {e}"))
    })?;
    if let Some(v) = audit.violations.first() {
        return Err(Error::AuditViolation(format!(
            "cell {cell:?} trial {trial} (seed {seed}): edge {} violated{}",
            v.edge,
            v.signal.map(|s| format!(" on signal {s}")).unwrap_or_default()
        )));
    }
    let mut verdicts: BTreeMap<ConditionId, Vec<(Verdict, f64)>> = BTreeMap::new();
    let mut push = |r: &ConditionReport| {
        if cfg.conditions.contains(&r.id) {
            verdicts.entry(r.id).or_default().push((r.verdict, r.margin));
        }
    };
    audit.universal.iter().for_each(&mut push);
    for inst in &audit.instances {
        inst.reports.iter().for_each(&mut push);
    }
    if cfg.conditions.contains(&ConditionId::Mc) && dict.num_atoms() >= 2 {
        push(&mutual_coherence_condition(&dict, EPS_STRICT)?);
    }
    let bp_ok = audit.instances.iter().filter(|i| i.truth.bp == Verdict::Holds).count();
    let omp_ok = audit.instances.iter().filter(|i| i.truth.omp == Verdict::Holds).count();
    Ok(TrialResult {
        verdicts,
        bp_ok,
        omp_ok,
        signals: audit.instances.len(),
        wall_ms: if cfg.record_timing {
            start.elapsed().as_millis() as u64
        } else {
            0
        },
    })
}

fn aggregate(cfg: &SweepConfig, cell: Cell, trials: &[TrialResult]) -> SweepRow {
    let mut counts = Vec::new();
    for &id in &cfg.conditions {
        let mut c = ConditionCounts::default();
        let mut sum = 0.0;
        for t in trials {
            for &(v, m) in t.verdicts.get(&id).map(Vec::as_slice).unwrap_or(&[]) {
                match v {
                    Verdict::Holds => c.hold += 1,
                    Verdict::Fails => c.fail += 1,
                    Verdict::Marginal => c.marginal += 1,
                }
                sum += m;
            }
        }
        c.mean_margin = if c.total() > 0 { sum / c.total() as f64 } else { 0.0 };
        counts.push((id, c));
    }
    let signals: usize = trials.iter().map(|t| t.signals).sum();
    let rate = |k: usize| if signals == 0 { 0.0 } else { k as f64 / signals as f64 };
    SweepRow {
        cell,
        trials: trials.len(),
        signals: cfg.signals,
        counts,
        bp_recovery_rate: rate(trials.iter().map(|t| t.bp_ok).sum()),
        omp_recovery_rate: rate(trials.iter().map(|t| t.omp_ok).sum()),
        wall_ms: trials.iter().map(|t| t.wall_ms).sum(),
    }
}

/// Runs every valid cell of the grid; aborts on the first failed implication audit.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let (mut cells, skipped) = cfg.cells();
    cells.sort_by_key(Cell::sort_key);
    cells.dedup_by_key(|c| c.sort_key());
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.trials).map(move |t| (c, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let results: Vec<TrialResult> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, t)| run_trial(cfg, &cells[c], t))
            .collect::<Result<Vec<_>>>()
    })?;
    let rows = results
        .chunks(cfg.trials)
        .zip(&cells)
        .map(|(chunk, cell)| aggregate(cfg, *cell, chunk))
        .collect();
    Ok(SweepOutput { rows, skipped })
}

fn csv_header(conditions: &[ConditionId]) -> Vec<String> {
    let mut h: Vec<String> = ["D", "d0", "N0", "Nminus", "angle", "trials", "signals"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for id in conditions {
        for suffix in ["hold", "fail", "marginal"] {
            h.push(format!("{id}_{suffix}"));
        }
    }
    h.extend(["bp_recovery_rate", "omp_recovery_rate", "wall_ms"].map(String::from));
    h
}

/// CSV with one line per row: cell, per-condition counts, recovery rates, wall time.
pub fn rows_to_csv(rows: &[SweepRow]) -> Result<String> {
    let conditions: Vec<ConditionId> = rows
        .first()
        .map(|r| r.counts.iter().map(|(id, _)| *id).collect())
        .unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(csv_header(&conditions)).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![
            r.cell.ambient_dim.to_string(),
            r.cell.subspace_dim.to_string(),
            r.cell.num_inside.to_string(),
            r.cell.num_outside.to_string(),
            r.cell.angle.to_string(),
            r.trials.to_string(),
            r.signals.to_string(),
        ];
        for (_, c) in &r.counts {
            rec.extend([c.hold, c.fail, c.marginal].map(|x| x.to_string()));
        }
        rec.push(r.bp_recovery_rate.to_string());
        rec.push(r.omp_recovery_rate.to_string());
        rec.push(r.wall_ms.to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse {
        location: e
            .position()
            .map(|p| format!("line {}", p.line()))
            .unwrap_or_else(|| "csv".into()),
        message: e.to_string(),
    }
}

/// Reads rows back from [`rows_to_csv`] output. Mean margins are not stored there and come back as NaN.
pub fn rows_from_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let fixed = 7;
    if header.len() < fixed + 3 || !(header.len() - fixed - 3).is_multiple_of(3) {
        return Err(Error::Parse {
            location: "line 1".into(),
            message: "unexpected sweep CSV header".into(),
        });
    }
    let conditions = header[fixed..header.len() - 3]
        .chunks(3)
        .map(|c| {
            c[0].strip_suffix("_hold")
                .ok_or_else(|| Error::Parse {
                    location: "line 1".into(),
                    message: format!("expected a `_hold` column, found `{}`", c[0]),
                })
                .and_then(str::parse::<ConditionId>)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = k + 2;
        let field = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Parse {
                    location: format!("line {line}"),
                    message: format!("column `{}` is not a number", header[i]),
                })
        };
        let mut counts = Vec::new();
        for (j, id) in conditions.iter().enumerate() {
            let base = fixed + 3 * j;
            counts.push((
                *id,
                ConditionCounts {
                    hold: field(base)? as usize,
                    fail: field(base + 1)? as usize,
                    marginal: field(base + 2)? as usize,
                    mean_margin: f64::NAN,
                },
            ));
        }
        let n = header.len();
        rows.push(SweepRow {
            cell: Cell {
                ambient_dim: field(0)? as usize,
                subspace_dim: field(1)? as usize,
                num_inside: field(2)? as usize,
                num_outside: field(3)? as usize,
                angle: field(4)?,
            },
            trials: field(5)? as usize,
            signals: field(6)? as usize,
            counts,
            bp_recovery_rate: field(n - 3)?,
            omp_recovery_rate: field(n - 2)?,
            wall_ms: field(n - 1)? as u64,
        });
    }
    Ok(rows)
}

/// Writes `path` as CSV and a JSON copy with mean margins next to it.
pub fn write_sweep(output: &SweepOutput, path: &Path) -> Result<PathBuf> {
    std::fs::write(path, rows_to_csv(&output.rows)?)?;
    let json = path.with_extension("json");
    std::fs::write(&json, serde_json::to_string_pretty(output)?)?;
    Ok(json)
}

/// Loads rows from a sweep CSV or its JSON companion.
pub fn load_rows(path: &Path) -> Result<Vec<SweepRow>> {
    let text = std::fs::read_to_string(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("csv") => rows_from_csv(&text),
        _ => {
            let out: SweepOutput = serde_json::from_str(&text)?;
            Ok(out.rows)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(parallelism: usize) -> SweepConfig {
        SweepConfig {
            ambient_dims: vec![4],
            subspace_dims: vec![2],
            num_inside: vec![3],
            num_outside: vec![2],
            min_outside_angles: vec![20.0, 60.0],
            trials: 3,
            signals: 2,
            base_seed: 11,
            conditions: default_conditions(),
            output: None,
            parallelism,
            record_timing: false,
        }
    }

    #[test]
    fn config_parses_with_defaults_and_rejects_junk() {
        let cfg = sweep_config_from_toml_str(
            "ambient_dims = [4]\nsubspace_dims = [2]\nnum_inside = [3]\nnum_outside = [1]\n\
             min_outside_angles = [10.0]\ntrials = 2\nsignals = 1\nbase_seed = 5\n",
        )
        .unwrap();
        assert_eq!(cfg.parallelism, 1);
        assert_eq!(cfg.conditions.len(), 10);
        let err = sweep_config_from_toml_str("ambient_dims = [4]\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
        let err = sweep_config_from_toml_str(
            "ambient_dims = []\nsubspace_dims = [2]\nnum_inside = [3]\nnum_outside = [1]\n\
             min_outside_angles = [10.0]\ntrials = 2\nsignals = 1\nbase_seed = 5\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("ambient_dims"));
    }

    #[test]
    fn trial_seeds_differ_across_cells_and_trials() {
        let (cells, _) = small(1).cells();
        let a = trial_seed(1, &cells[0], 0);
        assert_ne!(a, trial_seed(1, &cells[0], 1));
        assert_ne!(a, trial_seed(1, &cells[1], 0));
        assert_eq!(a ^ 1 ^ 2, trial_seed(2, &cells[0], 0));
    }

    #[test]
    fn counts_add_up_and_output_ignores_parallelism() {
        let a = run_sweep(&small(1)).unwrap();
        let b = run_sweep(&small(4)).unwrap();
        let (ca, cb) = (rows_to_csv(&a.rows).unwrap(), rows_to_csv(&b.rows).unwrap());
        assert_eq!(ca, cb);
        for row in &a.rows {
            for (id, c) in &row.counts {
                let expected = if id.is_instance() { row.trials * row.signals } else { row.trials };
                assert_eq!(c.total(), expected, "{id}");
            }
            let rate = |id| row.counts_for(id).unwrap().hold;
            assert!(rate(ConditionId::GUsc) <= rate(ConditionId::GUdc));
            assert!(rate(ConditionId::GUdc) <= rate(ConditionId::Udc));
        }
        let back = rows_from_csv(&ca).unwrap();
        assert_eq!(rows_to_csv(&back).unwrap(), ca);
    }

    #[test]
    fn orthogonal_outside_cell_recovers_everything() {
        // D = 3, d₀ = 2 and an 89.9° minimum angle leave the outside atom nearly along the normal
        let mut cfg = small(1);
        cfg.ambient_dims = vec![3];
        cfg.num_outside = vec![1];
        cfg.min_outside_angles = vec![89.9];
        let out = run_sweep(&cfg).unwrap();
        let row = &out.rows[0];
        assert_eq!(row.bp_recovery_rate, 1.0);
        assert_eq!(row.omp_recovery_rate, 1.0);
        for id in [ConditionId::GUsc, ConditionId::GUdc, ConditionId::GIdc, ConditionId::GIrc] {
            let c = row.counts_for(id).unwrap();
            assert_eq!(c.hold, c.total(), "{id}");
        }
    }

    #[test]
    fn invalid_cells_are_skipped() {
        let mut cfg = small(1);
        cfg.subspace_dims = vec![2, 5];
        let out = run_sweep(&cfg).unwrap();
        assert_eq!(out.rows.len(), 2);
        assert_eq!(out.skipped.len(), 2);
    }
}
