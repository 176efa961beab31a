//! Shooting for the multi-soliton trajectory.
//!
//! Initial data is the alternating κ*-sum at the explicit centers d̄ᵢ(s₀) =
//! −tanh ζ̄ᵢ(s₀) with the unstable parameters ν_{i,0} placed in the box
//! s₀^{−1/2−|γᵢ|}·[−1,1]ᵏ. A run evolves the PDE with modulation at a fixed
//! cadence and stops when the shrinking-set norm N first exceeds 1 (the exit)
//! or the horizon is reached. All-but-one-point of parameter space exits in
//! finite time through a ν-component; the search exploits the outgoing
//! transversality of those exits — nested bisection for k = 2, a refining
//! coordinate grid otherwise — to land on the surviving parameter.

use crate::centers::{CenterSystem, ModelParams};
use crate::error::{LabError, Result};
use crate::modulation::{
    gaps, modulate, shrink_norm, KitCache, ModJacobian, ModSeriesRow, ModulateOptions,
    ShrinkArgmax,
};
use crate::pde::{EvolveConfig, Stepper};
use crate::profiles::{alternating_kappa_star_sum, PhaseProfile, SolitonParam};
use crate::spectral::{exact_spectrum, SpectralData};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{BufRead, Write};

/// Search strategy over the unit box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchMode {
    /// Outer bisection on ν₁ by the sign of the ν₁-exit, inner on ν₂
    /// (k = 2 only).
    NestedBisection,
    /// Refining coordinate grid around the longest-surviving cell (any k).
    GridRefine,
}

#[derive(Debug, Clone)]
pub struct ShootingConfig {
    pub params: ModelParams,
    pub s0: f64,
    pub s_target: f64,
    pub evolve: EvolveConfig,
    /// Modulation cadence in s.
    pub mod_cadence: f64,
    pub search: SearchMode,
    /// Run budget for the search.
    pub max_runs: usize,
    pub mod_options: ModulateOptions,
}

impl ShootingConfig {
    pub fn new(params: ModelParams, s0: f64, s_target: f64) -> Result<Self> {
        if !(s_target > s0 && s0 > 1.0) {
            return Err(LabError::invalid("need s_target > s0 > 1"));
        }
        let evolve = EvolveConfig::default_for(params.p);
        Ok(ShootingConfig {
            params,
            s0,
            s_target,
            evolve,
            mod_cadence: 0.05,
            search: SearchMode::NestedBisection,
            max_runs: 2000,
            mod_options: ModulateOptions {
                jacobian: ModJacobian::Analytic,
                ..Default::default()
            },
        })
    }
}

/// The rescaling Γ_s: unit-box coordinates to physical ν (and back).
pub fn gamma_rescale(system: &CenterSystem, s: f64, nu_unit: &[f64]) -> Vec<f64> {
    nu_unit
        .iter()
        .zip(system.gamma())
        .map(|(&u, &g)| s.powf(-0.5 - g.abs()) * u)
        .collect()
}

pub fn gamma_rescale_inv(system: &CenterSystem, s: f64, nu: &[f64]) -> Vec<f64> {
    nu.iter()
        .zip(system.gamma())
        .map(|(&v, &g)| s.powf(0.5 + g.abs()) * v)
        .collect()
}

/// Which constraint of N was saturated at exit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExitConstraint {
    /// Reached the horizon inside the shrinking set.
    Survived,
    /// ν-component crossed (0-based index, sign of the component).
    Nu { index: usize, sign: f64 },
    QNorm,
    /// φ-component crossed (0-based eigenmode index ≥ 1).
    Phi { index: usize },
    Phi1,
    /// Modulation failure mid-run.
    Structural,
}

impl std::fmt::Display for ExitConstraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExitConstraint::Survived => write!(f, "survived"),
            ExitConstraint::Nu { index, sign } => {
                write!(f, "nu_{}{}", index + 1, if *sign >= 0.0 { "+" } else { "-" })
            }
            ExitConstraint::QNorm => write!(f, "q_norm"),
            ExitConstraint::Phi { index } => write!(f, "phi_{}", index + 1),
            ExitConstraint::Phi1 => write!(f, "phi_1"),
            ExitConstraint::Structural => write!(f, "structural"),
        }
    }
}

/// Outcome of one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShootingRecord {
    pub nu_unit: Vec<f64>,
    pub s_exit: f64,
    pub exit: ExitConstraint,
    /// s^{1/2+|γᵢ|}νᵢ at the exit sample (the signed box coordinates).
    pub nu_signed_at_exit: Vec<f64>,
    /// Largest non-ν component of N seen along the run.
    pub max_non_nu: f64,
    /// Modulation series at the cadence.
    pub series: Vec<ModSeriesRow>,
}

impl ShootingRecord {
    pub fn survived(&self) -> bool {
        matches!(self.exit, ExitConstraint::Survived)
    }
}

/// Initial data w(·, s₀) = Σ(−1)ⁱ κ*(d̄ᵢ(s₀), Γ_{s₀}(ν)ᵢ).
pub fn initial_data(cfg: &ShootingConfig, nu_unit: &[f64]) -> Result<PhaseProfile> {
    let system = CenterSystem::new(cfg.params.clone());
    if nu_unit.len() != cfg.params.k {
        return Err(LabError::invalid("nu_unit dimension must equal k"));
    }
    if nu_unit.iter().any(|u| u.abs() > 1.0 + 1e-12) {
        return Err(LabError::invalid("nu_unit must lie in the unit box"));
    }
    let nus = gamma_rescale(&system, cfg.s0, nu_unit);
    let bz = system.bar_zeta(cfg.s0)?;
    let params: Vec<SolitonParam> = bz
        .iter()
        .zip(&nus)
        .map(|(&z, &nu)| SolitonParam::new(-z.tanh(), nu))
        .collect::<Result<_>>()?;
    alternating_kappa_star_sum(cfg.params.p, &cfg.evolve.grid, &params)
}

fn non_nu_max(sc: &crate::modulation::ShrinkComponents) -> f64 {
    let mut m = sc.q_term.max(sc.phi1_term);
    for &v in &sc.phi_terms {
        m = m.max(v);
    }
    m
}

struct RunState<'a> {
    cfg: &'a ShootingConfig,
    system: CenterSystem,
    spectral: SpectralData,
    cache: KitCache,
}

impl<'a> RunState<'a> {
    fn new(cfg: &'a ShootingConfig) -> Result<Self> {
        Ok(RunState {
            cfg,
            system: CenterSystem::new(cfg.params.clone()),
            spectral: exact_spectrum(cfg.params.k)?,
            cache: KitCache::new(),
        })
    }

    fn row(
        &mut self,
        s: f64,
        ms: &crate::modulation::ModulationState,
    ) -> Result<(ModSeriesRow, crate::modulation::ShrinkComponents)> {
        let sc = shrink_norm(ms.q_norm, &ms.params, s, self.cfg.s0, &self.system, &self.spectral)?;
        let g = gaps(&ms.params, s, &self.system, &self.spectral)?;
        let row = ModSeriesRow {
            s,
            zeta: ms.params.iter().map(|sp| sp.zeta()).collect(),
            nu: ms.params.iter().map(|sp| sp.nu).collect(),
            q_norm: ms.q_norm,
            j: g.j,
            jbar: g.jbar,
            jhat: g.jhat,
            jtilde: g.jtilde,
            n_shrink: sc.n(),
        };
        Ok((row, sc))
    }
}

/// Evolve from `nu_unit` until the first exit from the shrinking set, a
/// structural (modulation) failure, or the success horizon.
pub fn run_until_exit(cfg: &ShootingConfig, nu_unit: &[f64]) -> Result<ShootingRecord> {
    let mut rs = RunState::new(cfg)?;
    let mut state = initial_data(cfg, nu_unit)?;
    let mut s = cfg.s0;
    let stepper = Stepper::new(cfg.evolve.clone())?;
    let ds = cfg.evolve.ds;
    let steps_per_mod = (cfg.mod_cadence / ds).round().max(1.0) as usize;

    // seed modulation state (q = 0 by construction)
    let seed_params: Vec<SolitonParam> = {
        let bz = rs.system.bar_zeta(cfg.s0)?;
        let nus = gamma_rescale(&rs.system, cfg.s0, nu_unit);
        bz.iter()
            .zip(&nus)
            .map(|(&z, &nu)| SolitonParam::new(-z.tanh(), nu))
            .collect::<Result<_>>()?
    };
    let mut ms = modulate(&state, &seed_params, &mut rs.cache, &cfg.mod_options)?;
    let (row0, sc0) = rs.row(s, &ms)?;
    let mut series = vec![row0];
    let mut max_non_nu = non_nu_max(&sc0);

    // boundary starts exit immediately through their ν-component
    if sc0.n() >= 1.0 - 1e-12 {
        let signed = gamma_rescale_inv(&rs.system, s, &series[0].nu);
        let exit = match sc0.argmax() {
            ShrinkArgmax::Nu(i) => ExitConstraint::Nu { index: i, sign: signed[i].signum() },
            ShrinkArgmax::QNorm => ExitConstraint::QNorm,
            ShrinkArgmax::Phi(i) => ExitConstraint::Phi { index: i },
            ShrinkArgmax::Phi1 => ExitConstraint::Phi1,
        };
        return Ok(ShootingRecord {
            nu_unit: nu_unit.to_vec(),
            s_exit: s,
            exit,
            nu_signed_at_exit: signed,
            max_non_nu,
            series,
        });
    }

    let mut last_good = (s, state.clone(), ms.params.clone());
    let finish = |series: Vec<ModSeriesRow>,
                  s_exit: f64,
                  exit: ExitConstraint,
                  signed: Vec<f64>,
                  max_non_nu: f64| ShootingRecord {
        nu_unit: nu_unit.to_vec(),
        s_exit,
        exit,
        nu_signed_at_exit: signed,
        max_non_nu,
        series,
    };

    loop {
        // advance one cadence interval
        let mut step_err = None;
        for j in 0..steps_per_mod {
            if let Err(e) = stepper.step(&mut state, s + j as f64 * ds) {
                step_err = Some((e, s + (j + 1) as f64 * ds));
                break;
            }
        }
        if let Some((_, s_fail)) = step_err {
            let signed = gamma_rescale_inv(&rs.system, last_good.0, &ms.params.iter().map(|sp| sp.nu).collect::<Vec<_>>());
            return Ok(finish(series, s_fail, ExitConstraint::Structural, signed, max_non_nu));
        }
        s += steps_per_mod as f64 * ds;

        match modulate(&state, &ms.params, &mut rs.cache, &cfg.mod_options) {
            Ok(new_ms) => ms = new_ms,
            Err(_) => {
                let signed = gamma_rescale_inv(
                    &rs.system,
                    last_good.0,
                    &ms.params.iter().map(|sp| sp.nu).collect::<Vec<_>>(),
                );
                return Ok(finish(series, s, ExitConstraint::Structural, signed, max_non_nu));
            }
        }
        let (row, sc) = rs.row(s, &ms)?;
        series.push(row);
        max_non_nu = max_non_nu.max(non_nu_max(&sc));

        if sc.n() > 1.0 {
            // refine the crossing to step resolution inside the last interval
            let (s_back, mut fine_state, back_params) = last_good.clone();
            let mut fine_s = s_back;
            let mut fine_params = back_params;
            let mut exit_sc = sc;
            let mut exit_ms_params: Vec<f64> = ms.params.iter().map(|sp| sp.nu).collect();
            for _ in 0..steps_per_mod {
                stepper.step(&mut fine_state, fine_s).map_err(|e| e)?;
                fine_s += ds;
                let sp: Vec<SolitonParam> = fine_params.clone();
                let fine_ms = match modulate(&fine_state, &sp, &mut rs.cache, &cfg.mod_options) {
                    Ok(m) => m,
                    Err(_) => break,
                };
                fine_params = fine_ms.params.clone();
                let fsc = shrink_norm(
                    fine_ms.q_norm,
                    &fine_ms.params,
                    fine_s,
                    cfg.s0,
                    &rs.system,
                    &rs.spectral,
                )?;
                if fsc.n() > 1.0 {
                    exit_sc = fsc;
                    exit_ms_params = fine_ms.params.iter().map(|sp| sp.nu).collect();
                    s = fine_s;
                    break;
                }
            }
            let signed = gamma_rescale_inv(&rs.system, s, &exit_ms_params);
            let exit = match exit_sc.argmax() {
                ShrinkArgmax::Nu(i) => {
                    ExitConstraint::Nu { index: i, sign: signed[i].signum() }
                }
                ShrinkArgmax::QNorm => ExitConstraint::QNorm,
                ShrinkArgmax::Phi(i) => ExitConstraint::Phi { index: i },
                ShrinkArgmax::Phi1 => ExitConstraint::Phi1,
            };
            return Ok(finish(series, s, exit, signed, max_non_nu));
        }

        if s >= cfg.s_target - 1e-9 {
            let signed =
                gamma_rescale_inv(&rs.system, s, &ms.params.iter().map(|sp| sp.nu).collect::<Vec<_>>());
            return Ok(finish(series, s, ExitConstraint::Survived, signed, max_non_nu));
        }
        last_good = (s, state.clone(), ms.params.clone());
    }
}

/// Anything that can run a ν-point to its exit: the PDE runner or a cheap
/// surrogate used to exercise the search machinery.
pub trait ExitRunner {
    fn run(&mut self, nu_unit: &[f64]) -> Result<ShootingRecord>;
    fn k(&self) -> usize;
    fn runs_used(&self) -> usize;
}

/// PDE-backed runner with a ledger of completed runs (dedup + resume).
pub struct PdeRunner<'a> {
    pub cfg: &'a ShootingConfig,
    pub ledger: Vec<ShootingRecord>,
    cache: HashMap<Vec<u64>, usize>,
    runs: usize,
}

impl<'a> PdeRunner<'a> {
    pub fn new(cfg: &'a ShootingConfig) -> Self {
        PdeRunner { cfg, ledger: Vec::new(), cache: HashMap::new(), runs: 0 }
    }

    /// Seed the ledger with prior records (resume); they are replayed
    /// instead of re-run when the same ν is requested.
    pub fn with_history(cfg: &'a ShootingConfig, history: Vec<ShootingRecord>) -> Self {
        let mut cache = HashMap::new();
        for (i, r) in history.iter().enumerate() {
            cache.insert(r.nu_unit.iter().map(|v| v.to_bits()).collect(), i);
        }
        PdeRunner { cfg, ledger: history, cache, runs: 0 }
    }
}

impl ExitRunner for PdeRunner<'_> {
    fn run(&mut self, nu_unit: &[f64]) -> Result<ShootingRecord> {
        let key: Vec<u64> = nu_unit.iter().map(|v| v.to_bits()).collect();
        if let Some(&idx) = self.cache.get(&key) {
            return Ok(self.ledger[idx].clone());
        }
        let rec = run_until_exit(self.cfg, nu_unit)?;
        self.cache.insert(key, self.ledger.len());
        self.ledger.push(rec.clone());
        self.runs += 1;
        Ok(rec)
    }

    fn k(&self) -> usize {
        self.cfg.params.k
    }

    fn runs_used(&self) -> usize {
        self.runs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchOutcome {
    Success,
    BudgetExhausted,
    /// Exit signs were not monotone in the nested mode.
    SignAmbiguous,
}

#[derive(Debug)]
pub struct SearchResult {
    pub nu_star: Vec<f64>,
    pub record: ShootingRecord,
    pub outcome: SearchOutcome,
    pub runs_used: usize,
}

fn better(a: &ShootingRecord, b: &ShootingRecord) -> bool {
    a.s_exit > b.s_exit
}

/// Nested bisection for k = 2. Outer level tunes ν₁ on the sign of the
/// ν₁-coordinate at exit, inner level tunes ν₂ likewise.
fn search_nested<R: ExitRunner>(runner: &mut R, max_runs: usize) -> Result<SearchResult> {
    assert_eq!(runner.k(), 2);
    let mut best: Option<ShootingRecord> = None;

    // inner: for fixed u1, bisect u2 on the signed ν₂ box coordinate at exit;
    // returns (record at the tuned u2, sign for the outer objective)
    let inner = |runner: &mut R,
                     u1: f64,
                     best: &mut Option<ShootingRecord>|
     -> Result<std::result::Result<(ShootingRecord, f64), SearchOutcome>> {
        let (mut lo, mut hi) = (-1.0f64, 1.0f64);
        let eval = |runner: &mut R, u2: f64, best: &mut Option<ShootingRecord>| -> Result<ShootingRecord> {
            let rec = runner.run(&[u1, u2])?;
            if best.as_ref().map_or(true, |b| better(&rec, b)) {
                *best = Some(rec.clone());
            }
            Ok(rec)
        };
        let rl = eval(runner, lo, best)?;
        if rl.survived() {
            return Ok(Ok((rl, 0.0)));
        }
        let rh = eval(runner, hi, best)?;
        if rh.survived() {
            return Ok(Ok((rh, 0.0)));
        }
        let (sl, sh) = (rl.nu_signed_at_exit[1].signum(), rh.nu_signed_at_exit[1].signum());
        if sl == sh {
            return Ok(Err(SearchOutcome::SignAmbiguous));
        }
        let mut last = rh.clone();
        for _ in 0..70 {
            if runner.runs_used() >= max_runs {
                return Ok(Err(SearchOutcome::BudgetExhausted));
            }
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            let rm = eval(runner, mid, best)?;
            if rm.survived() {
                return Ok(Ok((rm, 0.0)));
            }
            last = rm.clone();
            if rm.nu_signed_at_exit[1].signum() == sl {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let sign1 = last.nu_signed_at_exit[0].signum();
        Ok(Ok((last, sign1)))
    };

    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    let first = inner(runner, lo, &mut best)?;
    let sl = match first {
        Ok((rec, _)) if rec.survived() => {
            let runs_used = runner.runs_used();
            return Ok(SearchResult {
                nu_star: rec.nu_unit.clone(),
                record: rec,
                outcome: SearchOutcome::Success,
                runs_used,
            });
        }
        Ok((rec, s)) => {
            let _ = rec;
            s
        }
        Err(o) => {
            let runs_used = runner.runs_used();
            return Ok(SearchResult {
                nu_star: best.as_ref().map(|b| b.nu_unit.clone()).unwrap_or_default(),
                record: best.expect("at least one run completed"),
                outcome: o,
                runs_used,
            });
        }
    };
    let second = inner(runner, hi, &mut best)?;
    let sh = match second {
        Ok((rec, _)) if rec.survived() => {
            let runs_used = runner.runs_used();
            return Ok(SearchResult {
                nu_star: rec.nu_unit.clone(),
                record: rec,
                outcome: SearchOutcome::Success,
                runs_used,
            });
        }
        Ok((_, s)) => s,
        Err(o) => {
            let runs_used = runner.runs_used();
            return Ok(SearchResult {
                nu_star: best.as_ref().map(|b| b.nu_unit.clone()).unwrap_or_default(),
                record: best.expect("at least one run completed"),
                outcome: o,
                runs_used,
            });
        }
    };
    if sl == sh || sl == 0.0 || sh == 0.0 {
        let runs_used = runner.runs_used();
        return Ok(SearchResult {
            nu_star: best.as_ref().map(|b| b.nu_unit.clone()).unwrap_or_default(),
            record: best.expect("at least one run completed"),
            outcome: SearchOutcome::SignAmbiguous,
            runs_used,
        });
    }

    for _ in 0..70 {
        if runner.runs_used() >= max_runs {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        match inner(runner, mid, &mut best)? {
            Ok((rec, _)) if rec.survived() => {
                let runs_used = runner.runs_used();
                return Ok(SearchResult {
                    nu_star: rec.nu_unit.clone(),
                    record: rec,
                    outcome: SearchOutcome::Success,
                    runs_used,
                });
            }
            Ok((_, sign)) => {
                if sign == sl {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Err(SearchOutcome::BudgetExhausted) => break,
            Err(o) => {
                let runs_used = runner.runs_used();
                return Ok(SearchResult {
                    nu_star: best.as_ref().map(|b| b.nu_unit.clone()).unwrap_or_default(),
                    record: best.expect("at least one run completed"),
                    outcome: o,
                    runs_used,
                });
            }
        }
    }
    let runs_used = runner.runs_used();
    let record = best.expect("at least one run completed");
    Ok(SearchResult {
        nu_star: record.nu_unit.clone(),
        record,
        outcome: SearchOutcome::BudgetExhausted,
        runs_used,
    })
}

/// Coordinate grid search with refinement around the longest-surviving cell.
fn search_grid<R: ExitRunner>(runner: &mut R, max_runs: usize) -> Result<SearchResult> {
    let k = runner.k();
    let m = 5usize; // points per dimension per level
    let mut center = vec![0.0f64; k];
    let mut half = 1.0f64;
    let mut best: Option<ShootingRecord> = None;

    'levels: loop {
        let mut points = vec![vec![0.0f64; k]];
        points.clear();
        let mut idx = vec![0usize; k];
        loop {
            let pt: Vec<f64> = (0..k)
                .map(|j| {
                    (center[j] + half * (2.0 * idx[j] as f64 / (m - 1) as f64 - 1.0))
                        .clamp(-1.0, 1.0)
                })
                .collect();
            points.push(pt);
            let mut carry = 0;
            loop {
                idx[carry] += 1;
                if idx[carry] < m {
                    break;
                }
                idx[carry] = 0;
                carry += 1;
                if carry == k {
                    break;
                }
            }
            if carry == k {
                break;
            }
        }
        let mut level_best: Option<ShootingRecord> = None;
        for pt in points {
            if runner.runs_used() >= max_runs {
                break 'levels;
            }
            let rec = runner.run(&pt)?;
            if rec.survived() {
                let runs_used = runner.runs_used();
                return Ok(SearchResult {
                    nu_star: rec.nu_unit.clone(),
                    record: rec,
                    outcome: SearchOutcome::Success,
                    runs_used,
                });
            }
            if level_best.as_ref().map_or(true, |b| better(&rec, b)) {
                level_best = Some(rec.clone());
            }
            if best.as_ref().map_or(true, |b| better(&rec, b)) {
                best = Some(rec);
            }
        }
        let lb = level_best.expect("grid level evaluated at least one point");
        center = lb.nu_unit.clone();
        half *= 2.0 / (m - 1) as f64;
        if half < 1e-15 {
            break;
        }
    }
    let runs_used = runner.runs_used();
    let record = best.expect("at least one run completed");
    Ok(SearchResult {
        nu_star: record.nu_unit.clone(),
        record,
        outcome: SearchOutcome::BudgetExhausted,
        runs_used,
    })
}

/// Search the unit box for a parameter surviving to the horizon.
pub fn search_nu<R: ExitRunner>(
    runner: &mut R,
    mode: SearchMode,
    max_runs: usize,
) -> Result<SearchResult> {
    match mode {
        SearchMode::NestedBisection => {
            if runner.k() != 2 {
                return search_grid(runner, max_runs);
            }
            let res = search_nested(runner, max_runs)?;
            if res.outcome == SearchOutcome::SignAmbiguous {
                // fall back per the contract: the grid makes no sign
                // monotonicity assumption
                return search_grid(runner, max_runs);
            }
            Ok(res)
        }
        SearchMode::GridRefine => search_grid(runner, max_runs),
    }
}

/// Summary of a (successful) run: center deviations, the recovered center of
/// mass, the gap growth slope against log s, and the φ₁ tail.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackingReport {
    pub zeta0_hat: f64,
    /// LSQ slope of each gap ζᵢ₊₁−ζᵢ against log s.
    pub gap_slopes: Vec<f64>,
    pub gap_slope_mean: f64,
    /// (p−1)/2.
    pub gap_slope_expected: f64,
    /// max − min of φ₁ over the final third of the run.
    pub phi1_tail_variation: f64,
    /// running center of mass at the sampled times
    pub com_series: Vec<(f64, f64)>,
}

pub fn soliton_tracking_report(
    series: &[ModSeriesRow],
    system: &CenterSystem,
    spectral: &SpectralData,
) -> Result<TrackingReport> {
    if series.len() < 4 {
        return Err(LabError::invalid("series too short for a tracking report"));
    }
    let k = series[0].zeta.len();
    let p = system.params.p;

    let com_series: Vec<(f64, f64)> = series
        .iter()
        .map(|r| (r.s, r.zeta.iter().sum::<f64>() / k as f64))
        .collect();
    // ζ̄ has zero mean, so the center of mass of ζ estimates ζ₀ directly
    let tail = &com_series[com_series.len() * 2 / 3..];
    let zeta0_hat = tail.iter().map(|t| t.1).sum::<f64>() / tail.len() as f64;

    let mut gap_slopes = Vec::with_capacity(k - 1);
    for i in 0..k - 1 {
        let pts: Vec<(f64, f64)> = series
            .iter()
            .map(|r| (r.s.ln(), r.zeta[i + 1] - r.zeta[i]))
            .collect();
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|t| t.0).sum();
        let sy: f64 = pts.iter().map(|t| t.1).sum();
        let sxx: f64 = pts.iter().map(|t| t.0 * t.0).sum();
        let sxy: f64 = pts.iter().map(|t| t.0 * t.1).sum();
        gap_slopes.push((n * sxy - sx * sy) / (n * sxx - sx * sx));
    }
    let gap_slope_mean = gap_slopes.iter().sum::<f64>() / gap_slopes.len() as f64;

    let phi1: Vec<f64> = series
        .iter()
        .map(|r| {
            let xi = system.xi_from_zeta(r.s, &r.zeta)?;
            Ok(spectral.to_phi(&xi)[0])
        })
        .collect::<Result<_>>()?;
    let tail_phi = &phi1[phi1.len() * 2 / 3..];
    let phi1_tail_variation = tail_phi.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - tail_phi.iter().copied().fold(f64::INFINITY, f64::min);

    Ok(TrackingReport {
        zeta0_hat,
        gap_slopes,
        gap_slope_mean,
        gap_slope_expected: 0.5 * (p - 1.0),
        phi1_tail_variation,
        com_series,
    })
}

/// c₁ regression over a record's center series.
pub fn fitc1_of_record(p: f64, record: &ShootingRecord) -> Result<crate::modulation::C1Fit> {
    let times: Vec<f64> = record.series.iter().map(|r| r.s).collect();
    let zetas: Vec<Vec<f64>> = record.series.iter().map(|r| r.zeta.clone()).collect();
    crate::modulation::fit_c1(p, &times, &zetas)
}

/// JSON-lines ledger: one record per run (series omitted).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LedgerLine {
    pub nu_unit: Vec<f64>,
    pub s_exit: f64,
    pub exit_constraint: String,
    pub config_hash: String,
}

pub fn write_ledger<W: Write>(
    records: &[ShootingRecord],
    config_hash: &str,
    out: &mut W,
) -> Result<()> {
    for r in records {
        let line = LedgerLine {
            nu_unit: r.nu_unit.clone(),
            s_exit: r.s_exit,
            exit_constraint: r.exit.to_string(),
            config_hash: config_hash.to_string(),
        };
        serde_json::to_writer(&mut *out, &line).map_err(|e| LabError::Parse(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_ledger<R: BufRead>(input: R) -> Result<Vec<LedgerLine>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| LabError::Parse(e.to_string()))?);
    }
    Ok(out)
}

/// Synthetic surrogate runner: ν̇ᵢ = νᵢ + εᵢ(s) with everything else pinned
/// to zero. Exercises exit detection and the search without PDE cost.
pub struct SyntheticRunner {
    pub system: CenterSystem,
    pub s0: f64,
    pub s_target: f64,
    pub eps: Box<dyn Fn(f64) -> Vec<f64>>,
    pub cadence: f64,
    runs: usize,
}

impl SyntheticRunner {
    pub fn new(
        params: ModelParams,
        s0: f64,
        s_target: f64,
        eps: Box<dyn Fn(f64) -> Vec<f64>>,
    ) -> Self {
        SyntheticRunner {
            system: CenterSystem::new(params),
            s0,
            s_target,
            eps,
            cadence: 0.02,
            runs: 0,
        }
    }
}

impl ExitRunner for SyntheticRunner {
    fn run(&mut self, nu_unit: &[f64]) -> Result<ShootingRecord> {
        self.runs += 1;
        let k = self.system.k();
        let mut nu = gamma_rescale(&self.system, self.s0, nu_unit);
        let mut s = self.s0;
        let bz = |s: f64| self.system.bar_zeta(s).unwrap();
        let mut series = Vec::new();
        let push_row = |s: f64, nu: &[f64], series: &mut Vec<ModSeriesRow>| {
            series.push(ModSeriesRow {
                s,
                zeta: bz(s),
                nu: nu.to_vec(),
                q_norm: 0.0,
                j: 0.0,
                jbar: 0.0,
                jhat: 0.0,
                jtilde: 0.0,
                n_shrink: nu
                    .iter()
                    .zip(self.system.gamma())
                    .map(|(&v, &g)| s.powf(0.5 + g.abs()) * v.abs())
                    .fold(0.0, f64::max),
            });
        };
        push_row(s, &nu, &mut series);
        loop {
            let weighted = gamma_rescale_inv(&self.system, s, &nu);
            let n = weighted.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if n >= 1.0 - 1e-13 && s == self.s0 || n > 1.0 {
                let (mut index, mut mag) = (0usize, 0.0f64);
                for (i, &v) in weighted.iter().enumerate() {
                    if v.abs() > mag {
                        mag = v.abs();
                        index = i;
                    }
                }
                return Ok(ShootingRecord {
                    nu_unit: nu_unit.to_vec(),
                    s_exit: s,
                    exit: ExitConstraint::Nu { index, sign: weighted[index].signum() },
                    nu_signed_at_exit: weighted,
                    max_non_nu: 0.0,
                    series,
                });
            }
            if s >= self.s_target - 1e-9 {
                return Ok(ShootingRecord {
                    nu_unit: nu_unit.to_vec(),
                    s_exit: s,
                    exit: ExitConstraint::Survived,
                    nu_signed_at_exit: weighted,
                    max_non_nu: 0.0,
                    series,
                });
            }
            // RK4 step of ν̇ = ν + ε(s)
            let h = self.cadence.min(self.s_target - s);
            let f = |s: f64, nu: &[f64]| -> Vec<f64> {
                let e = (self.eps)(s);
                nu.iter().zip(&e).map(|(&v, &ev)| v + ev).collect()
            };
            let k1 = f(s, &nu);
            let mk = |nu: &[f64], k: &[f64], c: f64| -> Vec<f64> {
                nu.iter().zip(k).map(|(&v, &kv)| v + c * h * kv).collect()
            };
            let k2 = f(s + 0.5 * h, &mk(&nu, &k1, 0.5));
            let k3 = f(s + 0.5 * h, &mk(&nu, &k2, 0.5));
            let k4 = f(s + h, &mk(&nu, &k3, 1.0));
            for i in 0..k {
                nu[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            s += h;
            push_row(s, &nu, &mut series);
        }
    }

    fn k(&self) -> usize {
        self.system.k()
    }

    fn runs_used(&self) -> usize {
        self.runs
    }
}
