//! Mission execution under a finite tank: walk the plan, return to the depot
//! when the tank runs out, resume where work stopped.
//!
//! The vehicle alternates between three modes: following the coverage plan,
//! returning to the depot at the entrance, and riding back out to the
//! interruption point. Consumption is metered per working metre; transit
//! (headland repeats, returns, resumes) costs nothing. The walk advances
//! atom by atom (straight runs and turn fillets), so identical inputs give
//! bit-identical logs.

use crate::field::NormalizedField;
use crate::graph::{GraphError, Heading, HlDir, NetPos, RoutePath, TransitionGraph};
use crate::plan::{atomize, Atom, AtomKind, CoveragePlan, PlanError};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("vehicle stranded: {0}")]
    Stranded(String),
    #[error(transparent)]
    Routing(#[from] GraphError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// Tank model. Capacity is expressed in working metres per full tank; the
/// time-domain fields feed the rate estimator demos.
#[derive(Clone, Copy, Debug)]
pub struct TankState {
    /// Fill fraction in [0, 1].
    pub fill: f64,
    /// Working metres a full tank lasts. `f64::INFINITY` disables returns.
    pub capacity_working_m: f64,
    /// Nominal emptying rate, fraction per second.
    pub emptying_rate: f64,
    /// Estimator update interval (s).
    pub dt: f64,
    /// Travel speed (m/s).
    pub speed: f64,
}

impl TankState {
    pub fn with_capacity(capacity_working_m: f64) -> Self {
        TankState {
            fill: 1.0,
            capacity_working_m,
            emptying_rate: 0.0,
            dt: 1.0,
            speed: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TriggerMode {
    /// Return exactly when the next working metre would exceed capacity.
    ExactCapacity,
    /// Threshold plus path-length comparison against the predicted empty
    /// point, evaluated at atom boundaries.
    Predictive,
}

#[derive(Clone, Copy, Debug)]
pub struct SimPolicy {
    pub mode: TriggerMode,
    /// Fill fraction below which a predictive return may trigger.
    pub f_threshold: f64,
}

impl Default for SimPolicy {
    fn default() -> Self {
        SimPolicy {
            mode: TriggerMode::ExactCapacity,
            f_threshold: 0.1,
        }
    }
}

/// One depot-to-depot work period.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub run: usize,
    pub working_m: f64,
    pub nonworking_m: f64,
    pub return_m: f64,
    pub resume_m: f64,
    pub cumulative_m: f64,
}

#[derive(Clone, Debug)]
pub struct MissionLog {
    pub runs: Vec<RunRecord>,
    pub plan_length: f64,
    pub plan_working_length: f64,
    /// Return and resume paths per interruption, in order.
    pub detours: Vec<(RoutePath, RoutePath)>,
}

impl MissionLog {
    pub fn rho(&self) -> usize {
        self.runs.len()
    }

    /// Total mission length D.
    pub fn total(&self) -> f64 {
        self.runs
            .iter()
            .map(|r| r.working_m + r.nonworking_m + r.return_m + r.resume_m)
            .sum()
    }

    pub fn excess(&self) -> f64 {
        self.total() - self.plan_length
    }

    pub fn working_total(&self) -> f64 {
        self.runs.iter().map(|r| r.working_m).sum()
    }

    /// CSV export: one row per run plus a summary row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "run_index,working_m,nonworking_m,return_m,resume_m,cumulative_m\n",
        );
        for r in &self.runs {
            let _ = writeln!(
                out,
                "{},{:.3},{:.3},{:.3},{:.3},{:.3}",
                r.run, r.working_m, r.nonworking_m, r.return_m, r.resume_m, r.cumulative_m
            );
        }
        let _ = writeln!(
            out,
            "total,rho={},D={:.3},D_excess={:.3}",
            self.rho(),
            self.total(),
            self.excess()
        );
        out
    }
}

/// Shortest admissible route from the vehicle position to the depot.
pub fn plan_return(
    g: &TransitionGraph,
    pos: NetPos,
    heading: Heading,
) -> Result<RoutePath, GraphError> {
    g.shortest_path_directed(pos, Some(heading), g.entrance_pos(), None)
}

/// Shortest admissible route from the depot to the interruption point that
/// arrives with the stored heading, so work continues in direction.
pub fn plan_resume(
    g: &TransitionGraph,
    pos: NetPos,
    heading: Heading,
) -> Result<RoutePath, GraphError> {
    g.shortest_path_directed(g.entrance_pos(), None, pos, Some(heading))
}

// ---------------------------------------------------------------------------
// Fill-level rate estimation
// ---------------------------------------------------------------------------

/// Scalar two-state recursive filter for the fill level and its emptying
/// rate under the linear model `f(k+1) = f(k) - rate * step`.
///
/// With unit gains the filter is deadbeat: a noiseless constant-rate stream
/// identifies the rate exactly after two updates.
#[derive(Clone, Copy, Debug)]
pub struct RatePredictor {
    pub fill_est: f64,
    /// Estimated emptying rate, fill fraction per unit step.
    pub rate_est: f64,
    /// Innovation gain on the fill state.
    pub gain_fill: f64,
    /// Innovation gain on the rate state.
    pub gain_rate: f64,
    initialized: bool,
}

impl Default for RatePredictor {
    fn default() -> Self {
        RatePredictor {
            fill_est: 1.0,
            rate_est: 0.0,
            gain_fill: 1.0,
            gain_rate: 1.0,
            initialized: false,
        }
    }
}

impl RatePredictor {
    pub fn update(&mut self, measured: f64, step: f64) {
        let z = measured.clamp(0.0, 1.0);
        if !self.initialized || step <= 0.0 {
            self.fill_est = z;
            self.initialized = true;
            return;
        }
        let pred = self.fill_est - self.rate_est * step;
        let resid = z - pred;
        self.fill_est = (pred + self.gain_fill * resid).clamp(0.0, 1.0);
        self.rate_est -= self.gain_rate * resid / step;
    }

    /// Steps until the estimated fill reaches zero.
    pub fn steps_to_empty(&self) -> Option<f64> {
        (self.rate_est > 1e-12).then(|| self.fill_est / self.rate_est)
    }
}

/// Recursive estimator update (measurement of the fill fraction after one
/// `step` of elapsed time or worked distance).
pub fn update_predictor(pred: &mut RatePredictor, measured: f64, step: f64) {
    pred.update(measured, step);
}

/// Return-command decision: forced when empty, otherwise only below the
/// threshold and only when the depot is closer now than it will be from the
/// predicted empty point.
pub fn trigger_return(
    g: &TransitionGraph,
    fill: f64,
    threshold: f64,
    here: (NetPos, Heading),
    predicted_empty: Option<(NetPos, Heading)>,
) -> bool {
    if fill <= 1e-12 {
        return true;
    }
    if fill >= threshold {
        return false;
    }
    let Some(pe) = predicted_empty else {
        // Plan ends before the tank does: no return needed.
        return false;
    };
    let d_here = plan_return(g, here.0, here.1)
        .map(|p| p.length)
        .unwrap_or(f64::INFINITY);
    let d_pred = plan_return(g, pe.0, pe.1)
        .map(|p| p.length)
        .unwrap_or(f64::INFINITY);
    d_here < d_pred
}

// ---------------------------------------------------------------------------
// Plan walking
// ---------------------------------------------------------------------------

/// Position and heading within a straight atom after `consumed` metres.
fn atom_pos(atom: &Atom, consumed: f64, fallback: (NetPos, Heading)) -> (NetPos, Heading) {
    match &atom.kind {
        AtomKind::LaneRun { lane, t0, t1 } => {
            let frac = if atom.len > 0.0 {
                consumed / atom.len
            } else {
                0.0
            };
            let t = t0 + (t1 - t0) * frac;
            let h = if t1 > t0 {
                Heading::LaneUp
            } else {
                Heading::LaneDown
            };
            (NetPos::Lane { lane: *lane, t }, h)
        }
        AtomKind::HlRun { from_s, dir, .. } => {
            let s = match dir {
                HlDir::Ccw => from_s + consumed,
                HlDir::Cw => from_s - consumed,
            };
            let h = match dir {
                HlDir::Ccw => Heading::Ccw,
                HlDir::Cw => Heading::Cw,
            };
            (NetPos::Headland { s }, h)
        }
        AtomKind::Turn { .. } => fallback,
    }
}

/// Walk a plan's atoms and find the position after `budget` working metres,
/// together with the heading there. `None` when the plan finishes first.
/// Boundaries inside a turn fillet snap back to the end of the preceding
/// straight run.
pub fn forward_empty_point(
    atoms: &[Atom],
    start_atom: usize,
    offset_in_atom: f64,
    budget: f64,
    start_pos: (NetPos, Heading),
) -> Option<(NetPos, Heading)> {
    let mut budget = budget;
    let mut cur = start_pos;
    for (i, atom) in atoms.iter().enumerate().skip(start_atom) {
        let skip = if i == start_atom { offset_in_atom } else { 0.0 };
        let avail = atom.len - skip;
        if avail <= 0.0 {
            continue;
        }
        if atom.working {
            if budget <= avail + 1e-12 {
                return Some(match atom.kind {
                    AtomKind::Turn { .. } => cur,
                    _ => atom_pos(atom, skip + budget.min(avail), cur),
                });
            }
            budget -= avail;
        }
        cur = atom_pos(atom, atom.len, cur);
    }
    None
}

/// Execute a coverage plan under the tank policy. The graph must carry the
/// plan's traces.
pub fn simulate(
    nf: &NormalizedField,
    plan: &CoveragePlan,
    g: &TransitionGraph,
    tank: &TankState,
    policy: &SimPolicy,
) -> Result<MissionLog, SimError> {
    if !(tank.capacity_working_m > 0.0) {
        return Err(SimError::Stranded(
            "tank capacity must be positive".into(),
        ));
    }
    let atoms = atomize(nf, plan, nf.turning_radius)?;
    let capacity = tank.capacity_working_m;
    let mut budget = capacity * tank.fill.clamp(0.0, 1.0);

    let mut runs: Vec<RunRecord> = Vec::new();
    let mut detours: Vec<(RoutePath, RoutePath)> = Vec::new();
    let mut working_acc = 0.0;
    let mut nonworking_acc = 0.0;
    let mut pending_resume = 0.0;
    let mut cumulative = 0.0;
    let mut run_had_progress = false;

    let mut cur: (NetPos, Heading) = (
        NetPos::Headland { s: plan.start_s },
        Heading::Ccw,
    );
    let mut predictor = RatePredictor::default();
    let mut walked_since_update = 0.0;

    let mut i = 0usize;
    let mut offset = 0.0f64;
    let max_runs = 100_000usize;

    while i < atoms.len() {
        let atom = &atoms[i];
        let avail = atom.len - offset;
        if avail <= 1e-12 {
            cur = atom_pos(atom, atom.len, cur);
            i += 1;
            offset = 0.0;
            continue;
        }

        // Predictive evaluation happens at piece boundaries.
        let mut trigger_now = false;
        let mut trigger_after = avail; // metres of this atom to take first
        if atom.working {
            match policy.mode {
                TriggerMode::ExactCapacity => {
                    if budget <= 1e-12 {
                        trigger_now = true;
                    } else if budget < avail - 1e-12 {
                        if matches!(atom.kind, AtomKind::Turn { .. }) {
                            // Turns are indivisible: stop before the arc.
                            trigger_now = true;
                        } else {
                            trigger_after = budget;
                        }
                    }
                }
                TriggerMode::Predictive => {
                    let fill = budget / capacity;
                    predictor.update(fill, walked_since_update.max(1e-9));
                    walked_since_update = 0.0;
                    let predicted = predictor.steps_to_empty().and_then(|m| {
                        forward_empty_point(&atoms, i, offset, m, cur)
                    });
                    if trigger_return(g, fill, policy.f_threshold, cur, predicted) {
                        trigger_now = true;
                    } else if budget <= 1e-12 {
                        trigger_now = true;
                    } else if budget < avail - 1e-12 {
                        if matches!(atom.kind, AtomKind::Turn { .. }) {
                            trigger_now = true;
                        } else {
                            trigger_after = budget;
                        }
                    }
                }
            }
        }

        if atom.working && !trigger_now && trigger_after < avail - 1e-12 {
            // Work up to exhaustion inside this atom, then return.
            let here = atom_pos(atom, offset + trigger_after, cur);
            working_acc += trigger_after;
            budget -= trigger_after;
            offset += trigger_after;
            cumulative += trigger_after;
            run_had_progress = true;
            take_detour(
                g,
                here,
                capacity,
                &mut budget,
                &mut runs,
                &mut detours,
                &mut working_acc,
                &mut nonworking_acc,
                &mut pending_resume,
                &mut cumulative,
                &mut run_had_progress,
            )?;
            cur = here;
            continue;
        }
        if trigger_now {
            if !run_had_progress && !runs.is_empty() {
                return Err(SimError::Stranded(format!(
                    "no working progress possible with capacity {capacity} m"
                )));
            }
            take_detour(
                g,
                cur,
                capacity,
                &mut budget,
                &mut runs,
                &mut detours,
                &mut working_acc,
                &mut nonworking_acc,
                &mut pending_resume,
                &mut cumulative,
                &mut run_had_progress,
            )?;
            if runs.len() >= max_runs {
                return Err(SimError::Stranded("run limit exceeded".into()));
            }
            continue;
        }

        // Take the rest of the atom.
        if atom.working {
            working_acc += avail;
            budget -= avail;
            run_had_progress = true;
        } else {
            nonworking_acc += avail;
        }
        cumulative += avail;
        walked_since_update += avail;
        cur = atom_pos(atom, atom.len, cur);
        i += 1;
        offset = 0.0;
    }

    // Close the final run.
    runs.push(RunRecord {
        run: runs.len() + 1,
        working_m: working_acc,
        nonworking_m: nonworking_acc,
        return_m: 0.0,
        resume_m: pending_resume,
        cumulative_m: cumulative,
    });

    Ok(MissionLog {
        runs,
        plan_length: plan.length,
        plan_working_length: plan.working_length,
        detours,
    })
}

#[allow(clippy::too_many_arguments)]
fn take_detour(
    g: &TransitionGraph,
    here: (NetPos, Heading),
    capacity: f64,
    budget: &mut f64,
    runs: &mut Vec<RunRecord>,
    detours: &mut Vec<(RoutePath, RoutePath)>,
    working_acc: &mut f64,
    nonworking_acc: &mut f64,
    pending_resume: &mut f64,
    cumulative: &mut f64,
    run_had_progress: &mut bool,
) -> Result<(), SimError> {
    let ret = plan_return(g, here.0, here.1)?;
    let res = plan_resume(g, here.0, here.1)?;
    *cumulative += ret.length;
    runs.push(RunRecord {
        run: runs.len() + 1,
        working_m: *working_acc,
        nonworking_m: *nonworking_acc,
        return_m: ret.length,
        resume_m: *pending_resume,
        cumulative_m: *cumulative,
    });
    *cumulative += res.length;
    *pending_resume = res.length;
    detours.push((ret, res));
    *working_acc = 0.0;
    *nonworking_acc = 0.0;
    *budget = capacity;
    *run_had_progress = false;
    Ok(())
}
