//! The height flow: adaptive integration, vanishing segments and restarts.

mod rk;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{limit_report, ConvergenceMonitor, LimitReport, MonitorVerdict};
use crate::curve::{AdmissibleCurve, CurveError};
use crate::energy::{self, elastic_energy, facet_weight, EnergyError, FlowParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error("segment {0} has non-positive length")]
    ZeroLengthSegment(usize),
    #[error("step size underflow at t = {t} (dt = {dt})")]
    StepUnderflow { t: f64, dt: f64 },
    #[error("segment {segment} with transition number {transition} collapsed at t = {t}")]
    NonzeroCurvatureCollapse { segment: usize, transition: i8, t: f64 },
    #[error("merged curve is not admissible: {0}")]
    NotAdmissibleAfterMerge(String),
    #[error("invalid integrator options: {0}")]
    InvalidOptions(String),
    #[error("step limit of {0} reached")]
    StepLimit(usize),
    #[error("trajectory has too few samples")]
    InsufficientSamples,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// A segment vanishes below this fraction of its length at the start of the epoch.
    pub vanish_fraction: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub initial_step: f64,
    pub max_time: f64,
    pub stationarity_tol: f64,
    /// Record every `sample_stride`-th accepted step.
    pub sample_stride: usize,
    /// Convergence window as a fraction of `max_time`.
    pub window_fraction: f64,
    pub min_window_samples: usize,
    /// Heights beyond this multiple of the curve diameter count as unbounded.
    pub divergence_factor: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            vanish_fraction: 1e-6,
            max_step: 1.0,
            min_step: 1e-14,
            initial_step: 1e-3,
            max_time: 50.0,
            stationarity_tol: 1e-8,
            sample_stride: 1,
            window_fraction: 0.05,
            min_window_samples: 10,
            divergence_factor: 1e3,
            max_steps: 5_000_000,
        }
    }
}

impl IntegratorOptions {
    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |m: &str| Err(FlowError::InvalidOptions(m.to_string()));
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.min_step > 0.0 && self.min_step <= self.max_step) {
            return bad("need 0 < min_step <= max_step");
        }
        if !(self.vanish_fraction > 0.0 && self.vanish_fraction < 1.0) {
            return bad("vanish_fraction must lie in (0, 1)");
        }
        if !(self.max_time >= 0.0 && self.initial_step > 0.0) {
            return bad("max_time must be non-negative and initial_step positive");
        }
        if !(self.stationarity_tol > 0.0 && self.window_fraction > 0.0) {
            return bad("stationarity_tol and window_fraction must be positive");
        }
        if self.sample_stride == 0 {
            return bad("sample_stride must be at least 1");
        }
        Ok(())
    }

    /// Length of the trailing convergence window.
    pub fn window(&self) -> f64 {
        self.window_fraction * self.max_time
    }
}

/// Reference curve plus signed heights at time `t`.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub reference: AdmissibleCurve,
    pub h: Vec<f64>,
    pub t: f64,
    pub epoch: usize,
    /// Energy dissipated since the start of the epoch.
    pub dissipated: f64,
}

impl FlowState {
    pub fn new(curve: AdmissibleCurve) -> Self {
        let n = curve.len();
        Self {
            reference: curve,
            h: vec![0.0; n],
            t: 0.0,
            epoch: 0,
            dissipated: 0.0,
        }
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.reference
            .lengths_from_heights(&self.h)
            .expect("heights match the reference")
    }

    /// Current curve as an explicit polygon.
    pub fn curve(&self) -> Result<AdmissibleCurve, FlowError> {
        Ok(self.reference.reconstruct_with_floor(&self.h, 0.0)?)
    }

    fn with_heights(&self, y: &[f64], dt: f64) -> Self {
        let n = self.h.len();
        Self {
            reference: self.reference.clone(),
            h: y[..n].to_vec(),
            t: self.t + dt,
            epoch: self.epoch,
            dissipated: y[n],
        }
    }

    fn packed(&self) -> Vec<f64> {
        let mut y = self.h.clone();
        y.push(self.dissipated);
        y
    }
}

/// Normal velocities of a curve parallel to `curve` with the given lengths.
fn rates_from_lengths(curve: &AdmissibleCurve, alpha: f64, lengths: &[f64]) -> Result<Vec<f64>, FlowError> {
    for i in curve.bounded() {
        if !(lengths[i] > 0.0) {
            return Err(FlowError::ZeroLengthSegment(i));
        }
    }
    let g = energy::gradient_from_lengths(curve, alpha, lengths)?;
    let a = curve.anisotropy();
    Ok(curve
        .segments()
        .iter()
        .zip(g)
        .map(|(s, gi)| -a.facets()[s.facet].support * gi)
        .collect())
}

/// Time derivative of the heights.
pub fn rhs(state: &FlowState, p: &FlowParams) -> Result<Vec<f64>, FlowError> {
    let lengths = state.reference.lengths_from_heights(&state.h)?;
    rates_from_lengths(&state.reference, p.alpha, &lengths)
}

/// Rate of energy loss: sum of squared rates weighted by length over support.
pub fn dissipation_rate(curve: &AdmissibleCurve, lengths: &[f64], rates: &[f64]) -> f64 {
    let a = curve.anisotropy();
    curve
        .bounded()
        .map(|i| {
            let support = a.facets()[curve.segments()[i].facet].support;
            rates[i] * rates[i] * lengths[i] / support
        })
        .sum()
}

/// Heights extended by the dissipated energy.
fn packed_rhs(reference: &AdmissibleCurve, alpha: f64, y: &[f64]) -> Result<Vec<f64>, FlowError> {
    let n = reference.len();
    let lengths = reference.lengths_from_heights(&y[..n])?;
    let mut r = rates_from_lengths(reference, alpha, &lengths)?;
    let d = dissipation_rate(reference, &lengths, &r);
    r.push(d);
    Ok(r)
}

/// Adaptive stepper carrying the current step size.
#[derive(Debug, Clone)]
pub struct Integrator {
    params: FlowParams,
    opts: IntegratorOptions,
    dt: f64,
}

impl Integrator {
    pub fn new(params: FlowParams, opts: IntegratorOptions) -> Self {
        Self {
            params,
            dt: opts.initial_step.min(opts.max_step),
            opts,
        }
    }

    pub fn step_size(&self) -> f64 {
        self.dt
    }

    pub fn reset_step(&mut self) {
        self.dt = self.opts.initial_step.min(self.opts.max_step);
    }

    /// One trial step of size `dt` without error control.
    pub fn advance(&self, state: &FlowState, dt: f64) -> Result<(FlowState, f64), FlowError> {
        let (next, trial_error, _) = self.trial(state, dt)?;
        Ok((next, trial_error))
    }

    fn trial(&self, state: &FlowState, dt: f64) -> Result<(FlowState, f64, f64), FlowError> {
        let f = |y: &[f64]| packed_rhs(&state.reference, self.params.alpha, y);
        let trial = rk::trial_step(&f, &state.packed(), dt, self.opts.rel_tol, self.opts.abs_tol)?;
        Ok((state.with_heights(&trial.y, dt), trial.error, trial.stiffness))
    }

    /// Takes one accepted step, never passing `max_time`; returns the new state and error estimate.
    pub fn step(&mut self, state: &FlowState) -> Result<(FlowState, f64), FlowError> {
        self.step_until(state, self.opts.max_time)
    }

    /// Takes one accepted step that does not pass `t_limit`.
    pub fn step_until(&mut self, state: &FlowState, t_limit: f64) -> Result<(FlowState, f64), FlowError> {
        let remaining = t_limit - state.t;
        if remaining <= 0.0 {
            return Ok((state.clone(), 0.0));
        }
        loop {
            let capped = self.dt.min(self.opts.max_step) >= remaining;
            let dt = if capped {
                remaining
            } else {
                self.dt.min(self.opts.max_step)
            };
            if dt < self.opts.min_step && !capped {
                return Err(FlowError::StepUnderflow { t: state.t, dt });
            }
            match self.trial(state, dt) {
                Ok((next, err, stiffness)) if err <= 1.0 => {
                    if !capped || dt >= self.dt {
                        self.dt = dt * rk::step_factor(err);
                    }
                    // near equilibria the error test alone lets steps sit on the stability boundary
                    if stiffness > 0.0 {
                        self.dt = self.dt.min(rk::STABLE_STEP / stiffness);
                    }
                    return Ok((next, err));
                }
                Ok((_, err, _)) => self.dt = dt * rk::step_factor(err),
                Err(FlowError::ZeroLengthSegment(_)) | Err(FlowError::Energy(EnergyError::ZeroLengthSegment(_))) => {
                    self.dt = dt * 0.25
                }
                Err(e) => return Err(e),
            }
            if capped && self.dt >= remaining {
                // a capped step that failed must shrink below the remaining time
                self.dt = remaining * 0.5;
            }
        }
    }
}

/// Length below which each segment counts as vanished during the epoch of `reference`.
pub fn vanish_thresholds(reference: &AdmissibleCurve, opts: &IntegratorOptions, abs_floor: f64) -> Vec<f64> {
    (0..reference.len())
        .map(|i| {
            if reference.is_bounded(i) {
                (opts.vanish_fraction * reference.segments()[i].length).max(abs_floor)
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect()
}

/// Segments shorter than their threshold; all of them must have zero transition number.
pub fn detect_vanishing(state: &FlowState, thresholds: &[f64]) -> Result<Vec<usize>, FlowError> {
    let lengths = state.lengths();
    let mut out = Vec::new();
    for i in state.reference.bounded() {
        if lengths[i] < thresholds[i] {
            let c = state.reference.segments()[i].transition;
            if c != 0 {
                return Err(FlowError::NonzeroCurvatureCollapse {
                    segment: i,
                    transition: c,
                    t: state.t,
                });
            }
            out.push(i);
        }
    }
    Ok(out)
}

fn threshold_margin(state: &FlowState, thresholds: &[f64]) -> f64 {
    let lengths = state.lengths();
    state
        .reference
        .bounded()
        .map(|i| lengths[i] - thresholds[i])
        .fold(f64::INFINITY, f64::min)
}

/// Bisects the step from `state` of size `dt` down to the first crossing of a threshold.
fn locate_event(
    integ: &Integrator,
    state: &FlowState,
    crossed: FlowState,
    thresholds: &[f64],
    tol: f64,
) -> Result<FlowState, FlowError> {
    let (mut lo, mut hi) = (0.0, crossed.t - state.t);
    let mut best = crossed;
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match integ.advance(state, mid) {
            Ok((s, _)) if threshold_margin(&s, thresholds) >= 0.0 => lo = mid,
            Ok((s, _)) => {
                hi = mid;
                best = s;
            }
            Err(_) => hi = mid,
        }
    }
    if best.t - state.t > hi {
        // the best crossing was a failed trial; take the closest successful one
        best = integ.advance(state, hi)?.0;
    }
    Ok(best)
}

/// Deletes vanished segments, merges the neighbours they separated, and starts a new epoch.
///
/// Returns the new state and, for every old segment, its index in the new curve.
pub fn restart(
    state: &FlowState,
    vanished: &[usize],
    p: &FlowParams,
) -> Result<(FlowState, Vec<Option<usize>>), FlowError> {
    let n = state.reference.len();
    if vanished.is_empty() {
        return Ok((state.clone(), (0..n).map(Some).collect()));
    }
    for &i in vanished {
        let c = state.reference.segments()[i].transition;
        if c != 0 {
            return Err(FlowError::NonzeroCurvatureCollapse {
                segment: i,
                transition: c,
                t: state.t,
            });
        }
    }
    let curve = state.curve()?;
    let segs = curve.segments();
    let closed = curve.is_closed();
    let kept: Vec<usize> = (0..n).filter(|i| !vanished.contains(i)).collect();

    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &i in &kept {
        match groups.last_mut() {
            Some(g) if segs[*g.last().unwrap()].facet == segs[i].facet => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    if closed && groups.len() > 1 && segs[groups[0][0]].facet == segs[*groups.last().unwrap().last().unwrap()].facet {
        let mut tail = groups.pop().unwrap();
        tail.extend(groups[0].iter());
        groups[0] = tail;
    }
    if closed && groups.len() < 3 || !closed && groups.len() < 2 {
        return Err(FlowError::NotAdmissibleAfterMerge(format!(
            "only {} segments remain",
            groups.len()
        )));
    }

    let facets: Vec<usize> = groups.iter().map(|g| segs[g[0]].facet).collect();
    let candidates: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            if let Some(&h) = g.iter().find(|&&i| !curve.is_bounded(i)) {
                return vec![segs[h].offset];
            }
            let mut c: Vec<f64> = g.iter().map(|&i| segs[i].offset).collect();
            if g.len() > 1 {
                let w: f64 = g.iter().map(|&i| segs[i].length).sum();
                c.insert(0, g.iter().map(|&i| segs[i].offset * segs[i].length).sum::<f64>() / w);
            }
            c
        })
        .collect();
    let mut offsets: Vec<f64> = candidates.iter().map(|c| c[0]).collect();
    let build = |offsets: &[f64]| -> Option<(AdmissibleCurve, f64)> {
        let c =
            AdmissibleCurve::from_lines(curve.anisotropy().clone(), curve.topology(), &facets, offsets, 0.0).ok()?;
        let e = elastic_energy(&c, p).ok()?;
        Some((c, e))
    };
    // greedily pick, per merged group, the line position with the least energy
    for (k, cands) in candidates.iter().enumerate() {
        if cands.len() < 2 {
            continue;
        }
        let mut best: Option<(f64, f64)> = None;
        for &off in cands {
            let mut trial = offsets.clone();
            trial[k] = off;
            if let Some((_, e)) = build(&trial) {
                if best.is_none_or(|(_, be)| e < be) {
                    best = Some((off, e));
                }
            }
        }
        if let Some((off, _)) = best {
            offsets[k] = off;
        }
    }
    let merged = AdmissibleCurve::from_lines(curve.anisotropy().clone(), curve.topology(), &facets, &offsets, 0.0)
        .map_err(|e| FlowError::NotAdmissibleAfterMerge(e.to_string()))?;

    let mut map = vec![None; n];
    for (k, g) in groups.iter().enumerate() {
        for &i in g {
            map[i] = Some(k);
        }
    }
    let mut next = FlowState::new(merged);
    next.t = state.t;
    next.epoch = state.epoch + 1;
    Ok((next, map))
}

/// A priori bounds: heights below `delta1`, rates below `delta2`, valid up to `t_guarantee`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AprioriBounds {
    pub delta1: f64,
    pub delta2: f64,
    pub t_guarantee: f64,
}

pub fn apriori_bounds(curve: &AdmissibleCurve, alpha: f64) -> AprioriBounds {
    let n = curve.len();
    let a = curve.anisotropy();
    let segs = curve.segments();
    let mut delta1 = f64::INFINITY;
    let mut delta2: f64 = 0.0;
    let bend = |j: usize| -> f64 {
        if segs[j].transition == 0 {
            0.0
        } else {
            facet_weight(a, segs[j].facet) / segs[j].length.powi(2)
        }
    };
    for i in curve.bounded() {
        let (prev, next) = ((i + n - 1) % n, (i + 1) % n);
        let (t0, t1) = (curve.theta(i), curve.theta(i + 1));
        let l = segs[i].length;
        let cot_sum = (1.0 / t0.tan() + 1.0 / t1.tan()).abs();
        let denom = 1.0 / t0.sin().abs() + cot_sum + 1.0 / t1.sin().abs();
        delta1 = delta1.min(0.5 * l / denom);
        let f = &a.facets()[segs[i].facet];
        let inner = 4.0 * bend(prev) / t0.sin().abs() + 4.0 * bend(i) * cot_sum + 4.0 * bend(next) / t1.sin().abs();
        delta2 = delta2.max(f.support * (2.0 * f.length / l + 2.0 * alpha / l * inner));
    }
    AprioriBounds {
        delta1,
        delta2,
        t_guarantee: delta1 / delta2,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub epoch: usize,
    pub h: Vec<f64>,
    /// Segment lengths; infinite for half-lines.
    pub lengths: Vec<f64>,
    /// Windowed energy; `None` when an unbounded curve has left its window.
    pub energy: Option<f64>,
    pub rates: Vec<f64>,
    /// Energy dissipated since the start of the epoch.
    pub dissipated: f64,
}

impl Sample {
    pub fn max_rate(&self) -> f64 {
        self.rates.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestartRecord {
    pub t: f64,
    pub vanished: Vec<usize>,
    /// New index of every old segment, `None` for deleted ones.
    pub merged_map: Vec<Option<usize>>,
    pub segments_before: usize,
    pub segments_after: usize,
    pub index_before: Option<i64>,
    pub index_after: Option<i64>,
    pub energy_before: Option<f64>,
    pub energy_after: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Converged,
    MaxTime,
    TranslatingDivergence,
}

#[derive(Debug, Clone)]
pub struct Epoch {
    pub start_time: f64,
    pub reference: AdmissibleCurve,
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: FlowParams,
    pub samples: Vec<Sample>,
    pub epochs: Vec<Epoch>,
    pub restarts: Vec<RestartRecord>,
    pub status: Status,
    pub limit: Option<LimitReport>,
    pub final_state: FlowState,
    pub steps: usize,
}

impl Trajectory {
    /// Curve at sample `k`.
    pub fn curve_at(&self, k: usize) -> Result<AdmissibleCurve, FlowError> {
        let s = &self.samples[k];
        Ok(self.epochs[s.epoch].reference.reconstruct_with_floor(&s.h, 0.0)?)
    }

    /// Index of the last sample at or before `t`.
    pub fn sample_index_at(&self, t: f64) -> Option<usize> {
        let k = self.samples.partition_point(|s| s.t <= t);
        k.checked_sub(1)
    }

    pub fn initial_energy(&self) -> Option<f64> {
        self.samples.first().and_then(|s| s.energy)
    }
}

/// Energy of the parallel curve at heights `h`; `None` outside the window.
fn energy_at(reference: &AdmissibleCurve, p: &FlowParams, h: &[f64], lengths: &[f64]) -> Option<f64> {
    if reference.is_closed() {
        return Some(energy::energy_from_lengths(reference, p.alpha, lengths, None));
    }
    let curve = reference.reconstruct_with_floor(h, 0.0).ok()?;
    elastic_energy(&curve, p).ok()
}

fn make_sample(state: &FlowState, p: &FlowParams) -> Result<Sample, FlowError> {
    let lengths = state.lengths();
    let rates = rates_from_lengths(&state.reference, p.alpha, &lengths)?;
    Ok(Sample {
        t: state.t,
        epoch: state.epoch,
        energy: energy_at(&state.reference, p, &state.h, &lengths),
        h: state.h.clone(),
        lengths,
        rates,
        dissipated: state.dissipated,
    })
}

/// Runs the flow until `max_time`, convergence, or detected translation.
pub fn evolve(curve: &AdmissibleCurve, p: &FlowParams, opts: &IntegratorOptions) -> Result<Trajectory, FlowError> {
    opts.validate()?;
    if !curve.is_closed() {
        energy::window_clips(curve, p)?;
    }
    let abs_floor = 1e-10 * curve.total_length();
    let mut state = FlowState::new(curve.clone());
    let mut integ = Integrator::new(*p, *opts);
    let thresholds = vanish_thresholds(curve, opts, abs_floor);
    let first = make_sample(&state, p)?;
    let mut monitor = ConvergenceMonitor::new(opts, curve.diameter().max(curve.total_length()));
    let mut traj = Trajectory {
        params: *p,
        epochs: vec![Epoch {
            start_time: 0.0,
            reference: curve.clone(),
            thresholds,
        }],
        samples: vec![],
        restarts: vec![],
        status: Status::Running,
        limit: None,
        final_state: state.clone(),
        steps: 0,
    };
    let mut verdict = monitor.observe(&first);
    traj.samples.push(first);
    let mut since_sample = 0usize;

    while verdict == MonitorVerdict::Continue {
        if state.t >= opts.max_time {
            traj.status = Status::MaxTime;
            break;
        }
        if traj.steps >= opts.max_steps {
            return Err(FlowError::StepLimit(opts.max_steps));
        }
        let (next, _) = integ.step(&state)?;
        traj.steps += 1;
        let thresholds = &traj.epochs.last().unwrap().thresholds;
        if threshold_margin(&next, thresholds) < 0.0 {
            let event = locate_event(&integ, &state, next, thresholds, opts.abs_tol)?;
            let vanished = detect_vanishing(&event, thresholds)?;
            let before = event.curve()?;
            let (restarted, map) = restart(&event, &vanished, p)?;
            let after = restarted.reference.clone();
            let after = &after;
            traj.restarts.push(RestartRecord {
                t: event.t,
                vanished,
                merged_map: map,
                segments_before: before.len(),
                segments_after: after.len(),
                index_before: before.curve_index().ok(),
                index_after: after.curve_index().ok(),
                energy_before: elastic_energy(&before, p).ok(),
                energy_after: elastic_energy(after, p).ok(),
            });
            traj.epochs.push(Epoch {
                start_time: event.t,
                reference: after.clone(),
                thresholds: vanish_thresholds(after, opts, abs_floor),
            });
            state = restarted;
            integ.reset_step();
            monitor.reset(after.diameter().max(after.total_length()));
            let s = make_sample(&state, p)?;
            verdict = monitor.observe(&s);
            traj.samples.push(s);
            since_sample = 0;
            continue;
        }
        state = next;
        since_sample += 1;
        let s = make_sample(&state, p)?;
        verdict = monitor.observe(&s);
        if since_sample >= opts.sample_stride || verdict != MonitorVerdict::Continue || state.t >= opts.max_time {
            traj.samples.push(s);
            since_sample = 0;
        }
    }
    match verdict {
        MonitorVerdict::Converged => {
            traj.status = Status::Converged;
            let thresholds = &traj.epochs.last().unwrap().thresholds;
            traj.limit = Some(limit_report(&state, p, opts, thresholds)?);
        }
        MonitorVerdict::Diverging => traj.status = Status::TranslatingDivergence,
        MonitorVerdict::Continue => {}
    }
    traj.final_state = state;
    Ok(traj)
}

/// Largest drift of energy plus dissipated energy within any epoch.
pub fn dissipation_residual(traj: &Trajectory) -> Result<f64, FlowError> {
    let mut worst: Option<f64> = None;
    for epoch in 0..traj.epochs.len() {
        let vals: Vec<f64> = traj
            .samples
            .iter()
            .filter(|s| s.epoch == epoch)
            .filter_map(|s| s.energy.map(|e| e + s.dissipated))
            .collect();
        if vals.len() < 2 {
            continue;
        }
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        worst = Some(worst.unwrap_or(0.0).max(hi - lo));
    }
    worst.ok_or(FlowError::InsufficientSamples)
}

#[cfg(test)]
mod tests;
