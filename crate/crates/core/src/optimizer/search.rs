use std::cmp::Ordering;

use rayon::prelude::*;

use super::{Evaluation, Evaluator, LensParams, OptimizationResult, ParamStatus, Scenario, TraceEntry};
use crate::elements::collimation_design;
use crate::error::{Error, Result};

const GRID_POINTS: usize = 17;
const GRID_LEVELS: usize = 3;
/// Share of the budget the grid stage may use before the simplex takes over.
const GRID_SHARE: f64 = 0.75;
const SIMPLEX_TOLERANCE: f64 = 1e-4;
const SIMPLEX_INITIAL_STEP: f64 = 0.05;
const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

struct Search<'a> {
    evaluator: &'a Evaluator,
    free: Vec<usize>,
    bounds: Vec<(f64, f64)>,
    budget: usize,
    trace: Vec<TraceEntry>,
    best: Option<(Evaluation, f64)>,
}

fn lexicographic(a: &LensParams, b: &LensParams) -> Ordering {
    a.to_array()
        .iter()
        .zip(b.to_array().iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

impl<'a> Search<'a> {
    fn remaining(&self) -> usize {
        self.budget.saturating_sub(self.trace.len())
    }

    fn to_unit(&self, p: &LensParams) -> Vec<f64> {
        let a = p.to_array();
        self.free.iter().zip(&self.bounds).map(|(&i, &(lo, hi))| (a[i] - lo) / (hi - lo)).collect()
    }

    fn from_unit(&self, u: &[f64]) -> LensParams {
        let values: Vec<f64> = u
            .iter()
            .zip(&self.bounds)
            .map(|(&x, &(lo, hi))| lo + x.clamp(0.0, 1.0) * (hi - lo))
            .collect();
        self.evaluator.scenario().assemble(&values)
    }

    fn record(&mut self, e: Evaluation) -> f64 {
        let objective = e.objective(self.evaluator.scenario().convention);
        let better = match &self.best {
            None => true,
            Some((b, v)) => objective > *v || (objective == *v && lexicographic(&e.params, &b.params) == Ordering::Less),
        };
        if e.flag.is_none() && better {
            self.best = Some((e.clone(), objective));
        }
        let best_so_far = self.best.as_ref().map_or(0.0, |b| b.1);
        self.trace.push(TraceEntry { params: e.params, objective, best_so_far });
        objective
    }

    fn evaluate_batch(&mut self, points: Vec<LensParams>) {
        let n = points.len().min(self.remaining());
        let evaluator = self.evaluator;
        let results: Vec<Evaluation> = points[..n].par_iter().map(|p| evaluator.evaluate(p)).collect();
        for e in results {
            self.record(e);
        }
    }

    fn evaluate_one(&mut self, u: &[f64]) -> Option<f64> {
        if self.remaining() == 0 {
            return None;
        }
        let p = self.from_unit(u);
        let e = self.evaluator.evaluate(&p);
        Some(-self.record(e))
    }

    fn seed(&self) -> LensParams {
        let s = self.evaluator.scenario();
        let clamp = |status: ParamStatus, x: f64| match status {
            ParamStatus::Fixed(v) => v,
            ParamStatus::Free { lower, upper } => x.clamp(lower, upper),
        };
        let design_gdd = collimation_design(s.input_sigma, s.target_sigma, 1.0).map(|d| d.gdd).unwrap_or(0.0);
        let gdd = clamp(s.gdd, design_gdd);
        let k = if gdd != 0.0 { 1.0 / gdd.abs() } else { 0.0 };
        let two_pi = 2.0 * std::f64::consts::PI;
        let (frequency, amplitude) = match (s.frequency, s.amplitude) {
            (ParamStatus::Fixed(f), ParamStatus::Fixed(a)) => (f, a),
            (ParamStatus::Fixed(f), a_status) => (f, clamp(a_status, k / (two_pi * f).powi(2))),
            (f_status, ParamStatus::Fixed(a)) => (clamp(f_status, (k / a).sqrt() / two_pi), a),
            (f_status, a_status @ ParamStatus::Free { upper, .. }) => {
                let a = clamp(a_status, upper);
                (clamp(f_status, (k / a).sqrt() / two_pi), a)
            }
        };
        let offset = clamp(s.offset, 0.0);
        LensParams { gdd, frequency, amplitude, offset }
    }

    fn grid_stage(&mut self) {
        let d = self.free.len();
        let allowance = (GRID_SHARE * self.budget as f64) as usize;
        let mut points = GRID_POINTS;
        while points > 3 && points.pow(d as u32) * GRID_LEVELS > allowance {
            points -= 2;
        }
        let mut ranges: Vec<(f64, f64)> = vec![(0.0, 1.0); d];
        for _ in 0..GRID_LEVELS {
            let axes: Vec<Vec<f64>> = ranges
                .iter()
                .map(|&(lo, hi)| (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect())
                .collect();
            let total = points.pow(d as u32);
            let mut batch = Vec::with_capacity(total);
            for flat in 0..total {
                let mut rem = flat;
                let u: Vec<f64> = axes
                    .iter()
                    .map(|axis| {
                        let v = axis[rem % points];
                        rem /= points;
                        v
                    })
                    .collect();
                batch.push(self.from_unit(&u));
            }
            self.evaluate_batch(batch);
            let Some((best, _)) = &self.best else { return };
            let centre = self.to_unit(&best.params);
            ranges = ranges
                .iter()
                .zip(&centre)
                .map(|(&(lo, hi), &c)| {
                    let half = 2.0 * (hi - lo) / (points - 1) as f64;
                    ((c - half).max(0.0), (c + half).min(1.0))
                })
                .collect();
            if self.remaining() == 0 {
                return;
            }
        }
    }

    fn simplex_stage(&mut self) {
        let Some((best, _)) = &self.best else { return };
        let d = self.free.len();
        let x0 = self.to_unit(&best.params);
        let f0 = -self.best.as_ref().map_or(0.0, |b| b.1);
        let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.clone(), f0)];
        for i in 0..d {
            let mut x = x0.clone();
            x[i] = if x[i] + SIMPLEX_INITIAL_STEP <= 1.0 { x[i] + SIMPLEX_INITIAL_STEP } else { x[i] - SIMPLEX_INITIAL_STEP };
            let Some(f) = self.evaluate_one(&x) else { return };
            simplex.push((x, f));
        }
        let clamp = |v: Vec<f64>| v.into_iter().map(|x| x.clamp(0.0, 1.0)).collect::<Vec<f64>>();
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let diameter = simplex
                .iter()
                .flat_map(|a| simplex.iter().map(move |b| (a, b)))
                .map(|(a, b)| a.0.iter().zip(&b.0).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
            if diameter < SIMPLEX_TOLERANCE {
                return;
            }
            let worst = simplex[d].clone();
            let centroid: Vec<f64> = (0..d).map(|j| simplex[..d].iter().map(|v| v.0[j]).sum::<f64>() / d as f64).collect();
            let along = |t: f64| clamp(centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect());
            let xr = along(REFLECT);
            let Some(fr) = self.evaluate_one(&xr) else { return };
            if fr < simplex[0].1 {
                let xe = along(REFLECT * EXPAND);
                let Some(fe) = self.evaluate_one(&xe) else { return };
                simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[d - 1].1 {
                simplex[d] = (xr, fr);
                continue;
            }
            let (xc, reference) = if fr < worst.1 { (along(REFLECT * CONTRACT), fr) } else { (along(-CONTRACT), worst.1) };
            let Some(fc) = self.evaluate_one(&xc) else { return };
            if fc < reference {
                simplex[d] = (xc, fc);
                continue;
            }
            let anchor = simplex[0].0.clone();
            for v in simplex.iter_mut().skip(1) {
                let x: Vec<f64> = anchor.iter().zip(&v.0).map(|(a, b)| a + SHRINK * (b - a)).collect();
                let Some(f) = self.evaluate_one(&x) else { return };
                *v = (x, f);
            }
        }
    }
}

/// Grid search over the free parameters followed by Nelder-Mead refinement
/// in bound-normalized coordinates. Deterministic for a given scenario and budget.
pub fn optimize(scenario: &Scenario, budget: usize) -> Result<OptimizationResult> {
    if budget < 100 {
        return Err(Error::Config(format!("optimizer budget must be at least 100 evaluations, got {budget}")));
    }
    let evaluator = Evaluator::new(scenario)?;
    optimize_with(&evaluator, budget)
}

pub(crate) fn optimize_with(evaluator: &Evaluator, budget: usize) -> Result<OptimizationResult> {
    let scenario = evaluator.scenario();
    let free = scenario.free_indices();
    if free.is_empty() {
        return Err(Error::Config(format!("scenario `{}` has no free parameter", scenario.name)));
    }
    let statuses = scenario.statuses();
    let bounds = free
        .iter()
        .map(|&i| match statuses[i] {
            ParamStatus::Free { lower, upper } => (lower, upper),
            ParamStatus::Fixed(v) => (v, v),
        })
        .collect();
    let mut search = Search { evaluator, free, bounds, budget, trace: Vec::new(), best: None };
    let seed = search.seed();
    let e = evaluator.evaluate(&seed);
    search.record(e);
    search.grid_stage();
    search.simplex_stage();
    let Some((best, _)) = search.best else {
        return Err(Error::NoValidEvaluations);
    };
    Ok(OptimizationResult {
        scenario: scenario.name.clone(),
        convention: scenario.convention,
        best,
        evaluations: search.trace.len(),
        trace: search.trace,
    })
}
