//! Derivative-free minimisation by linear approximation over a simplex.
//!
//! This is Powell's COBYLA iteration specialised to problems without
//! constraints: a linear model of the objective is interpolated on `n + 1`
//! simplex vertices, a trust-region step of radius `rho` follows the model's
//! steepest descent, and geometry-improving steps keep the simplex well
//! conditioned. `rho` halves whenever neither kind of step makes progress,
//! until it reaches the final tolerance or the evaluation budget runs out.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Evaluation budget and trust-region radii.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerBudget {
    pub max_evals: usize,
    pub initial_step: f64,
    pub final_tolerance: f64,
}

impl OptimizerBudget {
    pub fn new(max_evals: usize) -> Self {
        OptimizerBudget { max_evals, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_evals == 0 {
            return Err(Error::InvalidArgument("optimizer budget needs at least one evaluation".into()));
        }
        if !(self.final_tolerance > 0.0 && self.initial_step > self.final_tolerance) {
            return Err(Error::InvalidArgument(format!(
                "need initial_step > final_tolerance > 0, got {} and {}",
                self.initial_step, self.final_tolerance
            )));
        }
        Ok(())
    }
}

impl Default for OptimizerBudget {
    fn default() -> Self {
        OptimizerBudget { max_evals: 400, initial_step: 1.0, final_tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub theta: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

// Simplex acceptability and step-size constants of the original method.
const ALPHA: f64 = 0.25;
const BETA: f64 = 2.1;
const GAMMA: f64 = 0.5;
const DELTA: f64 = 1.1;

/// Wraps the objective so that every call is counted and the best point seen
/// is remembered, whatever the simplex bookkeeping does.
struct Tracked<F> {
    f: F,
    evals: usize,
    best_x: Vec<f64>,
    best_f: f64,
}

impl<F: FnMut(&[f64]) -> f64> Tracked<F> {
    fn eval(&mut self, x: &[f64]) -> Result<f64> {
        let v = (self.f)(x);
        self.evals += 1;
        if !v.is_finite() {
            return Err(Error::NonFiniteObjective { value: v, eval: self.evals });
        }
        if v < self.best_f {
            self.best_f = v;
            self.best_x.clear();
            self.best_x.extend_from_slice(x);
        }
        Ok(v)
    }
}

/// Minimises `objective` from `theta0` within `budget`. Deterministic, never
/// calls the objective more than `budget.max_evals` times, and returns the
/// best point it evaluated.
pub fn minimize<F>(objective: F, theta0: &[f64], budget: &OptimizerBudget) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> f64,
{
    budget.validate()?;
    if let Some(bad) = theta0.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("starting point contains {bad}")));
    }
    let mut t = Tracked { f: objective, evals: 0, best_x: theta0.to_vec(), best_f: f64::INFINITY };
    let f0 = t.eval(theta0)?;
    if !theta0.is_empty() {
        Cobyla::new(theta0, f0, budget).run(&mut t)?;
    }
    Ok(Minimum { theta: t.best_x, value: t.best_f, evals: t.evals })
}

struct Cobyla {
    n: usize,
    rho: f64,
    rho_end: f64,
    max_evals: usize,
    /// Best vertex.
    x0: Vec<f64>,
    f0: f64,
    /// Column j (stored as `sim[j]`) is vertex j minus the best vertex.
    sim: Vec<Vec<f64>>,
    /// Inverse of the matrix whose columns are `sim`; `simi[j]` is row j.
    simi: Vec<Vec<f64>>,
    fvals: Vec<f64>,
}

impl Cobyla {
    fn new(x: &[f64], f: f64, budget: &OptimizerBudget) -> Self {
        let n = x.len();
        let rho = budget.initial_step;
        let unit = |j: usize, v: f64| (0..n).map(|i| if i == j { v } else { 0.0 }).collect::<Vec<_>>();
        Cobyla {
            n,
            rho,
            rho_end: budget.final_tolerance,
            max_evals: budget.max_evals,
            x0: x.to_vec(),
            f0: f,
            sim: (0..n).map(|j| unit(j, rho)).collect(),
            simi: (0..n).map(|j| unit(j, 1.0 / rho)).collect(),
            fvals: vec![f; n],
        }
    }

    fn run<F: FnMut(&[f64]) -> f64>(mut self, t: &mut Tracked<F>) -> Result<()> {
        let n = self.n;
        // Initial simplex: step rho along each coordinate, moving the base
        // whenever the new point is better.
        for j in 0..n {
            if t.evals >= self.max_evals {
                return Ok(());
            }
            let mut x = self.x0.clone();
            x[j] += self.rho;
            let f = t.eval(&x)?;
            if f < self.f0 {
                self.x0[j] = x[j];
                self.fvals[j] = self.f0;
                self.f0 = f;
                // Vertex j now lies at -rho along axis j; columns before j
                // pick up the same offset in row j.
                for k in 0..=j {
                    self.sim[k][j] = -self.rho;
                }
                for k in 0..=j {
                    let s: f64 = (k..=j).map(|i| self.simi[i][k]).sum();
                    self.simi[j][k] = -s;
                }
            } else {
                self.fvals[j] = f;
            }
        }

        let mut geometry_pending = false;
        loop {
            self.promote_best_vertex();

            let par_sig = ALPHA * self.rho;
            let par_eta = BETA * self.rho;
            let vsig: Vec<f64> = (0..n).map(|j| 1.0 / norm(&self.simi[j])).collect();
            let veta: Vec<f64> = (0..n).map(|j| norm(&self.sim[j])).collect();
            let acceptable = (0..n).all(|j| vsig[j] >= par_sig && veta[j] <= par_eta);

            if std::mem::take(&mut geometry_pending) && !acceptable {
                if t.evals >= self.max_evals {
                    return Ok(());
                }
                self.geometry_step(t, &vsig, &veta, par_sig, par_eta)?;
                continue;
            }

            // Linear model gradient: g_i = Σ_j (f_j − f0) simi[j][i].
            let mut grad = vec![0.0; n];
            for j in 0..n {
                let df = self.fvals[j] - self.f0;
                for (g, s) in grad.iter_mut().zip(&self.simi[j]) {
                    *g += df * s;
                }
            }
            let gnorm = norm(&grad);

            let mut improved = false;
            if gnorm > 0.0 {
                let dx: Vec<f64> = grad.iter().map(|g| -self.rho * g / gnorm).collect();
                let predicted = self.rho * gnorm;
                if t.evals >= self.max_evals {
                    return Ok(());
                }
                let trial: Vec<f64> = self.x0.iter().zip(&dx).map(|(a, b)| a + b).collect();
                let f = t.eval(&trial)?;
                let reduction = self.f0 - f;
                self.absorb_trial(&dx, f, reduction, &vsig, &veta, par_sig);
                improved = reduction > 0.0 && reduction >= 0.1 * predicted;
            }
            if improved {
                continue;
            }
            if !acceptable {
                geometry_pending = true;
                continue;
            }
            if self.rho <= self.rho_end {
                return Ok(());
            }
            self.rho *= 0.5;
            if self.rho <= 1.5 * self.rho_end {
                self.rho = self.rho_end;
            }
        }
    }

    /// Makes the lowest vertex the base of the simplex.
    fn promote_best_vertex(&mut self) {
        let n = self.n;
        let mut best = None;
        let mut fmin = self.f0;
        for j in 0..n {
            if self.fvals[j] < fmin {
                fmin = self.fvals[j];
                best = Some(j);
            }
        }
        let Some(b) = best else { return };
        std::mem::swap(&mut self.fvals[b], &mut self.f0);
        let shift = self.sim[b].clone();
        for (x, s) in self.x0.iter_mut().zip(&shift) {
            *x += s;
        }
        for j in 0..n {
            if j == b {
                for (v, s) in self.sim[b].iter_mut().zip(&shift) {
                    *v = -s;
                }
            } else {
                for (v, s) in self.sim[j].iter_mut().zip(&shift) {
                    *v -= s;
                }
            }
        }
        // Row b of the new inverse is minus the column sums of the old one.
        let new_row: Vec<f64> = (0..n).map(|i| -(0..n).map(|k| self.simi[k][i]).sum::<f64>()).collect();
        self.simi[b] = new_row;
    }

    /// Replaces vertex `j` by `base + dx`, updating the inverse by a rank-one
    /// correction.
    fn replace_vertex(&mut self, j: usize, dx: &[f64], f: f64) {
        self.sim[j].copy_from_slice(dx);
        let pivot = dot(&self.simi[j], dx);
        for v in self.simi[j].iter_mut() {
            *v /= pivot;
        }
        let row_j = self.simi[j].clone();
        for k in 0..self.n {
            if k != j {
                let s = dot(&self.simi[k], dx);
                for (v, r) in self.simi[k].iter_mut().zip(&row_j) {
                    *v -= s * r;
                }
            }
        }
        self.fvals[j] = f;
    }

    /// Decides whether the trial point `base + dx` enters the simplex and
    /// which vertex it displaces.
    fn absorb_trial(&mut self, dx: &[f64], f: f64, reduction: f64, vsig: &[f64], veta: &[f64], par_sig: f64) {
        let n = self.n;
        let mut ratio = if reduction <= 0.0 { 1.0 } else { 0.0 };
        let mut drop = None;
        let mut sigbar = vec![0.0; n];
        for j in 0..n {
            let tmp = dot(&self.simi[j], dx).abs();
            if tmp > ratio {
                drop = Some(j);
                ratio = tmp;
            }
            sigbar[j] = tmp * vsig[j];
        }
        let mut edge_max = DELTA * self.rho;
        let mut far = None;
        for j in 0..n {
            if sigbar[j] >= par_sig || sigbar[j] >= vsig[j] {
                let mut len = veta[j];
                if reduction > 0.0 {
                    len = dx.iter().zip(&self.sim[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                }
                if len > edge_max {
                    far = Some(j);
                    edge_max = len;
                }
            }
        }
        if let Some(j) = far.or(drop) {
            self.replace_vertex(j, dx, f);
        }
    }

    /// Replaces the worst-shaped vertex with a point that restores simplex
    /// acceptability, stepping in whichever direction the model says is
    /// downhill.
    fn geometry_step<F: FnMut(&[f64]) -> f64>(
        &mut self,
        t: &mut Tracked<F>,
        vsig: &[f64],
        veta: &[f64],
        par_sig: f64,
        par_eta: f64,
    ) -> Result<()> {
        let n = self.n;
        let mut drop = None;
        let mut worst = par_eta;
        for j in 0..n {
            if veta[j] > worst {
                drop = Some(j);
                worst = veta[j];
            }
        }
        if drop.is_none() {
            let mut worst = par_sig;
            for j in 0..n {
                if vsig[j] < worst {
                    drop = Some(j);
                    worst = vsig[j];
                }
            }
        }
        let Some(j) = drop else { return Ok(()) };
        let scale = GAMMA * self.rho * vsig[j];
        let mut dx: Vec<f64> = self.simi[j].iter().map(|s| scale * s).collect();
        let mut grad_dot = 0.0;
        for k in 0..n {
            grad_dot += (self.fvals[k] - self.f0) * dot(&self.simi[k], &dx);
        }
        if grad_dot > 0.0 {
            for v in dx.iter_mut() {
                *v = -*v;
            }
        }
        let x: Vec<f64> = self.x0.iter().zip(&dx).map(|(a, b)| a + b).collect();
        let f = t.eval(&x)?;
        self.replace_vertex(j, &dx, f);
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{Circuit, Gate};
    use crate::qsim::{DensityMatrix, C64};
    use crate::vqsd::cost;
    use std::cell::RefCell;

    #[test]
    fn convex_quadratic_converges() {
        let m = minimize(|x| x.iter().map(|v| v * v).sum(), &[1.0, 1.0], &OptimizerBudget::new(400)).unwrap();
        assert!(m.value < 1e-6, "f = {}", m.value);
        assert!(m.evals <= 400);
    }

    #[test]
    fn shifted_quadratic_in_higher_dimension() {
        let target: Vec<f64> = (0..8).map(|i| 0.3 * i as f64 - 1.0).collect();
        let f = |x: &[f64]| x.iter().zip(&target).map(|(a, b)| (a - b).powi(2) * 1.5).sum::<f64>();
        let m = minimize(f, &[0.0; 8], &OptimizerBudget::new(2000)).unwrap();
        assert!(m.value < 1e-8, "f = {}", m.value);
    }

    #[test]
    fn rosenbrock_makes_progress() {
        // Linear models crawl along the curved valley; reference COBYLA ends
        // near 2e-3 after 5000 evaluations from the same start.
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = minimize(f, &[-1.2, 1.0], &OptimizerBudget::new(5000)).unwrap();
        assert!(m.value < 1e-2, "f = {}", m.value);
    }

    #[test]
    fn empty_parameter_vector_costs_one_evaluation() {
        let m = minimize(|_| 0.75, &[], &OptimizerBudget::new(400)).unwrap();
        assert_eq!(m, Minimum { theta: vec![], value: 0.75, evals: 1 });
    }

    #[test]
    fn single_ry_diagonalises_plus_state() {
        let plus = DensityMatrix::from_pure(&[C64::new(1.0, 0.0), C64::new(1.0, 0.0)]).unwrap();
        let c = Circuit::from_gates(1, [Gate::ry(0)]).unwrap();
        let f = |th: &[f64]| cost(&plus, &c.with_params(th).unwrap()).unwrap();
        // Closed form: ρ' has diagonal ((1 ∓ sin θ)/2), so the cost is cos²θ / 2.
        for k in 0..=64 {
            let th = -3.0 + 6.0 * k as f64 / 64.0;
            assert!((f(&[th]) - th.cos().powi(2) / 2.0).abs() < 1e-14);
        }
        let m = minimize(f, &[0.0], &OptimizerBudget::new(400)).unwrap();
        assert!(m.value < 1e-8);
        assert!((m.theta[0].abs() - std::f64::consts::FRAC_PI_2).abs() < 1e-3);
    }

    #[test]
    fn budget_is_respected_and_best_value_reported() {
        let seen = RefCell::new(Vec::new());
        let f = |x: &[f64]| {
            let v = x.iter().enumerate().map(|(i, v)| (v - i as f64).powi(2) + (3.0 * v).sin()).sum::<f64>();
            seen.borrow_mut().push(v);
            v
        };
        for budget in [1, 2, 5, 17, 60] {
            seen.borrow_mut().clear();
            let m = minimize(f, &[0.5; 6], &OptimizerBudget::new(budget)).unwrap();
            let calls = seen.borrow();
            assert_eq!(calls.len(), m.evals);
            assert!(m.evals <= budget);
            let min = calls.iter().copied().fold(f64::INFINITY, f64::min);
            assert_eq!(m.value, min);
            assert!(m.value <= calls[0] + 1e-12);
        }
    }

    #[test]
    fn deterministic() {
        let f = |x: &[f64]| x.iter().map(|v| (v - 0.3).powi(4) + v.cos()).sum::<f64>();
        let a = minimize(f, &[0.1, -0.2, 0.9], &OptimizerBudget::new(300)).unwrap();
        let b = minimize(f, &[0.1, -0.2, 0.9], &OptimizerBudget::new(300)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_finite_objective_aborts() {
        let r = minimize(|x| if x[0] > 0.5 { f64::NAN } else { x[0] * x[0] }, &[0.0], &OptimizerBudget::new(50));
        assert!(matches!(r, Err(Error::NonFiniteObjective { .. })));
    }

    #[test]
    fn invalid_budgets_are_rejected() {
        assert!(minimize(|_| 0.0, &[0.0], &OptimizerBudget::new(0)).is_err());
        let b = OptimizerBudget { max_evals: 10, initial_step: 1e-7, final_tolerance: 1e-6 };
        assert!(minimize(|_| 0.0, &[0.0], &b).is_err());
        assert!(minimize(|_| 0.0, &[f64::NAN], &OptimizerBudget::new(10)).is_err());
    }
}
