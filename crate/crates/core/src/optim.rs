//! Full-batch limited-memory quasi-Newton descent with a backtracking
//! (Armijo) line search. Every accepted step strictly decreases the
//! objective.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_core::dot;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSearchParams {
    pub initial_step: f64,
    /// Step shrink factor in (0, 1).
    pub backtrack: f64,
    /// Sufficient-decrease constant in (0, 1).
    pub sufficient_decrease: f64,
    pub max_backtracks: usize,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        LineSearchParams {
            initial_step: 1.0,
            backtrack: 0.5,
            sufficient_decrease: 1e-4,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    ObjectiveTolerance,
    MaxIterations,
    /// No step along the steepest-descent direction decreased the objective.
    LineSearchStalled,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub reason: StopReason,
    /// Objective after every accepted step, starting with the initial point.
    pub trace: Vec<f64>,
}

pub struct Lbfgs {
    pub memory: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub objective_tol: f64,
    pub line_search: LineSearchParams,
}

impl Lbfgs {
    pub fn minimize<F>(&self, x0: Vec<f64>, mut f: F) -> Result<Minimum>
    where
        F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    {
        let mut evaluations = 1;
        let mut x = x0;
        let (mut fx, mut g) = f(&x)?;
        if !fx.is_finite() {
            return Err(Error::NonFiniteObjective { iteration: 0 });
        }
        let mut trace = vec![fx];
        let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(self.memory);
        let ls = self.line_search;

        let mut iteration = 0;
        let reason = loop {
            if norm_inf(&g) <= self.grad_tol {
                break StopReason::GradientTolerance;
            }
            if iteration >= self.max_iters {
                break StopReason::MaxIterations;
            }
            iteration += 1;

            let mut dir = two_loop(&g, &pairs);
            let mut slope = dot(&g, &dir);
            let mut step = ls.initial_step;
            if pairs.is_empty() || slope >= 0.0 {
                pairs.clear();
                dir = g.iter().map(|v| -v).collect();
                slope = dot(&g, &dir);
                step = ls.initial_step / norm2(&g).max(1.0);
            }

            let mut accepted = None;
            loop {
                for _ in 0..ls.max_backtracks {
                    let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
                    let (ft, gt) = f(&trial)?;
                    evaluations += 1;
                    if ft.is_finite() && ft <= fx + ls.sufficient_decrease * step * slope && ft < fx {
                        accepted = Some((trial, ft, gt));
                        break;
                    }
                    step *= ls.backtrack;
                }
                if accepted.is_some() || pairs.is_empty() {
                    break;
                }
                // quasi-Newton direction failed; retry once along -g
                pairs.clear();
                dir = g.iter().map(|v| -v).collect();
                slope = dot(&g, &dir);
                step = ls.initial_step / norm2(&g).max(1.0);
            }
            let Some((x_new, f_new, g_new)) = accepted else {
                break StopReason::LineSearchStalled;
            };

            let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-12 * norm2(&s) * norm2(&y) && sy > 0.0 {
                if pairs.len() == self.memory {
                    pairs.pop_front();
                }
                pairs.push_back((s, y, 1.0 / sy));
            }

            let decrease = fx - f_new;
            x = x_new;
            fx = f_new;
            g = g_new;
            trace.push(fx);
            if decrease <= self.objective_tol * fx.abs().max(1.0) {
                break StopReason::ObjectiveTolerance;
            }
        };

        Ok(Minimum {
            x,
            value: fx,
            gradient: g,
            iterations: iteration,
            evaluations,
            reason,
            trace,
        })
    }
}

fn two_loop(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

pub(crate) fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solver() -> Lbfgs {
        Lbfgs {
            memory: 8,
            max_iters: 500,
            grad_tol: 1e-10,
            objective_tol: 0.0,
            line_search: LineSearchParams::default(),
        }
    }

    #[test]
    fn quadratic() {
        let m = solver()
            .minimize(vec![3.0, -4.0], |x| {
                let f = 0.5 * (x[0] - 1.0).powi(2) + 5.0 * (x[1] + 2.0).powi(2);
                Ok((f, vec![x[0] - 1.0, 10.0 * (x[1] + 2.0)]))
            })
            .unwrap();
        assert_eq!(m.reason, StopReason::GradientTolerance);
        assert!((m.x[0] - 1.0).abs() < 1e-9 && (m.x[1] + 2.0).abs() < 1e-9);
        assert!(m.trace.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn rosenbrock() {
        let m = solver()
            .minimize(vec![-1.2, 1.0], |x| {
                let (a, b) = (x[0], x[1]);
                let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
                let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
                Ok((f, g))
            })
            .unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-6, "{:?}", m);
        assert!(m.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let r = solver().minimize(vec![0.0], |_| Ok((f64::NAN, vec![0.0])));
        assert!(matches!(r, Err(Error::NonFiniteObjective { iteration: 0 })));
    }
}
