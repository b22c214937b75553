//! Optimizers: Adam and RMSprop for network weights, OWL-QN (L-BFGS with
//! an L1 term) and soft-thresholded SGD for CRF weights.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// Parameter element type the adaptive optimizers update in place.
pub trait Param: Copy + Send + Sync + 'static {
    fn widen(self) -> f64;
    fn from_f64(x: f64) -> Self;
}

impl Param for f32 {
    fn widen(self) -> f64 {
        self as f64
    }
    fn from_f64(x: f64) -> Self {
        x as f32
    }
}

impl Param for f64 {
    fn widen(self) -> f64 {
        self
    }
    fn from_f64(x: f64) -> Self {
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerConfig {
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
    Rmsprop { lr: f64, rho: f64, eps: f64 },
}

impl OptimizerConfig {
    pub fn adam() -> Self {
        Self::Adam {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-7,
        }
    }

    pub fn rmsprop() -> Self {
        Self::Rmsprop {
            lr: 1e-3,
            rho: 0.9,
            eps: 1e-7,
        }
    }
}

/// Per-tensor optimizer state.
#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, sizes: &[usize]) -> Self {
        Self {
            config,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    /// Call once per step before updating the tensors.
    pub fn begin_step(&mut self) {
        self.t += 1;
    }

    pub fn update<P: Param>(&mut self, tensor: usize, params: &mut [P], grads: &[P]) {
        let v = &mut self.v[tensor];
        match self.config {
            OptimizerConfig::Adam { lr, beta1, beta2, eps } => {
                let m = &mut self.m[tensor];
                let t = self.t as i32;
                let lr_t = lr * (1.0 - beta2.powi(t)).sqrt() / (1.0 - beta1.powi(t));
                for i in 0..params.len() {
                    let g = grads[i].widen();
                    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                    let p = params[i].widen() - lr_t * m[i] / (v[i].sqrt() + eps);
                    params[i] = P::from_f64(p);
                }
            }
            OptimizerConfig::Rmsprop { lr, rho, eps } => {
                for i in 0..params.len() {
                    let g = grads[i].widen();
                    v[i] = rho * v[i] + (1.0 - rho) * g * g;
                    let p = params[i].widen() - lr * g / (v[i].sqrt() + eps);
                    params[i] = P::from_f64(p);
                }
            }
        }
    }
}

/// Result of one objective evaluation: value and gradient of the smooth
/// part (the L1 term is handled by the optimizer).
pub struct Evaluation {
    pub value: f64,
    pub grad: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OwlqnConfig {
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop when the objective improves by less than this relative amount
    /// over `past` iterations.
    pub delta: f64,
    pub past: usize,
    pub max_linesearch: usize,
}

impl Default for OwlqnConfig {
    fn default() -> Self {
        Self {
            memory: 6,
            max_iterations: 100,
            delta: 1e-5,
            past: 10,
            max_linesearch: 20,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn pseudo_gradient(x: &[f64], g: &[f64], l1: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .zip(l1)
        .map(|((&xi, &gi), &c)| {
            if c == 0.0 {
                gi
            } else if xi > 0.0 {
                gi + c
            } else if xi < 0.0 {
                gi - c
            } else if gi + c < 0.0 {
                gi + c
            } else if gi - c > 0.0 {
                gi - c
            } else {
                0.0
            }
        })
        .collect()
}

fn l1_value(x: &[f64], l1: &[f64]) -> f64 {
    x.iter().zip(l1).map(|(a, c)| c * a.abs()).sum()
}

/// Minimizes `f(x) + Σ l1[i]·|x[i]|`. `f` returns the smooth value and
/// gradient. Returns the full objective after each iteration (index 0 is
/// the starting point). The objective never increases.
pub fn owlqn<F>(x: &mut [f64], l1: &[f64], config: &OwlqnConfig, mut f: F) -> crate::Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> crate::Result<Evaluation>,
{
    let n = x.len();
    let mut ev = f(x)?;
    let mut obj = ev.value + l1_value(x, l1);
    let mut history = vec![obj];
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    for iter in 0..config.max_iterations {
        let pg = pseudo_gradient(x, &ev.grad, l1);
        let pg_norm = dot(&pg, &pg).sqrt();
        if pg_norm == 0.0 {
            break;
        }
        // two-loop recursion
        let mut d: Vec<f64> = pg.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(mem.len());
        for (s, y, rho) in mem.iter().rev() {
            let a = rho * dot(s, &d);
            d.iter_mut().zip(y).for_each(|(di, yi)| *di -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = mem.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|di| *di *= gamma);
        }
        for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            d.iter_mut().zip(s).for_each(|(di, si)| *di += (a - b) * si);
        }
        // keep the direction in the descent orthant of the pseudo-gradient
        for i in 0..n {
            if l1[i] != 0.0 && d[i] * pg[i] >= 0.0 {
                d[i] = 0.0;
            }
        }
        let orthant: Vec<f64> = (0..n)
            .map(|i| if x[i] != 0.0 { x[i].signum() } else { -pg[i].signum() })
            .collect();
        let mut step = if mem.is_empty() { 1.0 / pg_norm } else { 1.0 };
        let x0 = x.to_vec();
        let mut accepted = None;
        for _ in 0..config.max_linesearch {
            let mut xn: Vec<f64> = (0..n).map(|i| x0[i] + step * d[i]).collect();
            for i in 0..n {
                if l1[i] != 0.0 && xn[i] * orthant[i] <= 0.0 {
                    xn[i] = 0.0;
                }
            }
            let evn = f(&xn)?;
            let objn = evn.value + l1_value(&xn, l1);
            let decrease: f64 = (0..n).map(|i| pg[i] * (xn[i] - x0[i])).sum();
            if objn.is_finite() && objn <= obj + 1e-4 * decrease {
                accepted = Some((xn, evn, objn));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, evn, objn)) = accepted else {
            log::debug!("owlqn: line search failed at iteration {iter}");
            break;
        };
        let s: Vec<f64> = (0..n).map(|i| xn[i] - x0[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| evn.grad[i] - ev.grad[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            mem.push_back((s, y, 1.0 / sy));
            if mem.len() > config.memory {
                mem.pop_front();
            }
        }
        x.copy_from_slice(&xn);
        ev = evn;
        obj = objn;
        history.push(obj);
        log::debug!("owlqn iteration {} objective {obj:.6}", iter + 1);
        if history.len() > config.past {
            let old = history[history.len() - 1 - config.past];
            if (old - obj) / obj.abs().max(1.0) < config.delta {
                break;
            }
        }
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut x = vec![3.0f32, -2.0];
        let mut opt = Optimizer::new(
            OptimizerConfig::Adam {
                lr: 0.05,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
            },
            &[2],
        );
        for _ in 0..2000 {
            let g: Vec<f32> = x.iter().map(|v| 2.0 * v).collect();
            opt.begin_step();
            opt.update(0, &mut x, &g);
        }
        assert!(x.iter().all(|v| v.abs() < 1e-2), "{x:?}");
    }

    #[test]
    fn adam_first_step_is_lr_sized() {
        let mut x = vec![1.0f64];
        let mut opt = Optimizer::new(OptimizerConfig::adam(), &[1]);
        opt.begin_step();
        opt.update(0, &mut x, &[123.0]);
        assert!((x[0] - (1.0 - 1e-3)).abs() < 1e-8);
    }

    #[test]
    fn rmsprop_first_step() {
        // v = 0.1 g^2, step = lr g / sqrt(0.1 g^2) = lr / sqrt(0.1)
        let mut x = vec![0.0f64];
        let mut opt = Optimizer::new(OptimizerConfig::rmsprop(), &[1]);
        opt.begin_step();
        opt.update(0, &mut x, &[4.0]);
        assert!((x[0] + 1e-3 / 0.1f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn owlqn_solves_lasso_in_one_dimension() {
        // min (x-3)^2 + 1*|x| -> x = 2.5 ; min (x-0.3)^2 + |x| -> x = 0
        for (c, want) in [(3.0, 2.5), (0.3, 0.0)] {
            let mut x = vec![0.0];
            let hist = owlqn(&mut x, &[1.0], &OwlqnConfig::default(), |x| {
                Ok(Evaluation {
                    value: (x[0] - c) * (x[0] - c),
                    grad: vec![2.0 * (x[0] - c)],
                })
            })
            .unwrap();
            assert!((x[0] - want).abs() < 1e-6, "{x:?}");
            assert!(hist.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
    }

    #[test]
    fn owlqn_rosenbrock_without_l1() {
        let mut x = vec![-1.2, 1.0];
        let cfg = OwlqnConfig {
            max_iterations: 500,
            delta: 0.0,
            ..Default::default()
        };
        let h = owlqn(&mut x, &[0.0, 0.0], &cfg, |x| {
            let (a, b) = (x[0], x[1]);
            Ok(Evaluation {
                value: (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2),
                grad: vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)],
            })
        })
        .unwrap();
        assert!((x[0] - 1.0).abs() < 1e-4 && (x[1] - 1.0).abs() < 1e-4, "{x:?} {}", h.len());
    }
}
