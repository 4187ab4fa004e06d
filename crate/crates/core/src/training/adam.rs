use serde::{Deserialize, Serialize};

use crate::model::{Params, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 3e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moments plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<F> {
    pub m: Params<F>,
    pub v: Params<F>,
    pub t: u64,
}

impl<F: Real> AdamState<F> {
    pub fn new(params: &Params<F>) -> AdamState<F> {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step<F: Real>(params: &mut Params<F>, grads: &Params<F>, state: &mut AdamState<F>, cfg: &AdamConfig) {
    state.t += 1;
    let g = grads.tensors();
    let mut m = state.m.tensors_mut();
    let mut v = state.v.tensors_mut();
    for (i, (_, p)) in params.tensors_mut().into_iter().enumerate() {
        adam_update(p, g[i].2, m[i].1, v[i].1, state.t, cfg);
    }
}

/// Adam on a flat slice; `t` is the 1-based step count.
pub fn adam_update<F: Real>(p: &mut [F], g: &[F], m: &mut [F], v: &mut [F], t: u64, cfg: &AdamConfig) {
    let t = t as i32;
    let (b1, b2) = (F::c(cfg.beta1), F::c(cfg.beta2));
    let c1 = F::one() - F::c(cfg.beta1.powi(t));
    let c2 = F::one() - F::c(cfg.beta2.powi(t));
    let lr = F::c(cfg.learning_rate);
    let eps = F::c(cfg.epsilon);
    for k in 0..p.len() {
        let gk = g[k];
        m[k] = b1 * m[k] + (F::one() - b1) * gk;
        v[k] = b2 * v[k] + (F::one() - b2) * gk * gk;
        let mhat = m[k] / c1;
        let vhat = v[k] / c2;
        p[k] -= lr * mhat / (vhat.sqrt() + eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    fn scalar_params(x: f64) -> Params<f64> {
        let cfg = ModelConfig::tiny(42, 1);
        let mut p: Params<f64> = Params::init(&cfg);
        for (_, t) in p.tensors_mut() {
            t.fill(x);
        }
        p
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = scalar_params(0.3);
        let before = p.clone();
        let mut st = AdamState::new(&p);
        st.m = scalar_params(0.5);
        st.v = scalar_params(0.25);
        adam_step(&mut p, &scalar_params(0.0), &mut st, &AdamConfig::default());
        // moments decay, parameters move only through the decayed momentum
        assert!(st.m.tensors()[0].2.iter().all(|&x| (x - 0.45).abs() < 1e-15));
        assert!(st.v.tensors()[0].2.iter().all(|&x| (x - 0.25 * 0.999).abs() < 1e-15));
        let mut p2 = before.clone();
        let mut fresh = AdamState::new(&p2);
        adam_step(&mut p2, &scalar_params(0.0), &mut fresh, &AdamConfig::default());
        assert_eq!(p2, before);
        assert_ne!(p, before);
    }

    #[test]
    fn two_step_hand_computation() {
        let cfg = AdamConfig {
            learning_rate: 0.1,
            ..AdamConfig::default()
        };
        let mut p = scalar_params(1.0);
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &scalar_params(0.5), &mut st, &cfg);
        adam_step(&mut p, &scalar_params(-0.2), &mut st, &cfg);
        // by hand
        let (b1, b2, eps, lr) = (0.9f64, 0.999f64, 1e-8, 0.1);
        let (mut x, mut m, mut v) = (1.0, 0.0, 0.0);
        for (t, g) in [(1, 0.5), (2, -0.2)] {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            x -= lr * mh / (vh.sqrt() + eps);
        }
        assert!(p.tensors().iter().all(|t| t.2.iter().all(|&y| (y - x).abs() < 1e-14)));
    }

    #[test]
    fn constant_gradient_step_tends_to_lr() {
        let cfg = AdamConfig {
            learning_rate: 1e-3,
            ..AdamConfig::default()
        };
        let mut p = scalar_params(0.0);
        let mut st = AdamState::new(&p);
        let g = scalar_params(-3.0);
        let mut prev = 0.0;
        for _ in 0..5000 {
            adam_step(&mut p, &g, &mut st, &cfg);
            let x = p.tensors()[0].2[0];
            let step = x - prev;
            prev = x;
            assert!((step - 1e-3).abs() < 1e-8, "{step}");
        }
    }
}
