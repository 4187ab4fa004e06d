use rand::RngCore;

use super::{loss_and_grad, ModelConfig, ModelError, Params, TaskSet, Targets};
use crate::tokenizer::TokenSequence;

/// Worst per-tensor disagreement between analytic and central-difference
/// gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientAudit {
    pub tensor: String,
    pub max_rel_error: f64,
    pub max_abs_grad: f64,
}

/// Entries whose gradients are both below this are compared absolutely.
pub const GRAD_FLOOR: f64 = 1e-8;

/// Compares [`loss_and_grad`] with central differences of step `h` for
/// every scalar of every tensor. Intended for small models in `f64`.
pub fn audit_gradients(
    params: &Params<f64>,
    cfg: &ModelConfig,
    batch: &[TokenSequence],
    tasks: TaskSet,
    targets: &Targets<f64>,
    h: f64,
) -> Result<Vec<GradientAudit>, ModelError> {
    let no_rng: Option<&mut dyn RngCore> = None;
    let (_, grads) = loss_and_grad(params, cfg, batch, tasks, targets, no_rng)?;
    let loss = |p: &Params<f64>| -> f64 {
        loss_and_grad(p, cfg, batch, tasks, targets, None)
            .expect("same inputs as the analytic pass")
            .0
            .total
    };
    let analytic: Vec<(String, Vec<f64>)> = grads
        .tensors()
        .into_iter()
        .map(|(n, _, g)| (n, g.to_vec()))
        .collect();
    let mut work = params.clone();
    let mut report = Vec::new();
    for (ti, (name, g)) in analytic.iter().enumerate() {
        let mut worst = 0f64;
        let mut biggest = 0f64;
        for (k, &a) in g.iter().enumerate() {
            let orig = work.tensors()[ti].2[k];
            set(&mut work, ti, k, orig + h);
            let up = loss(&work);
            set(&mut work, ti, k, orig - h);
            let down = loss(&work);
            set(&mut work, ti, k, orig);
            let n = (up - down) / (2.0 * h);
            let err = (a - n).abs() / a.abs().max(n.abs()).max(GRAD_FLOOR);
            worst = worst.max(err);
            biggest = biggest.max(a.abs());
        }
        report.push(GradientAudit {
            tensor: name.clone(),
            max_rel_error: worst,
            max_abs_grad: biggest,
        });
    }
    Ok(report)
}

fn set(p: &mut Params<f64>, tensor: usize, k: usize, value: f64) {
    let mut ts = p.tensors_mut();
    ts[tensor].1[k] = value;
}
