//! Central finite-difference validation of the hand-derived gradients.
//!
//! Every parameter group and the network input are perturbed component by
//! component. A component whose +h / -h passes land on different sides of a
//! ReLU kink (detected by comparing activation sign masks) is flagged and
//! excluded from the pass/fail decision.

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::numerics::DenseMatrix;

use super::loss::mse_loss;
use super::model::NetworkModel;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped_kinks: usize,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn gradient_check(
    model: &mut NetworkModel,
    x: &DenseMatrix,
    y: &DenseMatrix,
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    if !(step > 1e-8 && step < 1e-3) {
        return Err(Error::InvalidArgument {
            op: "gradient_check",
            detail: format!("step {step} outside (1e-8, 1e-3)"),
        });
    }
    let exec = Exec::Serial;
    let pass = model.forward(x, exec)?;
    let baseline_masks = pass.relu_masks();
    let (_, d_y) = mse_loss(y, &pass.y)?;
    let grads = model.backward(&pass, &d_y, exec)?;
    let analytic: Vec<Vec<f64>> = grads.flat().iter().map(|g| g.to_vec()).collect();

    let mut max_rel = 0.0f64;
    let mut checked = 0usize;
    let mut skipped = 0usize;

    let eval = |model: &NetworkModel| -> Result<(f64, Vec<Vec<bool>>)> {
        let p = model.forward(x, exec)?;
        let (l, _) = mse_loss(y, &p.y)?;
        Ok((l, p.relu_masks()))
    };

    // parameter groups
    let n_groups = analytic.len();
    for gi in 0..n_groups {
        for k in 0..analytic[gi].len() {
            let orig = {
                let mut groups = model.param_groups_mut();
                let v = groups[gi][k];
                groups[gi][k] = v + step;
                v
            };
            let (lp, masks_p) = eval(model)?;
            {
                let mut groups = model.param_groups_mut();
                groups[gi][k] = orig - step;
            }
            let (lm, masks_m) = eval(model)?;
            {
                let mut groups = model.param_groups_mut();
                groups[gi][k] = orig;
            }
            if masks_p != baseline_masks || masks_m != baseline_masks {
                skipped += 1;
                continue;
            }
            let fd = (lp - lm) / (2.0 * step);
            let g = analytic[gi][k];
            let denom = fd.abs().max(g.abs()).max(1e-5);
            max_rel = max_rel.max(((fd - g) / denom).abs());
            checked += 1;
        }
    }

    // network input
    let mut x_pert = x.clone();
    for idx in 0..x.data().len() {
        let orig = x.data()[idx];
        x_pert.data_mut()[idx] = orig + step;
        let pass_p = model.forward(&x_pert, exec)?;
        let (lp, _) = mse_loss(y, &pass_p.y)?;
        let masks_p = pass_p.relu_masks();
        x_pert.data_mut()[idx] = orig - step;
        let pass_m = model.forward(&x_pert, exec)?;
        let (lm, _) = mse_loss(y, &pass_m.y)?;
        let masks_m = pass_m.relu_masks();
        x_pert.data_mut()[idx] = orig;
        if masks_p != baseline_masks || masks_m != baseline_masks {
            skipped += 1;
            continue;
        }
        let fd = (lp - lm) / (2.0 * step);
        let g = grads.d_input.data()[idx];
        let denom = fd.abs().max(g.abs()).max(1e-5);
        max_rel = max_rel.max(((fd - g) / denom).abs());
        checked += 1;
    }

    Ok(GradCheckReport {
        max_rel_error: max_rel,
        checked,
        skipped_kinks: skipped,
        tolerance,
        pass: max_rel <= tolerance,
    })
}
