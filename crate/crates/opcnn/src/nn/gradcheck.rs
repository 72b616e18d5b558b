//! Finite-difference verification of the backward pass.

use crate::corpus::PAD_ID;
use crate::{Error, Result};

use super::{backward, cross_entropy, forward, Gradients, OpcnnModel};

/// Deliberate gradient corruption, used to exercise the failure path.
#[derive(Debug, Clone, Copy)]
pub enum GradFault {
    /// Multiplies every analytic kernel gradient by the factor.
    ScaleKernelGrads(f64),
}

#[derive(Debug, Clone)]
pub struct GroupResult {
    pub name: String,
    pub params_checked: usize,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub groups: Vec<GroupResult>,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.groups.iter().map(|g| g.max_rel_err).fold(0.0, f64::max)
    }

    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_rel_err() < tolerance
    }
}

/// Location of one scalar parameter inside the model.
#[derive(Debug, Clone, Copy)]
enum Slot {
    Kernel { filter: usize, idx: usize },
    ConvBias { filter: usize },
    Beta { filter: usize },
    PoolBias { filter: usize },
    WOut { idx: usize },
    BOut { idx: usize },
    Embedding { idx: usize },
}

fn perturb(model: &mut OpcnnModel, slot: Slot, delta: f64) {
    match slot {
        Slot::Kernel { filter, idx } => model.filters[filter].kernel.data_mut()[idx] += delta,
        Slot::ConvBias { filter } => model.filters[filter].bias += delta,
        Slot::Beta { filter } => model.filters[filter].beta += delta,
        Slot::PoolBias { filter } => model.filters[filter].pool_bias += delta,
        Slot::WOut { idx } => model.w_out.data_mut()[idx] += delta,
        Slot::BOut { idx } => model.b_out.data_mut()[idx] += delta,
        Slot::Embedding { idx } => model.embedding.data_mut()[idx] += delta,
    }
}

fn analytic(grads: &Gradients, slot: Slot) -> f64 {
    match slot {
        Slot::Kernel { filter, idx } => grads.filters[filter].kernel.data()[idx],
        Slot::ConvBias { filter } => grads.filters[filter].bias,
        Slot::Beta { filter } => grads.filters[filter].beta,
        Slot::PoolBias { filter } => grads.filters[filter].pool_bias,
        Slot::WOut { idx } => grads.w_out.data()[idx],
        Slot::BOut { idx } => grads.b_out[idx],
        Slot::Embedding { idx } => grads.embedding.data()[idx],
    }
}

/// Compares every analytic gradient against central finite differences on a
/// single sample, grouped by parameter kind. Dropout is disabled throughout.
/// Relative error is |a − n| / max(|a|, |n|, 1e-8).
pub fn grad_check(
    model: &OpcnnModel,
    ids: &[usize],
    label: u8,
    epsilon: f64,
    fault: Option<GradFault>,
) -> Result<GradCheckReport> {
    if epsilon <= 0.0 {
        return Err(Error::InvalidArgument("epsilon must be > 0".into()));
    }
    // Central differences are unreliable at ReLU kinks, and an unperturbed
    // fresh model sits exactly on one wherever a window covers only padding
    // (pre-activation = bias = 0). Checking a bias-jittered copy moves every
    // such pre-activation off zero without changing what is being verified.
    let mut model = model.clone();
    for (f, filter) in model.filters.iter_mut().enumerate() {
        filter.bias += 0.1 + 0.013 * f as f64;
    }
    let model = &model;
    let trace = forward(model, ids, None)?;
    let mut grads = backward(model, &trace, label)?;
    if let Some(GradFault::ScaleKernelGrads(factor)) = fault {
        for f in &mut grads.filters {
            for v in f.kernel.data_mut() {
                *v *= factor;
            }
        }
    }

    let loss_at = |m: &OpcnnModel| -> Result<f64> {
        let t = forward(m, ids, None)?;
        Ok(cross_entropy(&t.probs, label))
    };

    let mut groups: Vec<(String, Vec<Slot>)> = Vec::new();
    for &width in &model.hyper.filter_widths {
        let mut kernel_slots = Vec::new();
        let mut bias_slots = Vec::new();
        for (f, filter) in model.filters.iter().enumerate() {
            if filter.width != width {
                continue;
            }
            for idx in 0..filter.kernel.data().len() {
                kernel_slots.push(Slot::Kernel { filter: f, idx });
            }
            bias_slots.push(Slot::ConvBias { filter: f });
        }
        groups.push((format!("K_w{width}"), kernel_slots));
        groups.push((format!("b_w{width}"), bias_slots));
    }
    if model.hyper.pooling_affine_enabled {
        groups.push((
            "beta".into(),
            (0..model.filters.len()).map(|f| Slot::Beta { filter: f }).collect(),
        ));
        groups.push((
            "pool_bias".into(),
            (0..model.filters.len())
                .map(|f| Slot::PoolBias { filter: f })
                .collect(),
        ));
    }
    groups.push((
        "w_out".into(),
        (0..model.w_out.data().len()).map(|idx| Slot::WOut { idx }).collect(),
    ));
    groups.push((
        "b_out".into(),
        (0..model.b_out.len()).map(|idx| Slot::BOut { idx }).collect(),
    ));
    if model.hyper.embeddings_trainable {
        // Only rows touched by the input carry gradient; the pad row is
        // pinned to zero by construction and excluded.
        let m = model.hyper.m;
        let mut rows: Vec<usize> = ids.iter().copied().filter(|&id| id != PAD_ID).collect();
        rows.sort_unstable();
        rows.dedup();
        let slots = rows
            .into_iter()
            .flat_map(|r| (0..m).map(move |c| Slot::Embedding { idx: r * m + c }))
            .collect();
        groups.push(("embedding".into(), slots));
    }

    let mut results = Vec::with_capacity(groups.len());
    for (name, slots) in groups {
        let mut max_rel = 0.0f64;
        for slot in &slots {
            let mut plus = model.clone();
            perturb(&mut plus, *slot, epsilon);
            let mut minus = model.clone();
            perturb(&mut minus, *slot, -epsilon);
            let numeric = (loss_at(&plus)? - loss_at(&minus)?) / (2.0 * epsilon);
            let a = analytic(&grads, *slot);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            max_rel = max_rel.max(rel);
        }
        results.push(GroupResult {
            name,
            params_checked: slots.len(),
            max_rel_err: max_rel,
        });
    }
    Ok(GradCheckReport { groups: results })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Hyperparams;

    fn tiny_model(seed: u64) -> OpcnnModel {
        let h = Hyperparams {
            m: 4,
            filter_widths: vec![2, 3],
            filters_per_width: 2,
            k: 2,
            n: 7,
            ..Hyperparams::default()
        };
        OpcnnModel::init(9, h, seed).unwrap()
    }

    #[test]
    fn fresh_model_passes_at_1e4() {
        let model = tiny_model(7);
        let report = grad_check(&model, &[2, 3, 4, 5, 6, 7, 8], 1, 1e-5, None).unwrap();
        assert!(
            report.passed(1e-4),
            "max rel err {} in {:?}",
            report.max_rel_err(),
            report
                .groups
                .iter()
                .map(|g| (g.name.clone(), g.max_rel_err))
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn injected_fault_is_flagged() {
        let model = tiny_model(8);
        let report = grad_check(
            &model,
            &[2, 3, 4, 5, 6, 7, 8],
            0,
            1e-5,
            Some(GradFault::ScaleKernelGrads(2.0)),
        )
        .unwrap();
        let kernel_err = report
            .groups
            .iter()
            .filter(|g| g.name.starts_with("K_w"))
            .map(|g| g.max_rel_err)
            .fold(0.0, f64::max);
        // (2g − g) / 2g = 0.5, but allow slack for near-zero entries.
        assert!(kernel_err >= 0.33, "kernel err {kernel_err}");
    }

    #[test]
    fn padded_input_passes_with_frozen_embeddings() {
        let mut model = tiny_model(9);
        model.hyper.embeddings_trainable = false;
        let report = grad_check(&model, &[2, 3, 4, 0, 0, 0, 0], 1, 1e-5, None).unwrap();
        assert!(report.passed(1e-4), "max rel err {}", report.max_rel_err());
        assert!(report.groups.iter().all(|g| g.name != "embedding"));
    }

    #[test]
    fn disabled_pooling_affine_passes() {
        let mut model = tiny_model(10);
        model.hyper.pooling_affine_enabled = false;
        let report = grad_check(&model, &[2, 3, 4, 5, 6, 7, 8], 0, 1e-5, None).unwrap();
        assert!(report.passed(1e-4), "max rel err {}", report.max_rel_err());
    }
}
