use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded, shuffle, SeededRng};
use crate::validator::{softmax, ValidatorModel};

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    pub epsilon: f64,
    /// Minimum number of parameters checked in total, spread evenly over
    /// the parameter tensors.
    pub min_params: usize,
    /// Entries whose analytic gradient is smaller than this are only drawn
    /// when a tensor has nothing larger. Central differences at
    /// `epsilon = 1e-5` in f64 carry roughly 1e-13 of rounding noise, so a
    /// 1e-4 relative tolerance cannot be resolved much below 1e-8.
    pub min_gradient: f64,
    pub seed: u64,
    /// Multiplies the largest checked analytic gradient entry by this
    /// factor before comparing (sensitivity control).
    pub corrupt: Option<f64>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            epsilon: 1e-5,
            min_params: 200,
            min_gradient: 1e-8,
            seed: 0,
            corrupt: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    pub max_relative_error: f64,
    /// Entries whose ±epsilon evaluations crossed a ReLU or max-pool
    /// switch point; replaced by other entries.
    pub kinks_skipped: usize,
    /// Checked entries with an analytic gradient below `min_gradient`.
    pub below_floor: usize,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter tensor holding the worst entry.
    pub worst_tensor: String,
    pub per_tensor: Vec<TensorCheck>,
    pub checked: usize,
}

/// `|a - b| / max(|a|, |b|)`, zero when both magnitudes are below 1e-12.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-12 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// `loss(up) - loss(down)` for the cross-entropy of `label`, computed from
/// the logit differences so that the result keeps its relative precision
/// even when it is many orders of magnitude below the loss itself.
pub fn loss_difference(up: &[f64], down: &[f64], label: usize) -> f64 {
    let p_down = softmax(down);
    let shift: f64 = up
        .iter()
        .zip(down)
        .zip(&p_down)
        .map(|((u, d), p)| p * (u - d).exp_m1())
        .sum();
    shift.ln_1p() - (up[label] - down[label])
}

/// Compares the backpropagated gradient of the cross-entropy of one sample
/// with central finite differences on a seeded subset of parameters drawn
/// from every tensor. Dropout is off.
pub fn grad_check(
    model: &ValidatorModel,
    ids: &[usize],
    label: usize,
    options: &GradCheckOptions,
) -> Result<GradCheckReport> {
    if label >= model.config.classes {
        return Err(Error::input(format!(
            "label {label} outside 0..{}",
            model.config.classes
        )));
    }
    model.forward(ids, crate::validator::Mode::Infer)?;
    let net = &model.net;
    let mut analytic = vec![0.0; model.params.len()];
    let trace = net.forward::<SeededRng>(&model.params, ids, None);
    net.backward(&model.params, &trace, label, &mut analytic);
    let base_pattern = trace.pattern(net, &model.params);

    let mut rng = seeded(derive_seed(options.seed, "grad-check"));
    let used_rows: Vec<usize> = {
        let mut rows: Vec<usize> = ids.iter().copied().take(model.config.seq_len).collect();
        rows.sort_unstable();
        rows.dedup();
        rows
    };
    // Embedding rows of absent tokens have zero gradient by construction.
    let candidates: Vec<Vec<usize>> = net
        .tensors
        .iter()
        .map(|t| {
            let mut c: Vec<usize> = if t.name == "embedding" {
                let s = model.config.embed_dim;
                used_rows
                    .iter()
                    .flat_map(|&r| (0..s).map(move |k| t.offset + r * s + k))
                    .collect()
            } else {
                (t.offset..t.offset + t.len()).collect()
            };
            shuffle(&mut rng, &mut c);
            // Resolvable entries first, each part in shuffled order.
            c.sort_by_key(|&i| analytic[i].abs() < options.min_gradient);
            c
        })
        .collect();
    let largest = candidates.iter().map(|c| c.len()).max().unwrap_or(0);
    let mut per_group = options.min_params.div_ceil(candidates.len()).max(1);
    while per_group < largest
        && candidates
            .iter()
            .map(|c| c.len().min(per_group))
            .sum::<usize>()
            < options.min_params
    {
        per_group += 1;
    }

    let corrupt_at = options.corrupt.map(|_| {
        candidates
            .iter()
            .flat_map(|c| c.iter().take(per_group))
            .copied()
            .max_by(|&a, &b| analytic[a].abs().total_cmp(&analytic[b].abs()))
            .expect("at least one candidate")
    });
    let mut params = model.params.clone();
    let mut per_tensor = Vec::with_capacity(candidates.len());
    for (g, cands) in candidates.iter().enumerate() {
        let mut check = TensorCheck {
            name: net.tensors[g].name.clone(),
            checked: 0,
            max_relative_error: 0.0,
            kinks_skipped: 0,
            below_floor: 0,
        };
        for &i in cands {
            if check.checked == per_group {
                break;
            }
            let original = params[i];
            params[i] = original + options.epsilon;
            let up = net.forward::<SeededRng>(&params, ids, None);
            let up_smooth = up.pattern(net, &params) == base_pattern;
            params[i] = original - options.epsilon;
            let down = net.forward::<SeededRng>(&params, ids, None);
            let down_smooth = down.pattern(net, &params) == base_pattern;
            params[i] = original;
            if !(up_smooth && down_smooth) && Some(i) != corrupt_at {
                check.kinks_skipped += 1;
                continue;
            }
            let numeric =
                loss_difference(&up.logits, &down.logits, label) / (2.0 * options.epsilon);
            let mut a = analytic[i];
            if Some(i) == corrupt_at {
                a *= options.corrupt.unwrap_or(1.0);
            }
            if analytic[i].abs() < options.min_gradient {
                check.below_floor += 1;
            }
            check.checked += 1;
            check.max_relative_error = check.max_relative_error.max(relative_error(a, numeric));
        }
        per_tensor.push(check);
    }
    let worst = per_tensor
        .iter()
        .max_by(|a, b| a.max_relative_error.total_cmp(&b.max_relative_error))
        .expect("at least one tensor");
    Ok(GradCheckReport {
        max_relative_error: worst.max_relative_error,
        worst_tensor: worst.name.clone(),
        checked: per_tensor.iter().map(|t| t.checked).sum(),
        per_tensor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_convention() {
        assert_eq!(relative_error(0.0, 1e-13), 0.0);
        assert_eq!(relative_error(1.0, 1.0), 0.0);
        assert!((relative_error(1.01, 1.0) - 0.01 / 1.01).abs() < 1e-15);
    }

    #[test]
    fn loss_difference_matches_direct_subtraction() {
        let loss = |z: &[f64], y: usize| -softmax(z)[y].ln();
        let up = [0.3, -1.2, 2.0];
        let down = [0.1, 0.4, 1.5];
        for y in 0..3 {
            let direct = loss(&up, y) - loss(&down, y);
            assert!((loss_difference(&up, &down, y) - direct).abs() < 1e-14);
        }
        let tiny = [0.3 + 1e-12, -1.2, 2.0];
        let delta = tiny[0] - up[0];
        let expected = -(1.0 - softmax(&up)[0]) * delta;
        assert!((loss_difference(&tiny, &up, 0) / expected - 1.0).abs() < 1e-9);
    }
}
