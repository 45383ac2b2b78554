use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, ScalingSpec};
use crate::forecast::{PointForecast, Target};
use crate::neural::{adam_step, init_params_with, AdamState, TrainConfig};

use super::{LossParts, Objective, PinnConfig, PinnError, PinnModel, TrainingWindow};

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: PinnModel,
    /// Total loss before each update.
    pub loss_history: Vec<f64>,
    /// Loss terms of the returned parameters.
    pub final_parts: LossParts,
}

/// Parameters for a fresh model: both networks drawn from one ChaCha8 stream
/// (state net first), probabilities starting at 0.5.
pub fn initial_params(config: &PinnConfig, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = init_params_with(&config.state_net, &mut rng);
    params.extend(init_params_with(&config.factor_net, &mut rng));
    params.extend([0.0, 0.0]);
    params
}

/// Full-batch Adam on the window's total loss, from scratch.
pub fn train(
    dataset: &Dataset,
    window: &TrainingWindow,
    config: &PinnConfig,
    train_cfg: &TrainConfig,
) -> Result<TrainOutcome, PinnError> {
    train_cfg.validate()?;
    let objective = Objective::new(dataset, window, config)?;
    let mut params = initial_params(config, train_cfg.seed);
    let mut grad = vec![0.0; params.len()];
    let mut adam = AdamState::new(params.len());
    let mut history = Vec::with_capacity(train_cfg.epochs);
    let diverged = |epoch: usize, loss: f64| PinnError::DivergedLoss { epoch, loss };
    for epoch in 0..train_cfg.epochs {
        let parts = objective
            .evaluate(&params, Some(&mut grad))
            .map_err(|_| diverged(epoch, f64::NAN))?;
        if !parts.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(diverged(epoch, parts.total));
        }
        history.push(parts.total);
        adam_step(&mut params, &grad, &mut adam, train_cfg)?;
    }
    let final_parts = objective
        .evaluate(&params, None)
        .map_err(|_| diverged(train_cfg.epochs, f64::NAN))?;
    if !final_parts.total.is_finite() {
        return Err(diverged(train_cfg.epochs, final_parts.total));
    }
    let model = PinnModel::new(config.clone(), window.clone(), dataset.scaling, params, train_cfg.seed)?;
    Ok(TrainOutcome {
        model,
        loss_history: history,
        final_parts,
    })
}

/// Weekly totals for the three targets at `origin_week + h`, in original
/// units, clamped at zero.
pub fn predict_point(model: &PinnModel, origin_week: u32, horizons: &[u32]) -> Result<Vec<PointForecast>, PinnError> {
    let days: Vec<f64> = horizons.iter().map(|h| 7.0 * (origin_week + h) as f64).collect();
    let obs = model.observables_batch(&days)?;
    let scaling: &ScalingSpec = &model.data_scaling;
    let mut out = Vec::with_capacity(3 * horizons.len());
    for target in Target::ALL {
        let ch = target.channel();
        for (h, o) in horizons.iter().zip(&obs) {
            out.push(PointForecast {
                target,
                horizon: *h,
                origin_week,
                value: scaling.denormalize(ch, o[ch.index()]).max(0.0),
            });
        }
    }
    Ok(out)
}
