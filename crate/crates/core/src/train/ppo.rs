use super::TrainError;
use crate::policy::parametric::{Features, ACTIONS, FEATURES};

pub type ActorParams = [[f64; FEATURES]; ACTIONS];

/// One position of a collected episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoSample {
    pub features: Features,
    pub action: usize,
    pub old_logp: f64,
    pub advantage: f64,
    pub ret: f64,
    pub reward: f64,
    /// False for environment-injected observation positions.
    pub trainable: bool,
}

fn log_softmax(theta: &ActorParams, phi: &Features) -> [f64; ACTIONS] {
    let z: [f64; ACTIONS] = std::array::from_fn(|a| theta[a].iter().zip(phi).map(|(w, x)| w * x).sum());
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    z.map(|v| v - lse)
}

/// `min(r A, clip(r, 1-eps, 1+eps) A)`.
pub fn surrogate_term(ratio: f64, advantage: f64, clip: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - clip, 1.0 + clip) * advantage)
}

/// Negated clipped surrogate averaged over trainable positions, and its
/// gradient with respect to `theta`. Masked positions are skipped outright.
pub fn masked_ppo_loss(batch: &[PpoSample], theta: &ActorParams, clip: f64) -> Result<(f64, ActorParams), TrainError> {
    let n = batch.iter().filter(|s| s.trainable).count();
    if n == 0 {
        return Err(TrainError::NoTrainable);
    }
    let scale = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut grad = [[0.0; FEATURES]; ACTIONS];
    for s in batch.iter().filter(|s| s.trainable) {
        let logp = log_softmax(theta, &s.features);
        let ratio = (logp[s.action] - s.old_logp).exp();
        let unclipped = ratio * s.advantage;
        let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * s.advantage;
        loss -= scale * unclipped.min(clipped);
        // The clipped branch is flat in theta wherever it is the minimum.
        if unclipped <= clipped {
            let coef = -scale * s.advantage * ratio;
            for (b, row) in grad.iter_mut().enumerate() {
                let indicator = if b == s.action { 1.0 } else { 0.0 };
                let dlogp = indicator - logp[b].exp();
                for (g, x) in row.iter_mut().zip(&s.features) {
                    *g += coef * dlogp * x;
                }
            }
        }
    }
    Ok((loss, grad))
}

/// Half mean squared error of the value head on trainable positions.
pub fn value_loss(batch: &[PpoSample], value: &Features) -> Result<(f64, Features), TrainError> {
    let n = batch.iter().filter(|s| s.trainable).count();
    if n == 0 {
        return Err(TrainError::NoTrainable);
    }
    let scale = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut grad = [0.0; FEATURES];
    for s in batch.iter().filter(|s| s.trainable) {
        let v: f64 = value.iter().zip(&s.features).map(|(w, x)| w * x).sum();
        let err = v - s.ret;
        loss += 0.5 * scale * err * err;
        for (g, x) in grad.iter_mut().zip(&s.features) {
            *g += scale * err * x;
        }
    }
    Ok((loss, grad))
}
