use rand::seq::SliceRandom;
use rand::Rng;

use crate::nn::{Adam, GradStore, Graph, Matrix, ParamStore};
use crate::policy::argmax;

use super::model::QModel;
use super::replay::ReplayBuffer;
use super::{AgentError, Hyperparams};

/// ε-greedy choice over `q`; returns the index and its duration.
pub fn select_duration<R: Rng + ?Sized>(q: &[f64], epsilon: f64, space: &[u32], rng: &mut R) -> (usize, u32) {
    assert_eq!(q.len(), space.len(), "one score per duration");
    let a = if epsilon > 0.0 && rng.random::<f64>() < epsilon { rng.random_range(0..q.len()) } else { argmax(q) };
    (a, space[a])
}

/// Exploration rate of training episode `episode` (0-based).
pub fn epsilon_for_episode(hp: &Hyperparams, episode: usize) -> f64 {
    (hp.epsilon_start * hp.epsilon_decay.powi(episode as i32)).max(hp.epsilon_floor)
}

/// One learning round: freezes a target copy of `params`, samples the
/// buffer, then fits `Q(s, a)` to `c·r + γ max Q_target(s', ·)` with
/// minibatch Adam steps on the squared error, `c` being `reward_scale`.
/// Returns the mean loss over all passes.
pub fn train_round<R: Rng + ?Sized>(
    buffer: &ReplayBuffer,
    model: &QModel,
    params: &mut ParamStore,
    opt: &mut Adam,
    hp: &Hyperparams,
    rng: &mut R,
) -> Result<f64, AgentError> {
    if buffer.is_empty() {
        return Err(AgentError::EmptyBuffer);
    }
    let target = params.clone();
    let batch = buffer.sample(hp.sample_size, rng);
    let ys: Vec<f64> = batch
        .iter()
        .map(|t| {
            let r = hp.reward_scale * t.reward;
            if t.terminal {
                r
            } else {
                let q = model.q_values(&target, &t.next_state);
                r + hp.gamma * q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
        })
        .collect();

    let mut order: Vec<usize> = (0..batch.len()).collect();
    let mut total = 0.0;
    for pass in 0..hp.fit_passes {
        if pass > 0 {
            order.shuffle(rng);
        }
        for chunk in order.chunks(hp.batch) {
            let mut grads = GradStore::zeros_like(params);
            let k = chunk.len() as f64;
            for &i in chunk {
                let t = batch[i];
                let mut g = Graph::new(params);
                let q = model.forward_chosen(&mut g, &t.state);
                let err = g.value(q).data()[t.action] - ys[i];
                total += err * err;
                let mut seed = Matrix::zeros(1, g.shape(q).1);
                seed.set(0, t.action, 2.0 * err / k);
                g.backward_into(q, &seed, &mut grads);
            }
            opt.step(params, &grads)?;
        }
    }
    Ok(total / (batch.len() * hp.fit_passes) as f64)
}
