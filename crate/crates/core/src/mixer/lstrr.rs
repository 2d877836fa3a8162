use rolemix_tensor::{Graph, NodeId, Scalar, Tensor};
use serde::{Deserialize, Serialize};

use super::MixerError;

/// Discounts for the return-tied roles, from long to short horizon, plus
/// the team discount used by the temporal-difference target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscountLadder {
    pub gammas: Vec<f64>,
    pub team: f64,
}

impl DiscountLadder {
    /// `k2` discounts spaced evenly from `first` down to `last`.
    pub fn linear(k2: usize, first: f64, last: f64, team: f64) -> Result<Self, MixerError> {
        let gammas = match k2 {
            0 => Vec::new(),
            1 => vec![first],
            _ => (0..k2)
                .map(|i| first + (last - first) * i as f64 / (k2 - 1) as f64)
                .collect(),
        };
        let ladder = Self { gammas, team };
        ladder.validate()?;
        Ok(ladder)
    }

    /// 0.99 down to 0.50 over `k2` roles, team discount 0.99.
    pub fn default_for(k2: usize) -> Self {
        Self::linear(k2, 0.99, 0.50, 0.99).expect("default ladder is valid")
    }

    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    pub fn validate(&self) -> Result<(), MixerError> {
        if self.gammas.iter().any(|&g| !(g > 0.0 && g <= 1.0)) {
            return Err(MixerError::Ladder(format!("discounts must lie in (0, 1]: {:?}", self.gammas)));
        }
        if self.gammas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(MixerError::Ladder(format!("discounts must strictly decrease: {:?}", self.gammas)));
        }
        if !(0.0..=1.0).contains(&self.team) {
            return Err(MixerError::Ladder(format!("team discount {} outside [0, 1]", self.team)));
        }
        Ok(())
    }
}

/// `R_k = Σ_τ γ_k^τ r_τ` for a reward tail starting at the current step.
pub fn lstrr_role_targets(rewards: &[f64], ladder: &DiscountLadder) -> Vec<f64> {
    ladder
        .gammas
        .iter()
        .map(|&g| rewards.iter().rev().fold(0.0, |acc, &r| r + g * acc))
        .collect()
}

/// Role targets for every start step of an episode: `out[t][k]`.
pub fn lstrr_returns(rewards: &[f64], ladder: &DiscountLadder) -> Vec<Vec<f64>> {
    let k2 = ladder.len();
    let mut out = vec![vec![0.0; k2]; rewards.len()];
    let mut acc = vec![0.0; k2];
    for t in (0..rewards.len()).rev() {
        for (k, &g) in ladder.gammas.iter().enumerate() {
            acc[k] = rewards[t] + g * acc[k];
        }
        out[t].copy_from_slice(&acc);
    }
    out
}

/// `(1/K2) Σ_k (Q*_k − R_k)²` on plain values.
pub fn lstrr_loss(q_star_head: &[f64], targets: &[f64]) -> f64 {
    assert_eq!(q_star_head.len(), targets.len(), "one target per role");
    if targets.is_empty() {
        return 0.0;
    }
    q_star_head
        .iter()
        .zip(targets)
        .map(|(q, r)| (q - r) * (q - r))
        .sum::<f64>()
        / targets.len() as f64
}

/// Row-weighted LSTRR loss: `Σ_r w_r (1/K2) Σ_k (Q*[r,k] − R[r,k])²`.
/// `targets` (`[R, K2]`) and `row_weights` (`[R]`) enter as constants, so no
/// gradient reaches the returns.
pub fn lstrr_loss_node<S: Scalar>(
    g: &mut Graph<'_, S>,
    q_star: NodeId,
    targets: Tensor<S>,
    row_weights: Tensor<S>,
) -> Result<NodeId, MixerError> {
    let k2 = targets.shape().get(1).copied().unwrap_or(0);
    if k2 == 0 {
        let zero = g.constant(Tensor::scalar(S::zero()));
        return Ok(zero);
    }
    let head = g.slice(q_star, 1, 0, k2)?;
    let r = g.constant(targets);
    let diff = g.sub(head, r)?;
    let sq = g.mul(diff, diff)?;
    let per_row = g.sum_axis(sq, 1)?;
    let per_row = g.scale(per_row, 1.0 / k2 as f64);
    let w = g.constant(row_weights);
    let weighted = g.mul(per_row, w)?;
    Ok(g.sum_all(weighted))
}
