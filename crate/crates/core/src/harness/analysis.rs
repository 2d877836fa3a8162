use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rolemix_tensor::Tensor;

use super::config::PcaDriver;
use super::HarnessError;
use crate::env::{run_episode, Actor, EpisodeRecord, EpisodeTrace, MapSpec};
use crate::expert::{Role, ScriptedExpert};
use crate::trainer::{
    evaluate_policy, load_transfer, EvalReport, Learner, RmsPropConfig, TeamLayout, TransferBundle,
};

/// Rebuilds a learner for `spec` from a bundle, with the network sizes
/// recorded in the bundle header.
pub fn learner_from_bundle(bundle: &TransferBundle, spec: &MapSpec) -> Result<Learner, HarnessError> {
    // Only state heads can be freshly drawn here (when the summary width
    // differs), and they never influence decentralised action selection.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    Ok(load_transfer(
        bundle,
        bundle.header.model(),
        TeamLayout::of(spec),
        RmsPropConfig::default(),
        1,
        &mut rng,
    )?)
}

/// Greedy, decentralised evaluation of a bundle over `episodes` episodes
/// with environment seeds `seed, seed + 1, …`.
pub fn evaluate(
    bundle: &TransferBundle,
    spec: &Arc<MapSpec>,
    episodes: usize,
    seed: u64,
) -> Result<(EvalReport, Vec<EpisodeTrace>), HarnessError> {
    let learner = learner_from_bundle(bundle, spec)?;
    Ok(evaluate_policy(&learner.store, &learner.agent, spec, episodes, seed)?)
}

/// Evaluates any actor, e.g. the scripted expert, on the same seeds an
/// [`evaluate`] call would use.
pub fn evaluate_actor(
    actor: &mut impl Actor,
    spec: &Arc<MapSpec>,
    episodes: usize,
    seed: u64,
) -> Result<(EvalReport, Vec<EpisodeTrace>), HarnessError> {
    let traces = (0..episodes as u64)
        .map(|e| run_episode(spec, seed.wrapping_add(e), actor, false).map(|(_, t)| t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((EvalReport::from_traces(&traces), traces))
}

/// One agent's row of the role-selection matrix at one step.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightSample {
    pub episode: usize,
    pub t: usize,
    pub agent: usize,
    /// Scripted role of the agent, when the expert drove the episode.
    pub role: Option<Role>,
    pub weights: Vec<f64>,
}

/// Role-selection rows of every alive agent at every acting step of
/// `records`, computed by the learner's role mixer.
pub fn role_weight_samples(
    learner: &Learner,
    records: &[EpisodeRecord],
    roles: Option<&[Role]>,
) -> Result<Vec<WeightSample>, HarnessError> {
    let mixer = learner
        .mixer
        .as_role()
        .ok_or_else(|| HarnessError::Config("role weights need a role mixer".into()))?;
    let mut out = Vec::new();
    for (episode, rec) in records.iter().enumerate() {
        let (n, d) = (rec.n_agents, rec.obs_dim);
        for t in 0..rec.len() {
            let alive: Vec<bool> = (0..n).map(|i| rec.alive(t, i)).collect();
            if !alive.iter().any(|&a| a) {
                continue;
            }
            let mut obs = vec![0.0f32; n * d];
            for (i, o) in rec.obs[t].iter().enumerate() {
                o.write_dense(&mut obs[i * d..(i + 1) * d]);
            }
            let w = mixer.role_weights(&learner.store, &Tensor::new([n, d], obs)?, &alive)?;
            let k = w.0.shape()[1];
            for (agent, _) in alive.iter().enumerate().filter(|(_, &a)| a) {
                out.push(WeightSample {
                    episode,
                    t,
                    agent,
                    role: roles.map(|r| r[agent]),
                    weights: w.0.data()[agent * k..(agent + 1) * k].iter().map(|&v| v as f64).collect(),
                });
            }
        }
    }
    Ok(out)
}

/// Episodes for the role-weight analysis: the trained team acting greedily
/// or the scripted expert, on environment seeds `seed, seed + 1, …`. The
/// expert variant also returns each agent's scripted role.
pub fn analysis_episodes(
    learner: &Learner,
    spec: &Arc<MapSpec>,
    driver: PcaDriver,
    episodes: usize,
    seed: u64,
) -> Result<(Vec<EpisodeRecord>, Option<Vec<Role>>), HarnessError> {
    match driver {
        PcaDriver::Greedy => {
            let (_, traces) = evaluate_policy(&learner.store, &learner.agent, spec, episodes, seed)?;
            let records = traces
                .iter()
                .map(|t| t.to_record(spec, false))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((records, None))
        }
        PcaDriver::Expert => {
            let mut expert = ScriptedExpert::new(spec)?;
            let roles = expert.roles();
            let records = (0..episodes as u64)
                .map(|e| run_episode(spec, seed.wrapping_add(e), &mut expert, true).map(|(r, _)| r))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((records, Some(roles)))
        }
    }
}

/// Two-dimensional projection of weight samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    /// `(x, y)` per input sample, in input order.
    pub points: Vec<[f64; 2]>,
    /// Unit principal directions; a missing direction is all zeros.
    pub components: [Vec<f64>; 2],
    /// Sample variance along each direction.
    pub variances: [f64; 2],
    /// Total sample variance over all directions.
    pub total_variance: f64,
}

/// Projects mean-centred rows onto the top two eigenvectors of their
/// sample covariance. Each direction's sign is fixed so that its largest
/// entry is positive. Directions with (numerically) zero variance are
/// dropped and their coordinates are zero, as is the second coordinate of
/// one-dimensional rows.
pub fn pca_project(rows: &[Vec<f64>]) -> Result<Projection, HarnessError> {
    if rows.len() < 2 {
        return Err(HarnessError::Analysis(format!("PCA needs at least 2 samples, got {}", rows.len())));
    }
    let k = rows[0].len();
    if k == 0 || rows.iter().any(|r| r.len() != k) {
        return Err(HarnessError::Analysis("PCA rows must share a positive width".into()));
    }
    let m = rows.len();
    let x = DMatrix::from_fn(m, k, |i, j| rows[i][j]);
    let mean = x.row_mean();
    let centred = DMatrix::from_fn(m, k, |i, j| x[(i, j)] - mean[j]);
    let cov = centred.transpose() * &centred / (m - 1) as f64;
    let total_variance = cov.trace();
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    // Variance at rounding level relative to the data is noise from
    // centring, not a direction.
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = (1e-12 * total_variance).max((1e-10 * scale).powi(2)).max(f64::MIN_POSITIVE);
    let mut components = [vec![0.0; k], vec![0.0; k]];
    let mut variances = [0.0; 2];
    for (slot, &idx) in order.iter().take(2).enumerate() {
        let value = eig.eigenvalues[idx];
        if value <= floor {
            continue;
        }
        let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        let pivot = v.iter().copied().fold(0.0f64, |best, c| if c.abs() > best.abs() + 1e-12 { c } else { best });
        if pivot < 0.0 {
            v.iter_mut().for_each(|c| *c = -*c);
        }
        components[slot] = v;
        variances[slot] = value;
    }
    let points = (0..m)
        .map(|i| {
            let row = centred.row(i);
            let dot = |c: &[f64]| row.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
            [dot(&components[0]), dot(&components[1])]
        })
        .collect();
    Ok(Projection {
        points,
        components,
        variances,
        total_variance,
    })
}

/// Mean silhouette coefficient of labelled points under Euclidean
/// distance. Points alone in their cluster score zero. `None` when there
/// are fewer than two clusters.
pub fn silhouette<P: AsRef<[f64]>>(points: &[P], labels: &[usize]) -> Option<f64> {
    assert_eq!(points.len(), labels.len(), "one label per point");
    let clusters = {
        let mut l = labels.to_vec();
        l.sort_unstable();
        l.dedup();
        l
    };
    if clusters.len() < 2 {
        return None;
    }
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let mut total = 0.0;
    for (i, p) in points.iter().enumerate() {
        let mut sums = vec![0.0; clusters.len()];
        let mut counts = vec![0usize; clusters.len()];
        for (j, q) in points.iter().enumerate() {
            if i == j {
                continue;
            }
            let c = clusters.binary_search(&labels[j]).expect("label listed");
            sums[c] += dist(p.as_ref(), q.as_ref());
            counts[c] += 1;
        }
        let own = clusters.binary_search(&labels[i]).expect("label listed");
        if counts[own] == 0 {
            continue;
        }
        let a = sums[own] / counts[own] as f64;
        let b = (0..clusters.len())
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Some(total / points.len() as f64)
}

/// Per-agent visit counts over a map, indexed `y * width + x`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VisitationMap {
    pub width: usize,
    pub height: usize,
    pub counts: Vec<Vec<u64>>,
}

impl VisitationMap {
    pub fn get(&self, agent: usize, x: usize, y: usize) -> u64 {
        self.counts[agent][y * self.width + x]
    }

    pub fn total(&self, agent: usize) -> u64 {
        self.counts[agent].iter().sum()
    }
}

/// Counts, for each agent, the cells it acted from in `traces` (one count
/// per alive step).
pub fn visitation_map(traces: &[EpisodeTrace], spec: &MapSpec) -> VisitationMap {
    let (width, height) = (spec.width, spec.height);
    let mut counts = vec![vec![0u64; width * height]; spec.num_agents()];
    for step in traces.iter().flat_map(|t| &t.steps) {
        for (agent, pos) in step.positions.iter().enumerate() {
            if let (Some([x, y]), Some(grid)) = (pos, counts.get_mut(agent)) {
                if *x < width && *y < height {
                    grid[y * width + x] += 1;
                }
            }
        }
    }
    VisitationMap { width, height, counts }
}
