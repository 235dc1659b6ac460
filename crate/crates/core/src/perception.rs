//! A node's local, possibly noisy view of the world: which neighbours it can
//! hear (decided on true distance) and where it believes they are, plus the
//! obstacles inside its sensing range.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::environment::{obstacle_edges_within, EnvironmentError, EnvironmentSpec, Obstacle};
use crate::geometry::{HalfPlane, Point2};
use crate::NodeId;

/// Additive white Gaussian noise on perceived neighbour coordinates.
///
/// `mu` is kept for completeness and is always zero; the variance relation
/// `σ² = N₀/2` to a channel noise power is informational only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
    pub mu: f64,
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel { sigma: 0.0, mu: 0.0 };

    pub fn new(sigma: f64) -> Option<Self> {
        (sigma >= 0.0 && sigma.is_finite()).then_some(NoiseModel { sigma, mu: 0.0 })
    }

    pub fn is_noiseless(&self) -> bool {
        self.sigma == 0.0
    }

    /// Channel noise power `N₀ = 2σ²`.
    pub fn noise_power(&self) -> f64 {
        2.0 * self.sigma * self.sigma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerceivedNeighbor {
    pub node_id: NodeId,
    pub perceived_position: Point2,
}

/// Neighbours within `r_c` of `self_position` (true distance), each with a
/// freshly perturbed position. `others` must exclude the perceiver. Draws
/// are taken in ascending id order, x before y.
pub fn perceive_neighbors<R: Rng + ?Sized>(
    self_position: Point2,
    others: &[(NodeId, Point2)],
    r_c: f64,
    noise: NoiseModel,
    rng: &mut R,
) -> Vec<PerceivedNeighbor> {
    let r_c_sq = r_c * r_c;
    let mut visible: Vec<(NodeId, Point2)> =
        others.iter().copied().filter(|&(_, p)| p.distance_sq(self_position) <= r_c_sq).collect();
    visible.sort_by_key(|&(id, _)| id);

    let normal = (!noise.is_noiseless()).then(|| Normal::new(noise.mu, noise.sigma).expect("sigma validated"));
    visible
        .into_iter()
        .map(|(node_id, p)| {
            let perceived_position = match &normal {
                Some(n) => {
                    let ex = n.sample(rng);
                    let ey = n.sample(rng);
                    Point2::new(p.x + ex, p.y + ey)
                }
                None => p,
            };
            PerceivedNeighbor { node_id, perceived_position }
        })
        .collect()
}

/// Obstacle faces within `r_s` that face the node. Obstacle sensing is
/// exact.
pub fn sense_obstacles(
    self_position: Point2,
    env: &EnvironmentSpec,
    r_s: f64,
) -> Result<Vec<HalfPlane>, EnvironmentError> {
    obstacle_edges_within(env, self_position, r_s)
}

/// Obstacle bodies within `r_s`, for cells that carve obstacles out as holes
/// or notches.
pub fn sense_obstacle_bodies(
    self_position: Point2,
    env: &EnvironmentSpec,
    r_s: f64,
) -> Result<Vec<Obstacle>, EnvironmentError> {
    if !env.is_free(self_position) {
        return Err(EnvironmentError::IllegalPosition { x: self_position.x, y: self_position.y });
    }
    Ok(env.obstacles_within(self_position, r_s).copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{build_scenario, ScenarioKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_noise_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let others = [(2, Point2::new(0.0, 2.0)), (1, Point2::new(1.0, 0.0))];
        let got = perceive_neighbors(Point2::ORIGIN, &others, 3.0, NoiseModel::NONE, &mut rng);
        assert_eq!(
            got,
            vec![
                PerceivedNeighbor { node_id: 1, perceived_position: Point2::new(1.0, 0.0) },
                PerceivedNeighbor { node_id: 2, perceived_position: Point2::new(0.0, 2.0) },
            ]
        );
    }

    #[test]
    fn far_neighbor_invisible_at_any_noise() {
        for sigma in [0.0, 0.01, 0.05, 0.1, 5.0] {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let got = perceive_neighbors(
                Point2::ORIGIN,
                &[(7, Point2::new(6.0, 0.0))],
                3.0,
                NoiseModel::new(sigma).unwrap(),
                &mut rng,
            );
            assert!(got.is_empty());
        }
    }

    #[test]
    fn noise_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let noise = NoiseModel::new(0.1).unwrap();
        let truth = Point2::new(1.0, 0.5);
        let n = 100_000;
        let (mut sx, mut sy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let p = perceive_neighbors(Point2::ORIGIN, &[(0, truth)], 3.0, noise, &mut rng)[0].perceived_position;
            let (ex, ey) = (p.x - truth.x, p.y - truth.y);
            sx += ex;
            sy += ey;
            sxx += ex * ex;
            syy += ey * ey;
        }
        let nf = n as f64;
        for (s, ss) in [(sx, sxx), (sy, syy)] {
            let mean = s / nf;
            let std = ((ss - nf * mean * mean) / (nf - 1.0)).sqrt();
            assert!(mean.abs() <= 0.001, "mean {mean}");
            assert!((0.099..=0.101).contains(&std), "std {std}");
        }
    }

    #[test]
    fn neighbor_set_is_noise_invariant_and_deterministic() {
        let others: Vec<(NodeId, Point2)> =
            (0..30).map(|i| (i, Point2::new((i as f64 * 0.37) % 4.0, (i as f64 * 0.61) % 4.0))).collect();
        let me = Point2::new(2.0, 2.0);
        let ids = |sigma: f64, seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            perceive_neighbors(me, &others, 1.5, NoiseModel::new(sigma).unwrap(), &mut rng)
        };
        let base: Vec<NodeId> = ids(0.0, 0).iter().map(|p| p.node_id).collect();
        assert!(!base.is_empty());
        for sigma in [0.01, 0.05, 0.1] {
            let got = ids(sigma, 9);
            assert_eq!(got.iter().map(|p| p.node_id).collect::<Vec<_>>(), base);
            assert_eq!(got, ids(sigma, 9));
        }
    }

    #[test]
    fn obstacle_sensing() {
        let empty = build_scenario(ScenarioKind::Empty, 10.0, 10.0, 0).unwrap();
        assert!(sense_obstacles(Point2::new(5.0, 5.0), &empty, 1.0).unwrap().is_empty());
        let wall = Obstacle::new(Point2::new(5.5, 0.0), Point2::new(5.9, 10.0)).unwrap();
        let env = EnvironmentSpec::new(10.0, 10.0, vec![wall], ScenarioKind::Empty).unwrap();
        assert_eq!(sense_obstacles(Point2::new(5.0, 5.0), &env, 1.0).unwrap().len(), 1);
        assert!(sense_obstacles(Point2::new(4.0, 5.0), &env, 1.0).unwrap().is_empty());
        assert_eq!(sense_obstacle_bodies(Point2::new(5.0, 5.0), &env, 1.0).unwrap(), vec![wall]);
        assert!(sense_obstacle_bodies(Point2::new(5.6, 5.0), &env, 1.0).is_err());
    }
}
