//! Boltzmann pruning lottery.
//!
//! Every present parameter with `|w| < lambda` is a removal candidate. A
//! candidate incoming to neuron `j` is removed with probability
//!
//! ```text
//! p_ij = exp(-|W_ij| / T) / sum_k exp(-|W_kj| / T)
//! ```
//!
//! where the sum runs over the parameters of `j` still present (bias
//! included). Each candidate draws its own Bernoulli variate.

use rand::Rng;

use crate::network::{Network, Source};

#[derive(Debug, Clone, PartialEq)]
pub struct PruneEvent {
    pub epoch: usize,
    pub example_index: usize,
    pub source: Source,
    pub target: usize,
    /// Parameter value immediately before removal.
    pub weight_value: f64,
    pub probability: f64,
}

/// Removal probabilities over the present incoming parameters of `j`, in
/// the order returned by [`Network::incoming`]. Empty when nothing remains.
pub fn prune_probabilities(net: &Network, j: usize, temperature: f64) -> Vec<(Source, f64)> {
    let incoming = net.incoming(j);
    if incoming.is_empty() {
        return Vec::new();
    }
    let mags: Vec<f64> = incoming
        .iter()
        .map(|s| net.parameter(*s, j).abs())
        .collect();
    // Shift by the smallest magnitude so the largest exponent is 0.
    let floor = mags.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = mags
        .iter()
        .map(|m| (-(m - floor) / temperature).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    incoming
        .into_iter()
        .zip(weights)
        .map(|(s, w)| (s, w / total))
        .collect()
}

/// One pruning pass over all non-input neurons. Probabilities come from the
/// network as it was before this call; removals are applied afterwards.
pub fn prune_step<R: Rng + ?Sized>(
    net: &mut Network,
    lambda: f64,
    temperature: f64,
    rng: &mut R,
    epoch: usize,
    example_index: usize,
) -> Vec<PruneEvent> {
    let mut events = Vec::new();
    for j in net.free_indices() {
        for (source, p) in prune_probabilities(net, j, temperature) {
            let value = net.parameter(source, j);
            if value.abs() >= lambda {
                continue;
            }
            if rng.random::<f64>() < p {
                events.push(PruneEvent {
                    epoch,
                    example_index,
                    source,
                    target: j,
                    weight_value: value,
                    probability: p,
                });
            }
        }
    }
    for ev in &events {
        net.remove_parameter(ev.source, ev.target);
    }
    events
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_target(weights: &[f64], bias: Option<f64>) -> Network {
        let mut net = Network::unconnected(weights.len() + 1, 0, 1).unwrap();
        let j = weights.len();
        for (i, w) in weights.iter().enumerate() {
            net.set_weight(i, j, *w).unwrap();
        }
        if let Some(b) = bias {
            net.set_bias(j, b).unwrap();
        }
        net
    }

    #[test]
    fn equal_magnitudes_give_uniform_probabilities() {
        let net = single_target(&[0.2, -0.2, 0.2], Some(-0.2));
        let p = prune_probabilities(&net, 3, 0.1);
        assert_eq!(p.len(), 4);
        for (_, v) in p {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn two_weights_hand_example() {
        let t = 0.1;
        let net = single_target(&[0.0, t * 2f64.ln()], None);
        let p = prune_probabilities(&net, 2, t);
        assert!((p[0].1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((p[1].1 - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn high_temperature_flattens_distribution() {
        let net = single_target(&[0.01, 0.5, 2.0], None);
        let p = prune_probabilities(&net, 3, 1e9);
        for (_, v) in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-8);
        }
    }

    #[test]
    fn empty_incoming_set_gives_empty_distribution() {
        let net = Network::unconnected(3, 1, 1).unwrap();
        assert!(prune_probabilities(&net, 2, 0.1).is_empty());
    }

    #[test]
    fn nothing_below_threshold_leaves_network_unchanged() {
        let mut net = single_target(&[0.3, -0.4], Some(0.5));
        let before = net.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert!(prune_step(&mut net, 0.05, 0.1, &mut rng, 0, 0).is_empty());
        }
        assert_eq!(net, before);
    }

    #[test]
    fn removed_parameters_never_return() {
        let mut net = single_target(&[0.001, 0.002], Some(0.003));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut removed = std::collections::HashSet::new();
        for round in 0..200 {
            for ev in prune_step(&mut net, 0.05, 0.1, &mut rng, round, 0) {
                assert!(removed.insert(ev.source), "{:?} removed twice", ev.source);
            }
            for s in &removed {
                assert!(!net.has_parameter(*s, 2));
                assert_eq!(net.parameter(*s, 2), 0.0);
            }
        }
        assert_eq!(removed.len(), 3);
    }
}
