//! Ring-buffer semantics and sampling uniformity.

use proptest::prelude::*;

use rdpg::agent::{ReplayBuffer, Transition};

fn transition(tag: f64) -> Transition {
    Transition { obs: vec![tag, -tag], u: vec![tag], w: vec![0.5 * tag], cost: tag, next_obs: vec![tag + 1.0, 0.0], terminal: tag as i64 % 3 == 0 }
}

fn filled(capacity: usize, pushes: usize) -> ReplayBuffer {
    let mut b = ReplayBuffer::new(capacity, 2, 1, 1).unwrap();
    for i in 0..pushes {
        b.push(&transition(i as f64)).unwrap();
    }
    b
}

// Upper 0.1% point of χ² with 19 degrees of freedom.
const CHI2_19_999: f64 = 43.82;

#[test]
fn sampling_is_uniform_over_slots() {
    let b = filled(20, 57);
    let mut counts = [0usize; 20];
    for seed in 0..200 {
        for i in b.sample_indices(100, seed).unwrap() {
            counts[i] += 1;
        }
    }
    let expected = 20_000.0 / 20.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    assert!(chi2 < CHI2_19_999, "chi2 = {chi2}, counts {counts:?}");
}

#[test]
fn empty_buffer_cannot_be_sampled() {
    assert!(filled(4, 0).sample_batch(2, 0).is_err());
}

#[test]
fn wrong_dimensions_are_rejected() {
    let mut b = filled(4, 0);
    let mut t = transition(1.0);
    t.u.push(0.0);
    assert!(b.push(&t).is_err());
    assert!(b.is_empty());
}

proptest! {
    /// After any number of pushes the buffer holds exactly the newest `min(n, cap)`
    /// transitions, oldest first.
    #[test]
    fn ring_keeps_the_newest(capacity in 1usize..30, pushes in 0usize..100) {
        let b = filled(capacity, pushes);
        let kept = pushes.min(capacity);
        prop_assert_eq!(b.len(), kept);
        for k in 0..kept {
            let tag = (pushes - kept + k) as f64;
            prop_assert_eq!(b.get(k).unwrap(), transition(tag));
        }
        prop_assert!(b.get(kept).is_none());
    }

    #[test]
    fn raw_round_trip_is_lossless(capacity in 1usize..20, pushes in 0usize..50) {
        let b = filled(capacity, pushes);
        let back = ReplayBuffer::from_raw(&b.layout(), &b.raw_payload()).unwrap();
        prop_assert_eq!(back, b);
    }

    /// Samples are stored transitions, and the same seed gives the same batch.
    #[test]
    fn sampling_is_seeded_and_closed(pushes in 1usize..40, seed in any::<u64>()) {
        let b = filled(16, pushes);
        let batch = b.sample(8, seed).unwrap();
        prop_assert_eq!(&batch, &b.sample(8, seed).unwrap());
        let stored: Vec<Transition> = (0..b.len()).map(|k| b.get(k).unwrap()).collect();
        for t in &batch {
            prop_assert!(stored.contains(t));
        }
    }
}
