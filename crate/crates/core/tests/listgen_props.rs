use std::collections::BTreeMap;

use dba_core::listgen::{
    combine_segments, format_combined, format_segment, generate_segment, parse_combined,
    parse_segment, positions_of, verify_segment, Segment,
};
use dba_core::{Bit, PartyId, ReceiverList, SenderList};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn segments(seed: u64, m: usize, d: usize, receivers: usize) -> Vec<Segment> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..d)
        .map(|i| generate_segment(PartyId(receivers + 2 + i), m, receivers, &mut rng).unwrap())
        .collect()
}

fn sender_list(segs: &[Segment]) -> SenderList {
    combine_segments(segs.iter().map(Segment::sender_slice).collect()).unwrap()
}

fn receiver_list(segs: &[Segment], party: usize) -> ReceiverList {
    combine_segments(
        segs.iter()
            .map(|s| s.receiver_slice(PartyId(party)).unwrap())
            .collect(),
    )
    .unwrap()
}

proptest! {
    #[test]
    fn generated_segments_verify(seed in any::<u64>(), k in 1usize..8, receivers in 2usize..6) {
        let seg = &segments(seed, 6 * k, 1, receivers)[0];
        prop_assert!(verify_segment(seg).is_empty());
    }

    #[test]
    fn position_sets_are_disjoint_thirds(seed in any::<u64>(), k in 1usize..5, d in 1usize..4) {
        let segs = segments(seed, 6 * k, d, 3);
        let l1 = sender_list(&segs);
        let zeros = positions_of(&l1, Bit::Zero);
        let ones = positions_of(&l1, Bit::One);
        prop_assert_eq!(zeros.len(), l1.len() / 3);
        prop_assert_eq!(ones.len(), l1.len() / 3);
        prop_assert!(zeros.iter().all(|z| !ones.contains(z)));
        prop_assert!(zeros.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn receiver_lists_are_half_ones(seed in any::<u64>(), k in 1usize..5, d in 1usize..4) {
        let segs = segments(seed, 6 * k, d, 3);
        for party in 2..=4 {
            let l = receiver_list(&segs, party);
            let ones = l.entries().iter().filter(|b| **b == Bit::One).count();
            prop_assert_eq!(ones * 2, l.len());
        }
    }

    #[test]
    fn same_seed_same_segment(seed in any::<u64>(), k in 1usize..5) {
        prop_assert_eq!(segments(seed, 6 * k, 2, 3), segments(seed, 6 * k, 2, 3));
    }

    #[test]
    fn text_form_round_trips(seed in any::<u64>(), k in 1usize..4, d in 1usize..3) {
        let segs = segments(seed, 6 * k, d, 3);
        for seg in &segs {
            prop_assert_eq!(&parse_segment(&format_segment(seg)).unwrap(), seg);
        }
        let l1 = sender_list(&segs);
        prop_assert_eq!(parse_combined(&format_combined(&l1)).unwrap(), l1);
        let l3 = receiver_list(&segs, 3);
        prop_assert_eq!(parse_combined(&format_combined(&l3)).unwrap(), l3);
    }
}

/// Distribution of the number of discord positions on which two independent
/// balanced receivers agree, by enumerating all pattern pairs.
fn agreement_count_distribution(discord: usize) -> BTreeMap<usize, f64> {
    let patterns: Vec<u32> = (0u32..1 << discord)
        .filter(|p| p.count_ones() as usize == discord / 2)
        .collect();
    let mut dist = BTreeMap::new();
    for a in &patterns {
        for b in &patterns {
            let agree = discord - (a ^ b).count_ones() as usize;
            *dist.entry(agree).or_insert(0.0) += 1.0;
        }
    }
    let total = (patterns.len() * patterns.len()) as f64;
    dist.values_mut().for_each(|v| *v /= total);
    dist
}

#[test]
fn receivers_draw_discord_bits_independently() {
    // m = 12: four discord positions per segment.
    let expected = agreement_count_distribution(4);
    assert_eq!(expected.len(), 3);
    assert!((expected[&0] - 1.0 / 6.0).abs() < 1e-12);
    assert!((expected[&2] - 2.0 / 3.0).abs() < 1e-12);

    let trials = 20_000;
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let mut observed: BTreeMap<usize, usize> = BTreeMap::new();
    let mut disagree_first = 0usize;
    for _ in 0..trials {
        let seg = generate_segment(PartyId(5), 12, 3, &mut rng).unwrap();
        let disc: Vec<usize> = seg.discord_positions().collect();
        let (a, b) = (&seg.receivers[0], &seg.receivers[1]);
        let agree = disc.iter().filter(|j| a[**j] == b[**j]).count();
        *observed.entry(agree).or_insert(0) += 1;
        disagree_first += usize::from(a[disc[0]] != b[disc[0]]);
    }
    for (k, p) in &expected {
        let freq = observed.get(k).copied().unwrap_or(0) as f64 / trials as f64;
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((freq - p).abs() < 4.0 * sigma, "agree={k}: {freq} vs {p}");
    }
    assert_eq!(observed.keys().copied().collect::<Vec<_>>(), vec![0, 2, 4]);
    let freq = disagree_first as f64 / trials as f64;
    assert!((freq - 0.5).abs() < 4.0 * (0.25 / trials as f64).sqrt());
}

#[test]
fn hand_built_sender_forces_receivers() {
    use dba_core::Trit;
    let sender: Vec<Trit> = [0, 1, 2, 0, 1, 2]
        .map(|t| Trit::try_from(t).unwrap())
        .to_vec();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    // Regenerate until the shuffle lands on the pattern from the example.
    let seg = std::iter::repeat_with(|| generate_segment(PartyId(4), 6, 2, &mut rng).unwrap())
        .find(|s| s.sender == sender)
        .unwrap();
    for list in &seg.receivers {
        assert_eq!(
            [list[0], list[1], list[3], list[4]],
            [Bit::Zero, Bit::One, Bit::Zero, Bit::One]
        );
    }
}
