use dba_core::listgen::{combine_segments, generate_segment, Segment};
use dba_core::protocol::{check_claim, decide, make_claim, relay_step};
use dba_core::{Bit, Claim, DecideRule, Decision, Inbox, PartyId, ProtocolMessage, ReceiverList};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Receiver list with zeros at 0,1,2 and ones at 3,4,5.
fn checker_list() -> ReceiverList {
    ReceiverList::single(
        PartyId(2),
        [0, 0, 0, 1, 1, 1]
            .map(|b| Bit::try_from(b).unwrap())
            .to_vec(),
    )
}

#[derive(Clone, Copy, Debug)]
enum Kind {
    Good0,
    Good1,
    Failing,
    Flag,
}

fn message(kind: Kind) -> ProtocolMessage {
    match kind {
        Kind::Good0 => ProtocolMessage::Claim(Claim::new(Bit::Zero, vec![0, 2])),
        Kind::Good1 => ProtocolMessage::Claim(Claim::new(Bit::One, vec![3, 5])),
        Kind::Failing => ProtocolMessage::Claim(Claim::new(Bit::One, vec![0, 3])),
        Kind::Flag => ProtocolMessage::Flag,
    }
}

/// The four criteria read existentially: try every subset `H` of senders.
fn oracle_decision(msgs: &[ProtocolMessage], list: &ReceiverList, rule: DecideRule) -> Decision {
    let n = msgs.len();
    let consistent = |i: usize| msgs[i].claim().is_some_and(|c| check_claim(c, list));
    let bit = |i: usize| msgs[i].claim().unwrap().bit;
    let subsets = || (0u32..1 << n).filter(|h| h.count_ones() >= 2);
    let members = |h: u32| (0..n).filter(move |i| h & (1 << i) != 0);

    // (a)
    for h in subsets() {
        if members(h).all(consistent) {
            let first = bit(members(h).next().unwrap());
            if members(h).any(|i| bit(i) != first) {
                return Decision::Abort;
            }
        }
    }
    // (b), (c), and the merged variant
    for h in subsets() {
        if !members(h).all(consistent) {
            continue;
        }
        let first = bit(members(h).next().unwrap());
        if members(h).any(|i| bit(i) != first) {
            continue;
        }
        let outside: Vec<usize> = (0..n).filter(|i| h & (1 << i) == 0).collect();
        let failing = |i: &usize| msgs[*i].claim().is_some() && !consistent(*i);
        let flagged = |i: &usize| msgs[*i] == ProtocolMessage::Flag;
        let ok = match rule {
            DecideRule::Literal => outside.iter().all(failing) || outside.iter().all(flagged),
            DecideRule::Merged => outside.iter().all(|i| failing(i) || flagged(i)),
        };
        if ok {
            return Decision::Value(first);
        }
    }
    // (d)
    Decision::Abort
}

fn all_inboxes(n: usize) -> Vec<Vec<Kind>> {
    const KINDS: [Kind; 4] = [Kind::Good0, Kind::Good1, Kind::Failing, Kind::Flag];
    (0..4usize.pow(n as u32))
        .map(|mut code| {
            (0..n)
                .map(|_| {
                    let k = KINDS[code % 4];
                    code /= 4;
                    k
                })
                .collect()
        })
        .collect()
}

#[test]
fn decide_matches_exhaustive_oracle() {
    let list = checker_list();
    let mut seen_value = 0;
    for n in 1..=5 {
        for kinds in all_inboxes(n) {
            let msgs: Vec<ProtocolMessage> = kinds.iter().map(|k| message(*k)).collect();
            let mut inbox = Inbox::new((2..n + 2).map(PartyId));
            for (i, m) in msgs.iter().enumerate() {
                inbox.insert(PartyId(i + 2), m.clone()).unwrap();
            }
            for rule in [DecideRule::Literal, DecideRule::Merged] {
                let got = decide(&inbox, &list, rule).expect("decide is total");
                assert_eq!(
                    got,
                    oracle_decision(&msgs, &list, rule),
                    "{kinds:?} {rule:?}"
                );
                seen_value += usize::from(got != Decision::Abort);
            }
        }
    }
    assert!(seen_value > 0);
}

#[test]
fn conflicting_bits_always_abort() {
    let list = checker_list();
    for n in 2..=5 {
        for kinds in all_inboxes(n) {
            let has0 = kinds.iter().any(|k| matches!(k, Kind::Good0));
            let has1 = kinds.iter().any(|k| matches!(k, Kind::Good1));
            if !(has0 && has1) {
                continue;
            }
            let mut inbox = Inbox::new((2..n + 2).map(PartyId));
            for (i, k) in kinds.iter().enumerate() {
                inbox.insert(PartyId(i + 2), message(*k)).unwrap();
            }
            for rule in [DecideRule::Literal, DecideRule::Merged] {
                assert_eq!(decide(&inbox, &list, rule).unwrap(), Decision::Abort);
            }
        }
    }
}

fn world(seed: u64, m: usize, d: usize, n: usize) -> Vec<Segment> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..d)
        .map(|i| generate_segment(PartyId(n + 1 + i), m, n - 1, &mut rng).unwrap())
        .collect()
}

proptest! {
    #[test]
    fn honest_run_decides_sender_bit(
        seed in any::<u64>(),
        k in 1usize..5,
        d in 1usize..4,
        n in 3usize..7,
        b in any::<bool>(),
    ) {
        let segs = world(seed, 6 * k, d, n);
        let b = Bit::from(b);
        let l1 = combine_segments(segs.iter().map(Segment::sender_slice).collect()).unwrap();
        let claim = make_claim(b, &l1);
        prop_assert_eq!(claim.positions.len(), l1.len() / 3);
        let lists: Vec<ReceiverList> = (2..=n)
            .map(|p| {
                combine_segments(segs.iter().map(|s| s.receiver_slice(PartyId(p)).unwrap()).collect())
                    .unwrap()
            })
            .collect();
        let relayed: Vec<ProtocolMessage> = lists
            .iter()
            .map(|l| relay_step(Some(&ProtocolMessage::Claim(claim.clone())), l))
            .collect();
        for (i, l) in lists.iter().enumerate() {
            prop_assert!(check_claim(&claim, l));
            prop_assert_eq!(&relayed[i], &ProtocolMessage::Claim(claim.clone()));
            let mut inbox = Inbox::new((2..=n).map(PartyId));
            for (j, m) in relayed.iter().enumerate() {
                inbox.insert(PartyId(j + 2), m.clone()).unwrap();
            }
            prop_assert_eq!(decide(&inbox, l, DecideRule::Literal).unwrap(), Decision::Value(b));
        }
    }

    #[test]
    fn relayed_claim_keeps_self_in_h(seed in any::<u64>(), b in any::<bool>()) {
        let segs = world(seed, 12, 2, 4);
        let l1 = combine_segments(segs.iter().map(Segment::sender_slice).collect()).unwrap();
        let own = combine_segments(segs.iter().map(|s| s.receiver_slice(PartyId(3)).unwrap()).collect()).unwrap();
        let relayed = relay_step(Some(&ProtocolMessage::Claim(make_claim(Bit::from(b), &l1))), &own);
        let claim = relayed.claim().expect("honest claim is forwarded");
        prop_assert!(check_claim(claim, &own));
    }
}
