use std::collections::HashSet;
use std::sync::Arc;

use lazyppl::inference::acceptance_probability;
use lazyppl::prob::{categorical, iid, memoize_nat, normal, uniform, Prob};
use lazyppl::processes::{poisson_pp, stick_breaking};
use lazyppl::tree::{base_value, NodePath, OverrideStore, ProposalContext, TreeHandle};
use lazyppl::{run_weighted, LogWeight, Meas};
use proptest::prelude::*;

#[derive(Clone, Debug)]
enum Op {
    Normal,
    Stream(Vec<usize>),
    Memo(Vec<u64>),
    Nested,
    Unused,
    Score(f64),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        Just(Op::Normal),
        prop::collection::vec(0usize..20, 0..5).prop_map(Op::Stream),
        prop::collection::vec(0u64..20, 0..5).prop_map(Op::Memo),
        Just(Op::Nested),
        Just(Op::Unused),
        (0.01f64..10.0).prop_map(Op::Score),
    ]
}

/// A probability program built from `ops`; scores are ignored.
fn program(ops: Vec<Op>) -> Prob<f64> {
    Prob::block(move |b| {
        let mut acc = 0.0;
        for op in &ops {
            match op {
                Op::Normal => acc += b.draw(&normal(0.0, 1.0))?,
                Op::Stream(idx) => {
                    let s = b.draw(&iid(&uniform()))?;
                    for &i in idx {
                        acc += s.get(i)?;
                    }
                }
                Op::Memo(args) => {
                    let g = b.draw(&memoize_nat(|n| normal(n as f64, 1.0)))?;
                    for &a in args {
                        acc += g.call(a as i64)?;
                    }
                }
                Op::Nested => acc += b.draw(&uniform().bind(|u| uniform().map(move |v| u * v)))?,
                Op::Unused => {
                    b.draw(&normal(5.0, 1.0).deferred())?;
                }
                Op::Score(_) => {}
            }
        }
        Ok(acc)
    })
}

fn measure(ops: Vec<Op>) -> Meas<f64> {
    Meas::block(move |b| {
        let mut acc = 0.0;
        for op in &ops {
            match op {
                Op::Score(r) => b.score(*r)?,
                other => acc += b.sample(&program(vec![other.clone()]))?,
            }
        }
        Ok(acc)
    })
}

fn reads_of(h: &TreeHandle) -> HashSet<NodePath> {
    h.access_snapshot().paths().cloned().collect()
}

proptest! {
    #[test]
    fn encoding_is_injective(a in prop::collection::vec(0u64..300, 0..6), b in prop::collection::vec(0u64..300, 0..6)) {
        let (pa, pb) = (NodePath::new(a.clone()), NodePath::new(b.clone()));
        prop_assert_eq!(pa.encode() == pb.encode(), a == b);
        prop_assert_eq!(pa.cmp(&pb), a.cmp(&b));
    }

    #[test]
    fn text_form_round_trips(a in prop::collection::vec(any::<u64>(), 0..6)) {
        let p = NodePath::new(a);
        let back: NodePath = p.to_string().parse().unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn base_values_in_unit_interval(seed in any::<u64>(), a in prop::collection::vec(any::<u64>(), 0..6)) {
        let p = NodePath::new(a);
        let v = base_value(seed, &p);
        prop_assert!((0.0..1.0).contains(&v));
        prop_assert_eq!(v.to_bits(), base_value(seed, &p).to_bits());
    }

    #[test]
    fn split_and_child_arithmetic(a in prop::collection::vec(0u64..100, 0..4), steps in 0usize..6, i in 0u64..50) {
        let mut h = TreeHandle::fresh(1);
        for &x in &a {
            h = h.child(x);
        }
        for _ in 0..steps {
            h = h.split().1;
        }
        let (first, second) = h.split();
        prop_assert_eq!(first.path(), &h.path().child(steps as u64));
        prop_assert_eq!(first.offset(), 0);
        prop_assert_eq!(second.path(), h.path());
        prop_assert_eq!(second.offset(), steps as u64 + 1);
        prop_assert_eq!(h.child(0).path().clone(), first.path().clone());
        prop_assert_eq!(h.child(i).path().clone(), h.path().child(steps as u64 + i));
    }

    #[test]
    fn split_components_read_disjoint_sites(
        left in prop::collection::vec(op(), 0..6),
        right in prop::collection::vec(op(), 0..6),
        seed in any::<u64>(),
    ) {
        let h = TreeHandle::fresh(seed);
        let (h1, h2) = h.split();
        program(left).run(&h1).unwrap();
        let after_left = reads_of(&h);
        program(right).run(&h2).unwrap();
        let all = reads_of(&h);
        let right_reads: HashSet<_> = all.difference(&after_left).cloned().collect();
        prop_assert_eq!(after_left.len() + right_reads.len(), all.len());
        for p in &after_left {
            prop_assert!(h1.path().is_prefix_of(p));
        }
        for p in &right_reads {
            prop_assert!(!h1.path().is_prefix_of(p));
        }
    }

    #[test]
    fn runs_are_deterministic(ops in prop::collection::vec(op(), 0..8), seed in any::<u64>()) {
        let m = measure(ops);
        let a = run_weighted(&m, seed, Arc::new(OverrideStore::new()), ProposalContext::None).unwrap();
        let b = run_weighted(&m, seed, Arc::new(OverrideStore::new()), ProposalContext::None).unwrap();
        prop_assert_eq!(a.result.to_bits(), b.result.to_bits());
        prop_assert_eq!(a.log_weight, b.log_weight);
        prop_assert_eq!(a.access.reads(), b.access.reads());
    }

    #[test]
    fn replay_from_access_log(ops in prop::collection::vec(op(), 0..8), seed in any::<u64>(), other in any::<u64>()) {
        // every read overridden, so the base seed no longer matters
        let m = measure(ops);
        let a = run_weighted(&m, seed, Arc::new(OverrideStore::new()), ProposalContext::None).unwrap();
        let store = Arc::new(OverrideStore::from_log(&a.access));
        let b = run_weighted(&m, other, store, ProposalContext::None).unwrap();
        prop_assert_eq!(a.result.to_bits(), b.result.to_bits());
        prop_assert_eq!(a.access.len(), b.access.len());
    }

    #[test]
    fn unused_draws_read_nothing(ops in prop::collection::vec(op(), 0..8), seed in any::<u64>()) {
        let with: Vec<Op> = ops.iter().cloned().flat_map(|o| [o, Op::Unused]).collect();
        let h0 = TreeHandle::fresh(seed);
        program(ops).run(&h0).unwrap();
        let h1 = TreeHandle::fresh(seed);
        program(with).run(&h1).unwrap();
        prop_assert_eq!(h0.reads_so_far(), h1.reads_so_far());
    }

    #[test]
    fn log_weight_is_ordered_sum(scores in prop::collection::vec(0.0f64..20.0, 0..20), seed in any::<u64>()) {
        let ops: Vec<Op> = scores.iter().map(|&s| Op::Score(s)).collect();
        let expected = scores.iter().fold(0.0, |acc, s| acc + s.ln());
        let rec = run_weighted(&measure(ops), seed, Arc::new(OverrideStore::new()), ProposalContext::None).unwrap();
        if scores.contains(&0.0) {
            prop_assert!(rec.log_weight.is_zero());
        } else {
            prop_assert!((rec.log_weight.ln() - expected).abs() <= 1e-12);
        }
    }

    #[test]
    fn zero_weight_absorbs(x in -1e300f64..1e300) {
        let w = LogWeight::from_ln(x).unwrap();
        prop_assert!((w + LogWeight::ZERO).is_zero());
        prop_assert!((LogWeight::ZERO + w).is_zero());
        prop_assert!((LogWeight::ZERO + LogWeight::from_ln(f64::INFINITY).unwrap()).is_zero());
    }

    #[test]
    fn acceptance_probability_is_a_probability(cur in -1e3f64..1e3, cand in -1e3f64..1e3, extra in -5.0f64..5.0) {
        let (c, d) = (LogWeight::from_ln(cur).unwrap(), LogWeight::from_ln(cand).unwrap());
        let a = acceptance_probability(c, d, cand - cur + extra);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn stick_partial_sums_bounded(alpha in 0.01f64..20.0, seed in any::<u64>()) {
        let vs = stick_breaking(alpha).sample_seeded(seed).unwrap();
        let mut last = 0.0;
        for n in 0..300 {
            let s = vs.partial_sum(n).unwrap();
            prop_assert!(vs.get(n).unwrap() >= 0.0);
            prop_assert!(s <= 1.0 && s >= last);
            last = s;
        }
    }

    #[test]
    fn poisson_points_increase(rate in 0.01f64..10.0, seed in any::<u64>()) {
        let xs = poisson_pp(rate).sample_seeded(seed).unwrap();
        prop_assert_eq!(xs.get(0).unwrap(), 0.0);
        let v = xs.stream().take(60).unwrap();
        prop_assert!(v.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn memo_repeats_and_categorical_in_range(seed in any::<u64>(), args in prop::collection::vec(0i64..1000, 1..10), ws in prop::collection::vec(0.0f64..5.0, 1..8)) {
        let g = memoize_nat(|_| uniform()).sample_seeded(seed).unwrap();
        for &a in &args {
            prop_assert_eq!(g.call(a).unwrap().to_bits(), g.call(a).unwrap().to_bits());
        }
        if ws.iter().sum::<f64>() > 0.0 {
            let k = categorical(ws.clone()).sample_seeded(seed).unwrap();
            prop_assert!(k < ws.len() && ws[k] > 0.0);
        }
    }
}
