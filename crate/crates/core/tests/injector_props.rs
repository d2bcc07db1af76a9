use eagle_core::hetgraph::NodeTypeId;
use eagle_core::injector::{
    generate_synthetic, inject_contextual, read_labels, verify_injection, write_labels, SynthSchema,
};
use proptest::prelude::*;

fn small_schema() -> SynthSchema {
    let mut s = SynthSchema::dblp().with_node_scale(0.2);
    s.attr_dim = 6;
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn injections_replay(gseed in any::<u64>(), seed in any::<u64>(), frac in 0.0f64..0.5, k in 1usize..80) {
        let schema = small_schema();
        let g = generate_synthetic(&schema, gseed).unwrap();
        let t = g.schema().node_type(&schema.scored_type).unwrap();
        let n = g.node_count(t);
        let m = (frac * n as f64) as usize;
        let (inj, rec) = inject_contextual(&g, t, m, k, seed).unwrap();
        verify_injection(&g, &inj, &rec).unwrap();

        prop_assert_eq!(rec.anomalies.len(), m);
        for e in g.schema().edge_type_ids() {
            prop_assert_eq!(g.edges(e), inj.edges(e));
        }
        let (x0, x1) = (g.attributes(t), inj.attributes(t));
        let changed: Vec<usize> = (0..n).filter(|&r| x0.row(r) != x1.row(r)).collect();
        // a copy can coincide with the original row, never the other way round
        prop_assert!(changed.iter().all(|r| rec.anomalies.contains(r)));
        for (a, &src) in rec.anomalies.iter().zip(&rec.sources) {
            prop_assert_eq!(x1.row(*a), x0.row(src));
        }
        prop_assert_eq!(rec.labels(n).iter().filter(|&&y| y == 1).count(), m);
    }

    #[test]
    fn tampered_sources_fail_replay(seed in any::<u64>()) {
        let g = generate_synthetic(&small_schema(), 3).unwrap();
        let t = NodeTypeId(1);
        let (inj, mut rec) = inject_contextual(&g, t, 4, 10, seed).unwrap();
        let wrong = rec.candidates[0].iter().copied().find(|&c| c != rec.sources[0]);
        prop_assume!(wrong.is_some());
        rec.sources[0] = wrong.unwrap();
        prop_assert!(verify_injection(&g, &inj, &rec).is_err());
    }
}

#[test]
fn labels_round_trip_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("labels.csv");
    let y = vec![0, 1, 1, 0, 0, 1];
    write_labels(&path, &y).unwrap();
    assert_eq!(read_labels(&path).unwrap(), y);
}
