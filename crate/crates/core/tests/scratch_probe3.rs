// temporary profiling, removed before finishing
use diffnet_core::diffusion::*;
use diffnet_core::graph::*;
use diffnet_core::network::*;
use std::time::Instant;

#[test]
#[ignore]
fn probe_components() {
    let t = sample_gw_tree(
        &OffspringLaw::Deterministic { children: 3 },
        &OffspringLaw::Deterministic { children: 2 },
        13,
        0,
    )
    .unwrap();
    let n = t.graph.vertex_count();
    println!("tree size {n}");
    let net = MarkedNetwork::unit_weights(t.graph.clone(), vec![1.0; n], vec![0.0; n]).unwrap();
    let ids: Vec<usize> = (0..n).collect();

    for (label, drift) in [
        ("full kuramoto eps=0.05", DriftSpec::kuramoto_unnormalized(4.0, 0.05)),
        ("kuramoto eps=0 (no noise)", DriftSpec::kuramoto_unnormalized(4.0, 0.0)),
        ("phi=0 eps=0.05 (noise only)", DriftSpec { phi: PairPhi::Zero, ..DriftSpec::kuramoto_unnormalized(4.0, 0.05) }),
        ("phi=0 eps=0 (bare loop)", DriftSpec { phi: PairPhi::Zero, ..DriftSpec::kuramoto_unnormalized(4.0, 0.0) }),
    ] {
        let noise = NoiseSource::new(7);
        let start = Instant::now();
        let mut acc = 0.0f64;
        simulate_observed(&net, &ids, &drift, 100.0, 0.01, &noise, |_, theta| {
            acc += theta[0];
        })
        .unwrap();
        println!("{label}: {:?} (acc {acc:.3})", start.elapsed());
    }
}
