use gmdalign_core::learners::{build_constraints, NegativeSamplingConfig};
use gmdalign_core::metric::MetricKind;
use gmdalign_core::pipeline::{align, evaluate, AlignConfig, MatchStrategy};
use gmdalign_core::synth::{generate, SynthConfig, Transform};
use gmdalign_core::weighting::WeightingScheme;
use gmdalign_core::{train_itml, train_sdml, ItmlConfig, SdmlConfig};

fn noisy() -> SynthConfig {
    SynthConfig {
        docs: 80,
        dim: 12,
        noise: 2.0,
        transform: Transform::Affine,
        seed: 11,
        pairs: 2000,
        ..Default::default()
    }
}

fn recall(corpus: &gmdalign_core::synth::SynthCorpus, metric: &MetricKind, cfg: &AlignConfig) -> f64 {
    let r = align(&corpus.src_docs, &corpus.src_emb, &corpus.tgt_docs, &corpus.tgt_emb, metric, cfg).unwrap();
    evaluate(&r.matched, &corpus.gold).unwrap().recall
}

#[test]
fn learned_metrics_do_not_lose_to_euclidean() {
    let corpus = generate(&noisy()).unwrap();
    let cfg = AlignConfig::default();
    let neg = NegativeSamplingConfig { ratio: 1.0, seed: 1 };
    let cs = build_constraints(&corpus.pairs, &corpus.src_emb, &corpus.tgt_emb, &neg).unwrap();
    let euclid = recall(&corpus, &MetricKind::Euclidean, &cfg);
    let itml = train_itml(&cs, &ItmlConfig::default()).unwrap();
    let sdml = train_sdml(&cs, &SdmlConfig::default()).unwrap();
    let ri = recall(&corpus, &MetricKind::Mahalanobis(itml.metric), &cfg);
    let rs = recall(&corpus, &MetricKind::Mahalanobis(sdml.metric), &cfg);
    assert!(ri >= euclid, "itml {ri} < euclidean {euclid}");
    assert!(rs >= euclid, "sdml {rs} < euclidean {euclid}");
}

#[test]
fn every_scheme_and_strategy_runs() {
    let corpus = generate(&SynthConfig {
        docs: 30,
        dim: 6,
        pairs: 100,
        days: 3,
        ..Default::default()
    })
    .unwrap();
    for weighting in WeightingScheme::ALL {
        for matching in MatchStrategy::ALL {
            for date_filter in [false, true] {
                let cfg = AlignConfig {
                    weighting,
                    matching,
                    date_filter,
                };
                for metric in [MetricKind::Euclidean, MetricKind::CosineDistance] {
                    let r = recall(&corpus, &metric, &cfg);
                    assert!(r > 0.9, "{weighting} {matching} {date_filter} {}: {r}", metric.name());
                }
            }
        }
    }
}
