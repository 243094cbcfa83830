mod common;

use std::sync::atomic::{AtomicUsize, Ordering};

use common::*;
use fedmia::attack::{
    attack_feature, attacker_advantage, build_attack_dataset, build_attack_dataset_batchwise,
    build_attack_dataset_samplewise, evaluate_attack, evaluate_attack_detailed, read_attack_csv,
    train_attack_model, AttackDataset, AttackMode, AttackModel, AttackModelConfig, AttackRecord,
    MembershipLabel, PredictionOracle, RecordOrigin, Split, TargetModel,
};
use fedmia::dataset::{sample_shadow_datasets, LabeledDataset, ShadowDataset};
use fedmia::numerics::{evaluate, forward, init_seed, train, ModelParams, ModelSpec, Tensor, TrainConfig};
use fedmia::shadow::{shadow_seed, train_shadows, ShadowEnsemble};
use fedmia::Error;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn shadow_cfg(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 16,
        learning_rate: 0.1,
        seed,
    }
}

fn attack_cfg(seed: u64) -> AttackModelConfig {
    AttackModelConfig {
        train: TrainConfig {
            epochs: 60,
            batch_size: 32,
            learning_rate: 0.1,
            seed,
        },
        hidden: None,
    }
}

/// Ensemble of untrained models over noise data with the given split sizes.
fn ensemble(sizes: &[(usize, usize)], classes: usize, seed: u64) -> ShadowEnsemble {
    let spec = ModelSpec::new(3, vec![4], classes).unwrap();
    let datasets: Vec<ShadowDataset> = sizes
        .iter()
        .enumerate()
        .map(|(i, &(tr, te))| {
            let s = seed.wrapping_mul(31).wrapping_add(i as u64);
            ShadowDataset::from_splits(
                noise_dataset(tr, 3, classes, s),
                noise_dataset(te, 3, classes, s ^ 0xff),
            )
        })
        .collect();
    let models = (0..sizes.len())
        .map(|i| random_params(&[3, 4, classes], 2.0, seed + i as u64))
        .collect();
    ShadowEnsemble {
        models,
        datasets,
        spec,
    }
}

fn sorted_features(data: &AttackDataset) -> Vec<(Vec<u64>, MembershipLabel)> {
    let mut v: Vec<_> = data
        .records
        .iter()
        .map(|r| (r.feature.iter().map(|x| x.to_bits()).collect(), r.label))
        .collect();
    v.sort();
    v
}

#[test]
fn shadows_delegate_to_numerics_training() {
    let data = blobs(80, 3, 4, 0.3, 1);
    let spec = ModelSpec::new(4, vec![6], 3).unwrap();
    let set = ShadowDataset::from_splits(data.slice(0, 40), data.slice(40, 80));
    let cfg = shadow_cfg(5, 9);
    let ens = train_shadows(vec![set.clone()], &spec, &cfg).unwrap();
    let s = shadow_seed(9, 0);
    let init = ModelParams::init(&spec, init_seed(s)).unwrap();
    let direct = train(&init, &set.train, &TrainConfig { seed: s, ..cfg }).unwrap();
    assert!(bitwise_eq(&ens.models[0], &direct));

    let four = train_shadows(vec![set.clone(); 4], &spec, &cfg).unwrap();
    for i in 0..4 {
        for j in i + 1..4 {
            assert!(!bitwise_eq(&four.models[i], &four.models[j]));
        }
    }
    let again = train_shadows(vec![set.clone(); 4], &spec, &cfg).unwrap();
    assert!(four
        .models
        .iter()
        .zip(&again.models)
        .all(|(a, b)| bitwise_eq(a, b)));

    let empty = ShadowDataset::from_splits(data.slice(0, 0), data.slice(0, 10));
    assert!(matches!(
        train_shadows(vec![empty], &spec, &cfg),
        Err(Error::Input(_))
    ));
}

#[test]
fn overfit_shadows_fit_train_split_better() {
    let master = blobs(2000, 10, 32, 0.8, 3);
    let spec = ModelSpec::new(32, vec![64], 10).unwrap();
    let sets = sample_shadow_datasets(&master, 4, 1000, 0.5, 4).unwrap();
    let ens = train_shadows(sets, &spec, &shadow_cfg(60, 5)).unwrap();
    for (m, d) in ens.models.iter().zip(&ens.datasets) {
        let (train_acc, train_loss) = evaluate(m, &d.train).unwrap();
        let (test_acc, test_loss) = evaluate(m, &d.test).unwrap();
        assert!(train_loss < test_loss);
        assert!(train_acc > test_acc);
    }
}

#[test]
fn feature_composition() {
    let uniform = vec![0.1; 10];
    let f = attack_feature(&uniform, 3).unwrap();
    assert!(f[..10].iter().all(|&p| p == 0.1));
    assert!((f[10] - 10f64.ln()).abs() < 1e-12);
    assert_eq!(
        attack_feature(&[0.0, 1.0, 0.0], 1).unwrap(),
        vec![1.0, 0.0, 0.0, 0.0]
    );
    assert!(matches!(attack_feature(&[0.5, 0.5], 2), Err(Error::Input(_))));

    let mut r = rng(1);
    let raw: Vec<f64> = (0..7).map(|_| r.gen::<f64>()).collect();
    let s: f64 = raw.iter().sum();
    let row: Vec<f64> = raw.iter().map(|x| x / s).collect();
    let f = attack_feature(&row, 4).unwrap();
    let mut expect = row.clone();
    expect.sort_by(|a, b| b.partial_cmp(a).unwrap());
    assert_eq!(&f[..7], expect.as_slice());
    assert!((f[7] + row[4].ln()).abs() < 1e-12);
}

#[test]
fn record_counts_for_worked_examples() {
    let ens = ensemble(&[(100, 60); 3], 4, 1);
    let sw = build_attack_dataset_samplewise(&ens).unwrap();
    assert_eq!(sw.len(), 480);
    assert_eq!(
        (sw.count(MembershipLabel::In), sw.count(MembershipLabel::Out)),
        (300, 180)
    );
    let bw = build_attack_dataset_batchwise(&ens, 32).unwrap();
    assert_eq!(bw.len(), 18);
    let tiny = build_attack_dataset_samplewise(&ensemble(&[(1, 1)], 2, 2)).unwrap();
    assert_eq!(
        (tiny.count(MembershipLabel::In), tiny.count(MembershipLabel::Out)),
        (1, 1)
    );
    assert!(matches!(
        build_attack_dataset_batchwise(&ens, 0),
        Err(Error::Input(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cardinality_and_purity(
        sizes in prop::collection::vec((1usize..70, 1usize..70), 1..5),
        b in 1usize..80,
        seed in any::<u64>(),
    ) {
        let ens = ensemble(&sizes, 3, seed);
        let data = build_attack_dataset(&ens, AttackMode::BatchWise(b)).unwrap();
        let expect: usize = sizes.iter().map(|&(tr, te)| tr.div_ceil(b) + te.div_ceil(b)).sum();
        prop_assert_eq!(data.len(), expect);
        for rec in &data.records {
            let o = rec.origin;
            let (tr, te) = sizes[o.shadow];
            let split_len = if o.split == Split::Train { tr } else { te };
            prop_assert!(o.len >= 1 && o.start + o.len <= split_len);
            let label = if o.split == Split::Train { MembershipLabel::In } else { MembershipLabel::Out };
            prop_assert_eq!(rec.label, label);
        }
        let sw = build_attack_dataset(&ens, AttackMode::SampleWise).unwrap();
        prop_assert_eq!(sw.len(), sizes.iter().map(|&(tr, te)| tr + te).sum::<usize>());
    }
}

#[test]
fn unit_batches_reproduce_samplewise_records() {
    let ens = ensemble(&[(13, 9), (7, 21)], 4, 5);
    let sw = build_attack_dataset_samplewise(&ens).unwrap();
    let b1 = build_attack_dataset_batchwise(&ens, 1).unwrap();
    assert_eq!(sorted_features(&sw), sorted_features(&b1));
}

#[test]
fn oversized_batch_gives_split_mean() {
    let ens = ensemble(&[(10, 6)], 3, 8);
    let d = build_attack_dataset_batchwise(&ens, 50).unwrap();
    assert_eq!(d.len(), 2);
    for (split, label) in [
        (&ens.datasets[0].train, MembershipLabel::In),
        (&ens.datasets[0].test, MembershipLabel::Out),
    ] {
        // oracle: mean of independently computed per-row features
        let probs = forward(&ens.models[0], split.features()).unwrap();
        let mut mean = vec![0.0; 4];
        for (row, &l) in probs.iter_rows().zip(split.labels()) {
            let mut sorted = row.to_vec();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            sorted.push(-row[l].ln());
            for (m, x) in mean.iter_mut().zip(sorted) {
                *m += x / split.len() as f64;
            }
        }
        let rec = d.records.iter().find(|r| r.label == label).unwrap();
        for (a, b) in rec.feature.iter().zip(&mean) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn shadow_order_does_not_change_the_record_multiset() {
    let ens = ensemble(&[(11, 5), (8, 8), (3, 12), (20, 1)], 3, 4);
    let mut order: Vec<usize> = (0..4).collect();
    order.shuffle(&mut rng(3));
    let shuffled = ShadowEnsemble {
        models: order.iter().map(|&i| ens.models[i].clone()).collect(),
        datasets: order.iter().map(|&i| ens.datasets[i].clone()).collect(),
        spec: ens.spec.clone(),
    };
    for mode in [AttackMode::SampleWise, AttackMode::BatchWise(4)] {
        let a = build_attack_dataset(&ens, mode).unwrap();
        let b = build_attack_dataset(&shuffled, mode).unwrap();
        assert_eq!(sorted_features(&a), sorted_features(&b));
    }
}

fn record(feature: Vec<f64>, label: MembershipLabel) -> AttackRecord {
    AttackRecord {
        feature,
        label,
        origin: RecordOrigin {
            shadow: 0,
            split: if label == MembershipLabel::In {
                Split::Train
            } else {
                Split::Test
            },
            start: 0,
            len: 1,
        },
    }
}

fn accuracy_on(model: &AttackModel, records: &[AttackRecord]) -> f64 {
    records
        .iter()
        .filter(|r| model.predict(&r.feature).unwrap() == r.label)
        .count() as f64
        / records.len() as f64
}

#[test]
fn separable_records_are_learned_and_training_is_deterministic() {
    let mut r = rng(2);
    let records: Vec<AttackRecord> = (0..400)
        .map(|i| {
            let label = if i % 2 == 0 {
                MembershipLabel::In
            } else {
                MembershipLabel::Out
            };
            let mut f: Vec<f64> = (0..3).map(|_| r.gen::<f64>()).collect();
            f.push(if label == MembershipLabel::In { 0.0 } else { 10.0 });
            record(f, label)
        })
        .collect();
    let data = AttackDataset {
        records,
        mode: AttackMode::SampleWise,
    };
    let model = train_attack_model(&data, &attack_cfg(1)).unwrap();
    assert!(accuracy_on(&model, &data.records) >= 0.95);
    assert_eq!(model, train_attack_model(&data, &attack_cfg(1)).unwrap());

    let mlp = train_attack_model(
        &data,
        &AttackModelConfig {
            hidden: Some(8),
            ..attack_cfg(1)
        },
    )
    .unwrap();
    assert!(accuracy_on(&mlp, &data.records) >= 0.95);
    for rec in &data.records[..20] {
        let s = mlp.score(&rec.feature).unwrap();
        assert!(s > 0.0 && s < 1.0);
    }
}

#[test]
fn shuffled_labels_give_chance_on_held_out_records() {
    let master = blobs(1600, 10, 16, 0.6, 6);
    let spec = ModelSpec::new(16, vec![32], 10).unwrap();
    let sets = sample_shadow_datasets(&master, 4, 800, 0.5, 2).unwrap();
    let ens = train_shadows(sets, &spec, &shadow_cfg(40, 3)).unwrap();
    let mut data = build_attack_dataset_samplewise(&ens).unwrap();
    data.records.shuffle(&mut rng(7));
    let held_out = data.records.split_off(data.len() / 2);
    let mut labels: Vec<MembershipLabel> = data.records.iter().map(|r| r.label).collect();
    labels.shuffle(&mut rng(8));
    for (rec, l) in data.records.iter_mut().zip(labels) {
        rec.label = l;
    }
    let model = train_attack_model(&data, &attack_cfg(4)).unwrap();
    let acc = accuracy_on(&model, &held_out);
    assert!((acc - 0.5).abs() <= 0.05, "accuracy {acc}");
}

/// Oracle that counts queries and only exposes probabilities.
struct CountingOracle {
    inner: TargetModel,
    queries: AtomicUsize,
}

impl PredictionOracle for CountingOracle {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    fn class_count(&self) -> usize {
        self.inner.class_count()
    }

    fn predict(&self, batch: &Tensor) -> fedmia::Result<Tensor> {
        self.queries.fetch_add(batch.rows(), Ordering::Relaxed);
        self.inner.predict(batch)
    }
}

fn oracle(seed: u64) -> CountingOracle {
    CountingOracle {
        inner: TargetModel::new(random_params(&[3, 4, 3], 1.0, seed)).unwrap(),
        queries: AtomicUsize::new(0),
    }
}

#[test]
fn zero_model_scores_exactly_half_on_balanced_pools() {
    let target = oracle(1);
    let model = AttackModel::zeros(4);
    let members = noise_dataset(37, 3, 3, 1);
    let nonmembers = noise_dataset(50, 3, 3, 2);
    for mode in [AttackMode::SampleWise, AttackMode::BatchWise(8)] {
        let e = evaluate_attack_detailed(&model, &target, &members, &nonmembers, mode).unwrap();
        assert_eq!(e.accuracy, 0.5);
        assert_eq!(e.per_label, mode.record_count(37));
    }
    assert_eq!(target.queries.load(Ordering::Relaxed), 2 * (37 + 50));
}

#[test]
fn identical_pools_are_indistinguishable() {
    let target = oracle(2);
    let pool = noise_dataset(64, 3, 3, 4);
    let mut r = rng(5);
    for _ in 0..20 {
        let model = AttackModel {
            classifier: fedmia::attack::AttackClassifier::Logistic {
                weights: (0..4).map(|_| r.gen_range(-3.0..3.0)).collect(),
                bias: r.gen_range(-1.0..1.0),
            },
            feature_mean: vec![0.0; 4],
            feature_scale: vec![1.0; 4],
        };
        for mode in [AttackMode::SampleWise, AttackMode::BatchWise(5)] {
            assert!(evaluate_attack(&model, &target, &pool, &pool, mode).unwrap() <= 0.5 + 1e-12);
        }
    }
}

#[test]
fn evaluation_input_errors() {
    let target = oracle(3);
    let model = AttackModel::zeros(4);
    let pool = noise_dataset(8, 3, 3, 1);
    let empty = LabeledDataset::new(Tensor::zeros(0, 3), vec![], 3).unwrap();
    assert!(matches!(
        evaluate_attack(&model, &target, &empty, &pool, AttackMode::SampleWise),
        Err(Error::Input(_))
    ));
    let wide = noise_dataset(8, 5, 3, 1);
    assert!(matches!(
        evaluate_attack(&model, &target, &wide, &pool, AttackMode::SampleWise),
        Err(Error::Shape(_))
    ));
}

#[test]
fn advantage_values_and_antisymmetry() {
    assert!((attacker_advantage(0.856, 0.833).unwrap() - 0.023).abs() < 1e-12);
    assert!((attacker_advantage(0.846, 0.838).unwrap() - 0.008).abs() < 1e-12);
    assert!((attacker_advantage(0.753, 0.786).unwrap() + 0.033).abs() < 1e-12);
    assert!(matches!(attacker_advantage(1.2, 0.5), Err(Error::Input(_))));
    assert!(matches!(attacker_advantage(0.5, -0.1), Err(Error::Input(_))));
}

proptest! {
    #[test]
    fn advantage_is_antisymmetric(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        prop_assert_eq!(attacker_advantage(a, b).unwrap(), -attacker_advantage(b, a).unwrap());
    }
}

#[test]
fn attack_dataset_csv_round_trip() {
    let data = build_attack_dataset_batchwise(&ensemble(&[(9, 4)], 3, 2), 4).unwrap();
    let mut buf = Vec::new();
    data.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert_eq!(text.lines().next().unwrap(), "f0,f1,f2,f3,label");
    let back = read_attack_csv(buf.as_slice()).unwrap();
    assert_eq!(back.len(), data.len());
    for ((f, l), rec) in back.iter().zip(&data.records) {
        assert_eq!(*l, rec.label);
        for (a, b) in f.iter().zip(&rec.feature) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
}
