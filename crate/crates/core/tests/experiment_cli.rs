use std::fs;
use std::path::Path;
use std::process::Command;

use fedmia::attack::AttackMode;
use fedmia::experiment::{
    read_results, results_to_string, run_experiment, summarize, ExperimentConfig, GroupKey, GroupValue,
    TrainingMode,
};
use fedmia::Error;

const SMALL: &str = "\
synthetic_dim = 8
target_train_size = 120
nonmember_size = 120
shadow_master_size = 240
hidden = 16
rounds = 3
local_epochs = 2
shadow_count = 2
attack_epochs = 10
";

fn small(extra: &str) -> ExperimentConfig {
    ExperimentConfig::parse(&format!("{SMALL}{extra}"), Path::new(".")).unwrap()
}

#[test]
fn two_mode_config_gives_two_rows_with_advantage() {
    let cfg = small("seeds = 3\nattack_modes = samplewise, 32\n");
    let rows = run_experiment(&cfg).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].attack_mode, AttackMode::SampleWise);
    assert_eq!(rows[0].advantage, None);
    assert_eq!(rows[1].attack_mode, AttackMode::BatchWise(32));
    assert_eq!(
        rows[1].advantage,
        Some(rows[1].attack_accuracy - rows[0].attack_accuracy)
    );
}

#[test]
fn sweep_layout_and_advantage_consistency() {
    let cfg = small(
        "seeds = 1, 2\ntraining_modes = federated:3, centralized\nattack_modes = 64, 8, samplewise, 16, 32\n",
    );
    let rows = run_experiment(&cfg).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 5);
    let mut keys: Vec<_> = rows
        .iter()
        .map(|r| (r.seed, r.training_mode, r.attack_mode))
        .collect();
    let sorted = {
        let mut k = keys.clone();
        k.sort();
        k
    };
    assert_eq!(keys, sorted);
    keys.dedup();
    assert_eq!(keys.len(), rows.len());
    for r in &rows {
        assert!((0.0..=1.0).contains(&r.attack_accuracy));
        let base = rows
            .iter()
            .find(|s| {
                s.attack_mode == AttackMode::SampleWise
                    && s.seed == r.seed
                    && s.training_mode == r.training_mode
            })
            .unwrap();
        match r.attack_mode {
            AttackMode::SampleWise => assert!(r.advantage.is_none()),
            AttackMode::BatchWise(_) => {
                assert!((r.advantage.unwrap() - (r.attack_accuracy - base.attack_accuracy)).abs() < 1e-12)
            }
        }
    }
    let per_seed = rows
        .iter()
        .filter(|r| r.seed == 1 && r.training_mode == TrainingMode::Centralized)
        .count();
    assert_eq!(per_seed, 5);
}

#[test]
fn identical_configs_give_identical_bytes() {
    let cfg =
        small("seeds = 4, 5\ntraining_modes = centralized, federated:2\nattack_modes = samplewise, 16\n");
    let a = results_to_string(&run_experiment(&cfg).unwrap()).unwrap();
    let b = results_to_string(&run_experiment(&cfg).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn invalid_config_fails_before_training() {
    let mut cfg = small("");
    cfg.seeds.clear();
    assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
    assert!(matches!(
        ExperimentConfig::parse("no_such_key = 1\n", Path::new(".")),
        Err(Error::Config(_))
    ));
}

#[test]
fn summary_matches_recomputation_from_csv() {
    let cfg = small("seeds = 1, 2, 3\ntraining_modes = centralized, federated:2, federated:3\nattack_modes = samplewise, 16\n");
    let csv = results_to_string(&run_experiment(&cfg).unwrap()).unwrap();
    let rows = read_results(csv.as_bytes()).unwrap();
    let summary = summarize(&rows, &[GroupKey::NClients]).unwrap();
    assert_eq!(summary.len(), 3);

    // oracle: parse the raw CSV columns by hand
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (nc, acc) = (col("n_clients"), col("attack_accuracy"));
    for (s, n) in summary.iter().zip([1u64, 2, 3]) {
        assert_eq!(s.key, vec![GroupValue::Int(n)]);
        let vals: Vec<f64> = csv
            .lines()
            .skip(1)
            .map(|l| l.split(',').collect::<Vec<_>>())
            .filter(|f| f[nc] == n.to_string())
            .map(|f| f[acc].parse().unwrap())
            .collect();
        assert_eq!(s.count, vals.len());
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
        assert!((s.accuracy_mean - mean).abs() < 1e-12);
        assert!((s.accuracy_std - var.sqrt()).abs() < 1e-12);
        assert!(s.advantage_mean.is_some());
    }
}

fn fedmia(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_fedmia"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn cli_round_trip_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.conf");
    fs::write(
        &cfg_path,
        format!("{SMALL}seeds = 1, 2\nattack_modes = samplewise, 8\n"),
    )
    .unwrap();
    let cfg = cfg_path.to_str().unwrap();
    let out_csv = dir.path().join("results.csv");

    let sweep = fedmia(&[
        "sweep",
        "--config",
        cfg,
        "--seed",
        "7",
        "--out",
        out_csv.to_str().unwrap(),
    ]);
    assert!(
        sweep.status.success(),
        "{}",
        String::from_utf8_lossy(&sweep.stderr)
    );
    let rows = read_results(fs::File::open(&out_csv).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.seed == 7));

    let ckpt = dir.path().join("target.ckpt");
    let rounds = dir.path().join("rounds");
    let train = fedmia(&[
        "train",
        "--config",
        cfg,
        "--mode",
        "federated",
        "--clients",
        "2",
        "--out",
        ckpt.to_str().unwrap(),
        "--checkpoint-dir",
        rounds.to_str().unwrap(),
    ]);
    assert!(
        train.status.success(),
        "{}",
        String::from_utf8_lossy(&train.stderr)
    );
    assert_eq!(fs::read_dir(&rounds).unwrap().count(), 3);
    assert_eq!(
        fs::read(&ckpt).unwrap(),
        fs::read(rounds.join("round_0003.ckpt")).unwrap()
    );

    let attack = fedmia(&[
        "attack",
        "--config",
        cfg,
        "--mode",
        "federated",
        "--clients",
        "2",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--batch-size",
        "8",
    ]);
    assert!(
        attack.status.success(),
        "{}",
        String::from_utf8_lossy(&attack.stderr)
    );
    let attack_rows = read_results(attack.stdout.as_slice()).unwrap();
    assert_eq!(attack_rows.len(), 1);
    assert_eq!(attack_rows[0].training_mode, TrainingMode::Federated(2));

    let summary = fedmia(&["summarize", out_csv.to_str().unwrap(), "--by", "attack_mode"]);
    assert!(summary.status.success());
    let text = String::from_utf8(summary.stdout).unwrap();
    assert!(text.starts_with("attack_mode,count,attack_accuracy_mean"));
    assert_eq!(text.lines().count(), 3);

    let bad_cfg = dir.path().join("bad.conf");
    fs::write(&bad_cfg, "colour = blue\n").unwrap();
    assert_eq!(
        fedmia(&["sweep", "--config", bad_cfg.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        fedmia(&["sweep", "--config", cfg, "--mode", "federated"])
            .status
            .code(),
        Some(2)
    );

    let bad_csv = dir.path().join("bad.csv");
    fs::write(&bad_csv, "a,b\n1,2\n").unwrap();
    assert_eq!(
        fedmia(&["summarize", bad_csv.to_str().unwrap()]).status.code(),
        Some(3)
    );
    let bad_ckpt = dir.path().join("bad.ckpt");
    fs::write(&bad_ckpt, b"FMCK").unwrap();
    let code = fedmia(&[
        "attack",
        "--config",
        cfg,
        "--checkpoint",
        bad_ckpt.to_str().unwrap(),
    ])
    .status
    .code();
    assert_eq!(code, Some(3));

    let hot = dir.path().join("hot.conf");
    fs::write(&hot, format!("{SMALL}seeds = 1\nlearning_rate = 1e300\n")).unwrap();
    assert_eq!(
        fedmia(&["sweep", "--config", hot.to_str().unwrap()])
            .status
            .code(),
        Some(4)
    );
}
