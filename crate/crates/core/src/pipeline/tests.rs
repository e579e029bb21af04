use std::collections::BTreeMap;
use std::path::Path;

use super::*;
use crate::distortion::DistortionKind;
use crate::image::ImageBuf;
use crate::metrics::Mapping;
use crate::sim::{aggregate_ppo, aggregate_sac, aggregate_tdmpc2, RewardParams, Task};

fn small_opts(seed: u64) -> GenerateOptions {
    GenerateOptions {
        scenes: 2,
        kinds: vec![DistortionKind::GaussianBlur, DistortionKind::WhiteNoise],
        seed,
        ..Default::default()
    }
}

fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for sub in ["", "ref", "dist"] {
        let d = dir.join(sub);
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_file() {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn generated_dataset_properties() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let m = generate(&small_opts(3), dir).unwrap();

    assert_eq!(m.records.len(), 2 * 2 * 2 * 5);
    for task in [Task::Push, Task::Pick] {
        let d: Vec<f64> = m.records.iter().filter(|r| r.task == task).map(|r| r.dmos).collect();
        assert!(d.iter().all(|v| (0.0..=5.0).contains(v)));
        assert_eq!(d.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
        assert_eq!(d.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 5.0);
    }
    for r in &m.records {
        assert!((0.0..=5.0).contains(&r.dmos_all));
        let img = ImageBuf::read_png(&dir.join(&r.dist_path)).unwrap();
        assert_eq!((img.height(), img.width()), (r.height, r.width));
        assert!(dir.join(&r.ref_path).is_file());
    }

    // Normalisation keeps the raw ordering within each task.
    for task in [Task::Push, Task::Pick] {
        let rs: Vec<_> = m.records.iter().filter(|r| r.task == task).collect();
        for a in &rs {
            for b in &rs {
                if a.task_score < b.task_score {
                    assert!(a.dmos <= b.dmos, "{} vs {}", a.id, b.id);
                }
            }
        }
    }

    // Cells shared across tasks carry one pooled score.
    let mut pooled: BTreeMap<(usize, DistortionKind, u8), Vec<f64>> = BTreeMap::new();
    for r in &m.records {
        pooled.entry((r.scene, r.spec.kind, r.spec.level)).or_default().push(r.dmos_all);
    }
    assert!(pooled.values().all(|v| v.len() == 2 && v[0] == v[1]));

    // Manifest round trip.
    let (loaded, loaded_dir) = Manifest::load(dir).unwrap();
    assert_eq!(loaded, m);
    assert_eq!(loaded_dir, dir);
    assert_eq!(loaded.to_canonical(), std::fs::read_to_string(dir.join(MANIFEST_FILE)).unwrap());

    // Replaying a record reproduces its raw agent scores, and the
    // aggregator identities hold on its trace.
    let r = &m.records[7];
    let ep = replay_episode(&m.config, r).unwrap();
    assert_eq!(r6(ep.j_ppo), r.agent_scores.ppo);
    assert_eq!(r6(ep.j_sac), r.agent_scores.sac);
    assert_eq!(r6(ep.j_tdmpc2), r.agent_scores.tdmpc2);
    let base = m.config.sim.reward;
    let ppo = aggregate_ppo(&ep.trace).unwrap();
    assert_eq!(aggregate_sac(&ep.trace, &RewardParams { gamma: 1.0, alpha: 0.0, ..base }).unwrap(), ppo);
    assert_eq!(aggregate_tdmpc2(&ep.trace, &RewardParams { lambda: 0.0, ..base }).unwrap(), ppo);

    // Default split: each (task, kind) stratum of 10 gives 2 val.
    let info = m.split.clone().unwrap();
    assert!(info.stratified);
    assert_eq!((info.train, info.val), (32, 8));
    let mut val_per: BTreeMap<String, usize> = BTreeMap::new();
    for r in m.records_in(Some(Split::Val)) {
        *val_per.entry(format!("{}/{}", r.task, r.spec.kind)).or_default() += 1;
    }
    assert_eq!(val_per.len(), 4);
    assert!(val_per.values().all(|&n| n == 2));
    assert_eq!(info.hash, split_hash(&m));

    let mut again = m.clone();
    assert_eq!(split(&mut again, m.config.seed).unwrap(), info);
    let mut other = m.clone();
    assert_ne!(split(&mut other, 99).unwrap().hash, info.hash);

    // Eval self-consistency.
    let subsets = Subset::ALL;
    for set in [RecordSet::Val, RecordSet::All] {
        let rep = eval(&m, dir, &Scorer::Dmos, set, &subsets, Mapping::None, None).unwrap();
        for s in &rep.subsets {
            let c = s.report.as_ref().unwrap();
            for v in [c.srcc, c.krcc, c.plcc] {
                assert!((v - 1.0).abs() < 1e-12, "{v}");
            }
        }
    }
    let perm = eval(&m, dir, &Scorer::Permutation { seed: 5 }, RecordSet::All, &subsets, Mapping::None, None).unwrap();
    for s in &perm.subsets {
        let band = s.band.unwrap();
        assert!(band.contains(s.report.as_ref().unwrap()), "{s:?}");
    }
    let psnr_rep = eval(&m, dir, &Scorer::Psnr, RecordSet::All, &[Subset::All], Mapping::None, None).unwrap();
    assert_eq!(psnr_rep.scores.len(), 40);
    assert!(psnr_rep.scores_csv().starts_with("id,score,dmos\n"));
    let t1 = table1_csv(&[perm.clone(), psnr_rep]);
    assert_eq!(t1.lines().count(), 3);
    assert_eq!(t1.lines().next().unwrap().split(',').count(), 10);
    // psnr_rep has no push/pick cells.
    assert!(t1.lines().nth(2).unwrap().ends_with("nan,nan,nan"));

    // Analysis.
    let a = analyze(&m).unwrap();
    assert_eq!(a.srcc_labels, ["all", "push", "pick"]);
    for i in 0..3 {
        assert_eq!(a.srcc_matrix[i][i], 1.0);
        for j in 0..3 {
            assert_eq!(a.srcc_matrix[i][j], a.srcc_matrix[j][i]);
            assert!(a.srcc_matrix[i][j].abs() <= 1.0);
        }
    }
    assert_eq!(a.table3_csv.lines().count(), 3);
    assert_eq!(a.table3_csv.lines().next().unwrap().split(',').count(), 13);
    assert_eq!(a.table2_csv.lines().count(), 8);
    let hist_total: usize = a
        .histogram_csv
        .lines()
        .skip(1)
        .flat_map(|l| l.split(',').skip(2).map(|v| v.parse::<usize>().unwrap()).collect::<Vec<_>>())
        .sum();
    assert_eq!(hist_total, 40);
    let out = dir.join("analysis");
    a.write(&out).unwrap();
    for f in ["table3.csv", "table3_extremes.csv", "srcc_matrix.csv", "table2.csv", "histogram.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }

    // External correlation.
    let ext = dir.join("ext.csv");
    let body: String = m.records.iter().map(|r| format!("{},{}\n", r.id, r.dmos)).collect();
    std::fs::write(&ext, format!("id,score\n{body}")).unwrap();
    let rep = correlate_external(&m, &ext).unwrap();
    assert_eq!(rep.matched, 40);
    assert!((rep.srcc - 1.0).abs() < 1e-12 && (rep.plcc - 1.0).abs() < 1e-9);
    let body: String = m.records.iter().map(|r| format!("{},{}\n", r.id, 5.0 - r.dmos)).collect();
    std::fs::write(&ext, body).unwrap();
    assert!((correlate_external(&m, &ext).unwrap().srcc + 1.0).abs() < 1e-12);
    let body: String = m.records.iter().take(20).map(|r| format!("{},{}\n", r.id, r.dmos)).collect();
    std::fs::write(&ext, body).unwrap();
    assert!(matches!(correlate_external(&m, &ext), Err(PipelineError::Invalid(_))));

    // A seeded permutation over 200+ records stays in the low-agreement band.
    let mut big = m.clone();
    big.records = (0..6)
        .flat_map(|k| m.records.iter().map(move |r| EpdRecord { id: format!("{}_{k}", r.id), ..r.clone() }))
        .collect();
    let mut scores: Vec<f64> = big.records.iter().map(|r| r.dmos + 1e-3 * r.spec.level as f64).collect();
    rand::seq::SliceRandom::shuffle(scores.as_mut_slice(), &mut crate::rng::rng(8));
    let body: String = big.records.iter().zip(&scores).map(|(r, s)| format!("{},{s}\n", r.id)).collect();
    std::fs::write(&ext, body).unwrap();
    let rep = correlate_external(&big, &ext).unwrap();
    assert_eq!(rep.matched, 240);
    assert!(rep.plcc.abs() < 0.2, "{}", rep.plcc);

    // A stratum below five records forces the global split.
    let mut tiny = m.clone();
    tiny.records.retain(|r| r.spec.level <= 2);
    tiny.records.truncate(12);
    let info = split(&mut tiny, 1).unwrap();
    assert!(!info.stratified);
    assert_eq!(info.val, 2);
}

#[test]
fn regeneration_is_byte_identical() {
    let opts = GenerateOptions {
        scenes: 2,
        tasks: vec![Task::Push],
        kinds: vec![DistortionKind::Darken],
        ..Default::default()
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    generate(&opts, a.path()).unwrap();
    generate(&opts, b.path()).unwrap();
    let (fa, fb) = (read_dir_bytes(a.path()), read_dir_bytes(b.path()));
    assert_eq!(fa.len(), 1 + 2 * 10);
    assert_eq!(fa, fb);

    let c = tempfile::tempdir().unwrap();
    generate(&GenerateOptions { seed: 1, ..opts }, c.path()).unwrap();
    assert_ne!(fa["manifest.json"], read_dir_bytes(c.path())["manifest.json"]);
}

#[test]
fn generate_rejects_bad_options() {
    let tmp = tempfile::tempdir().unwrap();
    let one = GenerateOptions { scenes: 1, ..small_opts(0) };
    assert!(matches!(generate(&one, tmp.path()), Err(PipelineError::Invalid(_))));
    let empty = GenerateOptions { kinds: vec![], ..small_opts(0) };
    assert!(matches!(generate(&empty, tmp.path()), Err(PipelineError::Invalid(_))));
}

#[test]
fn canonical_json_format() {
    let v = serde_json::json!({"b": 1.5, "a": [1, -2], "c": {"z": null, "y": true}, "d": [], "e": "x\"y"});
    let expected = "{\n  \"a\": [\n    1,\n    -2\n  ],\n  \"b\": 1.500000,\n  \"c\": {\n    \"y\": true,\n    \"z\": null\n  },\n  \"d\": [],\n  \"e\": \"x\\\"y\"\n}\n";
    assert_eq!(canonical_json(&v), expected);
    assert_eq!(r6(0.1234565), 0.123457);
    assert_eq!(r6(-2.0000004), -2.0);
}

#[test]
fn manifest_parse_errors() {
    assert!(matches!("{".parse::<Manifest>(), Err(PipelineError::Manifest(_))));
    let tmp = tempfile::tempdir().unwrap();
    let m = generate(&GenerateOptions { tasks: vec![Task::Push], kinds: vec![DistortionKind::Darken], ..small_opts(0) }, tmp.path()).unwrap();
    let mut wrong = m.clone();
    wrong.format = 2;
    assert!(matches!(wrong.to_canonical().parse::<Manifest>(), Err(PipelineError::Manifest(_))));
    let mut dup = m.clone();
    dup.records[1].id = dup.records[0].id.clone();
    assert!(matches!(dup.to_canonical().parse::<Manifest>(), Err(PipelineError::Manifest(_))));

    // Training without a split is refused.
    let mut unsplit = m;
    unsplit.split = None;
    let cfg = crate::net::ModelConfig::toy().with_input_size(32);
    let err = train_from_manifest(&unsplit, tmp.path(), &cfg, &Default::default(), |_| {});
    assert!(matches!(err, Err(PipelineError::Invalid(_))));
}

#[test]
fn subset_and_record_set_parsing() {
    assert_eq!("Push".parse::<Subset>().unwrap(), Subset::Push);
    assert!("walk".parse::<Subset>().is_err());
    assert_eq!("train".parse::<RecordSet>().unwrap(), RecordSet::Train);
    assert!("test".parse::<RecordSet>().is_err());
}

#[test]
fn permutation_band_shrinks_with_length() {
    let y = |n: usize| (0..n).map(|i| i as f64).collect::<Vec<_>>();
    let short = permutation_band(&y(10), Mapping::None, 500, 1, 0.99).unwrap();
    let long = permutation_band(&y(400), Mapping::None, 500, 1, 0.99).unwrap();
    assert!(long.srcc < short.srcc && long.krcc < short.krcc && long.plcc < short.plcc);
    assert!(short.srcc <= 1.0 && long.srcc > 0.0);
    assert_eq!(permutation_band(&y(30), Mapping::None, 200, 4, 0.9).unwrap(), permutation_band(&y(30), Mapping::None, 200, 4, 0.9).unwrap());
}
