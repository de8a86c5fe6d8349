//! Acceptance criteria. Each test prints one `[PASS]`/`[FAIL]` line (visible
//! with `--nocapture`) and the criteria run one at a time so the timing
//! checks are not disturbed by each other.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use clap::Parser;
use proptest::prelude::*;
use rbt_bench::cli::{self, Cli};
use rbt_bench::datagen::{generate, read_dataset, write_dataset, PerPoint, SynthParams};
use rbt_bench::report::{aggregate_row, csv_header, strip_timing};
use rbt_bench::{run_benchmark, BenchConfig, BenchReport, Method};
use rbt_core::bit_metrics::{self, weights_from_metric};
use rbt_core::eval::{exact_top_n, precision_at_n, recall_at_n};
use rbt_core::{
    AnnIndex, BinaryDescriptor, DescriptorId, LabeledDataset, LshIndex, LshParams, LshVariant,
    Neighbour, PointLabel, RbtForest, RbtParams,
};

fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

/// 1,000 points × 10 descriptors, flip 0.05, 512 bits.
fn synthetic() -> &'static LabeledDataset {
    static DATA: OnceLock<LabeledDataset> = OnceLock::new();
    DATA.get_or_init(|| {
        generate(&SynthParams {
            num_points: 1000,
            per_point: PerPoint::Fixed(10),
            dim: 512,
            flip_prob: 0.05,
            rng_seed: 2024,
        })
        .unwrap()
    })
}

fn verdict(id: &str, what: &str, pass: bool, detail: &str) {
    println!(
        "[{}] {id} {what}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{id} {what}: {detail}");
}

fn within(id: &str, started: Instant, limit: Duration) {
    let took = started.elapsed();
    assert!(took < limit, "{id} took {took:?}, limit {limit:?}");
}

fn bench_config() -> BenchConfig {
    BenchConfig {
        subset: None,
        queries: Some(1000),
        runs: 10,
        n: 10,
        seed: 7,
        compare_oracle: false,
    }
}

const TREE_GRID: [usize; 5] = [1, 3, 6, 9, 12];

fn tree_sweep() -> Vec<BenchReport> {
    TREE_GRID
        .iter()
        .map(|&t| {
            run_benchmark(
                synthetic(),
                &Method::rbt(RbtParams::new(t, 40, 256)),
                &bench_config(),
            )
            .unwrap()
        })
        .collect()
}

#[test]
fn c01_depth_zero_matches_exact_search() {
    let _g = serial();
    let started = Instant::now();
    let ds = synthetic();
    let forest = RbtForest::build(ds, RbtParams::new(1, 0, 256), None).unwrap();
    let (_, queries) = rbt_bench::bench::run_sample(ds.len(), ds.len(), Some(500), 1, 0);
    let mismatches = queries
        .iter()
        .filter(|&&id| {
            let q = ds.descriptor(id).unwrap();
            forest.query_excluding(q, 10, Some(id)).unwrap()
                != exact_top_n(ds, q, 10, Some(id)).unwrap()
        })
        .count();
    verdict(
        "C1",
        "oracle equivalence at depth 0",
        mismatches == 0,
        &format!("{mismatches}/500 query lists differ"),
    );
    within("C1", started, Duration::from_secs(30));
}

#[test]
fn c02_partition_and_depth_invariants() {
    let _g = serial();
    let started = Instant::now();
    let mut rng = rbt_core::rng::stream_rng(99, 0);
    let mut failures = Vec::new();
    for case in 0..100u64 {
        use rand::Rng;
        let ds = generate(&SynthParams {
            num_points: 100,
            per_point: PerPoint::Fixed(10),
            dim: 512,
            flip_prob: rng.random_range(0.0..0.3),
            rng_seed: case,
        })
        .unwrap();
        let depth = rng.random_range(0..=50);
        let bits = rng.random_range(depth.max(1)..=512);
        let params = RbtParams::new(rng.random_range(1..=6), depth, bits).with_seed(rng.random());
        let forest = RbtForest::build(&ds, params, None).unwrap();
        for tree in forest.trees() {
            let leaves = tree.leaves();
            let mut ids: Vec<u32> = leaves
                .iter()
                .flat_map(|(_, l)| l.iter().map(|i| i.0))
                .collect();
            ids.sort_unstable();
            let partition = ids == (0..1000).collect::<Vec<_>>();
            let depth_ok = leaves.iter().all(|(d, _)| *d == depth);
            if !(partition && depth_ok && tree.check(512, depth, 1000).is_ok()) {
                failures.push(format!("{params:?}"));
            }
        }
    }
    verdict(
        "C2",
        "partition and depth invariants",
        failures.is_empty(),
        &format!("100 builds, failures: {failures:?}"),
    );
    within("C2", started, Duration::from_secs(60));
}

#[test]
fn c03_precision_grows_with_trees() {
    let _g = serial();
    let started = Instant::now();
    let reports = tree_sweep();
    let p: Vec<f64> = reports.iter().map(|r| r.precision_at_n).collect();
    let inversions: Vec<f64> = p
        .windows(2)
        .filter(|w| w[1] < w[0])
        .map(|w| w[0] - w[1])
        .collect();
    let pass = inversions.is_empty() || (inversions.len() == 1 && inversions[0] <= 0.01);
    verdict(
        "C3",
        "Precision@10 nondecreasing in trees",
        pass,
        &format!("trees {TREE_GRID:?} -> precision {p:.4?}"),
    );
    within("C3", started, Duration::from_secs(300));
}

/// Coefficient of determination of the least-squares line through `(x, y)`.
fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    1.0 - ss_res / ss_tot
}

#[test]
fn r_squared_of_exact_line_is_one() {
    assert!((r_squared(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-12);
    assert!(r_squared(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 1.0, 3.0]) < 0.5);
}

#[test]
fn c04_query_time_linear_in_trees() {
    let _g = serial();
    let started = Instant::now();
    let reports = tree_sweep();
    let x: Vec<f64> = TREE_GRID.iter().map(|&t| t as f64).collect();
    let y: Vec<f64> = reports.iter().map(|r| r.avg_query_us).collect();
    let r2 = r_squared(&x, &y);
    verdict(
        "C4",
        "query time quasi-linear in trees",
        r2 >= 0.9,
        &format!("R^2 = {r2:.4}, times (us) {y:.3?}"),
    );
    within("C4", started, Duration::from_secs(300));
}

#[test]
fn c05_more_bits_faster_queries() {
    let _g = serial();
    let started = Instant::now();
    let time = |bits| {
        run_benchmark(
            synthetic(),
            &Method::rbt(RbtParams::new(6, 40, bits)),
            &bench_config(),
        )
        .unwrap()
    };
    let (narrow, wide) = (time(64), time(512));
    let ratio = narrow.avg_query_us / wide.avg_query_us;
    verdict(
        "C5",
        "query time at 64 bits / at 512 bits >= 1.3",
        ratio >= 1.3,
        &format!(
            "{:.3} us / {:.3} us = {ratio:.3} (mean candidates {:.3} vs {:.3})",
            narrow.avg_query_us, wide.avg_query_us, narrow.mean_candidates, wide.mean_candidates
        ),
    );
    within("C5", started, Duration::from_secs(300));
}

#[test]
fn c06_rbt_competitive_with_lsh_at_matched_candidates() {
    let _g = serial();
    let started = Instant::now();
    let ds = synthetic();
    let cfg = bench_config();
    let mut rbt = Vec::new();
    for depth in [30, 40, 50] {
        for &trees in &TREE_GRID {
            rbt.push(
                run_benchmark(ds, &Method::rbt(RbtParams::new(trees, depth, 256)), &cfg).unwrap(),
            );
        }
    }
    let mut lsh = Vec::new();
    let mut others = Vec::new();
    for tables in [1, 2, 4, 8, 16] {
        lsh.push(
            run_benchmark(
                ds,
                &Method::Lsh(LshParams::new(LshVariant::Classic, tables)),
                &cfg,
            )
            .unwrap(),
        );
        for v in [LshVariant::Uniform, LshVariant::MultiProbe] {
            others.push(run_benchmark(ds, &Method::Lsh(LshParams::new(v, tables)), &cfg).unwrap());
        }
    }

    let mut csv = csv_header(10, false);
    csv.push('\n');
    for r in rbt.iter().chain(&lsh).chain(&others) {
        writeln!(csv, "{}", aggregate_row(r, false)).unwrap();
    }
    let out = Path::new(env!("CARGO_TARGET_TMPDIR")).join("precision_vs_query_time.csv");
    std::fs::write(&out, &csv).unwrap();
    println!(
        "precision/recall vs query time written to {}",
        out.display()
    );

    let mut pairs = Vec::new();
    let mut violations = Vec::new();
    for l in &lsh {
        for r in &rbt {
            if (r.mean_candidates - l.mean_candidates).abs() <= 0.2 * l.mean_candidates {
                let desc = format!(
                    "rbt t={} d={} ({:.3} cand, P {:.4}) vs lsh L={} ({:.3} cand, P {:.4})",
                    r.params.trees.unwrap(),
                    r.params.depth.unwrap(),
                    r.mean_candidates,
                    r.precision_at_n,
                    l.params.tables.unwrap(),
                    l.mean_candidates,
                    l.precision_at_n
                );
                if r.precision_at_n < l.precision_at_n - 0.02 {
                    violations.push(desc.clone());
                }
                pairs.push(desc);
            }
        }
    }
    let pass = !pairs.is_empty() && violations.is_empty();
    verdict(
        "C6",
        "RBT >= LSH - 0.02 at matched candidate counts",
        pass,
        &format!(
            "{} matched pairs, violations {violations:?}; first pair: {:?}",
            pairs.len(),
            pairs.first()
        ),
    );
    within("C6", started, Duration::from_secs(600));
}

fn bits(b: &[u8]) -> BinaryDescriptor {
    BinaryDescriptor::from_bits(&b.iter().map(|&x| x == 1).collect::<Vec<_>>())
}

fn table(rows: &[(&[u8], u32)]) -> LabeledDataset {
    LabeledDataset::new(
        rows[0].0.len(),
        rows.iter().map(|(b, _)| bits(b)).collect(),
        rows.iter().map(|&(_, l)| PointLabel(l)).collect(),
    )
    .unwrap()
}

#[test]
fn c07_metric_definitions() {
    let _g = serial();
    let started = Instant::now();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9;
    let mut failed = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failed.push(name.to_string());
        }
    };

    // precision / recall over labels 0×6, 1×3, 2×1
    let labels = [0u32, 0, 0, 0, 0, 0, 1, 1, 1, 2];
    let ds = LabeledDataset::new(
        8,
        (0..10u8)
            .map(|i| BinaryDescriptor::from_bytes(8, &[i]).unwrap())
            .collect(),
        labels.iter().map(|&l| PointLabel(l)).collect(),
    )
    .unwrap();
    let hits = |ids: &[u32]| {
        ids.iter()
            .map(|&i| Neighbour::new(DescriptorId(i), 0))
            .collect::<Vec<_>>()
    };
    check(
        "precision all",
        close(
            precision_at_n(&hits(&[1, 2, 3]), PointLabel(0), &ds, 3),
            1.0,
        ),
    );
    check(
        "precision none",
        close(
            precision_at_n(&hits(&[6, 7, 9]), PointLabel(0), &ds, 3),
            0.0,
        ),
    );
    check(
        "precision 4/10",
        close(
            precision_at_n(
                &hits(&[0, 6, 1, 7, 2, 8, 3, 9, 9, 9]),
                PointLabel(0),
                &ds,
                10,
            ),
            0.4,
        ),
    );
    check(
        "recall 5/5",
        recall_at_n(
            &hits(&[1, 2, 3, 4, 5, 6]),
            PointLabel(0),
            &ds,
            10,
            DescriptorId(0),
        ) == Some(1.0),
    );
    check(
        "recall none",
        recall_at_n(&hits(&[6, 7]), PointLabel(0), &ds, 10, DescriptorId(0)) == Some(0.0),
    );
    let nine = LabeledDataset::new(
        8,
        (0..10u8)
            .map(|i| BinaryDescriptor::from_bytes(8, &[i]).unwrap())
            .collect(),
        (0..10).map(|i| PointLabel(u32::from(i == 9))).collect(),
    )
    .unwrap();
    check(
        "recall 4/8",
        recall_at_n(
            &hits(&[1, 2, 3, 4, 9]),
            PointLabel(0),
            &nine,
            10,
            DescriptorId(0),
        ) == Some(0.5),
    );
    check(
        "recall singleton skipped",
        recall_at_n(&hits(&[]), PointLabel(2), &ds, 10, DescriptorId(9)).is_none(),
    );

    // entropy
    let half = table(&[(&[1, 0], 0), (&[0, 0], 1)]);
    let h = bit_metrics::shannon_entropy(&half).unwrap();
    check("entropy p=1/2", close(h[0], 1.0));
    check("entropy constant", close(h[1], 0.0));
    let quarter = table(&[(&[1], 0), (&[0], 0), (&[0], 0), (&[0], 0)]);
    let oracle = -(0.25f64 * 0.25f64.log2() + 0.75 * 0.75f64.log2());
    let h = bit_metrics::shannon_entropy(&quarter).unwrap()[0];
    check(
        "entropy p=1/4",
        close(h, oracle) && close(h, 0.811_278_124_459_132_8),
    );

    // conditional entropy
    let determined = table(&[(&[1, 0], 0), (&[1, 0], 0), (&[0, 1], 1), (&[0, 1], 1)]);
    check(
        "cond entropy determined",
        bit_metrics::conditional_entropy(&determined)
            .unwrap()
            .iter()
            .all(|&c| close(c, 0.0)),
    );
    let one_label = table(&[(&[1, 0, 1], 3), (&[0, 0, 1], 3), (&[1, 1, 0], 3)]);
    let (c, h) = (
        bit_metrics::conditional_entropy(&one_label).unwrap(),
        bit_metrics::shannon_entropy(&one_label).unwrap(),
    );
    check(
        "cond entropy single label",
        c.iter().zip(&h).all(|(a, b)| close(*a, *b)),
    );
    let hand = table(&[(&[1, 1], 0), (&[0, 1], 0), (&[1, 0], 1), (&[1, 1], 1)]);
    let c = bit_metrics::conditional_entropy(&hand).unwrap();
    check(
        "cond entropy 2x2 table",
        close(c[0], 0.5) && close(c[1], 0.5),
    );

    // stability
    let shared = table(&[(&[1], 0), (&[1], 0), (&[0], 1)]);
    check(
        "stability shared",
        close(bit_metrics::empirical_stability(&shared).unwrap()[0], 1.0),
    );
    let split = table(&[(&[1], 0), (&[0], 0)]);
    check(
        "stability split",
        close(bit_metrics::empirical_stability(&split).unwrap()[0], 0.5),
    );
    let mixed = table(&[(&[1], 0), (&[1], 0), (&[0], 0), (&[1], 1)]);
    check(
        "stability weighted",
        close(bit_metrics::empirical_stability(&mixed).unwrap()[0], 0.75),
    );

    // weights
    let w = weights_from_metric(&[0.1, 0.7, 0.0], 0.0).unwrap();
    check("weights uniform", w.iter().all(|&x| close(x, 1.0 / 3.0)));
    let w = weights_from_metric(&[0.0, 1.0, 0.0, 0.0], 1.0).unwrap();
    check("weights one-hot", (w[1] - 1.0).abs() < 1e-8);
    let w = weights_from_metric(&[0.2, 0.8], 1.0).unwrap();
    check(
        "weights proportional",
        (w[0] - 0.2).abs() < 1e-8 && (w[1] - 0.8).abs() < 1e-8,
    );

    verdict(
        "C7",
        "metric definitions",
        failed.is_empty(),
        &format!("failed: {failed:?}"),
    );
    within("C7", started, Duration::from_secs(10));
}

#[test]
fn c08_conditioning_never_increases_entropy() {
    let _g = serial();
    let started = Instant::now();
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..20u64 {
        let ds = generate(&SynthParams {
            num_points: 20 + 10 * seed as usize,
            per_point: PerPoint::Range { min: 1, max: 12 },
            dim: 512,
            flip_prob: 0.02 * seed as f64,
            rng_seed: seed,
        })
        .unwrap();
        let h = bit_metrics::shannon_entropy(&ds).unwrap();
        let c = bit_metrics::conditional_entropy(&ds).unwrap();
        worst = c.iter().zip(&h).map(|(c, h)| c - h).fold(worst, f64::max);
    }
    verdict(
        "C8",
        "conditional entropy <= entropy + 1e-12",
        worst <= 1e-12,
        &format!("max(cond - entropy) = {worst:e}"),
    );
    within("C8", started, Duration::from_secs(30));
}

fn cli(args: &[&str]) {
    let parsed = Cli::try_parse_from(std::iter::once("rbt").chain(args.iter().copied())).unwrap();
    cli::run(parsed).unwrap();
}

#[test]
fn c09_identical_seeds_identical_output() {
    let _g = serial();
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.bdsc");
    let data = data.to_str().unwrap();
    cli(&[
        "gen",
        "--points",
        "1000",
        "--per-point",
        "10",
        "--flip",
        "0.05",
        "--seed",
        "11",
        "-o",
        data,
    ]);
    let mut same = true;
    let mut detail = String::new();
    for method in [
        vec![
            "--method", "rbt", "--trees", "6", "--depth", "40", "--bits", "256",
        ],
        vec!["--method", "multiprobe-lsh", "--tables", "4"],
    ] {
        let mut outputs = Vec::new();
        for k in 0..2 {
            let out = dir.path().join(format!("out{k}.csv"));
            let mut args = vec![
                "bench",
                "-i",
                data,
                "--runs",
                "10",
                "--seed",
                "5",
                "-o",
                out.to_str().unwrap(),
            ];
            args.extend(&method);
            cli(&args);
            outputs.push(strip_timing(&std::fs::read_to_string(out).unwrap()));
        }
        same &= outputs[0] == outputs[1] && outputs[0].lines().count() == 12;
        write!(detail, "{} {} bytes; ", method[1], outputs[0].len()).unwrap();
    }
    verdict("C9", "deterministic bench output", same, &detail);
    within("C9", started, Duration::from_secs(300));
}

fn arb_dataset() -> impl Strategy<Value = LabeledDataset> {
    (
        0usize..30,
        1usize..5,
        prop::sample::select(vec![1usize, 7, 8, 63, 64, 65, 200, 512]),
        0.0f64..0.4,
        any::<u64>(),
    )
        .prop_map(|(points, per, dim, flip, seed)| {
            generate(&SynthParams {
                num_points: points,
                per_point: PerPoint::Fixed(per),
                dim,
                flip_prob: flip,
                rng_seed: seed,
            })
            .unwrap()
        })
}

fn round_trips(ds: &LabeledDataset, seed: u64, dir: &Path) -> Result<(), TestCaseError> {
    let mut bytes = Vec::new();
    write_dataset(ds, &mut bytes).unwrap();
    prop_assert_eq!(&read_dataset(&bytes[..], Some(ds.dim())).unwrap(), ds);
    let path = dir.join(format!("{seed}.bdsc"));
    rbt_bench::datagen::save_descriptors(ds, &path).unwrap();
    prop_assert_eq!(std::fs::read(&path).unwrap(), bytes);
    prop_assert_eq!(
        &rbt_bench::datagen::load_descriptors(&path, None).unwrap(),
        ds
    );

    if ds.is_empty() {
        return Ok(());
    }
    let bits = ds.dim().min(1 + (seed as usize % 64));
    let params = RbtParams::new(
        1 + (seed as usize % 4),
        (seed as usize / 7) % (bits + 1),
        bits,
    )
    .with_seed(seed);
    let forest = RbtForest::build(ds, params, None).unwrap();
    let snap = forest.to_snapshot();
    let back = RbtForest::from_snapshot(ds, &snap).unwrap();
    prop_assert_eq!(&back, &forest);
    prop_assert_eq!(back.to_snapshot(), snap);

    let variant = [
        LshVariant::Classic,
        LshVariant::Uniform,
        LshVariant::MultiProbe,
    ][seed as usize % 3];
    let hash_length = ds.dim().min(seed as usize % 40);
    let probes = if variant == LshVariant::MultiProbe {
        hash_length / 2
    } else {
        0
    };
    let lsh = LshIndex::build(
        ds,
        LshParams {
            num_tables: 1 + seed as usize % 5,
            hash_length,
            variant,
            probes,
            rng_seed: seed,
        },
    )
    .unwrap();
    let snap = lsh.to_snapshot();
    let back = LshIndex::from_snapshot(ds, &snap).unwrap();
    prop_assert_eq!(&back, &lsh);
    prop_assert_eq!(back.to_snapshot(), snap);
    let q = &ds.descriptors()[0];
    prop_assert_eq!(back.query(q, 5).unwrap(), lsh.query(q, 5).unwrap());
    Ok(())
}

#[test]
fn c10_files_and_snapshots_round_trip() {
    let _g = serial();
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut runner = proptest::test_runner::TestRunner::new(ProptestConfig {
        cases: 200,
        failure_persistence: None,
        ..ProptestConfig::default()
    });
    let result = runner.run(&(arb_dataset(), any::<u64>()), |(ds, seed)| {
        round_trips(&ds, seed, dir.path())
    });
    verdict(
        "C10",
        "BDSC and snapshot round trips (200 cases)",
        result.is_ok(),
        &format!("{result:?}"),
    );
    within("C10", started, Duration::from_secs(60));
}
