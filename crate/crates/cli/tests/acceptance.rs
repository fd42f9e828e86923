//! Acceptance suite. Each test prints one `PASS`/`FAIL` line for its
//! criterion (straight to stdout, so the lines survive output capture) and
//! then fails if the criterion failed. Criteria needing a dataset print
//! `SKIP` when it is not cached.

#[path = "../../core/tests/common/mod.rs"]
mod common;
mod support;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use kanvision::bspline::SplineBasis;
use kanvision::data::{DatasetName, Split};
use kanvision::layers::{Formulation, Layer};
use kanvision::model::{builtin, ModelKind, ModelSpec};
use kanvision::{Model64, Rng};
use kanvision_cli::commands::reproduce::{run_suite, Suite};
use kanvision_cli::commands::sweep::{run_sweep, SweepGrid, SweepOptions};
use kanvision_cli::records::{read_rows, ResultRow, RESULTS_HEADER};
use kanvision_cli::run::{load_splits, resolve_spec, train_model};
use kanvision_cli::ConfigOverrides;

fn report(criterion: u32, pass: bool, detail: &str) {
    let line = format!("{} criterion {criterion}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn skip(criterion: u32, why: &str) {
    let line = format!("SKIP criterion {criterion}: {why}\n");
    std::io::stdout().lock().write_all(line.as_bytes()).unwrap();
}

fn data_root() -> PathBuf {
    common::real_cache(DatasetName::Mnist)
        .map(|c| c.root().to_path_buf())
        .unwrap_or_else(|| PathBuf::from("data"))
}

fn overrides(out: &std::path::Path) -> ConfigOverrides {
    ConfigOverrides {
        cache_dir: Some(data_root()),
        out_dir: Some(out.to_path_buf()),
        ..Default::default()
    }
}

#[test]
fn criterion_1_table2_mnist() {
    if common::real_cache(DatasetName::Mnist).is_none() {
        return skip(1, "mnist not cached");
    }
    let out = tempfile::tempdir().unwrap();
    let rows = run_suite(Suite::Table2, overrides(out.path()), None, false).unwrap();
    assert_eq!(rows.len(), 6);
    let detail: Vec<String> = rows
        .iter()
        .map(|r| {
            let (lo, hi) = r.planned.band.unwrap();
            format!("{} {:.4} in [{lo:.3}, {hi:.3}] {}", r.planned.id, r.accuracy, if r.pass { "ok" } else { "MISS" })
        })
        .collect();
    report(1, rows.iter().all(|r| r.pass), &detail.join("; "));
}

const TABLE3_PUBLISHED: [(&str, f64); 6] = [
    ("cnn_small", 34_000.0),
    ("cnn_medium", 157_000.0),
    ("kan_conv_mlp1", 7_400.0),
    ("kan_conv_mlp2", 163_700.0),
    ("kan_conv_kan", 94_200.0),
    ("cnn_kan", 95_000.0),
];

#[test]
fn criterion_2_table3_directional() {
    let mut notes = Vec::new();
    let mut pass = true;
    for (name, published) in TABLE3_PUBLISHED {
        let total = Model64::build(&builtin(name).unwrap()).unwrap().audit().total;
        let rel = (total as f64 - published).abs() / published;
        pass &= rel <= 0.10;
        notes.push(format!("{name} {total} params ({:+.1}%)", 100.0 * (total as f64 - published) / published));
    }
    if common::real_cache(DatasetName::Mnist).is_none() {
        report(2, pass, &format!("{} [accuracy part skipped: mnist not cached]", notes.join(", ")));
        return;
    }
    let out = tempfile::tempdir().unwrap();
    let only = ["kan_conv_kan".to_string(), "cnn_small".to_string()];
    let rows = run_suite(Suite::Table3, overrides(out.path()), Some(&only), false).unwrap();
    for r in &rows {
        let lo = r.planned.band.unwrap().0;
        pass &= r.pass;
        notes.push(format!("{} accuracy {:.4} >= {lo:.3} {}", r.planned.id, r.accuracy, if r.pass { "ok" } else { "MISS" }));
    }
    report(2, pass, &notes.join("; "));
}

#[test]
fn criterion_3_formulation_equivalence() {
    let mut rng = Rng::new(3);
    let mut worst: f64 = 0.0;
    for g in [2, 3] {
        for k in [1, 2, 3] {
            for _ in 0..20 {
                let base = rng.below(2) == 0;
                let expanded = common::kan_layer(&mut rng, 9, 5, g, k, base, Formulation::Expanded);
                let mut efficient = expanded.clone();
                efficient.set_formulation(Formulation::Efficient);
                let x = common::random_tensor(&mut rng, &[6, 9], -1.2, 1.2);
                let a = expanded.infer(&x).unwrap();
                let b = efficient.infer(&x).unwrap();
                worst = worst.max(a.max_abs_diff(&b).unwrap());
            }
        }
    }
    report(3, worst < 1e-10, &format!("max |expanded - efficient| = {worst:.2e} over 120 draws (< 1e-10)"));
}

#[test]
fn criterion_4_gradients() {
    let mut worst_layer: f64 = 0.0;
    let mut worst_name = String::new();
    let mut checked = 0;
    for seed in [1, 2, 3] {
        for (name, mut layer, x) in common::gradcheck_cases(seed) {
            let r = common::gradcheck(layer.as_mut(), &x, 1e-5, seed + 100);
            assert!(r.checked >= x.len(), "{name}: nothing checked");
            checked += r.checked;
            let e = r.max_param_rel.max(r.max_input_rel);
            if e >= worst_layer {
                worst_layer = e;
                worst_name = name;
            }
        }
    }
    let mut rng = Rng::new(4);
    let ce = (0..3).map(|_| common::softmax_ce_gradcheck(&mut rng, 5, 10, 1e-5)).fold(0.0, f64::max);
    report(
        4,
        worst_layer < 1e-4 && ce < 1e-6,
        &format!("layers max rel {worst_layer:.2e} ({worst_name}) over {checked} entries (< 1e-4); softmax-CE {ce:.2e} (< 1e-6)"),
    );
}

#[test]
fn criterion_5_spline_properties() {
    let mut partition: f64 = 0.0;
    let mut negative = 0usize;
    let mut support_violations = 0usize;
    let mut oracle: f64 = 0.0;
    let mut deriv: f64 = 0.0;
    let mut points = 0usize;
    for g in 1..=8 {
        for k in 1..=3 {
            let basis = SplineBasis::<f64>::new(g, k, (-1.0, 1.0)).unwrap();
            let h = 2.0 / g as f64;
            let knots = common::oracle_knots(g, k, -1.0, 1.0);
            for step in 0..=400 {
                let x = -1.0 + 2.0 * step as f64 / 400.0;
                let v = basis.basis_eval(x).unwrap();
                points += 1;
                partition = partition.max((v.iter().sum::<f64>() - 1.0).abs());
                negative += v.iter().filter(|&&b| b < 0.0).count();
                // Only the k+1 functions whose knot span covers x may be non-zero.
                let cell = (((x + 1.0) / h).floor() as usize).min(g - 1);
                support_violations += v.iter().enumerate().filter(|&(j, &b)| b.abs() > 1e-14 && !(cell..=cell + k).contains(&j)).count();
                let want = common::oracle_basis(g, k, -1.0, 1.0, x);
                oracle = oracle.max(v.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
                // Derivatives are compared away from the knots with a five-point
                // stencil, which is exact for polynomial pieces of degree <= 3.
                // The 1e-5 floor only matters where the derivative vanishes (a
                // basis peak) and the quotient is pure rounding noise.
                let offset = (x + 1.0) - ((x + 1.0) / h).floor() * h;
                if offset > 1e-3 && h - offset > 1e-3 && knots.iter().all(|t| (t - x).abs() > 1e-3) {
                    let s = 1e-4;
                    let d = basis.basis_derivative(x).unwrap();
                    let at = |dx: f64| basis.basis_eval(x + dx).unwrap();
                    let (m2, m1, p1, p2) = (at(-2.0 * s), at(-s), at(s), at(2.0 * s));
                    for j in 0..d.len() {
                        let fd = (m2[j] - 8.0 * m1[j] + 8.0 * p1[j] - p2[j]) / (12.0 * s);
                        deriv = deriv.max((d[j] - fd).abs() / d[j].abs().max(fd.abs()).max(1e-5));
                    }
                }
            }
        }
    }
    let pass = partition < 1e-12 && negative == 0 && support_violations == 0 && deriv < 1e-5 && oracle < 1e-12;
    report(
        5,
        pass,
        &format!(
            "{points} points over G 1..8 x k 1..3: partition dev {partition:.1e} (< 1e-12), {negative} negative, \
             {support_violations} support violations, derivative rel {deriv:.1e} (< 1e-5), Cox-de Boor dev {oracle:.1e}"
        ),
    );
}

#[test]
fn criterion_6_parameter_scaling() {
    let slope = 784 * 32 + 32 * 10;
    let mut totals: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for kind in [ModelKind::Kan, ModelKind::EfficientKan] {
        for sum in 3..=10 {
            for k in 1..=3usize.min(sum - 1) {
                let spec = ModelSpec::dense(kind, &[784, 32, 10]).with_grid_order(sum - k, k);
                totals.entry(sum).or_default().push(Model64::build(&spec).unwrap().audit().total);
            }
        }
    }
    let first = totals[&3][0];
    let intercept = first as i64 - 3 * slope as i64;
    let mut deviations = 0;
    for (&sum, v) in &totals {
        for &t in v {
            if t as i64 != intercept + (sum * slope) as i64 {
                deviations += 1;
            }
        }
    }
    report(
        6,
        deviations == 0 && slope == 25_408,
        &format!(
            "{} audits fit total = {slope}(G+k) + {intercept} exactly ({deviations} deviations)",
            totals.values().map(Vec::len).sum::<usize>()
        ),
    );
}

#[test]
fn criterion_7_sweep_shape() {
    if common::real_cache(DatasetName::Mnist).is_none() {
        return skip(7, "mnist not cached");
    }
    let out = tempfile::tempdir().unwrap();
    let cfg = ConfigOverrides {
        epochs: Some(5),
        subset: Some(10_000),
        ..overrides(out.path())
    }
    .resolve()
    .unwrap();
    let grid = SweepGrid::default();
    let opts = SweepOptions {
        grid: grid.clone(),
        max_cells: None,
        verbose: false,
    };
    let rows = run_sweep(&cfg, &opts).unwrap();
    assert_eq!(rows.len(), grid.cells().len());
    let cell = |g: usize, k: usize| rows.iter().find(|r| r.grid == g && r.order == k).unwrap();
    let mut monotone = true;
    for &g in &grid.grids {
        for w in grid.orders.windows(2) {
            monotone &= cell(g, w[0]).params < cell(g, w[1]).params;
        }
    }
    for &k in &grid.orders {
        for w in grid.grids.windows(2) {
            monotone &= cell(w[0], k).params < cell(w[1], k).params;
        }
    }
    let (a32, a85) = (cell(3, 2).test_accuracy, cell(8, 5).test_accuracy);
    let best = rows.iter().max_by(|a, b| a.test_accuracy.total_cmp(&b.test_accuracy)).unwrap();
    report(
        7,
        monotone && a32 > a85,
        &format!(
            "params strictly increasing on both axes: {monotone}; acc(G3,k2) {a32:.4} > acc(G8,k5) {a85:.4}: {}; \
             best cell G{} k{} ({:.4}) {} the expected G in {{2,3}} (reported only)",
            a32 > a85,
            best.grid,
            best.order,
            best.test_accuracy,
            if matches!(best.grid, 2 | 3) { "inside" } else { "outside" }
        ),
    );
}

#[test]
fn criterion_8_determinism() {
    if common::real_cache(DatasetName::Mnist).is_none() {
        return skip(8, "mnist not cached");
    }
    let out = tempfile::tempdir().unwrap();
    let root = data_root();
    let base = [
        "train", "--model", "efficient_kan", "--widths", "784,16,10", "--epochs", "2", "--subset", "5000",
        "--cache-dir", root.to_str().unwrap(),
    ];
    let dir_a = out.path().join("a");
    let mut args: Vec<&str> = base.to_vec();
    args.extend(["--out-dir", dir_a.to_str().unwrap()]);
    let first = support::kanvision(&args);
    assert_eq!(support::code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));

    let run = "efficient_kan-784x16x10-mnist-g3k3-e2-s42";
    let manifest = dir_a.join(run).join("manifest.cfg");
    let dir_b = out.path().join("b");
    let second = support::kanvision(&[
        "train", "--config", manifest.to_str().unwrap(), "--cache-dir", root.to_str().unwrap(),
        "--out-dir", dir_b.to_str().unwrap(),
    ]);
    assert_eq!(support::code(&second), 0, "{}", String::from_utf8_lossy(&second.stderr));

    let rows = |d: &std::path::Path| -> Vec<ResultRow> {
        read_rows(&d.join("results.csv"), &RESULTS_HEADER)
            .unwrap()
            .iter()
            .map(|r| ResultRow::from_record(r).unwrap())
            .collect()
    };
    let same_rows = rows(&dir_a) == rows(&dir_b);
    let ck_a = fs::read(dir_a.join(run).join("model.ckpt")).unwrap();
    let ck_b = fs::read(dir_b.join(run).join("model.ckpt")).unwrap();
    report(
        8,
        same_rows && ck_a == ck_b,
        &format!("replay from manifest: identical rows {same_rows}, bitwise-identical checkpoints {} ({} bytes)", ck_a == ck_b, ck_a.len()),
    );
}

#[test]
fn criterion_9_cifar_properties() {
    let Some(cache) = common::real_cache(DatasetName::Cifar10) else {
        return skip(9, "cifar10 not cached");
    };
    let train = cache.load(DatasetName::Cifar10, Split::Train).unwrap();
    let test = cache.load(DatasetName::Cifar10, Split::Test).unwrap();
    let counts = train.len() == 50_000 && test.len() == 10_000;
    let balanced = train.label_histogram() == [5000; 10] && test.label_histogram() == [1000; 10];

    let out = tempfile::tempdir().unwrap();
    let cfg = ConfigOverrides {
        dataset: Some(DatasetName::Cifar10),
        widths: Some(vec![3072, 32, 10]),
        epochs: Some(2),
        subset: Some(10_000),
        cache_dir: Some(cache.root().to_path_buf()),
        ..overrides(out.path())
    }
    .resolve()
    .unwrap();
    let splits = load_splits(&cfg).unwrap();
    let spec = resolve_spec(&cfg, splits.train.image_shape()).unwrap();
    let outcome = train_model(&cfg, &spec, &splits, false).unwrap();
    let acc = outcome.evaluation.accuracy;
    report(
        9,
        counts && balanced && acc > 0.15,
        &format!(
            "50000/10000 records {counts}, 5000/1000 per class {balanced}; efficient_kan [3072,32,10] \
             2 epochs on 10k: test accuracy {acc:.4} (> 0.15)"
        ),
    );
}
