use std::fs;
use std::path::Path;

use mlmc_abc::bench::config::{LatticeConfig, ReferenceConfig, ReferenceKind};
use mlmc_abc::bench::experiment::RunReport;
use mlmc_abc::bench::{build_reference, run_experiment, Experiment, ExperimentConfig, SamplerKind};
use mlmc_abc::mlmc::LatticeCdf;

fn config(sampler: &str, extra: &str) -> ExperimentConfig {
    let text = format!(
        r#"
name = "it"
model = "sis"
seed = 42
replications = 3

[schedule]
kind = "explicit"
values = [150.0, 106.0]

[sampler]
kind = "{sampler}"
{extra}

[lattice]
axes = [[0.0, 0.06, 13], [0.0, 2.0, 11]]
"#
    );
    ExperimentConfig::parse(&text).unwrap()
}

const SIS_COV: &str = "covariance = [[1e-4, 0.0], [0.0, 0.01]]";

fn all_configs() -> Vec<ExperimentConfig> {
    vec![
        config("rejection", "n = 30"),
        config("mlmc", "allocations = [40, 20]"),
        config("mcmc", &format!("n_t = 300\n{SIS_COV}")),
        config("smc", &format!("n_p = 20\n{SIS_COV}")),
    ]
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "timing.csv" {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn rejection_at_infinity_costs_exactly_n() {
    let mut cfg = config("rejection", "n = 10");
    cfg.schedule = mlmc_abc::bench::ScheduleSpec::Explicit { values: vec![f64::INFINITY] };
    let report = run_experiment(&cfg, None, None).unwrap();
    assert!(report.rows.iter().all(|r| r.n_s == 10 && r.status == "ok"));
}

#[test]
fn reruns_write_identical_files() {
    for cfg in all_configs() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_experiment(&cfg, Some(a.path()), None).unwrap();
        run_experiment(&cfg, Some(b.path()), None).unwrap();
        let (ta, tb) = (tree(a.path()), tree(b.path()));
        assert!(ta.len() >= 5, "{:?}", cfg.sampler.kind);
        assert_eq!(ta, tb, "{:?}", cfg.sampler.kind);
    }
}

#[test]
fn worker_count_does_not_change_results() {
    for cfg in all_configs() {
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let dir = tempfile::tempdir().unwrap();
            pool.install(|| run_experiment(&cfg, Some(dir.path()), None).unwrap());
            tree(dir.path())
        };
        assert_eq!(run(1), run(4), "{:?}", cfg.sampler.kind);
    }
}

#[test]
fn costs_add_up() {
    for cfg in all_configs() {
        let exp = Experiment::prepare(&cfg, None).unwrap();
        for r in 0..cfg.replications {
            let o = exp.run_replication(r);
            assert_eq!(o.status, "ok");
            assert_eq!(o.n_s, o.level_costs.iter().sum::<u64>(), "{:?}", cfg.sampler.kind);
            let floor = match cfg.sampler.kind {
                SamplerKind::Rejection => 30,
                SamplerKind::Mlmc => 60,
                SamplerKind::Mcmc => 300,
                SamplerKind::Smc => 40,
            };
            assert!(o.n_s >= floor);
        }
    }
}

#[test]
fn single_replication_reruns_from_its_seed() {
    let cfg = config("mlmc", "allocations = [40, 20]");
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&cfg, Some(dir.path()), None).unwrap();
    let rows = RunReport::read_rows(fs::File::open(dir.path().join("report.csv")).unwrap()).unwrap();
    let exp = Experiment::prepare(&cfg, None).unwrap();
    let row = &rows[2];
    let again = exp.run_with_seed(2, mlmc_abc::rng::Seed(row.seed));
    assert_eq!(again.n_s, row.n_s);
    assert_eq!(again.level_costs, row.level_costs);
    let (cdf, _) = LatticeCdf::read_csv(fs::File::open(dir.path().join("rep-002/cdf.csv")).unwrap()).unwrap();
    assert_eq!(cdf.values(), again.estimate.as_ref().unwrap().values());
}

#[test]
fn rejection_reference_file_is_reproducible() {
    let mut cfg = config("rejection", "n = 30");
    cfg.lattice = LatticeConfig::fitted(8);
    cfg.reference = Some(ReferenceConfig {
        kind: ReferenceKind::Rejection,
        n: Some(200),
        epsilon: None,
        seed: Some(9),
        refine: None,
    });
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = build_reference(&cfg, Some(a.path())).unwrap();
    let rb = build_reference(&cfg, Some(b.path())).unwrap();
    let (fa, fb) = (ra.cache_file.unwrap(), rb.cache_file.unwrap());
    assert_eq!(fa.file_name(), fb.file_name());
    assert_eq!(fs::read(&fa).unwrap(), fs::read(&fb).unwrap());
    let reloaded = build_reference(&cfg, Some(a.path())).unwrap();
    assert_eq!(reloaded.cdf, ra.cdf);
}

#[test]
fn exact_reference_is_cached() {
    let mut cfg = config("rejection", "n = 30");
    cfg.lattice = LatticeConfig::explicit(vec![(0.0, 0.06, 6), (0.0, 2.0, 6)]);
    cfg.reference = Some(ReferenceConfig {
        kind: ReferenceKind::Exact,
        n: None,
        epsilon: None,
        seed: None,
        refine: Some(1),
    });
    let dir = tempfile::tempdir().unwrap();
    let first = build_reference(&cfg, Some(dir.path())).unwrap();
    let second = build_reference(&cfg, Some(dir.path())).unwrap();
    assert_eq!(first.cdf, second.cdf);
    let v = first.cdf.values();
    assert!((v[v.len() - 1] - 1.0).abs() < 1e-9);
}

#[test]
fn report_aggregates_a_directory() {
    let root = tempfile::tempdir().unwrap();
    for (i, n) in [20usize, 80].into_iter().enumerate() {
        let mut cfg = config("rejection", &format!("n = {n}"));
        cfg.name = format!("grp-L{i}");
        run_experiment(&cfg, Some(&root.path().join(&cfg.name)), None).unwrap();
    }
    let rows = mlmc_abc::bench::report::collect_summaries(root.path()).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.group() == "grp"));
}

#[test]
fn bundled_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for e in fs::read_dir(dir).unwrap() {
        let cfg = ExperimentConfig::load(e.unwrap().path()).unwrap();
        assert_eq!(ExperimentConfig::parse(&cfg.to_toml().unwrap()).unwrap(), cfg);
        n += 1;
    }
    assert_eq!(n, 3);
}
