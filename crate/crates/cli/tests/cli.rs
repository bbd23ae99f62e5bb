use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use corosa::forward::mri_simulate;
use corosa::metrics::{snr_db, ssim};
use corosa::phantom::mixed_phantom;
use corosa::{multires_init, BetaPolicy, Image, PyramidSchedule, SchattenOrder};
use corosa_cli::commands::{prepare, CSV_HEADER};
use corosa_cli::config::Preset;
use corosa_cli::io::{decode_f64, encode_f64, read_image, write_c64, write_f64, write_mask};
use corosa_cli::presets::{run_preset, WEIGHT_GRID};
use corosa_cli::{evaluate, restore, simulate, Overrides, RunConfig};
use proptest::prelude::*;

fn corosa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corosa")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

/// A 32x32 blurred phantom in `dir/sim`, with a restore config template.
fn tirf_fixture(dir: &Path) -> String {
    write_f64(&dir.join("truth.f64"), &mixed_phantom(32)).unwrap();
    let sim = write_config(
        dir,
        "sim.toml",
        "[input]\nground_truth = \"truth.f64\"\n[model]\nkind = \"convolution\"\n\
         [noise]\ngamma_p = 20.0\nsigma_eta = 1.0\nseed = 3\n[output]\ndir = \"sim\"\n",
    );
    simulate(&RunConfig::load(Path::new(&sim)).unwrap(), &Overrides::default()).unwrap();
    "[input]\nground_truth = \"truth.f64\"\nmeasurement = \"sim/measurement.f64\"\n\
     [model]\nkind = \"convolution\"\n[noise]\ngamma_p = 20.0\n\
     [solver]\nlambda = 0.03\nlevels = 2\ncycles = 2\nmax_iters = 40\n"
        .to_string()
}

fn load(path: &str) -> RunConfig {
    RunConfig::load(Path::new(path)).unwrap()
}

#[test]
fn zero_density_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    write_f64(&dir.path().join("truth.f64"), &mixed_phantom(16)).unwrap();
    let cfg = write_config(
        dir.path(),
        "mri.toml",
        "[input]\nground_truth = \"truth.f64\"\n[model]\nkind = \"fourier\"\nmask_kind = \"spiral\"\n\
         density = 0.0\n[noise]\npsnr_db = 20.0\nseed = 1\n[output]\ndir = \"out\"\n",
    );
    let out = corosa(&["simulate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.density"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn missing_and_unknown_keys_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.toml", "[model]\nkind = \"convolution\"\n[method]\npreset = \"tv1\"\n");
    let out = corosa(&["restore", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("solver.lambda"));

    let cfg = write_config(dir.path(), "b.toml", "[method]\npreset = \"tv3\"\n");
    let out = corosa(&["restore", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tv3"));

    let out = corosa(&["restore", "--config", dir.path().join("absent.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solver_failure_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let n = 16;
    // a mask without the DC sample leaves constants unobserved, so lambda = 0 is degenerate
    let mask = Image::from_fn(n, n, |x, y| ((x + 2 * y) % 3 == 1) as u8 as f64);
    write_mask(&dir.path().join("mask.pgm"), &mask).unwrap();
    write_c64(&dir.path().join("m.c64"), &mri_simulate(&mixed_phantom(n), &mask, 30.0, 1).unwrap()).unwrap();
    let cfg = write_config(
        dir.path(),
        "r.toml",
        "[input]\nmeasurement = \"m.c64\"\nmask = \"mask.pgm\"\n[model]\nkind = \"fourier\"\n\
         [solver]\nlambda = 0.0\nu = 1.0\nlevels = 1\nmax_iters = 5\n[method]\npreset = \"corosa\"\n\
         [output]\ndir = \"out\"\n",
    );
    let out = corosa(&["restore", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("degenerate"));
}

#[test]
fn indivisible_kspace_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mask = Image::filled(12, 12, 1.0);
    write_mask(&dir.path().join("mask.pgm"), &mask).unwrap();
    write_c64(&dir.path().join("m.c64"), &mri_simulate(&mixed_phantom(12), &mask, 30.0, 1).unwrap()).unwrap();
    let cfg = write_config(
        dir.path(),
        "r.toml",
        "[input]\nmeasurement = \"m.c64\"\nmask = \"mask.pgm\"\n[model]\nkind = \"fourier\"\n\
         [solver]\nlambda = 0.1\nlevels = 3\n[method]\npreset = \"tv1\"\n[output]\ndir = \"out\"\n",
    );
    let err = prepare(&load(&cfg), None).err().unwrap();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("solver.levels"));
}

#[test]
fn tv2_preset_is_the_fixed_second_order_path() {
    let dir = tempfile::tempdir().unwrap();
    let body = tirf_fixture(dir.path()) + "[method]\npreset = \"tv2\"\n[output]\ndir = \"r\"\n";
    let cfg = write_config(dir.path(), "r.toml", &body);
    let prep = prepare(&load(&cfg), None).unwrap();
    assert_eq!(prep.settings.admm.p, SchattenOrder::Two);
    assert_eq!(prep.cfg.solver.p, Some(2));
    let out = run_preset(&prep.op, &prep.m, &prep.settings).unwrap();
    let direct = multires_init(
        &prep.op,
        &prep.m,
        &PyramidSchedule::new(2, prep.settings.admm.clone()),
        BetaPolicy::Fixed(0.0),
    )
    .unwrap();
    assert_eq!(out.image, direct.image);
    assert!(out.beta.is_none());

    let clash = body.replace("levels = 2", "levels = 2\np = 1");
    let cfg = write_config(dir.path(), "clash.toml", &clash);
    assert_eq!(prepare(&load(&cfg), None).err().unwrap().exit_code(), 2);
}

#[test]
fn adaptive_presets_write_weights_and_fixed_ones_do_not() {
    let dir = tempfile::tempdir().unwrap();
    let base = tirf_fixture(dir.path());
    for (preset, has_beta) in [("corosa", true), ("corosa-i", true), ("tv1", false), ("hs", false)] {
        let body = format!("{base}[method]\npreset = \"{preset}\"\n[output]\ndir = \"{preset}\"\n");
        let cfg = write_config(dir.path(), &format!("{preset}.toml"), &body);
        restore(&load(&cfg), &Overrides::default()).unwrap();
        let out = dir.path().join(preset);
        for f in ["restored.f64", "restored.png", "trace.csv", "manifest.toml"] {
            assert!(out.join(f).is_file(), "{preset}: {f}");
        }
        assert_eq!(out.join("beta.f64").is_file(), has_beta, "{preset}");
        let img = read_image(&out.join("restored.f64")).unwrap();
        assert_eq!(img.dims(), (32, 32));
        if has_beta {
            let beta = read_image(&out.join("beta.f64")).unwrap();
            assert!(beta.min() >= 0.0 && beta.max() <= 1.0);
        }
        let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
        assert!(trace.starts_with("cycle,half_step,j_sa,"));
        assert_eq!(trace.contains(",image,"), preset == "corosa");
    }
}

#[test]
fn manifest_alone_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let body = tirf_fixture(dir.path()) + "[method]\npreset = \"cohs\"\n[output]\ndir = \"first\"\n";
    let cfg = write_config(dir.path(), "r.toml", &body);
    restore(&load(&cfg), &Overrides::default()).unwrap();
    let manifest = load(dir.path().join("first/manifest.toml").to_str().unwrap());
    let c = manifest.method.beta.expect("searched weight is recorded");
    assert!(WEIGHT_GRID.contains(&c));
    assert!(manifest.solver.u.is_some() && manifest.solver.intensity_scale == Some(1.0 / 20.0));

    let again = Overrides { out: Some(dir.path().join("second")), ..Overrides::default() };
    restore(&manifest, &again).unwrap();
    let a = fs::read(dir.path().join("first/restored.f64")).unwrap();
    let b = fs::read(dir.path().join("second/restored.f64")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn lambda_sweep_reports_the_best_run() {
    let dir = tempfile::tempdir().unwrap();
    let body = tirf_fixture(dir.path()) + "[method]\npreset = \"tv1\"\n[output]\ndir = \"sweep\"\n";
    let cfg = write_config(dir.path(), "r.toml", &body);
    let grid = vec![0.001, 0.03, 2.0];
    let scores = restore(&load(&cfg), &Overrides { lambda_grid: Some(grid.clone()), ..Overrides::default() }).unwrap();
    assert_eq!(scores.len(), 3);
    assert!(scores.windows(2).all(|w| w[0].ssim >= w[1].ssim));
    for l in grid {
        let m = load(dir.path().join(format!("sweep/lambda_{l}/manifest.toml")).to_str().unwrap());
        assert_eq!(m.solver.lambda, Some(l));
    }
    let csv = fs::read_to_string(dir.path().join("sweep/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn evaluate_appends_rows_in_a_stable_order() {
    let dir = tempfile::tempdir().unwrap();
    let base = tirf_fixture(dir.path());
    for preset in ["tv1", "hs"] {
        let body = format!("{base}[method]\npreset = \"{preset}\"\n[output]\ndir = \"{preset}\"\n");
        let cfg = write_config(dir.path(), &format!("{preset}.toml"), &body);
        restore(&load(&cfg), &Overrides::default()).unwrap();
    }
    let cfg = write_config(
        dir.path(),
        "ev.toml",
        "[input]\nground_truth = \"truth.f64\"\nname = \"phantom\"\n\
         [evaluate]\nruns = [\"tv1\", \"hs\", \"truth.f64\"]\ncsv = \"scores.csv\"\n",
    );
    let truth_before = fs::read(dir.path().join("truth.f64")).unwrap();
    let csv = evaluate(&load(&cfg), &Overrides::default()).unwrap();
    evaluate(&load(&cfg), &Overrides::default()).unwrap();
    assert_eq!(fs::read(dir.path().join("truth.f64")).unwrap(), truth_before);

    let text = fs::read_to_string(csv).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 7);
    let methods: Vec<_> = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(methods, ["tv1", "hs", "truth", "tv1", "hs", "truth"]);
    let tv1: Vec<_> = lines[1].split(',').collect();
    assert_eq!((tv1[0], tv1[2], tv1[3], tv1[4], tv1[5]), ("phantom", "0.03", "1", "1", "2"));
    // the reference scored against itself
    let own: Vec<_> = lines[3].split(',').collect();
    assert_eq!(own[6], "1");
}

#[test]
fn evaluate_matches_the_metrics_on_a_two_by_two_pair() {
    let dir = tempfile::tempdir().unwrap();
    let reference = Image::new(2, 2, vec![0.1, 0.9, 0.4, 0.6]).unwrap();
    let estimate = Image::new(2, 2, vec![0.2, 0.7, 0.4, 0.5]).unwrap();
    write_f64(&dir.path().join("ref.f64"), &reference).unwrap();
    write_f64(&dir.path().join("est.f64"), &estimate).unwrap();
    let cfg = write_config(
        dir.path(),
        "ev.toml",
        "[input]\nground_truth = \"ref.f64\"\n[evaluate]\nruns = [\"est.f64\"]\n[output]\ndir = \"report\"\n",
    );
    let out = corosa(&["evaluate", "--config", &cfg]);
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("report/scores.csv")).unwrap();
    let row: Vec<_> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[6].parse::<f64>().unwrap(), ssim(&reference, &estimate).unwrap());
    assert_eq!(row[7].parse::<f64>().unwrap(), snr_db(&reference, &estimate).unwrap());
}

#[test]
fn evaluate_rejects_mismatched_sizes() {
    let dir = tempfile::tempdir().unwrap();
    write_f64(&dir.path().join("ref.f64"), &Image::filled(4, 4, 0.5)).unwrap();
    write_f64(&dir.path().join("est.f64"), &Image::filled(4, 3, 0.5)).unwrap();
    let cfg = write_config(
        dir.path(),
        "ev.toml",
        "[input]\nground_truth = \"ref.f64\"\n[evaluate]\nruns = [\"est.f64\"]\ncsv = \"s.csv\"\n",
    );
    let out = corosa(&["evaluate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("s.csv").exists());
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    write_f64(&dir.path().join("truth.f64"), &mixed_phantom(16)).unwrap();
    let cfg = write_config(
        dir.path(),
        "sim.toml",
        "[input]\nground_truth = \"truth.f64\"\n[model]\nkind = \"convolution\"\n\
         [noise]\ngamma_p = 10.0\nsigma_eta = 1.0\nseed = 1\n[output]\ndir = \"a\"\n",
    );
    let b = dir.path().join("b");
    assert!(corosa(&["simulate", "--config", &cfg]).status.success());
    assert!(corosa(&["simulate", "--config", &cfg, "--seed", "2", "--out", b.to_str().unwrap()]).status.success());
    let ma = fs::read(dir.path().join("a/measurement.f64")).unwrap();
    let mb = fs::read(b.join("measurement.f64")).unwrap();
    assert_ne!(ma, mb);
    let manifest = load(b.join("manifest.toml").to_str().unwrap());
    assert_eq!(manifest.noise.seed, Some(2));
    assert_eq!(manifest.method.preset, None::<Preset>);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn raw_format_round_trips_every_bit(w in 1usize..6, h in 1usize..6, bits in prop::collection::vec(any::<u64>(), 36)) {
        let data: Vec<f64> = bits[..w * h].iter().map(|&b| f64::from_bits(b)).filter(|v| v.is_finite()).collect();
        prop_assume!(data.len() == w * h);
        let img = Image::new(w, h, data).unwrap();
        let back = decode_f64(&encode_f64(&img)).unwrap();
        prop_assert!(back.data().iter().zip(img.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
