use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_timelens-sim");

fn experiment() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/experiment.toml")
}

fn sim(args: &[&str], threads: Option<&str>) -> Output {
    let mut c = Command::new(BIN);
    c.args(args);
    match threads {
        Some(t) => c.env("TIMELENS_THREADS", t),
        None => c.env_remove("TIMELENS_THREADS"),
    };
    c.output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const SOURCE: &str = r#"
[source]
kind = "gaussian"
center_wavelength = "1551.5 nm"
input_fwhm = "2 nm"
reference_fwhm = "0.2 nm"
"#;

/// Parses a CSV strictly: header present, constant width, numeric cells
/// except in the named text columns.
fn strict_csv(text: &str, text_columns: &[&str]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().expect("header").split(',').map(String::from).collect();
    let mut rows = Vec::new();
    for line in lines {
        let cells: Vec<String> = line.split(',').map(String::from).collect();
        assert_eq!(cells.len(), header.len(), "ragged row `{line}`");
        for (h, c) in header.iter().zip(&cells) {
            if !text_columns.contains(&h.as_str()) {
                c.parse::<f64>().unwrap_or_else(|_| panic!("non-numeric `{c}` in column {h}"));
            }
        }
        rows.push(cells);
    }
    (header, rows)
}

fn column(rows: &[Vec<String>], header: &[String], name: &str) -> Vec<f64> {
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

fn summary(path: &Path) -> Vec<(String, f64)> {
    let (h, rows) = strict_csv(&fs::read_to_string(path).unwrap(), &["quantity"]);
    assert_eq!(h, ["quantity", "value"]);
    rows.into_iter().map(|r| (r[0].clone(), r[1].parse().unwrap())).collect()
}

fn lookup(s: &[(String, f64)], key: &str) -> f64 {
    s.iter().find(|(k, _)| k == key).unwrap_or_else(|| panic!("missing {key}")).1
}

#[test]
fn simulate_experiment_writes_the_documented_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let o = sim(&["simulate", experiment().to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));

    let (h, rows) = strict_csv(&fs::read_to_string(out.join("dip.csv")).unwrap(), &[]);
    assert_eq!(h, ["delay_ps", "p", "p_fit", "coincidences", "singles_a", "singles_b"]);
    assert_eq!(rows.len(), 241);
    let p = column(&rows, &h, "p");
    assert!(p.iter().all(|v| (0.0..=0.5 + 1e-12).contains(v)));

    let (h, rows) = strict_csv(&fs::read_to_string(out.join("spectra.csv")).unwrap(), &["which"]);
    assert_eq!(h, ["wavelength_nm", "intensity_norm", "which"]);
    let mut which: Vec<&str> = rows.iter().map(|r| r[2].as_str()).collect();
    which.dedup();
    assert_eq!(which, ["input", "converted", "reference"]);

    let s = summary(&out.join("summary.csv"));
    let v = lookup(&s, "visibility_michelson");
    assert!((v - 0.6378).abs() < 0.005, "michelson visibility {v}");
    assert!(lookup(&s, "bootstrap_sigma_visibility_depth") > 0.0);

    for f in ["dip.svg", "spectra.svg"] {
        let svg = fs::read_to_string(out.join(f)).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }
    let manifest = fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains("config_sha256 = \"") && manifest.contains("seed = 1"));
}

fn files_without_timestamp(dir: &Path) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let text = fs::read_to_string(&p).unwrap();
                let kept: Vec<&str> = text.lines().filter(|l| !l.starts_with("timestamp_unix")).collect();
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), kept.join("\n")));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn same_seed_gives_byte_identical_outputs_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = experiment();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    for (out, threads, seed) in [(&a, "1", "7"), (&b, "3", "7"), (&c, "1", "8")] {
        let o = sim(&["simulate", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", seed], Some(threads));
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let (fa, fb, fc) = (files_without_timestamp(&a), files_without_timestamp(&b), files_without_timestamp(&c));
    assert_eq!(fa, fb);
    let dip = |f: &[(String, String)]| f.iter().find(|(n, _)| n == "dip.csv").unwrap().1.clone();
    assert_ne!(dip(&fa), dip(&fc));
    let hash = |f: &[(String, String)]| {
        let m = &f.iter().find(|(n, _)| n == "manifest.toml").unwrap().1;
        m.lines().find(|l| l.starts_with("config_sha256")).unwrap().to_string()
    };
    assert_eq!(hash(&fa), hash(&fc), "the seed is not a physical parameter");
}

#[test]
fn manifest_hash_tracks_physical_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let base = fs::read_to_string(experiment()).unwrap();
    let changed = base.replace("gdd = \"22 ps2\"", "gdd = \"22.5 ps2\"");
    let same_value = format!("# reformatted\n{}", base.replace("gdd = \"22 ps2\"", "gdd   =   \"22.0   ps2\"").replace("seed = 1", "seed = 5"));
    let mut hashes = Vec::new();
    for (name, text) in [("base", &base), ("changed", &changed), ("same", &same_value)] {
        let cfg = write_config(dir.path(), &format!("{name}.toml"), text);
        let out = dir.path().join(name);
        let o = sim(&["analytic", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
        assert!(o.status.success(), "{}", stderr(&o));
        let m = fs::read_to_string(out.join("manifest.toml")).unwrap();
        hashes.push(m.lines().find(|l| l.starts_with("config_sha256")).unwrap().to_string());
    }
    assert_ne!(hashes[0], hashes[1]);
    assert_eq!(hashes[0], hashes[2]);
}

#[test]
fn analytic_compression_ten() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("an");
    let o = sim(&["analytic", "--compression", "10", "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("0.9975"), "{}", stdout(&o));
    let s = summary(&out.join("design.csv"));
    assert!((lookup(&s, "visibility_michelson") - 0.9975).abs() < 5e-5);
    assert!((lookup(&s, "gdd_ps2") - 11.3).abs() < 0.1);

    let (h, rows) = strict_csv(&fs::read_to_string(out.join("visibility_vs_compression.csv")).unwrap(), &[]);
    let v = column(&rows, &h, "visibility_michelson");
    assert!(v.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn optimize_writes_table_and_per_scenario_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "opt.toml",
        &format!(
            "{SOURCE}\n[optimize]\nrows = [3]\nbudget = 150\n\n[[optimize.scenario]]\nname = \"ideal\"\nlens = \"quadratic\"\ngdd = \"22 ps2\"\nfrequency = \"10 GHz\"\namplitude = {{ min = \"0 pi_rad\", max = \"8 pi_rad\" }}\n"
        ),
    );
    let out = dir.path().join("opt");
    let o = sim(&["optimize", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--grid-n", "8192"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let (h, rows) = strict_csv(&fs::read_to_string(out.join("optimizer.csv")).unwrap(), &["scenario"]);
    assert_eq!(h, ["scenario", "f_m_GHz", "A_pi", "gdd_ps2", "visibility_michelson", "visibility_depth", "evals"]);
    assert_eq!(rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), ["row3", "ideal"]);
    let v = column(&rows, &h, "visibility_michelson");
    assert!(v[1] > v[0], "an ideal lens beats the sinusoidal one: {v:?}");
    for name in ["row3", "ideal"] {
        let (_, trace) = strict_csv(&fs::read_to_string(out.join(name).join("trace.csv")).unwrap(), &[]);
        assert!(!trace.is_empty());
        assert!(out.join(name).join("convergence.svg").exists());
    }
}

#[test]
fn spectrum_adds_the_measured_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sp");
    let o = sim(&["spectrum", experiment().to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, rows) = strict_csv(&fs::read_to_string(out.join("spectra.csv")).unwrap(), &["which"]);
    let mut which: Vec<&str> = rows.iter().map(|r| r[2].as_str()).collect();
    which.dedup();
    assert_eq!(which, ["input", "converted", "reference", "dft"]);
    let s = summary(&out.join("summary.csv"));
    assert!(lookup(&s, "dft_converted_fwhm_nm") > lookup(&s, "converted_fwhm_nm"));
    assert!((lookup(&s, "nominal_resolution_nm") - 0.22).abs() < 1e-3);
}

#[test]
fn unitless_quantity_is_a_config_error_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &format!("{SOURCE}\n[[pipeline]]\ntype = \"gdd\"\ngdd = 22\n"));
    let out = dir.path().join("o");
    let o = sim(&["simulate", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("pipeline[0].gdd"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn empty_pipeline_is_refused_by_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "empty.toml",
        &format!("{SOURCE}\n[scan]\nstart = \"-10 ps\"\nstop = \"10 ps\"\nstep = \"1 ps\"\n"),
    );
    let out = dir.path().join("o");
    let o = sim(&["simulate", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("pipeline must contain at least one element"), "{}", stderr(&o));
    assert!(!out.exists() && !dir.path().join("o.partial").exists());
}

#[test]
fn unknown_keys_and_bad_arguments_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "typo.toml", &format!("{SOURCE}\nsede = 3\n"));
    let o = sim(&["simulate", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sede"), "{}", stderr(&o));

    assert_eq!(sim(&["teleport", cfg.to_str().unwrap()], None).status.code(), Some(2));
    assert_eq!(sim(&["simulate"], None).status.code(), Some(2));
    assert_eq!(sim(&["analytic", "--grid-n", "64"], None).status.code(), Some(2));
    let o = sim(&["analytic", "--out", dir.path().join("x").to_str().unwrap()], Some("zero"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("TIMELENS_THREADS"));
}

#[test]
fn compute_failure_exits_with_one_and_leaves_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("coarse");
    let o = sim(&["simulate", experiment().to_str().unwrap(), "--out", out.to_str().unwrap(), "--grid-n", "1024"], None);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("aliasing"), "{}", stderr(&o));
    assert!(!out.exists() && !dir.path().join("coarse.partial").exists());
}

#[test]
fn unwritable_output_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    let o = sim(&["analytic", "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}
