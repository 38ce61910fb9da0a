use std::fs;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use spca::cli::{read_lines, read_manifest};
use spca::rqb::{run_pca, Algorithm, PcaConfig};
use spca::sketch::{read_matrix, FileLayout, MatrixStream};
use spca::synth::{synth_matrix, SpectrumSpec};

fn spca(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spca")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn manifest_value(path: &Path, key: &str) -> String {
    read_manifest(path)
        .unwrap()
        .into_iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v)
        .unwrap_or_else(|| panic!("no {key} in manifest"))
}

#[test]
fn gen_writes_payload_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.bin");
    let o = spca(&["gen", "--spectrum", "type5", "--rows", "100", "--cols", "80", "--seed", "3", "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::metadata(&out).unwrap().len(), 100 * 80 * 4);
    let truth = read_lines(&dir.path().join("m.bin.truth.csv")).unwrap();
    assert_eq!(truth.len(), 80);
    assert_eq!(truth, SpectrumSpec::Type5.values(80));

    let again = dir.path().join("again.bin");
    spca(&["gen", "--spectrum", "type5", "--rows", "100", "--cols", "80", "--seed", "3", "--out", p(&again)]);
    assert_eq!(fs::read(&out).unwrap(), fs::read(&again).unwrap());

    let headed = dir.path().join("h.bin");
    let o = spca(&[
        "gen", "--spectrum", "type5", "--rows", "100", "--cols", "80", "--seed", "3", "--out", p(&headed), "--header",
        "--dtype", "f64",
    ]);
    assert!(o.status.success());
    assert_eq!(fs::metadata(&headed).unwrap().len(), 22 + 100 * 80 * 8);
}

#[test]
fn pca_matches_library_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("a.bin");
    spca(&["gen", "--spectrum", "type4", "--rows", "300", "--cols", "300", "--out", p(&data), "--dtype", "f64"]);
    let run = |prefix: &str| {
        let prefix = dir.path().join(prefix);
        let o = spca(&[
            "pca", "--input", p(&data), "--rows", "300", "--cols", "300", "--dtype", "f64", "--k", "20", "--seed", "5",
            "--out-prefix", p(&prefix),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        prefix
    };
    let first = run("one");
    let second = run("two");
    for suffix in [".U.bin", ".S.bin", ".V.bin", ".S.csv"] {
        let a = fs::read(format!("{}{suffix}", first.display())).unwrap();
        let b = fs::read(format!("{}{suffix}", second.display())).unwrap();
        assert_eq!(a, b, "{suffix} differs between runs");
    }

    let a = synth_matrix(&SpectrumSpec::Type4, 300, 300, 1).unwrap().a;
    let cfg = PcaConfig::new(20).with_seed(5);
    let lib = run_pca(&mut MatrixStream::new(&a, 30), &cfg, Algorithm::SinglePass).unwrap().svd;
    let s = read_lines(&dir.path().join("one.S.csv")).unwrap();
    assert_eq!(s, lib.s);
    let v = read_matrix(dir.path().join("one.V.bin"), FileLayout::Spca1).unwrap();
    assert_eq!(v, lib.v);

    let manifest = dir.path().join("one.manifest.txt");
    assert_eq!(manifest_value(&manifest, "passes"), "1");
    assert_eq!(manifest_value(&manifest, "rows_read"), "300");
    assert_eq!(manifest_value(&manifest, "sketch_width"), "30");
    assert_eq!(manifest_value(&manifest, "retained_floats"), manifest_value(&manifest, "retained_bound"));
}

#[test]
fn two_pass_algorithms_report_two_passes() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("a.bin");
    spca(&["gen", "--spectrum", "type2", "--rows", "120", "--cols", "90", "--out", p(&data), "--header"]);
    for (extra, passes) in [(vec!["--algorithm", "basic"], "2"), (vec!["--power", "1"], "2"), (vec![], "1")] {
        let prefix = dir.path().join("r");
        let mut args = vec!["pca", "--input", p(&data), "--k", "10", "--out-prefix", p(&prefix)];
        args.extend(extra);
        let o = spca(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(manifest_value(&dir.path().join("r.manifest.txt"), "passes"), passes);
    }
}

#[test]
fn usage_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("a.bin");
    spca(&["gen", "--spectrum", "type2", "--rows", "50", "--cols", "40", "--out", p(&data)]);
    let prefix = dir.path().join("r");
    let base = ["pca", "--input", p(&data), "--rows", "50", "--cols", "40", "--out-prefix", p(&prefix)];
    let with = |extra: &[&str]| {
        let mut args = base.to_vec();
        args.extend_from_slice(extra);
        spca(&args).status.code()
    };
    assert_eq!(with(&["--k", "41"]), Some(2));
    assert_eq!(with(&["--k", "5", "--orientation", "column-major"]), Some(2));
    assert_eq!(with(&["--k", "5", "--power", "2"]), Some(2));
    assert_eq!(with(&["--k", "5", "--algorithm", "fastest"]), Some(2));
    assert_eq!(spca(&["pca", "--k", "5"]).status.code(), Some(2));
    assert_eq!(with(&["--k", "5"]), Some(0));
}

#[test]
fn runtime_errors_exit_with_code_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.bin");
    let prefix = dir.path().join("r");
    let o = spca(&["pca", "--input", p(&missing), "--rows", "5", "--cols", "5", "--k", "1", "--out-prefix", p(&prefix)]);
    assert_eq!(o.status.code(), Some(1));

    let short = dir.path().join("short.bin");
    fs::write(&short, [0u8; 30]).unwrap();
    let o = spca(&["pca", "--input", p(&short), "--rows", "5", "--cols", "5", "--k", "1", "--out-prefix", p(&prefix)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn standard_input_supports_single_pass_only() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("a.bin");
    spca(&["gen", "--spectrum", "type3", "--rows", "80", "--cols", "60", "--out", p(&data)]);
    let prefix = dir.path().join("r");
    let piped = |algorithm: &str| {
        Command::new(env!("CARGO_BIN_EXE_spca"))
            .args(["pca", "--input", "-", "--cols", "60", "--k", "5", "--algorithm", algorithm, "--out-prefix", p(&prefix)])
            .stdin(Stdio::from(fs::File::open(&data).unwrap()))
            .output()
            .unwrap()
    };
    let o = piped("single-pass");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(manifest_value(&dir.path().join("r.manifest.txt"), "rows"), "80");
    assert_eq!(piped("basic").status.code(), Some(2));
}

#[test]
fn compare_writes_one_row_per_run_and_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.csv");
    let o = spca(&[
        "compare", "--spectrum", "type1", "--rows", "150", "--cols", "120", "--k", "10", "--seeds", "3", "--algorithms",
        "single-pass,basic,legacy", "--out", p(&report),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&report).unwrap();
    let (runs, summary) = text.split_once("# summary\n").unwrap();
    let mut reader = csv::Reader::from_reader(runs.as_bytes());
    let headers = reader.headers().unwrap().clone();
    assert_eq!(&headers[0], "algorithm");
    assert_eq!(headers.len(), 11 + 10);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 9);
    let summary_rows: Vec<&str> = summary.lines().collect();
    assert_eq!(summary_rows.len(), 4);
    assert!(summary_rows[1].starts_with("single-pass,"));
    let passes = headers.iter().position(|h| h == "passes").unwrap();
    for row in &rows {
        let expected = if &row[0] == "basic" { "2" } else { "1" };
        assert_eq!(&row[passes], expected);
    }
}

#[test]
fn compare_against_a_precomputed_reference() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("a.bin");
    spca(&["gen", "--spectrum", "type3", "--rows", "120", "--cols", "100", "--out", p(&data), "--header"]);
    let reference = dir.path().join("ref");
    let o = spca(&["pca", "--input", p(&data), "--k", "8", "--oversample", "32", "--power", "1", "--out-prefix", p(&reference)]);
    assert!(o.status.success());
    let report = dir.path().join("report.csv");
    let o = spca(&[
        "compare", "--input", p(&data), "--k", "8", "--seeds", "2", "--reference", p(&reference), "--out", p(&report),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&report).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 + 3);
}

#[test]
fn oversized_exact_reference_suggests_a_precomputed_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = spca(&[
        "compare", "--spectrum", "type2", "--rows", "5000", "--cols", "2001", "--k", "5", "--out",
        p(&dir.path().join("r.csv")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--reference"));
}
