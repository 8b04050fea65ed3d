use std::path::Path;
use std::process::Command;

fn keyforge(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_keyforge")).args(args).output().expect("binary runs")
}

fn spec(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("specs").join(name).display().to_string()
}

#[test]
fn compile_writes_named_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gp");
    let o = keyforge(&["compile", &spec("gamepad.kf"), "--out", out.to_str().unwrap(), "--svg"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut names: Vec<String> =
        std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["gamepad.svg", "gamepad_cpla.stl", "gamepad_pla.stl", "gamepad_report.json"]);
}

#[test]
fn no_report_flag() {
    let dir = tempfile::tempdir().unwrap();
    let o = keyforge(&["compile", &spec("piano.kf"), "--out", dir.path().to_str().unwrap(), "--no-report"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!dir.path().join("piano_report.json").exists());
    assert!(dir.path().join("piano_pla.stl").exists());
}

#[test]
fn duplicate_id_exits_1_without_files() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("dup.kf");
    std::fs::write(&src, "device dup\nrow 0 keys A B A\n").unwrap();
    let out = dir.path().join("out");
    let o = keyforge(&["compile", src.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("[validate]") && err.contains("duplicate"), "{err}");
    assert!(!out.exists());
}

#[test]
fn unreadable_spec_exits_1() {
    let o = keyforge(&["compile", "/nonexistent/x.kf", "--out", "/tmp/unused-keyforge-out"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!Path::new("/tmp/unused-keyforge-out").exists());
}

#[test]
fn validate_and_version_and_parts() {
    let o = keyforge(&["validate", &spec("qwerty.kf")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("27 key(s)"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.kf");
    std::fs::write(&bad, "key A kind lever at 0 0\n").unwrap();
    let o = keyforge(&["validate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));

    let o = keyforge(&["version"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), format!("keyforge {}", env!("CARGO_PKG_VERSION")));

    let o = keyforge(&["parts", "list"]);
    assert_eq!(o.status.code(), Some(0));
    let s = String::from_utf8_lossy(&o.stdout);
    assert_eq!(s.lines().count(), 1 + 18);
    assert!(s.contains("2.51±0.15"));
}
