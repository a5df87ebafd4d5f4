use std::process::Command;

fn simulate() -> Command {
    Command::new(env!("CARGO_BIN_EXE_simulate"))
}

const SMALL: [&str; 12] = [
    "--mod", "16", "--taps", "3", "--channels", "2", "--frames", "2", "--code-length", "96", "--seed", "5",
];

#[test]
fn writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let status = simulate()
        .args(SMALL)
        .args(["--scheme", "d-ksep,lmmse", "--ebn0", "4:2:6", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "scheme,ebn0_db,ber,fer,bits,frames");
    assert_eq!(lines.len(), 1 + 4);
    assert!(lines[1].starts_with("d-ksep,4"));
    assert!(lines[4].starts_with("lmmse,6"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.conf");
    std::fs::write(
        &cfg,
        "schemes = bep\nmod = 4\ntaps = 2\nchannels = 1\nframes = 2\nebn0 = 5\ncode_length = 48\n",
    )
    .unwrap();
    let out = simulate().arg("--config").arg(&cfg).args(["--ebn0", "3,7"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.contains("\nbep,3.0,") && csv.contains("\nbep,7.0,"));
}

#[test]
fn emits_channel_files_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let chans = dir.path().join("ch");
    let diag = dir.path().join("d.jsonl");
    let status = simulate()
        .args(SMALL)
        .args(["--scheme", "lmmse", "--ebn0", "8", "--emit-channel"])
        .arg(&chans)
        .arg("--diagnostics")
        .arg(&diag)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let taps = ep_turbo::channel::read_taps(chans.join("channel_000.txt")).unwrap();
    assert_eq!(taps.len(), 3);
    assert!(chans.join("channel_001.txt").exists());
    assert_eq!(std::fs::read_to_string(diag).unwrap().lines().count(), 4);
}

#[test]
fn failures_give_one_line_and_nonzero_exit() {
    for args in [
        vec!["--scheme", "mlse"],
        vec!["--ebn0", "8:0:16"],
        vec!["--mod", "32"],
        vec!["--frames", "0"],
        vec!["--bogus"],
    ] {
        let out = simulate().args(&args).output().unwrap();
        assert!(!out.status.success(), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err}");
        assert!(err.starts_with("simulate: "));
    }
    let out = simulate().arg("--config").arg("/nonexistent/x.conf").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}
