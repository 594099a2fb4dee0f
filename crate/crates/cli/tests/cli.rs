use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

const FIXTURES: [&str; 3] = ["chain", "diamond", "figure1"];

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../kb/{name}.knet.json"))
}

fn knet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_knet")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write_temp(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn infer_prints_seven_digits() {
    let chain = fixture("chain");
    let out = knet(&["infer", chain.to_str().unwrap(), "--evidence", "B=t", "--query", "A"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out), "{\"A\":{\"t\":0.6923077,\"f\":0.3076923}}\n");
}

#[test]
fn engines_print_identical_bytes() {
    let cases: [(&str, &[&str]); 6] = [
        ("chain", &[]),
        ("chain", &["B=f"]),
        ("diamond", &[]),
        ("diamond", &["D=t", "B=f"]),
        ("figure1", &["LAB-TEST=positive"]),
        ("figure1", &["TREAT?=treat"]),
    ];
    for (name, evidence) in cases {
        let path = fixture(name);
        let run = |engine: &str| {
            let mut args = vec!["infer", path.to_str().unwrap(), "--engine", engine];
            if !evidence.is_empty() {
                args.push("--evidence");
                args.extend(evidence);
            }
            let out = knet(&args);
            assert!(out.status.success(), "{}", stderr(&out));
            out.stdout
        };
        let exact = run("exact");
        assert_eq!(exact, run("oracle"), "{name} {evidence:?}");
        assert_eq!(exact, run("auto"));
        assert_eq!(exact, run("exact"), "output is deterministic");
    }
}

#[test]
fn validate_reports_and_exits() {
    for name in FIXTURES {
        let out = knet(&["validate", fixture(name).to_str().unwrap()]);
        assert!(out.status.success(), "{}", stderr(&out));
        assert!(stdout(&out).starts_with("valid: "));
    }
    let dir = tempfile::tempdir().unwrap();
    let cyclic = write_temp(
        &dir,
        "cyclic.knet.json",
        r#"{"format": "knet-kb", "version": 1, "kind": "belief", "nodes": [
            {"id": "A", "kind": "chance", "states": ["t", "f"], "parents": ["B"], "cpt": [[0.5, 0.5], [0.5, 0.5]]},
            {"id": "B", "kind": "chance", "states": ["t", "f"], "parents": ["A"], "cpt": [[0.5, 0.5], [0.5, 0.5]]}]}"#,
    );
    let out = knet(&["validate", &cyclic]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("Acyclicity"), "{}", stdout(&out));
    assert!(stderr(&out).starts_with("error:"));
    assert_eq!(stderr(&out).lines().count(), 1);
}

#[test]
fn usage_errors_exit_2() {
    let chain = fixture("chain");
    let chain = chain.to_str().unwrap();
    for args in [
        vec!["infer", chain, "--evidence", "B"],
        vec!["infer", chain, "--evidence", "Z=t"],
        vec!["infer", chain, "--evidence", "B=maybe"],
        vec!["infer", chain, "--engine", "fast"],
        vec!["infer", chain, "--query", "Z"],
        vec!["decide", chain],
        vec!["frobnicate"],
    ] {
        let out = knet(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(stderr(&out).starts_with("error:"), "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn impossible_evidence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let det = write_temp(
        &dir,
        "det.knet.json",
        r#"{"format": "knet-kb", "version": 1, "kind": "belief", "nodes": [
            {"id": "A", "kind": "chance", "states": ["t", "f"], "cpt": [[0.5, 0.5]]},
            {"id": "B", "kind": "chance", "states": ["t", "f"], "parents": ["A"], "cpt": [[1, 0], [0.5, 0.5]]}]}"#,
    );
    for engine in ["exact", "oracle"] {
        let out = knet(&["infer", &det, "--evidence", "A=t", "B=f", "--engine", engine]);
        assert_eq!(out.status.code(), Some(3));
        assert_eq!(stderr(&out), "error: the findings have zero probability\n");
    }
    let out = knet(&["infer", dir.path().join("missing.knet.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn decide_ranks_treatments() {
    let fig = fixture("figure1");
    let out = knet(&["decide", fig.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["best"]["configuration"]["TREAT?"], "no-treat");
    assert_eq!(v["ranked"][1]["expected_utility"], 87.5);

    let out = knet(&["decide", fig.to_str().unwrap(), "--evidence", "LAB-TEST=positive"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["best"]["configuration"]["TREAT?"], "treat");
}

#[test]
fn fixtures_are_canonical() {
    for name in FIXTURES {
        let out = knet(&["fmt", "--check", fixture(name).to_str().unwrap()]);
        assert!(out.status.success(), "{name}: {}", stderr(&out));
    }
}

#[test]
fn consult_session_over_stdin() {
    let dir = tempfile::tempdir().unwrap();
    let export = dir.path().join("session.json");
    let script = format!(
        "assert B=t\nbeliefs A\nwhatif A=f\nassert B=x\nrecommend\nretract B\nbeliefs A\nhistory\nexport {}\nquit\nbeliefs\n",
        export.display()
    );
    let mut child = Command::new(env!("CARGO_BIN_EXE_knet"))
        .args(["consult", fixture("chain").to_str().unwrap()])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(script.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let lines: Vec<String> = stdout(&out).lines().map(str::to_owned).collect();
    assert_eq!(lines.len(), 6, "{lines:?}");
    assert_eq!(lines[1], "{\"A\":{\"t\":0.6923077,\"f\":0.3076923}}");
    assert!(lines[2].starts_with("{\"beliefs\":{\"A\":{\"t\":0.0,\"f\":1.0}"));
    assert_eq!(lines[3], "{\"A\":{\"t\":0.2,\"f\":0.8},\"B\":{\"t\":0.26,\"f\":0.74}}");
    assert_eq!(lines[4], "{\"A\":{\"t\":0.2,\"f\":0.8}}");
    assert!(lines[5].contains("\"kind\":\"retracted\""));

    let errors = stderr(&out);
    assert_eq!(errors.lines().filter(|l| l.starts_with("error:")).count(), 2, "{errors}");
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&export).unwrap()).unwrap();
    assert_eq!(doc["kb_name"], "chain");
    assert_eq!(doc["events"].as_array().unwrap().len(), 3);
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn http_get(port: u16, path: &str) -> Option<String> {
    let mut stream = TcpStream::connect(("127.0.0.1", port)).ok()?;
    write!(stream, "GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").ok()?;
    let mut text = String::new();
    stream.read_to_string(&mut text).ok()?;
    Some(text)
}

#[test]
fn serve_answers_over_http() {
    let port = free_port();
    let kb_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../kb");
    let mut child = Command::new(env!("CARGO_BIN_EXE_knet"))
        .args(["serve", "--kb-dir", kb_dir.to_str().unwrap(), "--port", &port.to_string()])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(20);
    let mut reply = None;
    while Instant::now() < deadline {
        if let Some(text) = http_get(port, "/kbs") {
            reply = Some(text);
            break;
        }
        std::thread::sleep(Duration::from_millis(50));
    }
    child.kill().unwrap();
    child.wait().unwrap();
    let reply = reply.expect("service did not come up");
    assert!(reply.starts_with("HTTP/1.1 200"), "{reply}");
    assert!(reply.contains("\"name\":\"figure1\""));
}
