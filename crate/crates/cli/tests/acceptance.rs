//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::PathBuf;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use knet_core::inference::{oracle_expected_utility, propagate_polytree};
use knet_core::kbformat::{canonical_order, canonicalize, parse, serialize, Mode};
use knet_core::model::{is_polytree, validate, Cpt, Node};
use knet_core::random::{
    random_dag, random_decision_findings, random_decision_network, random_findings,
    random_multiply_connected, random_polytree, DecisionShape, NetworkShape,
};
use knet_core::{
    find_loop_cutset, infer, oracle_joint, BeliefAssignment, DecisionEvaluator, Findings, InferenceError,
    Network, NodeId, PreparedNetwork, Recommendation, Session, SessionError,
};
use knet_service::KbCatalog;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

const FIXTURES: [&str; 3] = ["chain", "diamond", "figure1"];

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(message())
    }
}

fn kb_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../kb")
}

fn fixture_path(name: &str) -> PathBuf {
    kb_dir().join(format!("{name}.knet.json"))
}

fn fixture(name: &str) -> Network {
    parse(&std::fs::read_to_string(fixture_path(name)).unwrap()).unwrap()
}

/// A small network with a deterministic row, so some findings are impossible.
fn gate() -> Network {
    parse(
        r#"{"format": "knet-kb", "version": 1, "kind": "belief", "name": "gate", "nodes": [
            {"id": "A", "kind": "chance", "states": ["t", "f"], "cpt": [[0.4, 0.6]]},
            {"id": "B", "kind": "chance", "states": ["t", "f"], "cpt": [[0.7, 0.3]]},
            {"id": "C", "kind": "chance", "states": ["on", "off"], "parents": ["A", "B"],
             "cpt": [[1, 0], [0.5, 0.5], [0.2, 0.8], [0, 1]]},
            {"id": "D", "kind": "chance", "states": ["x", "y", "z"], "parents": ["C"],
             "cpt": [[0.6, 0.4, 0], [0.1, 0.2, 0.7]]}]}"#,
    )
    .unwrap()
}

fn max_diff(a: &BeliefAssignment, b: &BeliefAssignment) -> f64 {
    a.max_abs_difference(b)
}

/// Network with every arc leaving a cutset node removed.
fn cut(network: &Network, cutset: &std::collections::BTreeSet<NodeId>) -> Network {
    let mut out = network.clone();
    for node in &mut out.nodes {
        if let Node::Chance(c) = node {
            c.parents.retain(|p| !cutset.contains(p));
            let rows = network
                .parent_cardinalities(&Node::Chance(c.clone()))
                .map(|cards| cards.iter().product())
                .unwrap_or(1);
            c.cpt = Cpt::uniform(rows, c.states.len());
        }
    }
    out
}

fn polytree_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x9017);
    let mut worst = 0.0f64;
    for i in 0..500 {
        let net = random_polytree(&mut rng, &NetworkShape::desk());
        let findings = random_findings(&mut rng, &net, 4);
        let got = propagate_polytree(&net, &findings).map_err(|e| format!("case {i}: {e}"))?;
        let want = oracle_joint(&net, &findings).map_err(|e| format!("case {i}: {e}"))?;
        let d = max_diff(&got.beliefs, &want.beliefs);
        ensure(d < 1e-9, || format!("case {i}: deviation {d:e}"))?;
        worst = worst.max(d);
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("500 networks, max deviation {worst:.1e}, {:.2}s", elapsed.as_secs_f64()))
}

fn multiply_connected_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1009);
    let mut worst = 0.0f64;
    let mut largest_cutset = 0;
    for i in 0..200 {
        let net = random_multiply_connected(&mut rng, &NetworkShape::desk());
        let cutset = find_loop_cutset(&net);
        ensure(is_polytree(&cut(&net, &cutset)), || format!("case {i}: cutset {cutset:?} leaves a loop"))?;
        largest_cutset = largest_cutset.max(cutset.len());
        let findings = random_findings(&mut rng, &net, 4);
        let got = infer(&net, &findings).map_err(|e| format!("case {i}: {e}"))?;
        let want = oracle_joint(&net, &findings).map_err(|e| format!("case {i}: {e}"))?;
        let d = max_diff(&got.beliefs, &want.beliefs);
        ensure(d < 1e-9, || format!("case {i}: deviation {d:e}"))?;
        worst = worst.max(d);
    }
    Ok(format!("200 networks, max deviation {worst:.1e}, cutsets up to {largest_cutset} nodes"))
}

fn evidence_probability() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xE71D);
    let mut worst = [0.0f64; 2];
    for i in 0..400 {
        let looped = i % 2 == 1;
        let net = if looped {
            random_multiply_connected(&mut rng, &NetworkShape::desk())
        } else {
            random_polytree(&mut rng, &NetworkShape::desk())
        };
        let findings = random_findings(&mut rng, &net, 6);
        let got = infer(&net, &findings).map_err(|e| format!("case {i}: {e}"))?;
        let want = oracle_joint(&net, &findings).map_err(|e| format!("case {i}: {e}"))?;
        let d = (got.evidence_probability - want.evidence_probability).abs();
        let tol = if looped { 1e-9 } else { 1e-12 };
        ensure(d < tol, || format!("case {i}: |P(e) difference| {d:e} exceeds {tol:e}"))?;
        worst[looped as usize] = worst[looped as usize].max(d);
    }
    Ok(format!("max deviation {:.1e} on polytrees, {:.1e} with cutsets", worst[0], worst[1]))
}

fn ranking(rec: &Recommendation) -> Vec<usize> {
    rec.ranked.iter().map(|d| d.index).collect()
}

fn scaled(network: &Network, a: f64, b: f64) -> Network {
    let mut out = network.clone();
    for node in &mut out.nodes {
        if let Node::Value(v) = node {
            v.utilities.entries.iter_mut().for_each(|u| *u = a * *u + b);
        }
    }
    out
}

fn decision_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xDEC1);
    let mut worst = 0.0f64;
    let mut configurations = 0;
    for i in 0..200 {
        let net = random_decision_network(&mut rng, &DecisionShape::default());
        let findings = random_decision_findings(&mut rng, &net, 3);
        let rec = DecisionEvaluator::new(&net)
            .and_then(|e| e.recommend(&findings))
            .map_err(|e| format!("case {i}: {e}"))?;
        let tol = 1e-9 * (rec.u_max - rec.u_min).max(1.0);

        let mut oracle = Vec::new();
        for d in &rec.ranked {
            let clamped = findings.merged(&d.configuration.iter().map(|(k, v)| (k.clone(), v)).collect());
            match (oracle_expected_utility(&net, &clamped), d.expected_utility) {
                (Ok(want), Some(got)) => {
                    let diff = (want - got).abs();
                    ensure(diff < 1e-9, || format!("case {i} config {}: EU {got} vs {want}", d.index))?;
                    worst = worst.max(diff);
                    oracle.push(want);
                }
                (Err(InferenceError::ImpossibleEvidence), None) => {}
                (want, got) => return Err(format!("case {i} config {}: {want:?} vs {got:?}", d.index)),
            }
        }
        ensure(rec.ranked.iter().skip(oracle.len()).all(|d| !d.is_feasible()), || {
            format!("case {i}: impossible configurations are not ranked last")
        })?;
        ensure(oracle.windows(2).all(|w| w[0] >= w[1] - tol), || {
            format!("case {i}: ranking disagrees with oracle utilities {oracle:?}")
        })?;
        configurations += rec.ranked.len();

        for a in [0.5, 3.0, 100.0] {
            for b in [-7.0, 0.0, 42.0] {
                let other = DecisionEvaluator::new(&scaled(&net, a, b))
                    .and_then(|e| e.recommend(&findings))
                    .map_err(|e| format!("case {i} ({a}u{b:+}): {e}"))?;
                ensure(ranking(&other) == ranking(&rec), || {
                    format!("case {i}: ranking changed under {a}u{b:+}")
                })?;
            }
        }
    }
    Ok(format!("200 networks, {configurations} configurations, max EU deviation {worst:.1e}, 9 affine maps"))
}

struct Snapshot {
    findings: Findings,
    beliefs: BeliefAssignment,
    evidence: u64,
    history: usize,
    recommendation: Option<Recommendation>,
}

fn snapshot(s: &Session) -> Snapshot {
    Snapshot {
        findings: s.findings().clone(),
        beliefs: s.beliefs().clone(),
        evidence: s.evidence_probability().to_bits(),
        history: s.history().len(),
        recommendation: s.cached_recommendation().cloned(),
    }
}

fn same_state(a: &Snapshot, b: &Snapshot) -> bool {
    let bits = |x: &BeliefAssignment| -> Vec<u64> {
        x.iter().flat_map(|(_, p)| p.iter().map(|v| v.to_bits())).collect()
    };
    a.findings == b.findings
        && bits(&a.beliefs) == bits(&b.beliefs)
        && a.evidence == b.evidence
        && a.recommendation == b.recommendation
}

fn random_finding(rng: &mut ChaCha8Rng, net: &Network) -> (NodeId, usize) {
    let candidates: Vec<&Node> = net.nodes.iter().filter(|n| n.cardinality().is_some()).collect();
    let node = *candidates.choose(rng).unwrap();
    (node.id().clone(), rng.random_range(0..node.cardinality().unwrap()))
}

fn consultation_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC025);
    let mut kbs: Vec<(String, Arc<PreparedNetwork>)> = FIXTURES
        .iter()
        .map(|&n| (n.to_owned(), Arc::new(PreparedNetwork::new(fixture(n)).unwrap())))
        .collect();
    kbs.push(("gate".into(), Arc::new(PreparedNetwork::new(gate()).unwrap())));
    let mut counts = [0usize; 4];

    for seq in 0..1000 {
        let (name, prepared) = &kbs[seq % kbs.len()];
        let net = prepared.network();
        let fail = |what: &str| format!("sequence {seq} on {name}: {what}");
        let mut session = Session::new(prepared.clone(), name.clone()).map_err(|e| fail(&e.to_string()))?;

        for _ in 0..rng.random_range(1..=10) {
            let before = snapshot(&session);
            match rng.random_range(0..10) {
                0..=4 => {
                    let (node, state) = random_finding(&mut rng, net);
                    match session.assert_finding(node.as_str(), state) {
                        Ok(_) => counts[0] += 1,
                        Err(SessionError::ImpossibleEvidence) => {
                            ensure(same_state(&before, &snapshot(&session)), || {
                                fail("rejection changed state")
                            })?;
                            ensure(session.history().len() == before.history + 1, || {
                                fail("rejection not logged")
                            })?;
                            counts[3] += 1;
                        }
                        Err(e) => return Err(fail(&e.to_string())),
                    }
                }
                5..=6 => {
                    let asserted: Vec<NodeId> = session.findings().iter().map(|(k, _)| k.clone()).collect();
                    if let Some(node) = asserted.choose(&mut rng) {
                        session.retract_finding(node.as_str()).map_err(|e| fail(&e.to_string()))?;
                        counts[1] += 1;
                    }
                }
                7..=8 => {
                    let overlay: Findings =
                        (0..rng.random_range(1..=2)).map(|_| random_finding(&mut rng, net)).collect();
                    let merged = session.findings().merged(&overlay);
                    match (session.what_if(&overlay), prepared.beliefs(&merged)) {
                        (Ok(w), Ok(want)) => {
                            let d = max_diff(&w.beliefs, &want.beliefs);
                            ensure(d <= 1e-12, || fail(&format!("what-if deviates by {d:e}")))?;
                        }
                        (Err(SessionError::ImpossibleEvidence), Err(InferenceError::ImpossibleEvidence)) => {}
                        (got, want) => {
                            return Err(fail(&format!("what-if {:?} vs {:?}", got.err(), want.err())))
                        }
                    }
                    ensure(same_state(&before, &snapshot(&session)), || fail("what-if changed state"))?;
                    ensure(session.history().len() == before.history, || fail("what-if was logged"))?;
                    counts[2] += 1;
                }
                _ => {
                    if prepared.is_decision_network() {
                        let got = session.recommendation().map_err(|e| fail(&e.to_string()))?.clone();
                        let want =
                            prepared.recommend(session.findings()).map_err(|e| fail(&e.to_string()))?;
                        ensure(got == want, || fail("cached recommendation is stale"))?;
                    }
                }
            }

            let fresh = infer_fresh(net, session.findings()).map_err(|e| fail(&e))?;
            let d = max_diff(session.beliefs(), &fresh);
            ensure(d <= 1e-12, || fail(&format!("cached beliefs deviate by {d:e}")))?;
            let oracle = oracle_joint(net, session.findings()).map_err(|e| fail(&e.to_string()))?;
            let d = max_diff(session.beliefs(), &oracle.beliefs);
            ensure(d <= 1e-9, || fail(&format!("beliefs deviate from the oracle by {d:e}")))?;
        }

        let replayed = Session::replay(prepared.clone(), name.clone(), session.history())
            .map_err(|e| fail(&e.to_string()))?;
        ensure(replayed.findings() == session.findings(), || fail("replay findings differ"))?;
        let d = max_diff(replayed.beliefs(), session.beliefs());
        ensure(d <= 1e-12, || fail(&format!("replay deviates by {d:e}")))?;
        let imported =
            Session::import(prepared.clone(), &session.export()).map_err(|e| fail(&e.to_string()))?;
        ensure(max_diff(imported.beliefs(), session.beliefs()) <= 1e-12, || fail("import deviates"))?;
    }
    Ok(format!(
        "1000 sequences, {} asserts, {} retracts, {} what-ifs, {} rejections",
        counts[0], counts[1], counts[2], counts[3]
    ))
}

fn infer_fresh(net: &Network, findings: &Findings) -> Result<BeliefAssignment, String> {
    let prepared = PreparedNetwork::new(net.clone()).map_err(|e| e.to_string())?;
    prepared.beliefs(findings).map(|r| r.beliefs).map_err(|e| e.to_string())
}

fn format_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF0F0);
    for i in 0..200 {
        let mut net = if i % 2 == 0 {
            random_dag(&mut rng, &NetworkShape::desk())
        } else {
            random_decision_network(&mut rng, &DecisionShape::default())
        };
        net.name = format!("net {i}");
        let text = serialize(&net);
        let back = parse(&text).map_err(|e| format!("case {i}: {e}"))?;
        ensure(back == canonical_order(&net), || format!("case {i}: round trip changed the network"))?;
        ensure(serialize(&back) == text, || format!("case {i}: re-serialization differs"))?;
        let again = canonicalize(&text, Mode::Strict).map_err(|e| format!("case {i}: {e}"))?;
        ensure(again == text, || format!("case {i}: output is not canonical"))?;
        let mut shuffled = net.clone();
        shuffled.nodes.reverse();
        ensure(serialize(&shuffled) == text, || format!("case {i}: node order leaks into output"))?;
    }
    for name in FIXTURES {
        let text = std::fs::read_to_string(fixture_path(name)).map_err(|e| e.to_string())?;
        let net = parse(&text).map_err(|e| format!("{name}: {e}"))?;
        ensure(validate(&net).is_valid(), || format!("{name}: does not validate"))?;
        ensure(serialize(&net) == text, || format!("{name}: re-serialization is not byte-identical"))?;
    }
    Ok("200 random networks, 3 fixtures byte-identical".into())
}

fn knet_infer(file: &str, engine: &str, evidence: &[String]) -> Result<Vec<u8>, String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_knet"));
    cmd.args(["infer", file, "--engine", engine]);
    if !evidence.is_empty() {
        cmd.arg("--evidence").args(evidence);
    }
    let out = cmd.output().map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("knet infer {file} {evidence:?} failed: {}", String::from_utf8_lossy(&out.stderr))
    })?;
    Ok(out.stdout)
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, String) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

fn seg(node: &str) -> String {
    node.replace('%', "%25").replace('?', "%3F").replace('#', "%23").replace('/', "%2F")
}

async fn new_session(app: &Router, kb: &str) -> Result<String, String> {
    let (status, text) = call(app, Method::POST, "/sessions", Some(json!({ "kb": kb }))).await;
    ensure(status == StatusCode::CREATED, || format!("create session: {status} {text}"))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    Ok(v["session_id"].as_str().unwrap_or_default().to_owned())
}

async fn api_replay(rng: &mut ChaCha8Rng) -> Result<usize, String> {
    let mut networks: Vec<(String, Network)> = FIXTURES.iter().map(|&n| (n.to_owned(), fixture(n))).collect();
    networks.push(("gate".into(), gate()));
    let app = knet_service::app(KbCatalog::from_networks(networks.clone()).map_err(|e| e.to_string())?);
    let mut mutations = 0;
    for round in 0..100 {
        let (kb, net) = &networks[round % networks.len()];
        let id = new_session(&app, kb).await?;
        for _ in 0..rng.random_range(1..=8) {
            let asserted: Vec<String> = {
                let (_, text) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
                let v: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
                v["findings"].as_object().map(|m| m.keys().cloned().collect()).unwrap_or_default()
            };
            if !asserted.is_empty() && rng.random_bool(0.3) {
                let node = asserted.choose(rng).unwrap();
                let uri = format!("/sessions/{id}/findings/{}", seg(node));
                let (status, _) = call(&app, Method::DELETE, &uri, None).await;
                ensure(status == StatusCode::OK, || format!("retract {node}: {status}"))?;
            } else {
                let (node, state) = random_finding(rng, net);
                let label = net.node(node.as_str()).unwrap().labels().unwrap()[state].clone();
                let uri = format!("/sessions/{id}/findings/{}", seg(node.as_str()));
                let (status, _) = call(&app, Method::PUT, &uri, Some(json!({ "state": label }))).await;
                ensure(status == StatusCode::OK || status == StatusCode::CONFLICT, || {
                    format!("assert {node}={label}: {status}")
                })?;
            }
            mutations += 1;
        }

        let (_, history) = call(&app, Method::GET, &format!("/sessions/{id}/history"), None).await;
        let (_, original) = call(&app, Method::GET, &format!("/sessions/{id}/beliefs"), None).await;
        let copy = new_session(&app, kb).await?;
        let events: Value = serde_json::from_str(&history).map_err(|e| e.to_string())?;
        for e in events.as_array().into_iter().flatten() {
            let node = e["node"].as_str().unwrap_or_default();
            let uri = format!("/sessions/{copy}/findings/{}", seg(node));
            match e["kind"].as_str() {
                Some("asserted" | "rejected") => {
                    call(&app, Method::PUT, &uri, Some(json!({ "state": e["state"] }))).await;
                }
                Some("retracted") => {
                    call(&app, Method::DELETE, &uri, None).await;
                }
                _ => {}
            }
        }
        let (_, replayed) = call(&app, Method::GET, &format!("/sessions/{copy}/beliefs"), None).await;
        ensure(original == replayed, || format!("round {round} on {kb}: replayed beliefs differ"))?;
        let (_, copied) = call(&app, Method::GET, &format!("/sessions/{copy}/history"), None).await;
        ensure(strip_timestamps(&history) == strip_timestamps(&copied), || {
            format!("round {round} on {kb}: replayed history differs")
        })?;
    }
    Ok(mutations)
}

fn strip_timestamps(history: &str) -> Value {
    let mut v: Value = serde_json::from_str(history).unwrap_or(Value::Null);
    for e in v.as_array_mut().into_iter().flatten() {
        e.as_object_mut().map(|o| o.remove("timestamp_ms"));
    }
    v
}

fn cli_service_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC11);
    let mut runs = 0;
    for name in FIXTURES {
        let path = fixture_path(name);
        let file = path.to_str().unwrap();
        let net = fixture(name);
        let mut cases: Vec<Vec<String>> = vec![vec![]];
        for node in net.nodes.iter().filter(|n| n.cardinality().is_some()) {
            for label in node.labels().unwrap() {
                cases.push(vec![format!("{}={label}", node.id())]);
            }
        }
        for _ in 0..4 {
            let findings = random_decision_findings(&mut rng, &net, 3);
            cases.push(
                findings
                    .iter()
                    .map(|(id, s)| format!("{id}={}", net.node(id.as_str()).unwrap().labels().unwrap()[s]))
                    .collect(),
            );
        }
        for evidence in &cases {
            let oracle = knet_infer(file, "oracle", evidence)?;
            let exact = knet_infer(file, "exact", evidence)?;
            ensure(oracle == exact, || format!("{name} {evidence:?}: engines disagree"))?;
            runs += 1;
        }
    }
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let mutations = runtime.block_on(api_replay(&mut rng))?;
    Ok(format!(
        "{runs} evidence sets byte-identical across engines, 100 API replays over {mutations} mutations"
    ))
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("polytree correctness", polytree_correctness),
        ("multiply connected correctness", multiply_connected_correctness),
        ("evidence probability", evidence_probability),
        ("decision correctness", decision_correctness),
        ("consultation invariants", consultation_invariants),
        ("format round trip and fixtures", format_properties),
        ("cli and service contract", cli_service_contract),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL  {name}: {reason}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
