use std::fs;
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde_json::Value;
use tempfile::TempDir;

const ENV_VARS: &[&str] = &[
    "SSU_CONFIG",
    "SSU_SERVER",
    "SSU_JOBS",
    "SSU_VIEWPORT",
    "SSU_FRAMES",
    "SSU_LAMBDA_ALIGN",
    "SSU_LAMBDA_FMT",
    "SSU_GROUP_SIZE",
    "SSU_BETA_KL",
    "SSU_CLIP_EPSILON",
    "SCORER_URL",
    "SSU_SCORER_TIMEOUT_MS",
    "SSU_SCORER_RETRIES",
    "SSU_ADDR",
];

fn command(args: &[&str], env: &[(&str, &str)]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ssu"));
    for var in ENV_VARS {
        cmd.env_remove(var);
    }
    cmd.args(args).envs(env.iter().copied());
    cmd
}

fn ssu_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    command(args, env).output().unwrap()
}

fn ssu(args: &[&str]) -> Output {
    ssu_env(args, &[])
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "ssu failed: {}", stderr(out));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes a small corpus and returns the first item's directory.
fn corpus(tmp: &TempDir, count: &str) -> PathBuf {
    let dir = tmp.path().join("corpus");
    stdout_json(&ssu(&["gen-corpus", "--seed", "7", "--count", count, "-o", p(&dir)]));
    dir.join("item_0000")
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn frames_dir(dir: &Path, docs: &[String]) {
    fs::create_dir_all(dir).unwrap();
    let names: Vec<String> = (0..docs.len()).map(|t| format!("f{t:04}.svg")).collect();
    for (name, doc) in names.iter().zip(docs) {
        fs::write(dir.join(name), doc).unwrap();
    }
    let meta = serde_json::json!({ "fps": 24, "viewport": [40, 40], "frames": names });
    fs::write(dir.join("meta.json"), meta.to_string()).unwrap();
}

const S0: &str = r##"<svg width="40" height="40"><rect id="0" width="40" height="40" fill="#ffffff"/><g id="1" transform="matrix(1, 0, 0, 1, 0, 0)"><rect id="2" width="10" height="10" fill="#ff0000"/></g></svg>"##;

fn moved(tx: u32) -> String {
    S0.replace("matrix(1, 0, 0, 1, 0, 0)", &format!("matrix(1, 0, 0, 1, {tx}, 0)"))
}

#[test]
fn gen_corpus_is_seed_deterministic() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for t in [&a, &b] {
        let out = ssu(&["gen-corpus", "--seed", "3", "--count", "2", "-o", p(t.path())]);
        assert_eq!(stdout_json(&out)["items"], serde_json::json!(["item_0000", "item_0001"]));
    }
    for item in ["item_0000", "item_0001"] {
        assert_eq!(files(&a.path().join(item)), files(&b.path().join(item)));
    }
    let c = TempDir::new().unwrap();
    ssu(&["gen-corpus", "--seed", "4", "--count", "1", "-o", p(c.path())]);
    assert_ne!(files(&a.path().join("item_0000")), files(&c.path().join("item_0000")));
}

#[test]
fn encode_then_decode_is_byte_exact() {
    let tmp = TempDir::new().unwrap();
    let item = corpus(&tmp, "1");
    let enc = tmp.path().join("enc");
    let report = stdout_json(&ssu(&["encode", p(&item), "-o", p(&enc)]));
    assert_eq!(report["frame_count"], 24);
    assert!(report["stats"]["ratio"].as_f64().unwrap() > 1.0);
    let names: Vec<String> = files(&enc).into_iter().map(|(n, _)| n).collect();
    assert_eq!(names, ["anim.ssu", "encoded.json", "s0.svg", "stats.json"]);
    let manifest: Value = serde_json::from_slice(&fs::read(enc.join("encoded.json")).unwrap()).unwrap();
    assert_eq!(manifest["fps"], 24);
    assert_eq!(manifest["frame_count"], 24);
    assert!(manifest["description"].is_string());

    let dec = tmp.path().join("dec");
    assert_eq!(stdout_json(&ssu(&["decode", p(&enc), "-o", p(&dec)]))["frames"], 25);
    assert_eq!(files(&item), files(&dec));
}

#[test]
fn encode_rejects_non_isomorphic_frames() {
    let tmp = TempDir::new().unwrap();
    let extra = S0.replace("</svg>", r##"<rect id="3" width="1" height="1"/></svg>"##);
    frames_dir(&tmp.path().join("in"), &[S0.into(), extra]);
    let out = ssu(&["encode", p(&tmp.path().join("in")), "-o", p(&tmp.path().join("out"))]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("isomorphic"), "{}", stderr(&out));
}

#[test]
fn decode_reports_grammar_errors_and_handles_empty_streams() {
    let tmp = TempDir::new().unwrap();
    let s0 = tmp.path().join("s0.svg");
    fs::write(&s0, S0).unwrap();
    let bad = tmp.path().join("bad.ssu");
    fs::write(&bad, "<|time=1|>\n  garbage\n").unwrap();
    let out = ssu(&["decode", p(&bad), "--s0", p(&s0), "--frames", "1", "-o", p(&tmp.path().join("x"))]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("syntax"), "{}", stderr(&out));

    let empty = tmp.path().join("empty.ssu");
    fs::write(&empty, "").unwrap();
    let dir = tmp.path().join("single");
    let out = ssu(&["decode", p(&empty), "--s0", p(&s0), "--frames", "0", "-o", p(&dir)]);
    assert_eq!(stdout_json(&out)["frames"], 1);
    let names: Vec<String> = files(&dir).into_iter().map(|(n, _)| n).collect();
    assert_eq!(names, ["f0000.svg", "meta.json"]);

    let out = ssu(&["decode", p(&empty), "-o", p(&dir)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--s0"));
}

#[test]
fn validate_exit_codes() {
    let tmp = TempDir::new().unwrap();
    frames_dir(&tmp.path().join("in"), &[S0.into(), moved(3), moved(6)]);
    let enc = tmp.path().join("enc");
    stdout_json(&ssu(&["encode", p(&tmp.path().join("in")), "--viewport", "40x40", "-o", p(&enc)]));

    let ok = ssu(&["validate", p(&enc)]);
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
    let verdict: Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(verdict["reward"], 1);

    let wrong_t = ssu(&["validate", p(&enc), "--frames", "3"]);
    assert_eq!(code(&wrong_t), 1);
    let verdict: Value = serde_json::from_slice(&wrong_t.stdout).unwrap();
    assert_eq!(verdict["reward"], -1);
    assert_eq!(verdict["checks"]["frame_count"], "fail");

    // Stream from stdin.
    let mut child = command(&["validate", "-", "--s0", p(&enc.join("s0.svg")), "--frames", "1"], &[])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"<|time=1|>\n  <|ID=42|> fill: red\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(code(&out), 1);
    let verdict: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(verdict["checks"]["id_topology"], "fail");

    assert_eq!(code(&ssu(&["validate", p(&tmp.path().join("missing.ssu")), "--s0", p(&enc.join("s0.svg"))])), 2);
}

#[test]
fn config_precedence_is_flag_env_file_default() {
    let tmp = TempDir::new().unwrap();
    frames_dir(&tmp.path().join("in"), &[S0.into(), moved(3), moved(6)]);
    let enc = tmp.path().join("enc");
    stdout_json(&ssu(&["encode", p(&tmp.path().join("in")), "--viewport", "40x40", "-o", p(&enc)]));
    let stream = enc.join("anim.ssu");
    let s0 = enc.join("s0.svg");
    let base = ["validate", p(&stream), "--s0", p(&s0)];

    // Default T is 24; the stream has 2.
    assert_eq!(code(&ssu(&base)), 1);
    let config = tmp.path().join("ssu.toml");
    fs::write(&config, "frames = 2\n").unwrap();
    let with_file = [&base[..], &["--config", p(&config)]].concat();
    assert_eq!(code(&ssu(&with_file)), 0);
    assert_eq!(code(&ssu_env(&with_file, &[("SSU_FRAMES", "5")])), 1);
    let with_flag = [&with_file[..], &["--frames", "2"]].concat();
    assert_eq!(code(&ssu_env(&with_flag, &[("SSU_FRAMES", "5")])), 0);
    // The config file can also come from the environment.
    assert_eq!(code(&ssu_env(&base, &[("SSU_CONFIG", p(&config))])), 0);

    fs::write(&config, "frame = 2\n").unwrap();
    let out = ssu(&with_file);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("unknown field"), "{}", stderr(&out));
}

fn write_candidate(dir: &Path, name: &str, stream: &str, new: &[f64], old: &[f64]) {
    fs::write(dir.join(format!("{name}.ssu")), stream).unwrap();
    let lines = |v: &[f64]| v.iter().map(|x| format!("{x}\n")).collect::<String>();
    fs::write(dir.join(format!("{name}.lp.new")), lines(new)).unwrap();
    fs::write(dir.join(format!("{name}.lp.old")), lines(old)).unwrap();
}

fn json_lines(out: &Output) -> Vec<Value> {
    assert!(out.status.success(), "{}", stderr(out));
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

const GOOD: &str = "<|time=1|>\n  <|ID=1|> transform: matrix(1, 0, 0, 1, 5, 0)\n";
const BAD: &str = "<|time=1|>\n  <|ID=9|> fill: red\n";

#[test]
fn grpo_sim_hand_fixture() {
    let tmp = TempDir::new().unwrap();
    let s0 = tmp.path().join("s0.svg");
    fs::write(&s0, S0).unwrap();
    let cands = tmp.path().join("cands");
    fs::create_dir(&cands).unwrap();
    let (up, down) = (1.5f64.ln(), 0.5f64.ln());
    write_candidate(&cands, "a", GOOD, &[up - 1.0, 1.0], &[-0.5, 0.5]);
    write_candidate(&cands, "b", BAD, &[down], &[0.0]);
    let args = [
        "grpo-sim",
        p(&cands),
        "--s0",
        p(&s0),
        "--prompt",
        "square slides right",
        "--description",
        "square slides right",
        "--frames",
        "1",
        "--group-size",
        "2",
    ];
    let lines = json_lines(&ssu(&args));
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0]["total"], 2.0);
    assert_eq!(lines[1]["total"], -2.0);
    assert_eq!(lines[0]["advantage"], 1.0);
    assert_eq!(lines[1]["advantage"], -1.0);

    // Hand evaluation: min(1.5, 1.2)·1 and min(0.5·−1, 0.8·−1).
    let surrogate = (1.2 + -0.8) / 2.0;
    let kl = ((1.5 - 1.0 - 1.5f64.ln()) + (0.5 - 1.0 - 0.5f64.ln())) / 2.0;
    let loss = -surrogate + 0.01 * kl;
    let summary = &lines[2];
    assert!((summary["surrogate"].as_f64().unwrap() - surrogate).abs() < 1e-9);
    assert!((summary["kl_estimate"].as_f64().unwrap() - kl).abs() < 1e-9);
    assert!((summary["loss"].as_f64().unwrap() - loss).abs() < 1e-9, "{summary}");

    // Group size is enforced.
    let out = ssu(&args[..args.len() - 2]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("expected a group of 8"), "{}", stderr(&out));
}

#[test]
fn grpo_sim_identical_candidates_have_zero_advantage() {
    let tmp = TempDir::new().unwrap();
    let s0 = tmp.path().join("s0.svg");
    fs::write(&s0, S0).unwrap();
    let cands = tmp.path().join("cands");
    fs::create_dir(&cands).unwrap();
    for i in 0..8 {
        write_candidate(&cands, &format!("c{i}"), GOOD, &[-1.0], &[-1.0]);
    }
    let out_file = tmp.path().join("batch.jsonl");
    let out = ssu(&[
        "grpo-sim",
        p(&cands),
        "--s0",
        p(&s0),
        "--prompt",
        "a red square",
        "--description",
        "a square moves",
        "--frames",
        "1",
        "-o",
        p(&out_file),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let lines: Vec<Value> = fs::read_to_string(&out_file)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 9);
    assert!(lines[..8].iter().all(|l| l["advantage"] == 0.0));
    assert_eq!(lines[8]["group_size"], 8);
}

#[test]
fn score_uses_the_manifest_description_and_maps_scorer_failures() {
    let tmp = TempDir::new().unwrap();
    let item = corpus(&tmp, "1");
    let enc = tmp.path().join("enc");
    stdout_json(&ssu(&["encode", p(&item), "-o", p(&enc)]));
    let manifest: Value = serde_json::from_slice(&fs::read(enc.join("encoded.json")).unwrap()).unwrap();
    let description = manifest["description"].as_str().unwrap();

    let report = stdout_json(&ssu(&["score", p(&enc), "--prompt", description]));
    assert_eq!(report["r_fmt"], 1);
    assert_eq!(report["r_align"], 1.0);
    assert_eq!(report["total"], 2.0);

    let report = stdout_json(&ssu(&["score", p(&enc), "--prompt", description, "--lambda-align", "0"]));
    assert_eq!(report["r_align"], 0.0);
    assert_eq!(report["total"], 1.0);

    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let url = format!("http://127.0.0.1:{port}");
    let out = ssu_env(
        &["score", p(&enc), "--prompt", description, "--scorer-retries", "0"],
        &[("SCORER_URL", &url)],
    );
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("unavailable"), "{}", stderr(&out));
}

#[test]
fn render_writes_pngs_and_index() {
    let tmp = TempDir::new().unwrap();
    let filtered = S0.replace(r#"<rect id="2""#, r#"<rect id="2" filter="url(#f)""#);
    frames_dir(&tmp.path().join("in"), &[filtered, moved(3)]);
    let out_dir = tmp.path().join("png");
    let out = ssu(&["render", p(&tmp.path().join("in")), "--viewport", "40x40", "-o", p(&out_dir)]);
    assert_eq!(stdout_json(&out)["frames"], 2);
    let names: Vec<String> = files(&out_dir).into_iter().map(|(n, _)| n).collect();
    assert_eq!(names, ["frame_0000.png", "frame_0001.png", "index.json"]);
    let png = fs::read(out_dir.join("frame_0000.png")).unwrap();
    assert_eq!(&png[..8], b"\x89PNG\r\n\x1a\n");
    // IHDR width and height.
    assert_eq!(&png[16..24], &[0, 0, 0, 40, 0, 0, 0, 40]);
    let index: Value = serde_json::from_slice(&fs::read(out_dir.join("index.json")).unwrap()).unwrap();
    assert_eq!(index["frames"][0]["file"], "frame_0000.png");
    assert!(index["frames"][0]["ignored"][0].as_str().unwrap().contains("filter"));
    assert_eq!(index["frames"][1]["ignored"], serde_json::json!([]));

    let small = tmp.path().join("small");
    ssu(&["render", p(&tmp.path().join("in")), "--viewport", "40x40", "--size", "20x10", "-o", p(&small)]);
    let png = fs::read(small.join("frame_0001.png")).unwrap();
    assert_eq!(&png[16..24], &[0, 0, 0, 20, 0, 0, 0, 10]);
}

#[test]
fn batch_encode_matches_single_runs() {
    let tmp = TempDir::new().unwrap();
    let first = corpus(&tmp, "3");
    let root = first.parent().unwrap();
    let items: Vec<PathBuf> = (0..3).map(|i| root.join(format!("item_{i:04}"))).collect();
    let batch = tmp.path().join("batch");
    let mut args = vec!["encode", "--jobs", "2"];
    args.extend(items.iter().map(|i| p(i)));
    args.extend(["-o", p(&batch)]);
    let reports = stdout_json(&ssu(&args));
    assert_eq!(reports.as_array().unwrap().len(), 3);
    for item in &items {
        let single = tmp.path().join("single");
        stdout_json(&ssu(&["encode", p(item), "-o", p(&single)]));
        assert_eq!(files(&single), files(&batch.join(item.file_name().unwrap())));
    }
}

#[test]
fn canonicalize_stats_and_cot() {
    let tmp = TempDir::new().unwrap();
    let raw = tmp.path().join("raw.svg");
    fs::write(&raw, r#"<svg width="100" height="50"><rect id="3" x="1" y="2" width="4" height="5"/></svg>"#).unwrap();
    let out = ssu(&["canonicalize", p(&raw)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with(r#"<svg height="500" width="500">"#), "{text}");
    assert!(text.contains(r#"transform="matrix(5, 0, 0, 5, 0, 125)""#), "{text}");

    let item = corpus(&tmp, "1");
    let stats = stdout_json(&ssu(&["stats", p(&item)]));
    assert!(stats["ratio"].as_f64().unwrap() > 1.0);

    let s0 = tmp.path().join("s0.svg");
    fs::write(&s0, S0).unwrap();
    let text = tmp.path().join("cot.txt");
    fs::write(&text, "Move id=\"1\" right, keep id 0, ignore ID 7.").unwrap();
    let report = stdout_json(&ssu(&["cot", p(&text), "--s0", p(&s0)]));
    assert_eq!(report["referenced_ids"], serde_json::json!([1, 0, 7]));
    assert_eq!(report["accepted"], false);

    assert_eq!(code(&ssu(&["canonicalize", p(&tmp.path().join("nope.svg"))])), 2);
    assert_eq!(code(&ssu(&["no-such-command"])), 2);
}

struct Service(Child);

impl Drop for Service {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn wait_for(addr: &str) {
    let deadline = Instant::now() + Duration::from_secs(20);
    loop {
        if let Ok(mut s) = TcpStream::connect(addr) {
            s.write_all(b"GET /health HTTP/1.1\r\nhost: x\r\nconnection: close\r\n\r\n").unwrap();
            let mut body = String::new();
            let _ = s.read_to_string(&mut body);
            if body.contains("\"ok\"") {
                return;
            }
        }
        assert!(Instant::now() < deadline, "service at {addr} did not come up");
        thread::sleep(Duration::from_millis(50));
    }
}

#[test]
fn service_mode_matches_local_runs() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let addr = format!("127.0.0.1:{port}");
    let _service = Service(
        command(&["serve", "--addr", &addr], &[])
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .unwrap(),
    );
    wait_for(&addr);
    let url = format!("http://{addr}");

    let tmp = TempDir::new().unwrap();
    let item = corpus(&tmp, "1");
    let (local, remote) = (tmp.path().join("local"), tmp.path().join("remote"));
    stdout_json(&ssu(&["encode", p(&item), "-o", p(&local)]));
    stdout_json(&ssu_env(&["encode", p(&item), "-o", p(&remote)], &[("SSU_SERVER", &url)]));
    assert_eq!(files(&local), files(&remote));

    let dec = tmp.path().join("dec");
    stdout_json(&ssu(&["decode", p(&remote), "--server", &url, "-o", p(&dec)]));
    assert_eq!(files(&item), files(&dec));

    let verdict = ssu(&["validate", p(&remote), "--server", &url, "--frames", "2"]);
    assert_eq!(code(&verdict), 1);

    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let out = ssu(&["stats", p(&item), "--server", &format!("http://127.0.0.1:{port}")]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}
