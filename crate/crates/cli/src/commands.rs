use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use smartchair_core::classify::{compare_models, evaluate, train, ModelKind, ModelSpec, RankedModel};
use smartchair_core::dataset::{read_csv, split_train_test, synth_cohort, write_csv, LabeledDataset};
use smartchair_core::embed::{pca, tsne, Diagnostics, Embedding};
use smartchair_core::export::{export_model, load_file, ArtifactFormat};
use smartchair_core::monitor::{read_stream_file, replay, serve, wire_frames, write_stream_file, SessionStore, Window};
use smartchair_core::ppg::{run_validation, synth_ppg, NoiseSpec};
use smartchair_core::{PostureLabel, N_CLASSES, N_SENSORS};

use crate::config::CliConfig;
use crate::error::CliError;
use crate::manifest::{digest, FileDigest, Outputs};

/// What a command reports back for its manifest.
pub struct Ran {
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub notes: serde_json::Value,
}

fn input(path: &Path) -> Result<FileDigest, CliError> {
    if !path.exists() {
        return Err(CliError::Data(format!("{} does not exist", path.display())));
    }
    digest(path, path.display().to_string())
}

fn to_json<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    Ok(csv::Writer::from_path(path)?)
}

pub struct SimulateArgs {
    pub subjects: Option<usize>,
    pub seconds: Option<f64>,
    pub rate: Option<f64>,
}

pub fn simulate(cfg: &CliConfig, seed: u64, args: SimulateArgs, out: &mut Outputs) -> Result<Ran, CliError> {
    let mut sim = cfg.simulate.clone();
    sim.cohort.seed = seed;
    if let Some(n) = args.subjects {
        if n == 0 {
            return Err(CliError::Config("--subjects must be at least 1".into()));
        }
        let base = sim.cohort.masses_kg.clone();
        sim.cohort.masses_kg = (0..n).map(|i| base[i % base.len()]).collect();
    }
    if let Some(s) = args.seconds {
        sim.cohort.seconds_per_posture = s;
    }
    if let Some(r) = args.rate {
        sim.cohort.rate_hz = r;
    }
    let (ds, sessions) = synth_cohort(&sim.cohort).map_err(|e| CliError::Config(e.to_string()))?;
    write_csv(&ds, &out.file("dataset.csv"))?;

    // The first subject's session, with a PPG trace, is the replay stream.
    let frames = &sessions[0];
    let span_s = (frames.last().unwrap().timestamp_ms - frames[0].timestamp_ms) as f64 / 1000.0 + 1.0;
    let noise = NoiseSpec::default().with_snr(sim.ppg_snr_db);
    let profile = sim.hr_profile.clone();
    let ppg = synth_ppg(&move |t| profile.bpm_at(t), span_s, sim.ppg_fs_hz, &noise, seed)
        .map_err(|e| CliError::Config(e.to_string()))?;
    write_stream_file(&out.file("session.frames"), &wire_frames(frames, Some(&ppg)))?;

    let mut w = csv_writer(&out.file("session_schedule.csv"))?;
    w.write_record(["posture", "start_ms", "end_ms"])?;
    let step = frames.get(1).map_or(333, |f| f.timestamp_ms - frames[0].timestamp_ms);
    let mut i = 0;
    while i < frames.len() {
        let mut j = i;
        while j + 1 < frames.len() && frames[j + 1].label == frames[i].label {
            j += 1;
        }
        if let Some(p) = frames[i].label {
            w.write_record([p.name().to_string(), frames[i].timestamp_ms.to_string(), (frames[j].timestamp_ms + step).to_string()])?;
        }
        i = j + 1;
    }
    w.flush()?;

    // Mean count per sensor and posture.
    let mut sums = [[0.0f64; N_SENSORS]; N_CLASSES];
    let counts = ds.class_counts();
    for r in &ds.rows {
        for (s, &c) in sums[r.label.index()].iter_mut().zip(&r.counts) {
            *s += c as f64;
        }
    }
    let mut w = csv_writer(&out.file("posture_means.csv"))?;
    let mut header = vec!["posture".to_string(), "n".to_string()];
    header.extend((1..=N_SENSORS).map(|k| format!("s{k}")));
    w.write_record(&header)?;
    for p in PostureLabel::ALL {
        let n = counts[p.index()];
        let mut rec = vec![p.name().to_string(), n.to_string()];
        rec.extend(sums[p.index()].iter().map(|s| format!("{:.3}", if n > 0 { s / n as f64 } else { 0.0 })));
        w.write_record(&rec)?;
    }
    w.flush()?;

    println!("simulated {} subjects: {} labeled rows, {} stream frames", sim.cohort.masses_kg.len(), ds.len(), frames.len());
    Ok(Ran { config: to_json(&sim), inputs: vec![], notes: json!({ "rows": ds.len() }) })
}

fn load_dataset(path: &Path) -> Result<LabeledDataset, CliError> {
    if !path.exists() {
        return Err(CliError::Data(format!("dataset {} does not exist", path.display())));
    }
    let ds = read_csv(path)?;
    ds.validate()?;
    Ok(ds)
}

fn parse_models(names: &[String], seed: u64) -> Result<Vec<ModelSpec>, CliError> {
    if names.is_empty() {
        return Err(CliError::Config("no models requested".into()));
    }
    names
        .iter()
        .map(|n| n.parse::<ModelKind>().map(|k| ModelSpec::default_for(k, seed)).map_err(CliError::from))
        .collect()
}

pub fn train_eval(cfg: &CliConfig, seed: u64, data: &Path, models: Option<Vec<String>>, out: &mut Outputs) -> Result<Ran, CliError> {
    let mut tc = cfg.train.clone();
    if let Some(m) = models {
        tc.models = m;
    }
    tc.split.seed = seed;
    let specs = parse_models(&tc.models, seed)?;
    let ds = load_dataset(data)?;
    let missing: Vec<PostureLabel> = PostureLabel::ALL.into_iter().filter(|l| ds.class_counts()[l.index()] == 0).collect();
    if !missing.is_empty() {
        return Err(CliError::Data(format!("dataset lacks classes {missing:?}")));
    }
    let (train_set, test_set) = split_train_test(&ds, &tc.split)?;
    let ranked = if specs.len() >= 2 {
        compare_models(&specs, &train_set, &test_set)?
    } else {
        let model = train(&specs[0], &train_set)?;
        let report = evaluate(&model, &test_set)?;
        vec![RankedModel { model, report, winner: true }]
    };

    let mut w = csv_writer(&out.file("accuracy.csv"))?;
    w.write_record(["model", "accuracy", "f1_micro", "f1_macro", "n_test", "winner"])?;
    println!("{:<6} {:>9} {:>9} {:>9}", "model", "accuracy", "f1_micro", "f1_macro");
    let mut train_ms = serde_json::Map::new();
    for r in &ranked {
        let kind = r.model.kind().name();
        w.write_record([
            kind.to_string(),
            format!("{:.6}", r.report.accuracy),
            format!("{:.6}", r.report.f1_micro),
            format!("{:.6}", r.report.f1_macro),
            r.report.n.to_string(),
            r.winner.to_string(),
        ])?;
        println!("{kind:<6} {:>9.4} {:>9.4} {:>9.4}", r.report.accuracy, r.report.f1_micro, r.report.f1_macro);
        out.write(&format!("confusion_{kind}.csv"), r.report.confusion_csv())?;
        out.write(&format!("report_{kind}.txt"), r.report.table())?;
        train_ms.insert(kind.into(), json!(r.model.digest.wall_time_ms));
    }
    w.flush()?;

    let best = &ranked[0].model;
    let artifact = export_model(best, ArtifactFormat::Binary)?;
    artifact.write(&out.file("model.scm"))?;
    println!("best model {} exported to {} (crc {})", best.kind().name(), out.dir().join("model.scm").display(), artifact.checksum_hex());
    Ok(Ran {
        config: to_json(&tc),
        inputs: vec![input(data)?],
        notes: json!({
            "n_train": train_set.len(),
            "n_test": test_set.len(),
            "best": best.kind().name(),
            "train_wall_time_ms": train_ms,
        }),
    })
}

pub struct EmbedArgs {
    pub data: PathBuf,
    pub method: Option<String>,
    pub dims: Option<usize>,
    pub max_points: Option<usize>,
}

pub fn embed(cfg: &CliConfig, seed: u64, args: EmbedArgs, out: &mut Outputs) -> Result<Ran, CliError> {
    let mut ec = cfg.embed.clone();
    ec.method = args.method.unwrap_or(ec.method).to_ascii_lowercase();
    ec.dims = args.dims.unwrap_or(ec.dims);
    ec.max_points = args.max_points.unwrap_or(ec.max_points);
    ec.tsne.seed = seed;
    if !matches!(ec.dims, 2 | 3) {
        return Err(CliError::Config(format!("dims must be 2 or 3, got {}", ec.dims)));
    }
    if ec.max_points < 2 {
        return Err(CliError::Config("max_points must be at least 2".into()));
    }
    let ds = load_dataset(&args.data)?;
    let idx: Vec<usize> = if ds.len() > ec.max_points {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = rand::seq::index::sample(&mut rng, ds.len(), ec.max_points).into_vec();
        v.sort_unstable();
        v
    } else {
        (0..ds.len()).collect()
    };
    let sub = ds.subset(&idx, ds.provenance.clone());
    let x = sub.features();
    let emb: Embedding = match ec.method.as_str() {
        "pca" => pca(&x, ec.dims)?,
        "tsne" | "t-sne" => tsne(&x, ec.dims, &ec.tsne)?,
        other => return Err(CliError::Config(format!("unknown embedding method {other:?}"))),
    };
    let emb = emb.with_labels(sub.labels())?;
    let name = if ec.method == "pca" { "pca" } else { "tsne" };
    let mut buf = Vec::new();
    emb.write_csv(&mut buf)?;
    out.write(&format!("embedding_{name}.csv"), buf)?;
    out.write(&format!("embedding_{name}_diagnostics.txt"), emb.diagnostics_text())?;
    if let Diagnostics::Tsne { kl_history, .. } = &emb.diagnostics {
        let mut w = csv_writer(&out.file("tsne_kl.csv"))?;
        w.write_record(["iteration", "kl"])?;
        for (it, kl) in kl_history {
            w.write_record([it.to_string(), kl.to_string()])?;
        }
        w.flush()?;
    }
    println!("{name} embedding of {} rows in {} dims", sub.len(), ec.dims);
    Ok(Ran { config: to_json(&ec), inputs: vec![input(&args.data)?], notes: json!({ "rows": sub.len() }) })
}

pub struct PpgArgs {
    pub duration: Option<f64>,
    pub snr_db: Option<f64>,
    pub zero_noise: bool,
}

pub fn ppg_validate(cfg: &CliConfig, seed: u64, args: PpgArgs, out: &mut Outputs) -> Result<Ran, CliError> {
    let mut vc = cfg.ppg.clone();
    vc.seed = seed;
    if let Some(d) = args.duration {
        vc.duration_s = d;
    }
    if let Some(s) = args.snr_db {
        vc.snr_db = Some(s);
    }
    if args.zero_noise {
        vc.noise = NoiseSpec::clean();
        vc.snr_db = None;
    }
    let o = run_validation(&vc).map_err(|e| match e {
        smartchair_core::Error::Io(_) => CliError::Runtime(e.to_string()),
        e => CliError::Config(e.to_string()),
    })?;
    out.write("agreement.csv", o.report.to_csv())?;
    let mut buf = Vec::new();
    o.stages.write_csv(&mut buf)?;
    out.write("stages.csv", buf)?;
    let mut w = csv_writer(&out.file("hr_pairs.csv"))?;
    w.write_record(["t_s", "main_bpm", "reference_bpm", "true_bpm", "mean_bpm", "diff_bpm"])?;
    for &(t, m, r, truth) in &o.pairs {
        w.write_record([t, m, r, truth, (m + r) / 2.0, m - r].map(|v| format!("{v:.6}")))?;
    }
    w.flush()?;
    let mut w = csv_writer(&out.file("hr_main.csv"))?;
    w.write_record(["t_s", "bpm", "in_range"])?;
    for p in &o.main_hr {
        w.write_record([format!("{:.4}", p.t_s), format!("{:.6}", p.bpm), p.in_range.to_string()])?;
    }
    w.flush()?;
    let r = o.report.pearson_r.map_or("undefined".to_string(), |r| format!("{r:.4}"));
    println!(
        "r = {r}, bias = {:.3} bpm, limits [{:.3}, {:.3}] over {} pairs",
        o.report.bias_bpm, o.report.loa_low_bpm, o.report.loa_high_bpm, o.report.n_pairs
    );
    Ok(Ran { config: to_json(&vc), inputs: vec![], notes: to_json(&o.report) })
}

pub fn export(model: &Path, format: &str, out: &mut Outputs) -> Result<Ran, CliError> {
    let format: ArtifactFormat = format.parse().map_err(|e: smartchair_core::Error| CliError::Config(e.to_string()))?;
    if !model.exists() {
        return Err(CliError::Data(format!("model {} does not exist", model.display())));
    }
    let m = load_file(model)?;
    let artifact = export_model(&m, format)?;
    let name = format!("model.{}", format.extension());
    artifact.write(&out.file(&name))?;
    println!("{} {} artifact written to {} (crc {})", m.kind().name(), format, out.dir().join(&name).display(), artifact.checksum_hex());
    Ok(Ran { config: json!({ "format": format.to_string() }), inputs: vec![input(model)?], notes: json!({}) })
}

fn parse_addr(s: &str) -> Result<SocketAddr, CliError> {
    s.parse().map_err(|_| CliError::Config(format!("bad socket address {s:?}")))
}

pub async fn replay_cmd(cfg: &CliConfig, session: &Path, addr: Option<String>, speed: Option<f64>, out: &mut Outputs) -> Result<Ran, CliError> {
    let mut rc = cfg.replay.clone();
    rc.addr = addr.unwrap_or(rc.addr);
    rc.speed = speed.unwrap_or(rc.speed);
    let addr = parse_addr(&rc.addr)?;
    if !session.exists() {
        return Err(CliError::Data(format!("session stream {} does not exist", session.display())));
    }
    let frames = read_stream_file(session)?;
    let r = replay(addr, &frames, rc.speed).await.map_err(|e| CliError::Runtime(e.to_string()))?;

    let mut w = csv_writer(&out.file("replay_events.csv"))?;
    w.write_record(["t", "posture"])?;
    let mut prev = None;
    let mut events = 0;
    for &(t, l) in &r.labels {
        if prev != Some(l) {
            w.write_record([t.to_string(), l.name().to_string()])?;
            prev = Some(l);
            events += 1;
        }
    }
    w.flush()?;
    let summary = json!({
        "sent": r.sent, "ok": r.ok, "range": r.range, "overflow": r.overflow,
        "framing": r.framing, "unacked": r.unacked, "events": events,
    });
    out.write("replay_summary.json", serde_json::to_string_pretty(&summary)?)?;
    println!(
        "session {}: sent {}, ok {}, range {}, overflow {}, unacked {}, {events} posture events, max latency {:.1} ms",
        r.session_id, r.sent, r.ok, r.range, r.overflow, r.unacked, r.max_latency_ms()
    );
    let notes = json!({ "session_id": r.session_id, "max_latency_ms": r.max_latency_ms() });
    if !r.accounted() {
        return Err(CliError::Runtime(format!("{} frame(s) were never acknowledged", r.unacked)));
    }
    Ok(Ran { config: to_json(&rc), inputs: vec![input(session)?], notes })
}

pub struct ServeArgs {
    pub model: Option<PathBuf>,
    pub ingest_addr: Option<String>,
    pub http_addr: Option<String>,
    pub debounce_k: Option<usize>,
    pub max_sessions: Option<usize>,
}

pub async fn serve_cmd(cfg: &CliConfig, args: ServeArgs, out: &mut Outputs) -> Result<Ran, CliError> {
    let mut sc = cfg.serve.clone();
    sc.storage_dir = out.dir().join("sessions");
    if let Some(m) = args.model {
        sc.model_path = m;
    }
    if let Some(a) = args.ingest_addr {
        sc.ingest_addr = a;
    }
    if let Some(a) = args.http_addr {
        sc.http_addr = a;
    }
    if let Some(k) = args.debounce_k {
        sc.debounce_k = k;
    }
    sc.validate()?;
    if !sc.model_path.exists() {
        return Err(CliError::Data(format!("model {} does not exist", sc.model_path.display())));
    }
    let handle = serve(sc.clone()).await.map_err(|e| match e {
        smartchair_core::Error::Io(io) => CliError::Runtime(io.to_string()),
        other => CliError::from(other),
    })?;
    println!("ingest {}", handle.ingest_addr);
    println!("api {}", handle.http_addr);
    println!("model_checksum {}", handle.model_checksum);
    let mut closed = handle.closed_sessions();
    match args.max_sessions {
        Some(n) => {
            tokio::select! {
                _ = closed.wait_for(|c| *c >= n) => {}
                _ = tokio::signal::ctrl_c() => {}
            }
        }
        None => {
            let _ = tokio::signal::ctrl_c().await;
        }
    }
    let store_dir = handle.store().dir().to_path_buf();
    let checksum = handle.model_checksum.clone();
    handle.shutdown().await.map_err(|e| CliError::Runtime(e.to_string()))?;

    // Record the stored sessions as outputs.
    let store = SessionStore::open(&store_dir)?;
    let mut ids = Vec::new();
    for e in store.list() {
        out.file(&format!("sessions/{}.ndjson", e.id));
        ids.push(e.id);
    }
    out.file("sessions/index.json");
    println!("stopped after {} session(s)", ids.len());
    Ok(Ran {
        config: to_json(&sc),
        inputs: vec![input(&sc.model_path)?],
        notes: json!({ "model_checksum": checksum, "sessions": ids }),
    })
}

pub fn stats(session: &Path, from: Option<u64>, to: Option<u64>, out: &mut Outputs) -> Result<Ran, CliError> {
    let (dir, id) = match (session.parent(), session.file_stem()) {
        (Some(d), Some(id)) if session.exists() => (d.to_path_buf(), id.to_string_lossy().into_owned()),
        _ => return Err(CliError::Data(format!("session file {} does not exist", session.display()))),
    };
    let dir = if dir.as_os_str().is_empty() { PathBuf::from(".") } else { dir };
    let rec = SessionStore::open(&dir)?.load_session(&id)?;
    let st = rec.stats(Window { from, to });
    let mut w = csv_writer(&out.file("stats.csv"))?;
    w.write_record(["posture", "duration_s", "repetitions"])?;
    for p in &st.postures {
        w.write_record([p.posture.name().to_string(), format!("{:.3}", p.duration_s), p.repetitions.to_string()])?;
        if p.duration_s > 0.0 {
            println!("{:<16} {:>9.1} s {:>4} run(s)", p.posture.name(), p.duration_s, p.repetitions);
        }
    }
    w.flush()?;
    out.write("stats.json", serde_json::to_string_pretty(&st)?)?;
    println!("window {}..{} ms: {} frames, {:.1} s", st.from_ms, st.to_ms, st.n_frames, st.total_s);
    Ok(Ran { config: json!({ "from": from, "to": to }), inputs: vec![input(session)?], notes: json!({}) })
}

