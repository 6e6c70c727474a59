//! Acceptance suite. Prints one line per criterion and exits non-zero if any
//! criterion fails. Criteria 1-6 run twice: once with the stub executor and
//! once with whatever `select_executor` picks when no harness is installed.

mod common;

use std::collections::BTreeMap;
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use statviz_core::agent::{AgentConfig, AgentRunner, Mode, PathGuard, PathVerdict, RunRecord, RunStatus};
use statviz_core::catalog::TableRef;
use statviz_core::evaluation::{
    aggregate, checklist, load_sheets, normalize_totals, parse_report_csv, render_grade_form, render_report, Category,
    RawTotals, ReportFormat,
};
use statviz_core::llm::{ModelTurn, ScriptedProvider};
use statviz_core::retrieval::{
    cosine_similarity, exact_match_at_k, EmbeddingVector, PrecomputedProvider, RankedMatch, RetrievalIndex,
};
use statviz_core::sandbox::{
    select_executor, CapabilityReport, CodeExecutor, ExecutionRequest, ExecutionResult, HarnessClient,
    SandboxError, StubExecutor,
};
use statviz_core::tasks::{Difficulty, TaskSpec};

type Check = fn(&dyn CodeExecutor) -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol + 1e-12
}

// ---------------------------------------------------------------- AC1

fn ac1_normalization(_: &dyn CodeExecutor) -> Result<String, String> {
    let cases = [
        ("o1", (8, 7, 7), (10.00, 10.00, 10.00)),
        ("llama", (7, 4, 3), (8.75, 5.71, 4.29)),
        ("claude", (7, 7, 5), (8.75, 10.00, 7.14)),
        ("gpt-4", (7, 6, 3), (8.75, 8.57, 4.29)),
    ];
    for (name, (v, c, d), (ev, ec, ed)) in cases {
        let s = normalize_totals(RawTotals { visual: v, code: c, data: d }).map_err(|e| e.to_string())?;
        ensure(
            within(s.visual(), ev, 0.01) && within(s.code(), ec, 0.01) && within(s.data(), ed, 0.01),
            || format!("{name}: got ({}, {}, {})", s.visual(), s.code(), s.data()),
        )?;
    }
    Ok("4 case-study rows within 0.01".into())
}

// ---------------------------------------------------------------- AC2

fn ac2_hit_rates(_: &dyn CodeExecutor) -> Result<String, String> {
    // 30 tables on a quarter circle; a query along the x axis ranks them by angle.
    let ids: Vec<String> = (0..30).map(|j| format!("D{j:02}")).collect();
    let entries = ids
        .iter()
        .enumerate()
        .map(|(j, id)| {
            let a = (j as f64 * 3.0).to_radians();
            (TableRef::new(id).unwrap(), id.clone(), EmbeddingVector::new(vec![a.cos(), a.sin()]).unwrap())
        })
        .collect();
    let index = RetrievalIndex::from_parts("fixture", entries).map_err(|e| e.to_string())?;

    let mut wanted: Vec<usize> = vec![1; 9];
    wanted.extend([2, 2, 3, 3, 4, 4, 5, 5]);
    wanted.extend([6, 8, 10]);
    wanted.extend([11, 14, 19, 25, 30]);
    let prompts: Vec<String> = (0..25).map(|i| format!("query {i:02}")).collect();
    let provider = PrecomputedProvider::from_pairs("fixture", prompts.iter().map(|p| (p.clone(), vec![1.0, 0.0])))
        .map_err(|e| e.to_string())?;

    let mut ranks = BTreeMap::new();
    for (p, &r) in prompts.iter().zip(&wanted) {
        let gold = TableRef::new(&ids[r - 1]).unwrap();
        let got = index.gold_rank(p, &gold, &provider).map_err(|e| e.to_string())?;
        ensure(got == r, || format!("{p}: gold rank {got}, constructed {r}"))?;
        ranks.insert(p.clone(), got);
    }
    let hits = exact_match_at_k(&ranks, &[1, 5, 10]).map_err(|e| e.to_string())?;
    let h = |k| hits.hits_at[&k];
    ensure(h(1) == 0.36 && h(5) == 0.68 && h(10) == 0.80, || {
        format!("hits@1/5/10 = {}/{}/{}", h(1), h(5), h(10))
    })?;
    Ok("hits@1=0.36 @5=0.68 @10=0.80".into())
}

// ---------------------------------------------------------------- AC3

/// Exact cosine comparison for integer vectors: sign(d) * d^2 / (|a|^2 |q|^2).
struct ExactCos {
    dot: i128,
    norm_product: i128,
}

impl ExactCos {
    fn of(a: &[i64], q: &[i64]) -> Self {
        let dot: i128 = a.iter().zip(q).map(|(x, y)| i128::from(x * y)).sum();
        let na: i128 = a.iter().map(|x| i128::from(x * x)).sum();
        let nq: i128 = q.iter().map(|x| i128::from(x * x)).sum();
        ExactCos { dot, norm_product: na * nq }
    }

    fn value(&self) -> f64 {
        self.dot as f64 / (self.norm_product as f64).sqrt()
    }

    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let lhs = self.dot.signum() * self.dot * self.dot * other.norm_product;
        let rhs = other.dot.signum() * other.dot * other.dot * self.norm_product;
        lhs.cmp(&rhs)
    }
}

fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<i64> {
    loop {
        let v: Vec<i64> = (0..dim).map(|_| rng.random_range(-1000..=1000)).collect();
        if v.iter().any(|x| *x != 0) {
            return v;
        }
    }
}

fn floats(v: &[i64]) -> Vec<f64> {
    v.iter().map(|x| *x as f64).collect()
}

fn ac3_retrieval_oracle(_: &dyn CodeExecutor) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut ties = 0;
    let mut worst = 0.0f64;
    for case in 0..50 {
        let n = rng.random_range(1..=100);
        let dim = rng.random_range(2..=24);
        let mut vectors: Vec<Vec<i64>> = Vec::with_capacity(n);
        for j in 0..n {
            if j > 0 && rng.random_bool(0.15) {
                let src = rng.random_range(0..j);
                vectors.push(vectors[src].clone());
                ties += 1;
            } else {
                vectors.push(random_vector(&mut rng, dim));
            }
        }
        let mut ids: Vec<String> = (0..n).map(|j| format!("T{j:03}")).collect();
        ids.shuffle(&mut rng);
        let entries = ids
            .iter()
            .zip(&vectors)
            .map(|(id, v)| (TableRef::new(id).unwrap(), id.clone(), EmbeddingVector::new(floats(v)).unwrap()))
            .collect();
        let index = RetrievalIndex::from_parts("oracle", entries).map_err(|e| e.to_string())?;
        let q = random_vector(&mut rng, dim);
        let provider =
            PrecomputedProvider::from_pairs("oracle", [("q", floats(&q))]).map_err(|e| e.to_string())?;
        let k = rng.random_range(1..=n + 5);
        let got = index.query("q", k, &provider).map_err(|e| e.to_string())?;

        let mut oracle: Vec<(String, ExactCos)> =
            ids.iter().zip(&vectors).map(|(id, v)| (id.clone(), ExactCos::of(v, &q))).collect();
        oracle.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        oracle.truncate(k);

        ensure(got.len() == oracle.len(), || format!("case {case}: {} results, want {}", got.len(), oracle.len()))?;
        for (pos, (m, (id, exact))) in got.iter().zip(&oracle).enumerate() {
            let RankedMatch { table, score, rank } = m;
            ensure(table.as_str() == id && *rank == pos + 1, || {
                format!("case {case}: position {} is {table}, oracle says {id}", pos + 1)
            })?;
            let err = (score - exact.value()).abs();
            worst = worst.max(err);
            ensure(err <= 1e-9, || format!("case {case}: {table} score {score}, oracle {}", exact.value()))?;
        }
        for (id, v) in ids.iter().zip(&vectors).take(5) {
            let c = cosine_similarity(
                &EmbeddingVector::new(floats(v)).unwrap(),
                &EmbeddingVector::new(floats(&q)).unwrap(),
            )
            .map_err(|e| e.to_string())?;
            let want = ExactCos::of(v, &q).value();
            ensure((c - want).abs() <= 1e-9, || format!("case {case}: cosine({id}) {c} vs {want}"))?;
        }
    }
    Ok(format!("50 indices, {ties} duplicated vectors, max |cos - oracle| = {worst:.1e}"))
}

// ---------------------------------------------------------------- AC4

const BIRTHS: &str = "Plot the number of live born children in the Caribbean Netherlands by sex";

fn agentic_config(ws: &common::Workspace) -> AgentConfig {
    AgentConfig::new("mock", Mode::Agentic, &ws.data_dir, &ws.output_dir)
}

fn ac4a_exhaustion(exec: &dyn CodeExecutor) -> Result<String, String> {
    let ws = common::workspace();
    let cfg = agentic_config(&ws);
    let max = cfg.max_iters;
    let runner = AgentRunner::new(cfg, &ws.index, &ws.embedder, exec).map_err(|e| e.to_string())?;
    let provider = ScriptedProvider::repeating(common::call("c", "list_files", json!({"path": "data/"})));
    let calls = provider.call_counter();
    let task = TaskSpec::new("loop", BIRTHS, Difficulty::Easy).unwrap();
    let rec = runner.run(&task, Box::new(provider)).map_err(|e| e.to_string())?;
    let n = calls.load(Ordering::SeqCst);
    ensure(rec.status == RunStatus::ExhaustedIters && rec.turns.len() == max && n == max, || {
        format!("status {:?}, {} turns, {n} calls, cap {max}", rec.status, rec.turns.len())
    })?;
    Ok(format!("{n} calls at cap {max}"))
}

fn ac4b_repair(exec: &dyn CodeExecutor) -> Result<String, String> {
    let ws = common::workspace();
    let runner = AgentRunner::new(agentic_config(&ws), &ws.index, &ws.embedder, exec).map_err(|e| e.to_string())?;
    let task = TaskSpec::new("repair", BIRTHS, Difficulty::Easy).unwrap();
    let rec = runner
        .run(&task, Box::new(ScriptedProvider::new(common::repair_scenario("85332ENG.csv"))))
        .map_err(|e| e.to_string())?;
    ensure(rec.status == RunStatus::Completed, || format!("status {:?} ({:?})", rec.status, rec.reason))?;
    ensure(rec.code_iterations.len() == 2, || format!("{} code iterations", rec.code_iterations.len()))?;
    let dir = ws.output_dir.join(&rec.run_id);
    for f in ["manifest.json", "llm_log", "agent_log", "code_iter_1.py", "code_iter_2.py", "plot.png"] {
        ensure(common::exists(&dir, f), || format!("missing artifact {f}"))?;
    }
    Ok("completed, 2 code iterations, artifacts present".into())
}

/// Independent resolver: walks components, following symlinks by reading
/// their targets (realpath semantics), popping for `..`.
fn oracle_resolve(path: &Path, depth: usize) -> Option<PathBuf> {
    if depth > 40 {
        return None;
    }
    let mut out = PathBuf::from("/");
    let comps: Vec<Component> = path.components().collect();
    for (i, c) in comps.iter().enumerate() {
        match c {
            Component::RootDir | Component::Prefix(_) | Component::CurDir => {}
            Component::ParentDir => {
                out.pop();
            }
            Component::Normal(n) => {
                let next = out.join(n);
                match std::fs::symlink_metadata(&next) {
                    Ok(m) if m.file_type().is_symlink() => {
                        let target = std::fs::read_link(&next).ok()?;
                        let joined = if target.is_absolute() { target } else { out.join(target) };
                        let resolved = oracle_resolve(&joined, depth + 1)?;
                        std::fs::symlink_metadata(&resolved).ok()?;
                        let rest: PathBuf = comps[i + 1..].iter().collect();
                        return oracle_resolve(&resolved.join(rest), depth + 1);
                    }
                    _ => out = next,
                }
            }
        }
    }
    Some(out)
}

fn ac4c_guard(_: &dyn CodeExecutor) -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path().canonicalize().map_err(|e| e.to_string())?;
    let data = root.join("data");
    let output = root.join("output");
    let run = output.join("run-a");
    for d in [&data, &run, &output.join("run-b"), &root.join("outside")] {
        std::fs::create_dir_all(d).map_err(|e| e.to_string())?;
    }
    std::fs::write(data.join("t.csv"), "a\n1\n").unwrap();
    std::fs::write(root.join("secrets"), "x").unwrap();
    #[cfg(unix)]
    {
        use std::os::unix::fs::symlink;
        symlink(root.join("outside"), data.join("out_link")).unwrap();
        symlink(&data, run.join("data_link")).unwrap();
        symlink(output.join("run-b"), run.join("peer")).unwrap();
        symlink("../../secrets", run.join("rel_link")).unwrap();
        symlink(root.join("missing"), data.join("dangling")).unwrap();
    }
    let guard = PathGuard::new(&data, &output, &run).map_err(|e| e.to_string())?;

    let root_s = root.display().to_string();
    let fragments = [
        "..", ".", "data", "output", "run-a", "run-b", "out_link", "data_link", "peer", "rel_link", "dangling",
        "t.csv", "secrets", "outside", "missing", "...", "..data", "%2e%2e", "~", "etc", "passwd", "",
    ];
    let starts = ["data", "./data", "output", "./output", "output/run-a", ".", "..", "", "/etc", &root_s];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut allowed, mut denied) = (0, 0);
    for _ in 0..1000 {
        let mut p = starts.choose(&mut rng).unwrap().to_string();
        for _ in 0..rng.random_range(0..7) {
            let sep = if rng.random_bool(0.1) { "//" } else { "/" };
            p.push_str(sep);
            p.push_str(fragments.choose(&mut rng).unwrap());
        }
        let verdict = guard.check(&p);
        let mapped = {
            let rel = p.trim().trim_start_matches("./");
            if Path::new(rel).is_absolute() {
                Some(PathBuf::from(rel))
            } else if rel == "data" || rel.starts_with("data/") {
                Some(data.join(rel[4..].trim_start_matches('/')))
            } else if rel == "output" || rel.starts_with("output/") {
                Some(output.join(rel[6..].trim_start_matches('/')))
            } else {
                None
            }
        };
        let truth = mapped.as_deref().and_then(|m| oracle_resolve(m, 0));
        let inside = truth.as_ref().is_some_and(|t| t.starts_with(&data) || t.starts_with(&run));
        match verdict {
            PathVerdict::Allowed { resolved } => {
                allowed += 1;
                ensure(inside, || format!("{p:?} allowed as {} but resolves to {truth:?}", resolved.display()))?;
                ensure(truth.as_ref() == Some(&resolved), || {
                    format!("{p:?} resolved to {}, oracle {truth:?}", resolved.display())
                })?;
            }
            PathVerdict::Denied { .. } => {
                denied += 1;
                ensure(!inside || mapped.is_none() || truth.is_none(), || {
                    format!("{p:?} denied though it resolves inside to {truth:?}")
                })?;
            }
        }
    }
    ensure(allowed > 100 && denied > 100, || format!("degenerate sample: {allowed} allowed, {denied} denied"))?;
    Ok(format!("1000 paths, {allowed} allowed, {denied} denied, no escapes"))
}

// ---------------------------------------------------------------- AC5

fn record(model: &str, task: &TaskSpec) -> RunRecord {
    RunRecord {
        run_id: format!("{model}-agentic-{}", task.id),
        model_config: model.into(),
        mode: Mode::Agentic,
        task: task.clone(),
        retrieved: RankedMatch { table: TableRef::new("T1").unwrap(), score: 0.5, rank: 1 },
        turns: vec![],
        code_iterations: vec![],
        final_plot: None,
        status: RunStatus::Completed,
        reason: None,
        prompt_hashes: Default::default(),
        executor: "stub".into(),
        started_unix_ms: 0,
        duration_s: 0.0,
    }
}

/// Spreadsheet style: one row per sheet with ROUND(yes/size*10, 2) per
/// category, then AVERAGE over the rows in a group.
fn sheet_row(answers: &BTreeMap<&str, u8>) -> [f64; 3] {
    let mut yes = [0.0; 3];
    let mut size = [0.0; 3];
    for item in checklist() {
        let i = match item.category {
            Category::Visual => 0,
            Category::Code => 1,
            Category::Data => 2,
        };
        size[i] += 1.0;
        yes[i] += f64::from(answers[item.id]);
    }
    [0, 1, 2].map(|i| (yes[i] / size[i] * 10.0 * 100.0).round() / 100.0)
}

fn average(rows: &[[f64; 3]]) -> [f64; 3] {
    [0, 1, 2].map(|i| rows.iter().map(|r| r[i]).sum::<f64>() / rows.len() as f64)
}

fn ac5_scoring(_: &dyn CodeExecutor) -> Result<String, String> {
    let models = ["claude-3.5", "gpt-4o", "llama-3.1", "o1-high", "o1-low", "o1-mini", "o3-mini-high", "o3-mini-low"];
    let tasks: Vec<TaskSpec> = (0..25)
        .map(|i| {
            let d = match i {
                0..=6 => Difficulty::Easy,
                7..=17 => Difficulty::Medium,
                _ => Difficulty::Hard,
            };
            TaskSpec::new(format!("t{i:02}"), format!("task {i}"), d).unwrap()
        })
        .collect();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut oracle_rows: BTreeMap<(String, Option<Difficulty>), Vec<[f64; 3]>> = BTreeMap::new();
    for (mi, model) in models.iter().enumerate() {
        let skill = 0.35 + 0.08 * mi as f64;
        for task in &tasks {
            let answers: BTreeMap<&str, u8> =
                checklist().iter().map(|i| (i.id, u8::from(rng.random_bool(skill)))).collect();
            let filled: String = render_grade_form(&record(model, task))
                .lines()
                .map(|l| match l.strip_suffix(" =") {
                    Some(id) if answers.contains_key(id) => format!("{id} = {}\n", answers[id]),
                    _ if l == "grader =" => "grader = g1\n".to_string(),
                    _ => format!("{l}\n"),
                })
                .collect();
            std::fs::write(dir.path().join(format!("{model}__{}.txt", task.id)), filled).unwrap();
            let row = sheet_row(&answers);
            oracle_rows.entry((model.to_string(), None)).or_default().push(row);
            oracle_rows.entry((model.to_string(), Some(task.difficulty))).or_default().push(row);
        }
    }
    let sheets = load_sheets(dir.path()).map_err(|e| e.to_string())?;
    ensure(sheets.len() == 200, || format!("{} sheets loaded", sheets.len()))?;
    let report = aggregate(&sheets, &tasks).map_err(|e| e.to_string())?;
    let report = parse_report_csv(&render_report(&report, ReportFormat::Csv, true)).map_err(|e| e.to_string())?;

    let check = |label: String, got: [f64; 3], n: usize, key: (String, Option<Difficulty>)| {
        let rows = &oracle_rows[&key];
        let want = average(rows);
        ensure(n == rows.len(), || format!("{label}: n={n}, oracle {}", rows.len()))?;
        ensure((0..3).all(|i| within(got[i], want[i], 0.01)), || format!("{label}: {got:?} vs oracle {want:?}"))
    };
    ensure(report.rows.len() == 8, || format!("{} model rows", report.rows.len()))?;
    for r in &report.rows {
        let s = r.scores;
        check(r.model_config.clone(), [s.visual(), s.code(), s.data()], s.n, (r.model_config.clone(), None))?;
    }
    ensure(report.breakdown.len() == 24, || format!("{} breakdown rows", report.breakdown.len()))?;
    for b in &report.breakdown {
        let s = b.scores;
        let want_n = match b.difficulty {
            Difficulty::Medium => 11,
            _ => 7,
        };
        ensure(s.n == want_n, || format!("{} {}: n={}", b.model_config, b.difficulty, s.n))?;
        check(
            format!("{} {}", b.model_config, b.difficulty),
            [s.visual(), s.code(), s.data()],
            s.n,
            (b.model_config.clone(), Some(b.difficulty)),
        )?;
    }
    Ok("200 sheets, 8 rows + 24 breakdown rows within 0.01".into())
}

// ---------------------------------------------------------------- AC6

struct Counting<'a> {
    inner: &'a dyn CodeExecutor,
    executions: AtomicUsize,
}

impl CodeExecutor for Counting<'_> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn handshake(&self) -> Result<CapabilityReport, SandboxError> {
        self.inner.handshake()
    }

    fn execute(&self, request: &ExecutionRequest) -> ExecutionResult {
        self.executions.fetch_add(1, Ordering::SeqCst);
        self.inner.execute(request)
    }
}

fn ac6_zero_shot(exec: &dyn CodeExecutor) -> Result<String, String> {
    let ws = common::workspace();
    let cases = [
        ("plots", "```python\nimport matplotlib.pyplot as plt\ndf.plot()\nplt.show()\n```\nBirths.", RunStatus::Completed, 1),
        ("raises", "```python\nraise ValueError('bad column')\n```", RunStatus::Failed, 1),
        ("no-plot", "```python\nprint(len(df))\n```", RunStatus::Failed, 1),
        ("prose", "A bar chart of births by sex would fit.", RunStatus::Failed, 0),
    ];
    for (name, text, status, want_exec) in cases {
        let counting = Counting { inner: exec, executions: AtomicUsize::new(0) };
        let cfg = AgentConfig::new("mock", Mode::ZeroShot, &ws.data_dir, &ws.output_dir);
        let runner = AgentRunner::new(cfg, &ws.index, &ws.embedder, &counting).map_err(|e| e.to_string())?;
        let provider = ScriptedProvider::new(vec![ModelTurn::text(text), ModelTurn::text("never read")]);
        let calls = provider.call_counter();
        let task = TaskSpec::new(name, BIRTHS, Difficulty::Easy).unwrap();
        let rec = runner.run(&task, Box::new(provider)).map_err(|e| e.to_string())?;
        let (c, e) = (calls.load(Ordering::SeqCst), counting.executions.load(Ordering::SeqCst));
        ensure(rec.status == status && c == 1 && e == want_exec, || {
            format!("{name}: status {:?}, {c} calls, {e} executions", rec.status)
        })?;
    }
    Ok("1 call and 1 execution per run with code; 1 call, 0 executions without a code block".into())
}

// ---------------------------------------------------------------- driver

const PRIMARY: [(&str, &str, Check, Duration); 8] = [
    ("AC1", "normalization fixtures", ac1_normalization, Duration::from_secs(1)),
    ("AC2", "hit-rate reproduction", ac2_hit_rates, Duration::from_secs(1)),
    ("AC3", "retrieval oracle equivalence", ac3_retrieval_oracle, Duration::from_secs(30)),
    ("AC4a", "agent loop exhausts at max_iters", ac4a_exhaustion, Duration::from_secs(30)),
    ("AC4b", "agent loop repair scenario", ac4b_repair, Duration::from_secs(30)),
    ("AC4c", "path guard over 1000 adversarial paths", ac4c_guard, Duration::from_secs(30)),
    ("AC5", "scoring pipeline end to end", ac5_scoring, Duration::from_secs(30)),
    ("AC6", "zero-shot contract", ac6_zero_shot, Duration::from_secs(30)),
];

fn run_suite(exec: &dyn CodeExecutor, tag: &str) -> (bool, Duration) {
    let mut ok = true;
    let mut total = Duration::ZERO;
    let mut ac4 = Duration::ZERO;
    for (id, name, check, budget) in PRIMARY {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| check(exec)))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        let took = start.elapsed();
        total += took;
        if id.starts_with("AC4") {
            ac4 += took;
        }
        let outcome = outcome.and_then(|detail| {
            if took <= budget {
                Ok(detail)
            } else {
                Err(format!("took {took:?}, budget {budget:?}"))
            }
        });
        match outcome {
            Ok(detail) => println!("[PASS] {id}{tag} {name}: {detail} ({:.0?})", took),
            Err(why) => {
                ok = false;
                println!("[FAIL] {id}{tag} {name}: {why}");
            }
        }
    }
    if ac4 > Duration::from_secs(30) {
        ok = false;
        println!("[FAIL] AC4{tag} total runtime {ac4:?} exceeds 30s");
    }
    (ok, total)
}

fn main() {
    let (primary_ok, _) = run_suite(&StubExecutor, "");

    println!("[SKIP] AC7 sandbox behavior: secondary component, exercised by the harness's own tests");

    let missing = HarnessClient::new(vec!["/nonexistent/statviz-harness".to_string()]);
    let selected = select_executor(Some(missing));
    let (fallback_ok, took) = if selected.name() == "stub" {
        run_suite(selected.as_ref(), " (fallback)")
    } else {
        println!("[FAIL] AC8: expected the stub executor, got {}", selected.name());
        (false, Duration::ZERO)
    };
    if fallback_ok {
        println!("[PASS] AC8 primary suite green with no harness installed ({took:.0?})");
    } else {
        println!("[FAIL] AC8 primary suite under fallback executor");
    }

    if !(primary_ok && fallback_ok) {
        std::process::exit(1);
    }
}
