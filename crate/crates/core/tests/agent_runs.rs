mod common;

use std::collections::BTreeSet;
use std::sync::atomic::Ordering;

use serde_json::json;
use statviz_core::agent::{read_manifest, AgentConfig, AgentRunner, Mode, RunStatus, ToolPayload, ToolStatus};
use statviz_core::llm::{ModelTurn, ScriptedProvider};
use statviz_core::prompting::ModuleId;
use statviz_core::sandbox::{ExitStatus, StubExecutor};
use statviz_core::tasks::{Difficulty, TaskSpec};

use common::{call, exists, repair_scenario, workspace, Workspace};

const BIRTHS: &str = "Plot the number of live born children in the Caribbean Netherlands by sex";

fn task(id: &str) -> TaskSpec {
    TaskSpec::new(id, BIRTHS, Difficulty::Easy).unwrap()
}

fn config(ws: &Workspace, mode: Mode) -> AgentConfig {
    AgentConfig::new("mock", mode, &ws.data_dir, &ws.output_dir)
}

fn runner<'a>(ws: &'a Workspace, cfg: AgentConfig) -> AgentRunner<'a> {
    AgentRunner::new(cfg, &ws.index, &ws.embedder, &StubExecutor).unwrap()
}

#[test]
fn births_prompt_retrieves_births_table() {
    let ws = workspace();
    let top = ws.index.query(BIRTHS, 3, &ws.embedder).unwrap();
    assert_eq!(top[0].table.as_str(), "85332ENG");
    let milk = ws
        .index
        .query("Plot the monthly volume of raw cow's milk delivered by dairy farmers", 1, &ws.embedder)
        .unwrap();
    assert_eq!(milk[0].table.as_str(), "DAIRY01");
}

#[test]
fn repair_scenario_completes_with_two_iterations() {
    let ws = workspace();
    let r = runner(&ws, config(&ws, Mode::Agentic));
    let record = r
        .run(&task("t01"), Box::new(ScriptedProvider::new(repair_scenario("85332ENG.csv"))))
        .unwrap();
    assert_eq!(record.status, RunStatus::Completed, "{:?}", record.reason);
    assert_eq!(record.code_iterations, ["code_iter_1.py", "code_iter_2.py"]);
    assert_eq!(record.final_plot.as_deref(), Some("plot.png"));
    assert_eq!(record.turns.len(), 5);
    assert_eq!(record.retrieved.table.as_str(), "85332ENG");

    let head = &record.turns[0].tool_results[0];
    match &head.payload {
        ToolPayload::Text(t) => assert_eq!(t.lines().count(), 3, "{t}"),
        other => panic!("{other:?}"),
    }
    match &record.turns[1].tool_results[0].payload {
        ToolPayload::Execution(e) => {
            assert_eq!(e.exit_status, ExitStatus::RuntimeError);
            assert!(e.stderr.contains("KeyError"));
        }
        other => panic!("{other:?}"),
    }

    let dir = ws.output_dir.join(&record.run_id);
    for f in ["manifest.json", "llm_log", "agent_log", "code_iter_1.py", "code_iter_2.py", "plot.png", "prompt.txt"] {
        assert!(exists(&dir, f), "missing {f}");
    }
    let first = std::fs::read_to_string(dir.join("code_iter_1.py")).unwrap();
    assert!(first.contains("KeyError"));
    let llm_lines = std::fs::read_to_string(dir.join("llm_log")).unwrap().lines().count();
    assert_eq!(llm_lines, 5);
    let manifest = read_manifest(&dir.join("manifest.json")).unwrap();
    assert_eq!(manifest.record, record);
    assert_eq!(manifest.settings.max_iters, 25);
    assert_eq!(manifest.settings.exec_timeout_s, 60.0);
    assert_eq!(manifest.settings.memory_limit_mb, None);
}

#[test]
fn never_stopping_model_exhausts_at_cap() {
    let ws = workspace();
    let mut cfg = config(&ws, Mode::Agentic);
    cfg.max_iters = 6;
    let provider = ScriptedProvider::repeating(call("c", "list_files", json!({"path": "data/"})));
    let calls = provider.call_counter();
    let record = runner(&ws, cfg).run(&task("t02"), Box::new(provider)).unwrap();
    assert_eq!(record.status, RunStatus::ExhaustedIters);
    assert_eq!(record.turns.len(), 6);
    assert_eq!(calls.load(Ordering::SeqCst), 6);
}

#[test]
fn immediate_stop_without_plot_fails() {
    let ws = workspace();
    let mut cfg = config(&ws, Mode::Agentic);
    cfg.max_iters = 1;
    let provider = ScriptedProvider::new(vec![ModelTurn::text("Nothing to do.")]);
    let record = runner(&ws, cfg).run(&task("t03"), Box::new(provider)).unwrap();
    assert_eq!(record.status, RunStatus::Failed);
    assert!(record.code_iterations.is_empty());
    assert!(record.final_plot.is_none());
}

#[test]
fn listing_and_denials_do_not_abort() {
    let ws = workspace();
    std::fs::write(ws.tmp.path().join("secrets"), "token").unwrap();
    let provider = ScriptedProvider::new(vec![
        call("a", "list_files", json!({"path": "data/"})),
        call("b", "read_file_head", json!({"path": "../secrets"})),
        call("c", "read_file_head", json!({"path": "output/other-run/plot.png"})),
        call("d", "read_file_head", json!({"path": "data/NOPE.csv"})),
        call("e", "get_human_feedback", json!({"request": "Which sex codes are valid?"})),
        ModelTurn::text("stop"),
    ]);
    let record = runner(&ws, config(&ws, Mode::Agentic))
        .run(&task("t04"), Box::new(provider))
        .unwrap();
    let results: Vec<_> = record.turns.iter().flat_map(|t| &t.tool_results).collect();
    match &results[0].payload {
        ToolPayload::Text(t) => assert_eq!(t.lines().count(), 14),
        other => panic!("{other:?}"),
    }
    assert_eq!(results[1].status, ToolStatus::Denied);
    assert_eq!(results[1].denied_path.as_deref(), Some("../secrets"));
    assert_eq!(results[2].status, ToolStatus::Denied);
    assert_eq!(results[3].status, ToolStatus::Error);
    assert_eq!(results[4].status, ToolStatus::Ok);
    let feedback = std::fs::read_to_string(ws.output_dir.join(&record.run_id).join("feedback.txt")).unwrap();
    assert!(feedback.contains("Which sex codes are valid?"));
    // stopped without a plot
    assert_eq!(record.status, RunStatus::Failed);
}

#[test]
fn invalid_tool_call_fails_the_run() {
    let ws = workspace();
    let provider = ScriptedProvider::new(vec![call("x", "rm_rf", json!({}))]);
    let record = runner(&ws, config(&ws, Mode::Agentic))
        .run(&task("t05"), Box::new(provider))
        .unwrap();
    assert_eq!(record.status, RunStatus::Failed);
    assert!(record.reason.unwrap().contains("rm_rf"));
}

#[test]
fn zero_shot_contract() {
    let ws = workspace();
    let cases = [
        ("```python\nimport matplotlib.pyplot as plt\ndf.plot()\nplt.show()\n```\nBirths by sex.", RunStatus::Completed, 1),
        ("The data covers births; a bar chart would suit it.", RunStatus::Failed, 0),
        ("```python\nx = 1/0\n```", RunStatus::Failed, 1),
    ];
    for (i, (text, status, iterations)) in cases.into_iter().enumerate() {
        let provider = ScriptedProvider::new(vec![ModelTurn::text(text)]);
        let calls = provider.call_counter();
        let record = runner(&ws, config(&ws, Mode::ZeroShot))
            .run(&task(&format!("z{i}")), Box::new(provider))
            .unwrap();
        assert_eq!(record.status, status, "case {i}: {:?}", record.reason);
        assert_eq!(record.code_iterations.len(), iterations, "case {i}");
        assert_eq!(calls.load(Ordering::SeqCst), 1);
        if iterations == 0 {
            assert_eq!(record.reason.as_deref(), Some("no code block"));
        }
    }
}

#[test]
fn zero_shot_prompt_carries_modules() {
    let ws = workspace();
    let mut cfg = config(&ws, Mode::ZeroShot);
    cfg.enabled_modules = BTreeSet::from([ModuleId::VizChecklist]);
    let provider = ScriptedProvider::new(vec![ModelTurn::text("no code")]);
    let record = runner(&ws, cfg).run(&task("m1"), Box::new(provider)).unwrap();
    assert!(record.prompt_hashes.contains_key("module:viz_checklist"));
    let prompt = std::fs::read_to_string(ws.output_dir.join(&record.run_id).join("prompt.txt")).unwrap();
    assert!(prompt.contains("clarity, data accuracy, and task alignment"));
    assert!(prompt.contains("LiveBornChildren_1"));
}

#[test]
fn replay_is_deterministic() {
    let ws = workspace();
    let r = runner(&ws, config(&ws, Mode::Agentic));
    let a = r
        .run(&task("r1"), Box::new(ScriptedProvider::new(repair_scenario("85332ENG.csv"))))
        .unwrap();
    let b = r
        .run(&task("r1"), Box::new(ScriptedProvider::new(repair_scenario("85332ENG.csv"))))
        .unwrap();
    assert_eq!(a.normalized(), b.normalized());

    let log = ws.output_dir.join(&a.run_id).join("llm_log");
    let saved = ws.tmp.path().join("saved_llm_log");
    std::fs::copy(&log, &saved).unwrap();
    let replayed = r
        .run(&task("r1"), Box::new(ScriptedProvider::from_log(&saved).unwrap()))
        .unwrap();
    assert_eq!(replayed.normalized(), a.normalized());
}

#[test]
fn parallel_runs_stay_isolated() {
    let ws = workspace();
    let r = runner(&ws, config(&ws, Mode::Agentic));
    let records: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..4)
            .map(|i| {
                let r = &r;
                s.spawn(move || {
                    r.run(
                        &task(&format!("p{i}")),
                        Box::new(ScriptedProvider::new(repair_scenario("85332ENG.csv"))),
                    )
                    .unwrap()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for rec in &records {
        assert_eq!(rec.status, RunStatus::Completed);
        assert!(exists(&ws.output_dir.join(&rec.run_id), "plot.png"));
    }
}
