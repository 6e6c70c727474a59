use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::Context;
use rayon::prelude::*;
use statviz_core::agent::{read_manifest, AgentConfig, AgentRunner, RunRecord};
use statviz_core::catalog::{list_datasets, materialize, DirTransport, ODataClient, TableRef, UreqTransport};
use statviz_core::evaluation::{aggregate, emit_grade_form, load_sheets, render_report, ReportFormat};
use statviz_core::llm::{build_provider, ProviderKind, ProviderSettings};
use statviz_core::prompting::{parse_modules, MANIFEST};
use statviz_core::retrieval::{exact_match_at_k, RetrievalIndex};
use statviz_core::sandbox::{select_executor, CodeExecutor, HarnessClient, StubExecutor};
use statviz_core::tasks::{load_suite, TaskSpec};

use crate::config::CliConfig;
use crate::{RunArgs, UserError};

fn odata_client(cfg: &CliConfig) -> ODataClient {
    let client = if cfg.endpoint.starts_with("file://") {
        ODataClient::new(cfg.endpoint.clone(), DirTransport)
    } else {
        ODataClient::new(cfg.endpoint.clone(), UreqTransport::new(Duration::from_secs(120)))
    };
    match &cfg.cache_dir {
        Some(dir) => client.with_cache(dir),
        None => client,
    }
}

pub fn fetch(cfg: &CliConfig, refs: &[String], page_size: Option<usize>) -> anyhow::Result<()> {
    let refs = refs
        .iter()
        .map(|r| TableRef::new(r.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    let data_dir = cfg.ensure_dir(&cfg.data_dir)?;
    let client = odata_client(cfg);
    let page_size = page_size.unwrap_or(cfg.page_size);
    let mut failed = Vec::new();
    for table in &refs {
        let result = client
            .fetch_metadata(table)
            .and_then(|meta| client.fetch_table(&meta, page_size).map(|t| (meta, t)))
            .and_then(|(meta, t)| materialize(&t, &meta, data_dir).map(|_| t.rows.len()));
        match result {
            Ok(n) => println!("{table}\t{n} rows"),
            Err(e) => {
                eprintln!("{table}: {e}");
                failed.push((table.clone(), e));
            }
        }
    }
    match failed.into_iter().next() {
        None => Ok(()),
        Some((table, e)) => Err(anyhow::Error::new(e).context(format!("fetching {table}"))),
    }
}

pub fn index(cfg: &CliConfig) -> anyhow::Result<()> {
    let catalog = list_datasets(&cfg.data_dir)?;
    let provider = cfg.embedding.build()?;
    let index = RetrievalIndex::build(&catalog, provider.as_ref())?;
    index.persist(cfg.ensure_dir(&cfg.index_dir)?)?;
    println!(
        "indexed {} tables with {} (dim {}) into {}",
        index.len(),
        index.provider_id(),
        index.dim(),
        cfg.index_dir.display()
    );
    Ok(())
}

pub fn retrieve(cfg: &CliConfig, prompt: &str, k: usize) -> anyhow::Result<()> {
    let index = RetrievalIndex::load(&cfg.index_dir)?;
    let provider = cfg.embedding.build()?;
    for m in index.query(prompt, k, provider.as_ref())? {
        println!("{}\t{}\t{:.4}", m.rank, m.table, m.score);
    }
    Ok(())
}

pub fn hit_rates(cfg: &CliConfig, task_file: &Path) -> anyhow::Result<()> {
    let tasks = load_suite(task_file)?;
    let index = RetrievalIndex::load(&cfg.index_dir)?;
    let provider = cfg.embedding.build()?;
    let mut ranks = BTreeMap::new();
    for t in &tasks {
        let Some(gold) = &t.gold_table else { continue };
        let rank = index.gold_rank(&t.prompt, gold, provider.as_ref())?;
        println!("{}\t{}\trank {}", t.id, gold, rank);
        ranks.insert(t.id.clone(), rank);
    }
    if ranks.is_empty() {
        return Err(UserError::new(format!("no task in {} names a gold table", task_file.display())).into());
    }
    let hits = exact_match_at_k(&ranks, &[1, 5, 10])?;
    for (k, rate) in &hits.hits_at {
        println!("hits@{k}\t{rate:.2}");
    }
    Ok(())
}

fn provider_settings(cfg: &CliConfig, args: &RunArgs) -> anyhow::Result<ProviderSettings> {
    if let Some(spec) = &args.provider {
        let (kind, path) = spec
            .split_once(':')
            .ok_or_else(|| UserError::new(format!("--provider expects mock:<file> or replay:<file>, got {spec:?}")))?;
        let mut s = ProviderSettings::mock(path);
        s.kind = match kind {
            "mock" => ProviderKind::Mock,
            "replay" => ProviderKind::Replay,
            other => return Err(UserError::new(format!("unknown provider override {other:?} (mock, replay)")).into()),
        };
        return Ok(s);
    }
    cfg.models.get(&args.model_config).cloned().ok_or_else(|| {
        UserError::new(format!(
            "no [models.{}] section in the config and no --provider given",
            args.model_config
        ))
        .into()
    })
}

fn executor(cfg: &CliConfig) -> Box<dyn CodeExecutor> {
    match &cfg.harness {
        Some(cmd) => select_executor(Some(HarnessClient::new(cmd.clone()))),
        None => {
            tracing::warn!("no sandbox harness configured, using the stub executor");
            Box::new(StubExecutor)
        }
    }
}

enum Outcome {
    Ran(RunRecord),
    Skipped(RunRecord),
}

pub fn run(cfg: &CliConfig, args: RunArgs) -> anyhow::Result<()> {
    let tasks: Vec<TaskSpec> = match (&args.task_file, &args.prompt) {
        (Some(f), _) => load_suite(f)?,
        (None, Some(p)) => vec![TaskSpec::new(&args.task_id, p, args.difficulty)
            .map_err(|e| UserError::new(e.to_string()))?],
        (None, None) => return Err(UserError::new("give --task-file or --prompt").into()),
    };
    let settings = provider_settings(cfg, &args)?;
    build_provider(&settings)?;

    let mut config = AgentConfig::new(
        args.model_config.clone(),
        args.mode,
        cfg.ensure_dir(&cfg.data_dir)?,
        cfg.ensure_dir(&cfg.output_dir)?,
    );
    config.enabled_modules = parse_modules(&args.modules)?;
    config.max_iters = args.max_iters.unwrap_or(cfg.max_iters);
    config.exec_timeout_s = cfg.timeout_s;
    config.provider = Some(settings.clone());

    let index = RetrievalIndex::load(&cfg.index_dir)?;
    let embedder = cfg.embedding.build()?;
    let executor = executor(cfg);
    let runner = AgentRunner::new(config, &index, embedder.as_ref(), executor.as_ref())?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .context("starting worker pool")?;
    let results: Vec<anyhow::Result<Outcome>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|task| {
                if !args.force {
                    if let Some(rec) = runner.existing(task) {
                        return Ok(Outcome::Skipped(rec));
                    }
                }
                let provider = build_provider(&settings)?;
                let rec = runner
                    .run(task, provider)
                    .with_context(|| format!("task {}", task.id))?;
                Ok(Outcome::Ran(rec))
            })
            .collect()
    });

    let mut first_error = None;
    for r in results {
        match r {
            Ok(Outcome::Ran(rec)) => match &rec.reason {
                Some(reason) => println!("{}\t{}\t{}", rec.run_id, rec.status.as_str(), reason),
                None => println!("{}\t{}", rec.run_id, rec.status.as_str()),
            },
            Ok(Outcome::Skipped(rec)) => println!("{}\tskipped ({})", rec.run_id, rec.status.as_str()),
            Err(e) => {
                eprintln!("error: {e:#}");
                first_error.get_or_insert(e);
            }
        }
    }
    first_error.map_or(Ok(()), Err)
}

/// Run directories holding a manifest, sorted by name.
fn finished_runs(output_dir: &Path) -> anyhow::Result<Vec<RunRecord>> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(output_dir)
        .with_context(|| format!("reading {}", output_dir.display()))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.join(MANIFEST).is_file())
        .collect();
    dirs.sort();
    dirs.iter()
        .map(|d| {
            read_manifest(&d.join(MANIFEST))
                .map(|m| m.record)
                .with_context(|| format!("reading {}", d.join(MANIFEST).display()))
        })
        .collect()
}

pub fn grade(cfg: &CliConfig, forms_dir: Option<PathBuf>, model_config: Option<&str>) -> anyhow::Result<()> {
    let forms_dir = forms_dir.unwrap_or_else(|| cfg.forms_dir.clone());
    let runs: Vec<RunRecord> = finished_runs(&cfg.output_dir)?
        .into_iter()
        .filter(|r| model_config.is_none_or(|m| r.model_config == m))
        .collect();
    for record in &runs {
        emit_grade_form(record, &forms_dir)?;
    }
    println!("wrote {} grade forms to {}", runs.len(), forms_dir.display());
    Ok(())
}

pub fn report(
    cfg: &CliConfig,
    sheets: Option<PathBuf>,
    task_file: Option<PathBuf>,
    by_difficulty: bool,
    format: ReportFormat,
) -> anyhow::Result<()> {
    let sheets_dir = sheets.unwrap_or_else(|| cfg.sheets_dir.clone());
    let task_file = task_file.unwrap_or_else(|| cfg.task_file.clone());
    let tasks = load_suite(&task_file)?;
    let sheets = load_sheets(&sheets_dir)?;
    let report = aggregate(&sheets, &tasks)?;
    print!("{}", render_report(&report, format, by_difficulty));
    Ok(())
}
