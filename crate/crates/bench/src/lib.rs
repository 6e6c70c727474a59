//! Seeded synthetic inputs for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statviz_core::catalog::{ColumnKind, ColumnSpec, TableMetadata, TableRef};
use statviz_core::evaluation::{checklist, GradeSheet};
use statviz_core::retrieval::{EmbeddingVector, RetrievalIndex};
use statviz_core::tasks::{Difficulty, TaskSpec};

fn unit_gaussianish(rng: &mut ChaCha8Rng, dim: usize) -> EmbeddingVector {
    let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    EmbeddingVector::new(v.into_iter().map(|x| x / norm).collect()).expect("finite")
}

/// `n` random unit vectors of dimension `dim` under ids `B00000`, `B00001`, ...
pub fn random_index(n: usize, dim: usize, seed: u64) -> RetrievalIndex {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = (0..n)
        .map(|i| {
            let id = format!("B{i:05}");
            (TableRef::new(&id).expect("valid id"), id, unit_gaussianish(&mut rng, dim))
        })
        .collect();
    RetrievalIndex::from_parts("bench", entries).expect("non-empty")
}

pub fn random_query(dim: usize, seed: u64) -> EmbeddingVector {
    unit_gaussianish(&mut ChaCha8Rng::seed_from_u64(seed), dim)
}

/// 25 tasks split 7/11/7 and one random sheet per (model, task).
pub fn random_sheets(models: usize, seed: u64) -> (Vec<GradeSheet>, Vec<TaskSpec>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tasks: Vec<TaskSpec> = (0..25)
        .map(|i| {
            let d = match i {
                0..=6 => Difficulty::Easy,
                7..=17 => Difficulty::Medium,
                _ => Difficulty::Hard,
            };
            TaskSpec::new(format!("t{i:02}"), "bench task", d).expect("valid task")
        })
        .collect();
    let mut sheets = Vec::new();
    for m in 0..models {
        for t in &tasks {
            sheets.push(GradeSheet {
                run_id: format!("m{m}-agentic-{}", t.id),
                model_config: format!("m{m}"),
                task_id: t.id.clone(),
                grader: "bench".into(),
                notes: None,
                answers: checklist()
                    .iter()
                    .map(|i| (i.id.to_string(), u8::from(rng.random_bool(0.7))))
                    .collect(),
            });
        }
    }
    (sheets, tasks)
}

/// A table shaped like the births table, with `extra` additional topic columns.
pub fn births_metadata(extra: usize) -> TableMetadata {
    let mut columns = vec![
        ColumnSpec { name: "ID".into(), kind: ColumnKind::Key, unit: None },
        ColumnSpec { name: "Sex".into(), kind: ColumnKind::Categorical, unit: None },
        ColumnSpec { name: "CaribbeanNetherlands".into(), kind: ColumnKind::Categorical, unit: None },
        ColumnSpec { name: "Periods".into(), kind: ColumnKind::PeriodString, unit: None },
    ];
    columns.extend((0..=extra).map(|i| ColumnSpec {
        name: format!("Topic_{i}"),
        kind: ColumnKind::Numeric,
        unit: Some("number".into()),
    }));
    TableMetadata {
        table: TableRef::new("85332ENG").expect("valid id"),
        title: "Caribbean Netherlands; live born children".into(),
        description: "Live born children by sex on Bonaire, Sint Eustatius and Saba".into(),
        columns,
        source_url: "https://opendata.cbs.nl/ODataApi/OData/85332ENG/TypedDataSet".into(),
    }
}
