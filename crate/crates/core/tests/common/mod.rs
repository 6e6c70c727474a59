#![allow(dead_code)]

use std::path::{Path, PathBuf};

use serde_json::json;
use statviz_core::catalog::{materialize, Cell, ColumnKind, ColumnSpec, DataTable, TableMetadata, TableRef};
use statviz_core::llm::ModelTurn;
use statviz_core::retrieval::{HashingProvider, RetrievalIndex};

pub struct Workspace {
    pub tmp: tempfile::TempDir,
    pub data_dir: PathBuf,
    pub output_dir: PathBuf,
    pub embedder: HashingProvider,
    pub index: RetrievalIndex,
    pub tables: Vec<TableMetadata>,
}

fn col(name: &str, kind: ColumnKind, unit: Option<&str>) -> ColumnSpec {
    ColumnSpec {
        name: name.into(),
        kind,
        unit: unit.map(str::to_string),
    }
}

fn meta(id: &str, title: &str, description: &str, columns: Vec<ColumnSpec>) -> TableMetadata {
    TableMetadata {
        table: TableRef::new(id).unwrap(),
        title: title.into(),
        description: description.into(),
        columns,
        source_url: format!("https://example.org/ODataApi/OData/{id}/TypedDataSet"),
    }
}

/// Rows for a table: an ID column followed by generated values per kind.
fn rows(columns: &[ColumnSpec], n: usize) -> Vec<Vec<Cell>> {
    (0..n)
        .map(|r| {
            columns
                .iter()
                .enumerate()
                .map(|(c, spec)| match spec.kind {
                    ColumnKind::Key => Some((r + 1).to_string()),
                    ColumnKind::PeriodString => Some(format!("{}MM{:02}", 2010 + r / 12, r % 12 + 1)),
                    ColumnKind::Numeric if r % 17 == 5 && c > 1 => None,
                    ColumnKind::Numeric => Some(format!("{}", (r * 7 + c * 13) % 1000)),
                    ColumnKind::Categorical => Some(format!("C{:03}", (r + c) % 4)),
                })
                .collect()
        })
        .collect()
}

/// Seven materialized tables, 300 rows in the births table.
pub fn catalog() -> Vec<(TableMetadata, usize)> {
    use ColumnKind::*;
    vec![
        (
            meta(
                "85332ENG",
                "Caribbean Netherlands; live born children",
                "Live born children by sex on Bonaire, Sint Eustatius and Saba",
                vec![
                    col("ID", Key, None),
                    col("Sex", Categorical, None),
                    col("CaribbeanNetherlands", Categorical, None),
                    col("Periods", PeriodString, None),
                    col("LiveBornChildren_1", Numeric, Some("number")),
                ],
            ),
            300,
        ),
        (
            meta(
                "DAIRY01",
                "Dairy industry; supply and production of dairy products",
                "Monthly raw cow's milk delivered by dairy farmers and production of cheese, butter and milk powder",
                vec![
                    col("ID", Key, None),
                    col("Periods", PeriodString, None),
                    col("CowSMilkDelivered_1", Numeric, Some("mln kg")),
                    col("Cheese_2", Numeric, Some("mln kg")),
                ],
            ),
            120,
        ),
        (
            meta(
                "TURN01",
                "Manufacturing; turnover index, seasonally adjusted",
                "Daily turnover for domestic and foreign markets by manufacturing sector, including wood products",
                vec![
                    col("ID", Key, None),
                    col("SectorBranches", Categorical, None),
                    col("Periods", PeriodString, None),
                    col("DomesticTurnover_1", Numeric, Some("index")),
                    col("ForeignTurnover_2", Numeric, Some("index")),
                ],
            ),
            96,
        ),
        (
            meta(
                "DEATHS01",
                "Deaths; weekly, by age and sex",
                "Registered deaths per week by age group and sex",
                vec![
                    col("ID", Key, None),
                    col("Age", Categorical, None),
                    col("Periods", PeriodString, None),
                    col("Deaths_1", Numeric, Some("number")),
                ],
            ),
            60,
        ),
        (
            meta(
                "CRIME01",
                "Registered crime; type of crime, region",
                "Offences registered by police by type of crime and municipality",
                vec![
                    col("ID", Key, None),
                    col("TypeOfCrime", Categorical, None),
                    col("Periods", PeriodString, None),
                    col("RegisteredCrimes_1", Numeric, Some("number")),
                ],
            ),
            48,
        ),
        (
            meta(
                "HOUSE01",
                "Existing own homes; purchase prices",
                "Average purchase price and number of sold dwellings per quarter",
                vec![
                    col("ID", Key, None),
                    col("Periods", PeriodString, None),
                    col("AveragePurchasePrice_1", Numeric, Some("euro")),
                    col("SoldDwellings_2", Numeric, Some("number")),
                ],
            ),
            40,
        ),
        (
            meta(
                "ENERGY01",
                "Energy balance; supply and consumption",
                "Electricity and natural gas supply and final consumption by energy commodity",
                vec![
                    col("ID", Key, None),
                    col("EnergyCommodities", Categorical, None),
                    col("Periods", PeriodString, None),
                    col("FinalConsumption_1", Numeric, Some("PJ")),
                ],
            ),
            36,
        ),
    ]
}

pub fn workspace() -> Workspace {
    let tmp = tempfile::tempdir().unwrap();
    let data_dir = tmp.path().join("data");
    let output_dir = tmp.path().join("output");
    std::fs::create_dir_all(&data_dir).unwrap();
    std::fs::create_dir_all(&output_dir).unwrap();
    let mut tables = Vec::new();
    for (m, n) in catalog() {
        let table = DataTable {
            table: m.table.clone(),
            columns: m.columns.clone(),
            rows: rows(&m.columns, n),
        };
        materialize(&table, &m, &data_dir).unwrap();
        tables.push(m);
    }
    let embedder = HashingProvider::new(512);
    let index = RetrievalIndex::build(&tables, &embedder).unwrap();
    Workspace {
        tmp,
        data_dir,
        output_dir,
        embedder,
        index,
        tables,
    }
}

pub fn call(id: &str, name: &str, args: serde_json::Value) -> ModelTurn {
    ModelTurn::tool_call(id, name, args)
}

pub const BAD_CODE: &str = "import matplotlib.pyplot as plt\nraise KeyError('Year')\n";
pub const GOOD_CODE: &str =
    "import matplotlib.pyplot as plt\nax = df.plot(x='Periods', y='LiveBornChildren_1')\nplt.savefig('plot.png')\n";

/// inspect -> execute(bad) -> execute(fixed) -> read image -> stop.
pub fn repair_scenario(csv_name: &str) -> Vec<ModelTurn> {
    vec![
        call("c1", "read_file_head", json!({"path": format!("./data/{csv_name}"), "n": 3})),
        call("c2", "execute_python_code", json!({"code": BAD_CODE})),
        call("c3", "execute_python_code", json!({"code": GOOD_CODE})),
        call("c4", "read_visualization_image", json!({})),
        ModelTurn::text("The line chart shows live births per month."),
    ]
}

pub fn exists(dir: &Path, name: &str) -> bool {
    dir.join(name).is_file()
}
