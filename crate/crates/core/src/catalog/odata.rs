//! OData v3 client for the statistics catalog.
//!
//! Resources live under `<endpoint>/ODataApi/OData/<id>/`: `TableInfos` carries
//! the title and descriptions, `DataProperties` the column list and
//! `TypedDataSet` the rows (paged with `$top`/`$skip`). Every successful
//! response can be cached on disk keyed by endpoint, table and resource, so a
//! populated cache replays fetches without network access.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde_json::Value;

use super::{refine_kinds, CatalogError, Cell, ColumnKind, ColumnSpec, DataTable, TableMetadata, TableRef};
use crate::util::{atomic_write, sanitize_component, sha256_hex};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: Vec<u8>,
}

#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct TransportError {
    pub message: String,
    pub retryable: bool,
}

/// Minimal GET abstraction so fetches can run against recorded fixtures.
pub trait Transport: Send + Sync {
    fn get(&self, url: &str) -> Result<HttpResponse, TransportError>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        UreqTransport { agent }
    }
}

impl Default for UreqTransport {
    fn default() -> Self {
        UreqTransport::new(Duration::from_secs(60))
    }
}

impl Transport for UreqTransport {
    fn get(&self, url: &str) -> Result<HttpResponse, TransportError> {
        let mut resp = self
            .agent
            .get(url)
            .header("Accept", "application/json")
            .call()
            .map_err(|e| TransportError {
                message: e.to_string(),
                retryable: true,
            })?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .with_config()
            .limit(512 * 1024 * 1024)
            .read_to_vec()
            .map_err(|e| TransportError {
                message: e.to_string(),
                retryable: true,
            })?;
        Ok(HttpResponse { status, body })
    }
}

/// In-memory recorded responses. Unknown URLs answer 404.
#[derive(Default, Clone)]
pub struct FixtureTransport {
    responses: Arc<Mutex<BTreeMap<String, Result<HttpResponse, String>>>>,
    requests: Arc<AtomicUsize>,
}

impl FixtureTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&self, url: impl Into<String>, status: u16, body: impl Into<Vec<u8>>) {
        self.responses.lock().unwrap().insert(
            url.into(),
            Ok(HttpResponse {
                status,
                body: body.into(),
            }),
        );
    }

    pub fn insert_json(&self, url: impl Into<String>, body: &Value) {
        self.insert(url, 200, serde_json::to_vec(body).expect("json"));
    }

    /// Makes `url` fail at the transport level (connection reset and the like).
    pub fn fail(&self, url: impl Into<String>, message: impl Into<String>) {
        self.responses
            .lock()
            .unwrap()
            .insert(url.into(), Err(message.into()));
    }

    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

impl Transport for FixtureTransport {
    fn get(&self, url: &str) -> Result<HttpResponse, TransportError> {
        self.requests.fetch_add(1, Ordering::SeqCst);
        match self.responses.lock().unwrap().get(url) {
            Some(Ok(resp)) => Ok(resp.clone()),
            Some(Err(msg)) => Err(TransportError {
                message: msg.clone(),
                retryable: true,
            }),
            None => Ok(HttpResponse {
                status: 404,
                body: b"{\"odata.error\":{\"message\":{\"value\":\"Resource not found\"}}}".to_vec(),
            }),
        }
    }
}

/// Serves `file://<dir>` endpoints from a directory laid out like the API:
/// `<dir>/ODataApi/OData/<id>/<resource>`, query string included in the
/// file name. Missing files answer 404.
#[derive(Debug, Default, Clone, Copy)]
pub struct DirTransport;

impl Transport for DirTransport {
    fn get(&self, url: &str) -> Result<HttpResponse, TransportError> {
        let path = url.strip_prefix("file://").ok_or_else(|| TransportError {
            message: format!("not a file:// url: {url}"),
            retryable: false,
        })?;
        match std::fs::read(path) {
            Ok(body) => Ok(HttpResponse { status: 200, body }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(HttpResponse {
                status: 404,
                body: Vec::new(),
            }),
            Err(e) => Err(TransportError {
                message: e.to_string(),
                retryable: false,
            }),
        }
    }
}

pub struct ODataClient {
    endpoint: String,
    transport: Box<dyn Transport>,
    cache_dir: Option<PathBuf>,
}

impl ODataClient {
    pub fn new(endpoint: impl Into<String>, transport: impl Transport + 'static) -> Self {
        let endpoint = endpoint.into().trim_end_matches('/').to_string();
        ODataClient {
            endpoint,
            transport: Box::new(transport),
            cache_dir: None,
        }
    }

    pub fn with_cache(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache_dir = Some(dir.into());
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn resource_url(&self, table: &TableRef, resource: &str) -> String {
        format!("{}/ODataApi/OData/{}/{}", self.endpoint, table, resource)
    }

    fn cache_path(&self, table: &TableRef, resource: &str) -> Option<PathBuf> {
        let dir = self.cache_dir.as_ref()?;
        let endpoint_key = &sha256_hex(self.endpoint.as_bytes())[..16];
        Some(
            dir.join(endpoint_key)
                .join(table.as_str())
                .join(format!("{}.json", sanitize_component(resource))),
        )
    }

    fn get_resource(&self, table: &TableRef, resource: &str) -> Result<Vec<u8>, CatalogError> {
        let cache_path = self.cache_path(table, resource);
        if let Some(path) = &cache_path {
            if let Ok(bytes) = std::fs::read(path) {
                tracing::debug!(table = %table, resource, "cache hit");
                return Ok(bytes);
            }
        }
        let url = self.resource_url(table, resource);
        let resp = self
            .transport
            .get(&url)
            .map_err(|e| CatalogError::Transport {
                url: url.clone(),
                message: e.message,
                retryable: e.retryable,
            })?;
        match resp.status {
            200..=299 => {}
            404 => return Err(CatalogError::NotFound(table.to_string())),
            status => {
                return Err(CatalogError::Transport {
                    url,
                    message: format!("HTTP status {status}"),
                    retryable: status >= 500 || status == 429,
                })
            }
        }
        if let Some(path) = cache_path {
            write_cache(&path, &resp.body)?;
        }
        Ok(resp.body)
    }

    pub fn fetch_metadata(&self, table: &TableRef) -> Result<TableMetadata, CatalogError> {
        let infos = self.get_resource(table, "TableInfos")?;
        let infos = parse_envelope(&infos, "TableInfos")?;
        let info = infos.first().ok_or_else(|| CatalogError::NotFound(table.to_string()))?;
        let title = str_field(info, "Title").unwrap_or_default();
        let description = ["ShortDescription", "Summary", "Description"]
            .iter()
            .filter_map(|k| str_field(info, k))
            .find(|s| !s.trim().is_empty())
            .ok_or_else(|| CatalogError::Parse {
                context: format!("{table}/TableInfos"),
                message: "no non-empty description field".into(),
                fragment: fragment_of(&info.to_string()),
            })?;

        let props = self.get_resource(table, "DataProperties")?;
        let props = parse_envelope(&props, "DataProperties")?;
        let mut columns = vec![ColumnSpec {
            name: "ID".into(),
            kind: ColumnKind::Key,
            unit: None,
        }];
        for prop in &props {
            let kind = match str_field(prop, "Type").as_deref() {
                Some("TopicGroup") => continue,
                Some("TimeDimension") => ColumnKind::PeriodString,
                Some("Topic") => ColumnKind::Numeric,
                _ => ColumnKind::Categorical,
            };
            let Some(key) = str_field(prop, "Key").filter(|k| !k.is_empty()) else {
                continue;
            };
            let unit = str_field(prop, "Unit").filter(|u| !u.trim().is_empty());
            columns.push(ColumnSpec {
                name: key,
                kind,
                unit,
            });
        }
        super::check_unique_columns(&columns)?;

        Ok(TableMetadata {
            table: table.clone(),
            title,
            description,
            columns,
            source_url: self.resource_url(table, "TypedDataSet"),
        })
    }

    /// Fetches every row page by page, in server order.
    pub fn fetch_table(
        &self,
        meta: &TableMetadata,
        page_size: usize,
    ) -> Result<DataTable, CatalogError> {
        if page_size == 0 {
            return Err(CatalogError::InvalidPageSize);
        }
        let table = &meta.table;
        let mut columns = meta.columns.clone();
        let mut rows: Vec<Vec<Cell>> = Vec::new();
        let mut pages = 0usize;
        loop {
            let resource = format!("TypedDataSet?$top={page_size}&$skip={}", pages * page_size);
            let page = self
                .get_resource(table, &resource)
                .and_then(|bytes| parse_envelope(&bytes, &resource))
                .and_then(|objs| {
                    if columns.is_empty() {
                        if let Some(first) = objs.first().and_then(Value::as_object) {
                            columns = first
                                .keys()
                                .map(|k| ColumnSpec {
                                    name: k.clone(),
                                    kind: ColumnKind::Categorical,
                                    unit: None,
                                })
                                .collect();
                        }
                    }
                    objs.iter()
                        .map(|o| row_from_object(o, &columns, &resource))
                        .collect::<Result<Vec<_>, _>>()
                });
            let page = match page {
                Ok(p) => p,
                Err(e) if pages == 0 => return Err(e),
                Err(e) => {
                    return Err(CatalogError::PartialFetch {
                        table: table.to_string(),
                        pages_completed: pages,
                        source: Box::new(e),
                    })
                }
            };
            pages += 1;
            let n = page.len();
            rows.extend(page);
            // a server that ignores $top returns everything in one go
            if n != page_size {
                break;
            }
        }
        let mut out = DataTable {
            table: table.clone(),
            columns,
            rows,
        };
        refine_kinds(&mut out);
        out.validate()?;
        Ok(out)
    }
}

fn write_cache(path: &Path, body: &[u8]) -> Result<(), CatalogError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CatalogError::io(parent, e))?;
    }
    atomic_write(path, body).map_err(|e| CatalogError::io(path, e))
}

fn fragment_of(raw: &str) -> String {
    raw.chars().take(160).collect()
}

fn parse_envelope(bytes: &[u8], context: &str) -> Result<Vec<Value>, CatalogError> {
    let parse_err = |message: String| CatalogError::Parse {
        context: context.to_string(),
        message,
        fragment: fragment_of(&String::from_utf8_lossy(bytes)),
    };
    let doc: Value = serde_json::from_slice(bytes).map_err(|e| parse_err(e.to_string()))?;
    match doc.get("value") {
        Some(Value::Array(items)) => Ok(items.clone()),
        _ => Err(parse_err("response envelope lacks a \"value\" array".into())),
    }
}

fn str_field(obj: &Value, key: &str) -> Option<String> {
    obj.get(key).and_then(Value::as_str).map(str::to_string)
}

fn row_from_object(obj: &Value, columns: &[ColumnSpec], context: &str) -> Result<Vec<Cell>, CatalogError> {
    let parse_err = |message: String| CatalogError::Parse {
        context: context.to_string(),
        message,
        fragment: fragment_of(&obj.to_string()),
    };
    let map = obj
        .as_object()
        .ok_or_else(|| parse_err("row is not an object".into()))?;
    columns
        .iter()
        .map(|col| match map.get(&col.name) {
            None => Err(parse_err(format!("row lacks column {:?}", col.name))),
            Some(Value::Null) => Ok(None),
            Some(Value::String(s)) if s.is_empty() => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(Value::Number(n)) => Ok(Some(n.to_string())),
            Some(Value::Bool(b)) => Ok(Some(b.to_string())),
            Some(other) => Err(parse_err(format!(
                "column {:?} holds a nested value {other}",
                col.name
            ))),
        })
        .collect()
}
