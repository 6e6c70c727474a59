use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use serde::Serialize;

use super::{
    is_png_file, CapabilityReport, CodeExecutor, ExecutionRequest, ExecutionResult, ExitStatus,
    SandboxError,
};

pub const PROTOCOL_VERSION: u32 = 1;
/// Grace period on top of the request timeout before the harness is killed.
const KILL_GRACE: Duration = Duration::from_secs(5);
const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(30);

/// Client for the external harness. One fresh process per request; request
/// and response travel as JSON files.
#[derive(Debug, Clone)]
pub struct HarnessClient {
    command: Vec<String>,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    protocol: u32,
    code: &'a str,
    dataset_csv: PathBuf,
    target_plot: PathBuf,
    timeout_s: f64,
    allowed_write_dir: PathBuf,
}

enum Waited {
    Exited(std::process::ExitStatus),
    Killed,
}

fn wait_with_deadline(child: &mut Child, limit: Duration) -> std::io::Result<Waited> {
    let deadline = Instant::now() + limit;
    loop {
        if let Some(status) = child.try_wait()? {
            return Ok(Waited::Exited(status));
        }
        if Instant::now() >= deadline {
            let _ = child.kill();
            let _ = child.wait();
            return Ok(Waited::Killed);
        }
        std::thread::sleep(Duration::from_millis(10));
    }
}

fn read_lossy(path: &Path) -> String {
    std::fs::read(path)
        .map(|b| String::from_utf8_lossy(&b).into_owned())
        .unwrap_or_default()
}

impl HarnessClient {
    /// `command` is the program plus leading arguments, e.g.
    /// `["python3", "-m", "statviz_harness"]`.
    pub fn new(command: Vec<String>) -> Self {
        HarnessClient { command }
    }

    pub fn command(&self) -> &[String] {
        &self.command
    }

    fn base_command(&self) -> Result<Command, String> {
        let (program, args) = self
            .command
            .split_first()
            .ok_or_else(|| "empty harness command".to_string())?;
        let mut cmd = Command::new(program);
        cmd.args(args);
        Ok(cmd)
    }

    fn run(&self, request: &ExecutionRequest) -> Result<ExecutionResult, String> {
        let scratch = tempfile::tempdir().map_err(|e| format!("scratch dir: {e}"))?;
        let req_path = scratch.path().join("request.json");
        let resp_path = scratch.path().join("response.json");
        let out_path = scratch.path().join("harness.stdout");
        let err_path = scratch.path().join("harness.stderr");

        let abs = |p: &Path| std::path::absolute(p).map_err(|e| format!("{}: {e}", p.display()));
        let wire = WireRequest {
            protocol: PROTOCOL_VERSION,
            code: &request.code,
            dataset_csv: abs(&request.dataset_csv)?,
            target_plot: abs(&request.target_plot)?,
            timeout_s: request.timeout_s,
            allowed_write_dir: abs(&request.allowed_write_dir)?,
        };
        std::fs::write(&req_path, serde_json::to_vec(&wire).expect("request serializes"))
            .map_err(|e| format!("write request: {e}"))?;

        let mut cmd = self.base_command()?;
        cmd.arg("--request")
            .arg(&req_path)
            .arg("--response")
            .arg(&resp_path)
            .current_dir(&wire.allowed_write_dir)
            .stdin(Stdio::null())
            .stdout(File::create(&out_path).map_err(|e| e.to_string())?)
            .stderr(File::create(&err_path).map_err(|e| e.to_string())?);

        let started = Instant::now();
        let mut child = cmd
            .spawn()
            .map_err(|e| format!("cannot start harness {:?}: {e}", self.command))?;
        let limit = Duration::from_secs_f64(request.timeout_s) + KILL_GRACE;
        let waited = wait_with_deadline(&mut child, limit).map_err(|e| e.to_string())?;
        let duration_s = started.elapsed().as_secs_f64();

        if let Waited::Killed = waited {
            return Ok(ExecutionResult {
                exit_status: ExitStatus::Timeout,
                stdout: read_lossy(&out_path),
                stderr: format!(
                    "{}\nkilled after {:.1}s",
                    read_lossy(&err_path),
                    duration_s
                ),
                plot_written: is_png_file(&request.target_plot),
                duration_s,
            });
        }
        let mut result: ExecutionResult = match std::fs::read(&resp_path) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map_err(|e| format!("malformed harness response: {e}"))?,
            Err(_) => {
                return Err(format!(
                    "harness wrote no response ({waited_status}); stderr: {}",
                    read_lossy(&err_path).trim(),
                    waited_status = match waited {
                        Waited::Exited(s) => s.to_string(),
                        Waited::Killed => "killed".into(),
                    }
                ))
            }
        };
        // trust the file system over the harness' own claim
        result.plot_written = is_png_file(&request.target_plot);
        if result.duration_s <= 0.0 {
            result.duration_s = duration_s;
        }
        Ok(result)
    }
}

impl CodeExecutor for HarnessClient {
    fn name(&self) -> &str {
        "harness"
    }

    fn handshake(&self) -> Result<CapabilityReport, SandboxError> {
        let scratch = tempfile::tempdir().map_err(|e| SandboxError::Unavailable(e.to_string()))?;
        let out_path = scratch.path().join("handshake.stdout");
        let err_path = scratch.path().join("handshake.stderr");
        let mut cmd = self.base_command().map_err(SandboxError::Unavailable)?;
        let open = |p: &Path| File::create(p).map_err(|e| SandboxError::Unavailable(e.to_string()));
        cmd.arg("--handshake")
            .stdin(Stdio::null())
            .stdout(open(&out_path)?)
            .stderr(open(&err_path)?);
        let mut child = cmd.spawn().map_err(|e| {
            SandboxError::Unavailable(format!("cannot start {:?}: {e}", self.command))
        })?;
        match wait_with_deadline(&mut child, HANDSHAKE_TIMEOUT)
            .map_err(|e| SandboxError::Unavailable(e.to_string()))?
        {
            Waited::Killed => return Err(SandboxError::Unavailable("handshake timed out".into())),
            Waited::Exited(s) if !s.success() => {
                return Err(SandboxError::Unavailable(format!(
                    "handshake exited with {s}: {}",
                    read_lossy(&err_path).trim()
                )))
            }
            Waited::Exited(_) => {}
        }
        let report: CapabilityReport = serde_json::from_str(&read_lossy(&out_path))
            .map_err(|e| SandboxError::Unavailable(format!("unreadable handshake report: {e}")))?;
        let missing = report.missing();
        if !missing.is_empty() {
            return Err(SandboxError::MissingLibraries(missing));
        }
        Ok(report)
    }

    fn execute(&self, request: &ExecutionRequest) -> ExecutionResult {
        if let Err(e) = request.validate() {
            return ExecutionResult::setup_error(e.to_string());
        }
        if !request.dataset_csv.is_file() {
            return ExecutionResult::setup_error(format!(
                "dataset {} does not exist",
                request.dataset_csv.display()
            ));
        }
        self.run(request).unwrap_or_else(ExecutionResult::setup_error)
    }
}
