// SPDX-License-Identifier: Apache-2.0
//! Subprocess execution with a wall-clock limit.

use std::io::{self, Read, Write};
use std::os::unix::process::CommandExt;
use std::process::{Command, ExitStatus, Stdio};
use std::thread;
use std::time::{Duration, Instant};

#[derive(Debug)]
pub struct ExecOutput {
    /// `None` when the process was killed on timeout.
    pub status: Option<ExitStatus>,
    pub stdout: String,
    pub stderr: String,
    pub timed_out: bool,
    pub elapsed: Duration,
}

impl ExecOutput {
    pub fn success(&self) -> bool {
        self.status.is_some_and(|s| s.success())
    }

    /// Both streams, stdout first.
    pub fn combined(&self) -> String {
        let mut s = self.stdout.clone();
        if !s.is_empty() && !s.ends_with('\n') && !self.stderr.is_empty() {
            s.push('\n');
        }
        s.push_str(&self.stderr);
        s
    }
}

fn drain<R: Read + Send + 'static>(r: Option<R>) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut r) = r {
            let _ = r.read_to_end(&mut buf);
        }
        buf
    })
}

/// Runs `cmd` in its own process group, feeding `stdin`, and kills the whole
/// group once `timeout` elapses.
pub fn run_with_timeout(mut cmd: Command, stdin: Option<&[u8]>, timeout: Duration) -> io::Result<ExecOutput> {
    cmd.stdin(if stdin.is_some() { Stdio::piped() } else { Stdio::null() })
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0);
    let start = Instant::now();
    let mut child = cmd.spawn()?;
    let pid = child.id() as libc::pid_t;
    let out = drain(child.stdout.take());
    let err = drain(child.stderr.take());
    let feeder = match (stdin, child.stdin.take()) {
        (Some(data), Some(mut pipe)) => {
            let data = data.to_vec();
            // a child that exits without reading gives EPIPE; ignore it
            Some(thread::spawn(move || {
                let _ = pipe.write_all(&data);
            }))
        }
        _ => None,
    };
    let mut timed_out = false;
    let status = loop {
        if let Some(s) = child.try_wait()? {
            break Some(s);
        }
        if start.elapsed() >= timeout {
            // SAFETY: plain syscall on a process group we created
            unsafe {
                libc::killpg(pid, libc::SIGKILL);
            }
            let _ = child.kill();
            let _ = child.wait();
            timed_out = true;
            break None;
        }
        thread::sleep(Duration::from_millis(5));
    };
    let elapsed = start.elapsed();
    if let Some(f) = feeder {
        let _ = f.join();
    }
    // grandchildren holding the pipes are gone with the group
    let stdout = String::from_utf8_lossy(&out.join().unwrap_or_default()).into_owned();
    let stderr = String::from_utf8_lossy(&err.join().unwrap_or_default()).into_owned();
    Ok(ExecOutput {
        status,
        stdout,
        stderr,
        timed_out,
        elapsed,
    })
}

/// `run_with_timeout` through `sh -c`.
pub fn run_shell(script: &str, cwd: &std::path::Path, timeout: Duration) -> io::Result<ExecOutput> {
    let mut cmd = Command::new("sh");
    cmd.arg("-c").arg(script).current_dir(cwd);
    run_with_timeout(cmd, None, timeout)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn captures_output_and_status() {
        let o = run_shell("echo hi; echo err >&2; exit 3", std::path::Path::new("."), Duration::from_secs(5)).unwrap();
        assert_eq!(o.stdout, "hi\n");
        assert_eq!(o.stderr, "err\n");
        assert_eq!(o.status.unwrap().code(), Some(3));
        assert!(!o.timed_out);
    }

    #[test]
    fn feeds_stdin() {
        let o = run_with_timeout(Command::new("cat"), Some(b"abc"), Duration::from_secs(5)).unwrap();
        assert_eq!(o.stdout, "abc");
        assert!(o.success());
    }

    #[test]
    fn kills_the_group_on_timeout() {
        // the background sleep would hold stdout open if it survived
        let o = run_shell("sleep 30 & sleep 30", std::path::Path::new("."), Duration::from_millis(200)).unwrap();
        assert!(o.timed_out);
        assert!(o.status.is_none());
        assert!(o.elapsed < Duration::from_secs(5));
    }
}
