#![allow(dead_code)]

use std::path::{Path, PathBuf};

use clap::Parser;
use uaris::PhaseCode;
use uaris_cli::{run, Cli, CliResult, RunReport};

pub struct Workspace {
    pub dir: tempfile::TempDir,
}

impl Workspace {
    pub fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    pub fn write_code(&self, name: &str, code: &PhaseCode) -> PathBuf {
        self.write(name, &serde_json::to_string(code).unwrap())
    }

    pub fn preset(&self, which: &str) -> PathBuf {
        let out = self.path(&format!("{which}.json"));
        uaris_cli_run(&["preset", which, "--out", s(&out)]).unwrap();
        out
    }
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn uaris_cli_run(args: &[&str]) -> CliResult<RunReport> {
    let mut full = vec!["uaris"];
    full.extend_from_slice(args);
    run(Cli::try_parse_from(full).expect("arguments parse"))
}

pub fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}
