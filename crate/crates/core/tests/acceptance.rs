use std::process::{Command, ExitCode};

use middelay::cli::{to_json, EXIT_REFUTED};
use middelay::selfcheck::{self, CriterionResult};

fn binary_refutes_planted_root() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = dir.path().join("planted.json");
    std::fs::write(&input, to_json(&selfcheck::planted_input())).map_err(|e| e.to_string())?;
    let out = Command::new(env!("CARGO_BIN_EXE_middelay"))
        .arg("-o")
        .arg(dir.path().join("out"))
        .arg("certify")
        .arg(&input)
        .output()
        .map_err(|e| e.to_string())?;
    let code = out.status.code();
    let written = dir.path().join("out/certificate.json").exists();
    if code == Some(EXIT_REFUTED) && written {
        Ok(format!("binary exit {EXIT_REFUTED}"))
    } else {
        Err(format!(
            "binary exit {code:?}, certificate written: {written}"
        ))
    }
}

fn main() -> ExitCode {
    let mut results: Vec<CriterionResult> = selfcheck::run_all();
    if let Some(r9) = results.iter_mut().find(|r| r.id == 9) {
        match binary_refutes_planted_root() {
            Ok(s) => r9.detail.push_str(&format!("; {s}")),
            Err(s) => {
                r9.passed = false;
                r9.detail.push_str(&format!("; {s}"));
            }
        }
    }
    print!("{}", selfcheck::table(&results));
    let passed = results.iter().filter(|r| r.passed).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
