//! The surrogate behind the external oracle line protocol, for loopback
//! testing of external bindings.

use std::io::{BufRead, Write};

use anyhow::Result;
use ledstripe_core::oracle::{heuristic_face_detected, SurrogateOracle};
use ledstripe_core::ImageBuffer;

fn reply(line: &str, threshold: f64) -> String {
    let mut parts = line.split_whitespace();
    match (parts.next(), parts.next(), parts.next(), parts.next()) {
        (Some("VERIFY"), Some(a), Some(b), None) => {
            match (ImageBuffer::read_png(a), ImageBuffer::read_png(b)) {
                (Ok(a), Ok(b)) => match SurrogateOracle::similarity(&a, &b) {
                    Ok(s) if s >= threshold => format!("ACCEPT {s}"),
                    Ok(s) => format!("REJECT {s}"),
                    Err(e) => format!("ERR {e}"),
                },
                (Err(e), _) | (_, Err(e)) => format!("ERR {e}"),
            }
        }
        (Some("DETECT"), Some(p), None, None) => match ImageBuffer::read_png(p) {
            Ok(img) if heuristic_face_detected(&img) => "FACE".into(),
            Ok(_) => "NOFACE".into(),
            Err(e) => format!("ERR {e}"),
        },
        _ => format!("ERR malformed request `{line}`"),
    }
}

pub fn run(threshold: f64) -> Result<()> {
    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout().lock();
    for line in stdin.lock().lines() {
        let line = line?;
        writeln!(stdout, "{}", reply(line.trim_end(), threshold))?;
        stdout.flush()?;
    }
    Ok(())
}
