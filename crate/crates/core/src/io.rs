//! Tab-separated edge lists with a `#` metadata header.
//!
//! ```text
//! # n=5
//! # seed=7
//! # model=er
//! # mode=naive
//! 0	1
//! 3	4
//! ```

use std::io::{BufRead, Write};

use crate::digraph::Digraph;
use crate::error::{Error, Result};

/// Header values; keys other than `n` are informational.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EdgeListMeta {
    pub n: usize,
    pub seed: Option<u64>,
    pub model: Option<String>,
    pub mode: Option<String>,
}

pub fn write_edge_list<W: Write>(out: &mut W, g: &Digraph, meta: &EdgeListMeta) -> Result<()> {
    writeln!(out, "# n={}", g.n())?;
    if let Some(seed) = meta.seed {
        writeln!(out, "# seed={seed}")?;
    }
    if let Some(model) = &meta.model {
        writeln!(out, "# model={}", model.replace('\n', " "))?;
    }
    if let Some(mode) = &meta.mode {
        writeln!(out, "# mode={mode}")?;
    }
    let mut line = String::new();
    for (i, j) in g.arcs() {
        use std::fmt::Write as _;
        line.clear();
        let _ = writeln!(line, "{i}\t{j}");
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn read_edge_list<R: BufRead>(input: R) -> Result<(Digraph, EdgeListMeta)> {
    let mut meta = EdgeListMeta::default();
    let mut have_n = false;
    let mut arcs = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let parse_err = |message: String| Error::Parse {
            line: lineno,
            message,
        };
        let trimmed = line.trim_end_matches('\r');
        if let Some(rest) = trimmed.strip_prefix('#') {
            let Some((key, value)) = rest.trim().split_once('=') else {
                continue;
            };
            let value = value.trim();
            match key.trim() {
                "n" => {
                    meta.n = value
                        .parse()
                        .map_err(|_| parse_err(format!("invalid vertex count '{value}'")))?;
                    have_n = true;
                }
                "seed" => meta.seed = value.parse().ok(),
                "model" => meta.model = Some(value.to_string()),
                "mode" => meta.mode = Some(value.to_string()),
                _ => {}
            }
            continue;
        }
        if trimmed.trim().is_empty() {
            continue;
        }
        if !have_n {
            return Err(parse_err("arc before the '# n=' header".into()));
        }
        let mut fields = trimmed.split('\t');
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(parse_err(format!("expected 'i<TAB>j', got '{trimmed}'")));
        };
        let parse_id = |s: &str| -> Result<u32> {
            let v: u32 = s
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("invalid vertex id '{s}'")))?;
            if v as usize >= meta.n {
                return Err(parse_err(format!("vertex {v} out of range for n = {}", meta.n)));
            }
            Ok(v)
        };
        let (i, j) = (parse_id(a)?, parse_id(b)?);
        if i == j {
            return Err(parse_err(format!("self-loop at vertex {i}")));
        }
        arcs.push((i, j));
    }
    if !have_n {
        return Err(Error::Parse {
            line: 0,
            message: "missing '# n=' header".into(),
        });
    }
    let g = Digraph::from_arcs(meta.n, &arcs).map_err(|e| Error::Parse {
        line: 0,
        message: e.to_string(),
    })?;
    Ok((g, meta))
}
