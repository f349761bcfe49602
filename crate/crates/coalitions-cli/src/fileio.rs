//! File helpers shared by the subcommands: graph and cover round-trips plus
//! path-tagged read/write wrappers.

use std::fs;
use std::path::{Path, PathBuf};

use coalitions::error::{Error, Result};
use coalitions::graph::Graph;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// Writes, creating parent directories as needed.
pub fn write_string(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(io_err(path))?;
        }
    }
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_graph(path: &Path) -> Result<Graph> {
    Graph::from_edge_list_text(&read_to_string(path)?)
}

/// Cover text: one community per line, whitespace-separated node labels,
/// `#` comments. Communities are returned in file order, labels unresolved.
pub fn parse_cover(text: &str) -> Result<Vec<Vec<u64>>> {
    let mut cover = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut community = Vec::new();
        for tok in line.split_whitespace() {
            let label: u64 = tok.parse().map_err(|_| Error::Parse {
                line: idx + 1,
                msg: format!("invalid node label {:?}", tok),
            })?;
            community.push(label);
        }
        cover.push(community);
    }
    if cover.is_empty() {
        return Err(Error::Parse { line: 1, msg: "cover file declares no communities".into() });
    }
    Ok(cover)
}

pub fn cover_text(cover: &[Vec<u64>]) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    for c in cover {
        let line: Vec<String> = c.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

/// One label per line, `#` comments; an empty file is a valid empty list.
pub fn parse_label_list(text: &str) -> Result<Vec<u64>> {
    let mut labels = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        labels.push(line.parse().map_err(|_| Error::Parse {
            line: idx + 1,
            msg: format!("invalid node label {:?}", line),
        })?);
    }
    Ok(labels)
}

/// `prefix` -> `prefix.suffix`, keeping any existing extension intact.
pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}
