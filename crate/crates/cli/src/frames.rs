use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bitplanes::{load_image, Image, WarpParams};

const IMAGE_EXTENSIONS: [&str; 3] = ["pgm", "png", "pnm"];

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Image files of `dir` in lexicographic order.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot read directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image(p))
        .collect();
    paths.sort();
    Ok(paths)
}

/// Expands the first `%d` / `%0Nd` conversion of `pattern` with `index`.
pub fn format_pattern(pattern: &str, index: usize) -> Result<String> {
    let start = pattern.find('%').context("frame pattern has no % conversion")?;
    let rest = &pattern[start + 1..];
    let end = rest.find('d').context("frame pattern conversion must end in 'd'")?;
    let spec = &rest[..end];
    let width = if spec.is_empty() {
        0
    } else if spec.starts_with('0') && spec.chars().all(|c| c.is_ascii_digit()) {
        spec.parse::<usize>()?
    } else {
        bail!("unsupported conversion '%{spec}d' in frame pattern");
    };
    Ok(format!("{}{index:0width$}{}", &pattern[..start], &rest[end + 1..]))
}

/// Frame paths for a directory or a printf-style pattern. Pattern indices
/// start at 0 (or 1 when frame 0 is missing) and stop at the first gap.
pub fn resolve_frames(input: &str) -> Result<Vec<PathBuf>> {
    let path = Path::new(input);
    if path.is_dir() {
        return list_images(path);
    }
    if !input.contains('%') {
        bail!("{input} is neither a directory nor a frame pattern");
    }
    let first = if Path::new(&format_pattern(input, 0)?).is_file() {
        0
    } else {
        1
    };
    let mut out = Vec::new();
    loop {
        let p = PathBuf::from(format_pattern(input, first + out.len())?);
        if !p.is_file() {
            break;
        }
        out.push(p);
    }
    Ok(out)
}

pub fn load_all(paths: &[PathBuf]) -> Result<Vec<Image>> {
    paths.iter().map(|p| load_image(p).map_err(Into::into)).collect()
}

/// Warps from a JSON array or from one JSON object per line.
pub fn read_warps(path: &Path) -> Result<Vec<WarpParams>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(&text).with_context(|| format!("bad ground truth in {}", path.display()));
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}: bad warp", path.display(), i + 1)))
        .collect()
}
