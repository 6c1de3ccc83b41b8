use crate::error::{Error, Result};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

/// One prompt: a content description paired with a style tag.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptEntry {
    pub content_id: u64,
    pub content_text: String,
    pub style_id: u32,
    pub style_text: String,
    pub prompt: String,
    /// Generation seeds, one image per seed.
    pub seeds: Vec<u32>,
}

pub fn compose_prompt(content: &str, style: &str) -> String {
    format!("{content}, {style}")
}

/// Pairs every content with `styles_per_content` distinct styles and
/// `seeds_per_prompt` seeds.
pub fn gen_prompt_manifest(
    contents: &[String],
    styles: &[String],
    styles_per_content: usize,
    seeds_per_prompt: usize,
    seed: u64,
) -> Result<Vec<PromptEntry>> {
    if styles_per_content == 0 || styles_per_content > styles.len() {
        return Err(Error::InvalidArgument(format!(
            "styles per content must be in 1..={}, got {styles_per_content}",
            styles.len()
        )));
    }
    if seeds_per_prompt == 0 {
        return Err(Error::InvalidArgument("seeds per prompt must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(contents.len() * styles_per_content);
    for (content_id, content) in contents.iter().enumerate() {
        for s in sample(&mut rng, styles.len(), styles_per_content) {
            let seeds = (0..seeds_per_prompt).map(|_| rng.random()).collect();
            out.push(PromptEntry {
                content_id: content_id as u64,
                content_text: content.clone(),
                style_id: s as u32,
                style_text: styles[s].clone(),
                prompt: compose_prompt(content, &styles[s]),
                seeds,
            });
        }
    }
    Ok(out)
}

pub fn generation_spec_count(entries: &[PromptEntry]) -> usize {
    entries.iter().map(|e| e.seeds.len()).sum()
}

pub fn write_manifest<W: Write>(entries: &[PromptEntry], mut w: W) -> Result<()> {
    for e in entries {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_manifest<R: BufRead>(r: R) -> Result<Vec<PromptEntry>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: PromptEntry = serde_json::from_str(&line)
            .map_err(|err| Error::Config(format!("manifest line {}: {err}", i + 1)))?;
        out.push(e);
    }
    Ok(out)
}

/// Reads one content description per non-empty line.
pub fn read_lines<R: BufRead>(r: R) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        let t = line.trim();
        if !t.is_empty() {
            out.push(t.to_string());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn names(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix} {i}")).collect()
    }

    #[test]
    fn counts_and_distinct_styles() {
        let m = gen_prompt_manifest(&names("a cat", 7), &names("style", 27), 5, 3, 1).unwrap();
        assert_eq!(m.len(), 35);
        assert_eq!(generation_spec_count(&m), 105);
        for chunk in m.chunks(5) {
            let s: HashSet<_> = chunk.iter().map(|e| e.style_id).collect();
            assert_eq!(s.len(), 5);
            assert!(chunk.iter().all(|e| e.content_id == chunk[0].content_id));
        }
        assert_eq!(m[0].prompt, format!("{}, {}", m[0].content_text, m[0].style_text));
    }

    #[test]
    fn too_many_styles_rejected() {
        let err = gen_prompt_manifest(&names("c", 2), &names("s", 3), 4, 1, 0).unwrap_err();
        assert_eq!(err.kind(), "usage");
    }

    #[test]
    fn jsonl_round_trip() {
        let m = gen_prompt_manifest(&names("c", 3), &names("s", 4), 2, 2, 9).unwrap();
        let mut buf = Vec::new();
        write_manifest(&m, &mut buf).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 6);
        assert_eq!(read_manifest(&buf[..]).unwrap(), m);
    }
}
