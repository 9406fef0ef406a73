use std::path::{Path, PathBuf};

use crate::{Error, Result};

/// One row of the acoustic word discrimination pair manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct AwdPairRow {
    pub word_a: String,
    pub utt_a: String,
    pub start_a: f64,
    pub end_a: f64,
    pub word_b: String,
    pub utt_b: String,
    pub start_b: f64,
    pub end_b: f64,
}

impl AwdPairRow {
    pub fn same_word(&self) -> bool {
        self.word_a == self.word_b
    }
}

pub fn parse_awd_pairs(text: &str) -> Result<Vec<AwdPairRow>> {
    let mut out = Vec::new();
    for (line, l) in super::data_lines(text) {
        let f: Vec<&str> = l.split('\t').collect();
        if f.len() != 8 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 8 fields, got {}", f.len()),
            });
        }
        let row = AwdPairRow {
            word_a: f[0].to_string(),
            utt_a: f[1].to_string(),
            start_a: super::parse_f64(f[2], line, "start_a")?,
            end_a: super::parse_f64(f[3], line, "end_a")?,
            word_b: f[4].to_string(),
            utt_b: f[5].to_string(),
            start_b: super::parse_f64(f[6], line, "start_b")?,
            end_b: super::parse_f64(f[7], line, "end_b")?,
        };
        if !(row.start_a < row.end_a && row.start_b < row.end_b) {
            return Err(Error::Range(format!("line {line}: empty span")));
        }
        out.push(row);
    }
    Ok(out)
}

pub fn read_awd_pairs(path: impl AsRef<Path>) -> Result<Vec<AwdPairRow>> {
    parse_awd_pairs(&super::read_text(path.as_ref())?)
}

/// One speaker combination of a spoken STS pair.
#[derive(Debug, Clone, PartialEq)]
pub struct StsManifestRow {
    pub pair_id: String,
    pub human_score: f64,
    pub feat_a: PathBuf,
    pub feat_b: PathBuf,
}

/// Relative feature paths resolve against `base`.
pub fn parse_sts_manifest(text: &str, base: &Path) -> Result<Vec<StsManifestRow>> {
    let mut out = Vec::new();
    for (line, l) in super::data_lines(text) {
        let f: Vec<&str> = l.split('\t').collect();
        if f.len() != 4 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 4 fields, got {}", f.len()),
            });
        }
        let human_score = super::parse_f64(f[1], line, "human_score")?;
        if !(0.0..=5.0).contains(&human_score) {
            return Err(Error::Range(format!(
                "line {line}: human score {human_score} outside [0,5]"
            )));
        }
        out.push(StsManifestRow {
            pair_id: f[0].to_string(),
            human_score,
            feat_a: base.join(f[2]),
            feat_b: base.join(f[3]),
        });
    }
    Ok(out)
}

pub fn read_sts_manifest(path: impl AsRef<Path>) -> Result<Vec<StsManifestRow>> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new("."));
    parse_sts_manifest(&super::read_text(path)?, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn awd_rows() {
        let rows =
            parse_awd_pairs("cat\tu1\t0.1\t0.7\tcat\tu2\t1.0\t1.6\ncat\tu1\t0.1\t0.7\tdog\tu3\t0\t0.9\n")
                .unwrap();
        assert!(rows[0].same_word());
        assert!(!rows[1].same_word());
    }

    #[test]
    fn sts_rows() {
        let rows = parse_sts_manifest("p1\t3.5\ta.rpfm\tb.rpfm\n", Path::new("/d")).unwrap();
        assert_eq!(rows[0].feat_a, PathBuf::from("/d/a.rpfm"));
        assert!(parse_sts_manifest("p1\t6\ta\tb\n", Path::new(".")).is_err());
    }
}
