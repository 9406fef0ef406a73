use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Token to fixed-dimension attribute vector (POS, SemCor, AGWE, ...).
#[derive(Debug, Clone)]
pub struct AttributeMap {
    keys: Vec<String>,
    vectors: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
    dim: usize,
}

impl AttributeMap {
    /// `token<TAB>v1,v2,...,vk` per line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut keys = Vec::new();
        let mut vectors = Vec::new();
        let mut index = HashMap::new();
        let mut dim = None;
        for (line, l) in super::data_lines(text) {
            let (token, values) = l.split_once('\t').ok_or_else(|| Error::Parse {
                line,
                msg: "expected token<TAB>values".into(),
            })?;
            let v = values
                .split(',')
                .map(|f| super::parse_f64(f, line, "attribute value"))
                .collect::<Result<Vec<_>>>()?;
            match dim {
                None => dim = Some(v.len()),
                Some(d) if d != v.len() => {
                    return Err(Error::Shape(format!(
                        "line {line}: dimension {} differs from {d}",
                        v.len()
                    )))
                }
                _ => {}
            }
            if index.insert(token.to_string(), keys.len()).is_some() {
                return Err(Error::Parse {
                    line,
                    msg: format!("duplicate token {token:?}"),
                });
            }
            keys.push(token.to_string());
            vectors.push(v);
        }
        let dim = dim.ok_or_else(|| Error::Shape("empty attribute map".into()))?;
        Ok(Self {
            keys,
            vectors,
            index,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index.get(token).map(|&i| self.vectors[i].as_slice())
    }

    /// Stacks the attribute vector of each token, one row per token.
    pub fn lookup_matrix<S: AsRef<str>>(&self, tokens: &[S]) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(tokens.len(), self.dim);
        for (r, t) in tokens.iter().enumerate() {
            let v = self
                .get(t.as_ref())
                .ok_or_else(|| Error::Vocabulary(t.as_ref().to_string()))?;
            for (c, &x) in v.iter().enumerate() {
                m[(r, c)] = x;
            }
        }
        Ok(m)
    }
}

pub fn read_attribute_map(path: impl AsRef<Path>) -> Result<AttributeMap> {
    AttributeMap::parse(&super::read_text(path.as_ref())?)
}
