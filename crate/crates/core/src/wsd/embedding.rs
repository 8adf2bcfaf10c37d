use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use super::WsdError;

/// Word vectors read from the `vocab_size dimension` text format.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    dimension: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingModel {
    pub fn new(dimension: usize) -> Result<Self, WsdError> {
        if dimension == 0 {
            return Err(WsdError::Embedding {
                line: 1,
                message: "dimension must be positive".into(),
            });
        }
        Ok(EmbeddingModel {
            dimension,
            vectors: HashMap::new(),
        })
    }

    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) -> Result<(), WsdError> {
        if vector.len() != self.dimension {
            return Err(WsdError::DimensionMismatch {
                expected: self.dimension,
                found: vector.len(),
            });
        }
        self.vectors.insert(token.into(), vector);
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, WsdError> {
        let f = File::open(path).map_err(|e| WsdError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(f)
    }

    pub fn parse<R: Read>(reader: R) -> Result<Self, WsdError> {
        let bad = |line: usize, message: String| WsdError::Embedding { line, message };
        let mut lines = BufReader::new(reader).lines();
        let header = lines
            .next()
            .ok_or_else(|| bad(1, "missing header".into()))?
            .map_err(|e| bad(1, e.to_string()))?;
        let mut parts = header.split_whitespace();
        let (Some(n), Some(d), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(bad(
                1,
                format!("expected `vocab_size dimension`, got {header:?}"),
            ));
        };
        let n: usize = n
            .parse()
            .map_err(|_| bad(1, format!("bad vocabulary size {n:?}")))?;
        let d: usize = d
            .parse()
            .map_err(|_| bad(1, format!("bad dimension {d:?}")))?;
        let mut model = Self::new(d)?;
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let line = line.map_err(|e| bad(lineno, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let token = fields.next().unwrap_or_default();
            let vector = fields
                .map(|x| {
                    x.parse::<f64>()
                        .map_err(|_| bad(lineno, format!("bad number {x:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            if vector.len() != d {
                return Err(bad(
                    lineno,
                    format!("{token:?} has {} values, expected {d}", vector.len()),
                ));
            }
            if model.vectors.insert(token.to_string(), vector).is_some() {
                return Err(bad(lineno, format!("duplicate token {token:?}")));
            }
        }
        if model.vectors.len() != n {
            return Err(bad(
                1,
                format!(
                    "header announces {n} vectors, file has {}",
                    model.vectors.len()
                ),
            ));
        }
        Ok(model)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Same model with every vector multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        EmbeddingModel {
            dimension: self.dimension,
            vectors: self
                .vectors
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().map(|x| x * factor).collect()))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_text_format() {
        let m = EmbeddingModel::parse("2 3\nslave 1 0 0\nowner 0 1 0.5\n".as_bytes()).unwrap();
        assert_eq!(m.dimension(), 3);
        assert_eq!(m.get("owner"), Some(&[0.0, 1.0, 0.5][..]));
        assert!(m.get("x").is_none());
    }

    #[test]
    fn rejects_ragged_rows_and_bad_headers() {
        let e = EmbeddingModel::parse("1 3\nslave 1 0\n".as_bytes()).unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        assert!(EmbeddingModel::parse("x\n".as_bytes()).is_err());
        assert!(EmbeddingModel::parse("2 2\na 1 1\n".as_bytes()).is_err());
        assert!(EmbeddingModel::parse("0 0\n".as_bytes()).is_err());
    }
}
