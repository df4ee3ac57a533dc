use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};
use crate::forms::Form;
use crate::jsr::{ContractionFigure, MatrixFamily};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Parse {
        location: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Parses JSON, reporting the line and column of syntax errors and the
/// file name of semantic ones.
fn parse_json<T, U>(path: &Path, convert: impl FnOnce(T) -> Result<U>) -> Result<U>
where
    T: DeserializeOwned,
{
    let text = read(path)?;
    let raw: T = serde_json::from_str(&text).map_err(|e| Error::Parse {
        location: format!("{}:{}:{}", path.display(), e.line(), e.column()),
        message: e.to_string(),
    })?;
    convert(raw).map_err(|e| Error::Parse {
        location: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn read_form(path: &Path) -> Result<Form> {
    parse_json(path, |f: Form| Ok(f))
}

pub fn read_family(path: &Path) -> Result<MatrixFamily> {
    parse_json(path, |f: MatrixFamily| Ok(f))
}

/// A JSON array of vertex coordinate arrays.
pub fn read_vertices(path: &Path) -> Result<Vec<Vec<f64>>> {
    parse_json(path, |v: Vec<Vec<f64>>| {
        if v.is_empty() {
            return Err(Error::InvalidInput("no vertices".into()));
        }
        Ok(v)
    })
}

/// Comma-separated points, one per line, target value in the last column.
pub fn read_samples(path: &Path) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let text = read(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut points = Vec::new();
    let mut values = Vec::new();
    let mut width = None;
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            location: format!(
                "{}:{}",
                path.display(),
                e.position().map_or(0, |p| p.line())
            ),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let at = |field: usize| format!("{}:{line}:field {field}", path.display());
        let nums = rec
            .iter()
            .enumerate()
            .map(|(k, s)| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        location: at(k + 1),
                        message: format!("not a finite number: {s:?}"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        if nums.len() < 2 {
            return Err(Error::Parse {
                location: at(nums.len() + 1),
                message: "need at least one coordinate and a target value".into(),
            });
        }
        if *width.get_or_insert(nums.len()) != nums.len() {
            return Err(Error::Parse {
                location: at(nums.len()),
                message: format!("expected {} fields", width.unwrap_or(0)),
            });
        }
        let (x, v) = nums.split_at(nums.len() - 1);
        if v[0] < 0.0 {
            return Err(Error::Parse {
                location: at(nums.len()),
                message: "target values must be nonnegative".into(),
            });
        }
        points.push(x.to_vec());
        values.push(v[0]);
    }
    if points.is_empty() {
        return Err(Error::Parse {
            location: path.display().to_string(),
            message: "no samples".into(),
        });
    }
    Ok((points, values))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    Ok(fs::write(path, text)?)
}

pub fn write_points(path: &Path, points: &[[f64; 2]]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    w.write_record(["x", "y"]).map_err(csv_io)?;
    for p in points {
        w.write_record([p[0].to_string(), p[1].to_string()]).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Rows `set,x,y` with `set` = `level` or `A<i>`.
pub fn write_figure(path: &Path, fig: &ContractionFigure) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    w.write_record(["set", "x", "y"]).map_err(csv_io)?;
    let sets = std::iter::once(("level".to_string(), &fig.level)).chain(
        fig.images
            .iter()
            .enumerate()
            .map(|(i, pts)| (format!("A{}", i + 1), pts)),
    );
    for (name, pts) in sets {
        for p in pts {
            w.write_record([name.clone(), p[0].to_string(), p[1].to_string()])
                .map_err(csv_io)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_parse_with_positions() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        fs::write(&p, "# x, y, value\n1, 0, 1\n0,1,1\n").unwrap();
        let (pts, vals) = read_samples(&p).unwrap();
        assert_eq!(pts, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(vals, vec![1.0, 1.0]);
        fs::write(&p, "1,0,1\n0,abc,1\n").unwrap();
        let Err(Error::Parse { location, .. }) = read_samples(&p) else {
            panic!("expected a parse error");
        };
        assert!(location.ends_with(":2:field 2"), "{location}");
    }

    #[test]
    fn json_errors_carry_line_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.json");
        fs::write(&p, "{\n  \"n_vars\": 2,\n  \"degree\": oops\n}").unwrap();
        let Err(Error::Parse { location, .. }) = read_form(&p) else {
            panic!("expected a parse error");
        };
        assert!(location.ends_with(":3:13"), "{location}");
        fs::write(&p, r#"{"n_vars": 2, "degree": 2, "terms": [{"exponents": [1, 0], "coeff": 1}]}"#)
            .unwrap();
        assert!(matches!(read_form(&p), Err(Error::Parse { .. })));
    }
}
