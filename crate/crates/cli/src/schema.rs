//! JSON model files.
//!
//! A matrix function is `{"rows", "cols", "kind", "data"}` with `kind` one of
//! `constant` (data: list of rows), `poly` (data: list of rows of coefficient
//! arrays, lowest degree first) or `samples` (data: `{"grid", "values",
//! "order", "slopes"?}` where every value is a list of rows).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use struct_dae_core::matfun::Samples;
use struct_dae_core::{Interp, Kind, MatrixFunction, MatrixPair, PHDAEModel, TimeGrid};

use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum KindName {
    Constant,
    Poly,
    Samples,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FunctionJson {
    pub rows: usize,
    pub cols: usize,
    pub kind: KindName,
    pub data: Value,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SamplesJson {
    grid: Vec<f64>,
    values: Vec<Vec<Vec<f64>>>,
    order: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slopes: Option<Vec<Vec<Vec<f64>>>>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum StructureName {
    #[serde(rename = "self")]
    SelfAdjoint,
    #[serde(rename = "skew")]
    SkewAdjoint,
}

/// Port-Hamiltonian blocks other than `E`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortJson {
    pub j: FunctionJson,
    pub r: FunctionJson,
    pub k: FunctionJson,
    pub g: FunctionJson,
    pub p: FunctionJson,
    pub s: FunctionJson,
    pub n: FunctionJson,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<StructureName>,
    pub t0: f64,
    pub tf: f64,
    pub e: FunctionJson,
    pub a: FunctionJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forcing: Option<FunctionJson>,
    /// Velocity and pressure block sizes of a Stokes-type pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub port: Option<PortJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// A parsed model file.
#[derive(Clone, Debug)]
pub struct Model {
    pub name: Option<String>,
    pub structure: Option<StructureName>,
    pub pair: MatrixPair,
    pub forcing: Option<MatrixFunction>,
    pub partition: Option<[usize; 2]>,
    pub port: Option<PHDAEModel>,
}

fn field<T: for<'de> Deserialize<'de>>(v: &Value, path: &str) -> Result<T, CliError> {
    serde_json::from_value(v.clone()).map_err(|e| CliError::Usage(format!("field `{path}`: {e}")))
}

fn matrix(rows: Vec<Vec<f64>>, r: usize, c: usize, path: &str) -> Result<DMatrix<f64>, CliError> {
    if rows.len() != r || rows.iter().any(|row| row.len() != c) {
        return Err(CliError::Usage(format!("field `{path}`: expected a {r}x{c} matrix")));
    }
    Ok(DMatrix::from_row_iterator(r, c, rows.into_iter().flatten()))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl FunctionJson {
    pub fn decode(&self, path: &str) -> Result<MatrixFunction, CliError> {
        let (r, c) = (self.rows, self.cols);
        let core = |e: struct_dae_core::DaeError| CliError::Usage(format!("field `{path}`: {e}"));
        let data = format!("{path}.data");
        match self.kind {
            KindName::Constant => {
                let m = matrix(field(&self.data, &data)?, r, c, &data)?;
                MatrixFunction::constant(m).map_err(core)
            }
            KindName::Poly => {
                let rows: Vec<Vec<Vec<f64>>> = field(&self.data, &data)?;
                if rows.len() != r || rows.iter().any(|row| row.len() != c) {
                    return Err(CliError::Usage(format!("field `{data}`: expected {r} rows of {c} coefficient arrays")));
                }
                MatrixFunction::poly(r, c, rows.into_iter().flatten().collect()).map_err(core)
            }
            KindName::Samples => {
                let s: SamplesJson = field(&self.data, &data)?;
                let grid = TimeGrid::new(s.grid).map_err(core)?;
                let values = s
                    .values
                    .into_iter()
                    .enumerate()
                    .map(|(k, v)| matrix(v, r, c, &format!("{data}.values[{k}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                match s.slopes {
                    Some(slopes) => {
                        let slopes = slopes
                            .into_iter()
                            .enumerate()
                            .map(|(k, v)| matrix(v, r, c, &format!("{data}.slopes[{k}]")))
                            .collect::<Result<Vec<_>, _>>()?;
                        MatrixFunction::hermite(grid, values, slopes).map_err(core)
                    }
                    None => {
                        let order = Interp::from_order(s.order).map_err(core)?;
                        MatrixFunction::sampled(grid, values, order).map_err(core)
                    }
                }
            }
        }
    }

    pub fn encode(f: &MatrixFunction) -> Self {
        let (rows, cols) = f.shape();
        let (kind, data) = match f.kind() {
            Kind::Constant(m) => (KindName::Constant, serde_json::to_value(rows_of(m))),
            Kind::Poly(c) => {
                let nested: Vec<Vec<Vec<f64>>> = c.chunks(cols.max(1)).map(|r| r.to_vec()).collect();
                (KindName::Poly, serde_json::to_value(nested))
            }
            Kind::Sampled(s) => (KindName::Samples, serde_json::to_value(samples_json(s))),
        };
        Self { rows, cols, kind, data: data.expect("plain numbers serialize") }
    }
}

fn samples_json(s: &Samples<f64>) -> SamplesJson {
    SamplesJson {
        grid: s.grid().points().to_vec(),
        values: s.values().iter().map(rows_of).collect(),
        order: s.order().order(),
        slopes: s.slopes().map(|sl| sl.iter().map(rows_of).collect()),
    }
}

impl PortJson {
    fn decode(&self, e: MatrixFunction) -> Result<PHDAEModel, CliError> {
        Ok(PHDAEModel {
            e,
            j: self.j.decode("port.j")?,
            r: self.r.decode("port.r")?,
            k: self.k.decode("port.k")?,
            g: self.g.decode("port.g")?,
            p: self.p.decode("port.p")?,
            s: self.s.decode("port.s")?,
            n: self.n.decode("port.n")?,
        })
    }

    pub fn encode(m: &PHDAEModel) -> Self {
        Self {
            j: FunctionJson::encode(&m.j),
            r: FunctionJson::encode(&m.r),
            k: FunctionJson::encode(&m.k),
            g: FunctionJson::encode(&m.g),
            p: FunctionJson::encode(&m.p),
            s: FunctionJson::encode(&m.s),
            n: FunctionJson::encode(&m.n),
        }
    }
}

impl ModelJson {
    pub fn decode(&self) -> Result<Model, CliError> {
        if !(self.t0 < self.tf) {
            return Err(CliError::Usage(format!("fields `t0`, `tf`: need t0 < tf, got {} and {}", self.t0, self.tf)));
        }
        let interval = TimeGrid::uniform(self.t0, self.tf, 2).map_err(|e| CliError::Usage(e.to_string()))?;
        let e = self.e.decode("e")?;
        let a = self.a.decode("a")?;
        let pair = MatrixPair::new(e.clone(), a, interval).map_err(|err| CliError::Usage(format!("fields `e`, `a`: {err}")))?;
        let forcing = self.forcing.as_ref().map(|f| f.decode("forcing")).transpose()?;
        if let Some(f) = &forcing {
            if f.shape() != (pair.n(), 1) {
                return Err(CliError::Usage(format!("field `forcing`: expected {}x1, got {:?}", pair.n(), f.shape())));
            }
        }
        if let Some([nv, np]) = self.partition {
            if nv + np != pair.n() {
                return Err(CliError::Usage(format!("field `partition`: {nv} + {np} does not match size {}", pair.n())));
            }
        }
        let port = self.port.as_ref().map(|p| p.decode(e)).transpose()?;
        Ok(Model { name: self.name.clone(), structure: self.structure, pair, forcing, partition: self.partition, port })
    }

    pub fn from_pair(name: &str, structure: Option<StructureName>, pair: &MatrixPair) -> Self {
        let grid = &pair.interval;
        Self {
            name: Some(name.to_string()),
            structure,
            t0: grid.t0(),
            tf: grid.tf(),
            e: FunctionJson::encode(&pair.e),
            a: FunctionJson::encode(&pair.a),
            forcing: None,
            partition: None,
            port: None,
            seed: None,
        }
    }
}

pub fn parse_model(text: &str) -> Result<Model, CliError> {
    let raw: ModelJson = serde_json::from_str(text).map_err(|e| CliError::Usage(format!("malformed model: {e}")))?;
    raw.decode()
}

/// A bare matrix function, or the `e` block of a model file.
pub fn parse_function(text: &str, which: &str) -> Result<MatrixFunction, CliError> {
    let v: Value = serde_json::from_str(text).map_err(|e| CliError::Usage(format!("malformed JSON: {e}")))?;
    if v.get("rows").is_some() {
        let f: FunctionJson = field(&v, "<root>")?;
        return f.decode("<root>");
    }
    let model = parse_model(text)?;
    match which {
        "e" => Ok(model.pair.e),
        "a" => Ok(model.pair.a),
        other => Err(CliError::Usage(format!("unknown matrix `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poly_entries_are_row_major() {
        let f = MatrixFunction::poly(1, 2, vec![vec![1.0, 2.0], vec![3.0]]).unwrap();
        let j = FunctionJson::encode(&f);
        assert_eq!(j.data, serde_json::json!([[[1.0, 2.0], [3.0]]]));
        assert_eq!(j.decode("f").unwrap().eval(1.0).unwrap(), DMatrix::from_row_slice(1, 2, &[3.0, 3.0]));
    }

    #[test]
    fn hermite_samples_keep_their_slopes() {
        let grid = TimeGrid::uniform(0.0, 1.0, 3).unwrap();
        let f = MatrixFunction::from_grid_fn(&grid, |t| {
            Ok((DMatrix::from_element(1, 1, t * t), DMatrix::from_element(1, 1, 2.0 * t)))
        })
        .unwrap();
        let back = FunctionJson::encode(&f).decode("f").unwrap();
        assert_eq!(back.derivative(0.3).unwrap(), f.derivative(0.3).unwrap());
    }

    #[test]
    fn wrong_kind_names_the_field() {
        let text = r#"{"t0": 0, "tf": 1,
            "e": {"rows": 1, "cols": 1, "kind": "constant", "data": [[1]]},
            "a": {"rows": 1, "cols": 1, "kind": "samples", "data": {"grid": [0, 1], "values": [[[0]], [[0]]], "order": 2}}}"#;
        match parse_model(text) {
            Err(CliError::Usage(m)) => assert!(m.contains("`a`"), "{m}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
