//! Parameter files for `simulate` and `stability`.
//!
//! A dimensional file is a flat JSON object with the twelve model keys
//! `a b e f g w s k h m q r` plus `C0 I0 D0 P0`. A dimensionless file is
//! recognised by an `alpha` key and holds the eight groups plus optional
//! `v0 x0 y0 z0` (default 1).

use anyhow::{bail, Context, Result};
use foodsys::model::{DimensionalParams, DimensionlessParams, InitialState, State};
use serde_json::{Map, Value};

const INITIAL_KEYS: [&str; 4] = ["C0", "I0", "D0", "P0"];
const DIMENSIONLESS_START: [&str; 4] = ["v0", "x0", "y0", "z0"];

#[derive(Debug, Clone, Copy)]
pub enum ParamsFile {
    Dimensional { params: DimensionalParams, init: Option<InitialState>, c0: Option<f64> },
    Dimensionless { params: DimensionlessParams, start: State },
}

fn take(map: &mut Map<String, Value>, keys: &[&str]) -> Map<String, Value> {
    keys.iter().filter_map(|k| map.remove(*k).map(|v| (k.to_string(), v))).collect()
}

fn number(v: &Value, key: &str) -> Result<f64> {
    v.as_f64().with_context(|| format!("'{key}' must be a number"))
}

pub fn parse(text: &str) -> Result<ParamsFile> {
    let value: Value = serde_json::from_str(text).context("parameter file is not valid JSON")?;
    let Value::Object(mut map) = value else {
        bail!("parameter file must hold a JSON object");
    };
    if map.contains_key("alpha") {
        let start_map = take(&mut map, &DIMENSIONLESS_START);
        let params: DimensionlessParams =
            serde_json::from_value(Value::Object(map)).context("invalid dimensionless parameters")?;
        params.validate()?;
        let mut start = [1.0; 4];
        for (slot, key) in start.iter_mut().zip(DIMENSIONLESS_START) {
            if let Some(v) = start_map.get(key) {
                *slot = number(v, key)?;
            }
        }
        if start.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            bail!("dimensionless start state must be positive and finite");
        }
        return Ok(ParamsFile::Dimensionless { params, start });
    }
    let init_map = take(&mut map, &INITIAL_KEYS);
    let params: DimensionalParams =
        serde_json::from_value(Value::Object(map)).context("invalid dimensional parameters")?;
    params.validate()?;
    let c0 = init_map.get("C0").map(|v| number(v, "C0")).transpose()?;
    let init = if init_map.len() == INITIAL_KEYS.len() {
        let init: InitialState = serde_json::from_value(Value::Object(init_map))?;
        init.validate()?;
        Some(init)
    } else {
        None
    };
    Ok(ParamsFile::Dimensional { params, init, c0 })
}
