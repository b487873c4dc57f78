//! Parsing of `--kernel` arguments.
//!
//! Accepted forms:
//! - `pure-escape:q=2`, `two-state:a=1,b=1`, `constant-one`,
//!   `poly-tail:alpha=1.5,t0=1`
//! - `ctmc:file=gen.json`, `tabulated:file=table.json`
//! - `difference-walk:d=1,radius=16[,boundary=absorbing]`
//! - inline JSON (`{...}`) or a path to a JSON file holding a generator,
//!   a tabulated kernel or a closed-form family

use std::fs;
use std::path::Path;

use loctime::kernel::{
    build_difference_walk, Boundary, ClosedFormFamily, GeneratorMatrix, ReturnKernel,
};
use loctime::{Error, Result};
use serde_json::{json, Value};

pub struct ParsedKernel {
    pub kernel: ReturnKernel,
    /// Everything needed to rebuild the kernel, for output headers.
    pub resolved: Value,
}

fn read(path: &str) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Precondition(format!("cannot read {path}: {e}")))
}

fn key_values(body: &str) -> Result<Vec<(&str, &str)>> {
    body.split(',')
        .filter(|s| !s.is_empty())
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Parse(format!("expected key=value, got '{kv}'")))
        })
        .collect()
}

fn from_json_text(text: &str) -> Result<ReturnKernel> {
    let value: Value = serde_json::from_str(text)?;
    if value.get("rates").is_some() {
        Ok(ReturnKernel::ctmc(GeneratorMatrix::from_json(text)?))
    } else if value.get("times").is_some() {
        ReturnKernel::from_tabulated_json(text)
    } else if value.get("family").is_some() {
        let family: ClosedFormFamily = serde_json::from_value(value)?;
        ReturnKernel::closed_form(family)
    } else {
        Err(Error::Parse(
            "kernel JSON needs `rates` (generator), `times` (table) or `family`".into(),
        ))
    }
}

fn parse_boundary(s: &str) -> Result<Boundary> {
    match s {
        "reflecting" => Ok(Boundary::Reflecting),
        "absorbing" => Ok(Boundary::Absorbing),
        other => Err(Error::Parse(format!("unknown boundary '{other}'"))),
    }
}

pub fn parse_kernel(arg: &str, boundary: &str) -> Result<ParsedKernel> {
    let arg = arg.trim();
    let mut extra = json!({});
    let kernel = if arg.starts_with('{') {
        from_json_text(arg)?
    } else {
        let (name, body) = arg.split_once(':').unwrap_or((arg, ""));
        match name {
            "ctmc" | "tabulated" => {
                let kv = key_values(body)?;
                let file = match kv.as_slice() {
                    [("file", f)] => *f,
                    _ => return Err(Error::Parse(format!("{name} needs exactly file=PATH"))),
                };
                let text = read(file)?;
                extra = json!({ "file": file });
                if name == "ctmc" {
                    ReturnKernel::ctmc(GeneratorMatrix::from_json(&text)?)
                } else {
                    ReturnKernel::from_tabulated_json(&text)?
                }
            }
            "difference-walk" => {
                let mut d = None;
                let mut radius = None;
                let mut bound = boundary.to_string();
                for (k, v) in key_values(body)? {
                    let bad = |_| Error::Parse(format!("bad value for {k}: '{v}'"));
                    match k {
                        "d" => d = Some(v.parse::<usize>().map_err(bad)?),
                        "radius" => radius = Some(v.parse::<usize>().map_err(bad)?),
                        "boundary" => bound = v.to_string(),
                        _ => return Err(Error::Parse(format!("unknown key '{k}' for difference-walk"))),
                    }
                }
                let (d, radius) = match (d, radius) {
                    (Some(d), Some(r)) => (d, r),
                    _ => return Err(Error::Parse("difference-walk needs d and radius".into())),
                };
                extra = json!({ "boundary": bound });
                let gen = build_difference_walk(d, radius, parse_boundary(&bound)?)?;
                ReturnKernel::ctmc(gen)
            }
            _ if Path::new(arg).is_file() => {
                extra = json!({ "file": arg });
                from_json_text(&read(arg)?)?
            }
            _ => ReturnKernel::closed_form(arg.parse::<ClosedFormFamily>()?)?,
        }
    };
    let tail = serde_json::to_value(kernel.tail())?;
    let mut resolved = json!({
        "spec": arg,
        "description": kernel.describe(),
        "tail": tail,
        "tail_start": loctime::json_number(kernel.tail_start()),
    });
    if let (Value::Object(dst), Value::Object(src)) = (&mut resolved, extra) {
        dst.extend(src);
    }
    Ok(ParsedKernel { kernel, resolved })
}
