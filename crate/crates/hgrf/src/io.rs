//! Text file formats: parameter files, grid fields and observation lists.
//!
//! All floats are printed with Rust's shortest-roundtrip formatting, so a
//! write/read cycle reproduces every value bit-exactly.

use crate::error::{HgrfError, Result};
use crate::fit::{FitResult, StartTrace};
use crate::grid::{GridField, GridSpec};
use crate::krige::Observation;
use crate::params::{ModelParams, VariableId};
use std::fmt::Write as _;
use std::path::Path;

/// Magic tag of the grid-field format.
pub const GRID_MAGIC: &str = "HGRF1";

/// Parsed parameter file: model parameters plus an optional seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamsFile {
    pub params: ModelParams,
    pub seed: Option<u64>,
}

/// Read a `key=value` parameter file.
///
/// Required keys: sigma_psi, sigma_chi, rho, nu, r1, r2, theta. Optional:
/// seed. Blank lines and `#` comments are allowed; unknown or duplicate
/// keys are rejected with their line number.
pub fn read_params_str(text: &str) -> Result<ParamsFile> {
    let mut values: [Option<f64>; 7] = [None; 7];
    let names = ["sigma_psi", "sigma_chi", "rho", "nu", "r1", "r2", "theta"];
    let mut seed: Option<u64> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| HgrfError::Parse {
            line,
            message: format!("expected key=value, got '{raw}'"),
        })?;
        let key = key.trim();
        let value = value.trim();
        if key == "seed" {
            if seed.is_some() {
                return Err(HgrfError::Parse {
                    line,
                    message: "duplicate key 'seed'".to_string(),
                });
            }
            seed = Some(value.parse().map_err(|_| HgrfError::Parse {
                line,
                message: format!("seed must be an unsigned integer, got '{value}'"),
            })?);
            continue;
        }
        let idx = names
            .iter()
            .position(|n| *n == key)
            .ok_or_else(|| HgrfError::Parse {
                line,
                message: format!("unknown key '{key}'"),
            })?;
        if values[idx].is_some() {
            return Err(HgrfError::Parse {
                line,
                message: format!("duplicate key '{key}'"),
            });
        }
        values[idx] = Some(value.parse().map_err(|_| HgrfError::Parse {
            line,
            message: format!("{key} must be a float, got '{value}'"),
        })?);
    }

    let mut v = [0.0; 7];
    for (i, (name, slot)) in names.iter().zip(&values).enumerate() {
        v[i] = slot.ok_or_else(|| HgrfError::Parse {
            line: 0,
            message: format!("missing required key '{name}'"),
        })?;
    }
    let params = ModelParams::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6])?;
    Ok(ParamsFile { params, seed })
}

pub fn read_params(path: &Path) -> Result<ParamsFile> {
    read_params_str(&std::fs::read_to_string(path)?)
}

pub fn write_params_str(params: &ModelParams, seed: Option<u64>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "sigma_psi={}", params.sigma_psi());
    let _ = writeln!(s, "sigma_chi={}", params.sigma_chi());
    let _ = writeln!(s, "rho={}", params.rho());
    let _ = writeln!(s, "nu={}", params.nu());
    let _ = writeln!(s, "r1={}", params.r1());
    let _ = writeln!(s, "r2={}", params.r2());
    let _ = writeln!(s, "theta={}", params.theta());
    if let Some(seed) = seed {
        let _ = writeln!(s, "seed={seed}");
    }
    s
}

pub fn write_params(path: &Path, params: &ModelParams, seed: Option<u64>) -> Result<()> {
    std::fs::write(path, write_params_str(params, seed))?;
    Ok(())
}

/// Serialize a grid field in the `HGRF1` text format: a header line
/// `HGRF1 nx ny ncomp dx dy x0 y0`, a component-name line, then
/// ncomp * ny lines of nx space-separated values (x fastest, y-major).
pub fn write_grid_str(field: &GridField) -> String {
    let spec = field.spec();
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{GRID_MAGIC} {} {} {} {} {} {} {}",
        spec.nx(),
        spec.ny(),
        field.components().len(),
        spec.dx(),
        spec.dy(),
        spec.x0(),
        spec.y0()
    );
    let names: Vec<&str> = field.components().iter().map(|c| c.name()).collect();
    let _ = writeln!(s, "{}", names.join(" "));
    for comp in field.values() {
        for iy in 0..spec.ny() {
            let row = &comp[iy * spec.nx()..(iy + 1) * spec.nx()];
            let mut first = true;
            for v in row {
                if !first {
                    s.push(' ');
                }
                let _ = write!(s, "{v}");
                first = false;
            }
            s.push('\n');
        }
    }
    s
}

pub fn write_grid(path: &Path, field: &GridField) -> Result<()> {
    std::fs::write(path, write_grid_str(field))?;
    Ok(())
}

/// Parse the `HGRF1` grid format, with line-numbered errors.
pub fn read_grid_str(text: &str) -> Result<GridField> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| HgrfError::Parse {
        line: 1,
        message: "empty grid file".to_string(),
    })?;
    let tok: Vec<&str> = header.split_whitespace().collect();
    if tok.len() != 8 || tok[0] != GRID_MAGIC {
        return Err(HgrfError::Parse {
            line: 1,
            message: format!("expected header '{GRID_MAGIC} nx ny ncomp dx dy x0 y0'"),
        });
    }
    let parse_usize = |s: &str, what: &str| -> Result<usize> {
        s.parse().map_err(|_| HgrfError::Parse {
            line: 1,
            message: format!("{what} must be an integer, got '{s}'"),
        })
    };
    let parse_f64 = |s: &str, what: &str| -> Result<f64> {
        s.parse().map_err(|_| HgrfError::Parse {
            line: 1,
            message: format!("{what} must be a float, got '{s}'"),
        })
    };
    let nx = parse_usize(tok[1], "nx")?;
    let ny = parse_usize(tok[2], "ny")?;
    let ncomp = parse_usize(tok[3], "ncomp")?;
    let dx = parse_f64(tok[4], "dx")?;
    let dy = parse_f64(tok[5], "dy")?;
    let x0 = parse_f64(tok[6], "x0")?;
    let y0 = parse_f64(tok[7], "y0")?;
    let spec = GridSpec::new(nx, ny, dx, dy, x0, y0)?;

    let (_, names_line) = lines.next().ok_or_else(|| HgrfError::Parse {
        line: 2,
        message: "missing component-name line".to_string(),
    })?;
    let components: Vec<VariableId> = names_line
        .split_whitespace()
        .map(VariableId::parse)
        .collect::<Result<_>>()
        .map_err(|e| HgrfError::Parse {
            line: 2,
            message: e.to_string(),
        })?;
    if components.len() != ncomp {
        return Err(HgrfError::Parse {
            line: 2,
            message: format!("header declares {ncomp} components, found {}", components.len()),
        });
    }

    let mut values = vec![Vec::with_capacity(spec.n_points()); ncomp];
    for (c, comp) in values.iter_mut().enumerate() {
        for iy in 0..ny {
            let (lineno, row) = lines.next().ok_or_else(|| HgrfError::Parse {
                line: 2 + c * ny + iy + 1,
                message: "unexpected end of file in data block".to_string(),
            })?;
            let line = lineno + 1;
            let mut count = 0;
            for tok in row.split_whitespace() {
                let v: f64 = tok.parse().map_err(|_| HgrfError::Parse {
                    line,
                    message: format!("bad float '{tok}'"),
                })?;
                if !v.is_finite() {
                    return Err(HgrfError::Parse {
                        line,
                        message: format!("non-finite value '{tok}'"),
                    });
                }
                comp.push(v);
                count += 1;
            }
            if count != nx {
                return Err(HgrfError::Parse {
                    line,
                    message: format!("expected {nx} values, found {count}"),
                });
            }
        }
    }
    if let Some((lineno, extra)) = lines.next() {
        if !extra.trim().is_empty() {
            return Err(HgrfError::Parse {
                line: lineno + 1,
                message: "trailing content after data block".to_string(),
            });
        }
    }
    GridField::new(spec, components, values)
}

pub fn read_grid(path: &Path) -> Result<GridField> {
    read_grid_str(&std::fs::read_to_string(path)?)
}

/// Serialize a fit result as `key=value` lines: the seven model parameters,
/// cl_value, n_starts, converged, and per-start trace lines
/// `trace_<k>_{init,end,cl,converged}` (init/end are the six free
/// parameters, space separated).
pub fn write_fit_str(fit: &FitResult) -> String {
    let mut s = write_params_str(&fit.params, None);
    let _ = writeln!(s, "cl_value={}", fit.cl_value);
    let _ = writeln!(s, "n_starts={}", fit.n_starts);
    let _ = writeln!(s, "converged={}", fit.converged);
    for (k, t) in fit.trace.iter().enumerate() {
        let join = |v: &[f64; 6]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        let _ = writeln!(s, "trace_{k}_init={}", join(&t.init));
        let _ = writeln!(s, "trace_{k}_end={}", join(&t.end));
        let _ = writeln!(s, "trace_{k}_cl={}", t.cl);
        let _ = writeln!(s, "trace_{k}_converged={}", t.converged);
    }
    s
}

pub fn write_fit(path: &Path, fit: &FitResult) -> Result<()> {
    std::fs::write(path, write_fit_str(fit))?;
    Ok(())
}

/// Parse a fit-result file.
pub fn read_fit_str(text: &str) -> Result<FitResult> {
    let mut map = std::collections::BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| HgrfError::Parse {
            line,
            message: format!("expected key=value, got '{raw}'"),
        })?;
        if map.insert(key.trim().to_string(), (value.trim().to_string(), line)).is_some() {
            return Err(HgrfError::Parse {
                line,
                message: format!("duplicate key '{}'", key.trim()),
            });
        }
    }
    let take_f64 = |map: &std::collections::BTreeMap<String, (String, usize)>,
                    key: &str|
     -> Result<f64> {
        let (v, line) = map.get(key).ok_or_else(|| HgrfError::Parse {
            line: 0,
            message: format!("missing required key '{key}'"),
        })?;
        v.parse().map_err(|_| HgrfError::Parse {
            line: *line,
            message: format!("{key} must be a float, got '{v}'"),
        })
    };
    let params = ModelParams::new(
        take_f64(&map, "sigma_psi")?,
        take_f64(&map, "sigma_chi")?,
        take_f64(&map, "rho")?,
        take_f64(&map, "nu")?,
        take_f64(&map, "r1")?,
        take_f64(&map, "r2")?,
        take_f64(&map, "theta")?,
    )?;
    let cl_value = take_f64(&map, "cl_value")?;
    let n_starts = {
        let (v, line) = map.get("n_starts").ok_or_else(|| HgrfError::Parse {
            line: 0,
            message: "missing required key 'n_starts'".to_string(),
        })?;
        v.parse::<usize>().map_err(|_| HgrfError::Parse {
            line: *line,
            message: format!("n_starts must be an integer, got '{v}'"),
        })?
    };
    let parse_bool = |v: &str, line: usize| -> Result<bool> {
        v.parse().map_err(|_| HgrfError::Parse {
            line,
            message: format!("expected true/false, got '{v}'"),
        })
    };
    let converged = {
        let (v, line) = map.get("converged").ok_or_else(|| HgrfError::Parse {
            line: 0,
            message: "missing required key 'converged'".to_string(),
        })?;
        parse_bool(v, *line)?
    };
    let parse_six = |v: &str, line: usize| -> Result<[f64; 6]> {
        let parts: Vec<&str> = v.split_whitespace().collect();
        if parts.len() != 6 {
            return Err(HgrfError::Parse {
                line,
                message: format!("expected 6 floats, got {}", parts.len()),
            });
        }
        let mut out = [0.0; 6];
        for (slot, p) in out.iter_mut().zip(&parts) {
            *slot = p.parse().map_err(|_| HgrfError::Parse {
                line,
                message: format!("bad float '{p}'"),
            })?;
        }
        Ok(out)
    };
    let mut trace = Vec::new();
    for k in 0.. {
        let key = format!("trace_{k}_init");
        let Some((init_v, init_line)) = map.get(&key) else {
            break;
        };
        let get = |suffix: &str| -> Result<&(String, usize)> {
            map.get(&format!("trace_{k}_{suffix}"))
                .ok_or_else(|| HgrfError::Parse {
                    line: *init_line,
                    message: format!("incomplete trace {k}: missing {suffix}"),
                })
        };
        let (end_v, end_line) = get("end")?;
        let (cl_v, cl_line) = get("cl")?;
        let (conv_v, conv_line) = get("converged")?;
        trace.push(StartTrace {
            init: parse_six(init_v, *init_line)?,
            end: parse_six(end_v, *end_line)?,
            cl: cl_v.parse().map_err(|_| HgrfError::Parse {
                line: *cl_line,
                message: format!("bad float '{cl_v}'"),
            })?,
            converged: parse_bool(conv_v, *conv_line)?,
        });
    }
    Ok(FitResult {
        params,
        cl_value,
        n_starts,
        converged,
        trace,
    })
}

pub fn read_fit(path: &Path) -> Result<FitResult> {
    read_fit_str(&std::fs::read_to_string(path)?)
}

/// Observation CSV: a `var,x,y,value,noise_sd` header then one observation
/// per line, `var` one of psi, chi, u, v, zeta, div.
pub fn write_observations_str(obs: &[Observation]) -> String {
    let mut s = String::from("var,x,y,value,noise_sd\n");
    for o in obs {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            o.var, o.location[0], o.location[1], o.value, o.noise_sd
        );
    }
    s
}

pub fn write_observations(path: &Path, obs: &[Observation]) -> Result<()> {
    std::fs::write(path, write_observations_str(obs))?;
    Ok(())
}

pub fn read_observations_str(text: &str) -> Result<Vec<Observation>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| HgrfError::Parse {
        line: 1,
        message: "empty observation file".to_string(),
    })?;
    let normalized: String = header.split(',').map(str::trim).collect::<Vec<_>>().join(",");
    if normalized != "var,x,y,value,noise_sd" {
        return Err(HgrfError::Parse {
            line: 1,
            message: format!("expected header 'var,x,y,value,noise_sd', got '{header}'"),
        });
    }
    let mut obs = Vec::new();
    for (lineno, raw) in lines {
        let line = lineno + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(HgrfError::Parse {
                line,
                message: format!("expected 5 comma-separated fields, got {}", fields.len()),
            });
        }
        let var = VariableId::parse(fields[0]).map_err(|e| HgrfError::Parse {
            line,
            message: e.to_string(),
        })?;
        let mut nums = [0.0f64; 4];
        for (slot, f) in nums.iter_mut().zip(&fields[1..]) {
            *slot = f.parse().map_err(|_| HgrfError::Parse {
                line,
                message: format!("bad float '{f}'"),
            })?;
        }
        obs.push(
            Observation::new(var, [nums[0], nums[1]], nums[2], nums[3]).map_err(|e| {
                HgrfError::Parse {
                    line,
                    message: e.to_string(),
                }
            })?,
        );
    }
    Ok(obs)
}

pub fn read_observations(path: &Path) -> Result<Vec<Observation>> {
    read_observations_str(&std::fs::read_to_string(path)?)
}
