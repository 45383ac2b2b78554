//! Plain-text parameter checkpoints.
//!
//! ```text
//! epipinn-checkpoint 1
//! net <name> <input_dim> <hidden_layers> <hidden_width> <output_dim>   (one line per network)
//! seed <u64>
//! step <u64>
//! params <count>
//! <one value per line, shortest round-trip exponent form>
//! ```
//!
//! Values after the networks' own parameters are free scalars owned by the
//! model (for the PINN, the two raw probabilities).

use std::io::{BufRead, Write};

use super::{MlpConfig, NeuralError};

const MAGIC: &str = "epipinn-checkpoint 1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub nets: Vec<(String, MlpConfig)>,
    pub seed: u64,
    pub step: u64,
    pub params: Vec<f64>,
}

fn bad(msg: impl Into<String>) -> NeuralError {
    NeuralError::Checkpoint(msg.into())
}

pub fn write_checkpoint<W: Write>(mut w: W, ckpt: &Checkpoint) -> Result<(), NeuralError> {
    let io = |e: std::io::Error| bad(e.to_string());
    writeln!(w, "{MAGIC}").map_err(io)?;
    for (name, c) in &ckpt.nets {
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(bad(format!("invalid net name {name:?}")));
        }
        writeln!(
            w,
            "net {name} {} {} {} {}",
            c.input_dim, c.hidden_layers, c.hidden_width, c.output_dim
        )
        .map_err(io)?;
    }
    writeln!(w, "seed {}", ckpt.seed).map_err(io)?;
    writeln!(w, "step {}", ckpt.step).map_err(io)?;
    writeln!(w, "params {}", ckpt.params.len()).map_err(io)?;
    for p in &ckpt.params {
        writeln!(w, "{p:e}").map_err(io)?;
    }
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(r: R) -> Result<Checkpoint, NeuralError> {
    let mut lines = r.lines();
    let mut next = || -> Result<String, NeuralError> {
        lines
            .next()
            .ok_or_else(|| bad("unexpected end of file"))?
            .map_err(|e| bad(e.to_string()))
    };
    if next()?.trim_end() != MAGIC {
        return Err(bad("missing header"));
    }
    let mut nets = Vec::new();
    let mut line = next()?;
    while let Some(rest) = line.strip_prefix("net ") {
        let f: Vec<&str> = rest.split_whitespace().collect();
        if f.len() != 5 {
            return Err(bad(format!("malformed net line: {line}")));
        }
        let dims: Result<Vec<usize>, _> = f[1..].iter().map(|s| s.parse::<usize>()).collect();
        let d = dims.map_err(|e| bad(e.to_string()))?;
        nets.push((f[0].to_string(), MlpConfig::new(d[0], d[1], d[2], d[3])?));
        line = next()?;
    }
    let field = |line: &str, key: &str| -> Result<u64, NeuralError> {
        line.strip_prefix(key)
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| bad(format!("expected `{key}<n>`, found {line:?}")))
    };
    let seed = field(&line, "seed ")?;
    let step = field(&next()?, "step ")?;
    let count = field(&next()?, "params ")? as usize;
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let l = next()?;
        params.push(l.trim().parse::<f64>().map_err(|e| bad(format!("{l:?}: {e}")))?);
    }
    let net_total: usize = nets.iter().map(|(_, c)| c.param_count()).sum();
    if net_total > count {
        return Err(bad(format!(
            "networks need {net_total} parameters but file holds {count}"
        )));
    }
    Ok(Checkpoint {
        nets,
        seed,
        step,
        params,
    })
}
