//! Pulse program representation and the text / JSON wire formats.
//!
//! Text format, one op per line, `#` starts a comment:
//!
//! ```text
//! X <ij> <ion>            # pi-pulse
//! U <ij> <ion> <theta> <phi>
//! Z <ij> <ion> <rho>
//! MM <ion_a> <ion_b> <theta>
//! MMALL <duration_s>
//! MEASURE
//! ```
//!
//! Angles accept `0.25pi`, `0.785398rad` or a bare number in radians.

use serde_json::json;

use crate::chain::CouplingMatrix;
use crate::error::{Error, Result};
use crate::gates::Subspace;

/// One pulse operation.
#[derive(Debug, Clone, PartialEq)]
pub enum PulseOp {
    /// Rotation u_ij(theta, phi) on one ion.
    SingleQutrit {
        ion: usize,
        sub: Subspace,
        theta: f64,
        phi: f64,
    },
    /// Diagonal phase rotation z_ij(rho) on one ion.
    ZPhase { ion: usize, sub: Subspace, rho: f64 },
    /// Pairwise coupling evolution exp(-i theta M_a M_b).
    MMPair { ion_a: usize, ion_b: usize, theta: f64 },
    /// Free evolution of the whole chain under its coupling matrix.
    MMChain { duration: f64, coupling: CouplingMatrix },
    /// Two-step readout of every ion; only valid as the final op.
    Measure,
}

impl PulseOp {
    /// Pi-pulse shorthand.
    pub fn x(sub: Subspace, ion: usize) -> PulseOp {
        PulseOp::SingleQutrit {
            ion,
            sub,
            theta: std::f64::consts::FRAC_PI_2,
            phi: 0.0,
        }
    }

    /// Inverse pi-pulse (phase-shifted by pi).
    pub fn x_inverse(sub: Subspace, ion: usize) -> PulseOp {
        PulseOp::SingleQutrit {
            ion,
            sub,
            theta: std::f64::consts::FRAC_PI_2,
            phi: std::f64::consts::PI,
        }
    }
}

/// An ordered pulse program; the first listed op is applied first.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseProgram {
    pub n_qutrits: usize,
    pub ops: Vec<PulseOp>,
}

impl PulseProgram {
    pub fn new(n_qutrits: usize, ops: Vec<PulseOp>) -> Result<Self> {
        let p = PulseProgram { n_qutrits, ops };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qutrits == 0 {
            return Err(Error::InvalidInput("program needs at least one qutrit".into()));
        }
        let n = self.n_qutrits;
        for (k, op) in self.ops.iter().enumerate() {
            match op {
                PulseOp::SingleQutrit { ion, .. } | PulseOp::ZPhase { ion, .. } => {
                    if *ion >= n {
                        return Err(Error::IonOutOfRange { index: *ion, n_qutrits: n });
                    }
                }
                PulseOp::MMPair { ion_a, ion_b, .. } => {
                    if *ion_a >= n {
                        return Err(Error::IonOutOfRange { index: *ion_a, n_qutrits: n });
                    }
                    if *ion_b >= n {
                        return Err(Error::IonOutOfRange { index: *ion_b, n_qutrits: n });
                    }
                    if ion_a == ion_b {
                        return Err(Error::InvalidInput(format!(
                            "MM op {k} couples ion {ion_a} to itself"
                        )));
                    }
                }
                PulseOp::MMChain { coupling, .. } => {
                    if coupling.n_ions() != n {
                        return Err(Error::DimensionMismatch {
                            left: coupling.n_ions(),
                            right: n,
                        });
                    }
                }
                PulseOp::Measure => {
                    if k + 1 != self.ops.len() {
                        return Err(Error::InvalidInput(
                            "MEASURE is only valid as the final op".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Whether the program ends with a measurement.
    pub fn measures(&self) -> bool {
        matches!(self.ops.last(), Some(PulseOp::Measure))
    }

    /// Serializes to the JSON mirror format. MMALL ops carry only their
    /// duration; the coupling matrix is supplied externally on parse.
    pub fn to_json(&self) -> serde_json::Value {
        let ops: Vec<serde_json::Value> = self
            .ops
            .iter()
            .map(|op| match op {
                PulseOp::SingleQutrit { ion, sub, theta, phi } => json!({
                    "op": "U", "ij": sub.as_str(), "ion": ion, "theta": theta, "phi": phi,
                }),
                PulseOp::ZPhase { ion, sub, rho } => json!({
                    "op": "Z", "ij": sub.as_str(), "ion": ion, "rho": rho,
                }),
                PulseOp::MMPair { ion_a, ion_b, theta } => json!({
                    "op": "MM", "ion_a": ion_a, "ion_b": ion_b, "theta": theta,
                }),
                PulseOp::MMChain { duration, .. } => json!({
                    "op": "MMALL", "duration_s": duration,
                }),
                PulseOp::Measure => json!({"op": "MEASURE"}),
            })
            .collect();
        json!({"n_qutrits": self.n_qutrits, "ops": ops})
    }
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Parses an angle token: `<x>pi`, `<x>rad` or a bare number in radians.
pub fn parse_angle(tok: &str) -> std::result::Result<f64, String> {
    let parse = |s: &str| s.parse::<f64>().map_err(|e| format!("bad number {s:?}: {e}"));
    if let Some(stripped) = tok.strip_suffix("pi") {
        Ok(parse(stripped)? * std::f64::consts::PI)
    } else if let Some(stripped) = tok.strip_suffix("rad") {
        parse(stripped)
    } else {
        parse(tok)
    }
}

struct Tok<'a> {
    col: usize,
    text: &'a str,
}

fn tokenize(line: &str) -> Vec<Tok<'_>> {
    let body = match line.find('#') {
        Some(p) => &line[..p],
        None => line,
    };
    let mut toks = Vec::new();
    let mut start = None;
    for (i, c) in body.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                toks.push(Tok { col: s + 1, text: &body[s..i] });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        toks.push(Tok { col: s + 1, text: &body[s..] });
    }
    toks
}

/// Parses the text format.
///
/// `n_qutrits` forces the register width; when `None` it is inferred as one
/// past the largest ion index (at least 1). `coupling` must be supplied when
/// the program uses `MMALL`.
pub fn parse_program(
    text: &str,
    n_qutrits: Option<usize>,
    coupling: Option<&CouplingMatrix>,
) -> Result<PulseProgram> {
    let mut ops = Vec::new();
    let mut max_ion = 0usize;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let toks = tokenize(raw);
        if toks.is_empty() {
            continue;
        }
        let head = &toks[0];
        let need = |count: usize| -> Result<()> {
            if toks.len() != count {
                Err(parse_err(
                    line,
                    head.col,
                    format!("{} expects {} arguments, got {}", head.text, count - 1, toks.len() - 1),
                ))
            } else {
                Ok(())
            }
        };
        let sub_at = |k: usize| -> Result<Subspace> {
            Subspace::parse(toks[k].text)
                .ok_or_else(|| parse_err(line, toks[k].col, format!("bad subspace {:?}", toks[k].text)))
        };
        let ion_at = |k: usize| -> Result<usize> {
            toks[k]
                .text
                .parse::<usize>()
                .map_err(|e| parse_err(line, toks[k].col, format!("bad ion index: {e}")))
        };
        let angle_at = |k: usize| -> Result<f64> {
            parse_angle(toks[k].text).map_err(|m| parse_err(line, toks[k].col, m))
        };

        match head.text.to_ascii_uppercase().as_str() {
            "X" => {
                need(3)?;
                let sub = sub_at(1)?;
                let ion = ion_at(2)?;
                max_ion = max_ion.max(ion);
                ops.push(PulseOp::x(sub, ion));
            }
            "U" => {
                need(5)?;
                let sub = sub_at(1)?;
                let ion = ion_at(2)?;
                max_ion = max_ion.max(ion);
                ops.push(PulseOp::SingleQutrit {
                    ion,
                    sub,
                    theta: angle_at(3)?,
                    phi: angle_at(4)?,
                });
            }
            "Z" => {
                need(4)?;
                let sub = sub_at(1)?;
                let ion = ion_at(2)?;
                max_ion = max_ion.max(ion);
                ops.push(PulseOp::ZPhase { ion, sub, rho: angle_at(3)? });
            }
            "MM" => {
                need(4)?;
                let ion_a = ion_at(1)?;
                let ion_b = ion_at(2)?;
                max_ion = max_ion.max(ion_a).max(ion_b);
                ops.push(PulseOp::MMPair { ion_a, ion_b, theta: angle_at(3)? });
            }
            "MMALL" => {
                need(2)?;
                let duration = toks[1]
                    .text
                    .parse::<f64>()
                    .map_err(|e| parse_err(line, toks[1].col, format!("bad duration: {e}")))?;
                let coupling = coupling.ok_or_else(|| {
                    parse_err(line, head.col, "MMALL requires a coupling matrix (chain config)")
                })?;
                ops.push(PulseOp::MMChain {
                    duration,
                    coupling: coupling.clone(),
                });
            }
            "MEASURE" => {
                need(1)?;
                ops.push(PulseOp::Measure);
            }
            other => {
                return Err(parse_err(line, head.col, format!("unknown op {other:?}")));
            }
        }
    }

    let inferred = max_ion + 1;
    let n = match n_qutrits {
        Some(n) => {
            if inferred > n {
                return Err(Error::IonOutOfRange {
                    index: max_ion,
                    n_qutrits: n,
                });
            }
            n
        }
        None => match ops.iter().find_map(|op| match op {
            PulseOp::MMChain { coupling, .. } => Some(coupling.n_ions()),
            _ => None,
        }) {
            Some(n) => n.max(inferred),
            None => inferred,
        },
    };
    PulseProgram::new(n, ops)
}

/// Parses the JSON mirror format.
pub fn parse_program_json(
    json: &str,
    coupling: Option<&CouplingMatrix>,
) -> Result<PulseProgram> {
    let v: serde_json::Value = serde_json::from_str(json)?;
    let bad = |msg: String| Error::InvalidInput(msg);
    let n_qutrits = v
        .get("n_qutrits")
        .and_then(|x| x.as_u64())
        .ok_or_else(|| bad("missing n_qutrits".into()))? as usize;
    let ops_json = v
        .get("ops")
        .and_then(|x| x.as_array())
        .ok_or_else(|| bad("missing ops array".into()))?;

    let get_f = |o: &serde_json::Value, key: &str| -> Result<f64> {
        o.get(key)
            .and_then(|x| x.as_f64())
            .ok_or_else(|| bad(format!("missing numeric field {key:?}")))
    };
    let get_u = |o: &serde_json::Value, key: &str| -> Result<usize> {
        o.get(key)
            .and_then(|x| x.as_u64())
            .map(|x| x as usize)
            .ok_or_else(|| bad(format!("missing integer field {key:?}")))
    };
    let get_sub = |o: &serde_json::Value| -> Result<Subspace> {
        let s = o
            .get("ij")
            .and_then(|x| x.as_str())
            .ok_or_else(|| bad("missing field \"ij\"".into()))?;
        Subspace::parse(s).ok_or_else(|| bad(format!("bad subspace {s:?}")))
    };

    let mut ops = Vec::new();
    for o in ops_json {
        let kind = o
            .get("op")
            .and_then(|x| x.as_str())
            .ok_or_else(|| bad("op entry missing \"op\"".into()))?;
        match kind {
            "X" => ops.push(PulseOp::x(get_sub(o)?, get_u(o, "ion")?)),
            "U" => ops.push(PulseOp::SingleQutrit {
                ion: get_u(o, "ion")?,
                sub: get_sub(o)?,
                theta: get_f(o, "theta")?,
                phi: get_f(o, "phi")?,
            }),
            "Z" => ops.push(PulseOp::ZPhase {
                ion: get_u(o, "ion")?,
                sub: get_sub(o)?,
                rho: get_f(o, "rho")?,
            }),
            "MM" => ops.push(PulseOp::MMPair {
                ion_a: get_u(o, "ion_a")?,
                ion_b: get_u(o, "ion_b")?,
                theta: get_f(o, "theta")?,
            }),
            "MMALL" => {
                let coupling = coupling
                    .ok_or_else(|| bad("MMALL requires a coupling matrix (chain config)".into()))?;
                ops.push(PulseOp::MMChain {
                    duration: get_f(o, "duration_s")?,
                    coupling: coupling.clone(),
                });
            }
            "MEASURE" => ops.push(PulseOp::Measure),
            other => return Err(bad(format!("unknown op {other:?}"))),
        }
    }
    PulseProgram::new(n_qutrits, ops)
}
