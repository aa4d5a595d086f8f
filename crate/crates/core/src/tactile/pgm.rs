//! Plain-text PGM (P2) with 16-bit samples.
//!
//! Values are quantized linearly: `sample = round(value / scale * 65535)`.
//! The scale is written in a `# scale <value>` comment and read back from it
//! (1.0 when the comment is missing).

use std::io::{BufRead, Write};

use super::TactileError;

pub const PGM_MAX: u32 = 65535;

#[derive(Clone, Debug, PartialEq)]
pub struct PgmData {
    pub width: usize,
    pub height: usize,
    pub scale: f64,
    /// Dequantized values, row-major.
    pub values: Vec<f64>,
}

pub fn write_pgm<W: Write>(
    mut out: W,
    width: usize,
    height: usize,
    values: &[f64],
    scale: f64,
) -> Result<(), TactileError> {
    if values.len() != width * height {
        return Err(TactileError::Shape {
            expected: width * height,
            got: values.len(),
        });
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(TactileError::InvalidArgument("scale must be positive".into()));
    }
    writeln!(out, "P2")?;
    writeln!(out, "# linear quantization: value = sample * scale / {PGM_MAX}")?;
    writeln!(out, "# scale {scale:e}")?;
    writeln!(out, "{width} {height}")?;
    writeln!(out, "{PGM_MAX}")?;
    for row in values.chunks(width.max(1)) {
        let line: Vec<String> = row
            .iter()
            .map(|v| {
                let q = (v / scale * PGM_MAX as f64).round();
                (q.clamp(0.0, PGM_MAX as f64) as u32).to_string()
            })
            .collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_pgm<R: BufRead>(input: R) -> Result<PgmData, TactileError> {
    let mut scale = 1.0;
    let mut tokens: Vec<String> = Vec::new();
    for line in input.lines() {
        let line = line?;
        let (body, comment) = match line.find('#') {
            Some(i) => (&line[..i], Some(&line[i + 1..])),
            None => (line.as_str(), None),
        };
        if let Some(c) = comment {
            let mut parts = c.split_whitespace();
            if parts.next() == Some("scale") {
                scale = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| TactileError::Parse("bad scale comment".into()))?;
            }
        }
        tokens.extend(body.split_whitespace().map(str::to_string));
    }
    let mut it = tokens.into_iter();
    if it.next().as_deref() != Some("P2") {
        return Err(TactileError::Parse("missing P2 magic".into()));
    }
    let mut num = |what: &str| -> Result<u64, TactileError> {
        it.next()
            .ok_or_else(|| TactileError::Parse(format!("missing {what}")))?
            .parse()
            .map_err(|_| TactileError::Parse(format!("bad {what}")))
    };
    let width = num("width")? as usize;
    let height = num("height")? as usize;
    let maxval = num("maxval")?;
    if maxval == 0 || maxval > PGM_MAX as u64 {
        return Err(TactileError::Parse("maxval out of range".into()));
    }
    let mut values = Vec::with_capacity(width * height);
    for _ in 0..width * height {
        let s = num("sample")?;
        if s > maxval {
            return Err(TactileError::Parse("sample exceeds maxval".into()));
        }
        values.push(s as f64 * scale / maxval as f64);
    }
    if it.next().is_some() {
        return Err(TactileError::Parse("trailing data".into()));
    }
    Ok(PgmData {
        width,
        height,
        scale,
        values,
    })
}
