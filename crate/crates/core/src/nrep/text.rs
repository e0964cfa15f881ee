//! Plain-text network format.
//!
//! ```text
//! nrep 1
//! mode heightfield
//! extents 20 1 0
//! layers 2 5 5 1
//! activation sinusoidal 1 0.78539816339744828
//! activation sinusoidal 1 0.78539816339744828
//! params 51
//! <one parameter per line>
//! ```

use std::fmt::Write as _;

use super::network::{ActivationKind, ActivationSpec, MlpNetwork, OutputMode};
use crate::error::{Error, Result};

const VERSION: u32 = 1;

fn kind_name(k: ActivationKind) -> &'static str {
    match k {
        ActivationKind::Sinusoidal => "sinusoidal",
        ActivationKind::Relu => "relu",
        ActivationKind::Tanh => "tanh",
        ActivationKind::Identity => "identity",
    }
}

fn mode_name(m: OutputMode) -> &'static str {
    match m {
        OutputMode::Heightfield => "heightfield",
        OutputMode::Surface3d => "surface3d",
        OutputMode::Map3d => "map3d",
    }
}

/// Format with 17 significant digits, enough to round-trip an `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn to_text(net: &MlpNetwork) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "nrep {VERSION}");
    let _ = writeln!(s, "mode {}", mode_name(net.output_mode));
    let e = net.extents;
    let _ = writeln!(s, "extents {} {} {}", fmt_f64(e[0]), fmt_f64(e[1]), fmt_f64(e[2]));
    let sizes: Vec<String> = net.layer_sizes().iter().map(|n| n.to_string()).collect();
    let _ = writeln!(s, "layers {}", sizes.join(" "));
    for a in net.activations() {
        let _ = writeln!(s, "activation {} {} {}", kind_name(a.kind), fmt_f64(a.omega), fmt_f64(a.delta));
    }
    let _ = writeln!(s, "params {}", net.count_params());
    for p in net.params() {
        let _ = writeln!(s, "{}", fmt_f64(*p));
    }
    s
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next_fields(&mut self, key: &str) -> Result<Vec<&'a str>> {
        loop {
            let Some((i, l)) = self.inner.next() else {
                return Err(Error::Parse {
                    line: self.line + 1,
                    message: format!("unexpected end of input, expected `{key}`"),
                });
            };
            self.line = i + 1;
            let l = l.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let mut f: Vec<&str> = l.split_whitespace().collect();
            if !key.is_empty() {
                if f[0] != key {
                    return Err(self.err(format!("expected `{key}`, found `{}`", f[0])));
                }
                f.remove(0);
            }
            return Ok(f);
        }
    }

    fn err(&self, message: String) -> Error {
        Error::Parse {
            line: self.line,
            message,
        }
    }

    fn num<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse().map_err(|_| self.err(format!("invalid number `{s}`")))
    }
}

pub fn from_text(text: &str) -> Result<MlpNetwork> {
    let mut r = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let v = r.next_fields("nrep")?;
    if v.len() != 1 || r.num::<u32>(v[0])? != VERSION {
        return Err(r.err(format!("unsupported version {v:?}")));
    }
    let m = r.next_fields("mode")?;
    let mode = match m.first().copied() {
        Some("heightfield") => OutputMode::Heightfield,
        Some("surface3d") => OutputMode::Surface3d,
        Some("map3d") => OutputMode::Map3d,
        other => return Err(r.err(format!("unknown mode {other:?}"))),
    };
    let e = r.next_fields("extents")?;
    if e.len() != 3 {
        return Err(r.err("extents needs three values".into()));
    }
    let extents = [r.num(e[0])?, r.num(e[1])?, r.num(e[2])?];
    let l = r.next_fields("layers")?;
    let sizes = l.iter().map(|s| r.num::<usize>(s)).collect::<Result<Vec<_>>>()?;
    let mut acts = Vec::new();
    for _ in 0..sizes.len().saturating_sub(2) {
        let a = r.next_fields("activation")?;
        if a.len() != 3 {
            return Err(r.err("activation needs kind, omega and delta".into()));
        }
        let kind = match a[0] {
            "sinusoidal" => ActivationKind::Sinusoidal,
            "relu" => ActivationKind::Relu,
            "tanh" => ActivationKind::Tanh,
            "identity" => ActivationKind::Identity,
            other => return Err(r.err(format!("unknown activation `{other}`"))),
        };
        acts.push(ActivationSpec {
            kind,
            omega: r.num(a[1])?,
            delta: r.num(a[2])?,
        });
    }
    let mut net = MlpNetwork::new(sizes, acts, mode, extents).map_err(|e| r.err(e.to_string()))?;
    let p = r.next_fields("params")?;
    let count: usize = r.num(p.first().copied().unwrap_or(""))?;
    if count != net.count_params() {
        return Err(r.err(format!("expected {} parameters, header says {count}", net.count_params())));
    }
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let f = r.next_fields("")?;
        if f.len() != 1 {
            return Err(r.err("expected one parameter per line".into()));
        }
        params.push(r.num(f[0])?);
    }
    net.set_params(&params)?;
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let mut net = MlpNetwork::new(
            vec![2, 5, 5, 1],
            vec![ActivationSpec::sinusoidal(1.0, std::f64::consts::FRAC_PI_4), ActivationSpec::relu()],
            OutputMode::Heightfield,
            [20.0, 1.0, 0.0],
        )
        .unwrap();
        net.init_params(11);
        let back = from_text(&to_text(&net)).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn reports_line_of_error() {
        let mut net = MlpNetwork::uniform(vec![3, 2, 3], ActivationSpec::tanh(), OutputMode::Map3d, [1.0; 3]).unwrap();
        net.init_params(0);
        let text = to_text(&net).replace("tanh", "swish");
        match from_text(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
        let truncated: String = to_text(&net).lines().take(8).collect::<Vec<_>>().join("\n");
        assert!(from_text(&truncated).is_err());
    }
}
