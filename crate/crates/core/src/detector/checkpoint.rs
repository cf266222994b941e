//! Text checkpoint format for trained models.
//!
//! Layout (version 1), line oriented, UTF-8:
//!
//! ```text
//! evcoord-model v1
//! kind <mlp|gru>
//! hidden_activation <sigmoid|tanh|relu|softsign>
//! layer_sizes <n0> <n1> ...        (mlp: input, hidden..., output)
//! widths <n1> <n2> ...             (gru: stacked layer widths)
//! tensor <name> <rows> <cols>
//! <rows lines of cols numbers>     (row-major)
//! ...
//! end
//! ```
//!
//! Numbers use the shortest decimal form that round-trips f64 exactly, so
//! save followed by load reproduces the model bit for bit. GRU tensor
//! names are `layer<i>.{u_z,w_z,b_z,u_r,w_r,b_r,u_h,w_h,b_h}` plus
//! `head.v` and `head.b`; MLP names are `layer<i>.{weights,bias}`.
//! Biases are stored as 1-row tensors.

use std::fmt::Write as _;

use super::{Activation, DetectorError, Gru, GruLayer, Matrix, Mlp, Model, OUTPUT_WIDTH};

const MAGIC: &str = "evcoord-model v1";

/// Serializes a model to the versioned text format.
pub fn save_model(model: &Model) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    match model {
        Model::Mlp(mlp) => {
            let _ = writeln!(out, "kind mlp");
            let _ = writeln!(out, "hidden_activation {}", mlp.hidden_activation.name());
            let sizes: Vec<String> = mlp.layer_sizes().iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "layer_sizes {}", sizes.join(" "));
            for (i, layer) in mlp.layers.iter().enumerate() {
                write_tensor(&mut out, &format!("layer{i}.weights"), &layer.weights);
                write_vector(&mut out, &format!("layer{i}.bias"), &layer.bias);
            }
        }
        Model::Gru(gru) => {
            let _ = writeln!(out, "kind gru");
            let _ = writeln!(out, "hidden_activation {}", gru.hidden_activation.name());
            let widths: Vec<String> = gru.widths().iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "widths {}", widths.join(" "));
            for (i, layer) in gru.layers.iter().enumerate() {
                write_tensor(&mut out, &format!("layer{i}.u_z"), &layer.u_z);
                write_tensor(&mut out, &format!("layer{i}.w_z"), &layer.w_z);
                write_vector(&mut out, &format!("layer{i}.b_z"), &layer.b_z);
                write_tensor(&mut out, &format!("layer{i}.u_r"), &layer.u_r);
                write_tensor(&mut out, &format!("layer{i}.w_r"), &layer.w_r);
                write_vector(&mut out, &format!("layer{i}.b_r"), &layer.b_r);
                write_tensor(&mut out, &format!("layer{i}.u_h"), &layer.u_h);
                write_tensor(&mut out, &format!("layer{i}.w_h"), &layer.w_h);
                write_vector(&mut out, &format!("layer{i}.b_h"), &layer.b_h);
            }
            write_tensor(&mut out, "head.v", &gru.head_v);
            write_vector(&mut out, "head.b", &gru.head_b);
        }
    }
    out.push_str("end\n");
    out
}

fn write_tensor(out: &mut String, name: &str, m: &Matrix) {
    let _ = writeln!(out, "tensor {name} {} {}", m.rows, m.cols);
    for r in 0..m.rows {
        let row: Vec<String> = m.row(r).iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

fn write_vector(out: &mut String, name: &str, v: &[f64]) {
    let m = Matrix {
        rows: 1,
        cols: v.len(),
        data: v.to_vec(),
    };
    write_tensor(out, name, &m);
}

struct Reader<'a> {
    lines: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> Reader<'a> {
    fn next(&mut self) -> Result<&'a str, DetectorError> {
        self.line_no += 1;
        self.lines
            .next()
            .ok_or_else(|| DetectorError::BadCheckpoint("unexpected end of file".into()))
    }

    fn bad(&self, msg: impl std::fmt::Display) -> DetectorError {
        DetectorError::BadCheckpoint(format!("line {}: {msg}", self.line_no))
    }
}

/// Parses a model from the text format of [`save_model`].
pub fn load_model(text: &str) -> Result<Model, DetectorError> {
    let mut r = Reader {
        lines: text.lines(),
        line_no: 0,
    };
    if r.next()? != MAGIC {
        return Err(r.bad(format!("expected header {MAGIC:?}")));
    }
    let kind_line = r.next()?;
    let kind = kind_line
        .strip_prefix("kind ")
        .ok_or_else(|| r.bad("expected `kind`"))?
        .to_string();
    let act_line = r.next()?;
    let act_name = act_line
        .strip_prefix("hidden_activation ")
        .ok_or_else(|| r.bad("expected `hidden_activation`"))?;
    let hidden_activation = Activation::from_name(act_name)
        .ok_or_else(|| r.bad(format!("unknown activation {act_name:?}")))?;

    match kind.as_str() {
        "mlp" => load_mlp(&mut r, hidden_activation),
        "gru" => load_gru(&mut r, hidden_activation),
        other => Err(r.bad(format!("unknown kind {other:?}"))),
    }
}

fn parse_usizes(line: &str, prefix: &str, r: &Reader) -> Result<Vec<usize>, DetectorError> {
    let rest = line
        .strip_prefix(prefix)
        .ok_or_else(|| r.bad(format!("expected `{}`", prefix.trim())))?;
    rest.split_whitespace()
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| r.bad(format!("bad integer {s:?}")))
        })
        .collect()
}

fn read_tensor(r: &mut Reader, expect_name: &str) -> Result<Matrix, DetectorError> {
    let header = r.next()?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "tensor" {
        return Err(r.bad(format!("expected tensor header, got {header:?}")));
    }
    if parts[1] != expect_name {
        return Err(r.bad(format!("expected tensor {expect_name:?}, got {:?}", parts[1])));
    }
    let rows: usize = parts[2].parse().map_err(|_| r.bad("bad row count"))?;
    let cols: usize = parts[3].parse().map_err(|_| r.bad("bad col count"))?;
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let line = r.next()?;
        let before = data.len();
        for field in line.split_whitespace() {
            let v: f64 = field
                .parse()
                .map_err(|_| r.bad(format!("bad number {field:?}")))?;
            data.push(v);
        }
        if data.len() - before != cols {
            return Err(r.bad(format!(
                "expected {cols} values, got {}",
                data.len() - before
            )));
        }
    }
    Ok(Matrix { rows, cols, data })
}

fn read_vector(r: &mut Reader, expect_name: &str, len: usize) -> Result<Vec<f64>, DetectorError> {
    let m = read_tensor(r, expect_name)?;
    if m.rows != 1 || m.cols != len {
        return Err(r.bad(format!(
            "expected {expect_name} of length {len}, got {}x{}",
            m.rows, m.cols
        )));
    }
    Ok(m.data)
}

fn expect_end(r: &mut Reader) -> Result<(), DetectorError> {
    let line = r.next()?;
    if line != "end" {
        return Err(r.bad(format!("expected `end`, got {line:?}")));
    }
    Ok(())
}

fn load_mlp(r: &mut Reader, hidden_activation: Activation) -> Result<Model, DetectorError> {
    let sizes_line = r.next()?;
    let sizes = parse_usizes(sizes_line, "layer_sizes ", r)?;
    if sizes.len() < 2 {
        return Err(r.bad("layer_sizes needs at least input and output"));
    }
    let mut layers = Vec::with_capacity(sizes.len() - 1);
    for (i, pair) in sizes.windows(2).enumerate() {
        let weights = read_tensor(r, &format!("layer{i}.weights"))?;
        if weights.rows != pair[1] || weights.cols != pair[0] {
            return Err(r.bad(format!("layer{i} shape mismatch")));
        }
        let bias = read_vector(r, &format!("layer{i}.bias"), pair[1])?;
        layers.push(super::DenseLayer { weights, bias });
    }
    expect_end(r)?;
    Ok(Model::Mlp(Mlp {
        layers,
        hidden_activation,
    }))
}

fn load_gru(r: &mut Reader, hidden_activation: Activation) -> Result<Model, DetectorError> {
    let widths_line = r.next()?;
    let widths = parse_usizes(widths_line, "widths ", r)?;
    if widths.is_empty() {
        return Err(r.bad("gru needs at least one layer"));
    }
    let mut layers = Vec::with_capacity(widths.len());
    let mut in_dim = 1;
    for (i, &n) in widths.iter().enumerate() {
        let check = |m: &Matrix, rows, cols, what: &str| {
            if m.rows != rows || m.cols != cols {
                Err(DetectorError::BadCheckpoint(format!(
                    "layer{i}.{what}: expected {rows}x{cols}, got {}x{}",
                    m.rows, m.cols
                )))
            } else {
                Ok(())
            }
        };
        let u_z = read_tensor(r, &format!("layer{i}.u_z"))?;
        check(&u_z, n, in_dim, "u_z")?;
        let w_z = read_tensor(r, &format!("layer{i}.w_z"))?;
        check(&w_z, n, n, "w_z")?;
        let b_z = read_vector(r, &format!("layer{i}.b_z"), n)?;
        let u_r = read_tensor(r, &format!("layer{i}.u_r"))?;
        check(&u_r, n, in_dim, "u_r")?;
        let w_r = read_tensor(r, &format!("layer{i}.w_r"))?;
        check(&w_r, n, n, "w_r")?;
        let b_r = read_vector(r, &format!("layer{i}.b_r"), n)?;
        let u_h = read_tensor(r, &format!("layer{i}.u_h"))?;
        check(&u_h, n, in_dim, "u_h")?;
        let w_h = read_tensor(r, &format!("layer{i}.w_h"))?;
        check(&w_h, n, n, "w_h")?;
        let b_h = read_vector(r, &format!("layer{i}.b_h"), n)?;
        layers.push(GruLayer {
            u_z,
            w_z,
            b_z,
            u_r,
            w_r,
            b_r,
            u_h,
            w_h,
            b_h,
        });
        in_dim = n;
    }
    let head_v = read_tensor(r, "head.v")?;
    if head_v.rows != OUTPUT_WIDTH || head_v.cols != *widths.last().unwrap() {
        return Err(r.bad("head.v shape mismatch"));
    }
    let head_b = read_vector(r, "head.b", OUTPUT_WIDTH)?;
    expect_end(r)?;
    Ok(Model::Gru(Gru {
        layers,
        head_v,
        head_b,
        hidden_activation,
    }))
}

#[cfg(test)]
mod tests {
    use super::super::{ArchSpec, InitKind, ModelKind};
    use super::*;

    #[test]
    fn mlp_round_trip_is_exact() {
        let model = Model::build(
            &ArchSpec {
                kind: ModelKind::Mlp,
                hidden_layers: 2,
                width: 7,
                hidden_activation: Activation::Relu,
            },
            InitKind::Normal,
            42,
        );
        let text = save_model(&model);
        let back = load_model(&text).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn gru_round_trip_is_exact() {
        let model = Model::build(
            &ArchSpec {
                kind: ModelKind::Gru,
                hidden_layers: 2,
                width: 5,
                hidden_activation: Activation::Softsign,
            },
            InitKind::Glorot,
            7,
        );
        let text = save_model(&model);
        let back = load_model(&text).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn rejects_corrupt_header() {
        assert!(matches!(
            load_model("not a model\n"),
            Err(DetectorError::BadCheckpoint(_))
        ));
    }

    #[test]
    fn rejects_shape_mismatch() {
        let model = Model::build(
            &ArchSpec {
                kind: ModelKind::Mlp,
                hidden_layers: 1,
                width: 3,
                hidden_activation: Activation::Tanh,
            },
            InitKind::Uniform,
            1,
        );
        let text = save_model(&model).replace("layer_sizes 48 3 2", "layer_sizes 48 4 2");
        assert!(load_model(&text).is_err());
    }
}
