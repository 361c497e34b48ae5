//! Text model format, schema `xnn/1`.
//!
//! Line oriented: every line starts with a field name followed by
//! whitespace-separated values. Array fields carry their shape in the header
//! line. Reals are written with 17 significant digits so a save/load cycle
//! reproduces every parameter bit for bit.
//!
//! ```text
//! schema xnn/1
//! input_dim 2
//! num_subnets 1
//! subnet_hidden 3
//! activation tanh
//! seed 7
//! standardization 1
//! means <p values>
//! stds <p values>
//! response_mean <v>
//! response_std <v>
//! mu <v>
//! betas 1 2
//! <p values>             (one line per subnetwork)
//! gammas 1
//! <K values>
//! subnet 0 2             (index, layer count)
//! layer 3 1 tanh         (out_dim, in_dim, activation)
//! weights <out*in values>
//! bias <out values>
//! ...
//! end
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::{Activation, DenseLayer, Subnetwork, XnnConfig, XnnModel};
use crate::error::{Result, XnnError};
use crate::train::StandardizationParams;

pub const SCHEMA_VERSION: &str = "xnn/1";

fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_reals(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(fmt_real).collect::<Vec<_>>().join(" ")
}

pub fn write_model<W: Write>(model: &XnnModel, mut out: W) -> Result<()> {
    model.validate()?;
    let cfg = &model.config;
    writeln!(out, "schema {SCHEMA_VERSION}")?;
    writeln!(out, "input_dim {}", cfg.input_dim)?;
    writeln!(out, "num_subnets {}", cfg.num_subnets)?;
    let hidden: Vec<String> = cfg.subnet_hidden.iter().map(|h| h.to_string()).collect();
    if hidden.is_empty() {
        writeln!(out, "subnet_hidden")?;
    } else {
        writeln!(out, "subnet_hidden {}", hidden.join(" "))?;
    }
    writeln!(out, "activation {}", cfg.activation.name())?;
    writeln!(out, "seed {}", cfg.seed)?;
    match &model.standardization {
        Some(s) => {
            writeln!(out, "standardization 1")?;
            writeln!(out, "means {}", fmt_reals(s.means.iter().copied()))?;
            writeln!(out, "stds {}", fmt_reals(s.stds.iter().copied()))?;
            writeln!(out, "response_mean {}", fmt_real(s.response_mean))?;
            writeln!(out, "response_std {}", fmt_real(s.response_std))?;
        }
        None => writeln!(out, "standardization 0")?,
    }
    writeln!(out, "mu {}", fmt_real(model.mu))?;
    writeln!(out, "betas {} {}", model.betas.nrows(), model.betas.ncols())?;
    for row in model.betas.rows() {
        writeln!(out, "{}", fmt_reals(row.iter().copied()))?;
    }
    writeln!(out, "gammas {}", model.gammas.len())?;
    writeln!(out, "{}", fmt_reals(model.gammas.iter().copied()))?;
    for (s, subnet) in model.subnets.iter().enumerate() {
        writeln!(out, "subnet {s} {}", subnet.layers.len())?;
        for layer in &subnet.layers {
            writeln!(
                out,
                "layer {} {} {}",
                layer.out_dim,
                layer.in_dim,
                layer.activation.name()
            )?;
            writeln!(out, "weights {}", fmt_reals(layer.weights.iter().copied()))?;
            writeln!(out, "bias {}", fmt_reals(layer.bias.iter().copied()))?;
        }
    }
    writeln!(out, "end")?;
    Ok(())
}

pub fn save_model(model: &XnnModel, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_model(model, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<XnnModel> {
    read_model(BufReader::new(File::open(path)?))
}

/// Parses and validates a model document. Nothing is returned unless the
/// whole document parses and the model passes [`XnnModel::validate`].
pub fn read_model<R: Read>(input: R) -> Result<XnnModel> {
    let mut lines = Lines::new(BufReader::new(input))?;

    let schema = lines.field_one("schema")?;
    if schema != SCHEMA_VERSION {
        return Err(XnnError::parse(
            "schema",
            format!("unsupported schema `{schema}`, expected `{SCHEMA_VERSION}`"),
        ));
    }
    let input_dim = parse_usize("input_dim", &lines.field_one("input_dim")?)?;
    let num_subnets = parse_usize("num_subnets", &lines.field_one("num_subnets")?)?;
    let subnet_hidden = lines
        .field("subnet_hidden")?
        .iter()
        .map(|v| parse_usize("subnet_hidden", v))
        .collect::<Result<Vec<_>>>()?;
    let activation_name = lines.field_one("activation")?;
    let activation = Activation::from_name(&activation_name).ok_or_else(|| {
        XnnError::parse("activation", format!("unknown activation `{activation_name}`"))
    })?;
    let seed = lines
        .field_one("seed")?
        .parse::<u64>()
        .map_err(|e| XnnError::parse("seed", e.to_string()))?;
    let config = XnnConfig {
        input_dim,
        num_subnets,
        subnet_hidden,
        activation,
        seed,
    };

    let standardization = match lines.field_one("standardization")?.as_str() {
        "0" => None,
        "1" => Some(StandardizationParams {
            means: parse_reals("means", &lines.field("means")?)?,
            stds: parse_reals("stds", &lines.field("stds")?)?,
            response_mean: parse_real("response_mean", &lines.field_one("response_mean")?)?,
            response_std: parse_real("response_std", &lines.field_one("response_std")?)?,
        }),
        other => {
            return Err(XnnError::parse(
                "standardization",
                format!("expected 0 or 1, found `{other}`"),
            ))
        }
    };

    let mu = parse_real("mu", &lines.field_one("mu")?)?;

    let shape = lines.field("betas")?;
    if shape.len() != 2 {
        return Err(XnnError::parse("betas", "header must give rows and columns"));
    }
    let (rows, cols) = (parse_usize("betas", &shape[0])?, parse_usize("betas", &shape[1])?);
    let mut beta_values = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let row = parse_reals("betas", &lines.bare_row(&format!("betas row {r}"))?)?;
        if row.len() != cols {
            return Err(XnnError::validation(
                "betas",
                format!("row {r} has {} entries, header says {cols}", row.len()),
            ));
        }
        beta_values.extend(row);
    }
    let betas = Array2::from_shape_vec((rows, cols), beta_values)
        .map_err(|e| XnnError::validation("betas", e.to_string()))?;

    let gamma_count = parse_usize("gammas", &lines.field_one("gammas")?)?;
    let gammas = parse_reals("gammas", &lines.bare_row("gammas values")?)?;
    if gammas.len() != gamma_count {
        return Err(XnnError::validation(
            "gammas",
            format!("header says {gamma_count} entries, found {}", gammas.len()),
        ));
    }

    let mut subnets = Vec::new();
    loop {
        let (key, values) = lines.next_record("subnet or end")?;
        match key.as_str() {
            "end" => break,
            "subnet" => {
                let field = format!("subnet {}", subnets.len());
                if values.len() != 2 {
                    return Err(XnnError::parse(field, "expected index and layer count"));
                }
                let index = parse_usize(&field, &values[0])?;
                if index != subnets.len() {
                    return Err(XnnError::validation(
                        field,
                        format!("out-of-order subnet index {index}"),
                    ));
                }
                let layer_count = parse_usize(&field, &values[1])?;
                let mut layers = Vec::with_capacity(layer_count);
                for l in 0..layer_count {
                    let lfield = format!("subnets[{index}].layers[{l}]");
                    let header = lines.field("layer")?;
                    if header.len() != 3 {
                        return Err(XnnError::parse(lfield, "expected out_dim in_dim activation"));
                    }
                    let out_dim = parse_usize(&lfield, &header[0])?;
                    let in_dim = parse_usize(&lfield, &header[1])?;
                    let activation = Activation::from_name(&header[2]).ok_or_else(|| {
                        XnnError::parse(&lfield, format!("unknown activation `{}`", header[2]))
                    })?;
                    let weights = parse_reals(&format!("{lfield}.weights"), &lines.field("weights")?)?;
                    let bias = parse_reals(&format!("{lfield}.bias"), &lines.field("bias")?)?;
                    layers.push(DenseLayer {
                        in_dim,
                        out_dim,
                        weights,
                        bias,
                        activation,
                    });
                }
                subnets.push(Subnetwork { layers });
            }
            other => {
                return Err(XnnError::parse(
                    "subnet",
                    format!("unexpected field `{other}`"),
                ))
            }
        }
    }

    let model = XnnModel {
        mu,
        betas,
        subnets,
        gammas,
        standardization,
        config,
    };
    model.validate()?;
    Ok(model)
}

fn parse_usize(field: &str, v: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|e| XnnError::parse(field, format!("`{v}`: {e}")))
}

fn parse_real(field: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|e| XnnError::parse(field, format!("`{v}`: {e}")))
}

fn parse_reals(field: &str, values: &[String]) -> Result<Vec<f64>> {
    values.iter().map(|v| parse_real(field, v)).collect()
}

/// Cursor over the non-empty lines of a model document.
struct Lines {
    records: std::vec::IntoIter<Vec<String>>,
}

impl Lines {
    fn new<R: BufRead>(reader: R) -> Result<Self> {
        let mut records = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let tokens: Vec<String> = line.split_whitespace().map(str::to_owned).collect();
            if !tokens.is_empty() {
                records.push(tokens);
            }
        }
        Ok(Self {
            records: records.into_iter(),
        })
    }

    fn next_record(&mut self, expected: &str) -> Result<(String, Vec<String>)> {
        let mut tokens = self
            .records
            .next()
            .ok_or_else(|| XnnError::parse(expected, "unexpected end of document"))?;
        let key = tokens.remove(0);
        Ok((key, tokens))
    }

    fn field(&mut self, name: &str) -> Result<Vec<String>> {
        let (key, values) = self.next_record(name)?;
        if key != name {
            return Err(XnnError::parse(name, format!("found `{key}` instead")));
        }
        Ok(values)
    }

    fn field_one(&mut self, name: &str) -> Result<String> {
        let mut values = self.field(name)?;
        if values.len() != 1 {
            return Err(XnnError::parse(
                name,
                format!("expected one value, found {}", values.len()),
            ));
        }
        Ok(values.remove(0))
    }

    /// A line that holds only values.
    fn bare_row(&mut self, name: &str) -> Result<Vec<String>> {
        self.records
            .next()
            .ok_or_else(|| XnnError::parse(name, "unexpected end of document"))
    }
}
