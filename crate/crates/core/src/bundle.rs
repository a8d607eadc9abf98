//! Versioned persistence of trained models.
//!
//! A bundle is a self-describing plain-text container: a version header, the
//! run configuration, then one section per sensor holding normalization
//! statistics, the autoencoder weights, the feature scaler, the one-class
//! SVM and the stored holdout indices. Numeric payloads are decimal with 17
//! significant digits, so `save` → `load` reproduces every score bit for
//! bit. Loading any other version fails loudly.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::features::FeatureScaler;
use crate::neural::{Activation, DenseLayer, DenseNetwork};
use crate::ocsvm::{KernelSpec, OcSvmModel};
use crate::scoring::SensorModel;
use crate::signals::NormalizationStats;
use crate::vae::{VaeMode, VaeModel};

const HEADER: &str = "shmdetect-bundle v1";

/// A run configuration plus every per-sensor trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub config: RunConfig,
    pub sensors: Vec<SensorModel>,
}

/// 17 significant digits: enough to reproduce any f64 exactly on parse.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

impl ModelBundle {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())
            .map_err(|e| Error::Data(format!("cannot write bundle {}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Data(format!("cannot read bundle {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(HEADER);
        out.push('\n');
        out.push_str("config-begin\n");
        out.push_str(&self.config.to_text());
        out.push_str("config-end\n");
        for sensor in &self.sensors {
            write_sensor(&mut out, sensor);
        }
        out.push_str("bundle-end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = Reader::new(text);
        let header = lines.next_line()?;
        if header != HEADER {
            return Err(Error::Data(format!(
                "unsupported bundle format {header:?}; this build reads {HEADER:?}"
            )));
        }
        lines.expect("config-begin")?;
        let mut config_text = String::new();
        loop {
            let line = lines.next_line()?;
            if line == "config-end" {
                break;
            }
            config_text.push_str(line);
            config_text.push('\n');
        }
        let config = RunConfig::parse(&config_text)?;

        let mut sensors = Vec::new();
        loop {
            let line = lines.next_line()?;
            if line == "bundle-end" {
                break;
            }
            let sensor_id = parse_tagged_u32(line, "sensor")?;
            sensors.push(read_sensor(&mut lines, sensor_id)?);
        }
        Ok(Self { config, sensors })
    }
}

fn write_sensor(out: &mut String, sensor: &SensorModel) {
    out.push_str(&format!("sensor {}\n", sensor.sensor_id));
    out.push_str(&format!(
        "normalization {} {}\n",
        fmt_f64(sensor.normalization.min),
        fmt_f64(sensor.normalization.max)
    ));
    out.push_str(&format!("holdout {}", sensor.holdout_indices.len()));
    for idx in &sensor.holdout_indices {
        out.push_str(&format!(" {idx}"));
    }
    out.push('\n');
    out.push_str(&format!(
        "scaler {} {} {} {}\n",
        fmt_f64(sensor.scaler.mean[0]),
        fmt_f64(sensor.scaler.mean[1]),
        fmt_f64(sensor.scaler.std[0]),
        fmt_f64(sensor.scaler.std[1])
    ));
    out.push_str(&format!("vae {} {}\n", sensor.vae.mode.name(), sensor.vae.latent_dim));
    write_network(out, "encoder", &sensor.vae.encoder);
    write_network(out, "decoder", &sensor.vae.decoder);
    match sensor.ocsvm.kernel {
        KernelSpec::Rbf { gamma } => out.push_str(&format!("ocsvm-kernel rbf {}\n", fmt_f64(gamma))),
        KernelSpec::Polynomial { order, coef0, scale } => out.push_str(&format!(
            "ocsvm-kernel polynomial {order} {} {}\n",
            fmt_f64(coef0),
            fmt_f64(scale)
        )),
        KernelSpec::Linear => out.push_str("ocsvm-kernel linear\n"),
    }
    out.push_str(&format!("ocsvm-nu {}\n", fmt_f64(sensor.ocsvm.nu)));
    out.push_str(&format!("ocsvm-rho {}\n", fmt_f64(sensor.ocsvm.rho)));
    out.push_str(&format!("ocsvm-tol {}\n", fmt_f64(sensor.ocsvm.boundary_tol)));
    out.push_str(&format!("ocsvm-training-size {}\n", sensor.ocsvm.training_size));
    out.push_str(&format!("ocsvm-alphas {}", sensor.ocsvm.alphas.len()));
    for alpha in &sensor.ocsvm.alphas {
        out.push_str(&format!(" {}", fmt_f64(*alpha)));
    }
    out.push('\n');
    for sv in &sensor.ocsvm.support_vectors {
        out.push_str("ocsvm-sv");
        for v in sv {
            out.push_str(&format!(" {}", fmt_f64(*v)));
        }
        out.push('\n');
    }
    out.push_str("sensor-end\n");
}

fn write_network(out: &mut String, tag: &str, net: &DenseNetwork) {
    out.push_str(&format!("{tag} {} {}\n", net.layers.len(), net.seed));
    for layer in &net.layers {
        out.push_str(&format!(
            "layer {} {} {}\n",
            layer.weights.nrows(),
            layer.weights.ncols(),
            layer.activation.name()
        ));
        for row in 0..layer.weights.nrows() {
            out.push('w');
            for col in 0..layer.weights.ncols() {
                out.push_str(&format!(" {}", fmt_f64(layer.weights[(row, col)])));
            }
            out.push('\n');
        }
        out.push('b');
        for v in layer.bias.iter() {
            out.push_str(&format!(" {}", fmt_f64(*v)));
        }
        out.push('\n');
    }
}

struct Reader<'a> {
    lines: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines(),
            line_no: 0,
        }
    }

    fn next_line(&mut self) -> Result<&'a str> {
        self.line_no += 1;
        self.lines
            .next()
            .ok_or_else(|| Error::Data(format!("bundle truncated at line {}", self.line_no)))
    }

    fn expect(&mut self, expected: &str) -> Result<()> {
        let line = self.next_line()?;
        if line != expected {
            return Err(Error::Data(format!(
                "bundle line {}: expected {expected:?}, got {line:?}",
                self.line_no
            )));
        }
        Ok(())
    }
}

fn parse_tagged_u32(line: &str, tag: &str) -> Result<u32> {
    let rest = line
        .strip_prefix(tag)
        .ok_or_else(|| Error::Data(format!("expected `{tag} <id>`, got {line:?}")))?;
    rest.trim()
        .parse()
        .map_err(|_| Error::Data(format!("bad id in {line:?}")))
}

fn parse_floats(fields: &[&str]) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .map_err(|_| Error::Data(format!("bad float {f:?} in bundle")))
        })
        .collect()
}

fn read_sensor(lines: &mut Reader<'_>, sensor_id: u32) -> Result<SensorModel> {
    // normalization
    let fields: Vec<&str> = lines.next_line()?.split_whitespace().collect();
    if fields.len() != 3 || fields[0] != "normalization" {
        return Err(Error::Data("expected normalization line".to_string()));
    }
    let values = parse_floats(&fields[1..])?;
    let normalization = NormalizationStats::new(values[0], values[1])?;

    // holdout
    let fields: Vec<&str> = lines.next_line()?.split_whitespace().collect();
    if fields.len() < 2 || fields[0] != "holdout" {
        return Err(Error::Data("expected holdout line".to_string()));
    }
    let count: usize = fields[1]
        .parse()
        .map_err(|_| Error::Data("bad holdout count".to_string()))?;
    if fields.len() != 2 + count {
        return Err(Error::Data("holdout count mismatch".to_string()));
    }
    let holdout_indices = fields[2..]
        .iter()
        .map(|f| f.parse::<usize>().map_err(|_| Error::Data("bad holdout index".to_string())))
        .collect::<Result<Vec<usize>>>()?;

    // scaler
    let fields: Vec<&str> = lines.next_line()?.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "scaler" {
        return Err(Error::Data("expected scaler line".to_string()));
    }
    let values = parse_floats(&fields[1..])?;
    let scaler = FeatureScaler {
        mean: [values[0], values[1]],
        std: [values[2], values[3]],
    };

    // vae header
    let fields: Vec<&str> = lines.next_line()?.split_whitespace().collect();
    if fields.len() != 3 || fields[0] != "vae" {
        return Err(Error::Data("expected vae line".to_string()));
    }
    let mode = VaeMode::from_name(fields[1])?;
    let latent_dim: usize = fields[2]
        .parse()
        .map_err(|_| Error::Data("bad latent dimension".to_string()))?;
    let encoder = read_network(lines, "encoder")?;
    let decoder = read_network(lines, "decoder")?;
    let vae = VaeModel {
        encoder,
        decoder,
        latent_dim,
        mode,
        normalization,
    };

    // one-class SVM
    let fields: Vec<&str> = lines.next_line()?.split_whitespace().collect();
    if fields.is_empty() || fields[0] != "ocsvm-kernel" {
        return Err(Error::Data("expected ocsvm-kernel line".to_string()));
    }
    let kernel = match fields.get(1).copied() {
        Some("rbf") if fields.len() == 3 => KernelSpec::Rbf {
            gamma: parse_floats(&fields[2..])?[0],
        },
        Some("polynomial") if fields.len() == 5 => {
            let order: u32 = fields[2]
                .parse()
                .map_err(|_| Error::Data("bad polynomial order".to_string()))?;
            let values = parse_floats(&fields[3..])?;
            KernelSpec::Polynomial {
                order,
                coef0: values[0],
                scale: values[1],
            }
        }
        Some("linear") if fields.len() == 2 => KernelSpec::Linear,
        _ => return Err(Error::Data(format!("bad kernel line {fields:?}"))),
    };
    let nu = read_tagged_f64(lines, "ocsvm-nu")?;
    let rho = read_tagged_f64(lines, "ocsvm-rho")?;
    let boundary_tol = read_tagged_f64(lines, "ocsvm-tol")?;
    let fields: Vec<&str> = lines.next_line()?.split_whitespace().collect();
    if fields.len() != 2 || fields[0] != "ocsvm-training-size" {
        return Err(Error::Data("expected ocsvm-training-size line".to_string()));
    }
    let training_size: usize = fields[1]
        .parse()
        .map_err(|_| Error::Data("bad training size".to_string()))?;
    let fields: Vec<&str> = lines.next_line()?.split_whitespace().collect();
    if fields.len() < 2 || fields[0] != "ocsvm-alphas" {
        return Err(Error::Data("expected ocsvm-alphas line".to_string()));
    }
    let sv_count: usize = fields[1]
        .parse()
        .map_err(|_| Error::Data("bad support-vector count".to_string()))?;
    let alphas = parse_floats(&fields[2..])?;
    if alphas.len() != sv_count {
        return Err(Error::Data("alpha count mismatch".to_string()));
    }
    let mut support_vectors = Vec::with_capacity(sv_count);
    for _ in 0..sv_count {
        let fields: Vec<&str> = lines.next_line()?.split_whitespace().collect();
        if fields.is_empty() || fields[0] != "ocsvm-sv" {
            return Err(Error::Data("expected ocsvm-sv line".to_string()));
        }
        support_vectors.push(parse_floats(&fields[1..])?);
    }
    lines.expect("sensor-end")?;

    Ok(SensorModel {
        sensor_id,
        normalization,
        vae,
        scaler,
        ocsvm: OcSvmModel {
            support_vectors,
            alphas,
            rho,
            kernel,
            nu,
            training_size,
            boundary_tol,
        },
        holdout_indices,
    })
}

fn read_tagged_f64(lines: &mut Reader<'_>, tag: &str) -> Result<f64> {
    let fields: Vec<&str> = lines.next_line()?.split_whitespace().collect();
    if fields.len() != 2 || fields[0] != tag {
        return Err(Error::Data(format!("expected `{tag} <value>` line")));
    }
    Ok(parse_floats(&fields[1..])?[0])
}

fn read_network(lines: &mut Reader<'_>, tag: &str) -> Result<DenseNetwork> {
    let fields: Vec<&str> = lines.next_line()?.split_whitespace().collect();
    if fields.len() != 3 || fields[0] != tag {
        return Err(Error::Data(format!("expected `{tag} <layers> <seed>` line")));
    }
    let layer_count: usize = fields[1]
        .parse()
        .map_err(|_| Error::Data("bad layer count".to_string()))?;
    let seed: u64 = fields[2]
        .parse()
        .map_err(|_| Error::Data("bad network seed".to_string()))?;
    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let fields: Vec<&str> = lines.next_line()?.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "layer" {
            return Err(Error::Data("expected layer line".to_string()));
        }
        let rows: usize = fields[1].parse().map_err(|_| Error::Data("bad rows".to_string()))?;
        let cols: usize = fields[2].parse().map_err(|_| Error::Data("bad cols".to_string()))?;
        let activation = Activation::from_name(fields[3])?;
        let mut weights = DMatrix::zeros(rows, cols);
        for row in 0..rows {
            let fields: Vec<&str> = lines.next_line()?.split_whitespace().collect();
            if fields.len() != 1 + cols || fields[0] != "w" {
                return Err(Error::Data(format!("bad weight row (want {cols} values)")));
            }
            for (col, value) in parse_floats(&fields[1..])?.into_iter().enumerate() {
                weights[(row, col)] = value;
            }
        }
        let fields: Vec<&str> = lines.next_line()?.split_whitespace().collect();
        if fields.len() != 1 + rows || fields[0] != "b" {
            return Err(Error::Data(format!("bad bias line (want {rows} values)")));
        }
        let bias = DVector::from_vec(parse_floats(&fields[1..])?);
        layers.push(DenseLayer {
            weights,
            bias,
            activation,
        });
    }
    Ok(DenseNetwork { layers, seed })
}
