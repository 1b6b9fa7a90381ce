//! Networks, input regions, and output specifications.
//!
//! A [`Network`] is a dense multi-layer perceptron with ReLU activations
//! between consecutive affine layers and none after the last one. Verification
//! queries are phrased canonically as "f(x) > 0 for all x in the region",
//! where f is the scalar output of a network whose specification row has
//! already been merged into the final layer.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VerifierError};

/// One affine layer: `z = weight · input + bias`.
///
/// `weight` has one row per output neuron (row-major in the file format).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    pub fn new(weight: Array2<f64>, bias: Array1<f64>) -> Result<Self> {
        if weight.nrows() != bias.len() {
            return Err(VerifierError::Dimension(format!(
                "weight has {} rows but bias has {} entries",
                weight.nrows(),
                bias.len()
            )));
        }
        if weight.iter().any(|v| !v.is_finite()) || bias.iter().any(|v| !v.is_finite()) {
            return Err(VerifierError::NonFinite("layer weight/bias".into()));
        }
        Ok(Self { weight, bias })
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }
}

/// A validated feedforward ReLU network.
///
/// Layers are stored in evaluation order. With `L` layers there are `L − 1`
/// hidden pre-activation vectors; hidden index `h ∈ 0..L−1` refers to the
/// input of the ReLU applied after `layers[h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(VerifierError::Dimension("network has no layers".into()));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(VerifierError::Dimension(format!(
                    "layer {} outputs {} values but layer {} expects {}",
                    k,
                    pair[0].out_dim(),
                    k + 1,
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer(&self, k: usize) -> &Layer {
        &self.layers[k]
    }

    /// Number of affine layers, `L`.
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Number of ReLU (hidden) layers, `L − 1`.
    pub fn num_hidden(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    /// Widths of the hidden pre-activation vectors, in order.
    pub fn hidden_dims(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(Layer::out_dim)
            .collect()
    }

    fn check_input(&self, x: &Array1<f64>) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(VerifierError::Dimension(format!(
                "input has {} entries, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Raw forward pass; returns the final affine layer's output (no ReLU).
    pub fn forward(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        self.check_input(x)?;
        let mut v = x.clone();
        for (k, layer) in self.layers.iter().enumerate() {
            v = layer.weight.dot(&v) + &layer.bias;
            if k + 1 < self.layers.len() {
                v.mapv_inplace(|z| z.max(0.0));
            }
        }
        Ok(v)
    }

    /// Exact scalar evaluation of a merged (single-output) network.
    pub fn forward_eval(&self, x: &Array1<f64>) -> Result<f64> {
        if self.output_dim() != 1 {
            return Err(VerifierError::NotScalarOutput {
                got: self.output_dim(),
            });
        }
        Ok(self.forward(x)?[0])
    }

    /// Forward pass that also records every hidden pre-activation vector.
    pub fn forward_with_preacts(&self, x: &Array1<f64>) -> Result<(Vec<Array1<f64>>, Array1<f64>)> {
        self.check_input(x)?;
        let mut preacts = Vec::with_capacity(self.num_hidden());
        let mut v = x.clone();
        for (k, layer) in self.layers.iter().enumerate() {
            let z = layer.weight.dot(&v) + &layer.bias;
            if k + 1 < self.layers.len() {
                preacts.push(z.clone());
                v = z.mapv(|e| e.max(0.0));
            } else {
                v = z;
            }
        }
        Ok((preacts, v))
    }

    /// Fold a specification row into the final layer, producing a
    /// single-output network computing `spec_row · raw_output + constant`.
    pub fn merge_specification(&self, spec_row: &Array1<f64>, constant: f64) -> Result<Network> {
        let last = self.layers.last().unwrap();
        if spec_row.len() != last.out_dim() {
            return Err(VerifierError::Dimension(format!(
                "specification row has {} entries, raw output has {}",
                spec_row.len(),
                last.out_dim()
            )));
        }
        let merged_w = spec_row
            .dot(&last.weight)
            .into_shape((1, last.in_dim()))
            .expect("row reshape");
        let merged_b = Array1::from_elem(1, spec_row.dot(&last.bias) + constant);
        let mut layers = self.layers[..self.layers.len() - 1].to_vec();
        layers.push(Layer::new(merged_w, merged_b)?);
        Network::new(layers)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Network> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| VerifierError::Load {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_json_str(&text).map_err(|e| VerifierError::Load {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json_string()).map_err(|e| VerifierError::Load {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    pub fn from_json_str(text: &str) -> Result<Network> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| VerifierError::Load {
            path: "<json>".into(),
            reason: format!("model parse: {e}"),
        })?;
        let mut layers = Vec::with_capacity(file.layers.len());
        for (k, raw) in file.layers.into_iter().enumerate() {
            let rows = raw.weight.len();
            let cols = raw.weight.first().map_or(0, Vec::len);
            if rows == 0 || cols == 0 {
                return Err(VerifierError::Dimension(format!("layer {k}: empty weight")));
            }
            if raw.weight.iter().any(|r| r.len() != cols) {
                return Err(VerifierError::Dimension(format!(
                    "layer {k}: ragged weight rows"
                )));
            }
            let flat: Vec<f64> = raw.weight.into_iter().flatten().collect();
            let weight = Array2::from_shape_vec((rows, cols), flat).expect("weight shape");
            layers.push(Layer::new(weight, Array1::from_vec(raw.bias))?);
        }
        Network::new(layers)
    }

    pub fn to_json_string(&self) -> String {
        let file = ModelFile {
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    weight: l.weight.rows().into_iter().map(|r| r.to_vec()).collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("model serialization")
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    weight: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

/// Norm order of the input ball; `Inf` is the canonical verification case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Norm {
    Inf,
    /// Finite p ≥ 1.
    P(f64),
}

impl Norm {
    /// Dual exponent q with 1/p + 1/q = 1, as used by Hölder concretization.
    pub fn dual(self) -> Norm {
        match self {
            Norm::Inf => Norm::P(1.0),
            Norm::P(p) if p == 1.0 => Norm::Inf,
            Norm::P(p) => Norm::P(p / (p - 1.0)),
        }
    }

    pub fn vector_norm(self, v: &Array1<f64>) -> f64 {
        match self {
            Norm::Inf => v.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
            Norm::P(p) if p == 1.0 => v.iter().map(|x| x.abs()).sum(),
            Norm::P(p) => v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p),
        }
    }
}

impl std::fmt::Display for Norm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Norm::Inf => write!(f, "inf"),
            Norm::P(p) => write!(f, "{p}"),
        }
    }
}

/// The input region: an ℓp ball of radius `epsilon` around `center`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputRegion {
    pub center: Array1<f64>,
    pub epsilon: f64,
    pub norm: Norm,
}

impl InputRegion {
    pub fn linf(center: Array1<f64>, epsilon: f64) -> Result<Self> {
        Self::new(center, epsilon, Norm::Inf)
    }

    pub fn new(center: Array1<f64>, epsilon: f64, norm: Norm) -> Result<Self> {
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(VerifierError::NonFinite(format!(
                "epsilon must be finite and nonnegative, got {epsilon}"
            )));
        }
        if center.iter().any(|v| !v.is_finite()) {
            return Err(VerifierError::NonFinite("region center".into()));
        }
        if let Norm::P(p) = norm {
            // Rejects NaN along with p < 1 — either breaks the norm axioms.
            if p < 1.0 || p.is_nan() {
                return Err(VerifierError::UnsupportedNorm {
                    op: "InputRegion",
                    norm: p.to_string(),
                });
            }
        }
        Ok(Self {
            center,
            epsilon,
            norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Membership test (used by oracles and witness re-checks).
    pub fn contains(&self, x: &Array1<f64>, tol: f64) -> bool {
        if x.len() != self.center.len() {
            return false;
        }
        let diff = x - &self.center;
        self.norm.vector_norm(&diff) <= self.epsilon + tol
    }

    /// Clamp a point onto the region (ℓ∞ only; other norms keep the center).
    pub fn project(&self, x: &Array1<f64>) -> Array1<f64> {
        match self.norm {
            Norm::Inf => {
                let mut out = x.clone();
                for (o, c) in out.iter_mut().zip(self.center.iter()) {
                    *o = o.max(c - self.epsilon).min(c + self.epsilon);
                }
                out
            }
            Norm::P(_) => self.center.clone(),
        }
    }
}

/// Linear output specification: row `j` asserts
/// `out_coeffs[j] · raw_output(x) + out_consts[j] ≥ 0` for all x in the
/// region; a violation is a point where the row evaluates strictly negative.
#[derive(Debug, Clone, PartialEq)]
pub struct Specification {
    pub out_coeffs: Array2<f64>,
    pub out_consts: Array1<f64>,
}

impl Specification {
    pub fn new(out_coeffs: Array2<f64>, out_consts: Array1<f64>) -> Result<Self> {
        if out_coeffs.nrows() == 0 {
            return Err(VerifierError::Dimension(
                "specification needs at least one row".into(),
            ));
        }
        if out_coeffs.nrows() != out_consts.len() {
            return Err(VerifierError::Dimension(format!(
                "{} spec rows but {} constants",
                out_coeffs.nrows(),
                out_consts.len()
            )));
        }
        if out_coeffs.iter().any(|v| !v.is_finite()) || out_consts.iter().any(|v| !v.is_finite()) {
            return Err(VerifierError::NonFinite("specification".into()));
        }
        Ok(Self {
            out_coeffs,
            out_consts,
        })
    }

    pub fn num_rows(&self) -> usize {
        self.out_coeffs.nrows()
    }

    pub fn row(&self, j: usize) -> (Array1<f64>, f64) {
        (self.out_coeffs.row(j).to_owned(), self.out_consts[j])
    }
}

/// A parsed property file: the region plus the statement rows to verify on it.
#[derive(Debug, Clone, PartialEq)]
pub struct Property {
    pub region: InputRegion,
    pub spec: Specification,
}

impl Property {
    pub fn load(path: impl AsRef<Path>) -> Result<Property> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| VerifierError::Load {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_json_str(&text).map_err(|e| VerifierError::Load {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    pub fn from_json_str(text: &str) -> Result<Property> {
        let file: PropertyFile = serde_json::from_str(text).map_err(|e| VerifierError::Load {
            path: "<json>".into(),
            reason: format!("property parse: {e}"),
        })?;
        let norm = match file.p {
            None => Norm::Inf,
            Some(NormRepr::Name(s)) if s == "inf" => Norm::Inf,
            Some(NormRepr::Name(s)) => {
                return Err(VerifierError::UnsupportedNorm {
                    op: "property file",
                    norm: s,
                })
            }
            Some(NormRepr::Value(p)) => Norm::P(p),
        };
        let region = InputRegion::new(Array1::from_vec(file.x0), file.epsilon, norm)?;
        let rows = file.spec_rows.len();
        let cols = file.spec_rows.first().map_or(0, Vec::len);
        if file.spec_rows.iter().any(|r| r.len() != cols) {
            return Err(VerifierError::Dimension("ragged spec_rows".into()));
        }
        let flat: Vec<f64> = file.spec_rows.into_iter().flatten().collect();
        let coeffs = Array2::from_shape_vec((rows, cols), flat)
            .map_err(|e| VerifierError::Dimension(e.to_string()))?;
        let spec = Specification::new(coeffs, Array1::from_vec(file.spec_consts))?;
        Ok(Property { region, spec })
    }

    pub fn to_json_string(&self) -> String {
        let file = PropertyFile {
            x0: self.region.center.to_vec(),
            epsilon: self.region.epsilon,
            p: Some(match self.region.norm {
                Norm::Inf => NormRepr::Name("inf".into()),
                Norm::P(p) => NormRepr::Value(p),
            }),
            spec_rows: self
                .spec
                .out_coeffs
                .rows()
                .into_iter()
                .map(|r| r.to_vec())
                .collect(),
            spec_consts: self.spec.out_consts.to_vec(),
        };
        serde_json::to_string_pretty(&file).expect("property serialization")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json_string()).map_err(|e| VerifierError::Load {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct PropertyFile {
    x0: Vec<f64>,
    epsilon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<NormRepr>,
    spec_rows: Vec<Vec<f64>>,
    spec_consts: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NormRepr {
    Name(String),
    Value(f64),
}
