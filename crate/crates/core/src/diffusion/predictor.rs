//! Noise predictors and the JSON weight format.
//!
//! A weight file looks like
//!
//! ```json
//! {"version": 1,
//!  "layers": [{"type": "dense", "in": 3, "out": 2,
//!              "w": [w00, w01, w02, w10, w11, w12], "b": [b0, b1],
//!              "act": "relu"}]}
//! ```
//!
//! `w` is the `out × in` weight matrix flattened row-major, so output `o` is
//! `b[o] + Σ_i w[o·in + i]·x[i]`. The network input is `[z_t ‖ h_r ‖ t/T]`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WEIGHTS_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(rename = "in")]
    pub in_dim: usize,
    #[serde(rename = "out")]
    pub out_dim: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub act: Activation,
}

impl DenseLayer {
    pub fn new(in_dim: usize, out_dim: usize, w: Vec<f64>, b: Vec<f64>, act: Activation) -> Self {
        Self {
            kind: "dense".into(),
            in_dim,
            out_dim,
            w,
            b,
            act,
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.w
            .chunks_exact(self.in_dim)
            .zip(&self.b)
            .map(|(row, b)| {
                let v = b + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
                match self.act {
                    Activation::Relu => v.max(0.0),
                    Activation::Identity => v,
                }
            })
            .collect()
    }
}

/// Validated feed-forward network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    version: u32,
    layers: Vec<DenseLayer>,
}

impl Mlp {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        let mlp = Self {
            version: WEIGHTS_VERSION,
            layers,
        };
        mlp.validate()?;
        Ok(mlp)
    }

    fn validate(&self) -> Result<()> {
        if self.version != WEIGHTS_VERSION {
            return Err(Error::Format(format!("unsupported weights version {}", self.version)));
        }
        if self.layers.is_empty() {
            return Err(Error::Format("network has no layers".into()));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            let chain = |detail: String| Error::DimChain { layer: i, detail };
            if layer.kind != "dense" {
                return Err(Error::Format(format!("layer {i}: unknown type {:?}", layer.kind)));
            }
            if layer.in_dim == 0 || layer.out_dim == 0 {
                return Err(chain("zero-sized layer".into()));
            }
            if layer.w.len() != layer.in_dim * layer.out_dim {
                return Err(chain(format!(
                    "weights hold {} values, expected {} x {}",
                    layer.w.len(),
                    layer.out_dim,
                    layer.in_dim
                )));
            }
            if layer.b.len() != layer.out_dim {
                return Err(chain(format!("bias holds {} values, expected {}", layer.b.len(), layer.out_dim)));
            }
            if i > 0 && self.layers[i - 1].out_dim != layer.in_dim {
                return Err(chain(format!(
                    "input {} does not match previous output {}",
                    layer.in_dim,
                    self.layers[i - 1].out_dim
                )));
            }
            if layer.w.iter().chain(&layer.b).any(|v| !v.is_finite()) {
                return Err(Error::Format(format!("layer {i}: non-finite parameter")));
            }
        }
        Ok(())
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut h = x.to_vec();
        for layer in &self.layers {
            h = layer.forward(&h);
        }
        Ok(h)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("weights serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mlp: Self = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        mlp.validate()?;
        Ok(mlp)
    }
}

/// Noise predictor `ε_θ(z_t, h_r, t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictor {
    /// Returns the stored noise regardless of input.
    Oracle(Vec<f64>),
    Zero,
    Mlp(Mlp),
}

impl Predictor {
    pub fn predict_eps(&self, z_t: &[f64], h_r: &[f64], t: usize, t_steps: usize) -> Result<Vec<f64>> {
        let eps = match self {
            Self::Oracle(eps) => eps.clone(),
            Self::Zero => vec![0.0; z_t.len()],
            Self::Mlp(mlp) => {
                let mut input = Vec::with_capacity(z_t.len() + h_r.len() + 1);
                input.extend_from_slice(z_t);
                input.extend_from_slice(h_r);
                input.push(t as f64 / t_steps as f64);
                mlp.forward(&input)?
            }
        };
        if eps.len() != z_t.len() {
            return Err(Error::DimMismatch {
                expected: z_t.len(),
                got: eps.len(),
            });
        }
        Ok(eps)
    }
}

pub fn load_predictor(path: impl AsRef<Path>) -> Result<Predictor> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(Predictor::Mlp(Mlp::from_json(&text)?))
}

pub fn save_predictor(path: impl AsRef<Path>, mlp: &Mlp) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, mlp.to_json()).map_err(|e| Error::io(path, e))
}
