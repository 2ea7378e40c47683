//! Inference for the MLP and stacked-GRU VN selectors, and the weight container.
//!
//! Container layout: the 7 magic bytes `MRBPNN\x01`, a little-endian `u32`
//! byte length, that many bytes of JSON metadata ([`ModelMeta`]), then every
//! tensor of the manifest in order as row-major little-endian `f32`.
//!
//! GRU tensors stack the three gates row-wise in the order reset (r), update
//! (u), candidate (n):
//!
//! ```text
//! r  = σ(W_ir x + b_ir + W_hr h + b_hr)
//! u  = σ(W_iu x + b_iu + W_hu h + b_hu)
//! n̂  = tanh(W_in x + b_in + r ∘ (W_hn h + b_hn))
//! h' = (1 - u) ∘ n̂ + u ∘ h
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamRng;

pub const WEIGHTS_MAGIC: &[u8; 7] = b"MRBPNN\x01";

/// First hidden width of the MLPA model on D2 inputs.
pub const MLPA_D2_FIRST_HIDDEN: usize = 155;
pub const MLPB_HIDDEN: usize = 1835;
pub const MLPB_HIDDEN_LAYERS: usize = 7;
pub const GRU_LAYERS: usize = 5;
pub const GRU_TIME_STEPS: usize = 5;
pub const GRU_HIDDEN_FACTOR: usize = 6;
pub const DROPOUT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Mlp,
    StackedGru,
}

/// Network input representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    /// Received values `y` (length n).
    D1,
    /// `(|L^ch|, s^ch)` (length n + m).
    D2,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

impl TensorInfo {
    fn new(name: impl Into<String>, shape: &[usize]) -> Self {
        TensorInfo {
            name: name.into(),
            shape: shape.to_vec(),
        }
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Architecture descriptor and tensor manifest.
///
/// `dims` is `[input, hidden..., output]` for MLPs and `[input, hidden, output]`
/// for stacked GRUs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub architecture: Architecture,
    pub input_kind: InputKind,
    pub dims: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gru_layers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_steps: Option<usize>,
    /// Training-time only; ignored at inference.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dropout: Option<f64>,
    pub tensors: Vec<TensorInfo>,
}

impl ModelMeta {
    pub fn mlp(input_kind: InputKind, dims: Vec<usize>) -> Result<Self> {
        let mut meta = ModelMeta {
            architecture: Architecture::Mlp,
            input_kind,
            dims,
            gru_layers: None,
            time_steps: None,
            dropout: Some(DROPOUT),
            tensors: Vec::new(),
        };
        meta.tensors = meta.expected_manifest()?;
        Ok(meta)
    }

    pub fn stacked_gru(
        input_kind: InputKind,
        input: usize,
        hidden: usize,
        layers: usize,
        time_steps: usize,
        output: usize,
    ) -> Result<Self> {
        let mut meta = ModelMeta {
            architecture: Architecture::StackedGru,
            input_kind,
            dims: vec![input, hidden, output],
            gru_layers: Some(layers),
            time_steps: Some(time_steps),
            dropout: Some(DROPOUT),
            tensors: Vec::new(),
        };
        meta.tensors = meta.expected_manifest()?;
        Ok(meta)
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("validated dims are nonempty")
    }

    /// Sum of tensor element counts.
    pub fn count_parameters(&self) -> usize {
        self.tensors.iter().map(TensorInfo::numel).sum()
    }

    /// The manifest this architecture requires, in payload order.
    pub fn expected_manifest(&self) -> Result<Vec<TensorInfo>> {
        if self.dims.contains(&0) {
            return Err(Error::Format("layer dimensions must be positive".into()));
        }
        match self.architecture {
            Architecture::Mlp => {
                if self.dims.len() < 2 {
                    return Err(Error::Format("an MLP needs at least input and output dims".into()));
                }
                if self.gru_layers.is_some() || self.time_steps.is_some() {
                    return Err(Error::Format("MLP metadata must not declare GRU fields".into()));
                }
                Ok(self
                    .dims
                    .windows(2)
                    .enumerate()
                    .flat_map(|(l, w)| {
                        [
                            TensorInfo::new(format!("fc{l}.weight"), &[w[1], w[0]]),
                            TensorInfo::new(format!("fc{l}.bias"), &[w[1]]),
                        ]
                    })
                    .collect())
            }
            Architecture::StackedGru => {
                let (Some(layers), Some(steps)) = (self.gru_layers, self.time_steps) else {
                    return Err(Error::Format("stacked GRU needs gru_layers and time_steps".into()));
                };
                if self.dims.len() != 3 || layers == 0 || steps == 0 {
                    return Err(Error::Format(
                        "stacked GRU needs dims [input, hidden, output] and positive layers/steps".into(),
                    ));
                }
                let (input, h, out) = (self.dims[0], self.dims[1], self.dims[2]);
                let mut manifest = Vec::with_capacity(4 * layers + 2);
                for l in 0..layers {
                    let d_in = if l == 0 { input } else { h };
                    manifest.push(TensorInfo::new(format!("gru{l}.weight_ih"), &[3 * h, d_in]));
                    manifest.push(TensorInfo::new(format!("gru{l}.weight_hh"), &[3 * h, h]));
                    manifest.push(TensorInfo::new(format!("gru{l}.bias_ih"), &[3 * h]));
                    manifest.push(TensorInfo::new(format!("gru{l}.bias_hh"), &[3 * h]));
                }
                manifest.push(TensorInfo::new("fc.weight", &[out, h]));
                manifest.push(TensorInfo::new("fc.bias", &[out]));
                Ok(manifest)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let expected = self.expected_manifest()?;
        if expected.len() != self.tensors.len() {
            return Err(Error::Format(format!(
                "architecture requires {} tensors, manifest lists {}",
                expected.len(),
                self.tensors.len()
            )));
        }
        for (want, got) in expected.iter().zip(&self.tensors) {
            if want != got {
                return Err(Error::Format(format!(
                    "manifest entry {} {:?} does not chain; expected {} {:?}",
                    got.name, got.shape, want.name, want.shape
                )));
            }
        }
        Ok(())
    }
}

/// The four evaluated model configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    MlpaD1,
    MlpaD2,
    MlpbD2,
    GruD2,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::MlpaD1, Preset::MlpaD2, Preset::MlpbD2, Preset::GruD2];

    /// Metadata for a code with `n` VNs and `m` checks (D2 input width `n + m`).
    pub fn meta(self, n: usize, m: usize) -> ModelMeta {
        let d2 = n + m;
        match self {
            Preset::MlpaD1 => ModelMeta::mlp(InputKind::D1, vec![n, 2 * n, n, n]),
            Preset::MlpaD2 => ModelMeta::mlp(InputKind::D2, vec![d2, MLPA_D2_FIRST_HIDDEN, n, n]),
            Preset::MlpbD2 => {
                let mut dims = vec![d2];
                dims.extend([MLPB_HIDDEN; MLPB_HIDDEN_LAYERS]);
                dims.push(n);
                ModelMeta::mlp(InputKind::D2, dims)
            }
            Preset::GruD2 => ModelMeta::stacked_gru(
                InputKind::D2,
                d2,
                GRU_HIDDEN_FACTOR * d2,
                GRU_LAYERS,
                GRU_TIME_STEPS,
                n,
            ),
        }
        .expect("preset dimensions are positive")
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::MlpaD1 => "mlpa_d1",
            Preset::MlpaD2 => "mlpa_d2",
            Preset::MlpbD2 => "mlpb_d2",
            Preset::GruD2 => "gru_d2",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown architecture {s:?}")))
    }
}

/// Per-VN perturbation probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub b_hat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
struct Dense {
    rows: usize,
    cols: usize,
    weight: Vec<f32>,
    bias: Vec<f32>,
}

impl Dense {
    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weight.chunks_exact(self.cols).zip(&self.bias).map(|(row, &b)| {
            row.iter().zip(x).map(|(&w, &xi)| w as f64 * xi).sum::<f64>() + b as f64
        }));
    }
}

/// Adds `W x + b` for a `[3h, cols]` stacked-gate matrix into `out` (len 3h).
fn gate_affine(weight: &[f32], bias: &[f32], cols: usize, x: &[f64], out: &mut [f64]) {
    for ((o, row), &b) in out.iter_mut().zip(weight.chunks_exact(cols)).zip(bias) {
        *o = row.iter().zip(x).map(|(&w, &xi)| w as f64 * xi).sum::<f64>() + b as f64;
    }
}

#[derive(Debug, Clone, PartialEq)]
struct GruLayer {
    input: usize,
    hidden: usize,
    weight_ih: Vec<f32>,
    weight_hh: Vec<f32>,
    bias_ih: Vec<f32>,
    bias_hh: Vec<f32>,
}

impl GruLayer {
    fn step(&self, x: &[f64], h: &mut [f64], gi: &mut [f64], gh: &mut [f64]) {
        let hd = self.hidden;
        gate_affine(&self.weight_ih, &self.bias_ih, self.input, x, gi);
        gate_affine(&self.weight_hh, &self.bias_hh, hd, h, gh);
        for k in 0..hd {
            let r = sigmoid(gi[k] + gh[k]);
            let u = sigmoid(gi[hd + k] + gh[hd + k]);
            let cand = (gi[2 * hd + k] + r * gh[2 * hd + k]).tanh();
            h[k] = (1.0 - u) * cand + u * h[k];
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Network {
    Mlp(Vec<Dense>),
    Gru {
        layers: Vec<GruLayer>,
        fc: Dense,
        steps: usize,
    },
}

/// Validated model ready for inference. Immutable and shareable.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    meta: ModelMeta,
    net: Network,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl ModelWeights {
    /// Assembles weights from a manifest and one flat buffer per tensor.
    pub fn from_tensors(meta: ModelMeta, tensors: Vec<Vec<f32>>) -> Result<Self> {
        meta.validate()?;
        if tensors.len() != meta.tensors.len() {
            return Err(Error::Format(format!(
                "{} tensor payloads supplied for {} manifest entries",
                tensors.len(),
                meta.tensors.len()
            )));
        }
        for (info, data) in meta.tensors.iter().zip(&tensors) {
            if data.len() != info.numel() {
                return Err(Error::Format(format!(
                    "tensor {} has {} values, shape {:?} needs {}",
                    info.name,
                    data.len(),
                    info.shape,
                    info.numel()
                )));
            }
            if data.iter().any(|v| !v.is_finite()) {
                return Err(Error::Format(format!("tensor {} contains non-finite values", info.name)));
            }
        }
        let mut it = tensors.into_iter();
        let net = match meta.architecture {
            Architecture::Mlp => Network::Mlp(
                meta.dims
                    .windows(2)
                    .map(|w| Dense {
                        rows: w[1],
                        cols: w[0],
                        weight: it.next().unwrap(),
                        bias: it.next().unwrap(),
                    })
                    .collect(),
            ),
            Architecture::StackedGru => {
                let (input, hidden, out) = (meta.dims[0], meta.dims[1], meta.dims[2]);
                let layers = (0..meta.gru_layers.unwrap())
                    .map(|l| GruLayer {
                        input: if l == 0 { input } else { hidden },
                        hidden,
                        weight_ih: it.next().unwrap(),
                        weight_hh: it.next().unwrap(),
                        bias_ih: it.next().unwrap(),
                        bias_hh: it.next().unwrap(),
                    })
                    .collect();
                let fc = Dense {
                    rows: out,
                    cols: hidden,
                    weight: it.next().unwrap(),
                    bias: it.next().unwrap(),
                };
                Network::Gru {
                    layers,
                    fc,
                    steps: meta.time_steps.unwrap(),
                }
            }
        };
        Ok(ModelWeights { meta, net })
    }

    /// All parameters zero.
    pub fn zeros(meta: ModelMeta) -> Result<Self> {
        let tensors = meta.tensors.iter().map(|t| vec![0.0; t.numel()]).collect();
        Self::from_tensors(meta, tensors)
    }

    /// Parameters uniform in `[-scale, scale)`.
    pub fn random(meta: ModelMeta, scale: f32, rng: &mut StreamRng) -> Result<Self> {
        let tensors = meta
            .tensors
            .iter()
            .map(|t| (0..t.numel()).map(|_| ((2.0 * rng.uniform() - 1.0) as f32) * scale).collect())
            .collect();
        Self::from_tensors(meta, tensors)
    }

    pub fn meta(&self) -> &ModelMeta {
        &self.meta
    }

    pub fn input_kind(&self) -> InputKind {
        self.meta.input_kind
    }

    pub fn input_dim(&self) -> usize {
        self.meta.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.meta.output_dim()
    }

    pub fn count_parameters(&self) -> usize {
        self.meta.count_parameters()
    }

    /// Tensors in manifest order.
    pub fn tensors(&self) -> Vec<&[f32]> {
        match &self.net {
            Network::Mlp(layers) => layers.iter().flat_map(|d| [&d.weight[..], &d.bias[..]]).collect(),
            Network::Gru { layers, fc, .. } => layers
                .iter()
                .flat_map(|l| [&l.weight_ih[..], &l.weight_hh[..], &l.bias_ih[..], &l.bias_hh[..]])
                .chain([&fc.weight[..], &fc.bias[..]])
                .collect(),
        }
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "model expects {} inputs, got {}",
                self.input_dim(),
                input.len()
            )));
        }
        Ok(())
    }

    /// Dispatches on the architecture.
    pub fn forward(&self, input: &[f64]) -> Result<Prediction> {
        match self.meta.architecture {
            Architecture::Mlp => self.forward_mlp(input),
            Architecture::StackedGru => self.forward_stacked_gru(input),
        }
    }

    /// Affine + ReLU per hidden layer, affine + sigmoid at the output.
    pub fn forward_mlp(&self, input: &[f64]) -> Result<Prediction> {
        let Network::Mlp(layers) = &self.net else {
            return Err(Error::DimensionMismatch("model is not an MLP".into()));
        };
        self.check_input(input)?;
        let mut x = input.to_vec();
        let mut buf = Vec::new();
        let last = layers.len() - 1;
        for (l, layer) in layers.iter().enumerate() {
            layer.apply(&x, &mut buf);
            std::mem::swap(&mut x, &mut buf);
            if l < last {
                x.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        Ok(Prediction {
            b_hat: x.into_iter().map(sigmoid).collect(),
        })
    }

    /// Feeds `input` at every time step through the stack; the top layer's final
    /// hidden state goes through the output layer and a sigmoid.
    pub fn forward_stacked_gru(&self, input: &[f64]) -> Result<Prediction> {
        let Network::Gru { layers, fc, steps } = &self.net else {
            return Err(Error::DimensionMismatch("model is not a stacked GRU".into()));
        };
        self.check_input(input)?;
        let hd = layers[0].hidden;
        let mut hidden = vec![vec![0.0f64; hd]; layers.len()];
        let mut gi = vec![0.0; 3 * hd];
        let mut gh = vec![0.0; 3 * hd];
        for _ in 0..*steps {
            for l in 0..layers.len() {
                let (below, rest) = hidden.split_at_mut(l);
                let x: &[f64] = if l == 0 { input } else { &below[l - 1] };
                layers[l].step(x, &mut rest[0], &mut gi, &mut gh);
            }
        }
        let mut out = Vec::with_capacity(fc.rows);
        fc.apply(hidden.last().unwrap(), &mut out);
        Ok(Prediction {
            b_hat: out.into_iter().map(sigmoid).collect(),
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let json = serde_json::to_vec(&self.meta)?;
        let len = u32::try_from(json.len()).map_err(|_| Error::Format("metadata too large".into()))?;
        let payload: usize = self.meta.count_parameters() * 4;
        let mut out = Vec::with_capacity(WEIGHTS_MAGIC.len() + 4 + json.len() + payload);
        out.extend_from_slice(WEIGHTS_MAGIC);
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(&json);
        for t in self.tensors() {
            for v in t {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let rest = bytes
            .strip_prefix(WEIGHTS_MAGIC.as_slice())
            .ok_or_else(|| Error::Format("bad magic or version in weight container".into()))?;
        if rest.len() < 4 {
            return Err(Error::Format("truncated metadata length".into()));
        }
        let (len, rest) = rest.split_at(4);
        let len = u32::from_le_bytes(len.try_into().unwrap()) as usize;
        if rest.len() < len {
            return Err(Error::Format("truncated metadata block".into()));
        }
        let (json, mut payload) = rest.split_at(len);
        let meta: ModelMeta = serde_json::from_slice(json)?;
        meta.validate()?;
        let mut tensors = Vec::with_capacity(meta.tensors.len());
        for info in &meta.tensors {
            let nbytes = info.numel() * 4;
            if payload.len() < nbytes {
                return Err(Error::Format(format!("truncated payload for tensor {}", info.name)));
            }
            let (chunk, tail) = payload.split_at(nbytes);
            tensors.push(
                chunk
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                    .collect(),
            );
            payload = tail;
        }
        if !payload.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes after tensor payload", payload.len())));
        }
        Self::from_tensors(meta, tensors)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }
}

/// Reads and validates a weight container.
pub fn load_weights(path: impl AsRef<Path>) -> Result<ModelWeights> {
    ModelWeights::from_bytes(&fs::read(path)?)
}
