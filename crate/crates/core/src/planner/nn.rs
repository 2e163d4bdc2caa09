//! Forward passes of the Neural Dubins Model. Everything here is pure:
//! weights in, activations out.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::grid::GridMap;
use crate::error::{Error, Result};
use crate::geometry::{dubins_sample, dubins_shortest, normalize_angle, Pose2D};

/// Architecture constants shared with the training code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arch {
    pub grid_size: usize,
    pub cell_size: f64,
    pub ref_input: usize,
    pub ref_hidden: usize,
    pub conv1_channels: usize,
    pub conv2_channels: usize,
    pub kernel: usize,
    pub pooled_size: usize,
    pub z_dim: usize,
    pub dec_input: usize,
    pub dec_hidden: usize,
    pub output_dim: usize,
    /// Divisors applied to `(x, y, theta)`.
    pub norm: [f64; 3],
    pub bn_eps: f64,
    /// Sample spacing of the reference Dubins curve (m).
    pub ds: f64,
    pub dubins_r_min: f64,
    pub seq_cap: usize,
    pub history_cap: usize,
    pub n_pred: usize,
    /// `x_major`: grid row index is the x cell, column index the y cell.
    pub grid_layout: String,
}

pub fn arch() -> &'static Arch {
    static ARCH: OnceLock<Arch> = OnceLock::new();
    ARCH.get_or_init(|| serde_json::from_str(include_str!("../../assets/arch.json")).expect("bundled arch.json is valid"))
}

impl Arch {
    pub fn flat_features(&self) -> usize {
        self.conv2_channels * self.pooled_size * self.pooled_size
    }

    pub fn fc_init_inputs(&self) -> usize {
        self.ref_hidden + self.z_dim + 3
    }

    pub fn normalize(&self, p: &Pose2D) -> [f64; 3] {
        [p.x / self.norm[0], p.y / self.norm[1], p.theta / self.norm[2]]
    }

    pub fn denormalize(&self, v: &[f64]) -> Pose2D {
        Pose2D::new(v[0] * self.norm[0], v[1] * self.norm[1], v[2] * self.norm[2])
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Single-layer LSTM, gates stacked `i, f, g, o` (PyTorch order).
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    pub input: usize,
    pub hidden: usize,
    /// `4H x I`, row-major.
    pub w_ih: Vec<f64>,
    /// `4H x H`, row-major.
    pub w_hh: Vec<f64>,
    pub b_ih: Vec<f64>,
    pub b_hh: Vec<f64>,
}

impl Lstm {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            input,
            hidden,
            w_ih: vec![0.0; 4 * hidden * input],
            w_hh: vec![0.0; 4 * hidden * hidden],
            b_ih: vec![0.0; 4 * hidden],
            b_hh: vec![0.0; 4 * hidden],
        }
    }

    fn check(&self, name: &str) -> Result<()> {
        let (i, h) = (self.input, self.hidden);
        for (t, len, want) in [
            ("W_ih", self.w_ih.len(), 4 * h * i),
            ("W_hh", self.w_hh.len(), 4 * h * h),
            ("b_ih", self.b_ih.len(), 4 * h),
            ("b_hh", self.b_hh.len(), 4 * h),
        ] {
            if len != want {
                return Err(Error::weights(format!("{name}.{t}"), format!("has {len} values, expected {want}")));
            }
        }
        Ok(())
    }
}

pub fn lstm_cell(x: &[f64], h: &[f64], c: &[f64], w: &Lstm) -> Result<(Vec<f64>, Vec<f64>)> {
    w.check("lstm")?;
    let hd = w.hidden;
    if x.len() != w.input || h.len() != hd || c.len() != hd {
        return Err(Error::weights(
            "lstm",
            format!(
                "input/hidden/cell lengths {}/{}/{} do not match {}/{hd}/{hd}",
                x.len(),
                h.len(),
                c.len(),
                w.input
            ),
        ));
    }
    let mut gates = vec![0.0; 4 * hd];
    for (r, g) in gates.iter_mut().enumerate() {
        let wi = &w.w_ih[r * w.input..(r + 1) * w.input];
        let wh = &w.w_hh[r * hd..(r + 1) * hd];
        *g = w.b_ih[r]
            + w.b_hh[r]
            + wi.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            + wh.iter().zip(h).map(|(a, b)| a * b).sum::<f64>();
    }
    let mut h_new = vec![0.0; hd];
    let mut c_new = vec![0.0; hd];
    for j in 0..hd {
        let i = sigmoid(gates[j]);
        let f = sigmoid(gates[hd + j]);
        let g = gates[2 * hd + j].tanh();
        let o = sigmoid(gates[3 * hd + j]);
        c_new[j] = f * c[j] + i * g;
        h_new[j] = o * c_new[j].tanh();
    }
    Ok((h_new, c_new))
}

/// Runs the LSTM over `seq` from zero state; returns the final hidden state.
pub fn lstm_sequence(seq: &[[f64; 3]], h0: Vec<f64>, w: &Lstm) -> Result<Vec<f64>> {
    let mut h = h0;
    let mut c = vec![0.0; w.hidden];
    for x in seq {
        (h, c) = lstm_cell(x, &h, &c, w)?;
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs x inputs`, row-major.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Linear {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            w: vec![0.0; inputs * outputs],
            b: vec![0.0; outputs],
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.inputs || self.w.len() != self.inputs * self.outputs || self.b.len() != self.outputs {
            return Err(Error::weights(
                "linear",
                format!("input of length {} does not fit a {}x{} layer", x.len(), self.outputs, self.inputs),
            ));
        }
        Ok((0..self.outputs)
            .map(|r| self.b[r] + self.w[r * self.inputs..(r + 1) * self.inputs].iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    /// `out x in x k x k`, row-major.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Conv2d {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel,
            w: vec![0.0; out_channels * in_channels * kernel * kernel],
            b: vec![0.0; out_channels],
        }
    }
}

/// Inference-time batch norm: `(x - mean) / sqrt(var + eps) * scale + shift`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub scale: Vec<f64>,
    pub shift: Vec<f64>,
}

impl BatchNorm {
    pub fn identity(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            var: vec![1.0 - arch().bn_eps; channels],
            scale: vec![1.0; channels],
            shift: vec![0.0; channels],
        }
    }
}

/// Channel-major feature map, `data[(c * height + i) * width + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn at(&self, c: usize, i: usize, j: usize) -> f64 {
        self.data[(c * self.height + i) * self.width + j]
    }

    pub fn from_grid(g: &GridMap) -> Self {
        let n = g.size();
        Self {
            channels: 1,
            height: n,
            width: n,
            data: g.cells().iter().map(|v| f64::from(*v)).collect(),
        }
    }
}

/// Convolution (3x3, stride 1, zero padding 1), batch norm, ReLU, 2x2 max pool.
pub fn cdm_forward(input: &FeatureMap, conv: &Conv2d, bn: &BatchNorm) -> Result<FeatureMap> {
    let (h, w) = (input.height, input.width);
    if h < 2 || w < 2 {
        return Err(Error::invalid(format!("feature map {h}x{w} is too small to pool")));
    }
    let k = conv.kernel;
    let oc = conv.out_channels;
    if conv.in_channels != input.channels || conv.w.len() != oc * conv.in_channels * k * k || conv.b.len() != oc {
        return Err(Error::weights(
            "conv",
            format!("kernel {}x{}x{k}x{k} does not fit {} input channels", oc, conv.in_channels, input.channels),
        ));
    }
    if [&bn.mean, &bn.var, &bn.scale, &bn.shift].iter().any(|v| v.len() != oc) {
        return Err(Error::weights("bn", format!("statistics must have {oc} entries")));
    }
    let eps = arch().bn_eps;
    let pad = (k / 2) as isize;
    let mut act = FeatureMap::zeros(oc, h, w);
    for o in 0..oc {
        let inv = bn.scale[o] / (bn.var[o] + eps).sqrt();
        for i in 0..h {
            for j in 0..w {
                let mut acc = conv.b[o];
                for c in 0..input.channels {
                    for di in 0..k {
                        let ii = i as isize + di as isize - pad;
                        if ii < 0 || ii >= h as isize {
                            continue;
                        }
                        for dj in 0..k {
                            let jj = j as isize + dj as isize - pad;
                            if jj < 0 || jj >= w as isize {
                                continue;
                            }
                            acc += conv.w[((o * conv.in_channels + c) * k + di) * k + dj] * input.at(c, ii as usize, jj as usize);
                        }
                    }
                }
                let y = (acc - bn.mean[o]) * inv + bn.shift[o];
                act.data[(o * h + i) * w + j] = y.max(0.0);
            }
        }
    }
    let (ph, pw) = (h / 2, w / 2);
    let mut out = FeatureMap::zeros(oc, ph, pw);
    for o in 0..oc {
        for i in 0..ph {
            for j in 0..pw {
                let m = act
                    .at(o, 2 * i, 2 * j)
                    .max(act.at(o, 2 * i + 1, 2 * j))
                    .max(act.at(o, 2 * i, 2 * j + 1))
                    .max(act.at(o, 2 * i + 1, 2 * j + 1));
                out.data[(o * ph + i) * pw + j] = m;
            }
        }
    }
    Ok(out)
}

/// All tensors of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub ref_encoder: Lstm,
    pub conv1: Conv2d,
    pub bn1: BatchNorm,
    pub conv2: Conv2d,
    pub bn2: BatchNorm,
    pub fc_z: Linear,
    pub fc_init: Linear,
    pub decoder: Lstm,
    pub fc_out: Linear,
}

impl ModelWeights {
    /// All-zero weights with identity batch norm.
    pub fn zeros() -> Self {
        let a = arch();
        Self {
            ref_encoder: Lstm::zeros(a.ref_input, a.ref_hidden),
            conv1: Conv2d::zeros(1, a.conv1_channels, a.kernel),
            bn1: BatchNorm::identity(a.conv1_channels),
            conv2: Conv2d::zeros(a.conv1_channels, a.conv2_channels, a.kernel),
            bn2: BatchNorm::identity(a.conv2_channels),
            fc_z: Linear::zeros(a.flat_features(), a.z_dim),
            fc_init: Linear::zeros(a.fc_init_inputs(), a.dec_hidden),
            decoder: Lstm::zeros(a.dec_input, a.dec_hidden),
            fc_out: Linear::zeros(a.dec_hidden, a.output_dim),
        }
    }
}

/// Keeps at most `cap` items, picking indices `i * (n - 1) / (cap - 1)`.
pub fn resample<T: Copy>(items: &[T], cap: usize) -> Vec<T> {
    let n = items.len();
    match cap {
        _ if n <= cap => return items.to_vec(),
        0 => return Vec::new(),
        1 => return vec![items[n - 1]],
        _ => {}
    }
    (0..cap).map(|i| items[i * (n - 1) / (cap - 1)]).collect()
}

/// Normalized Dubins samples from `q0` to `goal`, as fed to the reference encoder.
pub fn reference_sequence(q0: &Pose2D, goal: &Pose2D) -> Vec<[f64; 3]> {
    let a = arch();
    let path = dubins_shortest(*q0, *goal, a.dubins_r_min);
    let samples = dubins_sample(&path, a.ds);
    resample(&samples, a.seq_cap).iter().map(|p| a.normalize(p)).collect()
}

/// Hidden state `H` after reading the reference curve.
pub fn encode_reference(q0: &Pose2D, goal: &Pose2D, w: &ModelWeights) -> Result<Vec<f64>> {
    let seq = reference_sequence(q0, goal);
    lstm_sequence(&seq, vec![0.0; w.ref_encoder.hidden], &w.ref_encoder)
}

/// Obstacle feature `Z`.
pub fn encode_obstacles(grid: &GridMap, w: &ModelWeights) -> Result<Vec<f64>> {
    let x = FeatureMap::from_grid(grid);
    let x = cdm_forward(&x, &w.conv1, &w.bn1)?;
    let x = cdm_forward(&x, &w.conv2, &w.bn2)?;
    w.fc_z.apply(&x.data)
}

/// Predicted pose `n_pred` expert steps ahead.
pub fn decode_next_target(h: &[f64], z: &[f64], goal: &Pose2D, history: &[Pose2D], w: &ModelWeights) -> Result<Pose2D> {
    if history.is_empty() {
        return Err(Error::invalid("decoder history is empty"));
    }
    let a = arch();
    let mut input = Vec::with_capacity(w.fc_init.inputs);
    input.extend_from_slice(h);
    input.extend_from_slice(z);
    input.extend_from_slice(&a.normalize(goal));
    let h0 = w.fc_init.apply(&input)?;
    let seq: Vec<[f64; 3]> = resample(history, a.history_cap).iter().map(|p| a.normalize(p)).collect();
    let hn = lstm_sequence(&seq, h0, &w.decoder)?;
    let out = w.fc_out.apply(&hn)?;
    let p = a.denormalize(&out);
    Ok(Pose2D {
        theta: normalize_angle(p.theta),
        ..p
    })
}
