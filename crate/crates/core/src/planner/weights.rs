//! The weights file: UTF-8 JSON with `format_version`, `arch` and a map of
//! named row-major tensors.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::nn::{arch, BatchNorm, Conv2d, Linear, Lstm, ModelWeights};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: i64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsFile {
    format_version: i64,
    arch: serde_json::Value,
    tensors: BTreeMap<String, Tensor>,
}

/// Canonical tensor names and shapes, in file order.
pub fn tensor_table() -> Vec<(&'static str, Vec<usize>)> {
    let a = arch();
    let (rh, dh) = (a.ref_hidden, a.dec_hidden);
    let (c1, c2, k) = (a.conv1_channels, a.conv2_channels, a.kernel);
    vec![
        ("ref_encoder.W_ih", vec![4 * rh, a.ref_input]),
        ("ref_encoder.W_hh", vec![4 * rh, rh]),
        ("ref_encoder.b_ih", vec![4 * rh]),
        ("ref_encoder.b_hh", vec![4 * rh]),
        ("obs.conv1.W", vec![c1, 1, k, k]),
        ("obs.conv1.b", vec![c1]),
        ("obs.bn1.mean", vec![c1]),
        ("obs.bn1.var", vec![c1]),
        ("obs.bn1.scale", vec![c1]),
        ("obs.bn1.shift", vec![c1]),
        ("obs.conv2.W", vec![c2, c1, k, k]),
        ("obs.conv2.b", vec![c2]),
        ("obs.bn2.mean", vec![c2]),
        ("obs.bn2.var", vec![c2]),
        ("obs.bn2.scale", vec![c2]),
        ("obs.bn2.shift", vec![c2]),
        ("obs.fc_z.W", vec![a.z_dim, a.flat_features()]),
        ("obs.fc_z.b", vec![a.z_dim]),
        ("dec.fc_init.W", vec![dh, a.fc_init_inputs()]),
        ("dec.fc_init.b", vec![dh]),
        ("dec.W_ih", vec![4 * dh, a.dec_input]),
        ("dec.W_hh", vec![4 * dh, dh]),
        ("dec.b_ih", vec![4 * dh]),
        ("dec.b_hh", vec![4 * dh]),
        ("dec.fc_out.W", vec![a.output_dim, dh]),
        ("dec.fc_out.b", vec![a.output_dim]),
    ]
}

fn check_arch(found: &serde_json::Value) -> Result<()> {
    let expected = serde_json::to_value(arch()).expect("arch serializes");
    let (Some(found), Some(expected)) = (found.as_object(), expected.as_object()) else {
        return Err(Error::weights("arch", "must be an object"));
    };
    for (key, want) in expected {
        let got = found.get(key).ok_or_else(|| Error::weights(format!("arch.{key}"), "missing"))?;
        let same = match (got.as_f64(), want.as_f64()) {
            (Some(g), Some(w)) => (g - w).abs() <= 1e-12 * w.abs().max(1.0),
            _ => got == want,
        };
        if !same {
            return Err(Error::weights(format!("arch.{key}"), format!("is {got}, this build expects {want}")));
        }
    }
    if let Some(extra) = found.keys().find(|k| !expected.contains_key(*k)) {
        return Err(Error::weights(format!("arch.{extra}"), "unknown field"));
    }
    Ok(())
}

/// Parses and validates a weights file.
pub fn load_weights(bytes: &[u8]) -> Result<ModelWeights> {
    let file: WeightsFile = serde_json::from_slice(bytes).map_err(|e| Error::Json {
        context: "weights file".into(),
        source: e,
    })?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::weights(
            "format_version",
            format!("version {} is not supported (expected {FORMAT_VERSION})", file.format_version),
        ));
    }
    check_arch(&file.arch)?;
    let mut tensors = file.tensors;
    let table = tensor_table();
    for (name, shape) in &table {
        let t = tensors.get(*name).ok_or_else(|| Error::weights(*name, "missing"))?;
        if &t.shape != shape {
            return Err(Error::weights(*name, format!("shape {:?}, expected {:?}", t.shape, shape)));
        }
        let len: usize = shape.iter().product();
        if t.data.len() != len {
            return Err(Error::weights(*name, format!("has {} values, shape needs {len}", t.data.len())));
        }
        if let Some(i) = t.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::weights(*name, format!("value {i} is not finite")));
        }
        if name.ends_with(".var") {
            if let Some(i) = t.data.iter().position(|v| *v <= 0.0) {
                return Err(Error::weights(*name, format!("variance {i} is not positive")));
            }
        }
    }
    if let Some(extra) = tensors.keys().find(|k| !table.iter().any(|(n, _)| n == k)) {
        return Err(Error::weights(extra.clone(), "unknown tensor"));
    }
    let mut take = |name: &str| tensors.remove(name).expect("validated above").data;
    let a = arch();
    let lstm = |take: &mut dyn FnMut(&str) -> Vec<f64>, prefix: &str, input: usize, hidden: usize| Lstm {
        input,
        hidden,
        w_ih: take(&format!("{prefix}W_ih")),
        w_hh: take(&format!("{prefix}W_hh")),
        b_ih: take(&format!("{prefix}b_ih")),
        b_hh: take(&format!("{prefix}b_hh")),
    };
    let bn = |take: &mut dyn FnMut(&str) -> Vec<f64>, prefix: &str| BatchNorm {
        mean: take(&format!("{prefix}.mean")),
        var: take(&format!("{prefix}.var")),
        scale: take(&format!("{prefix}.scale")),
        shift: take(&format!("{prefix}.shift")),
    };
    Ok(ModelWeights {
        ref_encoder: lstm(&mut take, "ref_encoder.", a.ref_input, a.ref_hidden),
        conv1: Conv2d {
            in_channels: 1,
            out_channels: a.conv1_channels,
            kernel: a.kernel,
            w: take("obs.conv1.W"),
            b: take("obs.conv1.b"),
        },
        bn1: bn(&mut take, "obs.bn1"),
        conv2: Conv2d {
            in_channels: a.conv1_channels,
            out_channels: a.conv2_channels,
            kernel: a.kernel,
            w: take("obs.conv2.W"),
            b: take("obs.conv2.b"),
        },
        bn2: bn(&mut take, "obs.bn2"),
        fc_z: Linear {
            inputs: a.flat_features(),
            outputs: a.z_dim,
            w: take("obs.fc_z.W"),
            b: take("obs.fc_z.b"),
        },
        fc_init: Linear {
            inputs: a.fc_init_inputs(),
            outputs: a.dec_hidden,
            w: take("dec.fc_init.W"),
            b: take("dec.fc_init.b"),
        },
        decoder: lstm(&mut take, "dec.", a.dec_input, a.dec_hidden),
        fc_out: Linear {
            inputs: a.dec_hidden,
            outputs: a.output_dim,
            w: take("dec.fc_out.W"),
            b: take("dec.fc_out.b"),
        },
    })
}

/// Serializes weights in the canonical file format.
pub fn weights_to_json(w: &ModelWeights) -> String {
    let table = tensor_table();
    let data: Vec<&Vec<f64>> = vec![
        &w.ref_encoder.w_ih,
        &w.ref_encoder.w_hh,
        &w.ref_encoder.b_ih,
        &w.ref_encoder.b_hh,
        &w.conv1.w,
        &w.conv1.b,
        &w.bn1.mean,
        &w.bn1.var,
        &w.bn1.scale,
        &w.bn1.shift,
        &w.conv2.w,
        &w.conv2.b,
        &w.bn2.mean,
        &w.bn2.var,
        &w.bn2.scale,
        &w.bn2.shift,
        &w.fc_z.w,
        &w.fc_z.b,
        &w.fc_init.w,
        &w.fc_init.b,
        &w.decoder.w_ih,
        &w.decoder.w_hh,
        &w.decoder.b_ih,
        &w.decoder.b_hh,
        &w.fc_out.w,
        &w.fc_out.b,
    ];
    let tensors = table
        .into_iter()
        .zip(data)
        .map(|((name, shape), d)| (name.to_string(), Tensor { shape, data: d.clone() }))
        .collect();
    let file = WeightsFile {
        format_version: FORMAT_VERSION,
        arch: serde_json::to_value(arch()).expect("arch serializes"),
        tensors,
    };
    serde_json::to_string(&file).expect("weights serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_round_trips() {
        let w = ModelWeights::zeros();
        let text = weights_to_json(&w);
        assert_eq!(load_weights(text.as_bytes()).unwrap(), w);
    }

    fn edit(f: impl FnOnce(&mut serde_json::Value)) -> Result<ModelWeights> {
        let mut v: serde_json::Value = serde_json::from_str(&weights_to_json(&ModelWeights::zeros())).unwrap();
        f(&mut v);
        load_weights(v.to_string().as_bytes())
    }

    fn tensor_named(e: Error) -> String {
        match e {
            Error::Weights { tensor, .. } => tensor,
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn wrong_shape_names_the_tensor() {
        let e = edit(|v| {
            let t = &mut v["tensors"]["ref_encoder.W_ih"];
            t["shape"] = serde_json::json!([255, 3]);
            t["data"] = serde_json::json!(vec![0.0; 765]);
        })
        .unwrap_err();
        assert_eq!(tensor_named(e), "ref_encoder.W_ih");
    }

    #[test]
    fn missing_tensor_and_bad_version() {
        let e = edit(|v| {
            v["tensors"].as_object_mut().unwrap().remove("dec.fc_out.b");
        })
        .unwrap_err();
        assert_eq!(tensor_named(e), "dec.fc_out.b");
        let e = edit(|v| v["format_version"] = serde_json::json!(2)).unwrap_err();
        assert_eq!(tensor_named(e), "format_version");
    }

    #[test]
    fn non_positive_variance_rejected() {
        let e = edit(|v| v["tensors"]["obs.bn2.var"]["data"][3] = serde_json::json!(0.0)).unwrap_err();
        assert_eq!(tensor_named(e), "obs.bn2.var");
    }

    #[test]
    fn arch_mismatch_rejected() {
        let e = edit(|v| v["arch"]["ref_hidden"] = serde_json::json!(32)).unwrap_err();
        assert_eq!(tensor_named(e), "arch.ref_hidden");
    }
}
