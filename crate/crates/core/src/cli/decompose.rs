use serde::Serialize;

use crate::error::Result;
use crate::net::{Conv2d, Layer, NetworkModel};
use crate::reshape::{decompose_export, flops_report, low_rank_project, DecompScheme, Dims4, FlopsReport};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerFlops {
    /// Index of the convolution in the source model.
    pub layer: usize,
    pub dims: Dims4,
    pub output_hw: (usize, usize),
    pub rank: usize,
    pub full_rank: usize,
    pub flops: FlopsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecomposeReport {
    pub scheme: DecompScheme,
    pub energy: f64,
    pub layers: Vec<LayerFlops>,
    /// Summed over convolution layers.
    pub total: FlopsReport,
}

/// Replaces every convolution by its two-layer cascade. The original bias
/// moves to the second layer; the first layer gets a zero bias.
pub fn decompose_model(
    model: &NetworkModel,
    scheme: DecompScheme,
    e: f64,
) -> Result<(NetworkModel, DecomposeReport)> {
    let shapes = model.layer_shapes()?;
    let mut layers = Vec::with_capacity(model.layers.len() + model.conv_indices().len());
    let mut stats = Vec::new();
    for (li, layer) in model.layers.iter().enumerate() {
        let Layer::Conv2d(conv) = layer else {
            layers.push(layer.clone());
            continue;
        };
        let pair = decompose_export(&conv.weight, scheme, e)?;
        let (_, h, w) = shapes[li];
        let dims = conv.weight.dims();
        stats.push(LayerFlops {
            layer: li,
            dims,
            output_hw: (h, w),
            rank: pair.rank,
            full_rank: {
                let (r, c) = scheme.matrix_shape(dims);
                r.min(c)
            },
            flops: flops_report(dims, (h, w), scheme, pair.rank),
        });
        layers.push(Layer::Conv2d(Conv2d::new(pair.first, vec![0.0; pair.rank])?));
        layers.push(Layer::Conv2d(Conv2d::new(pair.second, conv.bias.clone())?));
    }
    let original: u64 = stats.iter().map(|s| s.flops.original).sum();
    let decomposed: u64 = stats.iter().map(|s| s.flops.decomposed).sum();
    let report = DecomposeReport {
        scheme,
        energy: e,
        layers: stats,
        total: FlopsReport {
            original,
            decomposed,
            speedup: original as f64 / decomposed as f64,
        },
    };
    let out = NetworkModel::new(model.input_shape, layers, model.rng_seed)?;
    Ok((out, report))
}

/// Projects every convolution in place of its full-rank weights, keeping the
/// architecture unchanged.
pub fn project_model(model: &NetworkModel, scheme: DecompScheme, e: f64) -> Result<NetworkModel> {
    let mut out = model.clone();
    for layer in &mut out.layers {
        if let Layer::Conv2d(conv) = layer {
            conv.weight = low_rank_project(&conv.weight, scheme, e)?.0;
        }
    }
    Ok(out)
}
