use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Topology of the compact residual classifier.
///
/// A 3x3 stem maps `input_channels` to `stem_width`; each entry of
/// `block_widths` adds a residual block of two 3x3 convolutions. A block
/// whose width differs from its input strides by 2 and projects its skip
/// path with a 1x1 convolution. Global average pooling and an affine map
/// produce two logits (real, fake).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_channels: usize,
    pub stem_width: usize,
    pub block_widths: Vec<usize>,
}

/// Widths shared by both streams; the input channel count comes from the
/// stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkShape {
    pub stem_width: usize,
    pub block_widths: Vec<usize>,
}

impl Default for NetworkShape {
    fn default() -> Self {
        Self {
            stem_width: 16,
            block_widths: vec![16, 32, 64],
        }
    }
}

impl NetworkShape {
    pub fn with_inputs(&self, input_channels: usize) -> NetworkSpec {
        NetworkSpec {
            input_channels,
            stem_width: self.stem_width,
            block_widths: self.block_widths.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct BlockPlan {
    pub cin: usize,
    pub cout: usize,
    pub stride: usize,
    pub projection: bool,
}

pub const NUM_CLASSES: usize = 2;

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_channels == 0
            || self.stem_width == 0
            || self.block_widths.contains(&0)
        {
            return Err(Error::invalid_config(format!(
                "network widths must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    pub(crate) fn blocks(&self) -> Vec<BlockPlan> {
        let mut cin = self.stem_width;
        self.block_widths
            .iter()
            .map(|&cout| {
                let changes = cout != cin;
                let plan = BlockPlan {
                    cin,
                    cout,
                    stride: if changes { 2 } else { 1 },
                    projection: changes,
                };
                cin = cout;
                plan
            })
            .collect()
    }

    pub fn feature_width(&self) -> usize {
        self.block_widths.last().copied().unwrap_or(self.stem_width)
    }

    /// Factor by which the spatial size shrinks; inputs must be divisible
    /// by it.
    pub fn downsampling(&self) -> usize {
        self.blocks().iter().map(|b| b.stride).product()
    }

    /// Every parameter name with its shape. Convolution weights are
    /// `(out, in, kh, kw)`; the head weight is `(2, features)`.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut shapes = vec![
            (
                "stem.weight".to_string(),
                vec![self.stem_width, self.input_channels, 3, 3],
            ),
            ("stem.bias".to_string(), vec![self.stem_width]),
        ];
        for (i, b) in self.blocks().iter().enumerate() {
            shapes.push((
                format!("blocks.{i}.conv1.weight"),
                vec![b.cout, b.cin, 3, 3],
            ));
            shapes.push((format!("blocks.{i}.conv1.bias"), vec![b.cout]));
            shapes.push((
                format!("blocks.{i}.conv2.weight"),
                vec![b.cout, b.cout, 3, 3],
            ));
            shapes.push((format!("blocks.{i}.conv2.bias"), vec![b.cout]));
            if b.projection {
                shapes.push((format!("blocks.{i}.proj.weight"), vec![b.cout, b.cin, 1, 1]));
            }
        }
        shapes.push((
            "head.weight".to_string(),
            vec![NUM_CLASSES, self.feature_width()],
        ));
        shapes.push(("head.bias".to_string(), vec![NUM_CLASSES]));
        shapes
    }

    pub fn parameter_count(&self) -> usize {
        self.param_shapes()
            .iter()
            .map(|(_, s)| s.iter().product::<usize>())
            .sum()
    }
}

/// Weight tensors carry the L2 penalty; biases do not.
pub(crate) fn is_decayed(name: &str) -> bool {
    name.ends_with(".weight")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_topology() {
        let spec = NetworkShape::default().with_inputs(18);
        let blocks = spec.blocks();
        assert_eq!(blocks.len(), 3);
        assert_eq!((blocks[0].stride, blocks[0].projection), (1, false));
        assert_eq!((blocks[1].stride, blocks[1].projection), (2, true));
        assert_eq!((blocks[2].stride, blocks[2].projection), (2, true));
        assert_eq!(spec.downsampling(), 4);
        let shapes = spec.param_shapes();
        assert_eq!(shapes[0].1, vec![16, 18, 3, 3]);
        let expected = 16 * 18 * 9
            + 16
            + 2 * (16 * 16 * 9 + 16)
            + (32 * 16 * 9 + 32)
            + (32 * 32 * 9 + 32)
            + 32 * 16
            + (64 * 32 * 9 + 64)
            + (64 * 64 * 9 + 64)
            + 64 * 32
            + 2 * 64
            + 2;
        assert_eq!(spec.parameter_count(), expected);
    }

    #[test]
    fn rejects_zero_widths() {
        let spec = NetworkSpec {
            input_channels: 3,
            stem_width: 0,
            block_widths: vec![4],
        };
        assert!(spec.validate().is_err());
    }
}
