//! Declarative model descriptions and the comparison zoo.

use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::conv::Padding;
use super::seq::Direction;

fn one() -> usize {
    1
}

fn relu() -> Activation {
    Activation::Relu
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BlockSpec {
    Conv {
        filters: usize,
        kernel: usize,
        #[serde(default)]
        padding: Padding,
        #[serde(default = "relu")]
        activation: Activation,
    },
    Gru {
        hidden: usize,
        #[serde(default = "one")]
        stack: usize,
        #[serde(default)]
        direction: Direction,
    },
    Lstm {
        hidden: usize,
        #[serde(default = "one")]
        stack: usize,
        #[serde(default)]
        direction: Direction,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseSpec {
    pub units: usize,
    #[serde(default)]
    pub activation: Activation,
}

impl DenseSpec {
    pub fn new(units: usize, activation: Activation) -> Self {
        Self { units, activation }
    }
}

/// Layer graph of a regression model over `input_features` tabular inputs.
///
/// Blocks run in order; the feature vector is presented as a one-channel
/// sequence of `input_features` steps to the first convolutional or
/// recurrent block. `attention` inserts self-attention after the last block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub input_features: usize,
    #[serde(default)]
    pub layers: Vec<BlockSpec>,
    #[serde(default)]
    pub attention: bool,
    pub head: Vec<DenseSpec>,
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model spec serializes")
    }

    pub fn with_input_features(mut self, features: usize) -> Self {
        self.input_features = features;
        self
    }

    /// Plain linear regression: a single linear unit on the raw features.
    pub fn linear(features: usize) -> Self {
        Self {
            name: "linear".into(),
            input_features: features,
            layers: vec![],
            attention: false,
            head: vec![DenseSpec::new(1, Activation::Linear)],
        }
    }

    /// Replaces the stack depth of every recurrent block.
    pub fn with_stack_depth(mut self, depth: usize) -> Self {
        for b in &mut self.layers {
            match b {
                BlockSpec::Gru { stack, .. } | BlockSpec::Lstm { stack, .. } => *stack = depth,
                BlockSpec::Conv { .. } => {}
            }
        }
        self
    }

    pub fn has_recurrent(&self) -> bool {
        self.layers.iter().any(|b| !matches!(b, BlockSpec::Conv { .. }))
    }
}

/// Widths used to instantiate the zoo.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZooSizes {
    pub conv_filters: [usize; 2],
    pub kernel: usize,
    pub hidden: usize,
    pub stack: usize,
    pub dense: [usize; 2],
}

impl Default for ZooSizes {
    fn default() -> Self {
        Self {
            conv_filters: [32, 64],
            kernel: 3,
            hidden: 64,
            stack: 2,
            dense: [64, 32],
        }
    }
}

impl ZooSizes {
    /// Narrow widths for quick runs.
    pub fn compact() -> Self {
        Self {
            conv_filters: [8, 16],
            kernel: 3,
            hidden: 16,
            stack: 2,
            dense: [32, 16],
        }
    }
}

/// Command-line names of the twelve comparison models, in report order.
pub const ZOO_NAMES: [&str; 12] = [
    "lstm",
    "bilstm",
    "gru",
    "cnn",
    "s-lstm",
    "s-bilstm",
    "s-gru",
    "cnn-lstm",
    "cnn-bilstm",
    "gru-cnn",
    "cnn-gru-dnn",
    "cnn-gru-dnn-s",
];

/// The proposed hybrid that the others are tested against.
pub const PROPOSED_MODEL: &str = "cnn-gru-dnn";

pub fn zoo_spec(name: &str, features: usize, sizes: ZooSizes) -> Option<ModelSpec> {
    let conv = |i: usize| BlockSpec::Conv {
        filters: sizes.conv_filters[i],
        kernel: sizes.kernel,
        padding: Padding::Same,
        activation: Activation::Relu,
    };
    let gru = |stack, direction| BlockSpec::Gru {
        hidden: sizes.hidden,
        stack,
        direction,
    };
    let lstm = |stack, direction| BlockSpec::Lstm {
        hidden: sizes.hidden,
        stack,
        direction,
    };
    let fwd = Direction::Forward;
    let bi = Direction::Bidirectional;
    let s = sizes.stack;
    let out = vec![DenseSpec::new(1, Activation::Linear)];
    let dnn = vec![
        DenseSpec::new(sizes.dense[0], Activation::Relu),
        DenseSpec::new(sizes.dense[1], Activation::Relu),
        DenseSpec::new(1, Activation::Linear),
    ];
    let (layers, attention, head) = match name {
        "lstm" => (vec![lstm(1, fwd)], false, out),
        "bilstm" => (vec![lstm(1, bi)], false, out),
        "gru" => (vec![gru(1, fwd)], false, out),
        "cnn" => (vec![conv(0), conv(1)], false, out),
        "s-lstm" => (vec![lstm(s, fwd)], false, out),
        "s-bilstm" => (vec![lstm(s, bi)], false, out),
        "s-gru" => (vec![gru(s, fwd)], false, out),
        "cnn-lstm" => (vec![conv(0), conv(1), lstm(s, fwd)], false, out),
        "cnn-bilstm" => (vec![conv(0), conv(1), lstm(s, bi)], false, out),
        "gru-cnn" => (vec![gru(s, fwd), conv(0), conv(1)], false, out),
        "cnn-gru-dnn" => (vec![conv(0), conv(1), gru(s, fwd)], false, dnn),
        "cnn-gru-dnn-s" => (vec![conv(0), conv(1), gru(s, fwd)], true, dnn),
        _ => return None,
    };
    Some(ModelSpec {
        name: name.to_string(),
        input_features: features,
        layers,
        attention,
        head,
    })
}

/// Display label used in reports.
pub fn display_name(name: &str) -> String {
    match name {
        "lstm" => "LSTM".into(),
        "bilstm" => "Bi-LSTM".into(),
        "gru" => "GRU".into(),
        "cnn" => "CNN".into(),
        "s-lstm" => "S-LSTM".into(),
        "s-bilstm" => "S-BiLSTM".into(),
        "s-gru" => "S-GRU".into(),
        "cnn-lstm" => "CNN-LSTM".into(),
        "cnn-bilstm" => "CNN-BiLSTM".into(),
        "gru-cnn" => "GRU-CNN".into(),
        "cnn-gru-dnn" => "CNN-GRU-DNN".into(),
        "cnn-gru-dnn-s" => "CNN-GRU-DNN-S".into(),
        other => other.to_string(),
    }
}

/// All twelve comparison specs.
pub fn zoo(features: usize, sizes: ZooSizes) -> Vec<ModelSpec> {
    ZOO_NAMES
        .iter()
        .map(|n| zoo_spec(n, features, sizes).expect("zoo name"))
        .collect()
}
