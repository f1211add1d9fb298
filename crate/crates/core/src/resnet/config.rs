use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dropout rate used whenever a configuration enables dropout.
pub const DEFAULT_DROPOUT_RATE: f64 = 0.5;

const WIDTH_LETTERS: [(char, usize); 4] = [('a', 5), ('b', 10), ('c', 15), ('d', 20)];

/// Hidden width and regularization of the residual MLP, named like `c10`:
/// width letter, batch-norm digit, dropout digit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden_nodes: usize,
    pub use_batchnorm: bool,
    pub use_dropout: bool,
    pub dropout_rate: f64,
}

impl ModelConfig {
    pub fn new(hidden_nodes: usize, use_batchnorm: bool, use_dropout: bool) -> Self {
        ModelConfig {
            hidden_nodes,
            use_batchnorm,
            use_dropout,
            dropout_rate: DEFAULT_DROPOUT_RATE,
        }
    }

    /// The sixteen `a00`..`d11` configurations in letter-major order.
    pub fn grid() -> Vec<ModelConfig> {
        let mut out = Vec::with_capacity(16);
        for (_, width) in WIDTH_LETTERS {
            for bn in [false, true] {
                for dropout in [false, true] {
                    out.push(ModelConfig::new(width, bn, dropout));
                }
            }
        }
        out
    }

    pub fn name(&self) -> String {
        self.to_string()
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_nodes == 0 {
            return Err(Error::InvalidArgument("hidden width must be positive".into()));
        }
        crate::nn::check_dropout_rate(self.dropout_rate)
    }
}

impl fmt::Display for ModelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let letter = WIDTH_LETTERS
            .iter()
            .find(|(_, w)| *w == self.hidden_nodes)
            .map(|(c, _)| c.to_string())
            .unwrap_or_else(|| format!("w{}-", self.hidden_nodes));
        write!(
            f,
            "{letter}{}{}",
            u8::from(self.use_batchnorm),
            u8::from(self.use_dropout)
        )
    }
}

impl FromStr for ModelConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("bad configuration id {s:?}"));
        let s = s.trim();
        let mut chars = s.chars();
        let letter = chars.next().ok_or_else(bad)?.to_ascii_lowercase();
        let width = WIDTH_LETTERS
            .iter()
            .find(|(c, _)| *c == letter)
            .map(|(_, w)| *w)
            .ok_or_else(bad)?;
        let digit = |c: Option<char>| match c {
            Some('0') => Ok(false),
            Some('1') => Ok(true),
            _ => Err(bad()),
        };
        let bn = digit(chars.next())?;
        let dropout = digit(chars.next())?;
        if chars.next().is_some() {
            return Err(bad());
        }
        Ok(ModelConfig::new(width, bn, dropout))
    }
}

/// Depth layout: `block_count` blocks of `layers_per_block` dense layers,
/// plus an input and an output layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub layers_per_block: usize,
    pub block_count: usize,
    /// Identity shortcuts around each block. `false` gives the plain MLP baseline.
    #[serde(default = "yes")]
    pub residual: bool,
}

fn yes() -> bool {
    true
}

/// Architectures of the depth sweep, two-layer blocks first.
pub const SWEEP_DEPTHS: [(usize, usize); 8] = [
    (10, 2),
    (18, 2),
    (34, 2),
    (50, 3),
    (74, 3),
    (101, 3),
    (122, 3),
    (152, 3),
];

impl ArchitectureSpec {
    /// Splits a total depth into blocks; `depth - 2` must divide evenly.
    pub fn from_depth(depth: usize, layers_per_block: usize) -> Result<Self> {
        if !(2..=3).contains(&layers_per_block) {
            return Err(Error::InvalidArgument(format!(
                "blocks hold 2 or 3 layers, got {layers_per_block}"
            )));
        }
        if depth < 2 + layers_per_block || (depth - 2) % layers_per_block != 0 {
            return Err(Error::InvalidArgument(format!(
                "depth {depth} is not 2 + a multiple of {layers_per_block}"
            )));
        }
        Ok(ArchitectureSpec {
            layers_per_block,
            block_count: (depth - 2) / layers_per_block,
            residual: true,
        })
    }

    pub fn plain(depth: usize) -> Result<Self> {
        Ok(ArchitectureSpec {
            residual: false,
            ..Self::from_depth(depth, 2)?
        })
    }

    pub fn sweep() -> Vec<ArchitectureSpec> {
        SWEEP_DEPTHS
            .iter()
            .map(|&(d, l)| Self::from_depth(d, l).expect("sweep depths are valid"))
            .collect()
    }

    pub fn depth(&self) -> usize {
        self.block_count * self.layers_per_block + 2
    }

    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ArchitectureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = if self.residual { "ResNet" } else { "Plain" };
        let default_lpb = SWEEP_DEPTHS
            .iter()
            .find(|(d, _)| *d == self.depth())
            .map_or(2, |(_, l)| *l);
        if self.layers_per_block == default_lpb {
            write!(f, "{prefix}{}", self.depth())
        } else {
            write!(f, "{prefix}{}x{}", self.depth(), self.layers_per_block)
        }
    }
}

impl FromStr for ArchitectureSpec {
    type Err = Error;

    /// Accepts `ResNet34`, `Plain34`, or `ResNet26x3` for an explicit block size.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let lower = s.to_ascii_lowercase();
        let (residual, rest) = if let Some(r) = lower.strip_prefix("resnet") {
            (true, r)
        } else if let Some(r) = lower.strip_prefix("plain") {
            (false, r)
        } else {
            return Err(Error::InvalidArgument(format!("bad architecture {s:?}")));
        };
        let (depth, lpb) = match rest.split_once('x') {
            Some((d, l)) => (d, Some(l)),
            None => (rest, None),
        };
        let depth: usize = depth
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad architecture {s:?}")))?;
        let lpb = match lpb {
            Some(l) => l
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad architecture {s:?}")))?,
            None => SWEEP_DEPTHS
                .iter()
                .find(|(d, _)| *d == depth)
                .map_or(2, |(_, l)| *l),
        };
        let mut arch = Self::from_depth(depth, lpb)?;
        arch.residual = residual;
        Ok(arch)
    }
}
