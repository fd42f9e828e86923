//! Declarative model descriptions and the plain-text registry format.
//!
//! A registry holds one stanza per model:
//!
//! ```text
//! [cnn_small]
//! kind = cnn
//! input = 1x28x28
//! conv = 16x5, 32x5
//! pool = 2
//! widths = 512, 36, 10
//! ```
//!
//! Omitted keys take their defaults (`grid = 3`, `order = 3`, `base = true`,
//! `activation = relu`, `pool = 2`, `seed = 42`).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::layers::ActivationKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// KAN layers evaluated in the expanded `(batch, out, in)` form.
    Kan,
    /// KAN layers evaluated as `Phi(X) * C^T`.
    EfficientKan,
    Mlp,
    /// Standard conv stages (conv, ReLU, max-pool) and an MLP head.
    Cnn,
    /// KAN conv stages and an MLP head.
    KanConvMlp,
    /// KAN conv stages and a KAN head.
    KanConvKan,
    /// Standard conv stages and a KAN head.
    CnnKan,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Kan,
        ModelKind::EfficientKan,
        ModelKind::Mlp,
        ModelKind::Cnn,
        ModelKind::KanConvMlp,
        ModelKind::KanConvKan,
        ModelKind::CnnKan,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Kan => "kan",
            ModelKind::EfficientKan => "efficient_kan",
            ModelKind::Mlp => "mlp",
            ModelKind::Cnn => "cnn",
            ModelKind::KanConvMlp => "kan_conv_mlp",
            ModelKind::KanConvKan => "kan_conv_kan",
            ModelKind::CnnKan => "cnn_kan",
        }
    }

    pub fn has_conv(self) -> bool {
        matches!(
            self,
            ModelKind::Cnn | ModelKind::KanConvMlp | ModelKind::KanConvKan | ModelKind::CnnKan
        )
    }

    pub fn spline_conv(self) -> bool {
        matches!(self, ModelKind::KanConvMlp | ModelKind::KanConvKan)
    }

    pub fn kan_head(self) -> bool {
        matches!(
            self,
            ModelKind::Kan | ModelKind::EfficientKan | ModelKind::KanConvKan | ModelKind::CnnKan
        )
    }

    /// Whether any layer carries splines, i.e. grid and order matter.
    pub fn uses_splines(self) -> bool {
        self.kan_head() || self.spline_conv()
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| {
                let names: Vec<_> = ModelKind::ALL.iter().map(|k| k.as_str()).collect();
                Error::InvalidSpec(format!("unknown model kind `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

/// One convolution stage: `channels` output maps with a square `kernel`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvStage {
    pub channels: usize,
    pub kernel: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub name: String,
    pub kind: ModelKind,
    /// Per-sample input `[c, h, w]`.
    pub input: [usize; 3],
    /// Head widths; the first entry is the flattened size fed to the head.
    pub widths: Vec<usize>,
    pub conv: Vec<ConvStage>,
    pub pool: usize,
    pub activation: ActivationKind,
    pub grid: usize,
    pub order: usize,
    pub base: bool,
    pub seed: u64,
}

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_GRID: usize = 3;
pub const DEFAULT_ORDER: usize = 3;

impl ModelSpec {
    /// A dense model on flattened MNIST-sized input with default
    /// hyperparameters.
    pub fn dense(kind: ModelKind, widths: &[usize]) -> Self {
        let input = match widths.first() {
            _ if kind.has_conv() => [1, 28, 28],
            Some(&784) | None => [1, 28, 28],
            Some(&3072) => [3, 32, 32],
            Some(&n) => [1, 1, n],
        };
        Self {
            name: format!("{kind}{}", format_widths(widths)),
            kind,
            input,
            widths: widths.to_vec(),
            conv: Vec::new(),
            pool: 2,
            activation: ActivationKind::Relu,
            grid: DEFAULT_GRID,
            order: DEFAULT_ORDER,
            base: true,
            seed: DEFAULT_SEED,
        }
    }

    pub fn with_grid_order(mut self, grid: usize, order: usize) -> Self {
        self.grid = grid;
        self.order = order;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn input_len(&self) -> usize {
        self.input.iter().product()
    }

    pub fn classes(&self) -> usize {
        self.widths.last().copied().unwrap_or(0)
    }

    /// Per-sample shape after the conv stages, or the input when there are none.
    pub fn conv_output(&self) -> Result<[usize; 3]> {
        let [mut c, mut h, mut w] = self.input;
        for (i, stage) in self.conv.iter().enumerate() {
            if stage.kernel > h || stage.kernel > w {
                return Err(Error::InvalidSpec(format!(
                    "conv stage {} kernel {} exceeds {h}x{w} input",
                    i + 1,
                    stage.kernel
                )));
            }
            c = stage.channels;
            h = (h - stage.kernel + 1) / self.pool;
            w = (w - stage.kernel + 1) / self.pool;
            if h == 0 || w == 0 {
                return Err(Error::InvalidSpec(format!("conv stage {} pools the map to nothing", i + 1)));
            }
        }
        Ok([c, h, w])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(format!("{}: {msg}", self.name)));
        if self.widths.len() < 2 {
            return bad(format!("widths {:?} need at least input and output", self.widths));
        }
        if self.widths.contains(&0) || self.input.contains(&0) {
            return bad("zero width".into());
        }
        if self.kind.uses_splines() {
            if self.grid < 1 {
                return bad("grid must be at least 1".into());
            }
            if self.order > crate::bspline::MAX_DEGREE {
                return bad(format!("order {} above {}", self.order, crate::bspline::MAX_DEGREE));
            }
        }
        if self.kind.has_conv() {
            if self.conv.is_empty() {
                return bad(format!("kind {} needs conv stages", self.kind));
            }
            if self.pool == 0 {
                return bad("pool must be at least 1".into());
            }
            if self.conv.iter().any(|s| s.channels == 0 || s.kernel == 0) {
                return bad("conv stages need positive channels and kernel".into());
            }
        } else if !self.conv.is_empty() {
            return bad(format!("kind {} takes no conv stages", self.kind));
        }
        let flat: usize = self.conv_output()?.iter().product();
        if self.widths[0] != flat {
            return bad(format!(
                "first width {} does not match the {} features reaching the head",
                self.widths[0], flat
            ));
        }
        Ok(())
    }

    /// Serialises as a registry stanza. Parsing the result yields `self`.
    pub fn to_stanza(&self) -> String {
        let mut s = format!("[{}]\n", self.name);
        s.push_str(&format!("kind = {}\n", self.kind));
        s.push_str(&format!("input = {}x{}x{}\n", self.input[0], self.input[1], self.input[2]));
        if !self.conv.is_empty() {
            let stages: Vec<String> = self.conv.iter().map(|c| format!("{}x{}", c.channels, c.kernel)).collect();
            s.push_str(&format!("conv = {}\n", stages.join(", ")));
        }
        s.push_str(&format!("pool = {}\n", self.pool));
        let widths: Vec<String> = self.widths.iter().map(|w| w.to_string()).collect();
        s.push_str(&format!("widths = {}\n", widths.join(", ")));
        s.push_str(&format!("activation = {}\n", self.activation.name()));
        s.push_str(&format!("grid = {}\n", self.grid));
        s.push_str(&format!("order = {}\n", self.order));
        s.push_str(&format!("base = {}\n", self.base));
        s.push_str(&format!("seed = {}\n", self.seed));
        s
    }
}

pub fn format_widths(widths: &[usize]) -> String {
    let parts: Vec<String> = widths.iter().map(|w| w.to_string()).collect();
    format!("[{}]", parts.join(","))
}

/// Parses `784,16,10`, `[784, 16, 10]` or `784-16-10`.
pub fn parse_widths(s: &str) -> Result<Vec<usize>> {
    let inner = s.trim().trim_start_matches('[').trim_end_matches(']');
    inner
        .split([',', '-', ' '])
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidSpec(format!("bad width `{p}` in `{s}`")))
        })
        .collect()
}

fn parse_dims(s: &str) -> Result<Vec<usize>> {
    s.split('x')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidSpec(format!("bad dimension `{p}` in `{s}`")))
        })
        .collect()
}

fn parse_conv(s: &str) -> Result<Vec<ConvStage>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| match parse_dims(p)?[..] {
            [channels, kernel] => Ok(ConvStage { channels, kernel }),
            _ => Err(Error::InvalidSpec(format!("conv stage `{p}` should be CHANNELSxKERNEL"))),
        })
        .collect()
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::InvalidSpec(format!("bad boolean `{s}`"))),
    }
}

fn parse_num<N: FromStr>(key: &str, value: &str) -> Result<N> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidSpec(format!("bad value `{value}` for `{key}`")))
}

/// Parses every stanza in a registry text. Specs are validated.
pub fn parse_registry(text: &str) -> Result<Vec<ModelSpec>> {
    let mut specs = Vec::new();
    let mut current: Option<(String, Vec<(String, String)>)> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            if let Some((n, kv)) = current.take() {
                specs.push(spec_from_pairs(&n, &kv)?);
            }
            current = Some((name.trim().to_string(), Vec::new()));
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::InvalidSpec(format!("line {}: expected `key = value`, got `{line}`", lineno + 1)));
        };
        match current.as_mut() {
            Some((_, kv)) => kv.push((key.trim().to_string(), value.trim().to_string())),
            None => {
                return Err(Error::InvalidSpec(format!(
                    "line {}: `{}` appears before any [model] header",
                    lineno + 1,
                    key.trim()
                )))
            }
        }
    }
    if let Some((n, kv)) = current.take() {
        specs.push(spec_from_pairs(&n, &kv)?);
    }
    Ok(specs)
}

fn spec_from_pairs(name: &str, pairs: &[(String, String)]) -> Result<ModelSpec> {
    let get = |k: &str| pairs.iter().rev().find(|(key, _)| key == k).map(|(_, v)| v.as_str());
    for (key, _) in pairs {
        if !matches!(
            key.as_str(),
            "kind" | "input" | "conv" | "pool" | "widths" | "activation" | "grid" | "order" | "base" | "seed"
        ) {
            return Err(Error::InvalidSpec(format!("[{name}]: unknown key `{key}`")));
        }
    }
    let kind: ModelKind = get("kind")
        .ok_or_else(|| Error::InvalidSpec(format!("[{name}]: missing `kind`")))?
        .parse()?;
    let widths = parse_widths(get("widths").ok_or_else(|| Error::InvalidSpec(format!("[{name}]: missing `widths`")))?)?;
    let mut spec = ModelSpec::dense(kind, &widths);
    spec.name = name.to_string();
    if let Some(v) = get("input") {
        spec.input = match parse_dims(v)?[..] {
            [c, h, w] => [c, h, w],
            [n] => [1, 1, n],
            _ => return Err(Error::InvalidSpec(format!("[{name}]: input `{v}` should be CxHxW"))),
        };
    }
    if let Some(v) = get("conv") {
        spec.conv = parse_conv(v)?;
    }
    if let Some(v) = get("pool") {
        spec.pool = parse_num("pool", v)?;
    }
    if let Some(v) = get("activation") {
        spec.activation = v.parse().map_err(|_| Error::InvalidSpec(format!("[{name}]: bad activation `{v}`")))?;
    }
    if let Some(v) = get("grid") {
        spec.grid = parse_num("grid", v)?;
    }
    if let Some(v) = get("order") {
        spec.order = parse_num("order", v)?;
    }
    if let Some(v) = get("base") {
        spec.base = parse_bool(v)?;
    }
    if let Some(v) = get("seed") {
        spec.seed = parse_num("seed", v)?;
    }
    spec.validate()?;
    Ok(spec)
}

/// Reconstructed convolutional comparison models plus the dense baselines,
/// in the registry format.
pub const BUILTIN_REGISTRY: &str = include_str!("registry.cfg");

pub fn builtin_specs() -> Vec<ModelSpec> {
    parse_registry(BUILTIN_REGISTRY).expect("built-in registry is valid")
}

pub fn builtin(name: &str) -> Option<ModelSpec> {
    builtin_specs().into_iter().find(|s| s.name == name)
}
