use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How successive word embeddings are folded into the running code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum FofeMode {
    /// `z_m = α z_{m-1} + e_m`: geometric forgetting, order-preserving.
    #[default]
    Original,
    /// `z_m = z_{m-1} + α e_m`: collapses to `α Σ e_t`, order is lost.
    /// Kept only for side-by-side comparison.
    Literal,
}

impl FofeMode {
    /// `(a, b)` in `z_m = a z_{m-1} + b e_m`.
    pub fn coefficients(self, alpha: f64) -> (f64, f64) {
        match self {
            FofeMode::Original => (alpha, 1.0),
            FofeMode::Literal => (1.0, alpha),
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            FofeMode::Original => 0,
            FofeMode::Literal => 1,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(FofeMode::Original),
            1 => Ok(FofeMode::Literal),
            t => Err(Error::Invalid(format!("unknown FOFE mode tag {t}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Architecture {
    Base,
    Mixture { experts: usize },
    AppDependent,
}

impl Architecture {
    pub fn name(&self) -> &'static str {
        match self {
            Architecture::Base => "base",
            Architecture::Mixture { .. } => "mixture",
            Architecture::AppDependent => "app-dependent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FofeConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub num_ff_layers: usize,
    /// Number of consecutive FOFE codes concatenated into the context.
    pub context_n: usize,
    pub forgetting_factor: f64,
    #[serde(default)]
    pub mode: FofeMode,
}

impl FofeConfig {
    pub const DEFAULT_EMBED: usize = 256;
    pub const DEFAULT_LAYERS: usize = 4;
    pub const DEFAULT_CONTEXT_N: usize = 8;
    pub const HIDDEN_BASE: usize = 768;
    pub const HIDDEN_SUBNET: usize = 512;
    pub const DEFAULT_VOCAB: usize = 100_000;
    pub const DEFAULT_FORGETTING: f64 = 0.7;

    /// Full-size dimensions for `arch`: E = 256, L = 4, n = 8, and hidden
    /// 768 for the base model or 512 for mixture / application-dependent.
    pub fn full_size(arch: Architecture, vocab_size: usize) -> Self {
        FofeConfig {
            vocab_size,
            embed_dim: Self::DEFAULT_EMBED,
            hidden_dim: match arch {
                Architecture::Base => Self::HIDDEN_BASE,
                _ => Self::HIDDEN_SUBNET,
            },
            num_ff_layers: Self::DEFAULT_LAYERS,
            context_n: Self::DEFAULT_CONTEXT_N,
            forgetting_factor: Self::DEFAULT_FORGETTING,
            mode: FofeMode::Original,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.forgetting_factor;
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::Config(format!("forgetting factor {a} outside (0, 1]")));
        }
        if self.context_n == 0 || self.embed_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::Config("context_n, embed_dim and hidden_dim must be >= 1".into()));
        }
        if self.num_ff_layers == 0 {
            return Err(Error::Config("at least one feed-forward layer is required".into()));
        }
        if self.vocab_size < 4 {
            return Err(Error::Config("vocabulary must hold the reserved tokens".into()));
        }
        Ok(())
    }

    /// Width of the flattened FOFE context fed to the first layer.
    pub fn input_dim(&self) -> usize {
        self.context_n * self.embed_dim
    }
}

/// Closed-form scalar parameter count.
///
/// With `FF(H) = (nE·H + H) + (L−1)(H² + H)` for a feed-forward stack and
/// `S(H) = FF(H) + H·E + E` for a sub-network ending in a projection to E:
///
/// * base: `V·E + S(H) + V`
/// * mixture of M: `V·E + M·S(H) + FF(H) + H·M + M + V`
/// * application-dependent: `V·E + 2·S(H) + 2·V`
///
/// Output logits reuse the embedding matrix, so there is no `E·V` term.
pub fn parameter_count(config: &FofeConfig, arch: Architecture) -> usize {
    let (v, e, h, l) = (
        config.vocab_size,
        config.embed_dim,
        config.hidden_dim,
        config.num_ff_layers,
    );
    let ff = config.input_dim() * h + h + (l - 1) * (h * h + h);
    let subnet = ff + h * e + e;
    match arch {
        Architecture::Base => v * e + subnet + v,
        Architecture::Mixture { experts } => {
            v * e + experts * subnet + ff + h * experts + experts + v
        }
        Architecture::AppDependent => v * e + 2 * subnet + 2 * v,
    }
}

/// Hidden size whose parameter count for `arch` is closest to `budget`.
pub fn hidden_for_budget(config: &FofeConfig, arch: Architecture, budget: usize) -> usize {
    (1..=4 * config.hidden_dim.max(64))
        .min_by_key(|&h| {
            let c = FofeConfig {
                hidden_dim: h,
                ..*config
            };
            (parameter_count(&c, arch) as i64 - budget as i64).unsigned_abs()
        })
        .expect("non-empty range")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let mut c = FofeConfig::full_size(Architecture::Base, 100);
        c.validate().unwrap();
        c.forgetting_factor = 0.0;
        assert!(c.validate().is_err());
        c.forgetting_factor = 1.5;
        assert!(c.validate().is_err());
        c.forgetting_factor = 1.0;
        c.context_n = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn full_size_counts() {
        // V = 100k, E = 256, n = 8, L = 4
        let base = FofeConfig::full_size(Architecture::Base, 100_000);
        let ff768 = 2048 * 768 + 768 + 3 * (768 * 768 + 768);
        assert_eq!(
            parameter_count(&base, Architecture::Base),
            100_000 * 256 + ff768 + 768 * 256 + 256 + 100_000
        );
        let ad = FofeConfig::full_size(Architecture::AppDependent, 100_000);
        let ff512 = 2048 * 512 + 512 + 3 * (512 * 512 + 512);
        assert_eq!(
            parameter_count(&ad, Architecture::AppDependent),
            100_000 * 256 + 2 * (ff512 + 512 * 256 + 256) + 200_000
        );
    }

    #[test]
    fn budget_search_hits_nearby() {
        let c = FofeConfig {
            vocab_size: 500,
            embed_dim: 16,
            hidden_dim: 64,
            num_ff_layers: 2,
            context_n: 4,
            forgetting_factor: 0.7,
            mode: FofeMode::Original,
        };
        let budget = parameter_count(&c, Architecture::Base);
        let h = hidden_for_budget(&c, Architecture::AppDependent, budget);
        let ad = FofeConfig { hidden_dim: h, ..c };
        let got = parameter_count(&ad, Architecture::AppDependent) as f64;
        assert!((got / budget as f64 - 1.0).abs() < 0.05);
        assert!(h < 64);
    }
}
