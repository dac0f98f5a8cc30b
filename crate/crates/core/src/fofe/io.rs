//! Model file layout, all little-endian:
//!
//! ```text
//! "FFLM" | version u16 | architecture tag u8
//! vocab_size u32 | embed_dim u32 | hidden_dim u32 | num_ff_layers u32
//! context_n u32 | forgetting_factor f64 | mode u8 | experts u32
//! vocab hash u64
//! parameters as f32, row-major, in construction order:
//!   embedding (V×E)
//!   per sub-network: ff0..ff{L-1} (weight, bias), proj (weight, bias)
//!     base: "subnet"; mixture: "expert0".."expert{M-1}"; AD: "VA", "STT"
//!   mixture only: gate ff0..ff{L-1}, gate.out
//!   output bias (base, mixture) or output.bias.VA, output.bias.STT (AD)
//! ```
//!
//! Tensor shapes are implied by the configuration.

use std::path::Path;

use super::{Architecture, FofeConfig, FofeMode, FofeModel};
use crate::container::{Reader, Writer, TAG_APP_DEPENDENT, TAG_BASE, TAG_MIXTURE};
use crate::error::{Error, Result};

fn arch_tag(arch: Architecture) -> u8 {
    match arch {
        Architecture::Base => TAG_BASE,
        Architecture::Mixture { .. } => TAG_MIXTURE,
        Architecture::AppDependent => TAG_APP_DEPENDENT,
    }
}

fn dim(v: usize) -> u32 {
    u32::try_from(v).expect("dimension fits in u32")
}

pub fn to_bytes(model: &FofeModel<f32>) -> Vec<u8> {
    let arch = model.architecture();
    let c = model.config();
    let mut w = Writer::new(arch_tag(arch));
    w.u32(dim(c.vocab_size));
    w.u32(dim(c.embed_dim));
    w.u32(dim(c.hidden_dim));
    w.u32(dim(c.num_ff_layers));
    w.u32(dim(c.context_n));
    w.f64(c.forgetting_factor);
    w.u8(c.mode.tag());
    w.u32(match arch {
        Architecture::Mixture { experts } => dim(experts),
        _ => 0,
    });
    w.u64(model.vocab_hash());
    for p in model.params().params() {
        for &x in p.value.iter() {
            w.f32(x);
        }
    }
    w.finish()
}

/// Parses a model, rejecting it if `expected_vocab` is given and differs
/// from the stored vocabulary hash.
pub fn from_bytes(buf: &[u8], expected_vocab: Option<u64>) -> Result<FofeModel<f32>> {
    let (mut r, tag) = Reader::open(buf)?;
    let mut config = FofeConfig {
        vocab_size: r.u32()? as usize,
        embed_dim: r.u32()? as usize,
        hidden_dim: r.u32()? as usize,
        num_ff_layers: r.u32()? as usize,
        context_n: r.u32()? as usize,
        forgetting_factor: r.f64()?,
        mode: FofeMode::Original,
    };
    config.mode = FofeMode::from_tag(r.u8()?)?;
    let experts = r.u32()? as usize;
    let arch = match tag {
        TAG_BASE => Architecture::Base,
        TAG_MIXTURE => Architecture::Mixture { experts },
        TAG_APP_DEPENDENT => Architecture::AppDependent,
        t => return Err(Error::UnknownArchitecture(t)),
    };
    let hash = r.u64()?;
    if let Some(expected) = expected_vocab {
        if expected != hash {
            return Err(Error::VocabMismatch {
                found: hash,
                expected,
            });
        }
    }
    let mut model = FofeModel::<f32>::from_parts(config, arch, hash)?;
    for p in model.params_mut().params_mut() {
        for x in p.value.iter_mut() {
            *x = r.f32()?;
        }
    }
    r.expect_end()?;
    Ok(model)
}

pub fn save(model: &FofeModel<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>, expected_vocab: Option<u64>) -> Result<FofeModel<f32>> {
    let path = path.as_ref();
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&buf, expected_vocab)
}
