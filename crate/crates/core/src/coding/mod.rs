//! The five data-channel codecs, each operated at rate 1/3.
//!
//! | scheme        | construction                                       | tail bits |
//! |---------------|----------------------------------------------------|-----------|
//! | Convolutional | K = 7, (133, 171, 165), soft Viterbi               | 18        |
//! | RCPC          | same mother code behind a puncturer (identity)     | 18        |
//! | Trellis       | K = 4, (13, 15, 17), soft Viterbi                  | 9         |
//! | Turbo         | 2 x 8-state RSC (13, 15), QPP, max-log-MAP         | 12        |
//! | LDPC          | QC dual-diagonal, normalized min-sum               | 0         |
//!
//! Tail bits are excluded from the rate accounting, so every scheme maps
//! `K` information bits to `3K` payload bits.

pub mod conv;
pub mod ldpc;
pub mod turbo;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::techprofiles::CodingScheme;
use conv::{ConvCode, Puncturer};
use ldpc::LdpcCode;
use turbo::TurboCode;

/// Serializable codec parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodecSpec {
    pub scheme: CodingScheme,
    pub info_block_bits: usize,
    /// Iteration cap for Turbo and LDPC; ignored by the trellis decoders.
    pub decoder_iterations: usize,
    /// Optional puncturing pattern for RCPC (rows = mother outputs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub puncture_pattern: Option<Vec<Vec<bool>>>,
}

impl CodecSpec {
    pub fn new(scheme: CodingScheme, info_block_bits: usize) -> Self {
        let decoder_iterations = match scheme {
            CodingScheme::Turbo => 8,
            CodingScheme::Ldpc => 25,
            _ => 1,
        };
        Self {
            scheme,
            info_block_bits,
            decoder_iterations,
            puncture_pattern: None,
        }
    }
}

#[derive(Debug, Clone)]
enum Engine {
    Trellis { code: ConvCode, puncturer: Puncturer },
    Turbo(TurboCode),
    Ldpc(LdpcCode),
}

/// A constructed codec. Immutable; encode and decode are pure.
#[derive(Debug, Clone)]
pub struct Codec {
    spec: CodecSpec,
    engine: Engine,
}

impl Codec {
    pub fn new(spec: &CodecSpec) -> Result<Self> {
        if spec.info_block_bits == 0 {
            return Err(Error::config("codec.info_block_bits", "must be > 0"));
        }
        if spec.puncture_pattern.is_some() && spec.scheme != CodingScheme::Rcpc {
            return Err(Error::config("codec.puncture_pattern", "only valid for RCPC"));
        }
        let engine = match spec.scheme {
            CodingScheme::Convolutional | CodingScheme::Rcpc => {
                let code = ConvCode::k7_rate_third();
                let puncturer = match &spec.puncture_pattern {
                    Some(p) => Puncturer { pattern: p.clone() },
                    None => Puncturer::identity(code.n_out()),
                };
                puncturer.validate(code.n_out())?;
                if (puncturer.kept_fraction() - 1.0).abs() > 1e-12 {
                    return Err(Error::config(
                        "codec.puncture_pattern",
                        "the simulated chain runs every scheme at rate 1/3; only the identity pattern is accepted",
                    ));
                }
                Engine::Trellis { code, puncturer }
            }
            CodingScheme::Trellis => {
                let code = ConvCode::k4_rate_third();
                let puncturer = Puncturer::identity(code.n_out());
                Engine::Trellis { code, puncturer }
            }
            CodingScheme::Turbo => Engine::Turbo(TurboCode::new(spec.info_block_bits, spec.decoder_iterations)?),
            CodingScheme::Ldpc => Engine::Ldpc(LdpcCode::new(spec.info_block_bits, spec.decoder_iterations)?),
        };
        Ok(Self {
            spec: spec.clone(),
            engine,
        })
    }

    pub fn spec(&self) -> &CodecSpec {
        &self.spec
    }

    pub fn info_bits(&self) -> usize {
        self.spec.info_block_bits
    }

    /// Total transmitted bits per block, tail included.
    pub fn coded_len(&self) -> usize {
        match &self.engine {
            Engine::Trellis { code, puncturer } => puncturer.punctured_len(code.coded_len(self.info_bits())),
            Engine::Turbo(t) => t.coded_len(),
            Engine::Ldpc(l) => l.coded_len(),
        }
    }

    /// Termination overhead excluded from the rate accounting.
    pub fn termination_bits(&self) -> usize {
        self.coded_len() - 3 * self.info_bits()
    }

    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.info_bits() {
            return Err(Error::Contract(format!(
                "expected {} info bits, got {}",
                self.info_bits(),
                info.len()
            )));
        }
        Ok(match &self.engine {
            Engine::Trellis { code, puncturer } => puncturer.puncture(&code.encode(info)),
            Engine::Turbo(t) => t.encode(info),
            Engine::Ldpc(l) => l.encode(info),
        })
    }

    /// Decodes channel LLRs (positive means bit 0) to info-bit decisions.
    pub fn decode(&self, llrs: &[f64]) -> Result<Vec<u8>> {
        if llrs.len() != self.coded_len() {
            return Err(Error::LengthMismatch {
                expected: self.coded_len(),
                actual: llrs.len(),
            });
        }
        match &self.engine {
            Engine::Trellis { code, puncturer } => {
                let mother = puncturer.depuncture(llrs, code.coded_len(self.info_bits()))?;
                code.viterbi(&mother, self.info_bits())
            }
            Engine::Turbo(t) => t.decode(llrs),
            Engine::Ldpc(l) => l.decode(llrs),
        }
    }
}

pub const ALL_SCHEMES: [CodingScheme; 5] = [
    CodingScheme::Convolutional,
    CodingScheme::Rcpc,
    CodingScheme::Trellis,
    CodingScheme::Turbo,
    CodingScheme::Ldpc,
];
