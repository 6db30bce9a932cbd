//! One pass through the physical layer: encode, modulate, fade, add noise,
//! combine, demodulate, decode.

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{sample_cn, FadingMatrix};
use crate::coding::Codec;
use crate::error::Result;
use crate::mimo::{alamouti_combine, alamouti_encode, propagate};
use crate::modem::{demodulate_soft, hard_decisions, modulate, ModulationSpec};

use super::AntennaScheme;

/// Channel state for one attempt. Gains already include the large-scale
/// amplitude, so a unit-amplitude AWGN link is `Siso(vec![1])`.
#[derive(Debug, Clone)]
pub enum AttemptChannel {
    /// One complex gain per fading block.
    Siso(Vec<Complex64>),
    /// One 2x2 matrix per fading block plus the common amplitude.
    Alamouti { blocks: Vec<FadingMatrix>, amplitude: f64 },
}

impl AttemptChannel {
    fn n_blocks(&self) -> usize {
        match self {
            AttemptChannel::Siso(g) => g.len(),
            AttemptChannel::Alamouti { blocks, .. } => blocks.len(),
        }
    }
}

/// Outcome of decoding one transmitted block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttemptOutcome {
    pub bit_errors: u64,
}

impl AttemptOutcome {
    pub fn success(&self) -> bool {
        self.bit_errors == 0
    }
}

/// A fixed modem + codec pipeline. Immutable and shareable across workers.
#[derive(Debug, Clone)]
pub struct Chain {
    codec: Option<Codec>,
    modulation: ModulationSpec,
    antenna: AntennaScheme,
    info_bits: usize,
    /// Bits handed to the modulator (codeword plus zero padding to whole symbols).
    padded_bits: usize,
    /// Complex noise variance per sample; carries the implementation loss.
    noise_var: f64,
}

impl Chain {
    pub fn new(codec: Option<Codec>, modulation: ModulationSpec, antenna: AntennaScheme, info_bits: usize) -> Result<Self> {
        modulation.validate()?;
        let payload = codec.as_ref().map_or(info_bits, Codec::coded_len);
        let k = modulation.bits_per_symbol();
        let padded_bits = payload.div_ceil(k) * k;
        let noise_var = 10f64.powf(modulation.implementation_loss_db / 10.0);
        Ok(Self {
            codec,
            modulation,
            antenna,
            info_bits,
            padded_bits,
            noise_var,
        })
    }

    pub fn info_bits(&self) -> usize {
        self.info_bits
    }

    /// Bits on the air per attempt, tail and padding included.
    pub fn transmitted_bits(&self) -> usize {
        self.padded_bits
    }

    pub fn modulation(&self) -> &ModulationSpec {
        &self.modulation
    }

    pub fn antenna(&self) -> AntennaScheme {
        self.antenna
    }

    /// Draws random info bits and the symbols that carry them.
    pub fn prepare<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Vec<u8>, Vec<Complex64>)> {
        let info: Vec<u8> = (0..self.info_bits).map(|_| rng.random_range(0..2u8)).collect();
        let mut bits = match &self.codec {
            Some(c) => c.encode(&info)?,
            None => info.clone(),
        };
        bits.resize(self.padded_bits, 0);
        let symbols = modulate(&self.modulation, &bits)?;
        Ok((info, symbols))
    }

    /// Sends prepared symbols through one channel state and counts info-bit errors.
    pub fn attempt<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        info: &[u8],
        samples: &[Complex64],
        channel: &AttemptChannel,
    ) -> Result<AttemptOutcome> {
        let dims = self.modulation.dims();
        let n_sym = samples.len() / dims;
        let n_blocks = channel.n_blocks().max(1);
        let sigma = self.noise_var.sqrt();
        let mut received = Vec::with_capacity(samples.len());
        let mut csi = Vec::with_capacity(n_sym);
        match channel {
            AttemptChannel::Siso(gains) => {
                for (i, chunk) in samples.chunks_exact(dims).enumerate() {
                    let g = gains[i % n_blocks];
                    for &x in chunk {
                        received.push(g * x + sample_cn(rng) * sigma);
                    }
                    csi.push(g);
                }
            }
            AttemptChannel::Alamouti { blocks, amplitude } => {
                // Samples are paired in time. For one-sample symbols a pair
                // spans two symbols, so the block index follows the pair.
                let block_of = |sample: usize| {
                    let unit = if dims == 1 { sample / 2 } else { sample / dims };
                    unit % n_blocks
                };
                let zero = Complex64::new(0.0, 0.0);
                let mut scales = vec![0.0; n_sym];
                for (p, pair) in samples.chunks(2).enumerate() {
                    let s1 = pair[0];
                    let s2 = pair.get(1).copied().unwrap_or(zero);
                    let h = &blocks[block_of(2 * p)];
                    let stbc = alamouti_encode(s1, s2);
                    let mut r = propagate(&stbc, h);
                    for row in r.iter_mut() {
                        for v in row.iter_mut() {
                            *v = *v * *amplitude + sample_cn(rng) * sigma;
                        }
                    }
                    let out = alamouti_combine(&r, h)?;
                    // Rescale to y = sqrt(scale) a s + CN(0, N0)
                    let root = out.effective_snr_scale.sqrt();
                    for (t, est) in out.estimates.iter().enumerate().take(pair.len()) {
                        received.push(est * root);
                        scales[(2 * p + t) / dims] = root * amplitude;
                    }
                }
                csi.extend(scales.into_iter().map(|s| Complex64::new(s, 0.0)));
            }
        }
        let llrs = demodulate_soft(&self.modulation, &received, &csi, self.noise_var)?;
        let decoded = match &self.codec {
            Some(c) => c.decode(&llrs[..c.coded_len()])?,
            None => hard_decisions(&llrs[..self.info_bits]),
        };
        let bit_errors = decoded.iter().zip(info).filter(|(a, b)| a != b).count() as u64;
        Ok(AttemptOutcome { bit_errors })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::CodecSpec;
    use crate::montecarlo::split_stream;
    use crate::techprofiles::{CodingScheme, ModulationScheme};

    fn strong(antenna: AntennaScheme) -> AttemptChannel {
        match antenna {
            AntennaScheme::Siso => AttemptChannel::Siso(vec![Complex64::new(300.0, 0.0)]),
            AntennaScheme::Alamouti2x2 => AttemptChannel::Alamouti {
                blocks: vec![FadingMatrix::identity(2)],
                amplitude: 300.0,
            },
        }
    }

    #[test]
    fn high_snr_round_trip_every_modem_and_antenna() {
        let schemes = [
            ModulationScheme::Gmsk,
            ModulationScheme::Pi4Dqpsk,
            ModulationScheme::Fsk4,
            ModulationScheme::Qpsk,
            ModulationScheme::Qam16,
            ModulationScheme::Qam64,
            ModulationScheme::Qam256,
        ];
        let mut rng = split_stream(50, 0);
        for m in schemes {
            for antenna in [AntennaScheme::Siso, AntennaScheme::Alamouti2x2] {
                let codec = Codec::new(&CodecSpec::new(CodingScheme::Convolutional, 101)).unwrap();
                let chain = Chain::new(Some(codec), ModulationSpec::new(m), antenna, 101).unwrap();
                let (info, syms) = chain.prepare(&mut rng).unwrap();
                let out = chain.attempt(&mut rng, &info, &syms, &strong(antenna)).unwrap();
                assert!(out.success(), "{m:?} {antenna:?}");
            }
        }
    }

    #[test]
    fn padding_reaches_whole_symbols() {
        let codec = Codec::new(&CodecSpec::new(CodingScheme::Convolutional, 100)).unwrap();
        let chain = Chain::new(Some(codec), ModulationSpec::new(ModulationScheme::Qam256), AntennaScheme::Siso, 100).unwrap();
        // 318 coded bits padded to 40 symbols of 8 bits
        assert_eq!(chain.transmitted_bits(), 320);
    }

    #[test]
    fn alamouti_on_identity_matches_siso_statistics() {
        // With H = I the combiner output is the symbol plus CN(0, N0), the same
        // as a SISO link with unit gain, so uncoded error counts agree closely.
        let spec = ModulationSpec::new(ModulationScheme::Qpsk);
        let siso = Chain::new(None, spec, AntennaScheme::Siso, 2000).unwrap();
        let mimo = Chain::new(None, spec, AntennaScheme::Alamouti2x2, 2000).unwrap();
        let a = 10f64.powf(3.0 / 20.0);
        let (mut e1, mut e2) = (0, 0);
        let mut rng = split_stream(51, 0);
        for _ in 0..50 {
            let (info, syms) = siso.prepare(&mut rng).unwrap();
            e1 += siso
                .attempt(&mut rng, &info, &syms, &AttemptChannel::Siso(vec![Complex64::new(a, 0.0)]))
                .unwrap()
                .bit_errors;
            let ch = AttemptChannel::Alamouti {
                blocks: vec![FadingMatrix::identity(2)],
                amplitude: a,
            };
            e2 += mimo.attempt(&mut rng, &info, &syms, &ch).unwrap().bit_errors;
        }
        // both near Q(sqrt(2)) = 0.0786 at Es/N0 = 3 dB
        let (r1, r2) = (e1 as f64 / 1e5, e2 as f64 / 1e5);
        assert!((r1 - 0.0786).abs() < 0.005 && (r2 - 0.0786).abs() < 0.005, "{r1} {r2}");
    }
}
