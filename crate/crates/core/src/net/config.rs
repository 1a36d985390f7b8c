use thiserror::Error;

use crate::kv::{join_list, KvError, KvMap};
use crate::nn::activation::DEFAULT_LEAKY_SLOPE;
use crate::signal::NUM_CLASSES;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid architecture: {0}")]
    Invalid(String),
    #[error(transparent)]
    Kv(#[from] KvError),
}

/// Declarative description of the dual-branch network.
#[derive(Clone, Debug, PartialEq)]
pub struct ArchConfig {
    pub input_length: usize,
    pub in_channels_per_branch: usize,
    /// Output channels of each encoder stage, per branch.
    pub encoder_channels: Vec<usize>,
    /// Channels after concatenating both branches at the bottleneck.
    pub bottleneck_channels: usize,
    pub ppm_reduce: usize,
    pub se_reduction: usize,
    /// Output channels of each decoder stage, coarsest first.
    pub decoder_channels: Vec<usize>,
    pub num_classes: usize,
    pub leaky_slope: f64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            input_length: 64,
            in_channels_per_branch: 3,
            encoder_channels: vec![8, 16, 32],
            bottleneck_channels: 64,
            ppm_reduce: 16,
            se_reduction: 4,
            decoder_channels: vec![32, 16, 16],
            num_classes: NUM_CLASSES,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }
}

impl ArchConfig {
    pub fn stages(&self) -> usize {
        self.encoder_channels.len()
    }

    /// Temporal length at the bottleneck, `input_length / 2^stages`.
    pub fn bottleneck_length(&self) -> usize {
        self.input_length >> self.stages()
    }

    pub fn ppm_channels(&self) -> usize {
        self.bottleneck_channels + 3 * self.ppm_reduce
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let s = self.stages();
        if s == 0 {
            return bad("at least one encoder stage is required".into());
        }
        if self.decoder_channels.len() != s {
            return bad(format!(
                "{} decoder stages for {s} encoder stages",
                self.decoder_channels.len()
            ));
        }
        if self.num_classes != NUM_CLASSES {
            return bad(format!("num_classes must be {NUM_CLASSES}, got {}", self.num_classes));
        }
        if self.in_channels_per_branch == 0
            || self.ppm_reduce == 0
            || self.se_reduction == 0
            || self.encoder_channels.iter().chain(&self.decoder_channels).any(|&c| c == 0)
        {
            return bad("channel counts and se_reduction must be positive".into());
        }
        if s >= usize::BITS as usize || !self.input_length.is_multiple_of(1 << s) {
            return bad(format!(
                "input_length {} is not divisible by 2^{s}",
                self.input_length
            ));
        }
        let bl = self.bottleneck_length();
        if bl == 0 || !bl.is_multiple_of(8) {
            return bad(format!(
                "bottleneck length {bl} must be a positive multiple of 8 for pyramid pooling"
            ));
        }
        if self.bottleneck_channels != 2 * self.encoder_channels[s - 1] {
            return bad(format!(
                "bottleneck_channels {} must equal twice the last encoder width {}",
                self.bottleneck_channels,
                self.encoder_channels[s - 1]
            ));
        }
        if !(self.leaky_slope.is_finite() && self.leaky_slope >= 0.0) {
            return bad(format!("leaky_slope {} must be finite and ≥ 0", self.leaky_slope));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> String {
        format!(
            "input_length = {}\nin_channels_per_branch = {}\nencoder_channels = {}\n\
             bottleneck_channels = {}\nppm_reduce = {}\nse_reduction = {}\n\
             decoder_channels = {}\nnum_classes = {}\nleaky_slope = {}\n",
            self.input_length,
            self.in_channels_per_branch,
            join_list(&self.encoder_channels),
            self.bottleneck_channels,
            self.ppm_reduce,
            self.se_reduction,
            join_list(&self.decoder_channels),
            self.num_classes,
            self.leaky_slope,
        )
    }

    /// Parses a key-value block; missing keys take their defaults.
    pub fn from_kv(text: &str) -> Result<Self, ConfigError> {
        let mut m = KvMap::parse(text)?;
        let cfg = Self::take_from(&mut m)?;
        m.finish()?;
        Ok(cfg)
    }

    /// Consumes the architecture keys of `m`, leaving any others.
    pub fn take_from(m: &mut KvMap) -> Result<Self, ConfigError> {
        let d = ArchConfig::default();
        let cfg = ArchConfig {
            input_length: m.take_or("input_length", d.input_length)?,
            in_channels_per_branch: m.take_or("in_channels_per_branch", d.in_channels_per_branch)?,
            encoder_channels: m.take_list("encoder_channels")?.unwrap_or(d.encoder_channels),
            bottleneck_channels: m.take_or("bottleneck_channels", d.bottleneck_channels)?,
            ppm_reduce: m.take_or("ppm_reduce", d.ppm_reduce)?,
            se_reduction: m.take_or("se_reduction", d.se_reduction)?,
            decoder_channels: m.take_list("decoder_channels")?.unwrap_or(d.decoder_channels),
            num_classes: m.take_or("num_classes", d.num_classes)?,
            leaky_slope: m.take_or("leaky_slope", d.leaky_slope)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_with_8_sample_bottleneck() {
        let c = ArchConfig::default();
        c.validate().unwrap();
        assert_eq!(c.bottleneck_length(), 8);
        assert_eq!(c.ppm_channels(), 112);
    }

    #[test]
    fn kv_round_trip() {
        let c = ArchConfig::default();
        assert_eq!(ArchConfig::from_kv(&c.to_kv()).unwrap(), c);
    }

    #[test]
    fn violations_are_rejected() {
        let mut c = ArchConfig::default();
        c.num_classes = 9;
        assert!(c.validate().is_err());
        let mut c = ArchConfig::default();
        c.input_length = 60;
        assert!(c.validate().is_err());
        let mut c = ArchConfig::default();
        c.bottleneck_channels = 48;
        assert!(c.validate().is_err());
        let mut c = ArchConfig::default();
        c.input_length = 32; // bottleneck of 4
        assert!(c.validate().is_err());
        assert!(matches!(
            ArchConfig::from_kv("colour = blue"),
            Err(ConfigError::Kv(KvError::Unknown(_)))
        ));
    }
}
