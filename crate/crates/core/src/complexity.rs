//! Compression-based complexity estimates and the canonical text forms they
//! are computed over.
//!
//! Every number derived here is relative to the [`CompressorSpec`] in use, so
//! the spec's id travels with any reported result.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use flate2::write::DeflateEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maze::Grid;
use crate::measure::{Observation, PredictionEvent};

/// A deterministic compressor used to approximate Kolmogorov complexity.
///
/// Raw DEFLATE (no zlib/gzip framing) from the pure-Rust `miniz_oxide`
/// backend, so output bytes do not depend on a system library.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CompressorSpec {
    level: u32,
}

impl CompressorSpec {
    pub const VERSION: &'static str = "flate2-1/miniz_oxide";

    pub fn deflate(level: u32) -> Result<Self> {
        if level > 9 {
            return Err(Error::invalid(format!(
                "deflate level {level} outside 0..=9"
            )));
        }
        Ok(Self { level })
    }

    pub fn id(&self) -> String {
        format!("lz-deflate-level{}", self.level)
    }

    pub fn version(&self) -> &'static str {
        Self::VERSION
    }

    pub fn compress(&self, data: &[u8]) -> Result<Vec<u8>> {
        let mut enc = DeflateEncoder::new(Vec::new(), Compression::new(self.level));
        enc.write_all(data)?;
        Ok(enc.finish()?)
    }
}

impl Default for CompressorSpec {
    fn default() -> Self {
        Self { level: 9 }
    }
}

impl fmt::Display for CompressorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "lz-deflate-level{}", self.level)
    }
}

impl FromStr for CompressorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let level = s
            .strip_prefix("lz-deflate-level")
            .and_then(|l| l.parse::<u32>().ok())
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown compressor `{s}` (expected lz-deflate-level0..9)"
                ))
            })?;
        Self::deflate(level)
    }
}

impl TryFrom<String> for CompressorSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<CompressorSpec> for String {
    fn from(c: CompressorSpec) -> String {
        c.id()
    }
}

/// Compressed length of `s` in bytes.
pub fn k_hat(s: &[u8], c: &CompressorSpec) -> Result<usize> {
    if s.is_empty() {
        return Err(Error::Empty("complexity input"));
    }
    Ok(c.compress(s)?.len())
}

/// Compressed over raw length, clamped to at most 1 so that framing overhead
/// on short incompressible strings never inflates a match sum.
pub fn k_ratio(s: &[u8], c: &CompressorSpec) -> Result<f64> {
    let k = k_hat(s, c)?;
    Ok((k as f64 / s.len() as f64).min(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UmweltSource {
    MazeGrid,
    TimeseriesValues,
    External,
}

/// Canonical byte description of an umwelt, used as its complexity proxy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SerializedUmwelt {
    pub bytes: Vec<u8>,
    pub source: UmweltSource,
}

impl SerializedUmwelt {
    pub fn external(bytes: Vec<u8>) -> Result<Self> {
        if bytes.is_empty() {
            return Err(Error::Empty("umwelt serialization"));
        }
        Ok(Self {
            bytes,
            source: UmweltSource::External,
        })
    }

    pub fn as_str(&self) -> Option<&str> {
        std::str::from_utf8(&self.bytes).ok()
    }
}

/// Fixed-point text with three decimals. Values that round to zero print as
/// `0.000` regardless of sign.
pub fn fmt_fixed3(x: f64) -> String {
    let s = format!("{x:.3}");
    if s == "-0.000" {
        "0.000".to_owned()
    } else {
        s
    }
}

/// `"w h"` followed by one row of `W`/`E`/`R` per line.
pub fn serialize_maze(grid: &Grid) -> SerializedUmwelt {
    SerializedUmwelt {
        bytes: grid.to_text().into_bytes(),
        source: UmweltSource::MazeGrid,
    }
}

/// One value per line, three decimals.
pub fn serialize_series(values: &[f64]) -> SerializedUmwelt {
    let text = values
        .iter()
        .map(|&v| fmt_fixed3(v))
        .collect::<Vec<_>>()
        .join("\n");
    SerializedUmwelt {
        bytes: text.into_bytes(),
        source: UmweltSource::TimeseriesValues,
    }
}

/// Canonical text of a set of predictions, rounded to three decimals.
///
/// Discrete events emit one `s,t,dim:p1,p2,...` line per dimension (1-based);
/// continuous events emit `s,t:mean,std`. Events are ordered by umwelt id,
/// state index and time index, ties broken by the line text, so any
/// permutation of the input yields the same bytes.
pub fn serialize_predictions(events: &[PredictionEvent]) -> Vec<u8> {
    let mut rendered: Vec<(&PredictionEvent, String)> =
        events.iter().map(|e| (e, render_event(e))).collect();
    rendered.sort_by(|(a, at), (b, bt)| {
        (a.umwelt.as_str(), a.state, a.time, at).cmp(&(b.umwelt.as_str(), b.state, b.time, bt))
    });
    let mut out = String::new();
    for (i, (_, text)) in rendered.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(text);
    }
    out.into_bytes()
}

fn render_event(e: &PredictionEvent) -> String {
    use std::fmt::Write as _;
    let mut line = String::new();
    match &e.observation {
        Observation::Discrete { predictions, .. } => {
            for (dim, p) in predictions.iter().enumerate() {
                if dim > 0 {
                    line.push('\n');
                }
                let _ = write!(line, "{},{},{}:", e.state, e.time, dim + 1);
                for (i, prob) in p.probs().iter().enumerate() {
                    if i > 0 {
                        line.push(',');
                    }
                    line.push_str(&fmt_fixed3(*prob));
                }
            }
        }
        Observation::Continuous { prediction, .. } => {
            let _ = write!(
                line,
                "{},{}:{},{}",
                e.state,
                e.time,
                fmt_fixed3(prediction.mean),
                fmt_fixed3(prediction.std)
            );
        }
    }
    line
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::measure::{Alphabet, CategoricalDistribution, ContinuousEnsemblePrediction};

    fn random_bytes(n: usize, seed: u64) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random()).collect()
    }

    #[test]
    fn k_hat_basics() {
        let c = CompressorSpec::default();
        assert!(k_hat(&[b'a'; 1000], &c).unwrap() <= 50);
        assert!(k_hat(&random_bytes(1000, 7), &c).unwrap() >= 900);
        let s =
            b"the quick brown fox jumps over the lazy dog; pack my box with five dozen liquor jugs";
        let ss = [&s[..], &s[..]].concat();
        assert!(k_hat(&ss, &c).unwrap() < 2 * k_hat(s, &c).unwrap());
        assert!(matches!(k_hat(b"", &c), Err(Error::Empty(_))));
    }

    #[test]
    fn k_ratio_bounds() {
        let c = CompressorSpec::default();
        assert!(k_ratio(&b"ab".repeat(500), &c).unwrap() < 0.1);
        let r = k_ratio(&random_bytes(10_000, 11), &c).unwrap();
        assert!((0.9..=1.0).contains(&r), "{r}");
        // Short incompressible input would exceed 1 without the clamp.
        assert_eq!(k_ratio(b"q", &c).unwrap(), 1.0);
    }

    #[test]
    fn compressor_ids_round_trip() {
        let c: CompressorSpec = "lz-deflate-level6".parse().unwrap();
        assert_eq!(c.id(), "lz-deflate-level6");
        assert_eq!(CompressorSpec::default().id(), "lz-deflate-level9");
        assert!("zstd".parse::<CompressorSpec>().is_err());
        assert!("lz-deflate-level10".parse::<CompressorSpec>().is_err());
    }

    #[test]
    fn compression_is_deterministic() {
        let c = CompressorSpec::default();
        let data = random_bytes(4096, 3);
        assert_eq!(c.compress(&data).unwrap(), c.compress(&data).unwrap());
    }

    #[test]
    fn series_serialization() {
        let s = serialize_series(&[1.0, 1.0, 1.0]);
        assert_eq!(s.as_str().unwrap(), "1.000\n1.000\n1.000");
        assert_eq!(
            serialize_series(&[-0.0001, 2.5]).as_str().unwrap(),
            "0.000\n2.500"
        );
        let c = CompressorSpec::default();
        assert!(k_ratio(&serialize_series(&[1.0; 1000]).bytes, &c).unwrap() <= 0.1);
    }

    #[test]
    fn noisy_series_is_incompressible_enough() {
        // Huffman coding caps 3-decimal digit text near 0.45 under DEFLATE;
        // uniform noise on [-1, 1) measures about 0.34.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let values: Vec<f64> = (0..1000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = CompressorSpec::default();
        let noisy = k_ratio(&serialize_series(&values).bytes, &c).unwrap();
        let flat = k_ratio(&serialize_series(&[0.5; 1000]).bytes, &c).unwrap();
        assert!(noisy >= 0.3, "{noisy}");
        assert!(noisy > 10.0 * flat, "{noisy} vs {flat}");
    }

    fn mixed_event(state: u64) -> PredictionEvent {
        let wer = Alphabet::new(["W", "E", "R"]).unwrap();
        let d = |p: [f64; 3]| CategoricalDistribution::new(wer.clone(), p.to_vec()).unwrap();
        PredictionEvent::discrete(
            "t-maze".into(),
            state,
            1,
            vec![
                d([0.75, 0.25, 0.0]),
                d([0.25, 0.75, 0.0]),
                d([0.75, 0.25, 0.0]),
                d([0.0, 1.0, 0.0]),
            ],
            vec!["W".into(), "E".into(), "W".into(), "E".into()],
        )
        .unwrap()
    }

    #[test]
    fn mixed_prediction_text() {
        let text = String::from_utf8(serialize_predictions(&[mixed_event(4)])).unwrap();
        assert_eq!(
            text,
            "4,1,1:0.750,0.250,0.000\n4,1,2:0.250,0.750,0.000\n4,1,3:0.750,0.250,0.000\n4,1,4:0.000,1.000,0.000"
        );
    }

    #[test]
    fn prediction_text_is_canonical() {
        assert!(serialize_predictions(&[]).is_empty());
        let cont = |s: u64, m: f64| {
            PredictionEvent::continuous(
                "s".into(),
                s,
                1,
                ContinuousEnsemblePrediction::new(m, 0.01234, 5).unwrap(),
                m,
            )
            .unwrap()
        };
        let sorted = vec![cont(0, 0.5), cont(1, 0.25), cont(2, 0.125)];
        let permuted = vec![sorted[2].clone(), sorted[0].clone(), sorted[1].clone()];
        assert_eq!(
            serialize_predictions(&sorted),
            serialize_predictions(&permuted)
        );
        assert_eq!(
            String::from_utf8(serialize_predictions(&sorted[..1])).unwrap(),
            "0,1:0.500,0.012"
        );
    }

    #[test]
    fn constant_predictions_weigh_less_than_varied_ones() {
        // Same match sum, differently compressible prediction strings.
        let c = CompressorSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let constant: Vec<_> = (0..300)
            .map(|_| {
                PredictionEvent::continuous(
                    "u".into(),
                    0,
                    1,
                    ContinuousEnsemblePrediction::new(1.0, 0.0, 5).unwrap(),
                    1.0,
                )
                .unwrap()
            })
            .collect();
        let varied: Vec<_> = (0..300)
            .map(|_| {
                let m: f64 = rng.random_range(0.0..1.0);
                PredictionEvent::continuous(
                    "u".into(),
                    0,
                    1,
                    ContinuousEnsemblePrediction::new(m, 0.0, 5).unwrap(),
                    m,
                )
                .unwrap()
            })
            .collect();
        let ser = SerializedUmwelt::external(b"u".to_vec()).unwrap();
        let a = crate::measure::UmweltRecord::new("u".into(), ser.clone(), constant).unwrap();
        let b = crate::measure::UmweltRecord::new("u".into(), ser, varied).unwrap();
        assert_eq!(a.prediction_string().len(), b.prediction_string().len());
        let base = crate::measure::Baseline::Uniform;
        let wa = crate::measure::weighted_pm(&a, &c, &base, 0.05).unwrap();
        let wb = crate::measure::weighted_pm(&b, &c, &base, 0.05).unwrap();
        assert!(wa < wb, "{wa} !< {wb}");
    }
}
