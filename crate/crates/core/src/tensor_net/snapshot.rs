//! Parameter snapshot files.
//!
//! A snapshot is a JSON document
//!
//! ```json
//! {"format": "rdn-mlp-v1",
//!  "layers": [{"rows": 64, "cols": 27, "activation": "relu", "w": [...], "b": [...]}, ...]}
//! ```
//!
//! `w` is row-major with `rows = fan_out` and `cols = fan_in`. Numbers are
//! written in shortest round-trip form and parsed with correct rounding, so a
//! 64-bit network survives write/read bit-exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mlp::{Activation, Layer, Mlp};
use super::scalar::Scalar;
use crate::error::{Error, Result};

pub const SNAPSHOT_FORMAT: &str = "rdn-mlp-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerRecord {
    pub rows: usize,
    pub cols: usize,
    pub activation: Activation,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSnapshot {
    pub format: String,
    pub layers: Vec<LayerRecord>,
}

impl MlpSnapshot {
    pub fn capture<T: Scalar>(net: &Mlp<T>) -> Self {
        Self {
            format: SNAPSHOT_FORMAT.to_string(),
            layers: net
                .layers()
                .iter()
                .map(|l| LayerRecord {
                    rows: l.fan_out(),
                    cols: l.fan_in(),
                    activation: l.activation(),
                    w: l.weights().iter().map(|v| v.as_f64()).collect(),
                    b: l.bias().iter().map(|v| v.as_f64()).collect(),
                })
                .collect(),
        }
    }

    pub fn restore<T: Scalar>(&self) -> Result<Mlp<T>> {
        if self.format != SNAPSHOT_FORMAT {
            return Err(Error::config(
                "snapshot.format",
                format!("unsupported format {:?}", self.format),
            ));
        }
        let layers = self
            .layers
            .iter()
            .map(|r| {
                Layer::new(
                    r.cols,
                    r.rows,
                    r.w.iter().map(|&v| T::of(v)).collect(),
                    r.b.iter().map(|&v| T::of(v)).collect(),
                    r.activation,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Mlp::from_layers(layers)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).expect("snapshot serialises");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_net::rng::Rng;

    #[test]
    fn file_round_trip_is_bit_exact() {
        let mut rng = Rng::new(21);
        let net: Mlp<f64> = Mlp::new(&[7, 9, 3], &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        MlpSnapshot::capture(&net).save(&path).unwrap();
        let back: Mlp<f64> = MlpSnapshot::load(&path).unwrap().restore().unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn bad_shapes_are_rejected() {
        let mut snap = MlpSnapshot::capture(&Mlp::<f64>::new(&[2, 2], &mut Rng::new(0)).unwrap());
        snap.layers[0].w.pop();
        assert!(snap.restore::<f64>().is_err());
    }
}
