//! Model files.
//!
//! A model file is two lines of JSON. The first is a header
//! `{"format":"airq-model","version":1,"sha256":"<hex>"}`; the second is the
//! serialized [`ForecastModel`], whose bytes the checksum covers. Floats are
//! written in shortest round-trip form, so reloaded models predict bit for bit
//! the same as the originals.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ForecastModel;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const FORMAT_NAME: &str = "airq-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    sha256: String,
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn encode_model<T: Scalar>(model: &ForecastModel<T>) -> Result<String> {
    let payload = serde_json::to_string(model).map_err(|e| Error::CorruptModel(e.to_string()))?;
    let header = Header {
        format: FORMAT_NAME.to_string(),
        version: FORMAT_VERSION,
        sha256: digest(payload.as_bytes()),
    };
    let header = serde_json::to_string(&header).map_err(|e| Error::CorruptModel(e.to_string()))?;
    Ok(format!("{header}\n{payload}\n"))
}

pub fn decode_model<T: Scalar>(text: &str) -> Result<ForecastModel<T>> {
    let (header, rest) = text
        .split_once('\n')
        .ok_or_else(|| Error::CorruptModel("missing payload line".into()))?;
    let header: Header = serde_json::from_str(header)
        .map_err(|e| Error::CorruptModel(format!("unreadable header: {e}")))?;
    if header.format != FORMAT_NAME {
        return Err(Error::CorruptModel(format!(
            "unexpected format `{}`",
            header.format
        )));
    }
    if header.version != FORMAT_VERSION {
        return Err(Error::Version(header.version));
    }
    let payload = rest.strip_suffix('\n').unwrap_or(rest);
    if digest(payload.as_bytes()) != header.sha256 {
        return Err(Error::CorruptModel("checksum mismatch".into()));
    }
    serde_json::from_str(payload)
        .map_err(|e| Error::CorruptModel(format!("unreadable payload: {e}")))
}

pub fn save_model<T: Scalar>(model: &ForecastModel<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_model(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<ForecastModel<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_model(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Pollutant;
    use crate::models::{LearnerConfig, ModelKind};

    fn model(kind: ModelKind) -> ForecastModel<f64> {
        let x: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                vec![
                    (i as f64 * 0.37).sin() * 3.0,
                    (i as f64 * 1.3).cos(),
                    i as f64 / 7.0,
                ]
            })
            .collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] * r[1] + r[2]).collect();
        let names = vec!["a".into(), "b".into(), "c".into()];
        ForecastModel::fit(
            kind,
            Pollutant::Pm10,
            3,
            names,
            &x,
            &y,
            &LearnerConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn round_trip_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        for kind in ModelKind::ALL {
            let m = model(kind);
            let path = dir.path().join(format!("{kind}.model"));
            save_model(&m, &path).unwrap();
            let back: ForecastModel<f64> = load_model(&path).unwrap();
            assert_eq!(back, m);
            let probes: Vec<Vec<f64>> = (0..100)
                .map(|i| {
                    vec![
                        (i as f64 * 0.91).sin() * 5.0,
                        (i as f64).cos() * 2.0,
                        i as f64 * 0.05 - 1.0,
                    ]
                })
                .collect();
            for p in &probes {
                assert_eq!(
                    m.predict_one(p).unwrap().to_bits(),
                    back.predict_one(p).unwrap().to_bits()
                );
            }
        }
    }

    #[test]
    fn truncated_is_corrupt() {
        let text = encode_model(&model(ModelKind::Gbt)).unwrap();
        let cut = &text[..text.len() / 2];
        assert!(matches!(
            decode_model::<f64>(cut),
            Err(Error::CorruptModel(_))
        ));
        let header_only = text.split_once('\n').unwrap().0;
        assert!(matches!(
            decode_model::<f64>(header_only),
            Err(Error::CorruptModel(_))
        ));
    }

    #[test]
    fn unknown_version() {
        let text = encode_model(&model(ModelKind::Ols)).unwrap();
        let text = text.replacen("\"version\":1", "\"version\":99", 1);
        assert!(matches!(
            decode_model::<f64>(&text),
            Err(Error::Version(99))
        ));
    }

    #[test]
    fn tampered_payload() {
        let text = encode_model(&model(ModelKind::Ols)).unwrap();
        let text = text.replacen("\"window\":3", "\"window\":4", 1);
        assert!(matches!(
            decode_model::<f64>(&text),
            Err(Error::CorruptModel(_))
        ));
    }
}
