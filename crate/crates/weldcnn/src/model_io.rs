//! Binary model files.
//!
//! Layout, all integers little-endian:
//!
//! | field         | encoding                                           |
//! |---------------|----------------------------------------------------|
//! | magic         | `FSWC`                                             |
//! | version       | `u16`, currently 1                                 |
//! | header length | `u32` byte count of the header                     |
//! | header        | UTF-8 JSON: input shape and layer descriptors      |
//! | payload       | per parameter tensor, in layer order (`w` then `b`): `u32` rank, `rank × u32` extents, `f64` values |

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use weldcnn_core::nn::{ConvSpec, Layer, LayerParams, Model};
use weldcnn_core::Tensor;

use crate::error::ModelFormatError;
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"FSWC";
pub const VERSION: u16 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    input_shape: Vec<usize>,
    layers: Vec<LayerDesc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum LayerDesc {
    Conv {
        f: usize,
        s: usize,
        p: usize,
        c_in: usize,
        n_filters: usize,
    },
    Relu,
    Maxpool {
        window: usize,
    },
    Flatten,
    Dense {
        inputs: usize,
        outputs: usize,
    },
    Sigmoid,
}

impl LayerDesc {
    fn of(layer: &Layer) -> Self {
        match layer {
            Layer::Conv { spec, .. } => LayerDesc::Conv {
                f: spec.f,
                s: spec.s,
                p: spec.p,
                c_in: spec.c_in,
                n_filters: spec.n_filters,
            },
            Layer::Relu => LayerDesc::Relu,
            Layer::MaxPool { window } => LayerDesc::Maxpool { window: *window },
            Layer::Flatten => LayerDesc::Flatten,
            Layer::Dense { params } => LayerDesc::Dense {
                inputs: params.w.shape()[1],
                outputs: params.w.shape()[0],
            },
            Layer::Sigmoid => LayerDesc::Sigmoid,
        }
    }

    /// Expected `(w, b)` shapes for parameterised layers.
    fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        match *self {
            LayerDesc::Conv {
                f, c_in, n_filters, ..
            } => Some((vec![n_filters, f, f, c_in], vec![n_filters])),
            LayerDesc::Dense { inputs, outputs } => Some((vec![outputs, inputs], vec![outputs])),
            _ => None,
        }
    }
}

fn put_tensor(out: &mut Vec<u8>, t: &Tensor) {
    out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
    for &e in t.shape() {
        out.extend_from_slice(&(e as u32).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serialises a model; equal models give identical bytes.
pub fn encode_model(model: &Model) -> Vec<u8> {
    let header = Header {
        input_shape: model.input_shape().to_vec(),
        layers: model.layers().iter().map(LayerDesc::of).collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serialisation cannot fail");
    let mut out = Vec::with_capacity(10 + json.len() + 8 * model.param_count());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for p in model.layers().iter().filter_map(Layer::params) {
        put_tensor(&mut out, &p.w);
        put_tensor(&mut out, &p.b);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&end| end <= self.bytes.len())
            .ok_or(ModelFormatError::Truncated(what))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u16(&mut self, what: &'static str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn tensor(&mut self, expected: &[usize], layer: usize) -> Result<Tensor> {
        let rank = self.u32("tensor rank")? as usize;
        let mut shape = Vec::with_capacity(rank.min(4));
        for _ in 0..rank {
            shape.push(self.u32("tensor extents")? as usize);
        }
        if shape != expected {
            return Err(ModelFormatError::Inconsistent(format!(
                "layer {layer}: stored tensor {shape:?}, header implies {expected:?}"
            ))
            .into());
        }
        let n: usize = shape.iter().product();
        let raw = self.take(n.saturating_mul(8), "weight payload")?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Tensor::from_vec(&shape, data)
            .map_err(|e| ModelFormatError::Inconsistent(format!("layer {layer}: {e}")).into())
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<Model> {
    let mut r = Reader { bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4, "magic")?.try_into().unwrap();
    if magic != MAGIC {
        return Err(ModelFormatError::BadMagic(magic).into());
    }
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(Error::Version {
            found: version,
            expected: VERSION,
        });
    }
    let header_len = r.u32("header length")? as usize;
    let header: Header = serde_json::from_slice(r.take(header_len, "header")?)
        .map_err(|e| ModelFormatError::Header(e.to_string()))?;

    let mut layers = Vec::with_capacity(header.layers.len());
    for (index, desc) in header.layers.iter().enumerate() {
        let params = match desc.param_shapes() {
            Some((ws, bs)) => Some(LayerParams {
                w: r.tensor(&ws, index)?,
                b: r.tensor(&bs, index)?,
            }),
            None => None,
        };
        let layer = match (desc, params) {
            (
                &LayerDesc::Conv {
                    f,
                    s,
                    p,
                    c_in,
                    n_filters,
                },
                Some(params),
            ) => Layer::Conv {
                spec: ConvSpec {
                    f,
                    s,
                    p,
                    c_in,
                    n_filters,
                },
                params,
            },
            (LayerDesc::Dense { .. }, Some(params)) => Layer::Dense { params },
            (LayerDesc::Relu, _) => Layer::Relu,
            (&LayerDesc::Maxpool { window }, _) => Layer::MaxPool { window },
            (LayerDesc::Flatten, _) => Layer::Flatten,
            (LayerDesc::Sigmoid, _) => Layer::Sigmoid,
            _ => unreachable!("parameter shapes exist exactly for conv and dense"),
        };
        layers.push(layer);
    }
    if r.pos != bytes.len() {
        return Err(ModelFormatError::Inconsistent(format!(
            "{} trailing bytes after the weight payload",
            bytes.len() - r.pos
        ))
        .into());
    }
    Model::from_layers(&header.input_shape, layers)
        .map_err(|e| ModelFormatError::Header(e.to_string()).into())
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Model> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use weldcnn_core::nn::{build_paper_model, LayerSpec};

    #[test]
    fn round_trip_with_pooling() {
        let specs = [
            LayerSpec::Conv {
                f: 3,
                s: 1,
                p: 1,
                n_filters: 2,
            },
            LayerSpec::Relu,
            LayerSpec::MaxPool { window: 2 },
            LayerSpec::Flatten,
            LayerSpec::Dense { out: 1 },
            LayerSpec::Sigmoid,
        ];
        let m = Model::build(&[6, 6, 3], &specs, 4).unwrap();
        assert_eq!(decode_model(&encode_model(&m)).unwrap(), m);
    }

    #[test]
    fn header_is_readable_json() {
        let bytes = encode_model(&build_paper_model(0));
        assert_eq!(&bytes[..4], b"FSWC");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        let len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let header = std::str::from_utf8(&bytes[10..10 + len]).unwrap();
        assert!(header.starts_with(r#"{"input_shape":[40,40,3],"layers":[{"kind":"conv","f":3,"s":1,"p":0,"c_in":3,"n_filters":10}"#));
        assert!(header.contains(r#"{"kind":"dense","inputs":5780,"outputs":1}"#));
        let params = 10 * 27 + 10 + 20 * 360 + 20 + 5780 + 1;
        let extents = 4 + 1 + 4 + 1 + 2 + 1;
        assert_eq!(bytes.len(), 10 + len + 8 * params + 4 * (6 + extents));
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = encode_model(&build_paper_model(0));
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(
            decode_model(&bytes),
            Err(Error::ModelFormat(ModelFormatError::BadMagic(m))) if &m == b"XXXX"
        ));
        let mut bytes = encode_model(&build_paper_model(0));
        bytes[4..6].copy_from_slice(&2u16.to_le_bytes());
        assert!(matches!(
            decode_model(&bytes),
            Err(Error::Version {
                found: 2,
                expected: 1
            })
        ));
    }

    #[test]
    fn short_dense_payload() {
        let bytes = encode_model(&build_paper_model(0));
        let cut = &bytes[..bytes.len() - 8 * 100];
        assert!(matches!(
            decode_model(cut),
            Err(Error::ModelFormat(ModelFormatError::Truncated(_)))
        ));
        assert!(matches!(
            decode_model(&bytes[..3]),
            Err(Error::ModelFormat(ModelFormatError::Truncated("magic")))
        ));
    }

    #[test]
    fn inconsistent_payload() {
        let mut bytes = encode_model(&build_paper_model(0));
        bytes.push(0);
        assert!(matches!(
            decode_model(&bytes),
            Err(Error::ModelFormat(ModelFormatError::Inconsistent(_)))
        ));

        // Header claims 5781 dense inputs while the stored tensor has 5780.
        let m = build_paper_model(0);
        let bytes = encode_model(&m);
        let len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let header = std::str::from_utf8(&bytes[10..10 + len])
            .unwrap()
            .replace("5780", "5781");
        let mut forged = bytes[..6].to_vec();
        forged.extend_from_slice(&(header.len() as u32).to_le_bytes());
        forged.extend_from_slice(header.as_bytes());
        forged.extend_from_slice(&bytes[10 + len..]);
        assert!(matches!(
            decode_model(&forged),
            Err(Error::ModelFormat(ModelFormatError::Inconsistent(_)))
        ));
    }

    #[test]
    fn garbage_header() {
        let mut bytes = MAGIC.to_vec();
        bytes.extend_from_slice(&VERSION.to_le_bytes());
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(b"{x}");
        assert!(matches!(
            decode_model(&bytes),
            Err(Error::ModelFormat(ModelFormatError::Header(_)))
        ));
    }
}
