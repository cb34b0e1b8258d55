//! Flat binary model files.
//!
//! ```text
//! "SMDMA-NN\0" | version u16 | layer count u16 |
//!   per layer: kind u8 | dims u32... | weights f64... | biases f64...
//! ```
//!
//! All integers and floats little-endian. Dense dims are `(in, out)`,
//! conv1d dims `(channels_in, channels_out, kernel_size)`, relu has none.

use std::io::{Read, Write};
use std::path::Path;

use super::{Conv1d, Dense, Layer, Model};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 9] = b"SMDMA-NN\0";
pub const MODEL_VERSION: u16 = 1;

const KIND_DENSE: u8 = 0;
const KIND_CONV1D: u8 = 1;
const KIND_RELU: u8 = 2;

pub fn write_model<W: Write>(model: &Model, mut w: W) -> std::io::Result<()> {
    let count = u16::try_from(model.layers.len()).expect("layer count fits in u16");
    w.write_all(MODEL_MAGIC)?;
    w.write_all(&MODEL_VERSION.to_le_bytes())?;
    w.write_all(&count.to_le_bytes())?;
    for layer in &model.layers {
        let (kind, dims, weight, bias): (u8, Vec<usize>, &[f64], &[f64]) = match layer {
            Layer::Dense(d) => (KIND_DENSE, vec![d.in_dim, d.out_dim], &d.weight, &d.bias),
            Layer::Conv1d(c) => (
                KIND_CONV1D,
                vec![c.channels_in, c.channels_out, c.kernel_size],
                &c.weight,
                &c.bias,
            ),
            Layer::Relu => (KIND_RELU, vec![], &[], &[]),
        };
        w.write_all(&[kind])?;
        for d in dims {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for v in weight.iter().chain(bias) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Parse {
                offset: self.pos,
                message: format!("truncated model file reading {what}"),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn dim(&mut self, what: &str) -> Result<usize> {
        let offset = self.pos;
        let v = u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()) as usize;
        if v == 0 {
            return Err(Error::Parse {
                offset,
                message: format!("{what} must be nonzero"),
            });
        }
        Ok(v)
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = n
            .checked_mul(8)
            .ok_or_else(|| Error::Parse { offset: self.pos, message: format!("{what} too large") })?;
        let raw = self.take(bytes, what)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

pub fn read_model<R: Read>(mut r: R) -> Result<Model> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf).map_err(|e| Error::io("<model stream>", e))?;
    let mut c = Cursor { buf: &buf, pos: 0 };
    if c.take(MODEL_MAGIC.len(), "magic")? != MODEL_MAGIC {
        return Err(Error::Parse {
            offset: 0,
            message: "bad model magic".into(),
        });
    }
    let version = c.u16("version")?;
    if version != MODEL_VERSION {
        return Err(Error::Parse {
            offset: MODEL_MAGIC.len(),
            message: format!("unsupported model version {version}"),
        });
    }
    let count = c.u16("layer count")?;
    let mut layers = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let offset = c.pos;
        let layer = match c.u8("layer kind")? {
            KIND_DENSE => {
                let in_dim = c.dim("dense in_dim")?;
                let out_dim = c.dim("dense out_dim")?;
                let weight = c.f64s(in_dim * out_dim, "dense weights")?;
                let bias = c.f64s(out_dim, "dense biases")?;
                Layer::Dense(Dense {
                    in_dim,
                    out_dim,
                    weight,
                    bias,
                })
            }
            KIND_CONV1D => {
                let channels_in = c.dim("conv1d channels_in")?;
                let channels_out = c.dim("conv1d channels_out")?;
                let kernel_size = c.dim("conv1d kernel_size")?;
                if kernel_size % 2 == 0 {
                    return Err(Error::Parse {
                        offset,
                        message: "conv1d kernel_size must be odd".into(),
                    });
                }
                let weight = c.f64s(channels_out * channels_in * kernel_size, "conv1d weights")?;
                let bias = c.f64s(channels_out, "conv1d biases")?;
                Layer::Conv1d(Conv1d {
                    channels_in,
                    channels_out,
                    kernel_size,
                    weight,
                    bias,
                })
            }
            KIND_RELU => Layer::Relu,
            other => {
                return Err(Error::Parse {
                    offset,
                    message: format!("unknown layer kind {other}"),
                })
            }
        };
        layers.push(layer);
    }
    if c.pos != buf.len() {
        return Err(Error::Parse {
            offset: c.pos,
            message: "trailing bytes after last layer".into(),
        });
    }
    Ok(Model::new(layers))
}

pub fn write_model_file(model: &Model, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_model(model, &mut buf).expect("writing to a Vec cannot fail");
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_model_file(path: &Path) -> Result<Model> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnkit::LayerSpec;
    use crate::rng;

    fn sample_model() -> Model {
        let mut r = rng::stream(9);
        Model::from_specs(
            &[
                LayerSpec::Conv1d { channels_in: 1, channels_out: 3, kernel_size: 3 },
                LayerSpec::Relu,
                LayerSpec::Conv1d { channels_in: 3, channels_out: 1, kernel_size: 1 },
                LayerSpec::Dense { in_dim: 4, out_dim: 2 },
            ],
            &mut r,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = sample_model();
        let mut a = Vec::new();
        write_model(&m, &mut a).unwrap();
        let back = read_model(a.as_slice()).unwrap();
        assert_eq!(back, m);
        let mut b = Vec::new();
        write_model(&back, &mut b).unwrap();
        assert_eq!(a, b);
        assert_eq!(&a[..9], MODEL_MAGIC);
    }

    #[test]
    fn truncation_and_corruption_rejected() {
        let mut bytes = Vec::new();
        write_model(&sample_model(), &mut bytes).unwrap();
        for cut in [0, 5, 12, bytes.len() - 1] {
            assert!(read_model(&bytes[..cut]).is_err(), "cut {cut}");
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(read_model(bad.as_slice()).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(read_model(extra.as_slice()).is_err());
    }
}
