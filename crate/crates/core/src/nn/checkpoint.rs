//! Binary model checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic   b"CPAE"
//! u32     version
//! f64     encoder learning rate
//! f64     decoder learning rate
//! u32     encoder layer count, u32 decoder layer count
//! per layer (encoder first): u32 in_dim, u32 out_dim, u8 activation
//! per layer, same order: out_dim*in_dim f64 weights (row-major), out_dim f64 biases
//! ```

use std::io::{Read, Write};

use super::{Activation, Autoencoder, Layer, Network};
use crate::error::{invalid, Result};
use crate::matrix::Matrix;

const MAGIC: &[u8; 4] = b"CPAE";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(model: &Autoencoder, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&model.encoder.learning_rate.to_le_bytes())?;
    w.write_all(&model.decoder.learning_rate.to_le_bytes())?;
    w.write_all(&(model.encoder.layers.len() as u32).to_le_bytes())?;
    w.write_all(&(model.decoder.layers.len() as u32).to_le_bytes())?;
    for l in model.layers() {
        w.write_all(&(l.in_dim() as u32).to_le_bytes())?;
        w.write_all(&(l.out_dim() as u32).to_le_bytes())?;
        w.write_all(&[l.activation.code()])?;
    }
    for l in model.layers() {
        for v in l.weights.as_slice().iter().chain(&l.biases) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Autoencoder> {
    let mut magic = [0; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(invalid("not a checkpoint file"));
    }
    let version = read_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(invalid(format!("unsupported checkpoint version {version}")));
    }
    let enc_lr = read_f64(&mut r)?;
    let dec_lr = read_f64(&mut r)?;
    let n_enc = read_u32(&mut r)? as usize;
    let n_dec = read_u32(&mut r)? as usize;
    let mut shapes = Vec::with_capacity(n_enc + n_dec);
    for _ in 0..n_enc + n_dec {
        let in_dim = read_u32(&mut r)? as usize;
        let out_dim = read_u32(&mut r)? as usize;
        let mut code = [0];
        r.read_exact(&mut code)?;
        let act = Activation::from_code(code[0]).ok_or_else(|| invalid("unknown activation code"))?;
        shapes.push((in_dim, out_dim, act));
    }
    let mut layers = Vec::with_capacity(shapes.len());
    for (in_dim, out_dim, act) in shapes {
        let weights = (0..in_dim * out_dim).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
        let biases = (0..out_dim).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
        layers.push(Layer::new(Matrix::from_vec(out_dim, in_dim, weights)?, biases, act)?);
    }
    let dec_layers = layers.split_off(n_enc);
    Autoencoder::new(Network::new(layers, enc_lr)?, Network::new(dec_layers, dec_lr)?)
}
