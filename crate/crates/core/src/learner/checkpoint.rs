//! Binary policy checkpoints.
//!
//! All integers are little-endian `u32`, all reals little-endian `f64`:
//!
//! ```text
//! magic        8 bytes  "SRPOLICY"
//! version      u32      1
//! style name   u32 length + UTF-8 bytes
//! weights      3 x f64  tone, difficulty, approach
//! fingerprint  u32 length + UTF-8 bytes
//! num_blocks   u32
//! num_colors   u32
//! num_layers   u32
//! per layer:   u32 in, u32 out, out*in f64 weights (row-major), out f64 biases
//! ```

use std::io::{Read, Write};

use ndarray::{Array1, Array2};

use super::network::{Dense, QNetwork};
use super::{LearnerError, Policy};
use crate::styles::StyleSpec;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SRPOLICY";
const VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(policy: &Policy, mut out: W) -> Result<(), LearnerError> {
    out.write_all(CHECKPOINT_MAGIC)?;
    put_u32(&mut out, VERSION)?;
    put_str(&mut out, &policy.style.name)?;
    for w in policy.style.weights() {
        out.write_all(&w.to_le_bytes())?;
    }
    put_str(&mut out, &policy.fingerprint)?;
    put_u32(&mut out, policy.num_blocks as u32)?;
    put_u32(&mut out, policy.num_colors as u32)?;
    put_u32(&mut out, policy.network.layers.len() as u32)?;
    for layer in &policy.network.layers {
        put_u32(&mut out, layer.w.ncols() as u32)?;
        put_u32(&mut out, layer.w.nrows() as u32)?;
        for v in layer.w.iter().chain(layer.b.iter()) {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Policy, LearnerError> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(LearnerError::Checkpoint("not a policy checkpoint".into()));
    }
    let version = get_u32(&mut input)?;
    if version != VERSION {
        return Err(LearnerError::Checkpoint(format!("unsupported version {version}")));
    }
    let name = get_str(&mut input)?;
    let tone = get_f64(&mut input)?;
    let difficulty = get_f64(&mut input)?;
    let approach = get_f64(&mut input)?;
    let style = StyleSpec { name, tone, difficulty, approach };
    let fingerprint = get_str(&mut input)?;
    let num_blocks = get_u32(&mut input)? as usize;
    let num_colors = get_u32(&mut input)? as usize;
    let num_layers = get_u32(&mut input)? as usize;
    if num_layers == 0 || num_layers > 64 {
        return Err(LearnerError::Checkpoint(format!("implausible layer count {num_layers}")));
    }
    let mut layers = Vec::with_capacity(num_layers);
    for _ in 0..num_layers {
        let fan_in = get_u32(&mut input)? as usize;
        let fan_out = get_u32(&mut input)? as usize;
        if fan_in == 0 || fan_out == 0 || fan_in.saturating_mul(fan_out) > 1 << 28 {
            return Err(LearnerError::Checkpoint("implausible layer shape".into()));
        }
        let w: Vec<f64> = (0..fan_in * fan_out).map(|_| get_f64(&mut input)).collect::<Result<_, _>>()?;
        let b: Vec<f64> = (0..fan_out).map(|_| get_f64(&mut input)).collect::<Result<_, _>>()?;
        layers.push(Dense {
            w: Array2::from_shape_vec((fan_out, fan_in), w).expect("sized above"),
            b: Array1::from(b),
        });
    }
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(LearnerError::Checkpoint(format!("{} trailing bytes", rest.len())));
    }
    let network = QNetwork::from_layers(layers)?;
    if network.output_dim() != num_blocks * num_colors {
        return Err(LearnerError::Checkpoint(format!(
            "output width {} does not match {num_blocks} blocks x {num_colors} colors",
            network.output_dim()
        )));
    }
    Ok(Policy { network, style, fingerprint, num_blocks, num_colors })
}

fn put_u32<W: Write>(out: &mut W, v: u32) -> std::io::Result<()> {
    out.write_all(&v.to_le_bytes())
}

fn put_str<W: Write>(out: &mut W, s: &str) -> std::io::Result<()> {
    put_u32(out, s.len() as u32)?;
    out.write_all(s.as_bytes())
}

fn get_u32<R: Read>(input: &mut R) -> Result<u32, LearnerError> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_f64<R: Read>(input: &mut R) -> Result<f64, LearnerError> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn get_str<R: Read>(input: &mut R) -> Result<String, LearnerError> {
    let len = get_u32(input)? as usize;
    if len > 4096 {
        return Err(LearnerError::Checkpoint("string field too long".into()));
    }
    let mut buf = vec![0u8; len];
    input.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| LearnerError::Checkpoint("string field is not UTF-8".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let net = QNetwork::new(&[12, 7, 6], &mut rng::stream(2, "ck")).unwrap();
        let policy = Policy {
            network: net,
            style: StyleSpec::from_code("CA").unwrap(),
            fingerprint: "0123456789abcdef".into(),
            num_blocks: 2,
            num_colors: 3,
        };
        let mut bytes = Vec::new();
        write_checkpoint(&policy, &mut bytes).unwrap();
        assert_eq!(&bytes[..8], CHECKPOINT_MAGIC);
        assert_eq!(read_checkpoint(bytes.as_slice()).unwrap(), policy);

        let mut truncated = bytes.clone();
        truncated.pop();
        assert!(read_checkpoint(truncated.as_slice()).is_err());
        bytes.push(0);
        assert!(read_checkpoint(bytes.as_slice()).is_err());
        assert!(read_checkpoint(&b"NOTAPOLICY"[..]).is_err());
    }
}
