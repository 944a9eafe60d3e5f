//! `TESC` checkpoint codec.
//!
//! Layout (little-endian): magic `TESC` | version u32 | flags u32 |
//! learnable_layers u32 | adam step u64 | tensor count u32 | (rows u32, dim u32)
//! per tensor | tensor payloads in the `TESM` payload layout. Tensors are
//! `ē_u^(0)`, `ē_r^(0)`, `W`, then their Adam first and second moments.

use alloc::vec::Vec;

use super::adam::Adam;
use super::model::{ModelConfig, ModelState, Params};
use crate::encode::{write_f32s, ByteReader};
use crate::error::FormatError;
use crate::matrix::Matrix;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"TESC";
pub const CHECKPOINT_VERSION: u32 = 1;
const N_TENSORS: u32 = 9;

const FLAG_CONTENT: u32 = 1;
const FLAG_LEARNABLE: u32 = 1 << 1;
const FLAG_CONTRASTIVE: u32 = 1 << 2;
const FLAG_CL_IN_BATCH: u32 = 1 << 3;
const KNOWN_FLAGS: u32 = FLAG_CONTENT | FLAG_LEARNABLE | FLAG_CONTRASTIVE | FLAG_CL_IN_BATCH;

const TENSOR_FIELDS: [&str; 9] = [
    "user_embeddings",
    "recipe_embeddings",
    "projection",
    "adam_m_user",
    "adam_m_recipe",
    "adam_m_projection",
    "adam_v_user",
    "adam_v_recipe",
    "adam_v_projection",
];

fn flags(c: &ModelConfig) -> u32 {
    let mut f = 0;
    if c.content_branch {
        f |= FLAG_CONTENT;
    }
    if c.learnable_branch {
        f |= FLAG_LEARNABLE;
    }
    if c.contrastive {
        f |= FLAG_CONTRASTIVE;
    }
    if c.cl_in_batch {
        f |= FLAG_CL_IN_BATCH;
    }
    f
}

pub fn encode_checkpoint(state: &ModelState<f32>) -> Vec<u8> {
    let tensors: Vec<&Matrix<f32>> = state
        .params
        .tensors()
        .into_iter()
        .chain(state.adam.m.tensors())
        .chain(state.adam.v.tensors())
        .collect();
    let mut out = Vec::new();
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&flags(&state.config).to_le_bytes());
    out.extend_from_slice(&(state.config.learnable_layers as u32).to_le_bytes());
    out.extend_from_slice(&state.adam.step.to_le_bytes());
    out.extend_from_slice(&N_TENSORS.to_le_bytes());
    for t in &tensors {
        out.extend_from_slice(&(t.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(t.dim() as u32).to_le_bytes());
    }
    for t in &tensors {
        write_f32s(&mut out, t.as_slice());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ModelState<f32>, FormatError> {
    let mut r = ByteReader::new(bytes);
    r.magic(CHECKPOINT_MAGIC)?;
    r.version(CHECKPOINT_VERSION)?;
    let f = r.u32("flags")?;
    if f & !KNOWN_FLAGS != 0 {
        return Err(FormatError::Invalid {
            field: "flags",
            detail: alloc::format!("unknown bits {:#x}", f & !KNOWN_FLAGS),
        });
    }
    let learnable_layers = r.u32("learnable_layers")? as usize;
    let step = r.u64("step")?;
    let n = r.u32("tensor_count")?;
    if n != N_TENSORS {
        return Err(FormatError::Invalid {
            field: "tensor_count",
            detail: alloc::format!("expected {N_TENSORS}, found {n}"),
        });
    }
    let mut shapes = Vec::with_capacity(9);
    for _ in 0..N_TENSORS {
        let rows = r.u32("shape")? as usize;
        let dim = r.u32("shape")? as usize;
        shapes.push((rows, dim));
    }
    for i in 0..3 {
        if shapes[i + 3] != shapes[i] || shapes[i + 6] != shapes[i] {
            return Err(FormatError::Invalid {
                field: TENSOR_FIELDS[i + 3],
                detail: alloc::format!("moment shapes differ from {}", TENSOR_FIELDS[i]),
            });
        }
    }
    let mut tensors = Vec::with_capacity(9);
    for (i, &(rows, dim)) in shapes.iter().enumerate() {
        let values = r.f32s(TENSOR_FIELDS[i], rows, dim)?;
        tensors.push(Matrix::from_vec(rows, dim, values).expect("length checked"));
    }
    r.finish(TENSOR_FIELDS[8])?;

    let mut it = tensors.into_iter();
    let mut next3 = || Params {
        user: it.next().expect("9 tensors"),
        recipe: it.next().expect("9 tensors"),
        proj: it.next().expect("9 tensors"),
    };
    let params = next3();
    let m = next3();
    let v = next3();
    Ok(ModelState {
        config: ModelConfig {
            content_branch: f & FLAG_CONTENT != 0,
            learnable_branch: f & FLAG_LEARNABLE != 0,
            contrastive: f & FLAG_CONTRASTIVE != 0,
            learnable_layers,
            cl_in_batch: f & FLAG_CL_IN_BATCH != 0,
        },
        params,
        adam: Adam { m, v, step },
    })
}
