//! Versioned binary container for trained artifacts.
//!
//! Layout: an 8-byte magic, a little-endian u32 format version, then tagged
//! sections. Each section is a JSON metadata blob followed by raw vector
//! tables (f32 for model tables, f64 for reducer state), every piece length-
//! prefixed. Readers reject unknown versions and truncated payloads with
//! distinct errors so callers can tell the two apart.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::{
    EmbeddingModel, Fusion, Matrix, PatternVocabulary, SequenceKey, TrainingConfig,
    TrajectoryEncoder, Vocab,
};
use crate::error::{Error, Result};
use crate::reduction::{FuzzyEdge, PcaReducer, Points, Reducer, UmapParams, UmapReducer};

pub const MAGIC: &[u8; 8] = b"MOB2VEC\0";
pub const FORMAT_VERSION: u32 = 1;

const SECTION_ENCODER: u8 = 1;
const SECTION_REDUCER: u8 = 2;

/// What a container file holds. Stages persist the encoder after training and
/// the reducer after reduction; loading tolerates either or both.
#[derive(Debug, Clone, Default)]
pub struct Container {
    pub encoder: Option<TrajectoryEncoder>,
    pub reducer: Option<Reducer>,
}

pub fn save_container(path: &Path, container: &Container) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    if let Some(encoder) = &container.encoder {
        w.write_all(&[SECTION_ENCODER])?;
        write_encoder(&mut w, encoder)?;
    }
    if let Some(reducer) = &container.reducer {
        w.write_all(&[SECTION_REDUCER])?;
        write_reducer(&mut w, reducer)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_container(path: &Path) -> Result<Container> {
    let file = File::open(path)?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 8];
    read_exact(&mut r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::UnsupportedVersion {
            found: 0,
            expected: FORMAT_VERSION,
        });
    }
    let version = read_u32(&mut r, "format version")?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let mut container = Container::default();
    loop {
        let mut tag = [0u8; 1];
        match r.read(&mut tag)? {
            0 => break,
            _ => match tag[0] {
                SECTION_ENCODER => container.encoder = Some(read_encoder(&mut r)?),
                SECTION_REDUCER => container.reducer = Some(read_reducer(&mut r)?),
                other => {
                    return Err(Error::Corrupt(format!("unknown section tag {other}")));
                }
            },
        }
    }
    Ok(container)
}

// ---- encoder section ----

#[derive(Serialize, Deserialize)]
struct ModelMeta {
    config: TrainingConfig,
    tokens: Vec<String>,
    counts: Vec<u64>,
    keys: Vec<SequenceKey>,
    epoch_losses: Vec<f64>,
    has_token_input: bool,
}

#[derive(Serialize, Deserialize)]
struct EncoderMeta {
    fusion: Fusion,
    patterns: PatternVocabulary,
    has_pattern_model: bool,
}

fn write_encoder<W: Write>(w: &mut W, encoder: &TrajectoryEncoder) -> Result<()> {
    let meta = EncoderMeta {
        fusion: encoder.fusion,
        patterns: encoder.patterns.clone(),
        has_pattern_model: encoder.pattern_model.is_some(),
    };
    write_json(w, &meta)?;
    write_model(w, &encoder.symbol_model)?;
    if let Some(pattern_model) = &encoder.pattern_model {
        write_model(w, pattern_model)?;
    }
    Ok(())
}

fn read_encoder<R: Read>(r: &mut R) -> Result<TrajectoryEncoder> {
    let meta: EncoderMeta = read_json(r, "encoder metadata")?;
    let symbol_model = read_model(r)?;
    let pattern_model = if meta.has_pattern_model {
        Some(read_model(r)?)
    } else {
        None
    };
    Ok(TrajectoryEncoder {
        fusion: meta.fusion,
        symbol_model,
        pattern_model,
        patterns: meta.patterns,
    })
}

fn write_model<W: Write>(w: &mut W, model: &EmbeddingModel) -> Result<()> {
    let meta = ModelMeta {
        config: model.config.clone(),
        tokens: model.vocab.tokens().to_vec(),
        counts: model.vocab.counts().to_vec(),
        keys: model.keys.clone(),
        epoch_losses: model.epoch_losses.clone(),
        has_token_input: model.token_input.is_some(),
    };
    write_json(w, &meta)?;
    write_matrix(w, &model.sequence_vectors)?;
    write_matrix(w, &model.token_output)?;
    if let Some(input) = &model.token_input {
        write_matrix(w, input)?;
    }
    Ok(())
}

fn read_model<R: Read>(r: &mut R) -> Result<EmbeddingModel> {
    let meta: ModelMeta = read_json(r, "model metadata")?;
    let sequence_vectors = read_matrix(r)?;
    let token_output = read_matrix(r)?;
    let token_input = if meta.has_token_input {
        Some(read_matrix(r)?)
    } else {
        None
    };
    Ok(EmbeddingModel {
        config: meta.config,
        vocab: Vocab::from_parts(meta.tokens, meta.counts)?,
        keys: meta.keys,
        sequence_vectors,
        token_output,
        token_input,
        epoch_losses: meta.epoch_losses,
    })
}

// ---- reducer section ----

#[derive(Serialize, Deserialize)]
enum ReducerMeta {
    Pca(PcaReducer),
    Umap {
        params: UmapParams,
        a: f64,
        b: f64,
        sigmas: Vec<f64>,
        rhos: Vec<f64>,
        edges: Vec<FuzzyEdge>,
    },
}

fn write_reducer<W: Write>(w: &mut W, reducer: &Reducer) -> Result<()> {
    match reducer {
        Reducer::Pca(pca) => write_json(w, &ReducerMeta::Pca(pca.clone())),
        Reducer::Umap(umap) => {
            write_json(
                w,
                &ReducerMeta::Umap {
                    params: umap.params,
                    a: umap.a,
                    b: umap.b,
                    sigmas: umap.sigmas.clone(),
                    rhos: umap.rhos.clone(),
                    edges: umap.edges.clone(),
                },
            )?;
            write_points(w, &umap.training)?;
            write_points(w, &umap.layout)?;
            Ok(())
        }
    }
}

fn read_reducer<R: Read>(r: &mut R) -> Result<Reducer> {
    let meta: ReducerMeta = read_json(r, "reducer metadata")?;
    match meta {
        ReducerMeta::Pca(pca) => Ok(Reducer::Pca(pca)),
        ReducerMeta::Umap {
            params,
            a,
            b,
            sigmas,
            rhos,
            edges,
        } => {
            let training = read_points(r)?;
            let layout = read_points(r)?;
            Ok(Reducer::Umap(UmapReducer {
                params,
                a,
                b,
                training,
                layout,
                sigmas,
                rhos,
                edges,
            }))
        }
    }
}

// ---- primitives ----

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::Corrupt(format!("truncated while reading {what}")))
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf, what)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R, what: &str) -> Result<u64> {
    let mut buf = [0u8; 8];
    read_exact(r, &mut buf, what)?;
    Ok(u64::from_le_bytes(buf))
}

fn write_json<W: Write, T: Serialize>(w: &mut W, value: &T) -> Result<()> {
    let payload = serde_json::to_vec(value)
        .map_err(|e| Error::Corrupt(format!("metadata serialization failed: {e}")))?;
    w.write_all(&(payload.len() as u64).to_le_bytes())?;
    w.write_all(&payload)?;
    Ok(())
}

fn read_json<R: Read, T: for<'de> Deserialize<'de>>(r: &mut R, what: &str) -> Result<T> {
    let len = read_u64(r, what)? as usize;
    if len > 1 << 31 {
        return Err(Error::Corrupt(format!("{what} length {len} implausible")));
    }
    let mut payload = vec![0u8; len];
    read_exact(r, &mut payload, what)?;
    serde_json::from_slice(&payload)
        .map_err(|e| Error::Corrupt(format!("bad {what}: {e}")))
}

fn write_matrix<W: Write>(w: &mut W, m: &Matrix) -> Result<()> {
    w.write_all(&(m.rows as u64).to_le_bytes())?;
    w.write_all(&(m.dim as u32).to_le_bytes())?;
    for value in m.data() {
        w.write_all(&value.to_le_bytes())?;
    }
    Ok(())
}

fn read_matrix<R: Read>(r: &mut R) -> Result<Matrix> {
    let rows = read_u64(r, "matrix rows")? as usize;
    let dim = read_u32(r, "matrix dim")? as usize;
    let mut data = vec![0.0f32; rows * dim];
    let mut buf = [0u8; 4];
    for slot in data.iter_mut() {
        read_exact(r, &mut buf, "matrix payload")?;
        *slot = f32::from_le_bytes(buf);
    }
    Matrix::from_data(rows, dim, data)
}

fn write_points<W: Write>(w: &mut W, p: &Points) -> Result<()> {
    w.write_all(&(p.rows as u64).to_le_bytes())?;
    w.write_all(&(p.dim as u32).to_le_bytes())?;
    for value in p.data() {
        w.write_all(&value.to_le_bytes())?;
    }
    Ok(())
}

fn read_points<R: Read>(r: &mut R) -> Result<Points> {
    let rows = read_u64(r, "points rows")? as usize;
    let dim = read_u32(r, "points dim")? as usize;
    let mut data = vec![0.0f64; rows * dim];
    let mut buf = [0u8; 8];
    for slot in data.iter_mut() {
        read_exact(r, &mut buf, "points payload")?;
        *slot = f64::from_le_bytes(buf);
    }
    Points::from_data(rows, dim, data)
}
