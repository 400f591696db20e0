use super::bytes::{Reader, Writer};
use crate::classify::{
    Dense, LinearOvr, Mlp, ModelKind, ModelParams, ModelSpec, Node, Standardizer, TrainedModel, TrainingDigest, Tree,
};
use crate::error::{Error, Result};
use crate::posture::{PostureLabel, N_CLASSES, N_SENSORS};

pub const MAGIC: [u8; 4] = *b"SCM1";
pub const FORMAT_VERSION: u16 = 1;
/// Magic, version, kind and class count.
const HEADER_LEN: usize = 8;
const TRAILER_LEN: usize = 4;

const TAG_SPLIT: u8 = 0;
const TAG_LEAF: u8 = 1;

fn put_tree(w: &mut Writer, t: &Tree) -> Result<()> {
    w.len_u32(t.nodes.len())?;
    for n in &t.nodes {
        match *n {
            Node::Split { feature, threshold, left, right } => {
                w.u8(TAG_SPLIT);
                w.u8(feature);
                w.f64(threshold);
                w.u32(left);
                w.u32(right);
            }
            Node::Leaf { class, confidence } => {
                w.u8(TAG_LEAF);
                w.u8(class);
                w.f64(confidence);
            }
        }
    }
    Ok(())
}

fn get_tree(r: &mut Reader) -> Result<Tree> {
    let n = r.count(10)?;
    if n == 0 {
        return Err(Error::Corruption("tree without nodes".into()));
    }
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let node = match r.u8()? {
            TAG_SPLIT => {
                let (feature, threshold, left, right) = (r.u8()?, r.f64()?, r.u32()?, r.u32()?);
                // Children come later in pre-order, so walks always terminate.
                let ok = |c: u32| (c as usize) > i && (c as usize) < n;
                if feature as usize >= N_SENSORS || !ok(left) || !ok(right) {
                    return Err(Error::Corruption(format!("bad split node {i}")));
                }
                Node::Split { feature, threshold, left, right }
            }
            TAG_LEAF => {
                let (class, confidence) = (r.u8()?, r.f64()?);
                if class as usize >= N_CLASSES {
                    return Err(Error::Corruption(format!("leaf {i} has class {class}")));
                }
                Node::Leaf { class, confidence }
            }
            tag => return Err(Error::Corruption(format!("unknown node tag {tag}"))),
        };
        nodes.push(node);
    }
    Ok(Tree { nodes })
}

fn put_scaler(w: &mut Writer, s: &Standardizer) {
    w.f64s(&s.mean);
    w.f64s(&s.scale);
}

fn get_scaler(r: &mut Reader) -> Result<Standardizer> {
    Ok(Standardizer { mean: r.f64_array()?, scale: r.f64_array()? })
}

/// Self-describing little-endian artifact with a CRC-32 trailer over every
/// preceding byte. Training wall time is not stored.
pub fn encode(model: &TrainedModel) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    w.buf.extend_from_slice(&MAGIC);
    w.u16(FORMAT_VERSION);
    w.u8(model.kind().code());
    w.u8(model.class_names.len() as u8);
    for c in &model.class_names {
        w.u8(c.index() as u8);
    }
    let spec = serde_json::to_vec(&model.spec)?;
    w.len_u32(spec.len())?;
    w.buf.extend_from_slice(&spec);
    w.u64(model.digest.n_train as u64);
    w.u64(model.digest.seed);
    match &model.params {
        ModelParams::Tree(t) => put_tree(&mut w, t)?,
        ModelParams::Forest(trees) => {
            w.len_u32(trees.len())?;
            for t in trees {
                put_tree(&mut w, t)?;
            }
        }
        ModelParams::Svm(m) => {
            put_scaler(&mut w, &m.scaler);
            w.u8(m.weights.len() as u8);
            for (wc, b) in m.weights.iter().zip(&m.bias) {
                w.f64s(wc);
                w.f64(*b);
            }
        }
        ModelParams::Mlp(m) => {
            put_scaler(&mut w, &m.scaler);
            w.u8(m.layers.len() as u8);
            for l in &m.layers {
                w.u16(l.inputs as u16);
                w.u16(l.outputs as u16);
                w.f64s(&l.w);
                w.f64s(&l.b);
            }
        }
    }
    let crc = crc32fast::hash(&w.buf);
    w.u32(crc);
    Ok(w.buf)
}

/// CRC stored in the trailer of a binary artifact.
pub fn trailer_crc(bytes: &[u8]) -> Option<u32> {
    let at = bytes.len().checked_sub(TRAILER_LEN)?;
    Some(u32::from_le_bytes(bytes[at..].try_into().ok()?))
}

/// Checks the CRC before anything else, then magic and version.
pub fn decode(bytes: &[u8]) -> Result<TrainedModel> {
    if bytes.len() < HEADER_LEN + TRAILER_LEN {
        return Err(Error::Corruption(format!("{} bytes is too short for an artifact", bytes.len())));
    }
    let body = &bytes[..bytes.len() - TRAILER_LEN];
    let stored = trailer_crc(bytes).expect("length checked");
    let actual = crc32fast::hash(body);
    if stored != actual {
        return Err(Error::Corruption(format!("checksum mismatch: stored {stored:08x}, computed {actual:08x}")));
    }
    let mut r = Reader::new(body);
    if r.take(4)? != MAGIC {
        return Err(Error::Corruption("bad magic".into()));
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::Version { found: version, supported: FORMAT_VERSION });
    }
    let kind = ModelKind::from_code(r.u8()?).ok_or_else(|| Error::Corruption("unknown model kind".into()))?;
    let n_classes = r.u8()? as usize;
    let class_names = (0..n_classes)
        .map(|_| {
            let i = r.u8()? as usize;
            PostureLabel::from_index(i).ok_or_else(|| Error::Corruption(format!("unknown class index {i}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if class_names.len() != N_CLASSES {
        return Err(Error::Corruption(format!("{} classes, expected {N_CLASSES}", class_names.len())));
    }
    let spec_len = r.count(1)?;
    let spec: ModelSpec =
        serde_json::from_slice(r.take(spec_len)?).map_err(|e| Error::Corruption(format!("model spec: {e}")))?;
    if spec.kind() != kind {
        return Err(Error::Corruption(format!("header kind {kind} but spec kind {}", spec.kind())));
    }
    let digest = TrainingDigest { n_train: r.u64()? as usize, seed: r.u64()?, wall_time_ms: 0 };
    let params = match kind {
        ModelKind::Dt => ModelParams::Tree(get_tree(&mut r)?),
        ModelKind::Rf => {
            let n = r.count(14)?;
            if n == 0 {
                return Err(Error::Corruption("forest without trees".into()));
            }
            ModelParams::Forest((0..n).map(|_| get_tree(&mut r)).collect::<Result<_>>()?)
        }
        ModelKind::Svm => {
            let scaler = get_scaler(&mut r)?;
            let n = r.u8()? as usize;
            if n != N_CLASSES {
                return Err(Error::Corruption(format!("{n} SVM machines")));
            }
            let (mut weights, mut bias) = (Vec::with_capacity(n), Vec::with_capacity(n));
            for _ in 0..n {
                weights.push(r.f64_array()?);
                bias.push(r.f64()?);
            }
            ModelParams::Svm(LinearOvr { scaler, weights, bias })
        }
        ModelKind::Mlp => {
            let scaler = get_scaler(&mut r)?;
            let n = r.u8()? as usize;
            let mut layers: Vec<Dense> = Vec::with_capacity(n);
            for _ in 0..n {
                let (inputs, outputs) = (r.u16()? as usize, r.u16()? as usize);
                let expected_in = layers.last().map_or(N_SENSORS, |l| l.outputs);
                if inputs != expected_in || outputs == 0 {
                    return Err(Error::Corruption("MLP layer widths do not chain".into()));
                }
                layers.push(Dense { inputs, outputs, w: r.f64s(inputs * outputs)?, b: r.f64s(outputs)? });
            }
            if layers.last().map(|l| l.outputs) != Some(N_CLASSES) {
                return Err(Error::Corruption("MLP output width".into()));
            }
            ModelParams::Mlp(Mlp { scaler, layers })
        }
    };
    if !r.finished() {
        return Err(Error::Corruption("trailing bytes after model".into()));
    }
    Ok(TrainedModel { spec, params, class_names, digest })
}
