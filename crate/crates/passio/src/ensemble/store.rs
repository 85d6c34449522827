//! Binary container for a trained model set: one ensemble per affect
//! dimension plus the preprocessing metadata needed to reproduce its inputs.
//!
//! Layout (all little-endian): magic `PVAD`, format version, metadata,
//! three ensemble blocks in valence/arousal/dominance order, and a SHA-256
//! digest of everything before it. Strings are u16-length-prefixed UTF-8.

use std::fs;
use std::path::Path;

use byteorder::{ReadBytesExt as _, WriteBytesExt as _, LE};
use sha2::{Digest as _, Sha256};

use super::tree::{DecisionTree, Node, N_CLASSES};
use super::{EnsembleMode, EnsembleSpec, SplitCandidates, TreeEnsemble};
use crate::dsp::FilterMode;
use crate::error::{Error, Result};
use crate::montage::{ChannelId, EmotionComponent};

const MAGIC: &[u8; 4] = b"PVAD";
const FORMAT_VERSION: u32 = 1;

const NODE_SPLIT: u8 = 0;
const NODE_PROBS: u8 = 1;
const NODE_VALUE: u8 = 2;

/// Provenance a model carries so inference can rebuild the same features.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelMeta {
    pub window_length_s: f64,
    pub bandpass_lo_hz: f64,
    pub bandpass_hi_hz: f64,
    pub filter_mode: FilterMode,
    pub channels: Vec<ChannelId>,
    pub config_hash: String,
    pub build: String,
    pub seed: u64,
}

/// One trained ensemble per affect dimension.
#[derive(Clone, Debug)]
pub struct VadModelSet {
    pub meta: ModelMeta,
    pub valence: TreeEnsemble,
    pub arousal: TreeEnsemble,
    pub dominance: TreeEnsemble,
}

impl VadModelSet {
    pub fn component(&self, c: EmotionComponent) -> &TreeEnsemble {
        match c {
            EmotionComponent::Valence => &self.valence,
            EmotionComponent::Arousal => &self.arousal,
            EmotionComponent::Dominance => &self.dominance,
        }
    }
}

// ---------------------------------------------------------------------------
// Writing

pub fn save_model_set(path: &Path, set: &VadModelSet) -> Result<()> {
    let mut buf = Vec::with_capacity(1 << 20);
    buf.extend_from_slice(MAGIC);
    buf.write_u32::<LE>(FORMAT_VERSION).expect("vec write");
    write_meta(&mut buf, &set.meta);
    for model in [&set.valence, &set.arousal, &set.dominance] {
        write_ensemble(&mut buf, model);
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    fs::write(path, &buf).map_err(|e| Error::io(path, e))
}

fn write_string(buf: &mut Vec<u8>, s: &str) {
    let bytes = s.as_bytes();
    assert!(bytes.len() <= u16::MAX as usize, "string too long for container");
    buf.write_u16::<LE>(bytes.len() as u16).expect("vec write");
    buf.extend_from_slice(bytes);
}

fn write_meta(buf: &mut Vec<u8>, meta: &ModelMeta) {
    buf.write_f64::<LE>(meta.window_length_s).expect("vec write");
    buf.write_f64::<LE>(meta.bandpass_lo_hz).expect("vec write");
    buf.write_f64::<LE>(meta.bandpass_hi_hz).expect("vec write");
    buf.push(match meta.filter_mode {
        FilterMode::Causal => 0,
        FilterMode::ZeroPhase => 1,
    });
    buf.write_u64::<LE>(meta.seed).expect("vec write");
    buf.write_u16::<LE>(meta.channels.len() as u16).expect("vec write");
    for ch in &meta.channels {
        write_string(buf, ch.name());
    }
    write_string(buf, &meta.config_hash);
    write_string(buf, &meta.build);
}

fn write_ensemble(buf: &mut Vec<u8>, model: &TreeEnsemble) {
    let spec = model.spec();
    buf.push(match spec.mode {
        EnsembleMode::RfRegressor => 0,
        EnsembleMode::RfClassifier => 1,
        EnsembleMode::ExtraTrees => 2,
    });
    buf.write_u32::<LE>(spec.n_trees as u32).expect("vec write");
    buf.write_u32::<LE>(spec.min_leaf as u32).expect("vec write");
    match spec.split_candidates {
        SplitCandidates::Sqrt => buf.push(0),
        SplitCandidates::Third => buf.push(1),
        SplitCandidates::Fixed(m) => {
            buf.push(2);
            buf.write_u32::<LE>(m as u32).expect("vec write");
        }
    }
    buf.write_u64::<LE>(model.seed()).expect("vec write");
    buf.write_u32::<LE>(model.n_features() as u32).expect("vec write");
    for name in model.feature_names() {
        write_string(buf, name);
    }
    for &v in model.importances() {
        buf.write_f64::<LE>(v).expect("vec write");
    }
    buf.write_u32::<LE>(model.trees().len() as u32).expect("vec write");
    for tree in model.trees() {
        buf.write_u32::<LE>(tree.nodes.len() as u32).expect("vec write");
        for node in &tree.nodes {
            match node {
                Node::Split { feature, threshold, left, right } => {
                    buf.push(NODE_SPLIT);
                    buf.write_u32::<LE>(*feature).expect("vec write");
                    buf.write_f64::<LE>(*threshold).expect("vec write");
                    buf.write_u32::<LE>(*left).expect("vec write");
                    buf.write_u32::<LE>(*right).expect("vec write");
                }
                Node::LeafProbs(p) => {
                    buf.push(NODE_PROBS);
                    for v in p {
                        buf.write_f64::<LE>(*v).expect("vec write");
                    }
                }
                Node::LeafValue(v) => {
                    buf.push(NODE_VALUE);
                    buf.write_f64::<LE>(*v).expect("vec write");
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Reading

/// Cursor that reports the byte offset of whatever failed to parse.
struct Reader<'a> {
    data: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::parse(self.at as u64, message)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.data.len() {
            return Err(self.err(format!(
                "needed {n} bytes, {} remain",
                self.data.len() - self.at
            )));
        }
        let s = &self.data[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(self.take(2)?.read_u16::<LE>().expect("sized"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(self.take(4)?.read_u32::<LE>().expect("sized"))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(self.take(8)?.read_u64::<LE>().expect("sized"))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(self.take(8)?.read_f64::<LE>().expect("sized"))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u16()? as usize;
        let start = self.at;
        let bytes = self.take(len)?;
        std::str::from_utf8(bytes)
            .map(str::to_owned)
            .map_err(|e| Error::parse(start as u64, format!("invalid UTF-8: {e}")))
    }
}

pub fn load_model_set(path: &Path) -> Result<VadModelSet> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    if data.len() < MAGIC.len() + 4 + 32 {
        return Err(Error::parse(0, "file too short for a model container"));
    }
    let (body, trailer) = data.split_at(data.len() - 32);
    let digest = Sha256::digest(body);
    if digest.as_slice() != trailer {
        return Err(Error::parse(
            body.len() as u64,
            "checksum mismatch; file is corrupt or truncated",
        ));
    }

    let mut r = Reader { data: body, at: 0 };
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(Error::parse(0, "not a model container (bad magic)"));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::parse(
            4,
            format!("unsupported model format version {version}, expected {FORMAT_VERSION}"),
        ));
    }
    let meta = read_meta(&mut r)?;
    let valence = read_ensemble(&mut r)?;
    let arousal = read_ensemble(&mut r)?;
    let dominance = read_ensemble(&mut r)?;
    if r.at != body.len() {
        return Err(r.err("trailing bytes after final ensemble"));
    }
    Ok(VadModelSet { meta, valence, arousal, dominance })
}

fn read_meta(r: &mut Reader<'_>) -> Result<ModelMeta> {
    let window_length_s = r.f64()?;
    let bandpass_lo_hz = r.f64()?;
    let bandpass_hi_hz = r.f64()?;
    let filter_mode = match r.u8()? {
        0 => FilterMode::Causal,
        1 => FilterMode::ZeroPhase,
        other => return Err(r.err(format!("unknown filter mode tag {other}"))),
    };
    let seed = r.u64()?;
    let n_channels = r.u16()? as usize;
    let mut channels = Vec::with_capacity(n_channels);
    for _ in 0..n_channels {
        let at = r.at;
        let name = r.string()?;
        let ch = ChannelId::parse(&name)
            .map_err(|e| Error::parse(at as u64, format!("bad channel: {e}")))?;
        channels.push(ch);
    }
    let config_hash = r.string()?;
    let build = r.string()?;
    Ok(ModelMeta {
        window_length_s,
        bandpass_lo_hz,
        bandpass_hi_hz,
        filter_mode,
        channels,
        config_hash,
        build,
        seed,
    })
}

fn read_ensemble(r: &mut Reader<'_>) -> Result<TreeEnsemble> {
    let mode = match r.u8()? {
        0 => EnsembleMode::RfRegressor,
        1 => EnsembleMode::RfClassifier,
        2 => EnsembleMode::ExtraTrees,
        other => return Err(r.err(format!("unknown ensemble mode tag {other}"))),
    };
    let n_trees = r.u32()? as usize;
    let min_leaf = r.u32()? as usize;
    let split_candidates = match r.u8()? {
        0 => SplitCandidates::Sqrt,
        1 => SplitCandidates::Third,
        2 => SplitCandidates::Fixed(r.u32()? as usize),
        other => return Err(r.err(format!("unknown split-candidate tag {other}"))),
    };
    let seed = r.u64()?;
    let d = r.u32()? as usize;
    let mut feature_names = Vec::with_capacity(d);
    for _ in 0..d {
        feature_names.push(r.string()?);
    }
    let mut importances = Vec::with_capacity(d);
    for _ in 0..d {
        importances.push(r.f64()?);
    }
    let tree_count = r.u32()? as usize;
    if tree_count != n_trees {
        return Err(r.err(format!("header says {n_trees} trees, block has {tree_count}")));
    }
    let mut trees = Vec::with_capacity(tree_count);
    for _ in 0..tree_count {
        let n_nodes = r.u32()? as usize;
        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let node = match r.u8()? {
                NODE_SPLIT => {
                    let feature = r.u32()?;
                    if feature as usize >= d {
                        return Err(r.err(format!(
                            "split references feature {feature} of {d}"
                        )));
                    }
                    let threshold = r.f64()?;
                    let left = r.u32()?;
                    let right = r.u32()?;
                    if left as usize >= n_nodes || right as usize >= n_nodes {
                        return Err(r.err("split child index out of range"));
                    }
                    Node::Split { feature, threshold, left, right }
                }
                NODE_PROBS => {
                    let mut p = [0.0; N_CLASSES];
                    for v in &mut p {
                        *v = r.f64()?;
                    }
                    Node::LeafProbs(p)
                }
                NODE_VALUE => Node::LeafValue(r.f64()?),
                other => return Err(r.err(format!("unknown node tag {other}"))),
            };
            nodes.push(node);
        }
        trees.push(DecisionTree { nodes });
    }
    Ok(TreeEnsemble {
        spec: EnsembleSpec { mode, n_trees, min_leaf, split_candidates },
        feature_names,
        trees,
        importances,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::Target;
    use crate::montage::parse_channels;
    use crate::rng::rng_from_seed;
    use ndarray::Array2;
    use rand::Rng as _;

    fn sample_set() -> VadModelSet {
        let mut rng = rng_from_seed(12);
        let n = 60;
        let d = 4;
        let x = Array2::from_shape_fn((n, d), |_| rng.gen::<f64>());
        let y: Vec<i8> = (0..n).map(|i| if x[(i, 1)] > 0.5 { 1 } else { -1 }).collect();
        let names: Vec<String> = (0..d).map(|i| format!("f{i}")).collect();
        let mut spec = EnsembleSpec::new(EnsembleMode::ExtraTrees);
        spec.n_trees = 12;
        let fit = |seed| {
            TreeEnsemble::fit(spec, &x, Target::Levels(&y), &names, seed).unwrap()
        };
        VadModelSet {
            meta: ModelMeta {
                window_length_s: 5.0,
                bandpass_lo_hz: 0.4,
                bandpass_hi_hz: 45.0,
                filter_mode: FilterMode::Causal,
                channels: parse_channels(&["T7", "T8"]).unwrap(),
                config_hash: "deadbeef".into(),
                build: "test".into(),
                seed: 42,
            },
            valence: fit(1),
            arousal: fit(2),
            dominance: fit(3),
        }
    }

    #[test]
    fn round_trip_preserves_predictions_and_meta() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.pvad");
        let set = sample_set();
        save_model_set(&path, &set).unwrap();
        let loaded = load_model_set(&path).unwrap();
        assert_eq!(loaded.meta, set.meta);
        assert_eq!(loaded.valence.trees(), set.valence.trees());
        assert_eq!(loaded.dominance.importances(), set.dominance.importances());
        let mut rng = rng_from_seed(9);
        for _ in 0..20 {
            let row: Vec<f64> = (0..4).map(|_| rng.gen::<f64>()).collect();
            assert_eq!(
                loaded.arousal.predict_proba(&row).unwrap(),
                set.arousal.predict_proba(&row).unwrap()
            );
        }
    }

    #[test]
    fn corruption_is_detected_by_checksum() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.pvad");
        save_model_set(&path, &sample_set()).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xff;
        std::fs::write(&path, &bytes).unwrap();
        let err = load_model_set(&path).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
        assert!(err.to_string().contains("checksum"));
    }

    #[test]
    fn truncation_and_bad_magic_are_rejected_with_offsets() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.pvad");
        save_model_set(&path, &sample_set()).unwrap();
        let bytes = std::fs::read(&path).unwrap();

        let short = dir.path().join("short.pvad");
        std::fs::write(&short, &bytes[..10]).unwrap();
        assert!(matches!(load_model_set(&short), Err(Error::Parse { .. })));

        // Flip the magic but keep the checksum consistent with the body.
        let mut forged = bytes[..bytes.len() - 32].to_vec();
        forged[0] = b'X';
        let digest = Sha256::digest(&forged);
        forged.extend_from_slice(&digest);
        let bad_magic = dir.path().join("magic.pvad");
        std::fs::write(&bad_magic, &forged).unwrap();
        let err = load_model_set(&bad_magic).unwrap_err();
        assert!(err.to_string().contains("magic"), "{err}");
    }

    #[test]
    fn future_versions_are_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.pvad");
        save_model_set(&path, &sample_set()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let mut forged = bytes[..bytes.len() - 32].to_vec();
        forged[4..8].copy_from_slice(&9u32.to_le_bytes());
        let digest = Sha256::digest(&forged);
        forged.extend_from_slice(&digest);
        std::fs::write(&path, &forged).unwrap();
        let err = load_model_set(&path).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
    }
}
