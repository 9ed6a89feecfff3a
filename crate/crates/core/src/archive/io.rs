// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ActivationArchive, ArchiveMetadata, StimulusSet};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
const FORMAT_NAME: &str = "modalprobe-archive";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    format_version: u32,
    model_id: String,
    checkpoint_id: String,
    layer_count: usize,
    hidden_dim: usize,
    n_stimuli: usize,
    stimulus_ids: Vec<String>,
    summed_logprob: Vec<f64>,
    #[serde(flatten)]
    metadata: ArchiveMetadata,
}

fn layer_file(dir: &Path, layer: usize) -> PathBuf {
    dir.join(format!("layer_{layer}.f32"))
}

fn encode_f32_le(values: &[f32]) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

fn decode_f32_le(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

pub(crate) fn write_f32_file(path: &Path, values: &[f32]) -> Result<()> {
    fs::write(path, encode_f32_le(values)).map_err(|e| Error::io(path, e))
}

/// Read a headerless f32 blob that must hold exactly `expected_len` values.
pub(crate) fn read_f32_file(path: &Path, expected_len: usize) -> Result<Vec<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = 4 * expected_len as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::PayloadSize {
            path: path.to_path_buf(),
            expected,
            found: bytes.len() as u64,
        });
    }
    Ok(decode_f32_le(&bytes))
}

/// Write `archive` as a manifest plus one raw f32 file per layer.
pub fn write_archive(archive: &ActivationArchive, path: impl AsRef<Path>) -> Result<()> {
    let dir = path.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (layer, matrix) in archive.states().iter().enumerate() {
        write_f32_file(&layer_file(dir, layer), matrix)?;
    }
    let manifest = Manifest {
        format: FORMAT_NAME.into(),
        format_version: FORMAT_VERSION,
        model_id: archive.model_id().into(),
        checkpoint_id: archive.checkpoint_id().into(),
        layer_count: archive.layer_count(),
        hidden_dim: archive.hidden_dim(),
        n_stimuli: archive.len(),
        stimulus_ids: archive.stimulus_ids().to_vec(),
        summed_logprob: archive.summed_logprob().to_vec(),
        metadata: archive.metadata().clone(),
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::parse(dir.join(MANIFEST_FILE), e.to_string()))?;
    let mpath = dir.join(MANIFEST_FILE);
    fs::write(&mpath, text).map_err(|e| Error::io(&mpath, e))
}

/// Read and validate an archive directory.
pub fn read_archive(path: impl AsRef<Path>) -> Result<ActivationArchive> {
    let dir = path.as_ref();
    let mpath = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let m: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::parse(&mpath, e.to_string()))?;
    if m.format != FORMAT_NAME {
        return Err(Error::parse(&mpath, format!("unexpected format `{}`", m.format)));
    }
    if m.format_version != FORMAT_VERSION {
        return Err(Error::parse(
            &mpath,
            format!("unsupported format_version {}", m.format_version),
        ));
    }
    if m.stimulus_ids.len() != m.n_stimuli {
        return Err(Error::parse(
            &mpath,
            format!(
                "n_stimuli = {} but {} stimulus_ids listed",
                m.n_stimuli,
                m.stimulus_ids.len()
            ),
        ));
    }
    let mut states = Vec::with_capacity(m.layer_count);
    for layer in 0..m.layer_count {
        let file = layer_file(dir, layer);
        if !file.exists() {
            return Err(Error::parse(
                &mpath,
                format!("missing layer file {}", file.display()),
            ));
        }
        states.push(read_f32_file(&file, m.n_stimuli * m.hidden_dim)?);
    }
    let archive = ActivationArchive::new(
        m.model_id,
        m.checkpoint_id,
        m.hidden_dim,
        m.stimulus_ids,
        states,
        m.summed_logprob,
    )?;
    Ok(archive.with_metadata(m.metadata))
}

/// Read an archive and check that it covers exactly `stimuli`.
pub fn read_archive_for(path: impl AsRef<Path>, stimuli: &StimulusSet) -> Result<ActivationArchive> {
    let archive = read_archive(path)?;
    archive.check_stimuli(stimuli)?;
    Ok(archive)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_row() -> ActivationArchive {
        ActivationArchive::new(
            "m",
            "c",
            3,
            vec!["s0".into()],
            vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]],
            vec![-3.5],
        )
        .unwrap()
    }

    #[test]
    fn twelve_byte_layer_file() {
        let dir = tempfile::tempdir().unwrap();
        write_archive(&single_row(), dir.path()).unwrap();
        let bytes = fs::read(dir.path().join("layer_0.f32")).unwrap();
        assert_eq!(bytes.len(), 12);
        assert_eq!(
            bytes,
            [
                0x00, 0x00, 0x80, 0x3f, // 1.0
                0x00, 0x00, 0x00, 0x40, // 2.0
                0x00, 0x00, 0x40, 0x40, // 3.0
            ]
        );
    }

    #[test]
    fn truncated_layer_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_archive(&single_row(), dir.path()).unwrap();
        let f = dir.path().join("layer_1.f32");
        let bytes = fs::read(&f).unwrap();
        fs::write(&f, &bytes[..bytes.len() - 4]).unwrap();
        let err = read_archive(dir.path()).unwrap_err();
        assert!(err.to_string().contains("payload size mismatch"), "{err}");
    }

    #[test]
    fn missing_layer_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_archive(&single_row(), dir.path()).unwrap();
        fs::remove_file(dir.path().join("layer_1.f32")).unwrap();
        let err = read_archive(dir.path()).unwrap_err();
        assert!(err.to_string().contains("missing layer file"), "{err}");
    }

    #[test]
    fn wide_single_row_accepted() {
        // d = 32, n = 1: a 128-byte payload matches 4 * n * d.
        let dir = tempfile::tempdir().unwrap();
        let values: Vec<f32> = (0..32).map(|i| i as f32 * 0.5).collect();
        let a = ActivationArchive::new("m", "c", 32, vec!["x".into()], vec![values], vec![-1.0])
            .unwrap();
        write_archive(&a, dir.path()).unwrap();
        assert_eq!(fs::metadata(dir.path().join("layer_0.f32")).unwrap().len(), 128);
        assert_eq!(read_archive(dir.path()).unwrap(), a);
    }

    #[test]
    fn non_finite_payload_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_archive(&single_row(), dir.path()).unwrap();
        write_f32_file(&dir.path().join("layer_0.f32"), &[1.0, f32::INFINITY, 3.0]).unwrap();
        assert!(matches!(read_archive(dir.path()), Err(Error::Validation(_))));
    }

    #[test]
    fn metadata_survives() {
        let dir = tempfile::tempdir().unwrap();
        let a = single_row().with_metadata(ArchiveMetadata {
            stream_point: Some("resid_post".into()),
            label_set: Some(vec!["possible".into(), "impossible".into()]),
        });
        write_archive(&a, dir.path()).unwrap();
        let b = read_archive(dir.path()).unwrap();
        assert_eq!(b.metadata().stream_point.as_deref(), Some("resid_post"));
        assert_eq!(b, a);
    }

    #[test]
    fn stimulus_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_archive(&single_row(), dir.path()).unwrap();
        let set = StimulusSet::new(vec![super::super::Stimulus::new("other", "A cat sat.")])
            .unwrap();
        assert!(read_archive_for(dir.path(), &set).is_err());
    }
}
