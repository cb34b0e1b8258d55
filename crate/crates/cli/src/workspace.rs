//! Files inside an experiment workspace: datasets, model files, codec
//! descriptions.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use smdma::codecs::{ChannelCodecConfig, LearnedChannelCodec, SemanticCodec, SemanticCodecConfig};
use smdma::media::{load_pnm, ImageTensor};
use smdma::nnkit::{read_model_file, write_model_file};
use smdma::{Error, Result};

pub const INDEX_FILE: &str = "index.txt";
pub const SEMANTIC_ENCODER: &str = "semantic_encoder.nn";
pub const SEMANTIC_DECODER: &str = "semantic_decoder.nn";
pub const SEMANTIC_DESC: &str = "semantic_codec.txt";
pub const CHANNEL_ENCODER: &str = "channel_encoder.nn";
pub const CHANNEL_DESC: &str = "channel_codec.txt";

pub fn channel_decoder_file(index: usize, shared: bool, init: bool) -> String {
    let stem = if shared { "channel_decoder".to_string() } else { format!("channel_decoder_{}", index + 1) };
    if init {
        format!("{stem}.init.nn")
    } else {
        format!("{stem}.nn")
    }
}

/// Resolves `path` against the workspace unless it is absolute.
pub fn resolve(workspace: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        workspace.join(path)
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads the image pairs listed in `dir/index.txt`.
pub fn load_pairs(dir: &Path) -> Result<Vec<(ImageTensor, ImageTensor)>> {
    let index = dir.join(INDEX_FILE);
    let text = std::fs::read_to_string(&index).map_err(|e| Error::io(&index, e))?;
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let names: Vec<&str> = line.split_whitespace().collect();
        let [a, b] = names.as_slice() else {
            return Err(Error::Data(format!("{}: line {} must name two files", index.display(), n + 1)));
        };
        pairs.push((load_pnm(&dir.join(a))?, load_pnm(&dir.join(b))?));
    }
    if pairs.is_empty() {
        return Err(Error::Data(format!("{} lists no image pairs", index.display())));
    }
    let shape = pairs[0].0.shape();
    if let Some((a, _)) = pairs.iter().find(|(a, b)| a.shape() != shape || b.shape() != shape) {
        return Err(Error::Data(format!("dataset mixes image shapes {:?} and {:?}", shape, a.shape())));
    }
    Ok(pairs)
}

pub fn flatten_pairs(pairs: &[(ImageTensor, ImageTensor)]) -> Vec<ImageTensor> {
    pairs.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect()
}

fn write_desc(path: &Path, fields: &[(&str, String)]) -> Result<()> {
    let text: String = fields.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    write_text(path, &text)
}

fn read_desc(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Data(format!("{}: malformed line {line:?}", path.display())))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn desc_field<T: std::str::FromStr>(desc: &BTreeMap<String, String>, key: &str, path: &Path) -> Result<T> {
    desc.get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Data(format!("{}: missing or invalid {key}", path.display())))
}

/// Writes the semantic codec model files and description; returns the paths.
pub fn save_semantic(ws: &Path, codec: &SemanticCodec) -> Result<Vec<PathBuf>> {
    let c = &codec.config;
    let files = [ws.join(SEMANTIC_ENCODER), ws.join(SEMANTIC_DECODER), ws.join(SEMANTIC_DESC)];
    write_model_file(&codec.encoder, &files[0])?;
    write_model_file(&codec.decoder, &files[1])?;
    write_desc(
        &files[2],
        &[
            ("height", c.height.to_string()),
            ("width", c.width.to_string()),
            ("channels", c.channels.to_string()),
            ("hidden", c.hidden.to_string()),
            ("dim", c.dim.to_string()),
            ("encoder", SEMANTIC_ENCODER.into()),
            ("decoder", SEMANTIC_DECODER.into()),
        ],
    )?;
    Ok(files.to_vec())
}

pub fn semantic_files(ws: &Path) -> Vec<PathBuf> {
    vec![ws.join(SEMANTIC_ENCODER), ws.join(SEMANTIC_DECODER), ws.join(SEMANTIC_DESC)]
}

pub fn load_semantic(ws: &Path) -> Result<SemanticCodec> {
    let desc_path = ws.join(SEMANTIC_DESC);
    let desc = read_desc(&desc_path)?;
    let cfg = SemanticCodecConfig {
        height: desc_field(&desc, "height", &desc_path)?,
        width: desc_field(&desc, "width", &desc_path)?,
        channels: desc_field(&desc, "channels", &desc_path)?,
        hidden: desc_field(&desc, "hidden", &desc_path)?,
        dim: desc_field(&desc, "dim", &desc_path)?,
    };
    let encoder = read_model_file(&ws.join(SEMANTIC_ENCODER))?;
    let decoder = read_model_file(&ws.join(SEMANTIC_DECODER))?;
    SemanticCodec::from_models(cfg, encoder, decoder)
}

/// Writes channel codec model files (`init` selects the `.init.nn` names).
pub fn save_channel(ws: &Path, codec: &LearnedChannelCodec, cfg: &ChannelCodecConfig, init: bool) -> Result<Vec<PathBuf>> {
    let shared = codec.is_shared();
    let enc_name = if init { "channel_encoder.init.nn" } else { CHANNEL_ENCODER };
    let mut files = vec![ws.join(enc_name)];
    write_model_file(&codec.encoder, &files[0])?;
    for (i, dec) in codec.decoders.iter().enumerate() {
        let path = ws.join(channel_decoder_file(i, shared, init));
        write_model_file(dec, &path)?;
        files.push(path);
    }
    if !init {
        let desc = ws.join(CHANNEL_DESC);
        write_desc(
            &desc,
            &[
                ("encoder_widths", format!("{},{}", cfg.encoder_widths[0], cfg.encoder_widths[1])),
                ("decoder_width", cfg.decoder_width.to_string()),
                ("kernel_size", cfg.kernel_size.to_string()),
                ("shared_decoder", shared.to_string()),
            ],
        )?;
        files.push(desc);
    }
    Ok(files)
}

pub fn load_channel(ws: &Path) -> Result<(LearnedChannelCodec, Vec<PathBuf>)> {
    let desc_path = ws.join(CHANNEL_DESC);
    let desc = read_desc(&desc_path)?;
    let shared: bool = desc_field(&desc, "shared_decoder", &desc_path)?;
    let mut files = vec![ws.join(CHANNEL_ENCODER)];
    let encoder = read_model_file(&files[0])?;
    let mut decoders = Vec::new();
    for i in 0..if shared { 1 } else { 2 } {
        let path = ws.join(channel_decoder_file(i, shared, false));
        decoders.push(read_model_file(&path)?);
        files.push(path);
    }
    files.push(desc_path);
    Ok((LearnedChannelCodec { encoder, decoders }, files))
}
