//! File formats: PFM float rasters, PNG masks, JSON scene configs, digests.

mod config;
mod mask;
mod pfm;

use sha2::{Digest, Sha256};

use crate::bridgemath::Image;
use crate::error::{Error, Result};
use crate::geometry::DepthMap;
use crate::lgi::LgiMaps;

pub use config::{
    load_scene_config, save_scene_config, IntrinsicsConfig, LightConfig, LightKindName, ResolvedScene, SceneConfig,
    SCHEMA_VERSION,
};
pub use mask::{decode_mask_png, encode_display_png, encode_mask_png, read_mask_png, write_display_png, write_mask_png};
pub use pfm::{decode_pfm, encode_pfm, read_pfm, write_pfm, Pfm, PfmHeader};

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of a float raster's little-endian bytes.
pub fn digest_f32(values: &[f32]) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Digest covering all three channels and the validity flags.
pub fn digest_lgi(maps: &LgiMaps) -> String {
    let mut h = Sha256::new();
    for c in [&maps.c1, &maps.c2, &maps.c3] {
        for v in c.iter() {
            h.update(v.to_le_bytes());
        }
    }
    h.update(maps.valid.iter().map(|b| *b as u8).collect::<Vec<_>>());
    hex::encode(h.finalize())
}

pub fn depth_to_pfm(depth: &DepthMap) -> Pfm {
    Pfm::new(depth.width(), depth.height(), 1, depth.values().to_vec()).expect("depth shape is consistent")
}

pub fn pfm_to_depth(pfm: &Pfm) -> Result<DepthMap> {
    if pfm.header.bands != 1 {
        return Err(Error::shape("1 band", format!("{} bands", pfm.header.bands)));
    }
    DepthMap::new(pfm.header.width, pfm.header.height, pfm.data.clone())
}

/// Channel order c1, c2, c3.
pub fn lgi_to_pfm(maps: &LgiMaps) -> Pfm {
    Pfm::new(maps.width, maps.height, 3, maps.interleaved()).expect("lgi shape is consistent")
}

pub fn image_to_pfm(image: &Image) -> Result<Pfm> {
    Pfm::new(image.width, image.height, image.channels, image.data.iter().map(|v| *v as f32).collect())
}

pub fn pfm_to_image(pfm: &Pfm) -> Image {
    Image::with_channels(
        pfm.header.width,
        pfm.header.height,
        pfm.header.bands,
        pfm.data.iter().map(|v| *v as f64).collect(),
    )
    .expect("pfm shape is consistent")
}
