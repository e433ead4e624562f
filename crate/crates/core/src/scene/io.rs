//! `kit.json`: the on-disk kit family document. Shape grids are stored as
//! run-length-encoded bit strings, poses as `[x, y, theta]` arrays, all
//! lengths in meters.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use super::kit::{Cavity, Kit, KitSpec, ObjectSpec, ShapeId};
use super::pose::Pose2;
use super::shape::ShapeMask;
use super::SceneError;
use crate::mask::{Mask, MaskRle};

pub const KIT_FORMAT: &str = "f2f-kit";
pub const KIT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct PoseArr([f64; 3]);

impl From<&Pose2> for PoseArr {
    fn from(p: &Pose2) -> Self {
        PoseArr([p.x, p.y, p.theta])
    }
}

impl From<&PoseArr> for Pose2 {
    fn from(a: &PoseArr) -> Self {
        Pose2::new(a.0[0], a.0[1], a.0[2])
    }
}

#[derive(Serialize, Deserialize)]
struct CavityDoc {
    shape_id: ShapeId,
    pose: PoseArr,
    layer: usize,
}

#[derive(Serialize, Deserialize)]
struct ShapeDoc {
    pixel_size: f64,
    anchor: [f64; 2],
    grid: MaskRle,
}

#[derive(Serialize, Deserialize)]
struct KitDoc {
    format: String,
    version: u32,
    id: String,
    board_extent: [f64; 2],
    board_height: f64,
    clearance: f64,
    layers: usize,
    cavities: Vec<CavityDoc>,
    objects: Vec<ObjectSpec>,
    shapes: BTreeMap<String, ShapeDoc>,
}

pub fn save_kit(kit: &Kit, path: &Path) -> Result<(), SceneError> {
    let doc = KitDoc {
        format: KIT_FORMAT.to_string(),
        version: KIT_VERSION,
        id: kit.id.clone(),
        board_extent: [kit.spec.board_extent.0, kit.spec.board_extent.1],
        board_height: kit.spec.board_height,
        clearance: kit.spec.clearance,
        layers: kit.spec.layers,
        cavities: kit
            .spec
            .cavities
            .iter()
            .map(|c| CavityDoc {
                shape_id: c.shape_id,
                pose: (&c.pose).into(),
                layer: c.layer,
            })
            .collect(),
        objects: kit.objects.clone(),
        shapes: kit
            .shapes
            .iter()
            .map(|(id, s)| {
                (
                    id.to_string(),
                    ShapeDoc {
                        pixel_size: s.pixel_size,
                        anchor: [s.anchor.0, s.anchor.1],
                        grid: s.grid.to_rle(),
                    },
                )
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&doc).map_err(io_err)?;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| SceneError::Io(e.to_string()))?;
    }
    std::fs::write(path, text).map_err(|e| SceneError::Io(e.to_string()))?;
    Ok(())
}

pub fn load_kit(path: &Path) -> Result<Arc<Kit>, SceneError> {
    let text = std::fs::read_to_string(path).map_err(|e| SceneError::Io(e.to_string()))?;
    let doc: KitDoc = serde_json::from_str(&text).map_err(io_err)?;
    if doc.format != KIT_FORMAT {
        return Err(SceneError::Io(format!(
            "{}: expected format {KIT_FORMAT:?}, found {:?}",
            path.display(),
            doc.format
        )));
    }
    if doc.version != KIT_VERSION {
        return Err(SceneError::Io(format!(
            "{}: unsupported kit version {}",
            path.display(),
            doc.version
        )));
    }
    let mut shapes = BTreeMap::new();
    for (key, s) in &doc.shapes {
        let id: ShapeId = key
            .parse()
            .map_err(|_| SceneError::Io(format!("bad shape id {key:?}")))?;
        shapes.insert(
            id,
            ShapeMask {
                grid: Mask::from_rle(&s.grid).map_err(SceneError::Io)?,
                anchor: (s.anchor[0], s.anchor[1]),
                pixel_size: s.pixel_size,
            },
        );
    }
    let spec = KitSpec {
        board_extent: (doc.board_extent[0], doc.board_extent[1]),
        board_height: doc.board_height,
        clearance: doc.clearance,
        layers: doc.layers,
        cavities: doc
            .cavities
            .iter()
            .map(|c| Cavity {
                shape_id: c.shape_id,
                pose: (&c.pose).into(),
                layer: c.layer,
            })
            .collect(),
    };
    Ok(Arc::new(Kit::new(doc.id, spec, doc.objects, shapes)?))
}

fn io_err(e: serde_json::Error) -> SceneError {
    SceneError::Io(e.to_string())
}
