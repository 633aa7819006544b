//! Plane-annotation JSON: an array of records, one per annotated plane:
//! `{ "normal": [x,y,z], "offset": o, "points": [[x,y,z], ...] }`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::{Plane, Vec3};
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
struct PlaneRecord {
    normal: [f64; 3],
    offset: f64,
    points: Vec<[f64; 3]>,
}

pub fn write_plane_annotations(planes: &[(Plane, Vec<Vec3>)], path: &Path) -> Result<()> {
    let records: Vec<PlaneRecord> = planes
        .iter()
        .map(|(plane, points)| PlaneRecord {
            normal: plane.normal.to_array(),
            offset: plane.offset,
            points: points.iter().map(|p| p.to_array()).collect(),
        })
        .collect();
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(file, &records)?;
    Ok(())
}

pub fn read_plane_annotations(path: &Path) -> Result<Vec<(Plane, Vec<Vec3>)>> {
    let text = std::fs::read_to_string(path)?;
    let records: Vec<PlaneRecord> = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        expected: "plane-annotation JSON",
        detail: e.to_string(),
    })?;
    records
        .into_iter()
        .map(|r| {
            let plane = Plane::new(Vec3::from_array(r.normal), r.offset)?;
            let points = r.points.into_iter().map(Vec3::from_array).collect();
            Ok((plane, points))
        })
        .collect()
}
