use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phantom::roi_name;
use crate::scalar::Real;
use crate::volume::{same_dims, Mask, Volume3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoiStat {
    pub label: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub voxels: usize,
    /// Mean over orientations of the per-map ROI mean.
    pub mean_ppm: f64,
    /// Sample standard deviation (N − 1) across orientations; 0 for one map.
    pub std_ppm: f64,
    pub per_map_ppm: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoiStats {
    pub rois: Vec<RoiStat>,
}

impl RoiStats {
    pub fn get(&self, label: u32) -> Option<&RoiStat> {
        self.rois.iter().find(|r| r.label == label)
    }
}

/// Per-ROI mean in each map, then mean and spread across maps.
///
/// `rois` selects labels; `None` uses every nonzero label present in the
/// mask. Label values are rounded to the nearest integer.
pub fn roi_stats<T: Real>(maps: &[Volume3<T>], labels: &Volume3<T>, mask: &Mask, rois: Option<&[u32]>) -> Result<RoiStats> {
    if maps.is_empty() {
        return Err(Error::param("maps", "at least one map is required"));
    }
    same_dims(labels.dims(), mask.dims())?;
    for m in maps {
        same_dims(labels.dims(), m.dims())?;
    }
    let label_of = |i: usize| -> Option<u32> {
        let v = labels.data()[i].as_f64().round();
        (v > 0.0).then_some(v as u32)
    };
    let wanted: Vec<u32> = match rois {
        Some(r) => r.to_vec(),
        None => mask.indices().filter_map(label_of).collect::<BTreeSet<_>>().into_iter().collect(),
    };
    let mut out = Vec::with_capacity(wanted.len());
    for label in wanted {
        let idx: Vec<usize> = mask.indices().filter(|&i| label_of(i) == Some(label)).collect();
        if idx.is_empty() {
            return Err(Error::EmptyRoi(label));
        }
        let per_map: Vec<f64> = maps
            .iter()
            .map(|m| idx.iter().map(|&i| m.data()[i].as_f64()).sum::<f64>() / idx.len() as f64)
            .collect();
        let n = per_map.len() as f64;
        let mean = per_map.iter().sum::<f64>() / n;
        // deviations from the first map, so identical maps give exactly 0
        let d: Vec<f64> = per_map.iter().map(|v| v - per_map[0]).collect();
        let std = if per_map.len() < 2 {
            0.0
        } else {
            let dm = d.iter().sum::<f64>() / n;
            (d.iter().map(|v| (v - dm).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        out.push(RoiStat {
            label,
            name: roi_name(label).map(str::to_owned),
            voxels: idx.len(),
            mean_ppm: mean,
            std_ppm: std,
            per_map_ppm: per_map,
        });
    }
    Ok(RoiStats { rois: out })
}
