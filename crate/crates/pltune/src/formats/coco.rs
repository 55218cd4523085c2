//! COCO-style ground truth and detection-result documents.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use pltune_core::{
    BBox, ClassId, Dataset, DetectionRecord, GroundTruthLabel, Image, ImageId, LabelSource,
};

use super::read_json;

/// Category id written for whole-image pseudo-background records.
pub const BACKGROUND_CATEGORY: i64 = -1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoImage {
    pub id: u64,
    pub width: u32,
    pub height: u32,
    pub file_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: i64,
    pub bbox: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ignore: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoCategory {
    pub id: i64,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoDocument {
    pub images: Vec<CocoImage>,
    pub annotations: Vec<CocoAnnotation>,
    pub categories: Vec<CocoCategory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoDetection {
    pub image_id: u64,
    pub category_id: i64,
    pub bbox: [f64; 4],
    pub score: f64,
}

pub fn class_from_category(id: i64) -> Result<ClassId> {
    if id == BACKGROUND_CATEGORY {
        return Ok(ClassId::BACKGROUND);
    }
    match u32::try_from(id) {
        Ok(c) if c != u32::MAX => Ok(ClassId(c)),
        _ => bail!("category id {id} out of range"),
    }
}

pub fn category_of(class: ClassId) -> i64 {
    if class.is_background() {
        BACKGROUND_CATEGORY
    } else {
        class.0 as i64
    }
}

fn bbox_of(b: [f64; 4]) -> Result<BBox> {
    Ok(BBox::new(b[0], b[1], b[2], b[3])?)
}

pub fn label_from(a: &CocoAnnotation) -> Result<GroundTruthLabel> {
    let mut source = match &a.source {
        None => LabelSource::Human,
        Some(s) => match LabelSource::parse(s) {
            Some(src) => src,
            None => bail!("unknown source {s:?}"),
        },
    };
    if a.ignore == Some(true) {
        if a.source.is_some() && source != LabelSource::Ignore {
            bail!("ignore is true but source is {:?}", source.as_str());
        }
        source = LabelSource::Ignore;
    }
    Ok(GroundTruthLabel {
        id: a.id,
        image_id: ImageId(a.image_id),
        class_id: class_from_category(a.category_id).context("category_id")?,
        bbox: bbox_of(a.bbox).context("bbox")?,
        source,
        score: a.score.unwrap_or(1.0),
    })
}

impl CocoDocument {
    pub fn into_dataset(self) -> Result<Dataset> {
        let images = self
            .images
            .into_iter()
            .map(|im| Image {
                id: ImageId(im.id),
                width: im.width,
                height: im.height,
                file_name: im.file_name,
            })
            .collect();
        let mut categories = BTreeMap::new();
        for (i, c) in self.categories.iter().enumerate() {
            let class = class_from_category(c.id).with_context(|| format!("categories[{i}].id"))?;
            if class.is_background() {
                continue;
            }
            if categories.insert(class, c.name.clone()).is_some() {
                bail!("categories[{i}].id: duplicate category {}", c.id);
            }
        }
        let labels = self
            .annotations
            .iter()
            .enumerate()
            .map(|(i, a)| label_from(a).with_context(|| format!("annotations[{i}] (id {})", a.id)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset::new(images, labels, categories)?)
    }

    pub fn from_dataset(ds: &Dataset) -> Self {
        let images = ds
            .images()
            .iter()
            .map(|im| CocoImage {
                id: im.id.0,
                width: im.width,
                height: im.height,
                file_name: im.file_name.clone(),
            })
            .collect();
        let annotations = ds.labels().iter().map(annotation_of).collect();
        let categories = ds
            .categories()
            .iter()
            .map(|(c, name)| CocoCategory {
                id: category_of(*c),
                name: name.clone(),
            })
            .collect();
        Self {
            images,
            annotations,
            categories,
        }
    }
}

/// Written with an explicit `source`; `ignore: true` marks ignore records and
/// non-human labels carry their score.
pub fn annotation_of(l: &GroundTruthLabel) -> CocoAnnotation {
    CocoAnnotation {
        id: l.id,
        image_id: l.image_id.0,
        category_id: category_of(l.class_id),
        bbox: l.bbox.to_xywh(),
        source: Some(l.source.as_str().to_string()),
        ignore: (l.source == LabelSource::Ignore).then_some(true),
        score: (l.source != LabelSource::Human).then_some(l.score),
    }
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let doc: CocoDocument = read_json(path)?;
    doc.into_dataset()
        .with_context(|| path.display().to_string())
}

pub fn detections_from(entries: &[CocoDetection]) -> Result<Vec<DetectionRecord>> {
    entries
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let entry = || format!("entry {i}");
            let class = class_from_category(d.category_id)
                .context("category_id")
                .with_context(entry)?;
            let bbox = bbox_of(d.bbox).context("bbox").with_context(entry)?;
            DetectionRecord::new(ImageId(d.image_id), class, bbox, d.score)
                .context("score")
                .with_context(entry)
        })
        .collect()
}

pub fn detections_to(records: &[DetectionRecord]) -> Vec<CocoDetection> {
    records
        .iter()
        .map(|d| CocoDetection {
            image_id: d.image_id.0,
            category_id: category_of(d.class_id),
            bbox: d.bbox.to_xywh(),
            score: d.score(),
        })
        .collect()
}

pub fn load_detections(path: &Path) -> Result<Vec<DetectionRecord>> {
    let entries: Vec<CocoDetection> = read_json(path)?;
    detections_from(&entries).with_context(|| path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc() -> CocoDocument {
        serde_json::from_str(
            r#"{
              "images": [{"id": 1, "width": 100, "height": 80, "file_name": "a.jpg"},
                         {"id": 2, "width": 100, "height": 80, "file_name": "b.jpg"}],
              "annotations": [
                {"id": 1, "image_id": 1, "category_id": 1, "bbox": [0, 0, 10, 10]},
                {"id": 2, "image_id": 2, "category_id": 2, "bbox": [5, 5, 10, 10], "source": "pseudo", "score": 0.7},
                {"id": 3, "image_id": 2, "category_id": 2, "bbox": [30, 5, 10, 10], "ignore": true, "score": 0.4}
              ],
              "categories": [{"id": 1, "name": "cat"}, {"id": 2, "name": "dog"}]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn parses_counts_and_sources() {
        let ds = doc().into_dataset().unwrap();
        assert_eq!(ds.images().len(), 2);
        assert_eq!(ds.labels().len(), 3);
        assert_eq!(ds.class_set().len(), 2);
        let sources: Vec<_> = ds.labels().iter().map(|l| l.source).collect();
        assert_eq!(
            sources,
            [LabelSource::Human, LabelSource::Pseudo, LabelSource::Ignore]
        );
        assert_eq!(ds.labels()[1].score, 0.7);
    }

    #[test]
    fn round_trip() {
        let ds = doc().into_dataset().unwrap();
        let back = CocoDocument::from_dataset(&ds).into_dataset().unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn empty_annotations_keep_categories() {
        let mut d = doc();
        d.annotations.clear();
        let ds = d.into_dataset().unwrap();
        assert!(ds.labels().is_empty());
        assert_eq!(ds.class_set().len(), 2);
    }

    #[test]
    fn rejects_bad_references_and_sources() {
        let mut d = doc();
        d.annotations[0].image_id = 9;
        assert!(d.into_dataset().is_err());
        let mut d = doc();
        d.annotations[0].source = Some("robot".into());
        let msg = format!("{:#}", d.into_dataset().unwrap_err());
        assert!(msg.contains("annotations[0]"), "{msg}");
        let mut d = doc();
        d.annotations[1].ignore = Some(true);
        assert!(d.into_dataset().is_err());
    }

    #[test]
    fn detections_validate_in_order() {
        let entries: Vec<CocoDetection> = serde_json::from_str(
            r#"[{"image_id": 1, "category_id": 1, "bbox": [0,0,1,1], "score": 0.5},
                {"image_id": 2, "category_id": 1, "bbox": [0,0,1,1], "score": 0.9}]"#,
        )
        .unwrap();
        let dets = detections_from(&entries).unwrap();
        assert_eq!(dets.len(), 2);
        assert_eq!(dets[1].image_id, ImageId(2));
        assert!(detections_from(&[]).unwrap().is_empty());

        let mut bad = entries.clone();
        bad[1].score = 1.3;
        let msg = format!("{:#}", detections_from(&bad).unwrap_err());
        assert!(msg.contains("entry 1") && msg.contains("score"), "{msg}");
        let mut bad = entries;
        bad[0].bbox[2] = -1.0;
        assert!(detections_from(&bad).is_err());
    }
}
