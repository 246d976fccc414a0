//! Tab-separated detection tables, one box per line.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{BBox, LabeledBox};

use super::ClassMap;

pub const DETECTIONS_HEADER: &str = "image_id\tclass\tscore\txmin\tymin\txmax\tymax";

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub image_id: String,
    pub det: LabeledBox,
}

pub fn read_detections(text: &str, classes: &ClassMap, context: &str) -> Result<Vec<Detection>> {
    let err = |line: usize, message: String| Error::Parse {
        context: context.to_string(),
        line: Some(line),
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r') == DETECTIONS_HEADER => {}
        _ => return Err(err(1, format!("expected header {DETECTIONS_HEADER:?}"))),
    }
    let mut out = Vec::new();
    for (i, raw) in lines {
        let lineno = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 7 {
            return Err(err(lineno, format!("{} columns, expected 7", cols.len())));
        }
        let class = classes
            .id(cols[1])
            .ok_or_else(|| err(lineno, format!("unknown class name {:?}", cols[1])))?;
        let mut nums = [0.0; 5];
        for (k, (slot, name)) in nums
            .iter_mut()
            .zip(["score", "xmin", "ymin", "xmax", "ymax"])
            .enumerate()
        {
            let t = cols[k + 2];
            *slot = t
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(lineno, format!("{name} {t:?} is not a number")))?;
        }
        let [score, x0, y0, x1, y1] = nums;
        let bbox = BBox::new(x0, y0, x1, y1)
            .map_err(|_| err(lineno, format!("box ({x0}, {y0}, {x1}, {y1}) is inverted or empty")))?;
        let det = LabeledBox::scored(bbox, class, score)
            .map_err(|_| err(lineno, format!("score {score} outside [0, 1]")))?;
        out.push(Detection {
            image_id: cols[0].to_string(),
            det,
        });
    }
    Ok(out)
}

pub fn write_detections(dets: &[Detection], classes: &ClassMap) -> Result<String> {
    let mut s = String::from(DETECTIONS_HEADER);
    s.push('\n');
    for d in dets {
        if d.image_id.contains(['\t', '\n']) {
            return Err(Error::InvalidInput(format!("image id {:?} contains a tab or newline", d.image_id)));
        }
        let name = classes
            .name(d.det.class)
            .ok_or_else(|| Error::InvalidInput(format!("class {} has no name", d.det.class)))?;
        let score = d
            .det
            .score()
            .ok_or_else(|| Error::InvalidInput(format!("unscored box for {}", d.image_id)))?;
        let [x0, y0, x1, y1] = d.det.bbox.corners();
        writeln!(s, "{}\t{name}\t{score}\t{x0}\t{y0}\t{x1}\t{y1}", d.image_id).unwrap();
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ClassId;

    fn det(id: &str, class: usize, score: f64, b: [f64; 4]) -> Detection {
        Detection {
            image_id: id.into(),
            det: LabeledBox::scored(BBox::new(b[0], b[1], b[2], b[3]).unwrap(), ClassId(class), score).unwrap(),
        }
    }

    #[test]
    fn round_trip() {
        let classes = ClassMap::default();
        let dets = vec![
            det("a", 0, 0.91, [1.0, 2.0, 30.5, 40.25]),
            det("b", 1, 0.7, [0.1, 0.2, 0.3, 0.4]),
        ];
        let text = write_detections(&dets, &classes).unwrap();
        assert!(text.starts_with("image_id\tclass\tscore"));
        assert!(text.contains("a\thealthy\t0.91\t1\t2\t30.5\t40.25\n"));
        assert_eq!(read_detections(&text, &classes, "t").unwrap(), dets);
    }

    #[test]
    fn errors_name_the_line() {
        let classes = ClassMap::default();
        let body = format!("{DETECTIONS_HEADER}\na\thealthy\t0.9\t0\t0\t1\t1\nb\tstressed\t1.5\t0\t0\t1\t1\n");
        let e = read_detections(&body, &classes, "t").unwrap_err();
        assert!(matches!(e, Error::Parse { line: Some(3), .. }), "{e:?}");
        let e = read_detections("image\tclass\n", &classes, "t").unwrap_err();
        assert!(matches!(e, Error::Parse { line: Some(1), .. }));
        let body = format!("{DETECTIONS_HEADER}\na\tweed\t0.9\t0\t0\t1\t1\n");
        assert!(read_detections(&body, &classes, "t").is_err());
        let body = format!("{DETECTIONS_HEADER}\na\thealthy\t0.9\t5\t0\t1\t1\n");
        assert!(read_detections(&body, &classes, "t").is_err());
    }
}
