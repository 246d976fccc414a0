use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{BBox, Extent, LabeledBox};

use super::ClassMap;

/// A parsed LabelImg / Pascal VOC annotation file.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub filename: String,
    pub width: u32,
    pub height: u32,
    pub depth: u32,
    pub objects: Vec<LabeledBox>,
}

impl Annotation {
    pub fn extent(&self) -> Extent {
        Extent::new(f64::from(self.width), f64::from(self.height))
    }
}

/// Parses a VOC document:
///
/// ```xml
/// <annotation>
///   <filename>a.ppm</filename>
///   <size><width>W</width><height>H</height><depth>3</depth></size>
///   <object>
///     <name>stressed</name>
///     <bndbox><xmin>..</xmin><ymin>..</ymin><xmax>..</xmax><ymax>..</ymax></bndbox>
///   </object>
/// </annotation>
/// ```
///
/// Unknown elements are ignored. `context` names the source in errors.
pub fn parse_annotation(xml: &str, classes: &ClassMap, context: &str) -> Result<Annotation> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| Error::Parse {
        context: context.to_string(),
        line: Some(e.pos().row as usize),
        message: e.to_string(),
    })?;
    let r = Reader { doc: &doc, context };

    let root = doc.root_element();
    if root.tag_name().name() != "annotation" {
        return Err(r.err(
            root,
            format!("root element is <{}>, expected <annotation>", root.tag_name().name()),
        ));
    }
    let filename = r.child(root, "filename")?.text().unwrap_or("").trim().to_string();
    let size = r.child(root, "size")?;
    let width = r.dimension(size, "width")?;
    let height = r.dimension(size, "height")?;
    let depth = r.dimension(size, "depth")?;
    if width == 0 || height == 0 {
        return Err(r.err(size, format!("image size {width}x{height} is empty")));
    }
    let extent = Extent::new(f64::from(width), f64::from(height));

    let mut objects = Vec::new();
    for obj in root
        .children()
        .filter(|n| n.is_element() && n.tag_name().name() == "object")
    {
        let name_node = r.child(obj, "name")?;
        let name = name_node.text().unwrap_or("").trim();
        let class = classes
            .id(name)
            .ok_or_else(|| r.err(name_node, format!("unknown class name {name:?}")))?;
        let bnd = r.child(obj, "bndbox")?;
        let (x0, y0, x1, y1) = (
            r.number(bnd, "xmin")?,
            r.number(bnd, "ymin")?,
            r.number(bnd, "xmax")?,
            r.number(bnd, "ymax")?,
        );
        let bbox = BBox::new(x0, y0, x1, y1).map_err(|_| {
            r.err(
                bnd,
                format!("<bndbox> ({x0}, {y0}, {x1}, {y1}) is inverted or empty"),
            )
        })?;
        if !bbox.is_within(extent) {
            return Err(r.err(
                bnd,
                format!("<bndbox> {bbox} exceeds the {width}x{height} image"),
            ));
        }
        objects.push(LabeledBox::new(bbox, class));
    }
    Ok(Annotation {
        filename,
        width,
        height,
        depth,
        objects,
    })
}

struct Reader<'d, 'i> {
    doc: &'d roxmltree::Document<'i>,
    context: &'d str,
}

impl<'d, 'i> Reader<'d, 'i> {
    fn err(&self, node: roxmltree::Node, message: String) -> Error {
        Error::Parse {
            context: self.context.to_string(),
            line: Some(self.doc.text_pos_at(node.range().start).row as usize),
            message,
        }
    }

    fn child<'a>(&self, parent: roxmltree::Node<'a, 'i>, name: &str) -> Result<roxmltree::Node<'a, 'i>> {
        parent
            .children()
            .find(|n| n.is_element() && n.tag_name().name() == name)
            .ok_or_else(|| self.err(parent, format!("<{}> lacks <{name}>", parent.tag_name().name())))
    }

    fn number(&self, parent: roxmltree::Node<'_, 'i>, name: &str) -> Result<f64> {
        let n = self.child(parent, name)?;
        let t = n.text().unwrap_or("").trim();
        t.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.err(n, format!("<{name}> value {t:?} is not a number")))
    }

    fn dimension(&self, parent: roxmltree::Node<'_, 'i>, name: &str) -> Result<u32> {
        let n = self.child(parent, name)?;
        let t = n.text().unwrap_or("").trim();
        t.parse::<u32>()
            .map_err(|_| self.err(n, format!("<{name}> value {t:?} is not a non-negative integer")))
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Serializes in the layout LabelImg writes. Coordinates use the shortest
/// decimal form that parses back to the same value.
pub fn write_annotation(a: &Annotation, classes: &ClassMap) -> Result<String> {
    let mut s = String::new();
    s.push_str("<annotation>\n");
    writeln!(s, "\t<filename>{}</filename>", escape(&a.filename)).unwrap();
    s.push_str("\t<size>\n");
    writeln!(s, "\t\t<width>{}</width>", a.width).unwrap();
    writeln!(s, "\t\t<height>{}</height>", a.height).unwrap();
    writeln!(s, "\t\t<depth>{}</depth>", a.depth).unwrap();
    s.push_str("\t</size>\n");
    s.push_str("\t<segmented>0</segmented>\n");
    for obj in &a.objects {
        let name = classes
            .name(obj.class)
            .ok_or_else(|| Error::InvalidInput(format!("class {} has no name", obj.class)))?;
        let [x0, y0, x1, y1] = obj.bbox.corners();
        s.push_str("\t<object>\n");
        writeln!(s, "\t\t<name>{}</name>", escape(name)).unwrap();
        s.push_str("\t\t<pose>Unspecified</pose>\n\t\t<truncated>0</truncated>\n\t\t<difficult>0</difficult>\n");
        s.push_str("\t\t<bndbox>\n");
        writeln!(s, "\t\t\t<xmin>{x0}</xmin>\n\t\t\t<ymin>{y0}</ymin>\n\t\t\t<xmax>{x1}</xmax>\n\t\t\t<ymax>{y1}</ymax>").unwrap();
        s.push_str("\t\t</bndbox>\n\t</object>\n");
    }
    s.push_str("</annotation>\n");
    Ok(s)
}
