use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

use super::ImageBuffer;

/// Spectral bands of a four-sensor multispectral camera.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Green,
    Red,
    RedEdge,
    NearInfrared,
}

impl Band {
    pub fn label(self) -> &'static str {
        match self {
            Band::Green => "G",
            Band::Red => "R",
            Band::RedEdge => "RE",
            Band::NearInfrared => "NIR",
        }
    }
}

impl FromStr for Band {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "G" => Ok(Band::Green),
            "R" => Ok(Band::Red),
            "RE" => Ok(Band::RedEdge),
            "NIR" => Ok(Band::NearInfrared),
            other => Err(Error::Config(format!("unknown band {other:?}"))),
        }
    }
}

/// Three distinct bands, in output channel order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BandSelection([Band; 3]);

impl BandSelection {
    pub fn new(bands: [Band; 3]) -> Result<Self> {
        let [a, b, c] = bands;
        if a == b || a == c || b == c {
            return Err(Error::Config(format!(
                "band selection {}-{}-{} repeats a band",
                a.label(),
                b.label(),
                c.label()
            )));
        }
        Ok(Self(bands))
    }

    pub fn bands(&self) -> [Band; 3] {
        self.0
    }
}

impl FromStr for BandSelection {
    type Err = Error;

    /// Parses labels such as `R-G-NIR`.
    fn from_str(s: &str) -> Result<Self> {
        let parts = s
            .split('-')
            .map(str::parse)
            .collect::<Result<Vec<Band>>>()?;
        let bands: [Band; 3] = parts
            .try_into()
            .map_err(|_| Error::Config(format!("band selection {s:?} needs exactly three bands")))?;
        Self::new(bands)
    }
}

impl fmt::Display for BandSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.0;
        write!(f, "{}-{}-{}", a.label(), b.label(), c.label())
    }
}

/// Stacks three single-channel band images into one 3-channel image.
pub fn compose_bands(
    green: &ImageBuffer,
    red: &ImageBuffer,
    red_edge: &ImageBuffer,
    nir: &ImageBuffer,
    sel: BandSelection,
) -> Result<ImageBuffer> {
    let all = [green, red, red_edge, nir];
    let (w, h) = (green.width(), green.height());
    for (img, band) in all.iter().zip([Band::Green, Band::Red, Band::RedEdge, Band::NearInfrared]) {
        if img.channels() != 1 {
            return Err(Error::shape(
                "compose_bands",
                format!("{} band has {} channels", band.label(), img.channels()),
            ));
        }
        if (img.width(), img.height()) != (w, h) {
            return Err(Error::shape(
                "compose_bands",
                format!(
                    "{} band is {}x{}, green is {w}x{h}",
                    band.label(),
                    img.width(),
                    img.height()
                ),
            ));
        }
    }
    let pick = |b: Band| match b {
        Band::Green => green,
        Band::Red => red,
        Band::RedEdge => red_edge,
        Band::NearInfrared => nir,
    };
    let sources = sel.bands().map(pick);
    let mut data = Vec::with_capacity(w * h * 3);
    for i in 0..w * h {
        for src in &sources {
            data.push(src.data()[i]);
        }
    }
    ImageBuffer::new(w, h, 3, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band(v: f64) -> ImageBuffer {
        ImageBuffer::new(3, 2, 1, (0..6).map(|i| (v + i as f64) / 10.0).collect()).unwrap()
    }

    #[test]
    fn r_g_nir_order() {
        let (g, r, re, nir) = (band(0.0), band(1.0), band(2.0), band(3.0));
        let sel: BandSelection = "R-G-NIR".parse().unwrap();
        assert_eq!(sel.to_string(), "R-G-NIR");
        let out = compose_bands(&g, &r, &re, &nir, sel).unwrap();
        assert_eq!(out.channel(0).unwrap(), r);
        assert_eq!(out.channel(1).unwrap(), g);
        assert_eq!(out.channel(2).unwrap(), nir);
    }

    #[test]
    fn every_selection_recovers_inputs() {
        let (g, r, re, nir) = (band(0.0), band(1.0), band(2.0), band(3.0));
        for label in ["R-NIR-RE", "R-G-RE", "NIR-RE-G"] {
            let sel: BandSelection = label.parse().unwrap();
            let out = compose_bands(&g, &r, &re, &nir, sel).unwrap();
            for (i, b) in sel.bands().iter().enumerate() {
                let expected = match b {
                    Band::Green => &g,
                    Band::Red => &r,
                    Band::RedEdge => &re,
                    Band::NearInfrared => &nir,
                };
                assert_eq!(&out.channel(i).unwrap(), expected);
            }
        }
    }

    #[test]
    fn rejects_bad_selections_and_sizes() {
        assert!(matches!("R-R-NIR".parse::<BandSelection>(), Err(Error::Config(_))));
        assert!("R-G".parse::<BandSelection>().is_err());
        assert!("R-G-UV".parse::<BandSelection>().is_err());
        let small = ImageBuffer::new(1, 1, 1, vec![0.0]).unwrap();
        let sel: BandSelection = "R-G-RE".parse().unwrap();
        assert!(matches!(
            compose_bands(&band(0.0), &small, &band(0.0), &band(0.0), sel),
            Err(Error::Shape { .. })
        ));
    }
}
