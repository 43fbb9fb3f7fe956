use std::fmt::{self, Write as _};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Serialises finite values as JSON numbers and `+inf` as the string `"inf"`.
mod score {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            Err(serde::ser::Error::custom(format!("cannot serialise score {v}")))
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got \"{t}\""))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageScore {
    pub name: String,
    #[serde(with = "score")]
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub dataset: String,
    pub scale: usize,
    pub per_image: Vec<ImageScore>,
    #[serde(with = "score")]
    pub mean_psnr: f64,
    pub mean_ssim: f64,
}

impl EvalReport {
    /// Sorts scores by name and fills in the means.
    pub fn new(dataset: impl Into<String>, scale: usize, mut per_image: Vec<ImageScore>) -> Result<Self> {
        if per_image.is_empty() {
            return Err(Error::Data("no images to report".into()));
        }
        per_image.sort_by(|a, b| a.name.cmp(&b.name));
        let n = per_image.len() as f64;
        let mean_psnr = per_image.iter().map(|s| s.psnr).sum::<f64>() / n;
        let mean_ssim = per_image.iter().map(|s| s.ssim).sum::<f64>() / n;
        Ok(EvalReport { dataset: dataset.into(), scale, per_image, mean_psnr, mean_ssim })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Data(format!("report serialisation: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Data(format!("bad report: {e}")))
    }
}

fn db(v: f64) -> String {
    if v.is_finite() { format!("{v:.4}") } else { "inf".into() }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        for s in &self.per_image {
            writeln!(out, "{}\tpsnr={}\tssim={:.6}", s.name, db(s.psnr), s.ssim)?;
        }
        write!(
            out,
            "{} x{}: {} images, mean psnr={} dB, mean ssim={:.6}",
            self.dataset,
            self.scale,
            self.per_image.len(),
            db(self.mean_psnr),
            self.mean_ssim
        )?;
        f.write_str(&out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn score(name: &str, psnr: f64, ssim: f64) -> ImageScore {
        ImageScore { name: name.into(), psnr, ssim }
    }

    #[test]
    fn means_and_order() {
        let r = EvalReport::new("set", 2, vec![score("b", 30.0, 0.9), score("a", 20.0, 0.5)]).unwrap();
        assert_eq!(r.per_image[0].name, "a");
        assert_eq!(r.mean_psnr, 25.0);
        assert_eq!(r.mean_ssim, 0.7);
        assert!(EvalReport::new("set", 2, vec![]).is_err());
    }

    #[test]
    fn json_round_trip_with_inf() {
        let r = EvalReport::new("set", 1, vec![score("a", f64::INFINITY, 1.0), score("b", 31.5, 0.8)]).unwrap();
        let text = r.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["per_image"][0]["psnr"], "inf");
        assert_eq!(v["mean_psnr"], "inf");
        assert_eq!(v["per_image"][1]["psnr"], 31.5);
        assert_eq!(EvalReport::from_json(&text).unwrap(), r);
        assert!(EvalReport::from_json(&text.replace("\"inf\"", "\"nan\"")).is_err());
        assert!(r.to_string().contains("mean psnr=inf"));
    }
}
