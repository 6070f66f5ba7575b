//! JSON (exact) and CSV (decimal) forms of a cap family.

use serde::{Deserialize, Serialize};

use super::{AxisInterval, AxisTag, CapFamily, CapsError, DyadicRational, FamilyId, FamilyKind, Scale};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyJson {
    #[serde(rename = "R")]
    pub r: u64,
    pub m: u32,
    pub d: usize,
    pub kind: String,
    pub caps: Vec<CapJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapJson {
    pub axes: Vec<AxisJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisJson {
    pub lo_num: i64,
    pub lo_exp: u32,
    pub hi_num: i64,
    pub hi_exp: u32,
    pub tag: AxisTag,
}

impl From<&AxisInterval> for AxisJson {
    fn from(a: &AxisInterval) -> Self {
        AxisJson {
            lo_num: a.lo.numerator() as i64,
            lo_exp: a.lo.exponent(),
            hi_num: a.hi.numerator() as i64,
            hi_exp: a.hi.exponent(),
            tag: a.tag,
        }
    }
}

impl AxisJson {
    fn to_interval(&self) -> Result<AxisInterval, CapsError> {
        if self.lo_exp > 96 || self.hi_exp > 96 {
            return Err(CapsError::Malformed("dyadic exponent too large".into()));
        }
        let lo = DyadicRational::new(self.lo_num as i128, self.lo_exp);
        let hi = DyadicRational::new(self.hi_num as i128, self.hi_exp);
        if lo >= hi || lo < DyadicRational::ZERO || hi > DyadicRational::ONE {
            return Err(CapsError::Malformed(format!("bad interval [{lo}, {hi}]")));
        }
        Ok(AxisInterval { lo, hi, tag: self.tag })
    }
}

pub fn family_to_json(fam: &CapFamily) -> FamilyJson {
    FamilyJson {
        r: fam.scale().value(),
        m: fam.m(),
        d: fam.dim(),
        kind: fam.kind().label(),
        caps: fam
            .caps()
            .iter()
            .map(|c| CapJson {
                axes: c.axes.iter().map(AxisJson::from).collect(),
            })
            .collect(),
    }
}

/// Rebuild a family, checking that the caps are the row-major product of
/// their per-axis interval lists.
pub fn family_from_json(json: &FamilyJson) -> Result<CapFamily, CapsError> {
    let scale = Scale::new(json.r)?;
    let kind = FamilyKind::parse(&json.kind)?;
    let id = FamilyId {
        scale,
        m: json.m,
        d: json.d,
        kind,
    };
    let caps = json
        .caps
        .iter()
        .map(|c| {
            if c.axes.len() != json.d {
                return Err(CapsError::DimensionMismatch {
                    expected: json.d,
                    got: c.axes.len(),
                });
            }
            c.axes.iter().map(AxisJson::to_interval).collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut axes: Vec<Vec<AxisInterval>> = vec![Vec::new(); json.d];
    for cap in &caps {
        for (j, iv) in cap.iter().enumerate() {
            if !axes[j].contains(iv) {
                axes[j].push(*iv);
            }
        }
    }
    for ax in &mut axes {
        ax.sort_by(|a, b| a.lo.cmp(&b.lo));
    }
    let fam = CapFamily::from_axes(id, axes);
    let matches = fam.caps().len() == caps.len()
        && fam.caps().iter().zip(&caps).all(|(a, b)| &a.axes == b);
    if !matches {
        return Err(CapsError::Malformed(
            "caps are not the row-major product of their axis intervals".into(),
        ));
    }
    Ok(fam)
}

fn tag_label(tag: &AxisTag) -> String {
    match tag {
        AxisTag::Flat => "flat".into(),
        AxisTag::Dyadic { k, mu } => format!("dyadic({k};{mu})"),
        AxisTag::Uniform { a } => format!("uniform({a})"),
        AxisTag::Scaled { lambda, j } => format!("scaled({lambda};{j})"),
    }
}

/// One cap per row: `cap, lo_1, hi_1, tag_1, …`.
pub fn family_to_csv<W: std::io::Write>(fam: &CapFamily, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["cap".to_string()];
    for j in 1..=fam.dim() {
        header.push(format!("lo_{j}"));
        header.push(format!("hi_{j}"));
        header.push(format!("tag_{j}"));
    }
    w.write_record(&header)?;
    for (i, c) in fam.caps().iter().enumerate() {
        let mut row = vec![i.to_string()];
        for a in &c.axes {
            row.push(format!("{}", a.lo.to_f64()));
            row.push(format!("{}", a.hi.to_f64()));
            row.push(tag_label(&a.tag));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::{cap_family, omega_regions, tau_decompose};
    use super::*;

    #[test]
    fn json_round_trip() {
        let mut fams = vec![
            cap_family(256, 2, 3, FamilyKind::F4).unwrap(),
            cap_family(256, 2, 3, FamilyKind::mixed(&[1])).unwrap(),
            cap_family(256, 2, 2, FamilyKind::F4Tilde).unwrap(),
            cap_family(64, 3, 1, FamilyKind::F4).unwrap(),
        ];
        fams.push(tau_decompose(&omega_regions(256).unwrap()[5]).unwrap());
        for fam in fams {
            let text = serde_json::to_string(&family_to_json(&fam)).unwrap();
            let back: FamilyJson = serde_json::from_str(&text).unwrap();
            assert_eq!(family_from_json(&back).unwrap(), fam);
        }
    }

    #[test]
    fn json_rejects_shuffled_caps() {
        let fam = cap_family(16, 2, 2, FamilyKind::F4).unwrap();
        let mut json = family_to_json(&fam);
        json.caps.swap(0, 1);
        assert!(family_from_json(&json).is_err());
        json.caps.swap(0, 1);
        json.caps.pop();
        assert!(family_from_json(&json).is_err());
    }

    #[test]
    fn csv_has_one_row_per_cap() {
        let fam = cap_family(256, 2, 3, FamilyKind::F4).unwrap();
        let mut buf = Vec::new();
        family_to_csv(&fam, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 217);
        assert!(text.lines().nth(1).unwrap().starts_with("0,0,0.25,flat"));
    }
}
