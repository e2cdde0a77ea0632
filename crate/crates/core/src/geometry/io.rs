//! CSV files for point clouds and observation sets.
//!
//! Point clouds: `x,y,tag,nx,ny,subunit` with empty normal and subunit cells
//! for interior points. Observations: `domain,index,ps_re,ps_im`.

use std::io::{Read, Write};

use num_complex::Complex64;

use super::{
    tangent_of, BoundarySample, DomainTag, GeometryError, Observation, ObservationSet, Point2,
    PointCloudSet,
};

pub fn write_cloud_csv<W: Write>(cloud: &PointCloudSet, writer: W) -> Result<(), GeometryError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "y", "tag", "nx", "ny", "subunit"])?;
    for p in &cloud.interior {
        w.write_record([
            p.x.to_string(),
            p.y.to_string(),
            DomainTag::PressureAcoustic.to_string(),
            String::new(),
            String::new(),
            String::new(),
        ])?;
    }
    for (tag, samples) in [
        (DomainTag::PlaneWaveRadiation, &cloud.radiation),
        (DomainTag::AcousticStructureCoupling, &cloud.coupling),
    ] {
        for b in samples {
            w.write_record([
                b.point.x.to_string(),
                b.point.y.to_string(),
                tag.to_string(),
                b.normal[0].to_string(),
                b.normal[1].to_string(),
                b.subunit.map(|s| s.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn num(field: &str, what: &str, line: u64) -> Result<f64, GeometryError> {
    field
        .trim()
        .parse()
        .map_err(|_| GeometryError::Parse(format!("line {line}: bad {what} `{field}`")))
}

pub fn read_cloud_csv<R: Read>(reader: R, case_id: &str) -> Result<PointCloudSet, GeometryError> {
    let mut r = csv::Reader::from_reader(reader);
    let mut cloud = PointCloudSet {
        case_id: case_id.to_string(),
        interior: vec![],
        radiation: vec![],
        coupling: vec![],
    };
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 6 {
            return Err(GeometryError::Parse(format!("line {line}: expected 6 fields")));
        }
        let point = Point2::new(num(&rec[0], "x", line)?, num(&rec[1], "y", line)?);
        let tag: DomainTag = rec[2].trim().parse()?;
        if tag == DomainTag::PressureAcoustic {
            cloud.interior.push(point);
            continue;
        }
        let normal = [num(&rec[3], "nx", line)?, num(&rec[4], "ny", line)?];
        let subunit = match rec[5].trim() {
            "" => None,
            s => Some(s.parse().map_err(|_| {
                GeometryError::Parse(format!("line {line}: bad subunit `{s}`"))
            })?),
        };
        let sample = BoundarySample {
            point,
            normal,
            tangent: tangent_of(normal),
            subunit,
        };
        if tag == DomainTag::PlaneWaveRadiation {
            cloud.radiation.push(sample);
        } else {
            cloud.coupling.push(sample);
        }
    }
    Ok(cloud)
}

pub fn write_observations_csv<W: Write>(obs: &ObservationSet, writer: W) -> Result<(), GeometryError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["domain", "index", "ps_re", "ps_im"])?;
    for o in &obs.entries {
        w.write_record([
            o.domain.to_string(),
            o.index.to_string(),
            o.value.re.to_string(),
            o.value.im.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_observations_csv<R: Read>(reader: R) -> Result<ObservationSet, GeometryError> {
    let mut r = csv::Reader::from_reader(reader);
    let mut entries = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 4 {
            return Err(GeometryError::Parse(format!("line {line}: expected 4 fields")));
        }
        let index = rec[1]
            .trim()
            .parse()
            .map_err(|_| GeometryError::Parse(format!("line {line}: bad index `{}`", &rec[1])))?;
        entries.push(Observation {
            domain: rec[0].trim().parse()?,
            index,
            value: Complex64::new(num(&rec[2], "ps_re", line)?, num(&rec[3], "ps_im", line)?),
        });
    }
    Ok(ObservationSet { entries })
}
