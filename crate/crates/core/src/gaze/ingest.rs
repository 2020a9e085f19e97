use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Fixation, ImageRecord, ScanPath, Split};
use crate::numeric::to_micros;
use crate::{Error, Result};

/// Header names for each required field of the fixation table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    pub image_id: String,
    pub reader_id: String,
    pub x: String,
    pub y: String,
    pub start_time: String,
    pub end_time: String,
    /// Optional; rows fall back to [`IngestConfig::default_split`] when the
    /// header lacks it.
    pub split: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            image_id: "image_id".into(),
            reader_id: "reader_id".into(),
            x: "x".into(),
            y: "y".into(),
            start_time: "start_time".into(),
            end_time: "end_time".into(),
            split: "split".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub columns: ColumnMap,
    /// Coordinates are fractions of width/height rather than pixels.
    pub normalized_coords: bool,
    pub default_split: Split,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            columns: ColumnMap::default(),
            normalized_coords: false,
            default_split: Split::Alpha,
        }
    }
}

/// A skipped row and why.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowIssue {
    pub line: u64,
    pub reason: String,
}

/// Per-category row counts. `kept + skipped_* == rows`; `clamped` counts
/// kept rows whose coordinates were moved into the image.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows: u64,
    pub kept: u64,
    pub clamped: u64,
    pub skipped_duration: u64,
    pub skipped_parse: u64,
    pub skipped_unknown_image: u64,
    #[serde(skip)]
    pub issues: Vec<RowIssue>,
}

impl IngestReport {
    pub fn skipped(&self) -> u64 {
        self.skipped_duration + self.skipped_parse + self.skipped_unknown_image
    }
}

struct Row {
    split: Split,
    start: f64,
    end: f64,
    duration_us: i64,
    x: f64,
    y: f64,
}

fn cmp_rows(a: &Row, b: &Row) -> Ordering {
    a.start
        .total_cmp(&b.start)
        .then(a.end.total_cmp(&b.end))
        .then(a.x.total_cmp(&b.x))
        .then(a.y.total_cmp(&b.y))
}

struct Columns {
    image_id: usize,
    reader_id: usize,
    x: usize,
    y: usize,
    start: usize,
    end: usize,
    split: Option<usize>,
}

impl Columns {
    fn resolve(headers: &csv::StringRecord, map: &ColumnMap) -> Result<Self> {
        let find = |name: &str| headers.iter().position(|h| h.trim() == name);
        let need = |name: &str| find(name).ok_or_else(|| Error::MissingColumn(name.to_string()));
        Ok(Self {
            image_id: need(&map.image_id)?,
            reader_id: need(&map.reader_id)?,
            x: need(&map.x)?,
            y: need(&map.y)?,
            start: need(&map.start_time)?,
            end: need(&map.end_time)?,
            split: find(&map.split),
        })
    }
}

fn field<'r>(rec: &'r csv::StringRecord, idx: usize, name: &str) -> std::result::Result<&'r str, String> {
    rec.get(idx)
        .map(str::trim)
        .ok_or_else(|| format!("missing value for `{name}`"))
}

fn number(rec: &csv::StringRecord, idx: usize, name: &str) -> std::result::Result<f64, String> {
    let raw = field(rec, idx, name)?;
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("non-numeric `{name}`: {raw:?}")),
    }
}

/// Reads a fixation table and groups it into one scanpath per
/// (image_id, reader_id), ordered by key. Fixations within a scanpath are
/// ordered by start time; durations are resolved to whole microseconds.
pub fn ingest_fixation_csv<R: Read>(
    source: R,
    images: &BTreeMap<String, ImageRecord>,
    config: &IngestConfig,
) -> Result<(Vec<ScanPath>, IngestReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    // a file with no header line at all holds no fixations
    if headers.is_empty() && reader.is_done() {
        return Ok((Vec::new(), IngestReport::default()));
    }
    let cols = Columns::resolve(&headers, &config.columns)?;
    let map = &config.columns;

    let mut report = IngestReport::default();
    let mut groups: BTreeMap<(String, String), Vec<Row>> = BTreeMap::new();

    for result in reader.records() {
        report.rows += 1;
        let rec = match result {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                report.skipped_parse += 1;
                report.issues.push(RowIssue { line, reason: e.to_string() });
                continue;
            }
        };
        let line = rec.position().map_or(0, |p| p.line());

        let parsed = (|| -> std::result::Result<_, String> {
            let image_id = field(&rec, cols.image_id, &map.image_id)?.to_string();
            let reader_id = field(&rec, cols.reader_id, &map.reader_id)?.to_string();
            let x = number(&rec, cols.x, &map.x)?;
            let y = number(&rec, cols.y, &map.y)?;
            let start = number(&rec, cols.start, &map.start_time)?;
            let end = number(&rec, cols.end, &map.end_time)?;
            let split = match cols.split {
                Some(idx) => {
                    let raw = field(&rec, idx, &map.split)?;
                    if raw.is_empty() {
                        config.default_split
                    } else {
                        raw.parse::<Split>().map_err(|e| e.to_string())?
                    }
                }
                None => config.default_split,
            };
            Ok((image_id, reader_id, x, y, start, end, split))
        })();

        let (image_id, reader_id, x, y, start, end, split) = match parsed {
            Ok(v) => v,
            Err(reason) => {
                report.skipped_parse += 1;
                report.issues.push(RowIssue { line, reason });
                continue;
            }
        };

        let duration_us = to_micros(end - start);
        if duration_us <= 0 {
            report.skipped_duration += 1;
            report.issues.push(RowIssue {
                line,
                reason: format!("non-positive duration {start}..{end}"),
            });
            continue;
        }

        let Some(image) = images.get(&image_id) else {
            report.skipped_unknown_image += 1;
            report.issues.push(RowIssue { line, reason: format!("unknown image_id `{image_id}`") });
            continue;
        };

        let (px, py) = if config.normalized_coords {
            image.to_pixel(x, y)
        } else {
            (x, y)
        };
        let (cx, cy, moved) = image.clamp(px, py);
        if moved {
            report.clamped += 1;
        }
        report.kept += 1;
        groups.entry((image_id, reader_id)).or_default().push(Row {
            split,
            start,
            end,
            duration_us,
            x: cx,
            y: cy,
        });
    }

    let mut paths = Vec::with_capacity(groups.len());
    for ((image_id, reader_id), mut rows) in groups {
        rows.sort_by(cmp_rows);
        // first row (in time) decides a scanpath's split
        let split = rows[0].split;
        let fixations = rows
            .iter()
            .map(|r| Fixation {
                x: r.x,
                y: r.y,
                duration: r.duration_us as f64 / 1e6,
                seq: 0,
            })
            .collect();
        paths.push(ScanPath::new(image_id, reader_id, split, fixations)?);
    }
    Ok((paths, report))
}

/// Writes scanpaths as a fixation table in the default column layout, with
/// back-to-back fixation intervals starting at t = 0.
pub fn write_fixation_csv<W: Write>(scanpaths: &[ScanPath], sink: W) -> Result<()> {
    let defaults = ColumnMap::default();
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        &defaults.image_id,
        &defaults.reader_id,
        &defaults.split,
        &defaults.x,
        &defaults.y,
        &defaults.start_time,
        &defaults.end_time,
    ])?;
    for sp in scanpaths {
        let split = sp.split.to_string();
        let mut t_us: i64 = 0;
        for f in sp.fixations() {
            let start = t_us;
            t_us += to_micros(f.duration);
            w.write_record([
                sp.image_id.as_str(),
                sp.reader_id.as_str(),
                split.as_str(),
                &f.x.to_string(),
                &f.y.to_string(),
                &(start as f64 / 1e6).to_string(),
                &(t_us as f64 / 1e6).to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<fixation csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn images(width: u32) -> BTreeMap<String, ImageRecord> {
        let img = ImageRecord {
            image_id: "img".into(),
            path: PathBuf::from("img.png"),
            width,
            height: 100,
        };
        BTreeMap::from([("img".to_string(), img)])
    }

    fn ingest(csv: &str) -> Result<(Vec<ScanPath>, IngestReport)> {
        ingest_fixation_csv(csv.as_bytes(), &images(100), &IngestConfig::default())
    }

    #[test]
    fn empty_input_is_an_empty_dataset() {
        let (paths, report) = ingest("").unwrap();
        assert!(paths.is_empty());
        assert_eq!(report, IngestReport::default());
        let (paths, _) = ingest("image_id,reader_id,x,y,start_time,end_time\n").unwrap();
        assert!(paths.is_empty());
        assert!(matches!(ingest("image_id,x\n"), Err(Error::MissingColumn(c)) if c == "reader_id"));
    }

    #[test]
    fn three_rows_give_subtracted_durations() {
        let csv = "image_id,reader_id,x,y,start_time,end_time\n\
                   img,r1,10,10,0.0,0.5\n\
                   img,r1,20,20,0.5,1.2\n\
                   img,r1,30,30,1.2,1.5\n";
        let (paths, report) = ingest(csv).unwrap();
        assert_eq!(paths.len(), 1);
        let d: Vec<f64> = paths[0].fixations().iter().map(|f| f.duration).collect();
        assert_eq!(d, vec![0.5, 0.7, 0.3]);
        assert_eq!(report.kept, 3);
        assert_eq!(report.rows, 3);
    }

    #[test]
    fn header_only_is_empty() {
        let (paths, report) = ingest("image_id,reader_id,x,y,start_time,end_time\n").unwrap();
        assert!(paths.is_empty());
        assert_eq!(report.rows, 0);
    }

    #[test]
    fn negative_x_is_clamped_and_counted() {
        let csv = "image_id,reader_id,x,y,start_time,end_time\nimg,r,-4,5,0,1\n";
        let (paths, report) = ingest(csv).unwrap();
        assert_eq!(paths[0].fixations()[0].x, 0.0);
        assert_eq!(report.clamped, 1);
        assert_eq!(report.kept, 1);
    }

    #[test]
    fn missing_column_is_named() {
        let err = ingest("image_id,reader_id,x,start_time,end_time\n").unwrap_err();
        match err {
            Error::MissingColumn(c) => assert_eq!(c, "y"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_rows_are_skipped_and_counted() {
        let csv = "image_id,reader_id,x,y,start_time,end_time\n\
                   img,r,abc,5,0,1\n\
                   img,r,1,5,1,1\n\
                   img,r,1,5,2,1.5\n\
                   other,r,1,5,0,1\n\
                   img,r,1,5\n\
                   img,r,1,5,3,4\n";
        let (paths, report) = ingest(csv).unwrap();
        assert_eq!(report.rows, 6);
        assert_eq!(report.skipped_parse, 2);
        assert_eq!(report.skipped_duration, 2);
        assert_eq!(report.skipped_unknown_image, 1);
        assert_eq!(report.kept, 1);
        assert_eq!(report.kept + report.skipped(), report.rows);
        assert_eq!(paths[0].len(), 1);
        assert_eq!(report.issues[0].line, 2);
        assert!(report.issues[0].reason.contains("non-numeric"));
    }

    #[test]
    fn rows_are_sorted_by_start_time() {
        let csv = "image_id,reader_id,x,y,start_time,end_time\n\
                   img,r,3,3,2,3\n\
                   img,r,1,1,0,1\n\
                   img,r,2,2,1,2\n";
        let (paths, _) = ingest(csv).unwrap();
        let xs: Vec<f64> = paths[0].fixations().iter().map(|f| f.x).collect();
        assert_eq!(xs, vec![1.0, 2.0, 3.0]);
        let seqs: Vec<u32> = paths[0].fixations().iter().map(|f| f.seq).collect();
        assert_eq!(seqs, vec![1, 2, 3]);
    }

    #[test]
    fn normalized_coordinates_and_custom_columns() {
        let csv = "img_key,reader,fx,fy,t0,t1,set\nimg,r,0.5,0.25,0,1,beta\n";
        let config = IngestConfig {
            columns: ColumnMap {
                image_id: "img_key".into(),
                reader_id: "reader".into(),
                x: "fx".into(),
                y: "fy".into(),
                start_time: "t0".into(),
                end_time: "t1".into(),
                split: "set".into(),
            },
            normalized_coords: true,
            default_split: Split::Alpha,
        };
        let (paths, _) = ingest_fixation_csv(csv.as_bytes(), &images(200), &config).unwrap();
        let f = paths[0].fixations()[0];
        assert_eq!((f.x, f.y), (100.0, 25.0));
        assert_eq!(paths[0].split, Split::Beta);
    }
}
