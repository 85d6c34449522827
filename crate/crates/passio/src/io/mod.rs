//! Trial recordings on disk: a small binary container per trial, a text
//! manifest per dataset directory, and an importer for externally converted
//! datasets.
//!
//! A recording file is, in order and little-endian: magic `EEGR`, format
//! version u16, subject u32, trial u32, sample rate f64, channel count u16
//! with u16-length-prefixed UTF-8 names, sample count u64, a label flag byte
//! (1 = three f64 ratings follow), then the sample block as f32, one channel
//! row at a time. Samples are stored in microvolts.

pub mod synth;

use std::collections::BTreeSet;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use byteorder::{ReadBytesExt as _, WriteBytesExt as _, LE};
use ndarray::Array2;

use crate::dsp::EegSegment;
use crate::emotion::VadRating;
use crate::error::{Error, Result};
use crate::montage::ChannelId;

const MAGIC: &[u8; 4] = b"EEGR";
const FORMAT_VERSION: u16 = 1;

/// Dataset manifests start with this marker line.
pub const MANIFEST_MAGIC: &str = "# passio-dataset v1";
pub const MANIFEST_NAME: &str = "manifest.tsv";

// ---------------------------------------------------------------------------
// recording
// ---------------------------------------------------------------------------

/// One trial of one subject: a validated signal segment plus identity and an
/// optional self-assessment label.
#[derive(Clone, Debug)]
pub struct Recording {
    pub subject: u32,
    pub trial: u32,
    pub label: Option<VadRating>,
    pub segment: EegSegment,
}

impl Recording {
    pub fn new(
        subject: u32,
        trial: u32,
        label: Option<VadRating>,
        segment: EegSegment,
    ) -> Recording {
        Recording { subject, trial, label, segment }
    }

    /// Conventional on-disk name for this trial.
    pub fn file_name(&self) -> String {
        format!("s{:02}_t{:02}.eegr", self.subject, self.trial)
    }

    /// Copy with the first `seconds` of signal removed (baseline trimming).
    pub fn drop_first_s(&self, seconds: f64) -> Result<Recording> {
        if seconds < 0.0 {
            return Err(Error::domain("cannot trim a negative duration"));
        }
        let skip = (seconds * self.segment.fs()).round() as usize;
        if skip >= self.segment.n_samples() {
            return Err(Error::domain(format!(
                "trimming {seconds} s leaves no samples in subject {} trial {}",
                self.subject, self.trial
            )));
        }
        let samples = self.segment.samples().slice(ndarray::s![.., skip..]).to_owned();
        let segment =
            EegSegment::new(self.segment.channels().to_vec(), self.segment.fs(), samples)?;
        Ok(Recording { segment, ..self.clone() })
    }
}

pub fn write_recording(path: &Path, rec: &Recording) -> Result<()> {
    let seg = &rec.segment;
    let mut buf =
        Vec::with_capacity(64 + seg.n_channels() * (8 + seg.n_samples() * 4));
    buf.extend_from_slice(MAGIC);
    buf.write_u16::<LE>(FORMAT_VERSION).expect("vec write");
    buf.write_u32::<LE>(rec.subject).expect("vec write");
    buf.write_u32::<LE>(rec.trial).expect("vec write");
    buf.write_f64::<LE>(seg.fs()).expect("vec write");
    buf.write_u16::<LE>(seg.n_channels() as u16).expect("vec write");
    for ch in seg.channels() {
        let name = ch.name().as_bytes();
        buf.write_u16::<LE>(name.len() as u16).expect("vec write");
        buf.extend_from_slice(name);
    }
    buf.write_u64::<LE>(seg.n_samples() as u64).expect("vec write");
    match &rec.label {
        Some(r) => {
            buf.push(1);
            for v in r.as_array() {
                buf.write_f64::<LE>(v).expect("vec write");
            }
        }
        None => buf.push(0),
    }
    for row in seg.samples().rows() {
        for &v in row {
            buf.write_f32::<LE>(v as f32).expect("vec write");
        }
    }
    fs::write(path, &buf).map_err(|e| Error::io(path, e))
}

/// Byte cursor with offset-carrying errors, shared by the binary readers.
struct Reader<'a> {
    data: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::parse(self.at as u64, message)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.data.len() {
            return Err(self.err(format!(
                "needed {n} bytes, {} remain",
                self.data.len() - self.at
            )));
        }
        let s = &self.data[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }
}

pub fn read_recording(path: &Path) -> Result<Recording> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader { data: &data, at: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::parse(0, "not a recording file (bad magic)"));
    }
    let version = r.take(2)?.read_u16::<LE>().expect("sized");
    if version != FORMAT_VERSION {
        return Err(Error::parse(
            4,
            format!("unsupported recording version {version}, expected {FORMAT_VERSION}"),
        ));
    }
    let subject = r.take(4)?.read_u32::<LE>().expect("sized");
    let trial = r.take(4)?.read_u32::<LE>().expect("sized");
    let fs_offset = r.at;
    let fs = r.take(8)?.read_f64::<LE>().expect("sized");
    if !fs.is_finite() || fs <= 0.0 {
        return Err(Error::parse(fs_offset as u64, format!("invalid sample rate {fs}")));
    }
    let n_channels = r.take(2)?.read_u16::<LE>().expect("sized") as usize;
    let mut channels = Vec::with_capacity(n_channels);
    for _ in 0..n_channels {
        let len = r.take(2)?.read_u16::<LE>().expect("sized") as usize;
        let at = r.at;
        let bytes = r.take(len)?;
        let name = std::str::from_utf8(bytes)
            .map_err(|e| Error::parse(at as u64, format!("invalid UTF-8: {e}")))?;
        let ch = ChannelId::parse(name)
            .map_err(|e| Error::parse(at as u64, format!("bad channel: {e}")))?;
        channels.push(ch);
    }
    let n_samples = r.take(8)?.read_u64::<LE>().expect("sized") as usize;
    let label_offset = r.at;
    let label = match r.take(1)?[0] {
        0 => None,
        1 => {
            let v = r.take(8)?.read_f64::<LE>().expect("sized");
            let a = r.take(8)?.read_f64::<LE>().expect("sized");
            let d = r.take(8)?.read_f64::<LE>().expect("sized");
            Some(VadRating::new(v, a, d).map_err(|e| {
                Error::parse(label_offset as u64 + 1, format!("bad label: {e}"))
            })?)
        }
        other => {
            return Err(Error::parse(
                label_offset as u64,
                format!("label flag must be 0 or 1, got {other}"),
            ))
        }
    };

    let mut samples = Array2::zeros((n_channels, n_samples));
    for c in 0..n_channels {
        for s in 0..n_samples {
            let at = r.at;
            let v = r.take(4)?.read_f32::<LE>().expect("sized") as f64;
            if !v.is_finite() {
                return Err(Error::parse(
                    at as u64,
                    format!("non-finite sample in channel row {c}"),
                ));
            }
            samples[(c, s)] = v;
        }
    }
    if r.at != data.len() {
        return Err(r.err("trailing bytes after sample block"));
    }
    let segment = EegSegment::new(channels, fs, samples)?;
    Ok(Recording { subject, trial, label, segment })
}

// ---------------------------------------------------------------------------
// dataset directory
// ---------------------------------------------------------------------------

/// A set of trial recordings, usually one directory's worth.
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub recordings: Vec<Recording>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.recordings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recordings.is_empty()
    }

    /// Distinct subject ids, ascending.
    pub fn subjects(&self) -> Vec<u32> {
        let set: BTreeSet<u32> = self.recordings.iter().map(|r| r.subject).collect();
        set.into_iter().collect()
    }

    pub fn for_subject(&self, subject: u32) -> Vec<&Recording> {
        self.recordings.iter().filter(|r| r.subject == subject).collect()
    }

    /// Trials carrying a rating label.
    pub fn labeled(&self) -> Vec<&Recording> {
        self.recordings.iter().filter(|r| r.label.is_some()).collect()
    }
}

/// Write one file per recording plus a manifest into `dir` (created if
/// absent). Existing files are overwritten; the caller guards against that
/// where it matters.
pub fn write_dataset(dir: &Path, recordings: &[Recording]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::new();
    manifest.push_str(MANIFEST_MAGIC);
    manifest.push('\n');
    manifest.push_str("file\tsubject\ttrial\tvalence\tarousal\tdominance\n");
    for rec in recordings {
        let name = rec.file_name();
        write_recording(&dir.join(&name), rec)?;
        let label = match &rec.label {
            Some(r) => format!("{}\t{}\t{}", r.valence, r.arousal, r.dominance),
            None => "\t\t".to_string(),
        };
        manifest.push_str(&format!("{name}\t{}\t{}\t{label}\n", rec.subject, rec.trial));
    }
    let path = dir.join(MANIFEST_NAME);
    let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    f.write_all(manifest.as_bytes()).map_err(|e| Error::io(&path, e))
}

/// Load every recording listed in the directory's manifest.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest_path = dir.join(MANIFEST_NAME);
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(first) if first == MANIFEST_MAGIC => {}
        _ => {
            return Err(Error::schema(
                "manifest",
                format!("{} does not start with `{MANIFEST_MAGIC}`", manifest_path.display()),
            ))
        }
    }
    let mut recordings = Vec::new();
    for line in lines.skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let file = line.split('\t').next().expect("split yields at least one field");
        let rec = read_recording(&dir.join(file))?;
        recordings.push(rec);
    }
    Ok(Dataset { recordings })
}

// ---------------------------------------------------------------------------
// external import
// ---------------------------------------------------------------------------

/// Options for importing an externally converted dataset.
#[derive(Clone, Debug)]
pub struct ImportOptions {
    /// Seconds trimmed from the start of every trial (pre-stimulus baseline).
    pub drop_first_s: f64,
    /// Subjects the directory is expected to contain; absentees are warned
    /// about, not fatal.
    pub expected_subjects: Vec<u32>,
}

impl Default for ImportOptions {
    fn default() -> Self {
        ImportOptions { drop_first_s: 3.0, expected_subjects: (1..=32).collect() }
    }
}

/// Import result: the loaded trials plus what was expected but absent.
#[derive(Debug)]
pub struct ImportReport {
    pub dataset: Dataset,
    pub missing_subjects: Vec<u32>,
}

/// Load a converted dataset directory, trim baselines, and report missing
/// subjects. Every present trial must carry a label; the selection and
/// training pipelines have no use for unlabeled imports.
pub fn import_matrix_dataset(dir: &Path, options: &ImportOptions) -> Result<ImportReport> {
    let raw = load_dataset(dir)?;
    let mut recordings = Vec::with_capacity(raw.len());
    for rec in raw.recordings {
        if rec.label.is_none() {
            return Err(Error::schema(
                "label",
                format!("subject {} trial {} has no rating", rec.subject, rec.trial),
            ));
        }
        recordings.push(if options.drop_first_s > 0.0 {
            rec.drop_first_s(options.drop_first_s)?
        } else {
            rec
        });
    }
    let dataset = Dataset { recordings };
    let present: BTreeSet<u32> = dataset.subjects().into_iter().collect();
    let missing_subjects: Vec<u32> = options
        .expected_subjects
        .iter()
        .copied()
        .filter(|s| !present.contains(s))
        .collect();
    for s in &missing_subjects {
        log::warn!("expected subject {s} not present in {}", dir.display());
    }
    if !missing_subjects.is_empty() {
        log::warn!(
            "continuing with {} of {} subjects; statistics will reflect the subset",
            present.len(),
            options.expected_subjects.len()
        );
    }
    Ok(ImportReport { dataset, missing_subjects })
}
