//! Versioned on-disk container for an ingested corpus.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

pub const CACHE_FORMAT: &str = "poi-embed-corpus";
pub const CACHE_VERSION: u32 = 1;

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Serialize, Deserialize)]
struct CacheFile<C> {
    format: String,
    version: u32,
    corpus: C,
}

pub fn save_corpus(path: &Path, corpus: &Corpus) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(
        &mut out,
        &CacheFile {
            format: CACHE_FORMAT.to_string(),
            version: CACHE_VERSION,
            corpus,
        },
    )?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let value: serde_json::Value = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    let header: Header = serde_json::from_value(value.clone())?;
    if header.format != CACHE_FORMAT {
        return Err(Error::InvalidArgument(format!(
            "{} is not a corpus cache (format {:?})",
            path.display(),
            header.format
        )));
    }
    if header.version != CACHE_VERSION {
        return Err(Error::CacheVersion {
            expected: CACHE_VERSION,
            found: header.version,
        });
    }
    let file: CacheFile<Corpus> = serde_json::from_value(value)?;
    Ok(file.corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{read_records, IngestOptions};

    #[test]
    fn round_trip_and_version_check() {
        let records = read_records("u\ta\t1\tx\nu\tb\t2\ty,z\n".as_bytes(), Path::new("m"), false).unwrap();
        let corpus = Corpus::from_records(records, &IngestOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        save_corpus(&path, &corpus).unwrap();
        assert_eq!(load_corpus(&path).unwrap(), corpus);

        let text = std::fs::read_to_string(&path).unwrap().replace("\"version\":1", "\"version\":2");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(
            load_corpus(&path),
            Err(Error::CacheVersion { expected: 1, found: 2 })
        ));
    }
}
