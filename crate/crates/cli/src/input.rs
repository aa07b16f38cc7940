use std::fs;
use std::io::BufReader;
use std::path::Path;

use hswlm::corpus::read_document_records;
use hswlm::{filter_short_leaves, parse_hierarchy, Corpus, Models};

use crate::error::CliError;
use crate::manifest::ManifestBuilder;

pub fn read_bytes(path: &Path, manifest: &mut ManifestBuilder) -> Result<Vec<u8>, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::input(path.display(), e))?;
    manifest.input(path, &bytes);
    Ok(bytes)
}

fn utf8(path: &Path, bytes: Vec<u8>) -> Result<String, CliError> {
    String::from_utf8(bytes).map_err(|e| CliError::input(path.display(), e))
}

/// Loads a hierarchy (JSON or TSV) and a JSON-lines documents file, then drops
/// leaves with fewer than `min_tokens` tokens.
pub fn load_corpus(
    hierarchy: &Path,
    docs: &Path,
    min_tokens: usize,
    documents_as_leaves: bool,
    manifest: &mut ManifestBuilder,
) -> Result<Corpus, CliError> {
    let h_text = utf8(hierarchy, read_bytes(hierarchy, manifest)?)?;
    let h = parse_hierarchy(&h_text).map_err(|e| CliError::input(hierarchy.display(), e))?;
    let d_bytes = read_bytes(docs, manifest)?;
    let records = read_document_records(BufReader::new(d_bytes.as_slice()))
        .map_err(|e| CliError::input(docs.display(), e))?;
    let corpus = Corpus::ingest(records, h).map_err(|e| CliError::input(docs.display(), e))?;
    let corpus = filter_short_leaves(&corpus, min_tokens);
    if documents_as_leaves {
        Ok(corpus.documents_as_leaves()?)
    } else {
        Ok(corpus)
    }
}

pub fn load_models(path: &Path, manifest: &mut ManifestBuilder) -> Result<Models, CliError> {
    let bytes = read_bytes(path, manifest)?;
    Models::read_jsonl(BufReader::new(bytes.as_slice())).map_err(|e| CliError::input(path.display(), e))
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::input(dir.display(), e))
}

pub fn write_file(path: &Path, bytes: &[u8], manifest: &mut ManifestBuilder) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::input(path.display(), e))?;
    manifest.output(path);
    Ok(())
}
