//! Multi-record FASTA reading and writing.

use std::io::{self, BufRead, Write};

use thiserror::Error;

/// IUPAC nucleotide codes accepted in sequence data (after upper-casing).
pub const IUPAC_SYMBOLS: &[u8] = b"-ABCDGHKMNRSTUVWY";

pub fn is_iupac(b: u8) -> bool {
    IUPAC_SYMBOLS.binary_search(&b).is_ok()
}

#[derive(Debug, Error)]
pub enum FastaError {
    #[error("line {line}: sequence data before the first '>' header")]
    DataBeforeHeader { line: usize },
    #[error("line {line}: record has no sequence data")]
    EmptyRecord { line: usize },
    #[error("line {line}: '{symbol}' is not an IUPAC nucleotide code")]
    InvalidSymbol { line: usize, symbol: char },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceRecord {
    /// Header line without the leading '>', verbatim.
    pub description: Vec<u8>,
    /// Upper-case IUPAC symbols.
    pub bases: Vec<u8>,
}

impl SequenceRecord {
    pub fn new(description: impl Into<Vec<u8>>, bases: impl Into<Vec<u8>>) -> Self {
        SequenceRecord {
            description: description.into(),
            bases: bases.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SequenceCollection {
    pub records: Vec<SequenceRecord>,
}

impl SequenceCollection {
    pub fn new(records: Vec<SequenceRecord>) -> Self {
        SequenceCollection { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_bases(&self) -> usize {
        self.records.iter().map(SequenceRecord::len).sum()
    }
}

/// Streaming record reader. Yields records in file order.
pub struct FastaReader<R> {
    input: R,
    line_no: usize,
    line: Vec<u8>,
    pending_header: Option<(Vec<u8>, usize)>,
    done: bool,
}

impl<R: BufRead> FastaReader<R> {
    pub fn new(input: R) -> Self {
        FastaReader {
            input,
            line_no: 0,
            line: Vec::new(),
            pending_header: None,
            done: false,
        }
    }

    /// Reads the next line into `self.line` without its terminator.
    fn next_line(&mut self) -> Result<bool, FastaError> {
        self.line.clear();
        if self.input.read_until(b'\n', &mut self.line)? == 0 {
            return Ok(false);
        }
        self.line_no += 1;
        if self.line.last() == Some(&b'\n') {
            self.line.pop();
        }
        if self.line.last() == Some(&b'\r') {
            self.line.pop();
        }
        Ok(true)
    }

    fn read_record(&mut self) -> Result<Option<SequenceRecord>, FastaError> {
        if self.done {
            return Ok(None);
        }
        let (description, header_line) = match self.pending_header.take() {
            Some(h) => h,
            None => loop {
                if !self.next_line()? {
                    self.done = true;
                    return Ok(None);
                }
                if let Some(rest) = self.line.strip_prefix(b">") {
                    break (rest.to_vec(), self.line_no);
                }
                if self.line.iter().all(u8::is_ascii_whitespace) {
                    continue;
                }
                return Err(FastaError::DataBeforeHeader { line: self.line_no });
            },
        };

        let mut bases = Vec::new();
        loop {
            if !self.next_line()? {
                self.done = true;
                break;
            }
            if let Some(rest) = self.line.strip_prefix(b">") {
                self.pending_header = Some((rest.to_vec(), self.line_no));
                break;
            }
            for &b in &self.line {
                if b.is_ascii_whitespace() {
                    continue;
                }
                let u = b.to_ascii_uppercase();
                if !is_iupac(u) {
                    return Err(FastaError::InvalidSymbol {
                        line: self.line_no,
                        symbol: b as char,
                    });
                }
                bases.push(u);
            }
        }
        if bases.is_empty() {
            return Err(FastaError::EmptyRecord { line: header_line });
        }
        Ok(Some(SequenceRecord { description, bases }))
    }
}

impl<R: BufRead> Iterator for FastaReader<R> {
    type Item = Result<SequenceRecord, FastaError>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.read_record() {
            Ok(Some(r)) => Some(Ok(r)),
            Ok(None) => None,
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

pub fn parse_fasta<R: BufRead>(input: R) -> Result<SequenceCollection, FastaError> {
    let records = FastaReader::new(input).collect::<Result<Vec<_>, _>>()?;
    Ok(SequenceCollection { records })
}

pub fn parse_fasta_bytes(input: &[u8]) -> Result<SequenceCollection, FastaError> {
    parse_fasta(input)
}

pub fn write_record<W: Write>(
    out: &mut W,
    record: &SequenceRecord,
    line_width: usize,
) -> io::Result<()> {
    assert!(line_width >= 1, "line width must be at least 1");
    out.write_all(b">")?;
    out.write_all(&record.description)?;
    out.write_all(b"\n")?;
    for chunk in record.bases.chunks(line_width) {
        out.write_all(chunk)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_fasta<W: Write>(
    out: &mut W,
    collection: &SequenceCollection,
    line_width: usize,
) -> io::Result<()> {
    for r in &collection.records {
        write_record(out, r, line_width)?;
    }
    Ok(())
}

pub fn to_fasta_bytes(collection: &SequenceCollection, line_width: usize) -> Vec<u8> {
    let mut out = Vec::new();
    write_fasta(&mut out, collection, line_width).expect("writing to a Vec cannot fail");
    out
}
