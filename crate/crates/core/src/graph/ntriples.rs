//! Line-oriented N-Triples reader.
//!
//! Only IRI-to-IRI statements are kept. Literal objects and blank nodes are
//! counted and dropped, which is all the walker needs.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use serde::{Deserialize, Serialize};

use super::{GraphError, Iri, Triple};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Abort on the first malformed line or blank node instead of counting it.
    pub strict: bool,
}

/// Counters collected while reading a statement stream.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub lines: u64,
    pub triples: u64,
    pub literals_skipped: u64,
    pub blank_nodes_skipped: u64,
    pub malformed: u64,
}

enum Term<'a> {
    Iri(&'a str),
    Blank,
    Literal,
}

enum Statement<'a> {
    Empty,
    Triple(&'a str, &'a str, &'a str),
    LiteralObject,
    BlankNode,
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        let rest = &self.text[self.pos..];
        let trimmed = rest.trim_start_matches([' ', '\t']);
        self.pos += rest.len() - trimmed.len();
    }

    fn peek(&self) -> Option<u8> {
        self.text.as_bytes().get(self.pos).copied()
    }

    fn at_end(&self) -> bool {
        self.pos >= self.text.len()
    }

    fn term(&mut self) -> Option<Term<'a>> {
        self.skip_ws();
        let bytes = self.text.as_bytes();
        match self.peek()? {
            b'<' => {
                let start = self.pos + 1;
                let len = self.text[start..].find('>')?;
                let iri = &self.text[start..start + len];
                if iri.is_empty() || iri.contains(char::is_whitespace) {
                    return None;
                }
                self.pos = start + len + 1;
                Some(Term::Iri(iri))
            }
            b'_' => {
                if bytes.get(self.pos + 1) != Some(&b':') {
                    return None;
                }
                let start = self.pos + 2;
                let len = self.text[start..]
                    .find([' ', '\t'])
                    .unwrap_or(self.text.len() - start);
                if len == 0 {
                    return None;
                }
                self.pos = start + len;
                Some(Term::Blank)
            }
            b'"' => {
                let mut i = self.pos + 1;
                loop {
                    match bytes.get(i)? {
                        b'\\' => i += 2,
                        b'"' => break,
                        _ => i += 1,
                    }
                }
                self.pos = i + 1;
                match self.peek() {
                    Some(b'@') => {
                        let start = self.pos + 1;
                        let len = self.text[start..]
                            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '-'))
                            .unwrap_or(self.text.len() - start);
                        if len == 0 {
                            return None;
                        }
                        self.pos = start + len;
                    }
                    Some(b'^') => {
                        if bytes.get(self.pos + 1) != Some(&b'^') {
                            return None;
                        }
                        self.pos += 2;
                        match self.term()? {
                            Term::Iri(_) => {}
                            _ => return None,
                        }
                    }
                    _ => {}
                }
                Some(Term::Literal)
            }
            _ => None,
        }
    }
}

fn parse_statement(line: &str) -> Option<Statement<'_>> {
    let trimmed = line.trim();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Some(Statement::Empty);
    }
    let mut cur = Cursor { text: trimmed, pos: 0 };
    let subject = cur.term()?;
    let predicate = cur.term()?;
    let object = cur.term()?;
    cur.skip_ws();
    if cur.peek() != Some(b'.') {
        return None;
    }
    cur.pos += 1;
    cur.skip_ws();
    if !cur.at_end() && cur.peek() != Some(b'#') {
        return None;
    }
    let predicate = match predicate {
        Term::Iri(p) => p,
        _ => return None,
    };
    Some(match (subject, object) {
        (Term::Literal, _) => return None,
        (Term::Blank, _) | (_, Term::Blank) => Statement::BlankNode,
        (Term::Iri(_), Term::Literal) => Statement::LiteralObject,
        (Term::Iri(s), Term::Iri(o)) => Statement::Triple(s, predicate, o),
    })
}

/// Parse an N-Triples stream, keeping IRI-only statements.
pub fn parse_ntriples<R: BufRead>(
    reader: R,
    options: ParseOptions,
) -> Result<(Vec<Triple>, ParseReport), GraphError> {
    let mut triples = Vec::new();
    let mut report = ParseReport::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx as u64 + 1;
        report.lines += 1;
        match parse_statement(&line) {
            Some(Statement::Empty) => {}
            Some(Statement::Triple(s, p, o)) => {
                triples.push(Triple {
                    subject: Iri::new(s)?,
                    predicate: Iri::new(p)?,
                    object: Iri::new(o)?,
                });
                report.triples += 1;
            }
            Some(Statement::LiteralObject) => report.literals_skipped += 1,
            Some(Statement::BlankNode) => {
                if options.strict {
                    return Err(GraphError::BlankNode(line_no));
                }
                report.blank_nodes_skipped += 1;
            }
            None => {
                if options.strict {
                    return Err(GraphError::MalformedLine(line_no));
                }
                log::warn!("skipping malformed N-Triples line {line_no}");
                report.malformed += 1;
            }
        }
    }
    Ok((triples, report))
}

/// Open a possibly gzip-compressed file, sniffing the magic bytes.
pub fn open_maybe_gzip(path: &Path) -> io::Result<Box<dyn BufRead>> {
    let mut file = File::open(path)?;
    let mut magic = [0u8; 2];
    let n = file.read(&mut magic)?;
    let file = File::open(path)?;
    if n == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

pub fn read_ntriples_file(
    path: &Path,
    options: ParseOptions,
) -> Result<(Vec<Triple>, ParseReport), GraphError> {
    parse_ntriples(open_maybe_gzip(path)?, options)
}

pub fn write_triple<W: Write>(out: &mut W, t: &Triple) -> io::Result<()> {
    writeln!(out, "<{}> <{}> <{}> .", t.subject, t.predicate, t.object)
}
