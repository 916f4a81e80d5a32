//! CoNLL-U reader.
//!
//! Ten tab-separated columns per token row, `#` comment lines, blank-line
//! sentence separators. Multiword ranges (`3-4`) and empty nodes (`3.1`)
//! are skipped.

use std::io::BufRead;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyToken {
    /// 1-based position in the sentence.
    pub index: usize,
    pub form: String,
    /// Lowercased lemma (falls back to the lowercased form when `_`).
    pub lemma: String,
    pub upos: String,
    /// Parent index, 0 for the root.
    pub head: usize,
    pub deprel: String,
}

impl DependencyToken {
    /// Universal part of the relation label (`nsubj:pass` -> `nsubj`).
    pub fn relation(&self) -> &str {
        self.deprel
            .split_once(':')
            .map_or(self.deprel.as_str(), |(base, _)| base)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencySentence {
    pub tokens: Vec<DependencyToken>,
    pub text: String,
}

impl DependencySentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token at a 1-based index.
    pub fn token(&self, index: usize) -> Option<&DependencyToken> {
        index.checked_sub(1).and_then(|i| self.tokens.get(i))
    }

    pub fn root(&self) -> Option<usize> {
        self.tokens
            .iter()
            .find(|t| t.head == 0 && t.relation() == "root")
            .map(|t| t.index)
    }

    /// First dependent of `head` carrying relation `rel`.
    pub fn dependent(&self, head: usize, rel: &str) -> Option<usize> {
        self.dependents(head, rel).next()
    }

    pub fn dependents<'a>(
        &'a self,
        head: usize,
        rel: &'a str,
    ) -> impl Iterator<Item = usize> + 'a {
        self.tokens
            .iter()
            .filter(move |t| t.head == head && t.relation() == rel)
            .map(|t| t.index)
    }

    fn validate(&self, first_line: usize) -> Result<()> {
        let n = self.tokens.len();
        for (i, tok) in self.tokens.iter().enumerate() {
            if tok.index != i + 1 {
                return Err(Error::Parse {
                    line: first_line,
                    message: format!("token ids are not consecutive (found {} at position {})", tok.index, i + 1),
                });
            }
            if tok.head > n {
                return Err(Error::Parse {
                    line: first_line,
                    message: format!("token {} has head {} outside 0..={n}", tok.index, tok.head),
                });
            }
        }
        let roots = self.tokens.iter().filter(|t| t.head == 0).count();
        if roots != 1 {
            return Err(Error::Parse {
                line: first_line,
                message: format!("sentence has {roots} root tokens, expected exactly 1"),
            });
        }
        // Head links must reach the root without revisiting a token.
        for tok in &self.tokens {
            let mut cur = tok.index;
            for _ in 0..=n {
                if cur == 0 {
                    break;
                }
                cur = self.tokens[cur - 1].head;
            }
            if cur != 0 {
                return Err(Error::Parse {
                    line: first_line,
                    message: format!("head links from token {} form a cycle", tok.index),
                });
            }
        }
        Ok(())
    }
}

pub fn parse_conllu<R: BufRead>(input: R) -> Result<Vec<DependencySentence>> {
    let mut sentences = Vec::new();
    let mut tokens = Vec::new();
    let mut text: Option<String> = None;
    let mut block_start = 0usize;

    let mut flush = |tokens: &mut Vec<DependencyToken>,
                     text: &mut Option<String>,
                     block_start: usize|
     -> Result<()> {
        if tokens.is_empty() {
            *text = None;
            return Ok(());
        }
        let toks = std::mem::take(tokens);
        let text = text.take().unwrap_or_else(|| {
            toks.iter().map(|t| t.form.as_str()).collect::<Vec<_>>().join(" ")
        });
        let sentence = DependencySentence { tokens: toks, text };
        sentence.validate(block_start)?;
        sentences.push(sentence);
        Ok(())
    };

    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut tokens, &mut text, block_start)?;
            continue;
        }
        if tokens.is_empty() && text.is_none() {
            block_start = line_no;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(t) = comment.trim_start().strip_prefix("text") {
                if let Some(t) = t.trim_start().strip_prefix('=') {
                    text = Some(t.trim().to_owned());
                }
            }
            continue;
        }
        if tokens.is_empty() {
            block_start = line_no;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 10 tab-separated columns, found {}", cols.len()),
            });
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let index: usize = cols[0].parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("invalid token id {:?}", cols[0]),
        })?;
        let head: usize = cols[6].parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("invalid head {:?}", cols[6]),
        })?;
        let form = cols[1].to_owned();
        let lemma = if cols[2] == "_" { cols[1] } else { cols[2] }.to_lowercase();
        tokens.push(DependencyToken {
            index,
            form,
            lemma,
            upos: cols[3].to_owned(),
            head,
            deprel: cols[7].to_owned(),
        });
    }
    flush(&mut tokens, &mut text, block_start)?;
    Ok(sentences)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EATING: &str = "# text = A man is eating a banana
1\tA\ta\tDET\tDT\t_\t2\tdet\t_\t_
2\tman\tman\tNOUN\tNN\t_\t4\tnsubj\t_\t_
3\tis\tbe\tAUX\tVBZ\t_\t4\taux\t_\t_
4\teating\teat\tVERB\tVBG\t_\t0\troot\t_\t_
5\ta\ta\tDET\tDT\t_\t6\tdet\t_\t_
6\tbanana\tbanana\tNOUN\tNN\t_\t4\tobj\t_\t_
7\tquickly\tquickly\tADV\tRB\t_\t4\tadvmod\t_\t_
8\t.\t.\tPUNCT\t.\t_\t4\tpunct\t_\t_
";

    #[test]
    fn reads_one_block() {
        let s = parse_conllu(EATING.as_bytes()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].len(), 8);
        assert_eq!(s[0].text, "A man is eating a banana");
        assert_eq!(s[0].root(), Some(4));
        assert_eq!(s[0].dependent(4, "obj"), Some(6));
        assert_eq!(s[0].token(1).unwrap().lemma, "a");
    }

    #[test]
    fn blank_line_separates_sentences() {
        let two = format!("{EATING}\n{EATING}");
        assert_eq!(parse_conllu(two.as_bytes()).unwrap().len(), 2);
    }

    #[test]
    fn bad_head_names_line() {
        let bad = EATING.replace("3\tis\tbe\tAUX\tVBZ\t_\t4", "3\tis\tbe\tAUX\tVBZ\t_\tx");
        match parse_conllu(bad.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_column_count_names_line() {
        let bad = EATING.replace("5\ta\ta\tDET\tDT\t_\t6\tdet\t_\t_", "5\ta\ta\tDET");
        match parse_conllu(bad.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn skips_ranges_and_empty_nodes_and_lowercases() {
        let input = "1-2\tDon't\t_\t_\t_\t_\t_\t_\t_\t_
1\tDo\tDo\tAUX\t_\t_\t3\taux\t_\t_
2\tn't\tnot\tPART\t_\t_\t3\tadvmod\t_\t_
2.1\tx\tx\tX\t_\t_\t_\t_\t_\t_
3\tRun\t_\tVERB\t_\t_\t0\troot\t_\t_
";
        let s = parse_conllu(input.as_bytes()).unwrap();
        assert_eq!(s[0].len(), 3);
        assert_eq!(s[0].token(1).unwrap().lemma, "do");
        assert_eq!(s[0].token(3).unwrap().lemma, "run");
        assert_eq!(s[0].text, "Do n't Run");
    }

    #[test]
    fn head_out_of_range_and_multiple_roots_rejected() {
        let out = EATING.replace("7\tquickly\tquickly\tADV\tRB\t_\t4", "7\tquickly\tquickly\tADV\tRB\t_\t12");
        assert!(parse_conllu(out.as_bytes()).is_err());
        let two_roots = EATING.replace("7\tquickly\tquickly\tADV\tRB\t_\t4\tadvmod", "7\tquickly\tquickly\tADV\tRB\t_\t0\tadvmod");
        assert!(parse_conllu(two_roots.as_bytes()).is_err());
    }

    #[test]
    fn subtyped_relations_use_universal_part() {
        let input = "1\tpaper\tpaper\tNOUN\t_\t_\t3\tnsubj:pass\t_\t_
2\twas\tbe\tAUX\t_\t_\t3\taux:pass\t_\t_
3\tfolded\tfold\tVERB\t_\t_\t0\troot\t_\t_
";
        let s = parse_conllu(input.as_bytes()).unwrap();
        assert_eq!(s[0].dependent(3, "nsubj"), Some(1));
    }

    #[test]
    fn empty_input_has_no_sentences() {
        assert!(parse_conllu("".as_bytes()).unwrap().is_empty());
        assert!(parse_conllu("\n\n# only a comment\n\n".as_bytes()).unwrap().is_empty());
    }
}
