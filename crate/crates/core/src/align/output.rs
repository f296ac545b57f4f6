use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::{AlignmentOp, AlignmentResult, OpKind};
use crate::error::{Error, Result};
use crate::preprocess;
use crate::subword::{Document, SubwordAnnotation, TextLine};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsonTokenRef {
    pub page: u32,
    pub line: u32,
    pub position: u32,
}

/// One op as written to alignment JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonOp {
    pub kind: OpKind,
    pub left: Option<JsonTokenRef>,
    pub right: Option<JsonTokenRef>,
    pub confidence: f64,
    pub low_confidence: bool,
}

fn token_ref(t: &SubwordAnnotation) -> JsonTokenRef {
    JsonTokenRef {
        page: t.key.page,
        line: t.key.line,
        position: t.key.position,
    }
}

fn line_ops<'a>(
    left: &'a Document,
    right: &'a Document,
    results: &'a [AlignmentResult],
) -> impl Iterator<Item = (&'a TextLine, &'a TextLine, &'a AlignmentOp)> + 'a {
    left.lines
        .iter()
        .zip(&right.lines)
        .zip(results)
        .flat_map(|((l, r), res)| res.ops.iter().map(move |op| (l, r, op)))
}

/// Flattens per-line results into document-level ops.
pub fn ops_json(left: &Document, right: &Document, results: &[AlignmentResult]) -> Vec<JsonOp> {
    line_ops(left, right, results)
        .map(|(l, r, op)| JsonOp {
            kind: op.kind,
            left: op.left_pos.map(|p| token_ref(&l.tokens()[p])),
            right: op.right_pos.map(|p| token_ref(&r.tokens()[p])),
            confidence: op.confidence,
            low_confidence: op.low_confidence,
        })
        .collect()
}

/// Tab-separated export, one op per row, with form ids for readability.
pub fn ops_tsv(left: &Document, right: &Document, results: &[AlignmentResult]) -> String {
    let mut out =
        String::from("kind\tleft\tright\tleft_form\tright_form\tconfidence\tlow_confidence\n");
    for (l, r, op) in line_ops(left, right, results) {
        let lt = op.left_pos.map(|p| &l.tokens()[p]);
        let rt = op.right_pos.map(|p| &r.tokens()[p]);
        let key = |t: Option<&SubwordAnnotation>| t.map_or(String::new(), |t| t.key.to_string());
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{:.6}\t{}",
            op.kind.as_str(),
            key(lt),
            key(rt),
            form(lt),
            form(rt),
            op.confidence,
            op.low_confidence
        );
    }
    out
}

fn form(t: Option<&SubwordAnnotation>) -> &str {
    t.map_or("", |t| t.form_id.as_str())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn cell(t: Option<&SubwordAnnotation>) -> Result<String> {
    let Some(t) = t else {
        return Ok("<td class=\"gap\">&mdash;</td>".into());
    };
    let label = escape(&t.form_id);
    match t.image.as_deref() {
        Some(img) => {
            let png =
                base64::engine::general_purpose::STANDARD.encode(preprocess::encode_png(img)?);
            Ok(format!(
                "<td><img src=\"data:image/png;base64,{png}\" alt=\"{label}\"><br>{label}</td>"
            ))
        }
        None => Ok(format!("<td>{label}</td>")),
    }
}

/// A single self-contained HTML page with one table row per op, showing
/// the two subword images side by side where they are available.
pub fn html_report(
    left: &Document,
    right: &Document,
    results: &[AlignmentResult],
) -> Result<String> {
    let mut out = String::new();
    out.push_str(
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Alignment</title><style>\n",
    );
    out.push_str("body{font-family:sans-serif}table{border-collapse:collapse}td,th{border:1px solid #ccc;padding:4px;text-align:center}\n");
    out.push_str(".match{background:#eef8ee}.swap{background:#fff6dd}.insert_left,.insert_right{background:#fbeaea}.gap{color:#999}\n");
    out.push_str("</style></head><body>\n");
    let _ = writeln!(
        out,
        "<h1>{} vs {}</h1>",
        escape(&left.manuscript_id),
        escape(&right.manuscript_id)
    );
    out.push_str("<table><tr><th>line</th><th>kind</th><th>left</th><th>right</th><th>confidence</th></tr>\n");
    for (l, r, op) in line_ops(left, right, results) {
        let lt = op.left_pos.map(|p| &l.tokens()[p]);
        let rt = op.right_pos.map(|p| &r.tokens()[p]);
        let _ = writeln!(
            out,
            "<tr class=\"{k}\"><td>{}:{}</td><td>{k}{}</td>{}{}<td>{:.3}</td></tr>",
            l.page,
            l.line,
            if op.low_confidence { " (low)" } else { "" },
            cell(lt)?,
            cell(rt)?,
            op.confidence,
            k = op.kind.as_str(),
        );
    }
    out.push_str("</table></body></html>\n");
    Ok(out)
}

pub fn write_html(
    path: &Path,
    left: &Document,
    right: &Document,
    results: &[AlignmentResult],
) -> Result<()> {
    fs::write(path, html_report(left, right, results)?).map_err(|e| Error::io(path, e))
}
