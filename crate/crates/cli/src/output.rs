use std::io::{self, Write};

use clap::ValueEnum;
use lexjoin::storage::Value;
use serde_json::{json, Value as Json};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

pub fn print_json(value: &Json) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn to_json(v: &Value) -> Json {
    match v {
        Value::Int(i) => json!(i),
        Value::Str(s) => json!(s),
    }
}

/// Streams decoded tuples: headerless CSV, one JSON document at the end, or
/// `name=value` lines.
pub struct TupleWriter {
    format: Format,
    header: Vec<String>,
    csv: Option<csv::Writer<io::Stdout>>,
    rows: Vec<Json>,
}

impl TupleWriter {
    pub fn new(format: Format) -> Self {
        let csv = (format == Format::Csv).then(|| csv::WriterBuilder::new().has_headers(false).from_writer(io::stdout()));
        TupleWriter { format, header: Vec::new(), csv, rows: Vec::new() }
    }

    pub fn with_header(mut self, names: &[String]) -> Self {
        self.header = names.to_vec();
        self
    }

    pub fn write(&mut self, tuple: &[Value]) {
        match self.format {
            Format::Csv => {
                let w = self.csv.as_mut().expect("csv writer");
                w.write_record(tuple.iter().map(Value::to_string)).expect("stdout");
            }
            Format::Json => self.rows.push(Json::Array(tuple.iter().map(to_json).collect())),
            Format::Text => {
                let fields: Vec<String> = tuple
                    .iter()
                    .enumerate()
                    .map(|(i, v)| match self.header.get(i) {
                        Some(name) => format!("{name}={v}"),
                        None => v.to_string(),
                    })
                    .collect();
                let mut out = io::stdout().lock();
                writeln!(out, "{}", fields.join(" ")).expect("stdout");
            }
        }
    }

    pub fn finish(mut self) {
        match self.format {
            Format::Csv => self.csv.take().expect("csv writer").flush().expect("stdout"),
            Format::Json => print_json(&json!({ "schema": 1, "variables": self.header, "tuples": self.rows })),
            Format::Text => {}
        }
    }
}
