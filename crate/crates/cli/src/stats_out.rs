use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use foodbench_core::stats::{
    class_counts, cooccurrence, filter_cooccurrence, image_size_histogram,
    polygon_point_histogram, select_classes, Histogram,
};
use foodbench_core::DatasetDoc;

use crate::{pretty, CliError, Format, StatsArgs};

const DEFAULT_MIN_ANNOTATIONS: u64 = 35;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stat {
    ClassCounts,
    SelectedClasses,
    Cooccurrence,
    PolygonHist,
    SizeHist,
}

pub(crate) struct Selection(Vec<Stat>);

impl Selection {
    /// Rejects bad combinations before the dataset is read.
    pub(crate) fn from_args(args: &StatsArgs) -> Result<Self, CliError> {
        if args.bins == 0 {
            return Err(CliError::Usage("--bins must be >= 1".into()));
        }
        let flags = [
            (args.class_counts, Stat::ClassCounts),
            (args.min_annotations.is_some(), Stat::SelectedClasses),
            (args.cooccurrence, Stat::Cooccurrence),
            (args.polygon_hist, Stat::PolygonHist),
            (args.size_hist, Stat::SizeHist),
        ];
        let mut chosen: Vec<Stat> = flags.iter().filter(|f| f.0).map(|f| f.1).collect();
        if chosen.is_empty() {
            chosen = flags.iter().map(|f| f.1).collect();
        }
        if args.format == Format::Csv && chosen.len() != 1 {
            return Err(CliError::Usage(
                "--format csv needs exactly one of --class-counts, --min-annotations, \
                 --cooccurrence, --polygon-hist, --size-hist"
                    .into(),
            ));
        }
        Ok(Self(chosen))
    }

    pub(crate) fn render(&self, doc: &DatasetDoc, args: &StatsArgs) -> Result<Vec<u8>, CliError> {
        match args.format {
            Format::Json => {
                let mut out = Map::new();
                for &s in &self.0 {
                    out.insert(key(s).into(), json_of(s, doc, args));
                }
                Ok(pretty(&Value::Object(out)))
            }
            Format::Csv => csv_of(self.0[0], doc, args)
                .map_err(|e| CliError::Data(format!("csv: {e}"))),
        }
    }
}

fn key(s: Stat) -> &'static str {
    match s {
        Stat::ClassCounts => "class_counts",
        Stat::SelectedClasses => "selected_classes",
        Stat::Cooccurrence => "cooccurrence",
        Stat::PolygonHist => "polygon_points",
        Stat::SizeHist => "image_sizes",
    }
}

fn min_annotations(args: &StatsArgs) -> u64 {
    args.min_annotations.unwrap_or(DEFAULT_MIN_ANNOTATIONS)
}

fn json_of(s: Stat, doc: &DatasetDoc, args: &StatsArgs) -> Value {
    match s {
        Stat::ClassCounts => {
            let counts: BTreeMap<String, u64> = class_counts(doc)
                .into_iter()
                .map(|(c, n)| (c.to_string(), n))
                .collect();
            json!(counts)
        }
        Stat::SelectedClasses => {
            let min = min_annotations(args);
            json!({ "min_annotations": min, "category_ids": select_classes(doc, min) })
        }
        Stat::Cooccurrence => {
            let m = filter_cooccurrence(&cooccurrence(doc), args.min_count);
            json!({ "min_count": args.min_count, "category_ids": m.category_ids, "counts": m.counts })
        }
        Stat::PolygonHist => {
            let h = polygon_point_histogram(doc, args.max_points, args.bins);
            json!({ "max_points": args.max_points, "histogram": h })
        }
        Stat::SizeHist => {
            let (w, h) = image_size_histogram(doc, args.bins);
            json!({ "width": w, "height": h })
        }
    }
}

fn hist_rows<W: std::io::Write>(
    w: &mut csv::Writer<W>,
    label: &str,
    h: &Histogram,
) -> csv::Result<()> {
    for (i, c) in h.counts.iter().enumerate() {
        w.write_record([
            label.to_string(),
            h.bin_edges[i].to_string(),
            h.bin_edges[i + 1].to_string(),
            c.to_string(),
        ])?;
    }
    Ok(())
}

fn csv_of(s: Stat, doc: &DatasetDoc, args: &StatsArgs) -> csv::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    match s {
        Stat::ClassCounts => {
            w.write_record(["category_id", "count"])?;
            for (c, n) in class_counts(doc) {
                w.write_record([c.to_string(), n.to_string()])?;
            }
        }
        Stat::SelectedClasses => {
            let counts = class_counts(doc);
            w.write_record(["category_id", "count"])?;
            for c in select_classes(doc, min_annotations(args)) {
                w.write_record([c.to_string(), counts[&c].to_string()])?;
            }
        }
        Stat::Cooccurrence => {
            let m = filter_cooccurrence(&cooccurrence(doc), args.min_count);
            let mut header = vec![String::from("category_id")];
            header.extend(m.category_ids.iter().map(u64::to_string));
            w.write_record(&header)?;
            for (c, row) in m.category_ids.iter().zip(&m.counts) {
                let mut rec = vec![c.to_string()];
                rec.extend(row.iter().map(u64::to_string));
                w.write_record(&rec)?;
            }
        }
        Stat::PolygonHist => {
            let h = polygon_point_histogram(doc, args.max_points, args.bins);
            tracing::info!(excluded = h.excluded, rle_skipped = h.rle_skipped, "polygon points");
            w.write_record(["series", "bin_start", "bin_end", "count"])?;
            hist_rows(&mut w, "points", &h.histogram)?;
        }
        Stat::SizeHist => {
            let (wh, hh) = image_size_histogram(doc, args.bins);
            w.write_record(["series", "bin_start", "bin_end", "count"])?;
            hist_rows(&mut w, "width", &wh)?;
            hist_rows(&mut w, "height", &hh)?;
        }
    }
    w.into_inner().map_err(|e| e.into_error().into())
}
