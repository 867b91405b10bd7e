//! Readers for the three kinds of data source.

use std::collections::BTreeMap;
use std::io::Read;

use super::DataError;

/// One value for one channel at a data time.
#[derive(Debug, Clone, PartialEq)]
pub struct Update {
    pub time: f64,
    pub channel: String,
    pub value: f64,
}

/// Updates released together once the clock reaches `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub start: f64,
    pub updates: Vec<Update>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeSeries {
    pub slots: Vec<Slot>,
    pub diagnostics: Vec<String>,
}

impl TimeSeries {
    pub fn update_count(&self) -> usize {
        self.slots.iter().map(|s| s.updates.len()).sum()
    }
}

/// Reads a time-series CSV and groups its rows into `schedule_s`-wide slots
/// starting at the first timestamp. Each value column becomes a channel of
/// the same name. Rows with a non-numeric cell are skipped with a
/// diagnostic; a time that does not increase is an error.
pub fn parse_timeseries_csv(
    reader: impl Read,
    time_column: &str,
    value_columns: &[String],
    schedule_s: f64,
) -> Result<TimeSeries, DataError> {
    if !(schedule_s > 0.0 && schedule_s.is_finite()) {
        return Err(DataError::Schedule(schedule_s));
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = TimeSeries::default();
    let headers = match rdr.headers() {
        Ok(h) if !h.is_empty() && !(h.len() == 1 && h[0].is_empty()) => h.clone(),
        _ => {
            out.diagnostics.push("empty file: no header row".into());
            return Ok(out);
        }
    };
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::UnknownColumn(name.to_string()))
    };
    let t_idx = col(time_column)?;
    let v_idx: Vec<usize> = value_columns.iter().map(|c| col(c)).collect::<Result<_, _>>()?;

    let mut t0: Option<f64> = None;
    let mut last: Option<f64> = None;
    for (row, rec) in rdr.records().enumerate() {
        let line = row + 2;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                out.diagnostics.push(format!("line {line}: {e}"));
                continue;
            }
        };
        let parse = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok()).filter(|v| v.is_finite());
        let Some(t) = parse(t_idx) else {
            out.diagnostics.push(format!("line {line}: non-numeric time, row skipped"));
            continue;
        };
        let values: Option<Vec<f64>> = v_idx.iter().map(|&i| parse(i)).collect();
        let Some(values) = values else {
            out.diagnostics.push(format!("line {line}: non-numeric value, row skipped"));
            continue;
        };
        if let Some(prev) = last {
            if t <= prev {
                return Err(DataError::NonMonotoneTime { line, time: t });
            }
        }
        last = Some(t);
        let base = *t0.get_or_insert(t);
        let k = ((t - base) / schedule_s).floor();
        let start = base + k * schedule_s;
        if out.slots.last().is_none_or(|s| s.start != start) {
            out.slots.push(Slot {
                start,
                updates: Vec::new(),
            });
        }
        let slot = out.slots.last_mut().expect("slot pushed");
        for (name, v) in value_columns.iter().zip(values) {
            slot.updates.push(Update {
                time: t,
                channel: name.clone(),
                value: v,
            });
        }
    }
    if out.slots.is_empty() && out.diagnostics.is_empty() {
        out.diagnostics.push("no data rows".into());
    }
    Ok(out)
}

/// Buffered tabular data surfaced one tuple at a time, restricted to the
/// selected columns in selection order.
pub struct TabularRows<R: Read> {
    records: csv::StringRecordsIntoIter<R>,
    indices: Vec<usize>,
    pub columns: Vec<String>,
}

pub fn parse_tabular<R: Read>(reader: R, columns: &[String]) -> Result<TabularRows<R>, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let indices = columns
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h == c)
                .ok_or_else(|| DataError::UnknownColumn(c.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TabularRows {
        records: rdr.into_records(),
        indices,
        columns: columns.to_vec(),
    })
}

impl<R: Read> Iterator for TabularRows<R> {
    type Item = Result<Vec<String>, DataError>;

    fn next(&mut self) -> Option<Self::Item> {
        let rec = self.records.next()?;
        Some(
            rec.map_err(DataError::from)
                .map(|r| self.indices.iter().map(|&i| r.get(i).unwrap_or("").to_string()).collect()),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DropCounters {
    pub malformed: usize,
    pub unmapped: usize,
    pub non_monotone: usize,
}

impl DropCounters {
    pub fn total(&self) -> usize {
        self.malformed + self.unmapped + self.non_monotone
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SensorReplay {
    pub points: Vec<Update>,
    pub dropped: DropCounters,
}

/// Reads `timestamp,sensor_id,value` lines (an optional header line is
/// skipped). Points for unmapped sensors, malformed lines and timestamps
/// that do not strictly increase per channel are dropped and counted.
pub fn parse_sensor_replay(text: &str, channel_map: &BTreeMap<String, String>) -> SensorReplay {
    let mut out = SensorReplay::default();
    let mut last: BTreeMap<&str, f64> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if i == 0 && fields.first() == Some(&"timestamp") {
            continue;
        }
        let parsed = match fields.as_slice() {
            [t, id, v] => match (t.parse::<f64>(), v.parse::<f64>()) {
                (Ok(t), Ok(v)) if t.is_finite() && v.is_finite() => Some((t, *id, v)),
                _ => None,
            },
            _ => None,
        };
        let Some((t, id, v)) = parsed else {
            out.dropped.malformed += 1;
            continue;
        };
        let Some(channel) = channel_map.get(id) else {
            out.dropped.unmapped += 1;
            continue;
        };
        if last.get(channel.as_str()).is_some_and(|&prev| t <= prev) {
            out.dropped.non_monotone += 1;
            continue;
        }
        last.insert(channel.as_str(), t);
        out.points.push(Update {
            time: t,
            channel: channel.clone(),
            value: v,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cols(c: &[&str]) -> Vec<String> {
        c.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn slots_of_two() {
        let mut csv = String::from("t,v\n");
        for i in 0..10 {
            csv += &format!("{i},{}\n", i * 10);
        }
        let ts = parse_timeseries_csv(csv.as_bytes(), "t", &cols(&["v"]), 2.0).unwrap();
        assert_eq!(ts.slots.len(), 5);
        assert!(ts.slots.iter().all(|s| s.updates.len() == 2));
        assert_eq!(ts.slots[2].start, 4.0);
    }

    #[test]
    fn empty_and_bad_rows() {
        let ts = parse_timeseries_csv("".as_bytes(), "t", &cols(&["v"]), 1.0).unwrap();
        assert_eq!(ts.update_count(), 0);
        assert_eq!(ts.diagnostics.len(), 1);

        let ts = parse_timeseries_csv("t,v\n0,1\n1,x\n2,3\n".as_bytes(), "t", &cols(&["v"]), 1.0).unwrap();
        assert_eq!(ts.update_count(), 2);
        assert_eq!(ts.diagnostics.len(), 1);

        assert!(matches!(
            parse_timeseries_csv("t,v\n0,1\n0,2\n".as_bytes(), "t", &cols(&["v"]), 1.0),
            Err(DataError::NonMonotoneTime { line: 3, .. })
        ));
        assert!(matches!(
            parse_timeseries_csv("t,v\n".as_bytes(), "t", &cols(&["w"]), 1.0),
            Err(DataError::UnknownColumn(_))
        ));
    }

    #[test]
    fn tabular_selection() {
        let csv = "a,b,c,d,e,f,g\n1,2,3,4,5,6,7\n8,9,10,11,12,13,14\n";
        let rows: Vec<_> = parse_tabular(csv.as_bytes(), &cols(&["g", "a", "d"]))
            .unwrap()
            .map(Result::unwrap)
            .collect();
        assert_eq!(rows, vec![cols(&["7", "1", "4"]), cols(&["14", "8", "11"])]);
        assert_eq!(parse_tabular("a,b\n".as_bytes(), &cols(&["a"])).unwrap().count(), 0);
        match parse_tabular("speed,dir\n".as_bytes(), &cols(&["speeed"])) {
            Err(DataError::UnknownColumn(c)) => assert_eq!(c, "speeed"),
            _ => panic!("expected unknown column"),
        }
    }

    #[test]
    fn sensor_replay_counters() {
        let map: BTreeMap<String, String> = [("anemo".to_string(), "sensor_wind_speed".to_string())].into();
        let mut text = String::from("timestamp,sensor_id,value\n");
        for i in 0..100 {
            text += &format!("{}.0,anemo,{}\n", i, i % 7);
        }
        text += "100.0,other,1\n";
        text += "99.0,anemo,1\n";
        text += "garbage\n";
        let r = parse_sensor_replay(&text, &map);
        assert_eq!(r.points.len(), 100);
        assert_eq!(
            r.dropped,
            DropCounters {
                malformed: 1,
                unmapped: 1,
                non_monotone: 1
            }
        );
    }
}
