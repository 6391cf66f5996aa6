use serde::{Deserialize, Serialize};

/// One control sample.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub theta_m: f64,
    pub theta_j: f64,
    pub theta_h: f64,
    pub tau_s: f64,
    pub tau_c: f64,
    pub tau_m: f64,
    pub delta_f: f64,
    pub delta_hat: f64,
    /// Controller torque before observer compensation; not exported.
    #[serde(skip)]
    pub tau_ctrl: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimTrace {
    pub dt: f64,
    pub rows: Vec<TraceRow>,
}

pub const TRACE_HEADER: &str = "t,theta_m,theta_j,theta_h,tau_s,tau_c,tau_m,delta_f,delta_hat";

impl SimTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, f: impl Fn(&TraceRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        wtr.write_record(TRACE_HEADER.split(','))?;
        for r in &self.rows {
            wtr.serialize(r)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Vec<TraceRow>, csv::Error> {
        csv::Reader::from_reader(r).deserialize().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let trace = SimTrace {
            dt: 0.001,
            rows: vec![TraceRow {
                t: 0.1,
                theta_m: 1.0 / 3.0,
                tau_s: -2.5e-17,
                delta_hat: 123456.789,
                tau_ctrl: 9.0,
                ..Default::default()
            }],
        };
        let s = trace.to_csv_string();
        assert!(s.starts_with(TRACE_HEADER));
        let back = SimTrace::read_csv(s.as_bytes()).unwrap();
        let mut expect = trace.rows[0];
        expect.tau_ctrl = 0.0;
        assert_eq!(back, vec![expect]);
    }

    #[test]
    fn empty_trace_has_header() {
        assert_eq!(SimTrace::default().to_csv_string().trim(), TRACE_HEADER);
    }
}
