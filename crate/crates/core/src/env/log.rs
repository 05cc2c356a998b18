//! Episode logs: one CSV row per control step, header comments carry the
//! seed, terrain spec and randomization draw. Consumers parse by column
//! name.

use std::io::{BufRead, Write};

use thiserror::Error;

use super::rewards::TERM_NAMES;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

#[derive(Debug, Clone)]
pub struct LogRow {
    pub time: f64,
    pub base_pos: [f64; 3],
    pub base_quat: [f64; 4],
    pub command: [f64; 3],
    pub rewards: Vec<f64>,
    /// NaN encodes flight / degenerate frames on disk.
    pub zmp_distance: Option<f64>,
    pub contact: [bool; 2],
}

#[derive(Debug, Clone, Default)]
pub struct EpisodeLog {
    /// Header metadata, in emission order.
    pub meta: Vec<(String, String)>,
    pub rows: Vec<LogRow>,
}

impl EpisodeLog {
    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "# zmlloco_episode_log v1")?;
        for (k, v) in &self.meta {
            writeln!(w, "# {k}={v}")?;
        }
        let mut header = vec![
            "time".to_string(),
            "base_x".into(),
            "base_y".into(),
            "base_z".into(),
            "quat_w".into(),
            "quat_x".into(),
            "quat_y".into(),
            "quat_z".into(),
            "cmd_vx".into(),
            "cmd_vy".into(),
            "cmd_wyaw".into(),
        ];
        header.extend(TERM_NAMES.iter().map(|n| format!("rew_{n}")));
        header.push("zmp_distance".into());
        header.push("contact_left".into());
        header.push("contact_right".into());
        writeln!(w, "{}", header.join(","))?;
        for r in &self.rows {
            let mut fields: Vec<String> = Vec::with_capacity(header.len());
            fields.push(format!("{}", r.time));
            fields.extend(r.base_pos.iter().map(|v| format!("{v}")));
            fields.extend(r.base_quat.iter().map(|v| format!("{v}")));
            fields.extend(r.command.iter().map(|v| format!("{v}")));
            fields.extend(r.rewards.iter().map(|v| format!("{v}")));
            fields.push(format!("{}", r.zmp_distance.unwrap_or(f64::NAN)));
            fields.push(format!("{}", r.contact[0] as u8));
            fields.push(format!("{}", r.contact[1] as u8));
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn parse_csv(r: impl BufRead) -> Result<EpisodeLog, LogError> {
        let mut meta = Vec::new();
        let mut rows = Vec::new();
        let mut columns: Option<Vec<String>> = None;
        for (i, line) in r.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                if let Some((k, v)) = comment.trim().split_once('=') {
                    meta.push((k.trim().to_string(), v.trim().to_string()));
                }
                continue;
            }
            match &columns {
                None => {
                    columns = Some(trimmed.split(',').map(|s| s.trim().to_string()).collect());
                }
                Some(cols) => {
                    let fields: Vec<&str> = trimmed.split(',').collect();
                    if fields.len() != cols.len() {
                        return Err(LogError::Malformed {
                            line: line_no,
                            message: format!(
                                "expected {} fields, found {}",
                                cols.len(),
                                fields.len()
                            ),
                        });
                    }
                    let get = |name: &str| -> Result<f64, LogError> {
                        let idx = cols.iter().position(|c| c == name).ok_or_else(|| {
                            LogError::Malformed {
                                line: line_no,
                                message: format!("missing column '{name}'"),
                            }
                        })?;
                        fields[idx].parse::<f64>().map_err(|_| LogError::Malformed {
                            line: line_no,
                            message: format!("bad value '{}' in column '{name}'", fields[idx]),
                        })
                    };
                    let zmp = get("zmp_distance")?;
                    let mut rewards = Vec::with_capacity(TERM_NAMES.len());
                    for name in TERM_NAMES {
                        // Older or trimmed logs may omit reward columns.
                        let col = format!("rew_{name}");
                        if cols.iter().any(|c| *c == col) {
                            rewards.push(get(&col)?);
                        }
                    }
                    rows.push(LogRow {
                        time: get("time")?,
                        base_pos: [get("base_x")?, get("base_y")?, get("base_z")?],
                        base_quat: [
                            get("quat_w")?,
                            get("quat_x")?,
                            get("quat_y")?,
                            get("quat_z")?,
                        ],
                        command: [get("cmd_vx")?, get("cmd_vy")?, get("cmd_wyaw")?],
                        rewards,
                        zmp_distance: if zmp.is_nan() { None } else { Some(zmp) },
                        contact: [get("contact_left")? != 0.0, get("contact_right")? != 0.0],
                    });
                }
            }
        }
        Ok(EpisodeLog { meta, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_row(t: f64, zmp: Option<f64>) -> LogRow {
        LogRow {
            time: t,
            base_pos: [0.1, 0.2, 0.95],
            base_quat: [1.0, 0.0, 0.0, 0.0],
            command: [0.5, 0.0, -0.1],
            rewards: vec![0.25; TERM_NAMES.len()],
            zmp_distance: zmp,
            contact: [true, false],
        }
    }

    #[test]
    fn round_trip_preserves_rows_and_meta() {
        let log = EpisodeLog {
            meta: vec![
                ("seed".into(), "42".into()),
                ("terrain_kind".into(), "narrow_flat".into()),
            ],
            rows: vec![sample_row(0.02, Some(0.03)), sample_row(0.04, None)],
        };
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let back = EpisodeLog::parse_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.meta_value("seed"), Some("42"));
        assert_eq!(back.rows.len(), 2);
        assert_eq!(back.rows[0].zmp_distance, Some(0.03));
        assert_eq!(back.rows[1].zmp_distance, None);
        assert_eq!(back.rows[0].rewards.len(), TERM_NAMES.len());
        assert!(back.rows[0].contact[0] && !back.rows[0].contact[1]);
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let text = "# zmlloco_episode_log v1\n# seed=1\ntime,base_x\n0.02,not_a_number\n";
        match EpisodeLog::parse_csv(std::io::Cursor::new(text)) {
            Err(LogError::Malformed { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected malformed error, got {other:?}"),
        }
    }

    #[test]
    fn empty_log_parses_to_empty_trace() {
        let log = EpisodeLog::parse_csv(std::io::Cursor::new("")).unwrap();
        assert!(log.rows.is_empty());
        assert!(log.meta.is_empty());
    }
}
