use std::collections::BTreeMap;
use std::io::Write;

use super::{check_labels, check_len, EvalError};

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    /// Score threshold for each point (`score >= t` is positive); the first
    /// is `+inf`.
    pub thresholds: Vec<f64>,
    pub auc: f64,
}

impl RocCurve {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "threshold,fpr,tpr")?;
        for (t, (f, p)) in self.thresholds.iter().zip(&self.points) {
            writeln!(w, "{t:?},{f:?},{p:?}")?;
        }
        Ok(())
    }
}

/// Threshold sweep over distinct scores, descending. Tied scores move the
/// curve in one diagonal step, so ties contribute half credit to the area.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<RocCurve, EvalError> {
    check_len("labels", scores.len(), labels.len())?;
    check_labels(labels)?;
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(EvalError::NonFinite(i));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![f64::INFINITY];
    let (mut tp, mut fp) = (0usize, 0usize);
    // Twice the area, in units of one positive-negative pair.
    let mut area2 = 0usize;
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        let (mut dtp, mut dfp) = (0, 0);
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] == 1 {
                dtp += 1;
            } else {
                dfp += 1;
            }
            i += 1;
        }
        area2 += dfp * (2 * tp + dtp);
        tp += dtp;
        fp += dfp;
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
        thresholds.push(t);
    }
    Ok(RocCurve {
        points,
        thresholds,
        auc: area2 as f64 / (2 * pos * neg) as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GroupAuc {
    Defined(f64),
    /// The group's rows contain a single class.
    Undefined,
}

impl GroupAuc {
    pub fn value(self) -> Option<f64> {
        match self {
            GroupAuc::Defined(v) => Some(v),
            GroupAuc::Undefined => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupAucTable {
    /// Group name to `(auc, row count)`, sorted by name.
    pub groups: BTreeMap<String, (GroupAuc, usize)>,
    pub overall: f64,
}

impl GroupAucTable {
    /// `group,auc,n`; undefined groups carry the literal `undefined`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["group", "auc", "n"])?;
        for (g, (auc, n)) in &self.groups {
            let a = match auc {
                GroupAuc::Defined(v) => format!("{v:?}"),
                GroupAuc::Undefined => "undefined".to_string(),
            };
            out.write_record([g.as_str(), a.as_str(), n.to_string().as_str()])?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn per_group_auc<S: AsRef<str>>(scores: &[f64], labels: &[u8], groups: &[S]) -> Result<GroupAucTable, EvalError> {
    check_len("groups", scores.len(), groups.len())?;
    let overall = roc_auc(scores, labels)?.auc;
    let mut rows: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        rows.entry(g.as_ref().to_string()).or_default().push(i);
    }
    let mut out = BTreeMap::new();
    for (g, idx) in rows {
        let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        let l: Vec<u8> = idx.iter().map(|&i| labels[i]).collect();
        let auc = match roc_auc(&s, &l) {
            Ok(c) => GroupAuc::Defined(c.auc),
            Err(EvalError::SingleClass) => GroupAuc::Undefined,
            Err(e) => return Err(e),
        };
        out.insert(g, (auc, idx.len()));
    }
    Ok(GroupAucTable { groups: out, overall })
}
