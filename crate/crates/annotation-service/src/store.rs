//! SQLite-backed task assignment and judgment storage.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use chrono::{DateTime, Duration, Utc};
use factlens_core::annotation::{JudgmentRecord, SummaryContext};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rusqlite::{params, Connection, OptionalExtension, TransactionBehavior};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceConfig {
    pub char_min: usize,
    pub char_max: usize,
    pub lease_minutes: i64,
    pub judgments_per_summary: usize,
    /// Gold items that must be answered exactly to qualify.
    pub qualify_min_correct: usize,
    pub qualify_attempts: u32,
    pub seed: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            char_min: 1000,
            char_max: 2500,
            lease_minutes: 30,
            judgments_per_summary: 3,
            qualify_min_correct: 3,
            qualify_attempts: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Qualification,
    Main,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationTask {
    pub task_id: String,
    pub summary_id: String,
    pub claim: String,
    pub article_text: String,
    pub generated_explanation: String,
    pub phase: Phase,
}

/// Qualification item with its expected binary answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldItem {
    pub task_id: String,
    pub claim: String,
    pub article: String,
    pub explanation: String,
    pub q1: bool,
    pub q2: bool,
    pub q3: bool,
    pub q4: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatorSession {
    pub annotator_id: String,
    pub qualified: bool,
    pub attempts: u32,
    pub locked: bool,
    pub completed_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answers {
    pub q1: bool,
    pub q2: bool,
    pub q3: bool,
    pub q4: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualifyOutcome {
    pub qualified: bool,
    pub correct: usize,
    pub total: usize,
    pub attempts: u32,
    pub locked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub summaries: usize,
    pub judgments: usize,
    pub complete_summaries: usize,
    pub per_annotator: BTreeMap<String, usize>,
    pub records: Vec<JudgmentRecord>,
}

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

struct Inner {
    conn: Connection,
    rng: ChaCha8Rng,
}

pub struct Store {
    inner: Mutex<Inner>,
    config: ServiceConfig,
    clock: Box<dyn Clock>,
}

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS summaries (
    summary_id TEXT PRIMARY KEY,
    claim TEXT NOT NULL,
    verdict TEXT NOT NULL,
    article TEXT NOT NULL,
    explanation TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS gold (
    task_id TEXT PRIMARY KEY,
    claim TEXT NOT NULL,
    article TEXT NOT NULL,
    explanation TEXT NOT NULL,
    q1 INTEGER NOT NULL, q2 INTEGER NOT NULL, q3 INTEGER NOT NULL, q4 INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS annotators (
    annotator_id TEXT PRIMARY KEY,
    qualified INTEGER NOT NULL,
    attempts INTEGER NOT NULL,
    locked INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS assignments (
    task_id TEXT PRIMARY KEY,
    annotator_id TEXT NOT NULL,
    summary_id TEXT NOT NULL REFERENCES summaries(summary_id),
    leased_at INTEGER NOT NULL,
    UNIQUE (annotator_id, summary_id)
);
CREATE TABLE IF NOT EXISTS judgments (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    task_id TEXT NOT NULL UNIQUE,
    summary_id TEXT NOT NULL REFERENCES summaries(summary_id),
    annotator_id TEXT NOT NULL,
    q1 INTEGER NOT NULL, q2 INTEGER NOT NULL, q3 INTEGER NOT NULL, q4 INTEGER NOT NULL,
    quality REAL NOT NULL,
    ts TEXT NOT NULL,
    UNIQUE (summary_id, annotator_id)
);
CREATE TRIGGER IF NOT EXISTS judgments_append_only BEFORE UPDATE ON judgments
BEGIN SELECT RAISE(ABORT, 'judgments are append-only'); END;
CREATE TRIGGER IF NOT EXISTS judgments_no_delete BEFORE DELETE ON judgments
BEGIN SELECT RAISE(ABORT, 'judgments are append-only'); END;
";

fn task_id(summary_id: &str, annotator_id: &str) -> String {
    format!("{summary_id}::{annotator_id}")
}

fn judgment_from_row(row: &rusqlite::Row<'_>) -> rusqlite::Result<(i64, JudgmentRecord)> {
    let ts: String = row.get(8)?;
    let timestamp = DateTime::parse_from_rfc3339(&ts)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| {
            rusqlite::Error::FromSqlConversionFailure(8, rusqlite::types::Type::Text, Box::new(e))
        })?;
    Ok((
        row.get(0)?,
        JudgmentRecord {
            summary_id: row.get(1)?,
            annotator_id: row.get(2)?,
            article_contradiction: row.get(3)?,
            self_contradiction: row.get(4)?,
            hallucination: row.get(5)?,
            convincingness: row.get(6)?,
            overall_quality: row.get(7)?,
            timestamp,
        },
    ))
}

fn count_col(row: &rusqlite::Row<'_>) -> rusqlite::Result<usize> {
    Ok(row.get::<_, i64>(0)? as usize)
}

const JUDGMENT_COLUMNS: &str = "id, summary_id, annotator_id, q1, q2, q3, q4, quality, ts";

impl Store {
    pub fn open(path: impl AsRef<Path>, config: ServiceConfig, clock: Box<dyn Clock>) -> Result<Self> {
        Self::with_connection(Connection::open(path)?, config, clock)
    }

    pub fn in_memory(config: ServiceConfig, clock: Box<dyn Clock>) -> Result<Self> {
        Self::with_connection(Connection::open_in_memory()?, config, clock)
    }

    fn with_connection(conn: Connection, config: ServiceConfig, clock: Box<dyn Clock>) -> Result<Self> {
        conn.pragma_update(None, "journal_mode", "WAL")?;
        conn.pragma_update(None, "foreign_keys", "ON")?;
        conn.execute_batch(SCHEMA)?;
        Ok(Store {
            inner: Mutex::new(Inner {
                conn,
                rng: ChaCha8Rng::seed_from_u64(config.seed),
            }),
            config,
            clock,
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Adds summaries whose article length lies in the configured window.
    /// Returns (added, skipped).
    pub fn load_summaries(&self, summaries: &[SummaryContext]) -> Result<(usize, usize)> {
        let mut inner = self.lock();
        let tx = inner.conn.transaction()?;
        let (mut added, mut skipped) = (0, 0);
        for s in summaries {
            let chars = s.article.chars().count();
            if chars < self.config.char_min || chars > self.config.char_max {
                skipped += 1;
                continue;
            }
            added += tx.execute(
                "INSERT OR IGNORE INTO summaries VALUES (?1, ?2, ?3, ?4, ?5)",
                params![s.summary_id, s.claim, s.verdict, s.article, s.explanation],
            )?;
        }
        tx.commit()?;
        if skipped > 0 {
            tracing::info!(skipped, "summaries outside the article length window");
        }
        Ok((added, skipped))
    }

    pub fn load_gold(&self, gold: &[GoldItem]) -> Result<()> {
        let mut inner = self.lock();
        let tx = inner.conn.transaction()?;
        for g in gold {
            tx.execute(
                "INSERT OR REPLACE INTO gold VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)",
                params![
                    g.task_id,
                    g.claim,
                    g.article,
                    g.explanation,
                    g.q1,
                    g.q2,
                    g.q3,
                    g.q4
                ],
            )?;
        }
        tx.commit()?;
        Ok(())
    }

    fn gold(conn: &Connection) -> Result<Vec<GoldItem>> {
        let mut stmt = conn.prepare(
            "SELECT task_id, claim, article, explanation, q1, q2, q3, q4 FROM gold ORDER BY task_id",
        )?;
        let rows = stmt.query_map([], |r| {
            Ok(GoldItem {
                task_id: r.get(0)?,
                claim: r.get(1)?,
                article: r.get(2)?,
                explanation: r.get(3)?,
                q1: r.get(4)?,
                q2: r.get(5)?,
                q3: r.get(6)?,
                q4: r.get(7)?,
            })
        })?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    /// Creates the session on first contact. Without gold items every
    /// annotator starts qualified.
    fn session(conn: &Connection, annotator: &str) -> Result<AnnotatorSession> {
        if annotator.trim().is_empty() {
            return Err(ServiceError::Validation("annotator id is empty".into()));
        }
        let has_gold: bool = conn.query_row("SELECT EXISTS (SELECT 1 FROM gold)", [], |r| r.get(0))?;
        conn.execute(
            "INSERT OR IGNORE INTO annotators VALUES (?1, ?2, 0, 0)",
            params![annotator, !has_gold],
        )?;
        let (qualified, attempts, locked) = conn.query_row(
            "SELECT qualified, attempts, locked FROM annotators WHERE annotator_id = ?1",
            params![annotator],
            |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?)),
        )?;
        let completed: usize = conn.query_row(
            "SELECT COUNT(*) FROM judgments WHERE annotator_id = ?1",
            params![annotator],
            count_col,
        )?;
        Ok(AnnotatorSession {
            annotator_id: annotator.to_string(),
            qualified,
            attempts,
            locked,
            completed_count: completed,
        })
    }

    pub fn session_of(&self, annotator: &str) -> Result<AnnotatorSession> {
        Self::session(&self.lock().conn, annotator)
    }

    /// Qualification batch for unqualified annotators; otherwise the
    /// annotator's open lease or a fresh random eligible summary.
    pub fn next_task(&self, annotator: &str) -> Result<(Phase, Vec<AnnotationTask>)> {
        let now = self.clock.now().timestamp();
        let expiry = now - Duration::minutes(self.config.lease_minutes).num_seconds();
        let mut guard = self.lock();
        let inner = &mut *guard;
        let tx = inner
            .conn
            .transaction_with_behavior(TransactionBehavior::Immediate)?;
        let session = Self::session(&tx, annotator)?;
        if session.locked {
            return Err(ServiceError::Locked(annotator.to_string()));
        }
        if !session.qualified {
            let tasks = Self::gold(&tx)?
                .into_iter()
                .map(|g| AnnotationTask {
                    summary_id: g.task_id.clone(),
                    task_id: g.task_id,
                    claim: g.claim,
                    article_text: g.article,
                    generated_explanation: g.explanation,
                    phase: Phase::Qualification,
                })
                .collect();
            tx.commit()?;
            return Ok((Phase::Qualification, tasks));
        }
        let open: Option<String> = tx
            .query_row(
                "SELECT a.summary_id FROM assignments a
                 WHERE a.annotator_id = ?1 AND a.leased_at > ?2
                   AND NOT EXISTS (SELECT 1 FROM judgments j WHERE j.task_id = a.task_id)
                 ORDER BY a.leased_at, a.summary_id LIMIT 1",
                params![annotator, expiry],
                |r| r.get(0),
            )
            .optional()?;
        let summary_id = match open {
            Some(id) => Some(id),
            None => {
                let eligible: Vec<String> = {
                    let mut stmt = tx.prepare(
                        "SELECT s.summary_id FROM summaries s
                         WHERE NOT EXISTS (SELECT 1 FROM judgments j
                                           WHERE j.summary_id = s.summary_id AND j.annotator_id = ?1)
                           AND NOT EXISTS (SELECT 1 FROM assignments a
                                           WHERE a.summary_id = s.summary_id AND a.annotator_id = ?1
                                             AND a.leased_at > ?2)
                           AND (SELECT COUNT(*) FROM judgments j WHERE j.summary_id = s.summary_id)
                             + (SELECT COUNT(*) FROM assignments a
                                WHERE a.summary_id = s.summary_id AND a.leased_at > ?2
                                  AND NOT EXISTS (SELECT 1 FROM judgments j WHERE j.task_id = a.task_id))
                             < ?3
                         ORDER BY s.summary_id",
                    )?;
                    let rows = stmt.query_map(
                        params![annotator, expiry, self.config.judgments_per_summary as i64],
                        |r| r.get(0),
                    )?;
                    rows.collect::<rusqlite::Result<_>>()?
                };
                let pick = eligible.choose(&mut inner.rng).cloned();
                if let Some(id) = &pick {
                    tx.execute(
                        "INSERT INTO assignments VALUES (?1, ?2, ?3, ?4)
                         ON CONFLICT (task_id) DO UPDATE SET leased_at = excluded.leased_at",
                        params![task_id(id, annotator), annotator, id, now],
                    )?;
                }
                pick
            }
        };
        let task = match summary_id {
            Some(id) => Some(tx.query_row(
                "SELECT summary_id, claim, article, explanation FROM summaries WHERE summary_id = ?1",
                params![id],
                |r| {
                    let summary_id: String = r.get(0)?;
                    Ok(AnnotationTask {
                        task_id: task_id(&summary_id, annotator),
                        summary_id,
                        claim: r.get(1)?,
                        article_text: r.get(2)?,
                        generated_explanation: r.get(3)?,
                        phase: Phase::Main,
                    })
                },
            )?),
            None => None,
        };
        tx.commit()?;
        Ok((Phase::Main, task.into_iter().collect()))
    }

    /// Stores a judgment for an assigned task. The first submission wins;
    /// later ones fail with a conflict carrying the stored record id.
    pub fn submit(
        &self,
        annotator: &str,
        task: &str,
        answers: Answers,
        quality: f64,
    ) -> Result<(i64, JudgmentRecord)> {
        if !(0.0..=1.0).contains(&quality) || !quality.is_finite() {
            return Err(ServiceError::Validation(format!(
                "quality {quality} outside [0, 1]"
            )));
        }
        let now = self.clock.now();
        let mut guard = self.lock();
        let tx = guard
            .conn
            .transaction_with_behavior(TransactionBehavior::Immediate)?;
        let assignment: Option<(String, String)> = tx
            .query_row(
                "SELECT annotator_id, summary_id FROM assignments WHERE task_id = ?1",
                params![task],
                |r| Ok((r.get(0)?, r.get(1)?)),
            )
            .optional()?;
        let Some((owner, summary_id)) = assignment else {
            return Err(ServiceError::NotFound(format!("task {task}")));
        };
        if owner != annotator {
            return Err(ServiceError::Forbidden(format!(
                "task {task} is assigned to another annotator"
            )));
        }
        let existing: Option<i64> = tx
            .query_row(
                "SELECT id FROM judgments WHERE task_id = ?1",
                params![task],
                |r| r.get(0),
            )
            .optional()?;
        if let Some(id) = existing {
            return Err(ServiceError::Duplicate { record_id: id });
        }
        let count: usize = tx.query_row(
            "SELECT COUNT(*) FROM judgments WHERE summary_id = ?1",
            params![summary_id],
            count_col,
        )?;
        if count >= self.config.judgments_per_summary {
            return Err(ServiceError::Conflict(format!(
                "summary {summary_id} already has {count} judgments"
            )));
        }
        tx.execute(
            "INSERT INTO judgments (task_id, summary_id, annotator_id, q1, q2, q3, q4, quality, ts)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9)",
            params![
                task,
                summary_id,
                annotator,
                answers.q1,
                answers.q2,
                answers.q3,
                answers.q4,
                quality,
                now.to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
            ],
        )?;
        let id = tx.last_insert_rowid();
        let record = tx.query_row(
            &format!("SELECT {JUDGMENT_COLUMNS} FROM judgments WHERE id = ?1"),
            params![id],
            judgment_from_row,
        )?;
        tx.commit()?;
        Ok(record)
    }

    /// Scores qualification answers against gold. Passing needs
    /// `qualify_min_correct` items with all four answers right; failing
    /// `qualify_attempts` times locks the annotator.
    pub fn qualify(&self, annotator: &str, answers: &BTreeMap<String, Answers>) -> Result<QualifyOutcome> {
        let mut guard = self.lock();
        let tx = guard
            .conn
            .transaction_with_behavior(TransactionBehavior::Immediate)?;
        let session = Self::session(&tx, annotator)?;
        let gold = Self::gold(&tx)?;
        if session.locked {
            return Err(ServiceError::Locked(annotator.to_string()));
        }
        if session.qualified {
            tx.commit()?;
            return Ok(QualifyOutcome {
                qualified: true,
                correct: gold.len(),
                total: gold.len(),
                attempts: session.attempts,
                locked: false,
            });
        }
        if let Some(unknown) = answers.keys().find(|k| !gold.iter().any(|g| &g.task_id == *k)) {
            return Err(ServiceError::Validation(format!(
                "{unknown} is not a qualification task"
            )));
        }
        let correct = gold
            .iter()
            .filter(|g| {
                answers
                    .get(&g.task_id)
                    .is_some_and(|a| a.q1 == g.q1 && a.q2 == g.q2 && a.q3 == g.q3 && a.q4 == g.q4)
            })
            .count();
        let qualified = correct >= self.config.qualify_min_correct.min(gold.len());
        let attempts = session.attempts + 1;
        let locked = !qualified && attempts >= self.config.qualify_attempts;
        tx.execute(
            "UPDATE annotators SET qualified = ?2, attempts = ?3, locked = ?4 WHERE annotator_id = ?1",
            params![annotator, qualified, attempts, locked],
        )?;
        tx.commit()?;
        Ok(QualifyOutcome {
            qualified,
            correct,
            total: gold.len(),
            attempts,
            locked,
        })
    }

    pub fn judgments(&self, annotator: Option<&str>) -> Result<Vec<JudgmentRecord>> {
        let inner = self.lock();
        let mut stmt = inner.conn.prepare(&format!(
            "SELECT {JUDGMENT_COLUMNS} FROM judgments
             WHERE ?1 IS NULL OR annotator_id = ?1 ORDER BY id"
        ))?;
        let rows = stmt.query_map(params![annotator], judgment_from_row)?;
        Ok(rows.map(|r| r.map(|(_, j)| j)).collect::<rusqlite::Result<_>>()?)
    }

    pub fn progress(&self, annotator: Option<&str>) -> Result<Progress> {
        let records = self.judgments(annotator)?;
        let inner = self.lock();
        let conn = &inner.conn;
        let summaries: usize = conn.query_row("SELECT COUNT(*) FROM summaries", [], count_col)?;
        let judgments: usize = conn.query_row("SELECT COUNT(*) FROM judgments", [], count_col)?;
        let complete: usize = conn.query_row(
            "SELECT COUNT(*) FROM (SELECT summary_id FROM judgments GROUP BY summary_id HAVING COUNT(*) >= ?1)",
            params![self.config.judgments_per_summary as i64],
            count_col,
        )?;
        let mut stmt = conn.prepare("SELECT annotator_id, COUNT(*) FROM judgments GROUP BY annotator_id")?;
        let per_annotator = stmt
            .query_map([], |r| Ok((r.get(0)?, r.get::<_, i64>(1)? as usize)))?
            .collect::<rusqlite::Result<_>>()?;
        Ok(Progress {
            summaries,
            judgments,
            complete_summaries: complete,
            per_annotator,
            records,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicI64, Ordering};
    use std::sync::Arc;

    struct FakeClock(Arc<AtomicI64>);

    impl Clock for FakeClock {
        fn now(&self) -> DateTime<Utc> {
            DateTime::from_timestamp(self.0.load(Ordering::SeqCst), 0).unwrap()
        }
    }

    fn summary(i: usize) -> SummaryContext {
        SummaryContext {
            summary_id: format!("s{i:02}"),
            claim: format!("claim {i}"),
            verdict: "False.".into(),
            article: "x".repeat(1200),
            explanation: format!("explanation {i}"),
        }
    }

    fn store(n: usize) -> (Store, Arc<AtomicI64>) {
        let t = Arc::new(AtomicI64::new(1_700_000_000));
        let store = Store::in_memory(ServiceConfig::default(), Box::new(FakeClock(t.clone()))).unwrap();
        store
            .load_summaries(&(0..n).map(summary).collect::<Vec<_>>())
            .unwrap();
        (store, t)
    }

    const YES: Answers = Answers {
        q1: true,
        q2: true,
        q3: true,
        q4: true,
    };

    #[test]
    fn article_window_filters_summaries() {
        let (store, _) = store(0);
        let mut short = summary(1);
        short.article = "too short".into();
        assert_eq!(store.load_summaries(&[short, summary(2)]).unwrap(), (1, 1));
    }

    #[test]
    fn open_lease_is_returned_again_until_expiry() {
        let (store, clock) = store(5);
        let (_, first) = store.next_task("a").unwrap();
        let (_, again) = store.next_task("a").unwrap();
        assert_eq!(first, again);
        clock.fetch_add(31 * 60, Ordering::SeqCst);
        // the expired lease no longer pins the annotator
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..5 {
            let (_, t) = store.next_task("a").unwrap();
            seen.insert(t[0].summary_id.clone());
            store.submit("a", &t[0].task_id, YES, 0.5).unwrap();
        }
        assert_eq!(seen.len(), 5);
    }

    #[test]
    fn leases_count_towards_the_cap() {
        let (store, clock) = store(1);
        for a in ["a", "b", "c"] {
            assert_eq!(store.next_task(a).unwrap().1.len(), 1);
        }
        assert!(store.next_task("d").unwrap().1.is_empty());
        clock.fetch_add(31 * 60, Ordering::SeqCst);
        assert_eq!(store.next_task("d").unwrap().1.len(), 1);
    }

    #[test]
    fn first_submission_wins() {
        let (store, _) = store(2);
        let (_, t) = store.next_task("a").unwrap();
        let (id, rec) = store.submit("a", &t[0].task_id, YES, 0.75).unwrap();
        assert_eq!(rec.overall_quality, 0.75);
        let err = store
            .submit("a", &t[0].task_id, Answers { q1: false, ..YES }, 0.1)
            .unwrap_err();
        assert!(matches!(err, ServiceError::Duplicate { record_id } if record_id == id));
        assert_eq!(store.judgments(None).unwrap(), vec![rec]);
    }

    #[test]
    fn validation_and_ownership() {
        let (store, _) = store(2);
        let (_, t) = store.next_task("a").unwrap();
        assert!(matches!(
            store.submit("a", &t[0].task_id, YES, 1.3),
            Err(ServiceError::Validation(_))
        ));
        assert!(matches!(
            store.submit("b", &t[0].task_id, YES, 0.5),
            Err(ServiceError::Forbidden(_))
        ));
        assert!(matches!(
            store.submit("a", "nope", YES, 0.5),
            Err(ServiceError::NotFound(_))
        ));
    }

    #[test]
    fn judgments_cannot_be_rewritten() {
        let (store, _) = store(1);
        let (_, t) = store.next_task("a").unwrap();
        store.submit("a", &t[0].task_id, YES, 0.5).unwrap();
        let inner = store.lock();
        assert!(inner
            .conn
            .execute("UPDATE judgments SET quality = 0", [])
            .is_err());
        assert!(inner.conn.execute("DELETE FROM judgments", []).is_err());
    }

    #[test]
    fn survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.sqlite");
        let record = {
            let store = Store::open(&path, ServiceConfig::default(), Box::new(SystemClock)).unwrap();
            store.load_summaries(&[summary(1)]).unwrap();
            let (_, t) = store.next_task("a").unwrap();
            store.submit("a", &t[0].task_id, YES, 0.25).unwrap().1
        };
        let store = Store::open(&path, ServiceConfig::default(), Box::new(SystemClock)).unwrap();
        assert_eq!(store.judgments(None).unwrap(), vec![record]);
        assert!(store.next_task("a").unwrap().1.is_empty());
    }
}
