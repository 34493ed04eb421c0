//! Expected values computed independently (SQLite for relational results,
//! Python's calendar for weekday labels) and frozen here.

use cotvis_core::datastore::Cell;
use cotvis_core::executor::{execute, ExecError};
use cotvis_core::vql::parse_vql;
use cotvis_testkit::fixture_db;

fn rows(db: &str, vql: &str) -> Vec<(String, f64)> {
    let r = execute(&parse_vql(vql).unwrap(), &fixture_db(db)).unwrap();
    r.rows
        .iter()
        .map(|row| (row[0].to_string(), row[1].as_number().unwrap()))
        .collect()
}

fn pairs(v: &[(&str, f64)]) -> Vec<(String, f64)> {
    v.iter().map(|(a, b)| (a.to_string(), *b)).collect()
}

#[test]
fn faculty_rank_counts() {
    assert_eq!(
        rows("university", "VISUALIZE PIE SELECT Rank, COUNT(Rank) FROM Faculty GROUP BY Rank"),
        pairs(&[("Professor", 5.0), ("AssocProf", 3.0), ("AsstProf", 4.0), ("Instructor", 2.0)])
    );
}

#[test]
fn notes_by_weekday() {
    assert_eq!(
        rows(
            "behavior_monitoring",
            "VISUALIZE BAR SELECT date_of_notes, COUNT(date_of_notes) FROM Assessment_Notes BIN date_of_notes BY WEEKDAY"
        ),
        pairs(&[
            ("Saturday", 3.0),
            ("Thursday", 4.0),
            ("Wednesday", 3.0),
            ("Monday", 2.0),
            ("Sunday", 2.0),
            ("Friday", 1.0),
        ])
    );
}

#[test]
fn wine_max_score_by_year_descending() {
    assert_eq!(
        rows("wine", "VISUALIZE LINE SELECT YEAR, MAX(SCORE) FROM WINE GROUP BY YEAR ORDER BY YEAR DESC"),
        pairs(&[
            ("2007", 93.0),
            ("2006", 93.0),
            ("2005", 98.0),
            ("2003", 98.0),
            ("2001", 97.0),
            ("2000", 95.0),
            ("1999", 96.0),
        ])
    );
}

#[test]
fn wine_without_grouping_is_rejected() {
    let q = parse_vql("VISUALIZE LINE SELECT YEAR, MAX(SCORE) FROM WINE ORDER BY YEAR DESC").unwrap();
    assert_eq!(execute(&q, &fixture_db("wine")), Err(ExecError::AggregateWithoutGrouping));
}

#[test]
fn city_counts_sorted_descending_keep_first_occurrence_on_ties() {
    let r = rows(
        "allergy",
        "VISUALIZE BAR SELECT city_code, COUNT(city_code) FROM student GROUP BY city_code ORDER BY COUNT(city_code) DESC",
    );
    assert_eq!(r.len(), 19);
    assert_eq!(
        r[..6],
        pairs(&[("BAL", 4.0), ("PIT", 4.0), ("HKG", 3.0), ("WAS", 3.0), ("PHL", 3.0), ("NYC", 3.0)])[..]
    );
}

#[test]
fn average_age_by_major() {
    let r = rows("university", "VISUALIZE BAR SELECT major, AVG(age) FROM student GROUP BY major");
    let want = [
        (600.0, 19.666666666666668),
        (520.0, 19.75),
        (540.0, 17.5),
        (550.0, 19.428571428571427),
        (100.0, 17.0),
        (50.0, 22.0),
    ];
    assert_eq!(r.len(), want.len());
    for ((m, a), (wm, wa)) in r.iter().zip(want) {
        assert_eq!(m.parse::<f64>().unwrap(), wm);
        assert!((a - wa).abs() < 1e-12, "{m}: {a} vs {wa}");
    }
}

#[test]
fn scalar_aggregates_over_a_column_with_nulls() {
    let db = fixture_db("wine");
    let q = parse_vql("VISUALIZE BAR SELECT SUM(price), COUNT(*) FROM wine").unwrap();
    let r = execute(&q, &db).unwrap();
    assert_eq!(r.rows, vec![vec![Cell::Number(1151.0), Cell::Number(15.0)]]);
    let q = parse_vql("VISUALIZE BAR SELECT AVG(price), COUNT(price) FROM wine").unwrap();
    let r = execute(&q, &db).unwrap();
    assert!((r.rows[0][0].as_number().unwrap() - 82.21428571428571).abs() < 1e-12);
    assert_eq!(r.rows[0][1], Cell::Number(14.0));
}

#[test]
fn join_with_filter() {
    let q = parse_vql(
        "VISUALIZE BAR SELECT COUNT(*), COUNT(student.stuid) FROM student JOIN has_allergy ON student.stuid = has_allergy.stuid WHERE allergy = 'Cat'",
    )
    .unwrap();
    let r = execute(&q, &fixture_db("allergy")).unwrap();
    assert_eq!(r.rows[0][0], Cell::Number(2.0));
}
