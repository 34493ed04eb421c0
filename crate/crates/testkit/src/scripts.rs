//! Scripted model fixtures for the worked cases.

use cotvis_core::model::ScriptedClient;
use serde::Deserialize;

#[derive(Debug, Clone, Copy)]
pub struct Case {
    pub name: &'static str,
    pub db_id: &'static str,
    json: &'static str,
}

#[derive(Deserialize)]
struct Header {
    question: String,
}

impl Case {
    pub fn question(&self) -> String {
        serde_json::from_str::<Header>(self.json).expect("fixture header").question
    }

    pub fn client(&self) -> ScriptedClient {
        ScriptedClient::from_json(self.json).expect("fixture parses")
    }

    pub fn json(&self) -> &'static str {
        self.json
    }
}

/// Bar chart of students per city; self correction adds a descending sort.
pub const CASE1: Case = Case {
    name: "case1_allergy",
    db_id: "allergy",
    json: include_str!("../data/scripts/case1_allergy.json"),
};

/// Scatter of age by major; a manual preference turns it into average age per major.
pub const CASE2: Case = Case {
    name: "case2_university",
    db_id: "university",
    json: include_str!("../data/scripts/case2_university.json"),
};

/// Ends in an aggregate without GROUP BY on both S5 attempts.
pub const CASE3: Case = Case {
    name: "case3_wine",
    db_id: "wine",
    json: include_str!("../data/scripts/case3_wine.json"),
};

pub const CASE1_SELF_NODE: &str = "S4/SORT_DIRECTION";
pub const CASE2_MANUAL_NODE: &str = "S1/CHART_TYPE";
pub const CASE2_PREFERENCE: &str = "Show the average age of each major";
pub const CASE1_TOP_TEN_PREFERENCE: &str = "limit to top 10";

/// Screening and reasoning answers for the planted corpus.
pub const CORPUS_SCRIPT: &str = include_str!("../data/scripts/corpus.json");

pub fn corpus_client() -> ScriptedClient {
    ScriptedClient::from_json(CORPUS_SCRIPT).expect("fixture parses")
}
