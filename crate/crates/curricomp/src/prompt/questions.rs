//! Guided question sets for the two-stage extraction pipeline.
//!
//! Each curriculum document type maps to exactly one question set. The
//! questions probe the pedagogical components that competency inference
//! hinges on: content focus, target knowledge and skills, learning tasks,
//! delivery format, and assessment.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::corpus::DocumentType;

/// Which of the three question sets a document type uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionSetKey {
    CourseDescription,
    LearningObjectives,
    LearningActivities,
}

/// One guided question with its short label.
///
/// Labels key the extraction answers, so they must be unique within a set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuidedQuestion {
    pub label: String,
    pub text: String,
}

/// An ordered set of guided questions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionSet {
    pub set_key: QuestionSetKey,
    pub questions: Vec<GuidedQuestion>,
}

impl QuestionSet {
    pub fn labels(&self) -> Vec<&str> {
        self.questions.iter().map(|q| q.label.as_str()).collect()
    }
}

fn question(label: &str, text: &str) -> GuidedQuestion {
    GuidedQuestion {
        label: label.to_string(),
        text: text.to_string(),
    }
}

fn course_description_set() -> &'static QuestionSet {
    static SET: OnceLock<QuestionSet> = OnceLock::new();
    SET.get_or_init(|| QuestionSet {
        set_key: QuestionSetKey::CourseDescription,
        questions: vec![
            question("Course focus", "What is the primary content focus of the course?"),
            question(
                "Core knowledge and skills",
                "What key knowledge and skills are emphasized in the course?",
            ),
            question(
                "Primary learning tasks",
                "What major tasks are students expected to complete?",
            ),
            question(
                "Instructional format",
                "How is the course delivered (e.g., lecture, discussion, project-based, hybrid)?",
            ),
            question(
                "Assessment approach",
                "How is student learning evaluated in the course?",
            ),
        ],
    })
}

fn learning_objectives_set() -> &'static QuestionSet {
    static SET: OnceLock<QuestionSet> = OnceLock::new();
    SET.get_or_init(|| QuestionSet {
        set_key: QuestionSetKey::LearningObjectives,
        questions: vec![
            question(
                "Target knowledge",
                "What domain-specific knowledge are students expected to acquire?",
            ),
            question("Target skills", "What skills are students expected to develop?"),
            question(
                "Expected performance",
                "What tasks or capabilities should students be able to demonstrate upon course completion?",
            ),
        ],
    })
}

fn learning_activities_set() -> &'static QuestionSet {
    static SET: OnceLock<QuestionSet> = OnceLock::new();
    SET.get_or_init(|| QuestionSet {
        set_key: QuestionSetKey::LearningActivities,
        questions: vec![
            question("Activity summary", "What is the learning activity (one sentence)?"),
            question(
                "Activity type",
                "What type of activity is it (e.g., discussion, assignment, project, lab)?",
            ),
            question(
                "Target knowledge and skill",
                "What knowledge and skill do the activity address?",
            ),
            question(
                "Student deliverable",
                "What is the expected student output for this activity?",
            ),
            question(
                "Assessment method",
                "How is performance on this activity evaluated?",
            ),
        ],
    })
}

/// The guided question set for a document type.
///
/// Course descriptions (concise and detailed) share one set; learning
/// objectives have their own; instructional schedules use the learning
/// activities set.
pub fn select_question_set(doc_type: DocumentType) -> &'static QuestionSet {
    match doc_type {
        DocumentType::ConciseCourseDescription | DocumentType::DetailedCourseDescription => {
            course_description_set()
        }
        DocumentType::LearningObjective => learning_objectives_set(),
        DocumentType::LearningActivityContent | DocumentType::InstructionalSchedule => {
            learning_activities_set()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn learning_objective_set_has_three_questions() {
        let qs = select_question_set(DocumentType::LearningObjective);
        assert_eq!(qs.questions.len(), 3);
        assert_eq!(qs.questions[0].label, "Target knowledge");
    }

    #[test]
    fn instructional_schedule_uses_learning_activities_set() {
        let qs = select_question_set(DocumentType::InstructionalSchedule);
        assert_eq!(qs.set_key, QuestionSetKey::LearningActivities);
        assert_eq!(qs.questions.len(), 5);
    }

    #[test]
    fn course_description_set_covers_assessment() {
        let qs = select_question_set(DocumentType::ConciseCourseDescription);
        assert_eq!(qs.set_key, QuestionSetKey::CourseDescription);
        assert_eq!(qs.questions.len(), 5);
        assert!(qs.labels().contains(&"Assessment approach"));
    }

    #[test]
    fn both_description_types_share_a_set() {
        let a = select_question_set(DocumentType::ConciseCourseDescription);
        let b = select_question_set(DocumentType::DetailedCourseDescription);
        assert_eq!(a, b);
    }

    #[test]
    fn labels_are_unique_within_each_set() {
        for dt in DocumentType::ALL {
            let qs = select_question_set(dt);
            let mut labels = qs.labels();
            labels.sort();
            labels.dedup();
            assert_eq!(labels.len(), qs.questions.len());
        }
    }
}
