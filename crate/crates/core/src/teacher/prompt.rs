use super::Segment;
use crate::error::{Error, Result};

/// Placeholder in [`RatingPrompt::rating_template`] that receives the
/// analysis text returned by the first round trip.
pub const ANALYSIS_SLOT: &str = "{analysis}";

/// The two prompts of one rating query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatingPrompt {
    pub analysis: String,
    pub rating_template: String,
    /// Number of ratings the reply must contain.
    pub expected_count: usize,
}

impl RatingPrompt {
    pub fn rating_prompt(&self, analysis: &str) -> String {
        self.rating_template.replacen(ANALYSIS_SLOT, analysis, 1)
    }
}

fn describe(name: &str) -> Option<&'static str> {
    match name.to_ascii_lowercase().as_str() {
        "bad" => Some("The task is not completed."),
        "average" => Some(
            "The task is partially completed, or the transition is critical for achieving \
             the goal, but falls short of completion.",
        ),
        "good" => Some("The task is completed."),
        _ => None,
    }
}

fn task_text(segment: &Segment) -> &str {
    if segment.task_description.is_empty() {
        "the given task"
    } else {
        &segment.task_description
    }
}

/// Builds the analysis prompt and the rating template for a segment.
///
/// Single-step segments use the single-observation template. Longer segments
/// list the executed actions and ask for one rating per transition between
/// consecutive observations, as a bracketed list.
pub fn build_rating_prompt(
    segment: &Segment,
    n_classes: usize,
    class_names: &[String],
) -> Result<RatingPrompt> {
    if class_names.len() != n_classes {
        return Err(Error::Config(format!(
            "{} class names for {} classes",
            class_names.len(),
            n_classes
        )));
    }
    let task = task_text(segment);
    let categories = format!("[{}]", class_names.join(", "));

    if segment.len() <= 1 {
        let analysis = format!(
            "You will be presented an observation of an agent performing the task: {task}. \
             Please focus on the target in the task and carefully analyze the observation \
             in terms of completing the task."
        );
        let rating_template = format!(
            "{ANALYSIS_SLOT}\n\nFrom the above analyses, based on this rating category: \
             {categories}, how would you rate this observation in terms of completing task: \
             {task}?\nPlease reply a single line with the rating in brackets, for example: \
             [{}].",
            class_names[0]
        );
        return Ok(RatingPrompt {
            analysis,
            rating_template,
            expected_count: 1,
        });
    }

    let n_obs = segment.observations.len().max(segment.len());
    let transitions = segment.rated_transitions();
    let actions = segment
        .action_names
        .iter()
        .take(transitions)
        .map(String::as_str)
        .collect::<Vec<_>>()
        .join(", ");
    let analysis = format!(
        "You will be presented with a sequence of observations containing a segment of the \
         trajectory of an agent performing the task: {task}. The trajectory segment contains \
         {n_obs} time steps of visual observations, corresponding to {transitions} intermediate \
         actions.\n\nThe intermediate actions are: {actions}.\n\nPlease analyze the differences \
         between consecutive time steps, reply the changes between consecutive time steps in \
         each line explicitly. For example:\n- Timestep 0 to 1 (Executed action): Your \
         analysis\n- Timestep 1 to 2 (Executed action): Your analysis\n- and so on\nThe task \
         is to {task}, analyze this segment in terms of completing the task."
    );
    let mut rubric = String::new();
    for name in class_names {
        match describe(name) {
            Some(d) => rubric.push_str(&format!("- {name}: {d}\n")),
            None => rubric.push_str(&format!("- {name}\n")),
        }
    }
    let rating_template = format!(
        "{ANALYSIS_SLOT}\n\nYou are tasked with rating the RL agent's performance in completing \
         a task: {task}. From the above analyses for {transitions} transitions, based on this \
         rating category: {categories}, where:\n{rubric}\nHow would you rate each transition in \
         terms of completing task?\nPlease reply a single line of list of ratings for \
         {transitions} transitions.\n(For example: [rating of transition 1, rating of \
         transition 2, ..., rating of transition {transitions}])."
    );
    Ok(RatingPrompt {
        analysis,
        rating_template,
        expected_count: transitions,
    })
}
