const WH_WORDS: [&str; 9] = ["which", "what", "who", "whom", "whose", "where", "when", "why", "how"];

fn strip_question_mark(s: &str) -> String {
    let t = s.trim_end();
    t.strip_suffix('?').unwrap_or(t).trim_end().to_string()
}

/// Declarative form of a question-answer pair.
///
/// A blank (two or more underscores) is filled with the choice; otherwise the
/// first wh-word is replaced by it. Either way a trailing `?` is dropped. With
/// neither, the question and choice are concatenated.
pub fn make_hypothesis(question: &str, choice: &str) -> String {
    if let Some(start) = question.find("__") {
        let end = question[start..]
            .find(|c| c != '_')
            .map_or(question.len(), |n| start + n);
        let filled = format!("{}{}{}", &question[..start], choice, &question[end..]);
        return strip_question_mark(&filled);
    }
    let mut offset = 0;
    for word in question.split_inclusive(|c: char| !c.is_alphanumeric()) {
        let bare = word.trim_end_matches(|c: char| !c.is_alphanumeric());
        if WH_WORDS.contains(&bare.to_lowercase().as_str()) {
            let end = offset + bare.len();
            let filled = format!("{}{}{}", &question[..offset], choice, &question[end..]);
            return strip_question_mark(&filled);
        }
        offset += word.len();
    }
    format!("{} {}", question.trim_end(), choice)
}
