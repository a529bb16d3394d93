//! Symbolic state tracker that answers generated questions by reading the
//! story text. It shares no code with the generator, so agreement between
//! the two is a real check on the emitted labels.

use std::collections::HashMap;

use super::Sentence;

#[derive(Default)]
struct State {
    location: HashMap<String, String>,
    holder: HashMap<String, String>,
    lying: HashMap<String, String>,
}

impl State {
    fn read(&mut self, s: &[String]) {
        let words: Vec<&str> = s.iter().map(String::as_str).collect();
        let Some((&actor, rest)) = words.split_first() else { return };
        let Some(&last) = rest.last() else { return };
        match rest {
            [_, "to", "the", _] => {
                self.location.insert(actor.to_string(), last.to_string());
            }
            ["picked", "up", "the", _] | ["got", "the", _] | ["grabbed", "the", _] => {
                self.lying.remove(last);
                self.holder.insert(last.to_string(), actor.to_string());
            }
            ["dropped", "the", _] | ["discarded", "the", _] | ["put", "down", "the", _] => {
                self.holder.remove(last);
                match self.location.get(actor) {
                    Some(loc) => self.lying.insert(last.to_string(), loc.clone()),
                    None => self.lying.remove(last),
                };
            }
            _ => {}
        }
    }

    fn object_location(&self, object: &str) -> Option<String> {
        match self.holder.get(object) {
            Some(person) => self.location.get(person).cloned(),
            None => self.lying.get(object).cloned(),
        }
    }
}

/// Answer to `question` given `story`, or `None` if the question is not one
/// of the generated forms or the story does not determine the answer.
pub fn answer(story: &[Sentence], question: &[String]) -> Option<String> {
    let mut state = State::default();
    for s in story {
        state.read(s);
    }
    let q: Vec<&str> = question.iter().map(String::as_str).collect();
    match q.as_slice() {
        ["where", "is", "the", object] => state.object_location(object),
        ["where", "is", person] => state.location.get(*person).cloned(),
        ["is", person, "in", "the", place] => {
            let at = state.location.get(*person)?;
            Some(if at == place { "yes" } else { "no" }.to_string())
        }
        ["how", "many", "objects", "is", person, "carrying"] => {
            Some(state.holder.values().filter(|h| h == person).count().to_string())
        }
        _ => None,
    }
}
