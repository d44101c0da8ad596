//! Scored demonstrations and their JSON-lines file format.

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridworld::{Control, EncodedState, GridError, GridState};
use crate::word::{Symbol, Word};

/// One demonstrated episode `(x_{0:T}, u_{0:T}, s)`.
///
/// `states[t]` is the state before `controls[t]` is applied and `word[t]` is
/// its label; `terminal` is the state after the last control.
#[derive(Clone, Debug, PartialEq)]
pub struct Demonstration {
    pub states: Vec<GridState>,
    pub terminal: GridState,
    pub controls: Vec<Control>,
    pub word: Word,
    pub score: f64,
    pub env_seed: u64,
}

impl Demonstration {
    /// Roll `controls` from `start`, recording states and labels.
    pub fn from_rollout(start: GridState, controls: Vec<Control>, score: f64, env_seed: u64) -> Self {
        let mut states = Vec::with_capacity(controls.len());
        let mut word = Word::empty();
        let mut x = start;
        for &u in &controls {
            let (y, sigma) = x.transition(u);
            states.push(x);
            word.push(sigma);
            x = y;
        }
        Demonstration { states, terminal: x, controls, word, score, env_seed }
    }

    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }

    pub fn initial_state(&self) -> &GridState {
        self.states.first().unwrap_or(&self.terminal)
    }

    /// `x_0 … x_T` followed by the terminal state.
    pub fn all_states(&self) -> impl Iterator<Item = &GridState> {
        self.states.iter().chain(std::iter::once(&self.terminal))
    }
}

#[derive(Debug, Error)]
pub enum DemoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: parse error: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("line {line}: {reason}")]
    Invalid { line: usize, reason: String },
    #[error("line {line}: bad state: {source}")]
    State { line: usize, source: GridError },
}

#[derive(Serialize, Deserialize)]
struct DemoLine {
    env_seed: u64,
    score: f64,
    controls: Vec<u8>,
    word: Vec<u8>,
    /// Pre-transition states followed by the terminal state.
    states: Vec<EncodedState>,
}

fn to_line(d: &Demonstration) -> DemoLine {
    DemoLine {
        env_seed: d.env_seed,
        score: d.score,
        controls: d.controls.iter().map(|u| *u as u8).collect(),
        word: d.word.symbols().iter().map(|s| s.bits()).collect(),
        states: d.all_states().map(GridState::encode).collect(),
    }
}

fn from_line(line: usize, raw: DemoLine) -> Result<Demonstration, DemoError> {
    let invalid = |reason: String| DemoError::Invalid { line, reason };
    if raw.controls.len() != raw.word.len() {
        return Err(invalid(format!(
            "{} controls but {} word symbols",
            raw.controls.len(),
            raw.word.len()
        )));
    }
    if raw.states.len() != raw.controls.len() + 1 {
        return Err(invalid(format!(
            "{} states for {} controls (expected one more state than controls)",
            raw.states.len(),
            raw.controls.len()
        )));
    }
    if !raw.score.is_finite() {
        return Err(invalid("score is not finite".into()));
    }
    let controls = raw
        .controls
        .iter()
        .map(|&c| Control::from_id(c).ok_or_else(|| invalid(format!("unknown control id {c}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let mut states = raw
        .states
        .iter()
        .map(|e| GridState::decode(e).map_err(|source| DemoError::State { line, source }))
        .collect::<Result<Vec<_>, _>>()?;
    let terminal = states.pop().expect("at least one state");
    Ok(Demonstration {
        states,
        terminal,
        controls,
        word: raw.word.iter().map(|&b| Symbol::from_bits(b)).collect(),
        score: raw.score,
        env_seed: raw.env_seed,
    })
}

pub fn write_demos<W: Write>(mut out: W, demos: &[Demonstration]) -> Result<(), DemoError> {
    for d in demos {
        let json = serde_json::to_string(&to_line(d)).expect("demo line serializes");
        out.write_all(json.as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_demos<R: BufRead>(input: R) -> Result<Vec<Demonstration>, DemoError> {
    let mut demos = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: DemoLine = serde_json::from_str(&line)
            .map_err(|source| DemoError::Parse { line: line_no, source })?;
        demos.push(from_line(line_no, raw)?);
    }
    Ok(demos)
}

pub fn save_demos(path: impl AsRef<Path>, demos: &[Demonstration]) -> Result<(), DemoError> {
    let mut file = io::BufWriter::new(fs::File::create(path)?);
    write_demos(&mut file, demos)?;
    file.flush()?;
    Ok(())
}

pub fn load_demos(path: impl AsRef<Path>) -> Result<Vec<Demonstration>, DemoError> {
    read_demos(BufReader::new(fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::{generate_env, TaskSpec};

    fn two_step() -> Demonstration {
        let x = generate_env(&TaskSpec::doorkey(), 1);
        Demonstration::from_rollout(x, vec![Control::TurnLeft, Control::Forward], 0.0, 1)
    }

    #[test]
    fn roundtrip_two_step_demo() {
        let d = two_step();
        let mut buf = Vec::new();
        write_demos(&mut buf, &[d.clone(), d.clone()]).unwrap();
        let back = read_demos(buf.as_slice()).unwrap();
        assert_eq!(back, vec![d.clone(), d]);
        // byte-stable
        let mut again = Vec::new();
        write_demos(&mut again, &back).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn empty_file_is_empty_set() {
        assert!(read_demos(&b""[..]).unwrap().is_empty());
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let mut line = to_line(&two_step());
        line.word.pop();
        let text = format!("{}\n", serde_json::to_string(&line).unwrap());
        match read_demos(text.as_bytes()) {
            Err(DemoError::Invalid { line: 1, .. }) => {}
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_line_names_line_number() {
        let mut buf = Vec::new();
        write_demos(&mut buf, &[two_step()]).unwrap();
        buf.extend_from_slice(b"{not json}\n");
        match read_demos(buf.as_slice()) {
            Err(DemoError::Parse { line: 2, .. }) => {}
            other => panic!("expected parse error on line 2, got {other:?}"),
        }
    }

    #[test]
    fn labels_match_rollout() {
        let d = two_step();
        assert_eq!(d.states.len(), 2);
        for t in 0..d.len() {
            assert_eq!(d.states[t].label(d.controls[t]), d.word.symbols()[t]);
        }
    }
}
