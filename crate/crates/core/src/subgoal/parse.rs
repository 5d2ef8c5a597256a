use crate::envs::MazeLayout;
use crate::{Error, Result};

/// End (exclusive) of the balanced bracket group opening at `start`,
/// ignoring brackets inside JSON strings.
fn balanced_end(bytes: &[u8], start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'[' => depth += 1,
            b']' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// First balanced `[...]` in `text` that decodes as a non-empty array of
/// non-empty string arrays.
pub fn first_array_of_arrays(text: &str) -> Option<Vec<Vec<String>>> {
    let bytes = text.as_bytes();
    let mut from = 0;
    while let Some(offset) = text[from..].find('[') {
        let start = from + offset;
        if let Some(end) = balanced_end(bytes, start) {
            if let Ok(seqs) = serde_json::from_str::<Vec<Vec<String>>>(&text[start..end]) {
                if !seqs.is_empty() && seqs.iter().all(|s| !s.is_empty()) {
                    return Some(seqs);
                }
            }
        }
        from = start + 1;
    }
    None
}

/// Extracts landmark sequences from a provider reply, checks every name
/// against the layout and drops exact duplicates (first occurrence wins).
pub fn parse_sequences(raw: &str, layout: &MazeLayout) -> Result<Vec<Vec<String>>> {
    let seqs = first_array_of_arrays(raw).ok_or(Error::Unparseable)?;
    let mut out: Vec<Vec<String>> = Vec::with_capacity(seqs.len());
    for seq in seqs {
        if let Some(bad) = seq.iter().find(|n| layout.landmark_index(n).is_none()) {
            return Err(Error::UnknownLandmark(bad.clone()));
        }
        if !out.contains(&seq) {
            out.push(seq);
        }
    }
    Ok(out)
}

/// Lossy UTF-8 front end for arbitrary bytes.
pub fn parse_sequences_bytes(raw: &[u8], layout: &MazeLayout) -> Result<Vec<Vec<String>>> {
    parse_sequences(&String::from_utf8_lossy(raw), layout)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::builtin_layout;
    use proptest::prelude::*;

    fn four_rooms() -> MazeLayout {
        builtin_layout("four_rooms").unwrap()
    }

    #[test]
    fn plain_json() {
        let got = parse_sequences(r#"[["key","lock"]]"#, &four_rooms()).unwrap();
        assert_eq!(got, vec![vec!["key".to_string(), "lock".to_string()]]);
    }

    #[test]
    fn prose_around_json() {
        let raw = "Sure! First [note] the plan:\n```json\n[[\"key\", \"lock\"]]\n```\nGood luck [[1]].";
        let got = parse_sequences(raw, &four_rooms()).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0], vec!["key", "lock"]);
    }

    #[test]
    fn brackets_inside_strings_are_ignored() {
        assert_eq!(
            first_array_of_arrays(r#"x [["a]", "b"]] y"#),
            Some(vec![vec!["a]".to_string(), "b".to_string()]])
        );
        assert_eq!(
            first_array_of_arrays(r#"[["q\"]"]]"#),
            Some(vec![vec!["q\"]".to_string()]])
        );
    }

    #[test]
    fn unknown_landmark_is_named() {
        let layout = builtin_layout("point_maze").unwrap();
        match parse_sequences(r#"[["key","door_of_narnia"]]"#, &layout) {
            Err(Error::UnknownLandmark(n)) => assert_eq!(n, "door_of_narnia"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unparseable() {
        for raw in ["", "no json here", "[]", "[[]]", "[1, 2]", "[[\"key\"", "]]"] {
            assert!(matches!(parse_sequences(raw, &four_rooms()), Err(Error::Unparseable)), "{raw}");
        }
    }

    #[test]
    fn duplicates_dropped_in_order() {
        let raw = r#"[["lock"],["key","lock"],["lock"]]"#;
        let got = parse_sequences(raw, &four_rooms()).unwrap();
        assert_eq!(got, vec![vec!["lock".to_string()], vec!["key".into(), "lock".into()]]);
    }

    proptest! {
        #[test]
        fn total_on_arbitrary_bytes(raw in proptest::collection::vec(any::<u8>(), 0..256)) {
            let _ = parse_sequences_bytes(&raw, &four_rooms());
        }

        #[test]
        fn total_on_bracket_soup(raw in "[\\[\\]\",a-z \\\\]{0,64}") {
            let _ = parse_sequences(&raw, &four_rooms());
        }
    }
}
