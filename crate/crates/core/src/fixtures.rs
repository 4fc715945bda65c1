//! Hand-built fixtures. `solar_panel` is the renewable-energy case: ten facts, three of
//! which bridge "natural-03" in the question to the "panel" choice.

use crate::corpus::{Fact, FactId};
use crate::trainer::QaInstance;

pub struct Fixture {
    pub facts: Vec<Fact>,
    pub instance: QaInstance,
}

const QUESTION: &str = "A person wants to be able to have more natural power in their home. \
They choose to cease using a traditional electric company to source this electricity, \
and so decide to install";

const FACTS: [(&str, &str, &str); 10] = [
    (
        "1",
        "A solar panel converts sunlight into electricity.",
        "(c / convert-01 :ARG0 (p / panel :mod (s / solar)) :ARG1 (s2 / sunlight) :ARG2 (e / electricity))",
    ),
    (
        "2",
        "Solar energy is a renewable resource.",
        "(r / resource :ARG1-of (r2 / renew-01) :domain (e / energy :mod (s / solar)))",
    ),
    (
        "3",
        "Such renewable resources are called, natural resources.",
        "(c / call-01 :ARG1 (r / resource :ARG1-of (r2 / renew-01)) :ARG2 (r3 / resource :ARG1-of (n / natural-03)))",
    ),
    (
        "4",
        "Iron nails are attracted by a magnet.",
        "(a / attract-01 :ARG0 (m / magnet) :ARG1 (n / nail :consist-of (i / iron)))",
    ),
    ("5", "Rain falls from clouds.", "(f / fall-01 :ARG1 (r / rain) :source (c / cloud))"),
    (
        "6",
        "Plants need water to grow.",
        "(n / need-01 :ARG0 (p / plant) :ARG1 (w / water) :purpose (g / grow-01 :ARG1 p))",
    ),
    (
        "7",
        "A thermometer measures temperature.",
        "(m / measure-01 :ARG0 (t / thermometer) :ARG1 (t2 / temperature))",
    ),
    ("8", "Ice melts when heated.", "(m / melt-01 :ARG1 (i / ice) :condition (h / heat-01 :ARG1 i))"),
    (
        "9",
        "Owls hunt mice at night.",
        "(h / hunt-01 :ARG0 (o / owl) :ARG1 (m / mouse) :time (n / night))",
    ),
    ("10", "Wind moves sailboats.", "(m / move-01 :ARG0 (w / wind) :ARG1 (b / boat :mod (s / sail)))"),
];

const CHOICES: [(&str, &str); 4] = [
    ("sun grafts", "(g / graft :mod (s / sun))"),
    ("sunlight shields", "(s / shield-01 :ARG1 (l / light :mod (s2 / sun)))"),
    ("panels collecting sunlight", "(p3 / panel :ARG0-of (c / collect-01 :ARG1 (s / sunlight)))"),
    ("solar bees", "(b / bee :mod (s / sun))"),
];

fn hypothesis_amr(object: &str) -> String {
    format!("(i / install-01 :ARG0 (p / person :ARG0-of (h / have-03 :ARG1 (p2 / power :mod (n / natural-03)))) :ARG1 {object})")
}

/// The solar-panel question with gold choice C and gold chain [3, 2, 1].
pub fn solar_panel() -> Fixture {
    let facts = FACTS
        .iter()
        .map(|(id, text, amr)| Fact {
            id: FactId::new(*id),
            text: text.to_string(),
            amr: Some(amr.to_string()),
        })
        .collect();
    let instance = QaInstance {
        id: "solar_panel".into(),
        question: QUESTION.into(),
        choices: CHOICES.iter().map(|(c, _)| c.to_string()).collect(),
        gold_idx: 2,
        gold_chain: Some(["3", "2", "1"].map(FactId::new).to_vec()),
        hypothesis_amrs: CHOICES.iter().map(|(_, amr)| hypothesis_amr(amr)).collect(),
    };
    Fixture { facts, instance }
}
