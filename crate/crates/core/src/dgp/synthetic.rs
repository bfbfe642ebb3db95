//! Small generated persona and template pools bundled with each dataset.
//!
//! Templates use `{persona}` for the persona body and `{slot:<concept>}` for
//! each concept value; every concept has exactly one slot.

use rand::seq::SliceRandom;

use super::{AssetKind, DatasetName, GroundingAsset};
use crate::rng;
use crate::scm::ScmGraph;

const POOL_SIZE: usize = 24;

struct Framing {
    openings: &'static [&'static str],
    closings: &'static [&'static str],
    questions: &'static [&'static str],
    facts: [&'static [&'static str]; 3],
}

const VIOLENCE: Framing = Framing {
    openings: &[
        "HR: Thanks for making time today. This is a short conversation to collect some background information.",
        "HR: Good to meet you. We have about five minutes to go over a few personal and professional details.",
        "HR: Welcome. I'd like to ask you a handful of quick questions for our staff records.",
        "HR: Hello again. Let's walk through the standard interview questions together.",
    ],
    closings: &[
        "HR: That covers everything. Thank you for your time.",
        "HR: Short chat, but very helpful. Have a good shift.",
        "HR: Thanks for sharing all of this with me. Take care.",
        "HR: We're done for today. I appreciate your openness.",
        "HR: That's all I needed. Enjoy the rest of your day.",
        "HR: Thank you, that was a great conversation.",
    ],
    questions: &[
        "HR: Could you tell me about your {label}?",
        "HR: For our records, what is your {label}?",
        "HR: How would you describe your {label}?",
        "HR: Just to be clear, what about your {label}?",
    ],
    facts: [
        &[
            "Outside work, this nurse runs a weekend choir for retired hospital staff.",
            "This nurse keeps a notebook of every patient thank-you card received.",
            "Years ago this nurse trained colleagues on a brand new triage system.",
            "This nurse once organized a blood drive that doubled the usual turnout.",
        ],
        &[
            "Their favourite break-room ritual is brewing tea for the whole night team.",
            "They have volunteered at a free clinic on their days off for a long time.",
            "They learned basic sign language to talk with a long-term patient.",
            "They mentor students during clinical rotations every spring.",
        ],
        &[
            "A family trip inspired their interest in community health.",
            "They grow vegetables and share the harvest with coworkers.",
            "They run half marathons to raise money for the hospital foundation.",
            "They keep a scrapbook of the wards they have worked on.",
        ],
    ],
};

const DISEASE: Framing = Framing {
    openings: &[
        "I'm posting here because I honestly don't know where else to turn.",
        "Hi all, long time lurker, first time asking for help.",
        "I know this might be a lot, but I'm hoping someone can point me in the right direction.",
        "Sorry in advance for the long post, I want to give the full picture.",
    ],
    closings: &[
        "Any advice or suggestions for tests would be hugely appreciated.",
        "Has anyone experienced something similar? What helped?",
        "Thanks for reading this far. I'd welcome any ideas.",
        "Should I push for a specialist referral? Any guidance helps.",
        "I'm grateful for any thoughts you can share.",
        "What would you ask my doctor if you were me?",
    ],
    questions: &[
        "Regarding {label}:",
        "As for {label}, here is what I've noticed:",
        "On the {label} front:",
        "About my {label}:",
    ],
    facts: [
        &[
            "I work as a school librarian and spend most of the day on my feet.",
            "I'm a night-shift baker, so my sleep schedule is unusual.",
            "I drive a delivery route across three towns every weekday.",
            "I teach piano lessons from home in the afternoons.",
        ],
        &[
            "My hobby is restoring old bicycles in the garage.",
            "I love birdwatching and usually go out before dawn.",
            "I paint watercolour landscapes on weekends.",
            "I play in a community volleyball league.",
        ],
        &[
            "My sister checks in on me every evening by phone.",
            "My kids have started noticing that I'm not myself.",
            "My friends and I have a standing Sunday brunch I've been missing.",
            "My partner has been covering chores while I recover.",
        ],
    ],
};

const CV: Framing = Framing {
    openings: &[
        "Curiosity has shaped every step of my professional journey.",
        "Few things motivate me more than solving a problem that others have set aside.",
        "My path into this field began with a single volunteer afternoon.",
        "I thrive where careful work meets real-world impact.",
    ],
    closings: &[
        "I would welcome the opportunity to bring this experience to your team.",
        "I am excited to contribute and grow with your organisation.",
        "Thank you for considering my application.",
        "I look forward to discussing how I can support your goals.",
        "I am ready to take on the responsibilities of this role.",
        "I hope to hear from you soon.",
    ],
    questions: &[
        "{label}:",
        "With respect to {label}:",
        "My {label}:",
        "In terms of {label}:",
    ],
    facts: [
        &[
            "I chose this career after helping my grandfather run his small shop.",
            "A summer internship convinced me to pursue this profession.",
            "I was inspired by a teacher who made complex ideas feel simple.",
            "Fixing a neighbour's computer as a teenager sparked my interest.",
        ],
        &[
            "My defining skill is turning messy requirements into clear plans.",
            "I am known for calm communication under tight deadlines.",
            "Colleagues rely on my attention to detail in reviews.",
            "I enjoy mentoring new colleagues through their first projects.",
        ],
        &[
            "My family once joined me at a trade fair and ended up volunteering at the booth.",
            "My brother and I met a future client on a train home for the holidays.",
            "My parents still keep the first newsletter I edited at work.",
            "A work trip doubled as my cousin's first visit to the coast.",
        ],
    ],
};

fn framing(name: DatasetName) -> &'static Framing {
    match name {
        DatasetName::Violence => &VIOLENCE,
        DatasetName::Disease => &DISEASE,
        DatasetName::Cv => &CV,
    }
}

pub(super) fn pools(name: DatasetName, graph: &ScmGraph) -> (Vec<GroundingAsset>, Vec<GroundingAsset>) {
    let f = framing(name);
    let personas = (0..POOL_SIZE)
        .map(|i| {
            let body = [
                f.facts[0][i % 4],
                f.facts[1][(i / 4 + i) % 4],
                f.facts[2][(i / 2 + 3 * i) % 4],
            ]
            .join(" ");
            GroundingAsset {
                id: format!("p{i:03}"),
                kind: AssetKind::Persona,
                body,
                dataset: name,
            }
        })
        .collect();

    let templates = (0..POOL_SIZE)
        .map(|i| {
            let seed = rng::derive_seed(0, &[name.as_str(), "template", &i.to_string()]);
            let mut order: Vec<usize> = (0..graph.len()).collect();
            order.shuffle(&mut rng::stream(seed, 0));
            let mut lines = vec![f.openings[i % f.openings.len()].to_string(), "{persona}".to_string()];
            for (k, &c) in order.iter().enumerate() {
                let concept = graph.concept(c);
                let q = f.questions[(i + k) % f.questions.len()]
                    .replace("{label}", &concept.label.to_lowercase());
                lines.push(format!("{q} {{slot:{}}}", concept.name));
            }
            lines.push(f.closings[i % f.closings.len()].to_string());
            GroundingAsset {
                id: format!("t{i:03}"),
                kind: AssetKind::Template,
                body: lines.join("\n"),
                dataset: name,
            }
        })
        .collect();
    (personas, templates)
}
