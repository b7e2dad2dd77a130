//! Run every stage offline against the recorded breakup transcript.
//!
//! cargo run --example replay_pipeline

use std::sync::Arc;

use filmcrew::crew::{default_templates_dir, Crew, TemplateSet};
use filmcrew::environment::load_environment;
use filmcrew::provider::{ChatProvider, ReplayProvider};
use filmcrew::workflow::{Pipeline, WorkflowConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let env = load_environment(concat!(env!("CARGO_MANIFEST_DIR"), "/environment/full.json"))?;
    let provider = Arc::new(ReplayProvider::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/breakup").as_ref())?);
    let templates = Arc::new(TemplateSet::load(&default_templates_dir())?);
    let pipeline = Pipeline::new(&env, Crew::new(provider.clone(), templates), WorkflowConfig::default());

    let topic = "a quarrel and breakup scenario";
    let (idea, _) = pipeline.develop_idea(topic)?;
    for o in &idea.outlines {
        println!("outline: {} at {}", o.sub_topic, o.selected_location);
    }
    let (draft, _) = pipeline.draft_script(topic, &idea)?;
    let (v2, _) = pipeline.revise_with_director(&draft)?;
    let (v3, notes) = pipeline.revise_with_actors(&v2)?;
    println!("actor suggestions adopted: {}", notes.record["adopted"]);
    let (cinema, _) = pipeline.annotate_cameras(&v3)?;
    println!("debate winner: {:?}", cinema.debate.judgment.winner);
    let bundle = pipeline.assemble(&cinema.script)?;

    print!("\n{}", bundle.storyboard);
    println!("\n{} calls replayed; findings {}", provider.transcript().len(), bundle.summary());
    Ok(())
}
