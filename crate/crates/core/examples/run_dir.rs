//! Stop a run after the first scriptwriting stage, then resume it.
//!
//! cargo run --example run_dir

use std::sync::Arc;

use filmcrew::crew::{default_templates_dir, Crew, TemplateSet};
use filmcrew::environment::load_environment;
use filmcrew::provider::{ReplayProvider, Transcript};
use filmcrew::workflow::{Pipeline, Run, Stage, WorkflowConfig};

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/breakup");

fn pipeline<'e>(env: &'e filmcrew::environment::EnvironmentSpec, run: &Run) -> Result<Pipeline<'e>, Box<dyn std::error::Error>> {
    let replay = ReplayProvider::load(FIXTURE.as_ref())?.with_transcript(Transcript::open(&run.transcript_path())?);
    replay.skip(&run.state().consumed_calls());
    let templates = Arc::new(TemplateSet::load(&default_templates_dir())?);
    Ok(Pipeline::new(env, Crew::new(Arc::new(replay), templates), WorkflowConfig::default()))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let env = load_environment(concat!(env!("CARGO_MANIFEST_DIR"), "/environment/full.json"))?;
    let tmp = tempfile::tempdir()?;
    let dir = tmp.path().join("breakup");

    let mut run = Run::create(&dir, "a quarrel and breakup scenario", &WorkflowConfig::default(), "replay")?;
    let p = pipeline(&env, &run)?;
    let halted = run.execute(&p, Some(Stage::Script1));
    println!("first pass: {:?}", halted.err().map(|e| e.to_string()));
    println!("completed: {:?}", run.state().completed);

    let mut run = Run::resume(&dir)?;
    let p = pipeline(&env, &run)?;
    let bundle = run.execute(&p, None)?.expect("all stages ran");
    println!("completed: {:?}", run.state().completed);
    println!("calls: {}; findings {}", run.state().total_calls(), bundle.summary());
    let mut files: Vec<String> = std::fs::read_dir(&dir)?.map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    files.sort();
    println!("artifacts: {}", files.join(", "));
    Ok(())
}
