//! Render a built-in prompt template and parse a sloppy model answer into
//! its typed schema.
//!
//! ```text
//! cargo run --example prompts
//! ```

use std::sync::Arc;

use igekit::gateway::schema::InteractabilityOut;
use igekit::gateway::{parse_as, ChatClient, ChatRequest, PromptRegistry, ScriptedChat, TemplateId};
use serde_json::json;

fn main() -> igekit::Result<()> {
    let registry = Arc::new(PromptRegistry::builtin());
    for id in TemplateId::ALL {
        println!("{:<6} -> schema {}", id.as_str(), id.schema().as_str());
    }

    let backend = ScriptedChat::default().rule(
        TemplateId::Interactability,
        &["fishing"],
        json!({"interactable": false, "rationale": "background scenery in a fishing game"}),
    );
    let client = ChatClient::new(registry, Arc::new(backend));
    let req = ChatRequest::new(TemplateId::Interactability)
        .slot("global_context", "App name: Lakeside Angler\nGenres: fishing")
        .slot("local_context", "A lake shore with a tree and a rod on the dock.")
        .slot("candidate", "tree")
        .slot("description", "green, large, left side of the shore")
        .demos(client.registry().demos().iter().take(1).map(|d| d.render()).collect());
    let prompt = client.render(&req)?;
    println!("\n--- rendered prompt ({} chars) ---\n{}\n", prompt.text.len(), prompt.text);

    let mut calls = 0;
    let answer: InteractabilityOut = client.ask(&req, &mut calls)?;
    println!("scripted answer after {calls} call(s): {answer:?}");

    let answers = [
        "Sure! Here is my judgment:\n```json\n{\"interactable\": true, \"rationale\": [\"it opens the menu\"]}\n```",
        "{\"interactable\": \"maybe\"}",
    ];
    for raw in answers {
        match parse_as::<InteractabilityOut>(raw) {
            Ok(v) => println!("parsed: {v:?}"),
            Err(e) => println!("rejected: {e}"),
        }
    }
    Ok(())
}
