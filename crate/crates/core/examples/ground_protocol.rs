//! The `/ground` wire protocol: what a grounding adapter receives and must
//! send back, and how the client checks the answer.
//!
//! Point `IGE_GROUND_URL` at a running adapter to send a real request;
//! otherwise a synthetic grounder answers locally.
//!
//! ```text
//! cargo run --example ground_protocol
//! ```

use std::sync::Arc;

use igekit::gateway::{GroundClient, GroundRequest, Grounder, HttpGrounder, ImagePayload, SyntheticGrounder, WireRequest, WireResponse};
use igekit::geometry::{BoundingBox, ScoredBox};

fn main() -> igekit::Result<()> {
    let img = image::RgbaImage::from_pixel(320, 180, image::Rgba([30, 120, 60, 255]));
    let request = GroundRequest {
        image: ImagePayload::from_rgba(&img)?,
        width: 320.0,
        height: 180.0,
        descriptions: vec!["brown wooden shovel leaning on a fence".into(), "purple umbrella".into()],
    };

    let wire = WireRequest { image_b64: request.image.to_base64(), descriptions: request.descriptions.clone() };
    let body = serde_json::to_value(&wire)?;
    println!("POST /ground body: {{\"image_b64\": <{} chars>, \"descriptions\": {}}}", wire.image_b64.len(), body["descriptions"]);

    let backend: Arc<dyn Grounder> = match std::env::var("IGE_GROUND_URL") {
        Ok(_) => Arc::new(HttpGrounder::from_env()?),
        Err(_) => Arc::new(SyntheticGrounder::default().rule(
            "shovel",
            // Deliberately spills past the right edge; the client clamps it.
            vec![ScoredBox::new(BoundingBox::new(280.0, 60.0, 60.0, 100.0)?, 0.82)?],
        )),
    };
    let response = GroundClient::new(backend).ground(&request)?;
    println!("response: {}", serde_json::to_string(&WireResponse::from(&response))?);
    for (desc, boxes) in request.descriptions.iter().zip(&response.results) {
        println!("{desc:?}: {} box(es)", boxes.len());
    }

    let misaligned = WireResponse { results: vec![] };
    println!("misaligned answer: {}", misaligned.into_response(2).unwrap_err());
    Ok(())
}
