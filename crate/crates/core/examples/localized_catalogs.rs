//! Interface strings come from per-language catalogs. English, French and
//! Italian ship with the library; more languages are loaded from a
//! directory of `<lang>.catalog` files and must define every key English
//! defines.
//!
//! ```bash
//! cargo run --example localized_catalogs
//! ```

use std::fs;

use annocamp::i18n::{category_key, MessageCatalogs};
use annocamp::model::DEFAULT_CATEGORIES;

pub fn run_example() -> annocamp::Result<()> {
    let shipped = MessageCatalogs::shipped();
    for lang in ["en", "fr", "it"] {
        println!("[{lang}] {}", shipped.get(lang, "prompt.default")?);
        let labels: Vec<&str> = DEFAULT_CATEGORIES
            .iter()
            .map(|c| shipped.get(lang, &category_key(c)))
            .collect::<annocamp::Result<_>>()?;
        println!("[{lang}] {}", labels.join(" / "));
    }

    // add Spanish by overriding a copy of the English catalog
    let dir = std::env::temp_dir().join(format!("annocamp-catalogs-{}", std::process::id()));
    fs::create_dir_all(&dir)?;
    let mut es = String::new();
    for (key, value) in shipped.catalog("en")? {
        let value = match key.as_str() {
            "ui.yes" => "Sí",
            "ui.no" => "No",
            "prompt.default" => {
                "Si vieras esta foto en una red social, ¿te burlarías de quien la publicó?"
            }
            _ => value,
        };
        es.push_str(&format!("{key} = {value}\n"));
    }
    fs::write(dir.join("es.catalog"), es)?;
    let extended = MessageCatalogs::shipped().load_dir(&dir)?;
    println!("[es] {}", extended.get("es", "prompt.default")?);

    // an incomplete catalog is rejected up front
    fs::write(dir.join("de.catalog"), "ui.yes = Ja\n")?;
    let err = MessageCatalogs::shipped().load_dir(&dir).unwrap_err();
    println!("rejected: {err}");
    fs::remove_dir_all(&dir)?;
    Ok(())
}

fn main() -> annocamp::Result<()> {
    run_example()
}
