//! Dev helper: print the paraphrase / non-paraphrase similarity table used
//! to pin thresholds.
use mnemon_core::embedding::{cosine, embed_hashed, DEFAULT_DIM};

fn sim(a: &str, b: &str) -> f64 {
    let va = embed_hashed(a, DEFAULT_DIM).unwrap();
    let vb = embed_hashed(b, DEFAULT_DIM).unwrap();
    cosine(&va, &vb).unwrap()
}

fn main() {
    println!("== unrelated pin ==");
    println!("{:.17}", sim("7-day return policy", "orbital mechanics"));

    println!("== paraphrase variants (family A) ==");
    let canonical = "Milo lives in Paris.";
    for v in [
        "Milo lives in Paris!",
        "Milo lives in Paris",
        "Milo lives in Paris now.",
        "Milo lives in Paris still.",
        "Milo lives in Paris  today.",
        "Milo lives in Paris again.",
        "MILO LIVES IN PARIS.",
        " Milo lives in Paris. ",
        "Milo lives in Paris, right.",
    ] {
        println!("{:.6}  {v:?}", sim(canonical, v));
    }
    println!("== family C ==");
    let canonical = "Yara's favorite season is autumn.";
    for v in [
        "Yara's favorite season is autumn!",
        "Yara's favorite season is autumn now.",
        "Yara's favorite season is autumn, right.",
    ] {
        println!("{:.6}  {v:?}", sim(canonical, v));
    }
    println!("== family D ==");
    let canonical = "The Atlas meeting is every Monday.";
    for v in [
        "The Atlas meeting is every Monday!",
        "The Atlas meeting is every Monday now.",
        "The Atlas meeting is every Monday, right.",
    ] {
        println!("{:.6}  {v:?}", sim(canonical, v));
    }
    println!("== warranty answers ==");
    let canonical = "The warranty is 1-year free.";
    for v in [
        "The warranty is 1-year free!",
        "The warranty is 1-year, free of charge.",
        "The warranty is one year, free.",
    ] {
        println!("{:.6}  {v:?}", sim(canonical, v));
    }
    println!("== non-paraphrase (different facts) ==");
    for (a, b) in [
        ("Milo lives in Paris.", "Milo lives in Berlin."),
        ("Milo lives in Paris.", "Rena lives in Tokyo."),
        ("Milo lives in Paris.", "Rena works at Zephyr."),
        ("The warranty is 1-year free.", "The battery is removable."),
        ("Milo lives in Paris.", "Milo works at Zephyr."),
    ] {
        println!("{:.6}  {a:?} vs {b:?}", sim(a, b));
    }
    println!("== alias labels (node merge) ==");
    for (a, b) in [
        ("helios labs", "helios lab"),
        ("helios labs", "helios laboratories"),
        ("project falcon", "falcon project"),
        ("new york city", "newyork city"),
        ("paris", "berlin"),
        ("milo", "rena"),
        ("atlas meeting", "atlas meetings"),
    ] {
        println!("{:.6}  {a:?} vs {b:?}", sim(a, b));
    }
}
