//! Deterministic synthetic review corpus with class-separable keywords.
//!
//! Every document mixes shared e-commerce filler words with keywords drawn
//! from its own class list; a small fraction of tokens are keywords of
//! another class, so the task is easy but not trivially clean. Surface text
//! carries capitalization, punctuation and the odd slang form so that the
//! whole preprocessing pipeline is exercised.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::corpus::LabeledExample;
use crate::label::{Label, NUM_CLASSES};
use crate::rng::SplitMix64;

pub const SYNTH_DOCS: usize = 1_500;
pub const SYNTH_SEED: u64 = 42;

pub const NEGATIVE_WORDS: [&str; 20] = [
    "mengecewakan", "kecewa", "rusak", "jelek", "tidak", "buruk", "cacat", "lambat", "parah", "zonk",
    "retak", "sobek", "palsu", "menyesal", "dijanjikan", "luntur", "bau", "penipu", "lecet", "refund",
];

pub const NEUTRAL_WORDS: [&str; 20] = [
    "standar", "lumayan", "cukup", "biasa", "wajar", "netral", "oke", "relatif", "normal", "sebanding",
    "menengah", "seimbang", "proporsional", "rata", "umumnya", "sekadar", "secukupnya", "lumrah", "pas", "average",
];

pub const POSITIVE_WORDS: [&str; 20] = [
    "mantap", "bagus", "puas", "rekomendasi", "keren", "cepat", "rapi", "awet", "original", "terbaik",
    "suka", "sempurna", "memuaskan", "cantik", "nyaman", "amanah", "juara", "senang", "lembut", "wangi",
];

pub const FILLER_WORDS: [&str; 140] = [
    "barang", "produk", "paket", "kurir", "pengiriman", "toko", "seller", "penjual", "harga", "ukuran",
    "warna", "bahan", "jahitan", "kemasan", "bungkus", "kardus", "plastik", "bubble", "wrap", "pesanan",
    "order", "checkout", "ongkir", "diskon", "promo", "voucher", "stok", "varian", "model", "tipe",
    "merek", "baju", "kaos", "celana", "sepatu", "sandal", "tas", "dompet", "jam", "topi",
    "jaket", "kemeja", "hijab", "gamis", "rok", "kaus", "kaki", "charger", "kabel", "casing",
    "headset", "earphone", "speaker", "laptop", "mouse", "keyboard", "lampu", "kipas", "blender", "panci",
    "wajan", "piring", "gelas", "sendok", "botol", "tumbler", "sabun", "sampo", "parfum", "lipstik",
    "bedak", "serum", "masker", "skincare", "buku", "pulpen", "mainan", "boneka", "sprei", "bantal",
    "selimut", "handuk", "karpet", "rak", "meja", "kursi", "lemari", "cermin", "jemuran", "gantungan",
    "sesuai", "spesifikasi", "deskripsi", "foto", "gambar", "video", "ulasan", "bintang", "rating", "resi",
    "alamat", "rumah", "kantor", "hari", "minggu", "bulan", "pagi", "malam", "kemarin", "pertama",
    "kedua", "kali", "beli", "membeli", "dipakai", "pakai", "coba", "dicoba", "datang", "sampainya",
    "dikirim", "kirim", "cek", "dibuka", "buka", "isi", "jumlah", "pcs", "lusin", "set",
    "anak", "istri", "suami", "ibu", "ayah", "kado", "hadiah", "lebaran", "natal", "liburan",
];

const SLANG_SURFACE: [(&str, &str); 6] = [
    ("yang", "yg"),
    ("barang", "brg"),
    ("harga", "hrg"),
    ("tidak", "gk"),
    ("bagus", "bgus"),
    ("cepat", "cpt"),
];

pub fn class_words(label: Label) -> &'static [&'static str; 20] {
    match label {
        Label::Negative => &NEGATIVE_WORDS,
        Label::Neutral => &NEUTRAL_WORDS,
        Label::Positive => &POSITIVE_WORDS,
    }
}

/// Every surface word the generator can emit after slang normalization.
pub fn vocabulary() -> BTreeSet<&'static str> {
    NEGATIVE_WORDS
        .iter()
        .chain(&NEUTRAL_WORDS)
        .chain(&POSITIVE_WORDS)
        .chain(&FILLER_WORDS)
        .copied()
        .collect()
}

fn surface(word: &str, rng: &mut SplitMix64) -> String {
    for (canonical, slang) in SLANG_SURFACE {
        if word == canonical && rng.below(4) == 0 {
            return slang.to_string();
        }
    }
    word.to_string()
}

/// `n` documents, classes in rotation, all randomness from `seed`.
pub fn synthetic_corpus(n: usize, seed: u64) -> Vec<LabeledExample> {
    let mut rng = SplitMix64::new(seed);
    let enders = [".", "!", "!!", "...", " :)", " :(", ""];
    (0..n)
        .map(|id| {
            let label = Label::from_index(id % NUM_CLASSES).expect("three classes");
            let own = class_words(label);
            let len = 6 + rng.below(9) as usize;
            let mut words: Vec<&str> = Vec::with_capacity(len + 1);
            for _ in 0..len {
                let r = rng.next_f64();
                let w = if r < 0.30 {
                    own[rng.below(20) as usize]
                } else if r < 0.33 {
                    let other = Label::from_index((label.index() + 1 + rng.below(2) as usize) % NUM_CLASSES).unwrap();
                    class_words(other)[rng.below(20) as usize]
                } else {
                    FILLER_WORDS[rng.below(FILLER_WORDS.len() as u64) as usize]
                };
                words.push(w);
            }
            // at least one keyword of the document's own class
            let at = rng.below(len as u64 + 1) as usize;
            words.insert(at, own[rng.below(20) as usize]);
            if rng.below(5) == 0 {
                let at = rng.below(words.len() as u64) as usize;
                words.insert(at, "yang");
            }

            let mut text = String::new();
            for (i, w) in words.iter().enumerate() {
                let mut s = surface(w, &mut rng);
                if i == 0 || rng.below(10) == 0 {
                    let mut c = s.chars();
                    if let Some(f) = c.next() {
                        s = f.to_uppercase().collect::<String>() + c.as_str();
                    }
                }
                if i > 0 {
                    text.push(if rng.below(12) == 0 { ',' } else { ' ' });
                    if text.ends_with(',') {
                        text.push(' ');
                    }
                }
                text.push_str(&s);
            }
            text.push_str(enders[rng.below(enders.len() as u64) as usize]);
            LabeledExample {
                id,
                text,
                label,
                metadata: Default::default(),
            }
        })
        .collect()
}

/// CSV rendering with the default `comment,sentiment` header.
pub fn to_csv(corpus: &[LabeledExample]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["comment", "sentiment"]).expect("in-memory write");
    for ex in corpus {
        w.write_record([ex.text.as_str(), ex.label.as_str()]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

/// The bundled copy of `synthetic_corpus(1500, 42)`.
pub const BUNDLED_SYNTHETIC_CSV: &str = include_str!("../../data/synthetic_corpus.csv");

pub fn summary(corpus: &[LabeledExample]) -> String {
    let mut s = String::new();
    for l in Label::ALL {
        let _ = write!(s, "{}={} ", l.as_str(), corpus.iter().filter(|e| e.label == l).count());
    }
    s.trim_end().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text_prep::{Preprocessor, SlangLexicon, StopwordList};

    #[test]
    fn vocabulary_has_200_clean_words() {
        let v = vocabulary();
        assert_eq!(v.len(), 200);
        let sw = StopwordList::bundled();
        let slang = SlangLexicon::bundled();
        for w in &v {
            assert!(!sw.contains(w), "{w} is a stopword");
            assert_eq!(slang.lookup(w), *w, "{w} is a slang key");
            assert!(w.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit()), "{w}");
        }
        for (canonical, slang_form) in SLANG_SURFACE {
            assert_eq!(slang.lookup(slang_form), canonical);
        }
    }

    #[test]
    fn generated_tokens_stay_in_vocabulary() {
        let prep = Preprocessor::default();
        let v = vocabulary();
        let corpus = synthetic_corpus(300, 7);
        for ex in &corpus {
            let doc = prep.process(ex.id, &ex.text);
            assert!(!doc.is_empty());
            for t in &doc.tokens {
                assert!(v.contains(t.as_str()), "{t} from {:?}", ex.text);
            }
            assert!(doc.tokens.iter().any(|t| class_words(ex.label).contains(&t.as_str())));
        }
    }

    #[test]
    fn balanced_and_deterministic() {
        let a = synthetic_corpus(SYNTH_DOCS, SYNTH_SEED);
        assert_eq!(summary(&a), "negative=500 neutral=500 positive=500");
        assert_eq!(a, synthetic_corpus(SYNTH_DOCS, SYNTH_SEED));
        assert_ne!(a, synthetic_corpus(SYNTH_DOCS, SYNTH_SEED + 1));
    }

    #[test]
    fn bundled_file_matches_generator() {
        assert_eq!(BUNDLED_SYNTHETIC_CSV, to_csv(&synthetic_corpus(SYNTH_DOCS, SYNTH_SEED)));
    }
}
