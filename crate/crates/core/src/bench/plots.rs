//! Minimal PNG charts: training curves and a confusion-matrix heatmap.
//! Axes and series only; the CSV files carry the numbers.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::bilstm::EpochRecord;
use crate::error::{Error, Result};
use crate::metrics::ConfusionMatrix;

const W: u32 = 480;
const H: u32 = 320;
const PAD: u32 = 30;
const WHITE: Rgb<u8> = Rgb([255, 255, 255]);
const GREY: Rgb<u8> = Rgb([80, 80, 80]);
const TRAIN: Rgb<u8> = Rgb([31, 119, 180]);
const VAL: Rgb<u8> = Rgb([255, 127, 14]);

fn save(img: &RgbImage, path: &Path) -> Result<()> {
    img.save(path)
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))
}

fn line(img: &mut RgbImage, (x0, y0): (f64, f64), (x1, y1): (f64, f64), c: Rgb<u8>) {
    let steps = ((x1 - x0).abs().max((y1 - y0).abs()).ceil() as usize).max(1);
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        let (x, y) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        for (dx, dy) in [(0i64, 0i64), (1, 0), (0, 1)] {
            let (px, py) = (x.round() as i64 + dx, y.round() as i64 + dy);
            if px >= 0 && py >= 0 && (px as u32) < img.width() && (py as u32) < img.height() {
                img.put_pixel(px as u32, py as u32, c);
            }
        }
    }
}

fn panel(img: &mut RgbImage, x_off: u32, series: &[(&[f64], Rgb<u8>)]) {
    let pw = W - 2 * PAD;
    let ph = H - 2 * PAD;
    let (x0, y0) = ((x_off + PAD) as f64, (H - PAD) as f64);
    line(img, (x0, y0), (x0 + pw as f64, y0), GREY);
    line(img, (x0, y0), (x0, y0 - ph as f64), GREY);
    let all: Vec<f64> = series.iter().flat_map(|(s, _)| s.iter().copied()).filter(|v| v.is_finite()).collect();
    if all.is_empty() {
        return;
    }
    let lo = all.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    for (s, c) in series {
        let n = s.len().max(2) - 1;
        let pt = |i: usize| (x0 + pw as f64 * i as f64 / n as f64, y0 - ph as f64 * (s[i] - lo) / span);
        for i in 1..s.len() {
            line(img, pt(i - 1), pt(i), *c);
        }
    }
}

/// Loss (left) and accuracy (right) per epoch; blue is training, orange validation.
pub fn curves_png(records: &[EpochRecord], path: &Path) -> Result<()> {
    let mut img = RgbImage::from_pixel(2 * W, H, WHITE);
    let col = |f: fn(&EpochRecord) -> f64| records.iter().map(f).collect::<Vec<_>>();
    let (tl, vl, ta, va) = (col(|r| r.train_loss), col(|r| r.val_loss), col(|r| r.train_acc), col(|r| r.val_acc));
    panel(&mut img, 0, &[(&tl, TRAIN), (&vl, VAL)]);
    panel(&mut img, W, &[(&ta, TRAIN), (&va, VAL)]);
    save(&img, path)
}

/// Row-normalized heatmap; darker cells hold a larger share of the true class.
pub fn confusion_png(cm: &ConfusionMatrix, path: &Path) -> Result<()> {
    const CELL: u32 = 80;
    let n = cm.counts.len() as u32;
    let mut img = RgbImage::from_pixel(n * CELL, n * CELL, WHITE);
    for (r, row) in cm.counts.iter().enumerate() {
        let total: u64 = row.iter().sum();
        for (c, &v) in row.iter().enumerate() {
            let share = if total == 0 { 0.0 } else { v as f64 / total as f64 };
            let shade = (255.0 * (1.0 - share)).round() as u8;
            let color = Rgb([shade, shade, 255]);
            for y in 0..CELL - 2 {
                for x in 0..CELL - 2 {
                    img.put_pixel(c as u32 * CELL + x, r as u32 * CELL + y, color);
                }
            }
        }
    }
    save(&img, path)
}
