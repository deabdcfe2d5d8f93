use std::fmt::Write as _;

use crate::evaluation::PixelMask;
use crate::geometry::PixelRect;

/// One object drawn on an overlay.
#[derive(Clone, Debug)]
pub struct OverlayItem<'a> {
    pub rect: PixelRect,
    pub mask: &'a PixelMask,
    pub caption: String,
}

const COLORS: [&str; 6] = ["#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#42d4f4"];

/// SVG showing the image (by reference) with each box outlined and its
/// visible pixels tinted, one horizontal run per rectangle.
pub fn overlay_svg(image_href: &str, width: usize, height: usize, items: &[OverlayItem<'_>]) -> String {
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    )
    .unwrap();
    writeln!(
        s,
        r#"<image xlink:href="{}" x="0" y="0" width="{width}" height="{height}"/>"#,
        escape(image_href)
    )
    .unwrap();
    for (k, item) in items.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        writeln!(s, r#"<g fill="{color}" fill-opacity="0.4">"#).unwrap();
        let m = item.mask;
        for y in 0..m.height {
            let mut x = 0;
            while x < m.width {
                if !m.get(x, y) {
                    x += 1;
                    continue;
                }
                let start = x;
                while x < m.width && m.get(x, y) {
                    x += 1;
                }
                writeln!(s, r#"<rect x="{start}" y="{y}" width="{}" height="1"/>"#, x - start).unwrap();
            }
        }
        writeln!(s, "</g>").unwrap();
        let r = item.rect;
        writeln!(
            s,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            r.x0,
            r.y0,
            r.width(),
            r.height()
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}" font-size="10" font-family="monospace">{}</text>"#,
            r.x0 + 2,
            r.y0 + 10,
            escape(&item.caption)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlay_contains_box_and_runs() {
        let mut m = PixelMask::empty(4, 2);
        m.bits[1] = true;
        m.bits[2] = true;
        let svg = overlay_svg(
            "a&b.png",
            4,
            2,
            &[OverlayItem {
                rect: PixelRect::new(0, 0, 4, 2),
                mask: &m,
                caption: "obj 0".into(),
            }],
        );
        assert!(svg.contains(r#"<rect x="1" y="0" width="2" height="1"/>"#));
        assert!(svg.contains("a&amp;b.png"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
