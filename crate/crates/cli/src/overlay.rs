use std::fmt::Write;

use screenparse::{Page, UiClass};

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '&' => out.push_str("&amp;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Stable per-class hue, spread by the golden angle.
fn hue(class: UiClass) -> u32 {
    ((class.id() as f64 * 137.507_764) % 360.0).round() as u32 % 360
}

/// Labeled-box overlay for one page. Boxes are drawn parents first so
/// nested elements stay visible; `background` becomes an `<image>` href.
pub fn render_svg(page: &Page, background: Option<&str>) -> String {
    let (w, h) = (page.viewport.width, page.viewport.height);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, "<title>{}</title>", xml_escape(&page.page_id));
    match background {
        Some(href) => {
            let _ = writeln!(s, r#"<image href="{}" x="0" y="0" width="{w}" height="{h}"/>"#, xml_escape(href));
        }
        None => {
            let _ = writeln!(s, r##"<rect x="0" y="0" width="{w}" height="{h}" fill="#ffffff"/>"##);
        }
    }
    let mut order: Vec<usize> = (0..page.elements.len()).collect();
    order.sort_by_key(|&i| depth(page, i));
    for i in order {
        let e = &page.elements[i];
        let b = &e.bbox;
        let color = format!("hsl({},70%,40%)", hue(e.class));
        let mut label = e.class.name().to_string();
        if let Some(t) = e.visible_text().filter(|t| !t.trim().is_empty()) {
            let short: String = t.trim().chars().take(32).collect();
            label = format!("{label}: {short}");
        }
        let _ = writeln!(
            s,
            r#"<g data-index="{i}"><rect x="{}" y="{}" width="{}" height="{}" fill="{color}" fill-opacity="0.08" stroke="{color}" stroke-width="1.5"/><text x="{}" y="{}" fill="{color}">{}</text></g>"#,
            b.x1,
            b.y1,
            b.width().max(0.0),
            b.height().max(0.0),
            b.x1 + 2.0,
            b.y1 + 11.0,
            xml_escape(&label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn depth(page: &Page, mut i: usize) -> usize {
    let mut d = 0;
    while let Some(p) = page.elements[i].parent {
        d += 1;
        i = p;
        if d > page.elements.len() {
            break;
        }
    }
    d
}
