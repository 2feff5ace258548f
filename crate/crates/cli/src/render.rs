//! Top-view SVG drawings of scenes and pair templates.

use std::f64::consts::TAU;
use std::fmt::Write;

use roomgen::corpus::{ObjectInstance, Scene};
use roomgen::geometry::{wrap_angle, Point2};
use roomgen::priors::Template;

const MARGIN: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderOptions {
    /// Pixels per meter.
    pub scale: f64,
    pub draw_labels: bool,
    /// Color template points by orientation and weight; otherwise plain
    /// grey with opacity by weight.
    pub hsv_orientation: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            scale: 60.0,
            draw_labels: true,
            hsv_orientation: true,
        }
    }
}

/// `h`, `s`, `v` in `[0, 1]` to `#rrggbb`.
pub fn hsv_hex(h: f64, s: f64, v: f64) -> String {
    let h = (h.rem_euclid(1.0)) * 6.0;
    let sector = h.floor();
    let f = h - sector;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    let (r, g, b) = match sector as u8 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    let byte = |c: f64| (c.clamp(0.0, 1.0) * 255.0).round() as u8;
    format!("#{:02x}{:02x}{:02x}", byte(r), byte(g), byte(b))
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Canvas {
    origin: Point2,
    scale: f64,
    width: f64,
    height: f64,
}

impl Canvas {
    fn fit(lo: Point2, hi: Point2, scale: f64) -> Self {
        Self {
            origin: lo,
            scale,
            width: (hi.x - lo.x) * scale + 2.0 * MARGIN,
            height: (hi.z - lo.z) * scale + 2.0 * MARGIN,
        }
    }

    fn map(&self, p: Point2) -> (f64, f64) {
        (
            (p.x - self.origin.x) * self.scale + MARGIN,
            (p.z - self.origin.z) * self.scale + MARGIN,
        )
    }

    fn open(&self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.1}\" height=\"{h:.1}\" viewBox=\"0 0 {w:.1} {h:.1}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
            w = self.width,
            h = self.height
        )
    }
}

fn draw_object(out: &mut String, canvas: &Canvas, o: &ObjectInstance, class: &str, labels: bool) {
    let (cx, cy) = canvas.map(o.center());
    let (w, h) = (2.0 * o.hx * canvas.scale, 2.0 * o.hz * canvas.scale);
    let fill = if class == "fixture" {
        "#bbbbbb"
    } else {
        "#cfe2f3"
    };
    let _ = writeln!(
        out,
        "<g class=\"{class}\" transform=\"translate({cx:.3} {cy:.3}) rotate({:.4})\">",
        o.theta.to_degrees()
    );
    let _ = writeln!(
        out,
        "<rect x=\"{:.3}\" y=\"{:.3}\" width=\"{w:.3}\" height=\"{h:.3}\" fill=\"{fill}\" stroke=\"#333333\" stroke-width=\"1\"/>",
        -w / 2.0,
        -h / 2.0
    );
    let _ = writeln!(
        out,
        "<line x1=\"0\" y1=\"0\" x2=\"{:.3}\" y2=\"0\" stroke=\"#cc0000\" stroke-width=\"2\"/>",
        w / 2.0
    );
    out.push_str("</g>\n");
    if labels {
        let _ = writeln!(
            out,
            "<text x=\"{cx:.3}\" y=\"{cy:.3}\" font-size=\"10\" text-anchor=\"middle\" dominant-baseline=\"middle\">{}</text>",
            escape(&o.category)
        );
    }
}

pub fn render_scene(scene: &Scene, options: &RenderOptions) -> String {
    let (lo, hi) = scene.room.bounds();
    let canvas = Canvas::fit(lo, hi, options.scale);
    let mut out = canvas.open();
    let points: Vec<String> = scene
        .room
        .vertices()
        .iter()
        .map(|&v| {
            let (x, y) = canvas.map(v);
            format!("{x:.3},{y:.3}")
        })
        .collect();
    let _ = writeln!(
        out,
        "<polygon class=\"room\" points=\"{}\" fill=\"#f7f7f7\" stroke=\"black\" stroke-width=\"2\"/>",
        points.join(" ")
    );
    for f in &scene.fixtures {
        draw_object(&mut out, &canvas, f, "fixture", options.draw_labels);
    }
    for o in &scene.objects {
        draw_object(&mut out, &canvas, o, "object", options.draw_labels);
    }
    out.push_str("</svg>\n");
    out
}

/// Scatter of template translations around the anchor at the origin.
pub fn render_template(
    template: &Template,
    label: Option<&str>,
    options: &RenderOptions,
) -> String {
    let reach = template
        .points()
        .iter()
        .map(|p| p.sample.p_x.abs().max(p.sample.p_z.abs()))
        .fold(0.5, f64::max)
        * 1.1;
    let canvas = Canvas::fit(
        Point2::new(-reach, -reach),
        Point2::new(reach, reach),
        options.scale,
    );
    let mut out = canvas.open();
    let (ox, oy) = canvas.map(Point2::ZERO);
    let _ = writeln!(
        out,
        "<g class=\"anchor\"><line x1=\"{:.3}\" y1=\"{oy:.3}\" x2=\"{:.3}\" y2=\"{oy:.3}\" stroke=\"black\"/><line x1=\"{ox:.3}\" y1=\"{:.3}\" x2=\"{ox:.3}\" y2=\"{:.3}\" stroke=\"black\"/></g>",
        ox - 6.0,
        ox + 6.0,
        oy - 6.0,
        oy + 6.0
    );
    let max_w = template
        .points()
        .iter()
        .map(|p| p.weight)
        .fold(0.0, f64::max);
    for p in template.points() {
        let s = p.sample;
        let (x, y) = canvas.map(s.translation());
        let strength = if max_w > 0.0 { p.weight / max_w } else { 1.0 };
        let style = if options.hsv_orientation {
            format!(
                "fill=\"{}\"",
                hsv_hex(wrap_angle(s.p_theta) / TAU, strength, 1.0)
            )
        } else {
            format!("fill=\"#555555\" fill-opacity=\"{strength:.4}\"")
        };
        let _ = writeln!(
            out,
            "<circle class=\"point\" cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"2.5\" {style}/>"
        );
    }
    if options.draw_labels {
        if let Some(label) = label {
            let _ = writeln!(
                out,
                "<text x=\"{MARGIN}\" y=\"{:.1}\" font-size=\"12\">{}</text>",
                MARGIN * 0.7,
                escape(label)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
