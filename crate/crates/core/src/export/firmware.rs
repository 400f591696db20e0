use std::fmt::Write as _;

use crate::classify::{Dense, ModelParams, Node, Standardizer, TrainedModel, Tree};
use crate::error::Result;
use crate::posture::{N_CLASSES, N_SENSORS};

const Q: f64 = 65536.0;

fn q16(v: f64) -> i64 {
    (v * Q).round().clamp(i32::MIN as f64, i32::MAX as f64) as i64
}

/// `counts <= t` for integer counts is `counts <= floor(t)`.
fn int_threshold(t: f64) -> i32 {
    t.floor().clamp(-1.0, 65535.0) as i32
}

fn header(s: &mut String, model: &TrainedModel) {
    let _ = writeln!(s, "/* Posture classifier ({}), generated. */", model.kind());
    let _ = writeln!(s, "/* Entry point: int classify(const uint16_t counts[10]) -> class index. */");
    let _ = write!(s, "/* Classes:");
    for (i, c) in model.class_names.iter().enumerate() {
        let _ = write!(s, " {i}={c}");
    }
    let _ = writeln!(s, " */\n#include <stdint.h>\n");
    let _ = writeln!(s, "#define N_SENSORS {N_SENSORS}\n#define N_CLASSES {N_CLASSES}\n");
}

fn argmax_c(s: &mut String, arr: &str) {
    let _ = writeln!(s, "    int best = 0;");
    let _ = writeln!(s, "    for (int c = 1; c < N_CLASSES; c++) {{");
    let _ = writeln!(s, "        if ({arr}[c] > {arr}[best]) best = c;");
    let _ = writeln!(s, "    }}");
    let _ = writeln!(s, "    return best;");
}

fn trees(s: &mut String, trees: &[Tree], forest: bool) {
    let _ = writeln!(s, "#define LEAF -1\n");
    let _ = writeln!(s, "struct node {{ int8_t feature; int32_t threshold; uint32_t left; uint32_t right; }};\n");
    let _ = writeln!(s, "/* Split rows: feature, threshold, left, right. Leaf rows: LEAF, class. */");
    let _ = writeln!(s, "static const struct node NODES[] = {{");
    let mut roots = Vec::with_capacity(trees.len());
    let mut base = 0u32;
    for t in trees {
        roots.push(base);
        for n in &t.nodes {
            match *n {
                Node::Split { feature, threshold, left, right } => {
                    let _ = writeln!(
                        s,
                        "    {{ {feature}, {}, {}, {} }},",
                        int_threshold(threshold),
                        base + left,
                        base + right
                    );
                }
                Node::Leaf { class, .. } => {
                    let _ = writeln!(s, "    {{ LEAF, {class}, 0, 0 }},");
                }
            }
        }
        base += t.nodes.len() as u32;
    }
    let _ = writeln!(s, "}};\n");
    let _ = writeln!(s, "#define N_TREES {}", trees.len());
    let _ = write!(s, "static const uint32_t ROOTS[N_TREES] = {{");
    let roots: Vec<String> = roots.iter().map(u32::to_string).collect();
    let _ = writeln!(s, " {} }};\n", roots.join(", "));
    let _ = writeln!(s, "static int tree_class(uint32_t at, const uint16_t counts[N_SENSORS]) {{");
    let _ = writeln!(s, "    while (NODES[at].feature != LEAF) {{");
    let _ = writeln!(
        s,
        "        at = (int32_t)counts[NODES[at].feature] <= NODES[at].threshold ? NODES[at].left : NODES[at].right;"
    );
    let _ = writeln!(s, "    }}");
    let _ = writeln!(s, "    return NODES[at].threshold;");
    let _ = writeln!(s, "}}\n");
    let _ = writeln!(s, "int classify(const uint16_t counts[N_SENSORS]) {{");
    if forest {
        let _ = writeln!(s, "    uint32_t votes[N_CLASSES] = {{0}};");
        let _ = writeln!(s, "    for (int t = 0; t < N_TREES; t++) votes[tree_class(ROOTS[t], counts)]++;");
        argmax_c(s, "votes");
    } else {
        let _ = writeln!(s, "    return tree_class(ROOTS[0], counts);");
    }
    let _ = writeln!(s, "}}");
}

/// Folds z-scoring into the first layer: `w (x - m) / s + b`.
fn fold(scaler: &Standardizer, w: &[f64], b: f64) -> (Vec<f64>, f64) {
    let a: Vec<f64> = w.iter().zip(&scaler.scale).map(|(w, s)| w / s).collect();
    let c = b - a.iter().zip(&scaler.mean).map(|(a, m)| a * m).sum::<f64>();
    (a, c)
}

fn int_table(s: &mut String, name: &str, dims: &str, rows: &[Vec<i64>]) {
    let _ = writeln!(s, "static const int32_t {name}{dims} = {{");
    for r in rows {
        let vals: Vec<String> = r.iter().map(i64::to_string).collect();
        let _ = writeln!(s, "    {{ {} }},", vals.join(", "));
    }
    let _ = writeln!(s, "}};");
}

fn linear(s: &mut String, scaler: &Standardizer, weights: &[[f64; N_SENSORS]], bias: &[f64]) {
    let folded: Vec<(Vec<f64>, f64)> = weights.iter().zip(bias).map(|(w, &b)| fold(scaler, w, b)).collect();
    let _ = writeln!(s, "/* Q16.16 one-vs-rest weights on raw counts, bias last. */");
    let rows: Vec<Vec<i64>> =
        folded.iter().map(|(a, c)| a.iter().map(|&v| q16(v)).chain([q16(*c)]).collect()).collect();
    int_table(s, "W", "[N_CLASSES][N_SENSORS + 1]", &rows);
    let _ = writeln!(s, "\nint classify(const uint16_t counts[N_SENSORS]) {{");
    let _ = writeln!(s, "    int64_t score[N_CLASSES];");
    let _ = writeln!(s, "    for (int c = 0; c < N_CLASSES; c++) {{");
    let _ = writeln!(s, "        int64_t acc = W[c][N_SENSORS];");
    let _ = writeln!(s, "        for (int k = 0; k < N_SENSORS; k++) acc += (int64_t)W[c][k] * counts[k];");
    let _ = writeln!(s, "        score[c] = acc;");
    let _ = writeln!(s, "    }}");
    argmax_c(s, "score");
    let _ = writeln!(s, "}}");
}

fn mlp(s: &mut String, scaler: &Standardizer, layers: &[Dense]) {
    let _ = writeln!(s, "/* Q16.16 dense layers, row-major [out][in], bias in the last column. */");
    let mut widest = 0;
    for (k, l) in layers.iter().enumerate() {
        widest = widest.max(l.outputs);
        let rows: Vec<Vec<i64>> = (0..l.outputs)
            .map(|o| {
                let w = &l.w[o * l.inputs..(o + 1) * l.inputs];
                let (w, b) = if k == 0 { fold(scaler, w, l.b[o]) } else { (w.to_vec(), l.b[o]) };
                w.iter().map(|&v| q16(v)).chain([q16(b)]).collect()
            })
            .collect();
        int_table(s, &format!("L{k}"), &format!("[{}][{}]", l.outputs, l.inputs + 1), &rows);
    }
    let _ = writeln!(s, "\nint classify(const uint16_t counts[N_SENSORS]) {{");
    let _ = writeln!(s, "    int64_t a[{widest}], b[{widest}];");
    for (k, l) in layers.iter().enumerate() {
        let last = k + 1 == layers.len();
        let _ = writeln!(s, "    for (int o = 0; o < {}; o++) {{", l.outputs);
        let _ = writeln!(s, "        int64_t acc = (int64_t)L{k}[o][{}] << 16;", l.inputs);
        if k == 0 {
            let _ = writeln!(s, "        for (int i = 0; i < {}; i++) acc += ((int64_t)L0[o][i] * counts[i]) << 16;", l.inputs);
        } else {
            let _ = writeln!(s, "        for (int i = 0; i < {}; i++) acc += (int64_t)L{k}[o][i] * a[i];", l.inputs);
        }
        let _ = writeln!(s, "        acc >>= 16;");
        if !last {
            let _ = writeln!(s, "        b[o] = acc > 0 ? acc : 0;");
        } else {
            let _ = writeln!(s, "        b[o] = acc;");
        }
        let _ = writeln!(s, "    }}");
        let _ = writeln!(s, "    for (int o = 0; o < {}; o++) a[o] = b[o];", l.outputs);
    }
    argmax_c(s, "a");
    let _ = writeln!(s, "}}");
}

/// C99 source with static tables and one pure entry point. Trees compare raw
/// integer counts; linear and MLP models use Q16.16 fixed point.
pub fn emit(model: &TrainedModel) -> Result<String> {
    let mut s = String::new();
    header(&mut s, model);
    match &model.params {
        ModelParams::Tree(t) => trees(&mut s, std::slice::from_ref(t), false),
        ModelParams::Forest(ts) => trees(&mut s, ts, true),
        ModelParams::Svm(m) => linear(&mut s, &m.scaler, &m.weights, &m.bias),
        ModelParams::Mlp(m) => mlp(&mut s, &m.scaler, &m.layers),
    }
    Ok(s)
}
