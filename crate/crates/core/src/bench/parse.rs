use super::{BenchError, BenchProgram, Format, GridSpec, Located, OutputKind, OutputSpec, ScanKind, ScanSpec};
use crate::correlations::CoincidenceWindow;
use crate::error::Error;
use crate::grid::TimeGrid;
use crate::optics::ElementSpec;
use crate::source::{KernelShape, KernelSpec, PumpSpec};

#[derive(Debug, Clone, Copy)]
struct Tok<'a> {
    text: &'a str,
    col: usize,
}

fn tokenize(line: &str) -> Vec<Tok<'_>> {
    let mut out = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    let mut end = line.len();
    for (col, (byte, ch)) in line.char_indices().enumerate() {
        if ch == '#' {
            end = byte;
            break;
        }
        match (ch.is_whitespace(), start) {
            (false, None) => start = Some((byte, col + 1)),
            (true, Some((b, c))) => {
                out.push(Tok { text: &line[b..byte], col: c });
                start = None;
            }
            _ => {}
        }
    }
    if let Some((b, c)) = start {
        out.push(Tok { text: &line[b..end], col: c });
    }
    out
}

fn is_number(s: &str) -> bool {
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let digits = |i: &mut usize| {
        let start = *i;
        while *i < b.len() && b[*i].is_ascii_digit() {
            *i += 1;
        }
        *i > start
    };
    if !digits(&mut i) {
        return false;
    }
    if i < b.len() && b[i] == b'.' {
        i += 1;
        if !digits(&mut i) {
            return false;
        }
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        i += 1;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            i += 1;
        }
        if !digits(&mut i) {
            return false;
        }
    }
    i == b.len()
}

struct LineCtx<'a> {
    line: usize,
    directive: Tok<'a>,
    args: Vec<Tok<'a>>,
}

impl<'a> LineCtx<'a> {
    fn syntax(&self, col: usize, message: impl Into<String>) -> BenchError {
        BenchError::Syntax { line: self.line, col, message: message.into() }
    }

    fn semantic(&self, message: impl Into<String>) -> BenchError {
        BenchError::Semantic { line: self.line, message: message.into() }
    }

    fn end_col(&self) -> usize {
        let last = self.args.last().unwrap_or(&self.directive);
        last.col + last.text.chars().count()
    }

    fn number(&self, text: &str, col: usize) -> Result<f64, BenchError> {
        if !is_number(text) {
            return Err(self.syntax(col, format!("bad number '{text}'")));
        }
        text.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.syntax(col, format!("number out of range '{text}'")))
    }

    fn integer(&self, text: &str, col: usize) -> Result<usize, BenchError> {
        if text.is_empty() || !text.bytes().all(|c| c.is_ascii_digit()) {
            return Err(self.syntax(col, format!("expected a non-negative integer, got '{text}'")));
        }
        text.parse().map_err(|_| self.syntax(col, format!("integer out of range '{text}'")))
    }

    fn positional(&self, idx: usize, what: &str) -> Result<Tok<'a>, BenchError> {
        self.args
            .get(idx)
            .copied()
            .ok_or_else(|| self.syntax(self.end_col(), format!("{} expects {what}", self.directive.text)))
    }

    fn no_more(&self, from: usize) -> Result<(), BenchError> {
        match self.args.get(from) {
            Some(t) => Err(self.syntax(t.col, format!("unexpected argument '{}'", t.text))),
            None => Ok(()),
        }
    }

    /// `key=value` arguments from `from` on, checked against `allowed`.
    fn pairs(&self, from: usize, allowed: &[&str]) -> Result<Vec<(&'a str, f64, usize)>, BenchError> {
        let mut out: Vec<(&str, f64, usize)> = Vec::new();
        for t in &self.args[from.min(self.args.len())..] {
            let (key, value) = match t.text.split_once('=') {
                Some((k, v)) if !k.is_empty() && !v.is_empty() => (k, v),
                _ => return Err(self.syntax(t.col, format!("malformed key=value '{}'", t.text))),
            };
            if !allowed.contains(&key) {
                return Err(self.syntax(t.col, format!("unknown key '{key}' for {}", self.directive.text)));
            }
            if out.iter().any(|(k, _, _)| *k == key) {
                return Err(self.syntax(t.col, format!("duplicate key '{key}'")));
            }
            let vcol = t.col + key.chars().count() + 1;
            out.push((key, self.number(value, vcol)?, t.col));
        }
        Ok(out)
    }

    fn get(pairs: &[(&str, f64, usize)], key: &str) -> Option<f64> {
        pairs.iter().find(|(k, _, _)| *k == key).map(|(_, v, _)| *v)
    }

    fn require(&self, pairs: &[(&str, f64, usize)], key: &str) -> Result<f64, BenchError> {
        Self::get(pairs, key).ok_or_else(|| self.semantic(format!("{} needs {key}=", self.directive.text)))
    }

    fn check(&self, r: crate::error::Result<()>) -> Result<(), BenchError> {
        r.map_err(|e| self.semantic(error_text(&e)))
    }
}

fn error_text(e: &Error) -> String {
    match e {
        Error::InvalidParameter(msg) => msg.clone(),
        other => other.to_string(),
    }
}

fn parse_kernel(ctx: &LineCtx<'_>) -> Result<KernelSpec, BenchError> {
    let shape_tok = ctx.positional(0, "a shape (rect, triangle, gauss)")?;
    let gauss = match shape_tok.text {
        "rect" | "triangle" => false,
        "gauss" => true,
        other => return Err(ctx.syntax(shape_tok.col, format!("unknown kernel shape '{other}'"))),
    };
    let allowed: &[&str] = if gauss { &["t0", "width"] } else { &["t0"] };
    let pairs = ctx.pairs(1, allowed)?;
    let t0 = ctx.require(&pairs, "t0")?;
    let shape = match shape_tok.text {
        "rect" => KernelShape::Rect,
        "triangle" => KernelShape::Triangle,
        _ => KernelShape::GaussianWindowed { width: ctx.require(&pairs, "width")? },
    };
    let k = KernelSpec { shape, t0 };
    ctx.check(k.validate())?;
    Ok(k)
}

fn signal_arm(ctx: &LineCtx<'_>) -> Result<f64, BenchError> {
    let arm = ctx.positional(0, "'signal' and a time")?;
    if arm.text != "signal" {
        return Err(ctx.syntax(arm.col, format!("unknown arm '{}', only 'signal' is supported", arm.text)));
    }
    let value = ctx.positional(1, "a time after 'signal'")?;
    ctx.no_more(2)?;
    ctx.number(value.text, value.col)
}

#[derive(Default)]
struct Builder {
    pump: Option<Located<PumpSpec>>,
    kernel: Option<Located<KernelSpec>>,
    kernel2: Option<Located<KernelSpec>>,
    grid: Option<Located<GridSpec>>,
    elements: Vec<Located<ElementSpec>>,
    window: Option<Located<CoincidenceWindow>>,
    scan: Option<Located<ScanSpec>>,
    outputs: Vec<Located<OutputSpec>>,
}

fn set_once<T>(slot: &mut Option<Located<T>>, value: T, ctx: &LineCtx<'_>) -> Result<(), BenchError> {
    if let Some(prev) = slot {
        return Err(ctx.semantic(format!("duplicate {} directive (first on line {})", ctx.directive.text, prev.line)));
    }
    *slot = Some(Located { value, line: ctx.line });
    Ok(())
}

impl Builder {
    fn splitter_line(&self) -> Option<usize> {
        self.elements.iter().find(|e| matches!(e.value, ElementSpec::BeamSplitter)).map(|e| e.line)
    }

    fn directive(&mut self, ctx: &LineCtx<'_>) -> Result<(), BenchError> {
        match ctx.directive.text {
            "pump" => {
                let pairs = ctx.pairs(0, &["sigma", "omega", "amp"])?;
                let p = PumpSpec {
                    sigma_p: ctx.require(&pairs, "sigma")?,
                    omega_p: LineCtx::get(&pairs, "omega").unwrap_or(0.0),
                    amp: LineCtx::get(&pairs, "amp").unwrap_or(1.0),
                };
                ctx.check(p.validate())?;
                set_once(&mut self.pump, p, ctx)
            }
            "kernel" => {
                let k = parse_kernel(ctx)?;
                set_once(&mut self.kernel, k, ctx)
            }
            "kernel2" => {
                let k = parse_kernel(ctx)?;
                set_once(&mut self.kernel2, k, ctx)
            }
            "grid" => {
                let mut n = None;
                for t in &ctx.args {
                    if let Some(v) = t.text.strip_prefix("n=") {
                        if n.is_some() {
                            return Err(ctx.syntax(t.col, "duplicate key 'n'"));
                        }
                        n = Some(ctx.integer(v, t.col + 2)?);
                    }
                }
                let rest: Vec<Tok<'_>> = ctx.args.iter().copied().filter(|t| !t.text.starts_with("n=")).collect();
                let sub = LineCtx { line: ctx.line, directive: ctx.directive, args: rest };
                let pairs = sub.pairs(0, &["tmin", "tmax"])?;
                let g = GridSpec {
                    n: n.ok_or_else(|| ctx.semantic("grid needs n="))?,
                    t_min: ctx.require(&pairs, "tmin")?,
                    t_max: ctx.require(&pairs, "tmax")?,
                };
                ctx.check(TimeGrid::new(g.n, g.t_min, g.t_max).map(|_| ()))?;
                set_once(&mut self.grid, g, ctx)
            }
            "delay" => {
                let tau1 = signal_arm(ctx)?;
                if let Some(line) = self.splitter_line() {
                    return Err(ctx.semantic(format!("delay after the beamsplitter on line {line}")));
                }
                self.elements.push(Located { value: ElementSpec::DelaySignal { tau1 }, line: ctx.line });
                Ok(())
            }
            "beamsplitter" => {
                ctx.no_more(0)?;
                if let Some(line) = self.splitter_line() {
                    return Err(ctx.semantic(format!("second beamsplitter (first on line {line})")));
                }
                self.elements.push(Located { value: ElementSpec::BeamSplitter, line: ctx.line });
                Ok(())
            }
            "compensate" => {
                let delta = signal_arm(ctx)?;
                if self.splitter_line().is_none() {
                    return Err(ctx.semantic("compensate before beamsplitter"));
                }
                self.elements.push(Located { value: ElementSpec::Compensate { delta }, line: ctx.line });
                Ok(())
            }
            "window" => {
                let w_tok = ctx.positional(0, "a half width")?;
                let half_width = ctx.number(w_tok.text, w_tok.col)?;
                let pairs = ctx.pairs(1, &["tplus_min", "tplus_max"])?;
                let t_plus = match (LineCtx::get(&pairs, "tplus_min"), LineCtx::get(&pairs, "tplus_max")) {
                    (Some(lo), Some(hi)) => Some((lo, hi)),
                    (None, None) => None,
                    _ => return Err(ctx.semantic("window needs both tplus_min= and tplus_max= or neither")),
                };
                let w = CoincidenceWindow { half_width, t_plus };
                ctx.check(w.validate())?;
                set_once(&mut self.window, w, ctx)
            }
            "scan" => {
                let var = ctx.positional(0, "tau1 or delta")?;
                let variable = match var.text {
                    "tau1" => ScanKind::Tau1,
                    "delta" => ScanKind::Delta,
                    other => return Err(ctx.syntax(var.col, format!("unknown scan variable '{other}'"))),
                };
                let lo_t = ctx.positional(1, "lo hi steps")?;
                let hi_t = ctx.positional(2, "lo hi steps")?;
                let steps_t = ctx.positional(3, "lo hi steps")?;
                ctx.no_more(4)?;
                let s = ScanSpec {
                    variable,
                    lo: ctx.number(lo_t.text, lo_t.col)?,
                    hi: ctx.number(hi_t.text, hi_t.col)?,
                    steps: ctx.integer(steps_t.text, steps_t.col)?,
                };
                if !(s.lo < s.hi) {
                    return Err(ctx.semantic("scan needs lo < hi"));
                }
                if s.steps < 2 {
                    return Err(ctx.semantic("steps must be ≥ 2"));
                }
                set_once(&mut self.scan, s, ctx)
            }
            "output" => {
                let fmt_t = ctx.positional(0, "a format (csv, json) and a path")?;
                let format = match fmt_t.text {
                    "csv" => Format::Csv,
                    "json" => Format::Json,
                    other => return Err(ctx.syntax(fmt_t.col, format!("unknown output format '{other}'"))),
                };
                let path = ctx.positional(1, "a path")?.text.to_string();
                let kind = match ctx.args.get(2) {
                    None => None,
                    Some(t) => Some(match t.text {
                        "dip" => OutputKind::Dip,
                        "overlap" => OutputKind::Overlap,
                        "schmidt" => OutputKind::Schmidt,
                        "regions" => OutputKind::Regions,
                        other => return Err(ctx.syntax(t.col, format!("unknown output kind '{other}'"))),
                    }),
                };
                ctx.no_more(3)?;
                if let Some(prev) = self.outputs.iter().find(|o| o.value.path == path) {
                    return Err(ctx.semantic(format!("output path '{path}' already used on line {}", prev.line)));
                }
                self.outputs.push(Located { value: OutputSpec { format, path, kind }, line: ctx.line });
                Ok(())
            }
            other => Err(ctx.syntax(ctx.directive.col, format!("unknown directive '{other}'"))),
        }
    }

    fn finish(self, last_line: usize) -> Result<BenchProgram, BenchError> {
        let missing = |what: &str| BenchError::Semantic { line: last_line, message: format!("missing {what} directive") };
        let program = BenchProgram {
            pump: self.pump.ok_or_else(|| missing("pump"))?,
            kernel: self.kernel.ok_or_else(|| missing("kernel"))?,
            kernel2: self.kernel2,
            grid: self.grid.ok_or_else(|| missing("grid"))?,
            elements: self.elements,
            window: self.window,
            scan: self.scan,
            outputs: self.outputs,
        };
        check_program(&program)?;
        Ok(program)
    }
}

fn check_program(p: &BenchProgram) -> Result<(), BenchError> {
    let g = p.grid.value;
    for k in std::iter::once(&p.kernel).chain(p.kernel2.as_ref()) {
        let t0 = k.value.t0;
        if !(g.t_min <= 0.0 && g.t_max >= t0) {
            return Err(BenchError::Semantic {
                line: p.grid.line,
                message: format!("grid [{}, {}] does not cover the kernel support [0, {t0}] of line {}", g.t_min, g.t_max, k.line),
            });
        }
    }
    if let Some(s) = &p.scan {
        if s.value.variable == ScanKind::Delta && !p.has_splitter() {
            return Err(BenchError::Semantic { line: s.line, message: "scan delta needs a beamsplitter".into() });
        }
    }
    for o in &p.outputs {
        let kind = p.output_kind(&o.value);
        let fail = |message: String| Err(BenchError::Semantic { line: o.line, message });
        match kind {
            OutputKind::Dip if p.scan.is_none() => return fail("dip output needs a scan".into()),
            OutputKind::Dip | OutputKind::Overlap if !p.has_splitter() => {
                return fail(format!("{} output needs a beamsplitter", super::kind_name(kind)))
            }
            OutputKind::Overlap | OutputKind::Regions if p.scan.is_some() => {
                return fail(format!("{} output is for programs without a scan", super::kind_name(kind)))
            }
            OutputKind::Overlap | OutputKind::Schmidt if o.value.format == Format::Csv => {
                return fail(format!("{} output is JSON only", super::kind_name(kind)))
            }
            _ => {}
        }
    }
    Ok(())
}

/// Parse a bench file.
pub fn parse(text: &str) -> Result<BenchProgram, BenchError> {
    let mut b = Builder::default();
    let mut last_line = 1;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let toks = tokenize(raw);
        let Some((&directive, args)) = toks.split_first() else { continue };
        let ctx = LineCtx { line, directive, args: args.to_vec() };
        b.directive(&ctx)?;
    }
    b.finish(last_line)
}
