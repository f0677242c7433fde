use super::ast::*;
use std::fmt::Write;

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "process {}", p.name.name);
    if !p.vars.is_empty() {
        out.push_str("variables\n");
        for v in &p.vars {
            match v.kind {
                VarKind::Int { lo, hi, init } => {
                    let _ = writeln!(out, "  int[{lo},{hi}] {} := {init}", v.name.name);
                }
                VarKind::IdSet => {
                    let _ = writeln!(out, "  idSet {}", v.name.name);
                }
            }
        }
    }
    let (sys, env): (Vec<&ActDecl>, Vec<&ActDecl>) = p.acts.iter().partition(|a| !a.env);
    if !p.acts.is_empty() {
        out.push_str("actions\n");
        for a in sys {
            print_act(&mut out, a);
        }
        if !env.is_empty() {
            out.push_str("  env\n");
            for a in env {
                print_act(&mut out, a);
            }
        }
    }
    for l in &p.locations {
        out.push('\n');
        if l.initial {
            out.push_str("initial ");
        }
        let _ = writeln!(out, "location {}", l.name.name);
        for it in &l.items {
            match it {
                Item::Passive { events, .. } => {
                    let names: Vec<&str> = events.iter().map(|e| e.name.as_str()).collect();
                    let _ = writeln!(out, "  passive {}", names.join(", "));
                }
                Item::Handler(h) => print_handler(&mut out, h),
            }
        }
    }
    out
}

fn print_act(out: &mut String, a: &ActDecl) {
    let mode = match a.mode {
        Mode::Broadcast => "br",
        Mode::Rendezvous => "rz",
    };
    let payload = match a.payload {
        None => "unit".to_string(),
        Some((lo, hi)) => format!("int[{lo},{hi}]"),
    };
    let _ = writeln!(out, "    {mode} {} : {payload}", a.name.name);
}

pub fn print_event(e: &Event) -> String {
    match e {
        Event::Empty => "_".to_string(),
        Event::Recv(a) => format!("recv({})", a.name),
        Event::Partition { id, participants, k } => {
            format!("Partition<{}>({}, {k})", id.name, print_expr(participants))
        }
        Event::Consensus { id, participants, k, propose } => format!(
            "Consensus<{}>({}, {k}, {})",
            id.name,
            print_expr(participants),
            propose.as_ref().map(|p| p.name.as_str()).unwrap_or("_")
        ),
    }
}

fn print_handler(out: &mut String, h: &Handler) {
    let _ = write!(out, "  on {}", print_event(&h.event));
    if let Some(g) = &h.guard {
        let _ = write!(out, " where ({})", print_expr(g));
    }
    match &h.body {
        Body::Do(b) => {
            out.push_str(" do\n");
            print_block(out, b, 2);
        }
        Body::WinLose { win, lose } => {
            out.push_str("\n    win:\n");
            print_block(out, win, 3);
            out.push_str("    lose:\n");
            print_block(out, lose, 3);
        }
    }
}

fn payload_text(p: &Option<Ident>) -> String {
    p.as_ref().map(|i| i.name.clone()).unwrap_or_else(|| "_".to_string())
}

pub fn print_block(out: &mut String, stmts: &[Stmt], depth: usize) {
    let pad = "  ".repeat(depth);
    for s in stmts {
        match &s.kind {
            StmtKind::If { cond, then, els } => {
                let _ = writeln!(out, "{pad}if ({}) {{", print_expr(cond));
                print_block(out, then, depth + 1);
                match els {
                    Some(e) => {
                        let _ = writeln!(out, "{pad}}} else {{");
                        print_block(out, e, depth + 1);
                        let _ = writeln!(out, "{pad}}}");
                    }
                    None => {
                        let _ = writeln!(out, "{pad}}}");
                    }
                }
            }
            other => {
                let _ = writeln!(out, "{pad}{}", print_simple_stmt(other));
            }
        }
    }
}

pub fn print_simple_stmt(s: &StmtKind) -> String {
    match s {
        StmtKind::Assign { var, value } => format!("{} := {}", var.name, print_expr(value)),
        StmtKind::SetAdd { set, elem } => format!("{}.add({})", set.name, print_expr(elem)),
        StmtKind::SetRemove { set, elem } => format!("{}.remove({})", set.name, print_expr(elem)),
        StmtKind::SendRz { act, payload, target } => {
            format!("sendrz({}[{}], {})", act.name, payload_text(payload), print_expr(target))
        }
        StmtKind::SendBr { act, payload } => format!("sendbr({}[{}])", act.name, payload_text(payload)),
        StmtKind::Reply { act, payload } => format!("reply({}[{}])", act.name, payload_text(payload)),
        StmtKind::Goto(l) => format!("goto {}", l.name),
        StmtKind::If { .. } => unreachable!("if statements are printed as blocks"),
    }
}

pub fn print_expr(e: &Expr) -> String {
    print_prec(e, 0)
}

fn print_prec(e: &Expr, ctx: u8) -> String {
    match &e.kind {
        ExprKind::Int(v) => {
            if *v < 0 {
                format!("({v})")
            } else {
                v.to_string()
            }
        }
        ExprKind::Bool(b) => if *b { "true" } else { "false" }.to_string(),
        ExprKind::Var(v) => v.clone(),
        ExprKind::Payload(a) => format!("{a}.payld"),
        ExprKind::Sender(a) => format!("{a}.sID"),
        ExprKind::DecVar(c, i) => format!("{c}.decVar[{i}]"),
        ExprKind::WinS(p) => format!("{p}.winS"),
        ExprKind::LoseS(p) => format!("{p}.loseS"),
        ExprKind::SelfId => "self".to_string(),
        ExprKind::All => "All".to_string(),
        ExprKind::Empty => "Empty".to_string(),
        ExprKind::Not(x) => format!("!{}", print_prec(x, 6)),
        ExprKind::Neg(x) => format!("-{}", print_prec(x, 6)),
        ExprKind::Bin(op, l, r) => {
            let p = op.precedence();
            let s = format!("{} {} {}", print_prec(l, p), op.symbol(), print_prec(r, p + 1));
            if p < ctx {
                format!("({s})")
            } else {
                s
            }
        }
    }
}
