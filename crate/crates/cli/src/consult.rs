//! Line-oriented consultation: one command per line, JSON answers on the
//! output stream, diagnostics prefixed with `error:` on standard error.

use std::io::{self, BufRead, Write};
use std::sync::Arc;

use anyhow::{anyhow, bail};
use knet_core::wire::{
    beliefs_view, event_view, recommendation_view, resolve_finding, resolve_findings, round7, BeliefsView,
    RecommendationView,
};
use knet_core::{NodeId, PreparedNetwork, Session};
use serde::Serialize;

#[derive(Serialize)]
struct WhatIfOutput {
    beliefs: BeliefsView,
    #[serde(skip_serializing_if = "Option::is_none")]
    recommendation: Option<RecommendationView>,
}

fn text(value: &impl Serialize) -> anyhow::Result<String> {
    Ok(serde_json::to_string(value)?)
}

const HELP: &str = "commands:
  assert NODE=STATE       set a finding (replaces an earlier one on NODE)
  retract NODE            remove a finding
  beliefs [NODE ...]      current beliefs
  whatif NODE=STATE ...   beliefs under extra findings, session unchanged
  recommend               ranked decisions (decision networks)
  history                 session events
  export FILE             write the session document to FILE
  quit";

pub fn run(
    prepared: PreparedNetwork,
    kb_name: &str,
    input: impl BufRead,
    mut out: impl Write,
    interactive: bool,
) -> anyhow::Result<()> {
    let mut session = Session::new(Arc::new(prepared), kb_name)?;
    if interactive {
        eprintln!("consulting {kb_name}; type help for commands");
        prompt()?;
    }
    for line in input.lines() {
        let line = line?;
        let words: Vec<&str> = line.split_whitespace().collect();
        if let Some((&command, args)) = words.split_first() {
            if matches!(command, "quit" | "exit") {
                break;
            }
            if let Err(e) = step(&mut session, command, args, &mut out) {
                eprintln!("error: {e:#}");
            }
            out.flush()?;
        }
        if interactive {
            prompt()?;
        }
    }
    Ok(())
}

fn prompt() -> io::Result<()> {
    eprint!("knet> ");
    io::stderr().flush()
}

fn pair(arg: &str) -> anyhow::Result<(&str, &str)> {
    arg.split_once('=').ok_or_else(|| anyhow!("expected NODE=STATE, got {arg:?}"))
}

fn step(session: &mut Session, command: &str, args: &[&str], out: &mut impl Write) -> anyhow::Result<()> {
    let prepared = session.prepared().clone();
    let net = prepared.network();
    let value = match (command, args) {
        ("help", _) => {
            writeln!(out, "{HELP}")?;
            return Ok(());
        }
        ("assert", [arg]) => {
            let (node, label) = pair(arg)?;
            let (id, state) = resolve_finding(net, node, label)?;
            session.assert_finding(id.as_str(), state)?;
            text(&beliefs_view(net, session.beliefs(), None, round7))?
        }
        ("retract", [node]) => {
            session.retract_finding(node)?;
            text(&beliefs_view(net, session.beliefs(), None, round7))?
        }
        ("beliefs", nodes) => {
            let query: Vec<NodeId> = nodes.iter().map(|&n| NodeId::new(n)).collect();
            if let Some(q) = query.iter().find(|q| session.beliefs().get(q.as_str()).is_none()) {
                bail!("{q} is not a chance node");
            }
            let filter = (!query.is_empty()).then_some(query.as_slice());
            text(&beliefs_view(net, session.beliefs(), filter, round7))?
        }
        ("whatif", pairs) if !pairs.is_empty() => {
            let pairs = pairs.iter().map(|a| pair(a)).collect::<anyhow::Result<Vec<_>>>()?;
            let overlay = resolve_findings(net, pairs)?;
            let w = session.what_if(&overlay)?;
            text(&WhatIfOutput {
                beliefs: beliefs_view(net, &w.beliefs, None, round7),
                recommendation: w.recommendation.as_ref().map(|r| recommendation_view(net, r)),
            })?
        }
        ("recommend", []) => text(&recommendation_view(net, session.recommendation()?))?,
        ("history", []) => text(&session.history().iter().map(|e| event_view(net, e)).collect::<Vec<_>>())?,
        ("export", [file]) => {
            let doc = session.export();
            std::fs::write(file, serde_json::to_string_pretty(&doc)? + "\n")?;
            eprintln!("exported {} events to {file}", doc.events.len());
            return Ok(());
        }
        _ => bail!("cannot parse {:?}; type help for commands", [&[command], args].concat().join(" ")),
    };
    writeln!(out, "{value}")?;
    Ok(())
}
