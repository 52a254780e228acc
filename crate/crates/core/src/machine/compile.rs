use std::collections::BTreeMap;

use super::{Denotation, MachineState, SubState};
use crate::progdsl::{Program, SourceProc};

/// Compiles a program: every channel starts free, bare actions are released,
/// and each `select` becomes an open synchronizer over fresh points.
pub fn compile(p: &Program) -> MachineState {
    let mut st = MachineState {
        channels: p.channels(),
        ..MachineState::default()
    };
    st.subs
        .extend(st.channels.iter().cloned().map(SubState::ChanFree));
    for proc in &p.procs {
        match proc {
            SourceProc::Action(a) => st.subs.push(SubState::Released(a.clone())),
            SourceProc::Select(actions) => {
                let s = st.fresh_sync();
                let mut dom = BTreeMap::new();
                for a in actions {
                    let pt = st.fresh_point();
                    dom.insert(pt, a.clone());
                    st.subs.push(SubState::PointBound(pt, a.clone()));
                }
                st.subs.push(SubState::SyncOpen(s));
                st.syncs.insert(s, dom);
            }
        }
    }
    st.normalize();
    st
}

/// Bare actions denote themselves; selects denote nothing.
pub fn denote_program(p: &Program) -> Denotation {
    p.procs
        .iter()
        .filter_map(|proc| match proc {
            SourceProc::Action(a) => Some(a.clone()),
            SourceProc::Select(_) => None,
        })
        .collect()
}

/// Released actions of a state.
pub fn denote_state(st: &MachineState) -> Denotation {
    st.subs
        .iter()
        .filter_map(|sub| match sub {
            SubState::Released(a) => Some(a.clone()),
            _ => None,
        })
        .collect()
}
