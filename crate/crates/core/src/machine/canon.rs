//! Canonical representatives modulo renaming of point and synchronizer ids.

use std::borrow::Cow;
use std::collections::{BTreeMap, HashMap};

use super::{MachineState, PointId, SubState, SyncId};
use crate::progdsl::Action;

fn points_of(sub: &SubState) -> impl Iterator<Item = PointId> {
    let (a, b) = match *sub {
        SubState::PointBound(p, _)
        | SubState::Candidate(p)
        | SubState::Rejected(p)
        | SubState::Selected(_, p)
        | SubState::Done(_, p) => (Some(p), None),
        SubState::ChanMatch(_, p, q) => (Some(p), Some(q)),
        _ => (None, None),
    };
    a.into_iter().chain(b)
}

/// Drops inert junk: closed synchronizers with no selection, confirmation or
/// cancellation pending and none of whose points appears in any sub-state. No
/// rule can ever fire on such a synchronizer again.
pub fn collect_junk(st: &MachineState) -> MachineState {
    collect_junk_cow(st).into_owned()
}

fn collect_junk_cow(st: &MachineState) -> Cow<'_, MachineState> {
    let mut referenced = IdSet::default();
    let mut live = IdSet::default();
    for sub in &st.subs {
        for p in points_of(sub) {
            referenced.insert(p.0);
        }
        match *sub {
            SubState::Selected(s, _)
            | SubState::Done(s, _)
            | SubState::Retry(s)
            | SubState::SyncOpen(s) => live.insert(s.0),
            _ => {}
        }
    }
    let inert: Vec<SyncId> = st
        .syncs
        .iter()
        .filter(|(s, dom)| !live.contains(s.0) && dom.keys().all(|p| !referenced.contains(p.0)))
        .map(|(s, _)| *s)
        .filter(|s| st.contains(&SubState::SyncClosed(*s)))
        .collect();
    if inert.is_empty() {
        return Cow::Borrowed(st);
    }
    let mut out = st.clone();
    out.subs
        .retain(|sub| !matches!(sub, SubState::SyncClosed(s) if inert.contains(s)));
    out.syncs.retain(|s, _| !inert.contains(s));
    Cow::Owned(out)
}

// Dense bit set over small ids.
#[derive(Default)]
struct IdSet(Vec<bool>);

impl IdSet {
    fn insert(&mut self, id: u32) {
        let i = id as usize;
        if i >= self.0.len() {
            self.0.resize(i + 1, false);
        }
        self.0[i] = true;
    }

    fn contains(&self, id: u32) -> bool {
        self.0.get(id as usize).copied().unwrap_or(false)
    }
}

/// Applies an id renaming. Ids missing from the maps are left unchanged.
pub fn rename(
    st: &MachineState,
    points: &HashMap<PointId, PointId>,
    syncs: &HashMap<SyncId, SyncId>,
) -> MachineState {
    rename_with(
        st,
        |x| points.get(&x).copied().unwrap_or(x),
        |y| syncs.get(&y).copied().unwrap_or(y),
    )
}

fn rename_with(
    st: &MachineState,
    p: impl Fn(PointId) -> PointId,
    s: impl Fn(SyncId) -> SyncId,
) -> MachineState {
    let mut subs: Vec<SubState> = st
        .subs
        .iter()
        .map(|sub| match sub {
            SubState::PointBound(x, a) => SubState::PointBound(p(*x), a.clone()),
            SubState::Candidate(x) => SubState::Candidate(p(*x)),
            SubState::Released(a) => SubState::Released(a.clone()),
            SubState::ChanFree(c) => SubState::ChanFree(c.clone()),
            SubState::ChanMatch(c, x, y) => SubState::ChanMatch(c.clone(), p(*x), p(*y)),
            SubState::SyncOpen(y) => SubState::SyncOpen(s(*y)),
            SubState::SyncClosed(y) => SubState::SyncClosed(s(*y)),
            SubState::Selected(y, x) => SubState::Selected(s(*y), p(*x)),
            SubState::Rejected(x) => SubState::Rejected(p(*x)),
            SubState::Done(y, x) => SubState::Done(s(*y), p(*x)),
            SubState::Retry(y) => SubState::Retry(s(*y)),
        })
        .collect();
    subs.sort_unstable();
    let table: BTreeMap<SyncId, BTreeMap<PointId, Action>> = st
        .syncs
        .iter()
        .map(|(y, dom)| (s(*y), dom.iter().map(|(x, a)| (p(*x), a.clone())).collect()))
        .collect();
    let next_point = table
        .values()
        .flat_map(|dom| dom.keys().copied())
        .chain(subs.iter().flat_map(points_of))
        .map(|x| x.0 + 1)
        .max()
        .unwrap_or(0);
    let next_sync = table.keys().map(|y| y.0 + 1).max().unwrap_or(0);
    MachineState {
        subs,
        syncs: table,
        channels: st.channels.clone(),
        next_point,
        next_sync,
    }
}

// Kinds of sub-state mentioning a point or synchronizer, as packed 4-bit counts.
fn tag_bits(sub: &SubState, p: PointId) -> u32 {
    let shift = match sub {
        SubState::PointBound(..) => 0,
        SubState::Candidate(_) => 1,
        SubState::Selected(..) => 2,
        SubState::Rejected(_) => 3,
        SubState::Done(..) => 4,
        SubState::ChanMatch(_, x, _) if *x == p => 5,
        SubState::ChanMatch(..) => 6,
        _ => 7,
    };
    1 << (4 * shift)
}

fn sync_bits(sub: &SubState) -> Option<(SyncId, u32)> {
    let (s, shift) = match *sub {
        SubState::SyncOpen(s) => (s, 0),
        SubState::SyncClosed(s) => (s, 1),
        SubState::Selected(s, _) => (s, 2),
        SubState::Done(s, _) => (s, 3),
        SubState::Retry(s) => (s, 4),
        _ => return None,
    };
    Some((s, 1 << (4 * shift)))
}

fn slot(v: &mut Vec<u32>, id: u32) -> &mut u32 {
    slot_with(v, id, 0)
}

fn slot_with(v: &mut Vec<u32>, id: u32, fill: u32) -> &mut u32 {
    let i = id as usize;
    if i >= v.len() {
        v.resize(i + 1, fill);
    }
    &mut v[i]
}

/// Canonical representative: inert junk dropped, synchronizers numbered in
/// order of a name-independent signature, points numbered in signature order
/// within their synchronizer.
///
/// Ties need no search in well-formed states: a channel has at most one match,
/// so two synchronizers with equal signatures cannot both own a matched point,
/// and points tied inside one synchronizer are mentioned by identical
/// sub-states. Either way swapping tied ids leaves the renamed state unchanged.
pub fn canonicalize(st: &MachineState) -> MachineState {
    let st = collect_junk_cow(st);
    let st = st.as_ref();
    let mut point_tags: Vec<u32> = Vec::new();
    let mut sync_tags: Vec<u32> = Vec::new();
    for sub in &st.subs {
        for p in points_of(sub) {
            *slot(&mut point_tags, p.0) += tag_bits(sub, p);
        }
        if let Some((s, bits)) = sync_bits(sub) {
            *slot(&mut sync_tags, s.0) += bits;
        }
    }
    let tags_of = |v: &[u32], id: u32| v.get(id as usize).copied().unwrap_or(0);

    type PointSig<'a> = (&'a Action, u32);
    let mut ordered: Vec<(u32, Vec<PointSig<'_>>, SyncId, Vec<PointId>)> = st
        .syncs
        .iter()
        .map(|(&s, dom)| {
            let mut pts: Vec<(PointSig<'_>, PointId)> = dom
                .iter()
                .map(|(&p, a)| ((a, tags_of(&point_tags, p.0)), p))
                .collect();
            pts.sort_unstable();
            let sigs = pts.iter().map(|(sig, _)| *sig).collect();
            (
                tags_of(&sync_tags, s.0),
                sigs,
                s,
                pts.into_iter().map(|(_, p)| p).collect(),
            )
        })
        .collect();
    ordered.sort_unstable_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));

    const UNSET: u32 = u32::MAX;
    let mut point_map: Vec<u32> = Vec::new();
    let mut sync_map: Vec<u32> = Vec::new();
    let mut next = 0;
    let mut assign = |map: &mut Vec<u32>, p: PointId| {
        let i = p.0 as usize;
        if i >= map.len() {
            map.resize(i + 1, UNSET);
        }
        if map[i] == UNSET {
            map[i] = next;
            next += 1;
        }
    };
    for (i, (_, _, s, pts)) in ordered.iter().enumerate() {
        *slot_with(&mut sync_map, s.0, UNSET) = i as u32;
        for &p in pts {
            assign(&mut point_map, p);
        }
    }
    // Points no synchronizer owns only occur in malformed states; number them last.
    for sub in &st.subs {
        for p in points_of(sub) {
            assign(&mut point_map, p);
        }
    }
    rename_with(
        st,
        |p| PointId(point_map[p.0 as usize]),
        |s| SyncId(sync_map[s.0 as usize]),
    )
}
