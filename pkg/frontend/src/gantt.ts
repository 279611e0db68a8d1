// Timetable geometry: converts served Gantt rows into positioned rectangles.
// Slot math only; the segment boundaries come from the service untouched.

import type { AgendaPayload, GanttRow } from "./types.js";

export const SLOT_WIDTH = 26; // px per 10-minute slot
export const ROW_HEIGHT = 34;
export const SEGMENT_COLORS = {
  individual: "#9ecbff",
  supervised: "#ffe066",
} as const;

export interface SegmentRect {
  session: string;
  patient: number;
  location: string;
  kind: "individual" | "supervised";
  /** slot coordinates, half-open */
  startSlot: number;
  endSlot: number;
  /** pixel geometry inside the row */
  x: number;
  width: number;
  color: string;
}

export interface RowLayout {
  operator: number;
  period: number;
  label: string;
  shiftStart: number;
  shiftEnd: number;
  y: number;
  segments: SegmentRect[];
}

export function layoutRows(rows: GanttRow[], slotWidth = SLOT_WIDTH): RowLayout[] {
  return rows.map((row, index) => {
    const segments: SegmentRect[] = [];
    for (const block of row.blocks) {
      for (const seg of block.segments) {
        segments.push({
          session: block.session,
          patient: block.patient,
          location: block.location,
          kind: seg.kind,
          startSlot: seg.start,
          endSlot: seg.end,
          x: seg.start * slotWidth,
          width: (seg.end - seg.start) * slotWidth,
          color: SEGMENT_COLORS[seg.kind],
        });
      }
    }
    segments.sort((a, b) => a.startSlot - b.startSlot || a.session.localeCompare(b.session));
    return {
      operator: row.operator,
      period: row.period,
      label: `op ${row.operator} · ${row.period === 0 ? "AM" : "PM"}`,
      shiftStart: row.shift.start,
      shiftEnd: row.shift.end,
      y: index * ROW_HEIGHT,
      segments,
    };
  });
}

export interface SessionGeometry {
  session: string;
  extStart: number;
  extEnd: number;
  individualStart: number;
  individualEnd: number;
  supervisedBefore: [number, number] | null;
  supervisedAfter: [number, number] | null;
}

/** Per-session boundaries as the timetable draws them, for cross-checking
 * against the raw placements. */
export function sessionGeometries(layout: RowLayout[]): Map<string, SessionGeometry> {
  const out = new Map<string, SessionGeometry>();
  for (const row of layout) {
    const bySession = new Map<string, SegmentRect[]>();
    for (const seg of row.segments) {
      const list = bySession.get(seg.session) ?? [];
      list.push(seg);
      bySession.set(seg.session, list);
    }
    for (const [session, segs] of bySession) {
      segs.sort((a, b) => a.startSlot - b.startSlot);
      const individual = segs.find((s) => s.kind === "individual");
      if (!individual) {
        continue; // the service always serves an individual core
      }
      const before = segs.find((s) => s.kind === "supervised" && s.endSlot <= individual.startSlot);
      const after = segs.find((s) => s.kind === "supervised" && s.startSlot >= individual.endSlot);
      out.set(session, {
        session,
        extStart: segs[0].startSlot,
        extEnd: segs[segs.length - 1].endSlot,
        individualStart: individual.startSlot,
        individualEnd: individual.endSlot,
        supervisedBefore: before ? [before.startSlot, before.endSlot] : null,
        supervisedAfter: after ? [after.startSlot, after.endSlot] : null,
      });
    }
  }
  return out;
}

/** Sanity predicate used by tests: segments of every block tile its extent. */
export function blocksAreContiguous(payload: AgendaPayload): boolean {
  for (const row of payload.gantt) {
    for (const block of row.blocks) {
      if (block.segments.length === 0) return false;
      if (block.segments[0].start !== block.start) return false;
      if (block.segments[block.segments.length - 1].end !== block.end) return false;
      for (let i = 1; i < block.segments.length; i++) {
        if (block.segments[i - 1].end !== block.segments[i].start) return false;
      }
    }
  }
  return true;
}
