// Board view-model: operator columns with workload bars and preference
// badges, derived purely from the served payload.

import type { BoardPayload, Violation } from "./types.js";

export interface PatientChip {
  patient: number;
  preferenceWeight: number;
  contribution: number;
}

export interface OperatorColumn {
  operator: number;
  label: string;
  patients: PatientChip[];
  workload: number;
  totalTime: number | null;
  /** 0..1 share of the contract used; null when the contract is unbounded. */
  workloadRatio: number | null;
  overCapacity: boolean;
}

export interface BoardViewModel {
  columns: OperatorColumn[];
  cost: number[] | null;
  dirty: boolean;
  violations: Violation[];
}

export function buildBoardViewModel(payload: BoardPayload): BoardViewModel {
  const columns: OperatorColumn[] = payload.workloads.map((w) => {
    const patients = w.patients.map((pid) => ({
      patient: pid,
      preferenceWeight: payload.preference_weights[String(pid)] ?? 0,
      contribution: w.per_patient[String(pid)] ?? 0,
    }));
    const ratio = w.total_time === null || w.total_time === 0 ? null : w.workload / w.total_time;
    return {
      operator: w.operator,
      label: w.operator === -1 ? "unassigned" : `operator ${w.operator}`,
      patients,
      workload: w.workload,
      totalTime: w.total_time,
      workloadRatio: ratio,
      overCapacity: ratio !== null && ratio > 1,
    };
  });
  columns.sort((a, b) => a.operator - b.operator);
  return {
    columns,
    cost: payload.cost,
    dirty: payload.dirty,
    violations: payload.violations,
  };
}

/** Operators a patient may be reassigned to (everything except its current one). */
export function reassignmentTargets(payload: BoardPayload, patient: number): number[] {
  const current = payload.assignment[String(patient)];
  return payload.workloads
    .map((w) => w.operator)
    .filter((oid) => oid !== current)
    .sort((a, b) => a - b);
}

export function describeViolation(v: Violation): string {
  return `${v.rule}: ${v.detail}`;
}
