// Wire types of the scheduling service API.

export interface WorkspaceSummary {
  id: string;
  patients: number;
  operators: number;
  sessions: number;
  has_board: boolean;
  board_dirty: boolean;
  has_agenda: boolean;
  job: JobStatus | null;
}

export interface JobStatus {
  phase: "board" | "agenda";
  state: "queued" | "running" | "done" | "cancelled";
  progress: number[] | null;
  outcome: string | null;
  started_at: number;
}

export interface OperatorWorkload {
  operator: number;
  patients: number[];
  workload: number;
  total_time: number | null;
  max_patients: number | null;
  per_patient: Record<string, number>;
}

export interface BoardPayload {
  assignment: Record<string, number>;
  cost: number[] | null;
  dirty: boolean;
  violations: Violation[];
  workloads: OperatorWorkload[];
  preference_weights: Record<string, number>;
}

export interface Violation {
  rule: string;
  entities: string[];
  detail: string;
}

export interface SessionPlacement {
  session: string;
  period: number;
  start: number;
  length: number;
  before: number;
  after: number;
  location: string;
}

export interface GanttSegment {
  kind: "individual" | "supervised";
  start: number;
  end: number;
}

export interface GanttBlock {
  session: string;
  patient: number;
  location: string;
  start: number;
  end: number;
  segments: GanttSegment[];
}

export interface GanttRow {
  operator: number;
  period: number;
  shift: { start: number; end: number };
  blocks: GanttBlock[];
}

export interface AgendaPayload {
  placements: SessionPlacement[];
  cost: number[];
  violations: Violation[];
  gantt: GanttRow[];
  unassigned_patients: number[];
}
