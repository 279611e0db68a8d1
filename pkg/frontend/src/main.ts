// Single-page coordinator app: upload -> board review/edit -> agenda.
// One in-flight mutation at a time; job progress polled once a second.

import { ApiError, Client, waitForJob } from "./api.js";
import { buildBoardViewModel, describeViolation, reassignmentTargets } from "./board.js";
import { layoutRows, ROW_HEIGHT, SLOT_WIDTH } from "./gantt.js";
import type { BoardPayload } from "./types.js";

const client = new Client("");
let workspaceId: string | null = null;
let busy = false;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setStatus(text: string) {
  el<HTMLDivElement>("status").textContent = text;
}

async function guarded(action: () => Promise<void>) {
  if (busy) return;
  busy = true;
  try {
    await action();
  } catch (err) {
    if (err instanceof ApiError) {
      const body = err.body as { detail?: string; violations?: { rule: string; detail: string }[] };
      const parts = [] as string[];
      if (body?.detail) parts.push(body.detail);
      for (const v of body?.violations ?? []) parts.push(`${v.rule}: ${v.detail}`);
      setStatus(`rejected: ${parts.join("; ") || err.status}`);
    } else {
      setStatus(`error: ${String(err)}`);
    }
  } finally {
    busy = false;
  }
}

function renderBoard(payload: BoardPayload) {
  const vm = buildBoardViewModel(payload);
  el<HTMLSpanElement>("board-cost").textContent = vm.cost ? vm.cost.join(" / ") : "-";
  el<HTMLSpanElement>("board-dirty").textContent = vm.dirty ? "edited by hand" : "as solved";
  const host = el<HTMLDivElement>("board-columns");
  host.replaceChildren();
  for (const column of vm.columns) {
    const div = document.createElement("div");
    div.className = "op-column" + (column.overCapacity ? " over" : "");
    const ratio = column.workloadRatio;
    const bar = ratio === null ? "" :
      `<div class="bar"><div class="fill" style="width:${Math.min(100, ratio * 100)}%"></div></div>`;
    div.innerHTML = `<h3>${column.label}</h3>
      <div class="load">${column.workload}${column.totalTime !== null ? " / " + column.totalTime : ""} slots</div>
      ${bar}`;
    for (const chip of column.patients) {
      const row = document.createElement("div");
      row.className = "patient";
      row.innerHTML = `<span>p${chip.patient}</span><span class="badge">w${chip.preferenceWeight}</span>`;
      const select = document.createElement("select");
      const keep = document.createElement("option");
      keep.textContent = "move to…";
      keep.value = "";
      select.append(keep);
      for (const target of reassignmentTargets(payload, chip.patient)) {
        const option = document.createElement("option");
        option.value = String(target);
        option.textContent = target === -1 ? "unassigned" : `operator ${target}`;
        select.append(option);
      }
      select.addEventListener("change", () => {
        const value = select.value;
        if (value === "") return;
        void guarded(async () => {
          const updated = await client.editBoard(workspaceId!, [
            { patient: chip.patient, operator: Number(value) },
          ]);
          setStatus("board updated; agenda cleared");
          renderBoard(updated);
          el<HTMLDivElement>("gantt").replaceChildren();
        });
      });
      row.append(select);
      div.append(row);
    }
    host.append(div);
  }
  el<HTMLDivElement>("board-violations").textContent =
    vm.violations.map(describeViolation).join("; ");
}

function renderGantt(rows: ReturnType<typeof layoutRows>, cost: number[]) {
  el<HTMLSpanElement>("agenda-cost").textContent = cost.join(" / ");
  const host = el<HTMLDivElement>("gantt");
  host.replaceChildren();
  host.style.position = "relative";
  host.style.height = `${rows.length * ROW_HEIGHT + 20}px`;
  for (const row of rows) {
    const label = document.createElement("div");
    label.className = "gantt-label";
    label.style.top = `${row.y}px`;
    label.textContent = row.label;
    host.append(label);
    const shift = document.createElement("div");
    shift.className = "gantt-shift";
    shift.style.top = `${row.y + 4}px`;
    shift.style.left = `${90 + row.shiftStart * SLOT_WIDTH}px`;
    shift.style.width = `${(row.shiftEnd - row.shiftStart) * SLOT_WIDTH}px`;
    host.append(shift);
    for (const seg of row.segments) {
      const div = document.createElement("div");
      div.className = `segment ${seg.kind}`;
      div.style.top = `${row.y + 4}px`;
      div.style.left = `${90 + seg.x}px`;
      div.style.width = `${seg.width}px`;
      div.style.background = seg.color;
      div.title = `${seg.session} p${seg.patient} @ ${seg.location} [${seg.startSlot},${seg.endSlot})`;
      div.textContent = seg.session;
      host.append(div);
    }
  }
}

async function refreshBoard() {
  renderBoard(await client.board(workspaceId!));
}

function wire() {
  el<HTMLButtonElement>("upload").addEventListener("click", () => {
    void guarded(async () => {
      const doc = JSON.parse(el<HTMLTextAreaElement>("instance-json").value);
      const { id } = await client.createWorkspace(doc);
      workspaceId = id;
      setStatus(`workspace ${id} created`);
    });
  });

  el<HTMLButtonElement>("solve-board").addEventListener("click", () => {
    void guarded(async () => {
      await client.solveBoard(workspaceId!, { cutoff: 30 });
      setStatus("solving board…");
      const job = await waitForJob(client, workspaceId!, (j) =>
        setStatus(`board ${j.state}${j.progress ? " best " + j.progress.join("/") : ""}`));
      setStatus(`board ${job.outcome}`);
      await refreshBoard();
    });
  });

  el<HTMLButtonElement>("solve-agenda").addEventListener("click", () => {
    void guarded(async () => {
      await client.solveAgenda(workspaceId!, { cutoff: 30 });
      setStatus("solving agenda…");
      const job = await waitForJob(client, workspaceId!, (j) =>
        setStatus(`agenda ${j.state}${j.progress ? " best " + j.progress.join("/") : ""}`));
      setStatus(`agenda ${job.outcome}`);
      if (job.outcome === "OptimumFound" || job.outcome === "Satisfiable") {
        const agenda = await client.agenda(workspaceId!);
        renderGantt(layoutRows(agenda.gantt), agenda.cost);
      }
    });
  });

  el<HTMLButtonElement>("cancel-job").addEventListener("click", () => {
    void guarded(async () => {
      await client.cancelJob(workspaceId!);
      setStatus("cancelling…");
    });
  });
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  wire();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", wire);
}
