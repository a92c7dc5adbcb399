/** DOM rendering: translates ConsoleState into the page.  All state lives
 * in the store; this module only draws it and forwards user intent. */

import { chartSvg } from "./chart.js";
import { ConsoleState, ConsoleStore } from "./state.js";
import { STAGES, Stage } from "./types.js";

const CHART_KINDS = ["SpO2", "Heartbeat", "SystolicPressure", "BodyTemp",
                     "Respiration", "AmbientTemp", "Humidity"];

export class ConsoleView {
  private chartKind = "SpO2";

  constructor(private readonly root: HTMLElement,
              private readonly store: ConsoleStore) {
    store.subscribe((state) => this.render(state));
  }

  private render(state: ConsoleState): void {
    this.root.innerHTML = [
      this.banner(state),
      `<div class="columns">`,
      `<section class="panel">${this.roster(state)}${this.steering(state)}</section>`,
      `<section class="panel">${this.telemetry(state)}${this.alerts(state)}</section>`,
      `<section class="panel">${this.feed(state)}</section>`,
      `</div>`,
    ].join("");
    this.bind(state);
  }

  private banner(state: ConsoleState): string {
    if (state.connection === "live") {
      return `<div class="topbar"><span class="dot live"></span>live</div>`;
    }
    const label = state.connection === "lost"
      ? "connection lost, reconnecting"
      : "connecting";
    return `<div class="topbar warn"><span class="dot dead"></span>${label}</div>`;
  }

  private roster(state: ConsoleState): string {
    if (state.roster.length === 0) {
      return `<h2>Patients</h2><p class="empty">no patients in this run</p>`;
    }
    const rows = state.roster.map((row) => {
      const pending = state.stagePending[row.patient_id];
      const pendingTag = pending
        ? ` <span class="pending">&rarr; ${pending} pending</span>` : "";
      const selected = state.selected === row.patient_id ? " selected" : "";
      return `<tr class="roster-row${selected}" data-patient="${row.patient_id}">` +
        `<td>${row.patient_id}</td>` +
        `<td><span class="badge risk-${row.risk_level.toLowerCase()}">` +
        `${row.risk_level}</span></td>` +
        `<td>${row.stage}${pendingTag}</td>` +
        `<td>${(row.engagement_proxy * 100).toFixed(0)}%</td>` +
        `<td>${row.sessions["Success"] ?? 0}/${row.sessions["Failure"] ?? 0}</td>` +
        `<td>${row.outstanding_alerts || ""}</td></tr>`;
    });
    return `<h2>Patients</h2><table class="roster">` +
      `<thead><tr><th>id</th><th>risk</th><th>stage</th><th>engage</th>` +
      `<th>ok/fail</th><th>alerts</th></tr></thead>` +
      `<tbody>${rows.join("")}</tbody></table>`;
  }

  private steering(state: ConsoleState): string {
    const pid = state.selected;
    if (!pid) {
      return `<h2>Steering</h2><p class="empty">select a patient</p>`;
    }
    const options = STAGES.map((s) => `<option value="${s}">${s}</option>`).join("");
    const errors = state.formErrors.length
      ? `<ul class="errors">${state.formErrors.map((e) => `<li>${e}</li>`).join("")}</ul>`
      : "";
    return `<h2>Steering: ${pid}</h2>` +
      `<form id="stage-form">` +
      `<label>move to stage <select id="stage-select">${options}</select></label>` +
      `<button type="submit">request change</button></form>` +
      `<form id="note-form">` +
      `<input id="note-text" placeholder="instruction for the robot"/>` +
      `<button type="submit">send instruction</button></form>` +
      errors;
  }

  private telemetry(state: ConsoleState): string {
    const tabs = CHART_KINDS.map((kind) =>
      `<button class="tab${kind === this.chartKind ? " active" : ""}" ` +
      `data-kind="${kind}">${kind}</button>`).join("");
    const svg = state.selected
      ? chartSvg(state.telemetry, this.chartKind,
                 state.config?.emergency_rules ?? [],
                 state.alerts.filter((a) => a.patient_id === state.selected))
      : `<p class="empty">select a patient to chart telemetry</p>`;
    return `<h2>Telemetry</h2><div class="tabs">${tabs}</div>` +
      `<div id="chart">${svg}</div>`;
  }

  private alerts(state: ConsoleState): string {
    if (state.alerts.length === 0) {
      return `<h2>Alerts</h2><p class="empty">no outstanding alerts</p>`;
    }
    const rows = state.alerts.map((alert) => {
      const sign = alert.cause.bound === "lower" ? "<" : ">";
      const action = alert.ack === "outstanding"
        ? `<button class="ack" data-alert="${alert.alert_id}">acknowledge</button>`
        : alert.ack === "ack_pending" ? `<span class="pending">ack pending</span>`
        : `<span class="stale">already acknowledged</span>`;
      return `<li class="alert-row"><b>${alert.patient_id}</b> ` +
        `${alert.cause.kind} ${alert.cause.value} ${sign} ${alert.cause.threshold} ` +
        `at t=${alert.created_at} ${action}</li>`;
    });
    return `<h2>Alerts</h2><ul class="alerts">${rows.join("")}</ul>`;
  }

  private feed(state: ConsoleState): string {
    const rows = [...state.feed].slice(-30).reverse().map((ev) =>
      `<li><span class="t">${ev.t}</span> <b>${ev.name}</b> ` +
      `${ev.payload?.patient_id ?? ""}</li>`);
    return `<h2>Activity</h2><ul class="feed">${rows.join("")}</ul>`;
  }

  private bind(state: ConsoleState): void {
    for (const row of this.root.querySelectorAll<HTMLElement>(".roster-row")) {
      row.addEventListener("click", () => {
        void this.store.selectPatient(row.dataset.patient!);
      });
    }
    for (const tab of this.root.querySelectorAll<HTMLElement>(".tab")) {
      tab.addEventListener("click", () => {
        this.chartKind = tab.dataset.kind!;
        this.render(state);
      });
    }
    for (const button of this.root.querySelectorAll<HTMLElement>(".ack")) {
      button.addEventListener("click", () => {
        void this.store.submitAck(button.dataset.alert!);
      });
    }
    const stageForm = this.root.querySelector<HTMLFormElement>("#stage-form");
    stageForm?.addEventListener("submit", (event) => {
      event.preventDefault();
      const select = this.root.querySelector<HTMLSelectElement>("#stage-select")!;
      void this.store.submitStageChange(state.selected!, select.value as Stage);
    });
    const noteForm = this.root.querySelector<HTMLFormElement>("#note-form");
    noteForm?.addEventListener("submit", (event) => {
      event.preventDefault();
      const input = this.root.querySelector<HTMLInputElement>("#note-text")!;
      if (input.value.trim()) {
        void this.store.submitNote(state.selected!, "Instruction",
                                   input.value.trim());
        input.value = "";
      }
    });
  }
}
