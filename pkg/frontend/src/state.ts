/** Console view model: a store whose state derives only from gateway API
 * responses and stream events.
 *
 * Steering submissions are optimistic-with-reconciliation: a pending
 * marker appears immediately and is cleared only by the stream event that
 * proves the change took effect (stage_change / alert_cleared), because
 * expert actions apply at session boundaries, not instantly.  Reloading
 * the page mid-run reconstructs an equivalent view from bootstrap() plus
 * the stream alone.
 */

import { GatewayClient } from "./api.js";
import {
  AlertRow, ConnectionState, GatewayConfig, Recommendation, RISK_LEVELS,
  RosterRow, Stage, StreamEvent, SubmitResult, TelemetryWindow,
} from "./types.js";
import { validateRecommendation } from "./validate.js";

export type AckState = "outstanding" | "ack_pending" | "already_acked";

export interface AlertView extends AlertRow {
  ack: AckState;
}

export interface ConsoleState {
  connection: ConnectionState;
  config: GatewayConfig | null;
  roster: RosterRow[];                  // sorted: Critical first, then id
  alerts: AlertView[];
  stagePending: Record<string, Stage>;  // patient -> requested stage
  selected: string | null;
  telemetry: TelemetryWindow[];
  formErrors: string[];
  feed: StreamEvent[];                  // most recent last
}

const FEED_LIMIT = 200;

function riskRank(level: string): number {
  return RISK_LEVELS.indexOf(level as any);
}

export function sortRoster(rows: RosterRow[]): RosterRow[] {
  return [...rows].sort((a, b) =>
    riskRank(b.risk_level) - riskRank(a.risk_level) ||
    a.patient_id.localeCompare(b.patient_id));
}

export class ConsoleStore {
  state: ConsoleState = {
    connection: "connecting",
    config: null,
    roster: [],
    alerts: [],
    stagePending: {},
    selected: null,
    telemetry: [],
    formErrors: [],
    feed: [],
  };

  private listeners = new Set<(state: ConsoleState) => void>();
  private stopStream: (() => void) | null = null;

  constructor(
    private readonly client: GatewayClient,
    private readonly expertId: string,
  ) {}

  subscribe(listener: (state: ConsoleState) => void): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  private patch(partial: Partial<ConsoleState>): void {
    this.state = { ...this.state, ...partial };
    this.emit();
  }

  /** Fetch everything needed to reconstruct the view from scratch. */
  async bootstrap(): Promise<void> {
    const [config, roster, alerts] = await Promise.all([
      this.client.config(), this.client.patients(), this.client.alerts(),
    ]);
    this.patch({
      config,
      roster: sortRoster(roster),
      alerts: alerts.map((a) => ({ ...a, ack: "outstanding" as AckState })),
    });
  }

  connect(): void {
    this.stopStream = this.client.stream(
      (event) => this.applyStream(event),
      (connection) => this.patch({ connection }),
    );
  }

  disconnect(): void {
    this.stopStream?.();
    this.stopStream = null;
  }

  async selectPatient(patientId: string, window = 30): Promise<void> {
    const telemetry = await this.client.telemetry(patientId, window);
    this.patch({ selected: patientId, telemetry });
  }

  /** Apply one stream event; every visible change traces to one of these. */
  applyStream(event: StreamEvent): void {
    const feed = [...this.state.feed, event].slice(-FEED_LIMIT);
    switch (event.name) {
      case "risk_change": {
        const { patient_id, level, score } = event.payload;
        const roster = sortRoster(this.state.roster.map((row) =>
          row.patient_id === patient_id
            ? { ...row, risk_level: level, risk_score: score }
            : row));
        this.patch({ roster, feed });
        return;
      }
      case "alert": {
        const body = event.payload.msg.body;
        const exists = this.state.alerts.some((a) => a.alert_id === body.alert_id);
        const alerts = exists ? this.state.alerts : [
          ...this.state.alerts,
          { ...body, notified_at: event.t, ack: "outstanding" as AckState },
        ];
        const roster = sortRoster(this.state.roster.map((row) =>
          row.patient_id === body.patient_id
            ? { ...row, outstanding_alerts: row.outstanding_alerts + (exists ? 0 : 1) }
            : row));
        this.patch({ alerts, roster, feed });
        return;
      }
      case "alert_cleared": {
        const { alert_id, patient_id } = event.payload;
        const alerts = this.state.alerts.filter((a) => a.alert_id !== alert_id);
        const roster = this.state.roster.map((row) =>
          row.patient_id === patient_id
            ? { ...row, outstanding_alerts: Math.max(0, row.outstanding_alerts - 1) }
            : row);
        this.patch({ alerts, roster: sortRoster(roster), feed });
        return;
      }
      case "stage_change": {
        const { patient_id, stage } = event.payload;
        const stagePending = { ...this.state.stagePending };
        if (stagePending[patient_id] === stage) {
          delete stagePending[patient_id];  // confirmed: pending marker drops
        }
        const roster = sortRoster(this.state.roster.map((row) =>
          row.patient_id === patient_id ? { ...row, stage } : row));
        this.patch({ roster, stagePending, feed });
        return;
      }
      case "session_closed": {
        const { patient_id, outcome } = event.payload;
        const roster = this.state.roster.map((row) => {
          if (row.patient_id !== patient_id) return row;
          const sessions = { ...row.sessions };
          sessions[outcome] = (sessions[outcome] ?? 0) + 1;
          return { ...row, sessions };
        });
        this.patch({ roster, feed });
        return;
      }
      default:
        this.patch({ feed });
    }
  }

  private recommendation(
    patientId: string, kind: Recommendation["kind"],
    payload: Record<string, unknown>,
  ): Recommendation {
    return {
      expert_id: this.expertId,
      patient_id: patientId,
      kind,
      payload,
      issued_at: 0, // stamped by the gateway's virtual clock on application
    };
  }

  /** Stage change: optimistic pending marker until the stream confirms. */
  async submitStageChange(patientId: string, target: Stage): Promise<SubmitResult> {
    const rec = this.recommendation(patientId, "TherapyStageChange",
                                    { target_stage: target });
    const violations = validateRecommendation(rec);
    if (violations.length > 0) {
      this.patch({ formErrors: violations });
      return { code: 0, status: "rejected", violations };
    }
    this.patch({
      formErrors: [],
      stagePending: { ...this.state.stagePending, [patientId]: target },
    });
    const result = await this.client.submitRecommendation(rec);
    if (result.status !== "accepted") {
      const stagePending = { ...this.state.stagePending };
      delete stagePending[patientId];  // revert the optimistic marker
      this.patch({ stagePending, formErrors: result.violations ?? [] });
    }
    return result;
  }

  /** Alert acknowledgment; a 409 means someone acked it first. */
  async submitAck(alertId: string): Promise<SubmitResult> {
    const alert = this.state.alerts.find((a) => a.alert_id === alertId);
    if (!alert) {
      return { code: 0, status: "rejected", violations: ["unknown alert"] };
    }
    const rec = this.recommendation(alert.patient_id, "EmergencyAck",
                                    { alert_id: alertId });
    this.markAck(alertId, "ack_pending");
    const result = await this.client.submitRecommendation(rec);
    if (result.code === 409) {
      this.markAck(alertId, "already_acked");
      const fresh = await this.client.alerts();
      this.patch({
        alerts: fresh.map((a) => ({ ...a, ack: "outstanding" as AckState })),
      });
    } else if (result.status !== "accepted") {
      this.markAck(alertId, "outstanding");
      this.patch({ formErrors: result.violations ?? [] });
    }
    return result;
  }

  async submitNote(patientId: string, kind: "PrescriptionUpdate" | "Instruction",
                   text: string): Promise<SubmitResult> {
    const rec = this.recommendation(patientId, kind, { text });
    const violations = validateRecommendation(rec);
    if (violations.length > 0) {
      this.patch({ formErrors: violations });
      return { code: 0, status: "rejected", violations };
    }
    return this.client.submitRecommendation(rec);
  }

  private markAck(alertId: string, ack: AckState): void {
    this.patch({
      alerts: this.state.alerts.map((a) =>
        a.alert_id === alertId ? { ...a, ack } : a),
    });
  }
}
