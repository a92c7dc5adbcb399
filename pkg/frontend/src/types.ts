/** Wire and view types mirrored from the gateway's documented API. */

export type RiskLevel = "Low" | "Moderate" | "High" | "Critical";
export type Stage = "Entry" | "Basic" | "Middle" | "Advanced";

export const STAGES: Stage[] = ["Entry", "Basic", "Middle", "Advanced"];
export const RISK_LEVELS: RiskLevel[] = ["Low", "Moderate", "High", "Critical"];

export type RecommendationKind =
  | "PrescriptionUpdate"
  | "TherapyStageChange"
  | "Instruction"
  | "EmergencyAck";

export const RECOMMENDATION_KINDS: RecommendationKind[] = [
  "PrescriptionUpdate", "TherapyStageChange", "Instruction", "EmergencyAck",
];

export interface RosterRow {
  patient_id: string;
  stage: Stage;
  risk_level: RiskLevel;
  risk_score: number;
  engagement_proxy: number;
  outstanding_alerts: number;
  sessions: Record<string, number>;
}

export interface AlertCause {
  kind: string;
  value: number;
  threshold: number;
  bound: "lower" | "upper";
}

export interface AlertRow {
  alert_id: string;
  patient_id: string;
  cause: AlertCause;
  created_at: number;
  notified_at: number;
}

export interface KindSummary {
  mean: number;
  min: number;
  max: number;
  count: number;
}

export interface TelemetryWindow {
  window: [number, number];
  vitals: Record<string, KindSummary>;
  ambient: Record<string, KindSummary>;
  network_info: {
    network_type: string;
    service_data_flow_bytes: number;
    communication_quality: number;
  };
}

export interface EmergencyRule {
  kind: string;
  lower?: number | null;
  upper?: number | null;
}

export interface GatewayConfig {
  stages: Stage[];
  risk_levels: RiskLevel[];
  stage_trees: Record<Stage, string[]>;
  emergency_rules: EmergencyRule[];
  patients: string[];
  duration_ms: number;
}

export interface Recommendation {
  expert_id: string;
  patient_id: string;
  kind: RecommendationKind;
  payload: Record<string, unknown>;
  issued_at: number;
}

/** One event off the gateway's server-push feed. */
export interface StreamEvent {
  name: string;           // risk_change | alert | session_closed | ...
  seq: number;
  t: number;
  target: string;
  kind: string;
  payload: any;
}

export type ConnectionState = "connecting" | "live" | "lost";

export interface SubmitResult {
  code: number;
  status: "accepted" | "rejected";
  violations?: string[];
}
