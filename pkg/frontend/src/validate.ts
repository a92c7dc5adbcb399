/** Client-side mirror of the gateway's recommendation validation rules:
 * a form that fails here is unsubmittable, and the server would reject it
 * with the same violation texts. */

import { Recommendation, RECOMMENDATION_KINDS, STAGES, Stage } from "./types.js";

export function validateRecommendation(rec: Recommendation): string[] {
  const violations: string[] = [];
  if (!RECOMMENDATION_KINDS.includes(rec.kind)) {
    violations.push(`kind: unknown recommendation kind '${rec.kind}'`);
  } else if (rec.kind === "TherapyStageChange") {
    const target = rec.payload["target_stage"] as Stage | undefined;
    if (!target || !STAGES.includes(target)) {
      violations.push("payload.target_stage: must be one of " + STAGES.join("/"));
    }
  } else if (rec.kind === "EmergencyAck") {
    if (!rec.payload["alert_id"]) {
      violations.push("payload.alert_id: must reference an alert");
    }
  }
  if (!rec.expert_id || !rec.patient_id) {
    violations.push("expert_id/patient_id: must be non-empty");
  }
  return violations;
}
