/** Typed client for the gateway HTTP/JSON + server-push API.
 *
 * The event stream is consumed with fetch + ReadableStream rather than
 * EventSource so the same code runs in the browser and under node test
 * runners; it reconnects automatically with backoff and reports
 * connection state transitions to the caller.
 */

import {
  AlertRow, ConnectionState, GatewayConfig, Recommendation, RosterRow,
  StreamEvent, SubmitResult, TelemetryWindow,
} from "./types.js";

export class GatewayClient {
  constructor(private readonly base: string) {}

  private async getJson<T>(path: string): Promise<T> {
    const response = await fetch(this.base + path);
    if (!response.ok) {
      throw new Error(`${path}: HTTP ${response.status}`);
    }
    return (await response.json()) as T;
  }

  config(): Promise<GatewayConfig> {
    return this.getJson("/api/config");
  }

  patients(): Promise<RosterRow[]> {
    return this.getJson("/api/patients");
  }

  alerts(): Promise<AlertRow[]> {
    return this.getJson("/api/alerts");
  }

  telemetry(patientId: string, window = 30): Promise<TelemetryWindow[]> {
    return this.getJson(
      `/api/patients/${encodeURIComponent(patientId)}/telemetry?window=${window}`);
  }

  metrics(): Promise<any> {
    return this.getJson("/api/metrics");
  }

  /** POST a recommendation in the canonical wire envelope. */
  async submitRecommendation(rec: Recommendation): Promise<SubmitResult> {
    const body = JSON.stringify({ v: 1, msg: "expert_recommendation", body: rec });
    const response = await fetch(this.base + "/api/recommendations", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body,
    });
    const parsed = await response.json().catch(() => ({}));
    return {
      code: response.status,
      status: response.ok ? "accepted" : "rejected",
      violations: parsed.violations,
    };
  }

  /** Subscribe to /api/stream; returns a stop function. */
  stream(
    onEvent: (event: StreamEvent) => void,
    onStatus: (state: ConnectionState) => void,
  ): () => void {
    let stopped = false;
    let attempt = 0;

    const connect = async (): Promise<void> => {
      while (!stopped) {
        onStatus(attempt === 0 ? "connecting" : "lost");
        try {
          const response = await fetch(this.base + "/api/stream");
          if (!response.ok || !response.body) {
            throw new Error(`stream: HTTP ${response.status}`);
          }
          onStatus("live");
          attempt = 0;
          await this.readStream(response.body, onEvent, () => stopped);
        } catch {
          // fall through to reconnect
        }
        if (stopped) return;
        onStatus("lost");
        attempt += 1;
        await sleep(Math.min(5000, 250 * 2 ** Math.min(attempt, 4)));
      }
    };

    void connect();
    return () => {
      stopped = true;
    };
  }

  private async readStream(
    body: ReadableStream<Uint8Array>,
    onEvent: (event: StreamEvent) => void,
    isStopped: () => boolean,
  ): Promise<void> {
    const reader = body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    try {
      for (;;) {
        const { done, value } = await reader.read();
        if (done || isStopped()) return;
        buffer += decoder.decode(value, { stream: true });
        let boundary;
        while ((boundary = buffer.indexOf("\n\n")) >= 0) {
          const record = buffer.slice(0, boundary);
          buffer = buffer.slice(boundary + 2);
          const event = parseSseRecord(record);
          if (event) onEvent(event);
        }
      }
    } finally {
      reader.releaseLock();
    }
  }
}

export function parseSseRecord(record: string): StreamEvent | null {
  let name = "message";
  const dataLines: string[] = [];
  for (const line of record.split("\n")) {
    if (line.startsWith(":")) continue; // keepalive comment
    if (line.startsWith("event: ")) name = line.slice(7).trim();
    else if (line.startsWith("data: ")) dataLines.push(line.slice(6));
  }
  if (dataLines.length === 0) return null;
  try {
    const parsed = JSON.parse(dataLines.join("\n"));
    return {
      name,
      seq: parsed.seq,
      t: parsed.t,
      target: parsed.target,
      kind: parsed.kind,
      payload: parsed.payload,
    };
  } catch {
    return null;
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
