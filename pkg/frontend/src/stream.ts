// NDJSON event stream reader: one JSON event per line over a long-lived
// response. Delivery is at-least-once, so events are deduplicated by seq;
// on any disconnect the reader resumes from the last seen seq.

import type { StreamEvent } from "./types.js";

export interface StreamOptions {
  baseUrl: string;
  sessionId: string;
  participantId: string;
  after?: number;
  onEvent: (event: StreamEvent) => void;
  onStatus?: (status: "connecting" | "live" | "closed" | "error") => void;
  fetchImpl?: typeof fetch;
  retryDelayMs?: number;
}

export interface StreamHandle {
  stop: () => void;
  done: Promise<void>;
  lastSeq: () => number;
}

export function splitLines(buffer: string, chunk: string): { lines: string[]; rest: string } {
  const combined = buffer + chunk;
  const parts = combined.split("\n");
  const rest = parts.pop() ?? "";
  return { lines: parts.filter((line) => line.trim().length > 0), rest };
}

export function openEventStream(options: StreamOptions): StreamHandle {
  const fetchImpl = options.fetchImpl ?? fetch;
  const retryDelay = options.retryDelayMs ?? 500;
  let lastSeq = options.after ?? 0;
  let stopped = false;

  const done = (async () => {
    while (!stopped) {
      options.onStatus?.("connecting");
      let response: Response;
      try {
        response = await fetchImpl(
          `${options.baseUrl.replace(/\/$/, "")}/api/sessions/${options.sessionId}` +
            `/events?after=${lastSeq}`,
          { headers: { "x-participant-id": options.participantId } },
        );
      } catch {
        options.onStatus?.("error");
        await sleep(retryDelay);
        continue;
      }
      if (response.status === 403 || response.status === 404) {
        options.onStatus?.("error");
        return;
      }
      if (!response.ok || !response.body) {
        options.onStatus?.("error");
        await sleep(retryDelay);
        continue;
      }
      options.onStatus?.("live");
      const reader = response.body.getReader();
      const decoder = new TextDecoder();
      let buffer = "";
      let sessionClosed = false;
      try {
        while (!stopped) {
          const { value, done: finished } = await reader.read();
          if (finished) break;
          const { lines, rest } = splitLines(buffer, decoder.decode(value, { stream: true }));
          buffer = rest;
          for (const line of lines) {
            let event: StreamEvent;
            try {
              event = JSON.parse(line);
            } catch {
              continue;
            }
            if (event.type === "heartbeat") continue;
            if (typeof event.seq !== "number" || event.seq <= lastSeq) continue;
            lastSeq = event.seq;
            options.onEvent(event);
            if (event.type === "phase_changed" && event.payload["to"] === "closed") {
              sessionClosed = true;
            }
          }
        }
      } catch {
        // drop through to reconnect
      } finally {
        reader.cancel().catch(() => undefined);
      }
      if (sessionClosed) {
        options.onStatus?.("closed");
        return;
      }
      if (!stopped) await sleep(retryDelay);
    }
  })();

  return {
    stop: () => {
      stopped = true;
    },
    done,
    lastSeq: () => lastSeq,
  };
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
