// Application wiring: join a session, reduce the event stream into state,
// render on every change. All mutations flow through the reducer; API calls
// are fire-and-report (errors surface in the banner, state comes back via
// the stream).

import { ApiClient, ApiError } from "./api.js";
import type { PlanInput } from "./api.js";
import { initialState, reduce } from "./state.js";
import type { ClientAction, ClientSessionState } from "./state.js";
import { openEventStream } from "./stream.js";
import type { StreamHandle } from "./stream.js";
import { render } from "./ui.js";
import type { UiContext } from "./ui.js";
import type { RatingLetter, ReferenceModel, ResultsDocument, RoleName } from "./types.js";

export interface AppConfig {
  root: HTMLElement;
  baseUrl: string;
  sessionId: string;
  token: string;
  name: string;
  role: RoleName;
  fetchImpl?: typeof fetch;
}

export interface AppHandle {
  participantId: string;
  api: ApiClient;
  getState: () => ClientSessionState;
  getContext: () => UiContext;
  waitFor: (predicate: (state: ClientSessionState) => boolean, timeoutMs?: number) => Promise<void>;
  stop: () => void;
}

export async function startApp(config: AppConfig): Promise<AppHandle> {
  const api = new ApiClient(config.baseUrl, config.fetchImpl);
  const joined = await api.join(config.sessionId, config.name, config.role, config.token);
  const model: ReferenceModel = await api.model();

  let state = initialState();
  state = reduce(state, { kind: "configure", totalItems: model.indicators.length });
  let whoVoted: string[] = [];
  let results: ResultsDocument | null = null;
  let reportMarkdown = "";
  let lastError = "";
  let organization = "";
  const waiters: { predicate: (s: ClientSessionState) => boolean; resolve: () => void }[] = [];

  const context = (): UiContext => ({
    state,
    model,
    role: joined.role,
    selfId: joined.participant_id,
    organization,
    whoVoted,
    results,
    reportMarkdown,
    lastError,
  });

  const paint = () => render(config.root, context(), callbacks);

  const flushWaiters = () => {
    for (const waiter of [...waiters]) {
      if (waiter.predicate(state)) {
        waiters.splice(waiters.indexOf(waiter), 1);
        waiter.resolve();
      }
    }
  };

  const dispatch = (action: ClientAction) => {
    state = reduce(state, action);
    paint();
    flushWaiters();
  };

  const report = (error: unknown) => {
    lastError = error instanceof ApiError ? `${error.type}: ${error.message}` : String(error);
    paint();
  };

  const call = (work: Promise<unknown>) => {
    lastError = "";
    work.catch(report);
  };

  const refreshModeratorProgress = async () => {
    if (joined.role !== "moderator") return;
    try {
      const view = await api.getSession(config.sessionId, joined.participant_id);
      organization = view.organization;
      whoVoted = view.current_item?.voted ?? [];
      paint();
    } catch {
      // progress panel is advisory; the stream remains the source of truth
    }
  };

  const loadResults = async () => {
    try {
      results = await api.results(config.sessionId, joined.participant_id);
      paint();
      flushWaiters();
      reportMarkdown = await api.reportMarkdown(config.sessionId, joined.participant_id);
      paint();
      flushWaiters();
    } catch (error) {
      report(error);
    }
  };

  const callbacks = {
    onVote: (rating: RatingLetter) => {
      dispatch({ kind: "local_vote", rating });
      call(api.vote(config.sessionId, joined.participant_id, rating));
    },
    onJustify: (text: string) => {
      call(api.justify(config.sessionId, joined.participant_id, text));
    },
    onResolve: () => {
      call(api.resolveRound(config.sessionId, joined.participant_id));
    },
    onConsensus: (rating: RatingLetter, evidence: string[]) => {
      call(api.recordConsensus(config.sessionId, joined.participant_id, rating, evidence));
    },
    onPhase: (action: "begin_collection" | "finalize" | "close") => {
      call(api.changePhase(config.sessionId, joined.participant_id, action));
    },
  };

  const stream: StreamHandle = openEventStream({
    baseUrl: config.baseUrl,
    sessionId: config.sessionId,
    participantId: joined.participant_id,
    fetchImpl: config.fetchImpl,
    onStatus: (status) => {
      dispatch({
        kind: "connection",
        value: status === "connecting" ? "connecting" : status === "live" ? "live" : status,
      });
    },
    onEvent: (event) => {
      dispatch({ kind: "event", event });
      if (event.type === "vote_progress" || event.type === "item_opened") {
        void refreshModeratorProgress();
      }
      if (event.type === "phase_changed" && event.payload["to"] === "reporting") {
        void loadResults();
      }
    },
  });

  // initial metadata (organization name) for the header
  try {
    const view = await api.getSession(config.sessionId, joined.participant_id);
    organization = view.organization;
    if (view.phase === "reporting" || view.phase === "closed") void loadResults();
  } catch {
    // stream replay still renders the session
  }
  paint();

  return {
    participantId: joined.participant_id,
    api,
    getState: () => state,
    getContext: context,
    waitFor: (predicate, timeoutMs = 10000) =>
      new Promise<void>((resolve, reject) => {
        if (predicate(state)) {
          resolve();
          return;
        }
        const waiter = { predicate, resolve };
        waiters.push(waiter);
        setTimeout(() => {
          const index = waiters.indexOf(waiter);
          if (index >= 0) {
            waiters.splice(index, 1);
            reject(
              new Error(`timed out waiting for state: ${predicate.toString()}`),
            );
          }
        }, timeoutMs);
      }),
    stop: () => stream.stop(),
  };
}

// -- plain join/create forms for interactive use --------------------------------

function formValue(form: HTMLElement, name: string): string {
  return (form.querySelector(`[name=${name}]`) as HTMLInputElement | null)?.value.trim() ?? "";
}

export function bootJoinScreen(root: HTMLElement, baseUrl: string): void {
  root.innerHTML = `
    <h1>Usability process self-assessment</h1>
    <section id="create-form">
      <h2>Create a session (moderator)</h2>
      <input name="organization" placeholder="organization name">
      <input name="moderator" placeholder="your name">
      <input name="assessors" placeholder="assessor names, comma separated">
      <button id="create">Create session</button>
      <p id="create-output"></p>
    </section>
    <section id="join-form">
      <h2>Join a session</h2>
      <input name="session" placeholder="session id">
      <input name="token" placeholder="join token">
      <input name="name" placeholder="your name">
      <select name="role">
        <option value="assessor">assessor</option>
        <option value="moderator">moderator</option>
        <option value="sponsor">sponsor</option>
      </select>
      <button id="join">Join</button>
      <p id="join-output" role="alert"></p>
    </section>
  `;
  const api = new ApiClient(baseUrl);
  root.querySelector("#create")?.addEventListener("click", async () => {
    const output = root.querySelector("#create-output") as HTMLElement;
    const creator = formValue(root, "moderator");
    const assessors = formValue(root, "assessors")
      .split(",")
      .map((name) => name.trim())
      .filter(Boolean);
    const plan: PlanInput = {
      organization_name: formValue(root, "organization"),
      participants: [
        { display_name: creator, role: "moderator" },
        ...assessors.map((name) => ({ display_name: name, role: "assessor" as const })),
      ],
    };
    try {
      const created = await api.createSession(plan);
      output.textContent =
        `Session ${created.id} created. Share the join token: ${created.join_token}`;
    } catch (error) {
      output.textContent = String(error);
    }
  });
  root.querySelector("#join")?.addEventListener("click", async () => {
    const output = root.querySelector("#join-output") as HTMLElement;
    try {
      await startApp({
        root,
        baseUrl,
        sessionId: formValue(root, "session"),
        token: formValue(root, "token"),
        name: formValue(root, "name"),
        role: (formValue(root, "role") || "assessor") as RoleName,
      });
    } catch (error) {
      output.textContent = String(error);
    }
  });
}

if (typeof document !== "undefined") {
  const root = document.getElementById("app");
  if (root && root.dataset["autoboot"] === "1") {
    bootJoinScreen(root, window.location.origin);
  }
}
